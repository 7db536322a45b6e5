//! Time-stacked grayscale image arrays.
//!
//! Values are stored row-major within a frame (axis 0 = rows, axis 1 =
//! columns, columns fastest) and frames follow one another, so time is the
//! slowest axis. All user-facing coordinates are 1-based.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{MvError, Result};

/// A 1-based grid coordinate `(x1, ..., xM)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridCoord(pub Vec<usize>);

#[derive(Debug, Clone, PartialEq)]
pub struct ImageStack {
    dims: Vec<usize>,
    values: Vec<f64>,
    time_spacing: f64,
}

impl ImageStack {
    pub fn new(dims: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        Self::with_spacing(dims, values, 1.0)
    }

    pub fn with_spacing(dims: Vec<usize>, values: Vec<f64>, time_spacing: f64) -> Result<Self> {
        if dims.len() < 2 || dims.len() > 3 {
            return Err(MvError::invalid(format!(
                "stacks must have 2 or 3 axes, got {}",
                dims.len()
            )));
        }
        if dims.contains(&0) {
            return Err(MvError::invalid(format!(
                "zero-length axis in dims {dims:?}"
            )));
        }
        let n: usize = dims.iter().product();
        if values.len() != n {
            return Err(MvError::invalid(format!(
                "dims {dims:?} need {n} values, got {}",
                values.len()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(MvError::invalid(format!(
                "non-finite value {} at linear index {i}",
                values[i]
            )));
        }
        if !time_spacing.is_finite() || time_spacing <= 0.0 {
            return Err(MvError::invalid(format!(
                "time spacing must be positive, got {time_spacing}"
            )));
        }
        Ok(ImageStack {
            dims,
            values,
            time_spacing,
        })
    }

    /// Builds a single 2D frame from row-major values.
    pub fn frame(rows: usize, cols: usize, values: Vec<f64>) -> Result<Self> {
        Self::new(vec![rows, cols], values)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn ndim(&self) -> usize {
        self.dims.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn time_spacing(&self) -> f64 {
        self.time_spacing
    }

    pub fn set_time_spacing(&mut self, spacing: f64) -> Result<()> {
        if !spacing.is_finite() || spacing <= 0.0 {
            return Err(MvError::invalid(format!(
                "time spacing must be positive, got {spacing}"
            )));
        }
        self.time_spacing = spacing;
        Ok(())
    }

    pub fn rows(&self) -> usize {
        self.dims[0]
    }

    pub fn cols(&self) -> usize {
        self.dims[1]
    }

    /// Number of time frames; a 2D stack counts as one frame.
    pub fn frames(&self) -> usize {
        if self.dims.len() == 3 {
            self.dims[2]
        } else {
            1
        }
    }

    pub fn frame_len(&self) -> usize {
        self.dims[0] * self.dims[1]
    }

    /// Seconds from the first frame to frame `o` (1-based).
    pub fn time_offset(&self, o: usize) -> f64 {
        (o as f64 - 1.0) * self.time_spacing
    }

    pub fn strides(&self) -> Vec<usize> {
        let mut s = vec![self.dims[1], 1];
        if self.dims.len() == 3 {
            s.push(self.dims[0] * self.dims[1]);
        }
        s
    }

    pub fn linear_index(&self, coord: &GridCoord) -> Result<usize> {
        if coord.0.len() != self.dims.len() {
            return Err(MvError::invalid(format!(
                "coordinate {:?} has wrong arity for dims {:?}",
                coord.0, self.dims
            )));
        }
        let strides = self.strides();
        let mut idx = 0;
        for ((&c, &d), &s) in coord.0.iter().zip(&self.dims).zip(&strides) {
            if c == 0 || c > d {
                return Err(MvError::OutOfRange { index: c, len: d });
            }
            idx += (c - 1) * s;
        }
        Ok(idx)
    }

    pub fn coord_of(&self, linear: usize) -> GridCoord {
        let (r, c) = (
            (linear % self.frame_len()) / self.dims[1],
            linear % self.dims[1],
        );
        let mut v = vec![r + 1, c + 1];
        if self.dims.len() == 3 {
            v.push(linear / self.frame_len() + 1);
        }
        GridCoord(v)
    }

    pub fn get(&self, coord: &GridCoord) -> Result<f64> {
        Ok(self.values[self.linear_index(coord)?])
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Returns frame `o` (1-based) as a 2D stack.
    pub fn slice_at_time(&self, o: usize) -> Result<ImageStack> {
        let n = self.frames();
        if o == 0 || o > n {
            return Err(MvError::OutOfRange { index: o, len: n });
        }
        let fl = self.frame_len();
        let vals = self.values[(o - 1) * fl..o * fl].to_vec();
        ImageStack::with_spacing(vec![self.dims[0], self.dims[1]], vals, self.time_spacing)
    }

    pub fn frame_values(&self, o: usize) -> &[f64] {
        let fl = self.frame_len();
        &self.values[(o - 1) * fl..o * fl]
    }

    /// Stacks equally sized 2D frames along a new time axis.
    pub fn from_frames(frames: &[ImageStack], time_spacing: f64) -> Result<ImageStack> {
        let first = frames
            .first()
            .ok_or_else(|| MvError::invalid("empty frame list"))?;
        let (rows, cols) = (first.rows(), first.cols());
        let mut values = Vec::with_capacity(rows * cols * frames.len());
        for (i, f) in frames.iter().enumerate() {
            if f.ndim() != 2 || f.rows() != rows || f.cols() != cols {
                return Err(MvError::invalid(format!(
                    "frame {} has dims {:?}, expected [{rows}, {cols}]",
                    i + 1,
                    f.dims()
                )));
            }
            values.extend_from_slice(f.values());
        }
        ImageStack::with_spacing(vec![rows, cols, frames.len()], values, time_spacing)
    }

    /// Replaces the values, keeping geometry. Used by pipelines that
    /// transform intensities in place of allocating a fresh stack by hand.
    pub fn with_values(&self, values: Vec<f64>) -> Result<ImageStack> {
        ImageStack::with_spacing(self.dims.clone(), values, self.time_spacing)
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Result<ImageStack> {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }
}

/// RNG for permutation replicate `stream` under `seed`. Each stream is an
/// independent ChaCha keystream, so replicate `q` does not depend on the
/// order replicates are drawn in.
pub fn replicate_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform random permutation of all pixel intensities over the full grid.
pub fn permute_stack(stack: &ImageStack, seed: u64) -> ImageStack {
    permute_stack_stream(stack, seed, 0)
}

pub fn permute_stack_stream(stack: &ImageStack, seed: u64, stream: u64) -> ImageStack {
    let mut values = stack.values.clone();
    values.shuffle(&mut replicate_rng(seed, stream));
    ImageStack {
        dims: stack.dims.clone(),
        values,
        time_spacing: stack.time_spacing,
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum FrameEntry {
    Path(String),
    Indexed { path: String, time_index: usize },
}

#[derive(Debug, Deserialize)]
struct Manifest {
    frames: Vec<FrameEntry>,
    #[serde(default = "default_spacing")]
    time_spacing_seconds: f64,
}

fn default_spacing() -> f64 {
    1.0
}

#[derive(Debug, Serialize)]
struct ManifestOut<'a> {
    frames: Vec<String>,
    time_spacing_seconds: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    description: Option<&'a str>,
}

/// Loads a stack from a JSON manifest of CSV frames, or from a
/// self-describing text file with a `dims:` header.
pub fn load_stack(path: &Path) -> Result<ImageStack> {
    let text = fs::read_to_string(path).map_err(|e| MvError::io(path, e))?;
    if path.extension().is_some_and(|e| e == "json") {
        load_manifest(path, &text)
    } else {
        parse_dims_text(&path.display().to_string(), &text)
    }
}

fn load_manifest(path: &Path, text: &str) -> Result<ImageStack> {
    let manifest: Manifest = serde_json::from_str(text).map_err(|e| MvError::Parse {
        file: path.display().to_string(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    if manifest.frames.is_empty() {
        return Err(MvError::Parse {
            file: path.display().to_string(),
            line: 1,
            column: 1,
            message: "manifest lists no frames".into(),
        });
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let mut entries: Vec<(usize, String)> = manifest
        .frames
        .into_iter()
        .enumerate()
        .map(|(i, e)| match e {
            FrameEntry::Path(p) => (i + 1, p),
            FrameEntry::Indexed { path, time_index } => (time_index, path),
        })
        .collect();
    entries.sort_by_key(|(t, _)| *t);
    if entries.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(MvError::invalid(format!(
            "{}: duplicate time_index in frame list",
            path.display()
        )));
    }
    let mut frames = Vec::with_capacity(entries.len());
    for (_, rel) in &entries {
        let fp: PathBuf = base.join(rel);
        let body = fs::read_to_string(&fp).map_err(|e| MvError::io(&fp, e))?;
        let frame = parse_csv_frame(&fp.display().to_string(), &body)?;
        if let Some(first) = frames.first() {
            let first: &ImageStack = first;
            if first.dims() != frame.dims() {
                return Err(MvError::invalid(format!(
                    "frame {} has dims {:?}, expected {:?}",
                    fp.display(),
                    frame.dims(),
                    first.dims()
                )));
            }
        }
        frames.push(frame);
    }
    ImageStack::from_frames(&frames, manifest.time_spacing_seconds)
}

/// Parses a headerless numeric CSV into a 2D frame.
pub fn parse_csv_frame(file: &str, text: &str) -> Result<ImageStack> {
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (ln, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut n = 0;
        for (cn, cell) in line.split(',').enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| MvError::Parse {
                file: file.to_string(),
                line: ln + 1,
                column: cn + 1,
                message: format!("non-numeric cell {:?}", cell.trim()),
            })?;
            if !v.is_finite() {
                return Err(MvError::Parse {
                    file: file.to_string(),
                    line: ln + 1,
                    column: cn + 1,
                    message: "non-finite value".into(),
                });
            }
            values.push(v);
            n += 1;
        }
        match cols {
            None => cols = Some(n),
            Some(c) if c != n => {
                return Err(MvError::Parse {
                    file: file.to_string(),
                    line: ln + 1,
                    column: n.min(c) + 1,
                    message: format!("ragged row: {n} cells, expected {c}"),
                })
            }
            _ => {}
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| MvError::Parse {
        file: file.to_string(),
        line: 1,
        column: 1,
        message: "empty frame".into(),
    })?;
    ImageStack::frame(rows, cols, values)
}

/// Parses the `dims: d1 d2 [d3]` text format. An optional
/// `time_spacing: s` line may follow the header.
pub fn parse_dims_text(file: &str, text: &str) -> Result<ImageStack> {
    let perr = |line: usize, column: usize, message: String| MvError::Parse {
        file: file.to_string(),
        line,
        column,
        message,
    };
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (hl, header) = lines
        .next()
        .ok_or_else(|| perr(1, 1, "empty file".into()))?;
    let rest = header
        .trim()
        .strip_prefix("dims:")
        .ok_or_else(|| perr(hl + 1, 1, "expected `dims:` header".into()))?;
    let dims = rest
        .split_whitespace()
        .map(|t| t.parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| perr(hl + 1, 6, format!("bad dimension: {e}")))?;
    let mut spacing = 1.0;
    let mut values = Vec::new();
    for (ln, line) in lines {
        if let Some(s) = line.trim().strip_prefix("time_spacing:") {
            spacing = s
                .trim()
                .parse()
                .map_err(|_| perr(ln + 1, 1, format!("bad time spacing {:?}", s.trim())))?;
            continue;
        }
        for (tn, tok) in line.split_whitespace().enumerate() {
            let v: f64 = tok
                .parse()
                .map_err(|_| perr(ln + 1, tn + 1, format!("non-numeric value {tok:?}")))?;
            values.push(v);
        }
    }
    ImageStack::with_spacing(dims, values, spacing)
}

/// Writes `frame_001.csv`, ... plus `manifest.json` into `dir`.
pub fn save_stack_manifest(stack: &ImageStack, dir: &Path, prefix: &str) -> Result<PathBuf> {
    fs::create_dir_all(dir).map_err(|e| MvError::io(dir, e))?;
    let mut names = Vec::new();
    for o in 1..=stack.frames() {
        let name = format!("{prefix}_{o:03}.csv");
        write_csv_frame(&dir.join(&name), stack.cols(), stack.frame_values(o))?;
        names.push(name);
    }
    let manifest = ManifestOut {
        frames: names,
        time_spacing_seconds: stack.time_spacing(),
        description: None,
    };
    let path = dir.join(format!("{prefix}_manifest.json"));
    let body = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, body + "\n").map_err(|e| MvError::io(&path, e))?;
    Ok(path)
}

pub fn write_csv_frame(path: &Path, cols: usize, values: &[f64]) -> Result<()> {
    let mut out = String::with_capacity(values.len() * 8);
    for row in values.chunks(cols) {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| MvError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn stack223() -> ImageStack {
        ImageStack::new(vec![2, 2, 3], (0..12).map(f64::from).collect()).unwrap()
    }

    #[test]
    fn slice_returns_frame_in_order() {
        let s = stack223();
        let f = s.slice_at_time(2).unwrap();
        assert_eq!(f.dims(), &[2, 2]);
        assert_eq!(f.values(), &[4.0, 5.0, 6.0, 7.0]);
    }

    #[test]
    fn slice_bounds() {
        let s = stack223();
        assert!(matches!(
            s.slice_at_time(0),
            Err(MvError::OutOfRange { .. })
        ));
        assert!(s.slice_at_time(4).is_err());
    }

    #[test]
    fn slices_reassemble() {
        let s = stack223();
        let frames: Vec<_> = (1..=3).map(|o| s.slice_at_time(o).unwrap()).collect();
        assert_eq!(ImageStack::from_frames(&frames, 1.0).unwrap(), s);
    }

    #[test]
    fn coords_are_one_based() {
        let s = stack223();
        let c = GridCoord(vec![2, 1, 3]);
        let i = s.linear_index(&c).unwrap();
        assert_eq!(s.values()[i], 10.0);
        assert_eq!(s.coord_of(i), c);
        assert!(s.linear_index(&GridCoord(vec![0, 1, 1])).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        assert!(ImageStack::new(vec![1, 2], vec![1.0, f64::NAN]).is_err());
        assert!(ImageStack::new(vec![2, 2], vec![1.0; 3]).is_err());
    }

    #[test]
    fn thirty_frames_at_eight_seconds() {
        let s = ImageStack::with_spacing(vec![1, 1, 30], vec![0.0; 30], 8.0).unwrap();
        assert_eq!(s.time_spacing(), 8.0);
        assert_eq!(s.time_offset(30), 232.0);
        assert_eq!(s.time_offset(1), 0.0);
    }

    #[test]
    fn constant_stack_permutes_to_itself() {
        let s = ImageStack::new(vec![3, 3, 2], vec![4.5; 18]).unwrap();
        for seed in [0, 1, 99] {
            assert_eq!(permute_stack(&s, seed), s);
        }
    }

    #[test]
    fn distinct_seeds_give_distinct_permutations() {
        let s = ImageStack::new(vec![4, 4, 4], (0..64).map(f64::from).collect()).unwrap();
        let a = permute_stack(&s, 1);
        let b = permute_stack(&s, 2);
        assert_ne!(a.values(), b.values());
        assert_eq!(permute_stack(&s, 1), a);
        assert_ne!(
            permute_stack_stream(&s, 1, 1).values(),
            permute_stack_stream(&s, 1, 2).values()
        );
    }

    #[test]
    fn parses_dims_text() {
        let s = parse_dims_text("t", "dims: 2 2 2\ntime_spacing: 8\n1 2 3 4\n5 6 7 8\n").unwrap();
        assert_eq!(s.dims(), &[2, 2, 2]);
        assert_eq!(s.time_spacing(), 8.0);
        assert_eq!(s.slice_at_time(2).unwrap().values(), &[5.0, 6.0, 7.0, 8.0]);
        let err = parse_dims_text("t", "dims: 1 2\n1 x\n").unwrap_err();
        assert!(
            matches!(
                err,
                MvError::Parse {
                    line: 2,
                    column: 2,
                    ..
                }
            ),
            "{err}"
        );
    }

    #[test]
    fn csv_errors_carry_position() {
        let err = parse_csv_frame("f.csv", "1,2\n3\n").unwrap_err();
        assert!(matches!(err, MvError::Parse { line: 2, .. }), "{err}");
        let err = parse_csv_frame("f.csv", "1,2\n3,q\n").unwrap_err();
        assert!(
            matches!(
                err,
                MvError::Parse {
                    line: 2,
                    column: 2,
                    ..
                }
            ),
            "{err}"
        );
        assert!(parse_csv_frame("f.csv", "\n").is_err());
    }
}
