//! Thresholded per-time slice complexes and the links between consecutive
//! slices that turn them into a zigzag.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{MvError, Result};
use crate::filtration::{freudenthal_complex, Simplex};
use crate::stack::{parse_csv_frame, ImageStack};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SetOp {
    #[default]
    Union,
    Intersection,
}

impl std::str::FromStr for SetOp {
    type Err = MvError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "union" => Ok(SetOp::Union),
            "intersection" => Ok(SetOp::Intersection),
            other => Err(MvError::invalid(format!(
                "unknown set operation {other:?} (expected union or intersection)"
            ))),
        }
    }
}

/// A complex over the shared 2D frame grid, simplices sorted by
/// `(dim, vertices)`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SliceComplex {
    simplices: Vec<Simplex>,
}

impl SliceComplex {
    pub fn from_simplices(mut simplices: Vec<Simplex>) -> Self {
        simplices.sort_unstable();
        simplices.dedup();
        SliceComplex { simplices }
    }

    pub fn simplices(&self) -> &[Simplex] {
        &self.simplices
    }

    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    pub fn contains(&self, s: &Simplex) -> bool {
        self.simplices.binary_search(s).is_ok()
    }

    pub fn is_subset_of(&self, other: &SliceComplex) -> bool {
        self.simplices.iter().all(|s| other.contains(s))
    }

    pub fn union(&self, other: &SliceComplex) -> SliceComplex {
        let mut v = self.simplices.clone();
        v.extend_from_slice(&other.simplices);
        SliceComplex::from_simplices(v)
    }

    pub fn intersection(&self, other: &SliceComplex) -> SliceComplex {
        SliceComplex {
            simplices: self
                .simplices
                .iter()
                .filter(|s| other.contains(s))
                .copied()
                .collect(),
        }
    }

    pub fn is_closed(&self) -> bool {
        self.simplices
            .iter()
            .all(|s| s.faces().all(|f| self.contains(&f)))
    }
}

/// Alternating sequence `K_1, L_1, K_2, L_2, ..., K_l` where each link
/// `L_o` is `K_o ∪ K_{o+1}` (or the intersection).
#[derive(Debug, Clone)]
pub struct SliceComplexSequence {
    pub rows: usize,
    pub cols: usize,
    pub times: Vec<usize>,
    pub slices: Vec<SliceComplex>,
    pub links: Vec<SliceComplex>,
    pub theta: f64,
    pub set_op: SetOp,
}

impl SliceComplexSequence {
    /// Length `2l - 1` of the interleaved sequence.
    pub fn len(&self) -> usize {
        (2 * self.slices.len()).saturating_sub(1)
    }

    pub fn is_empty(&self) -> bool {
        self.slices.is_empty()
    }

    /// Complex at 1-based interleaved position `p` (odd = slice, even = link).
    pub fn at(&self, p: usize) -> &SliceComplex {
        if p % 2 == 1 {
            &self.slices[(p - 1) / 2]
        } else {
            &self.links[p / 2 - 1]
        }
    }

    /// Checks that every link contains (union) or is contained in
    /// (intersection) both of its neighbours.
    pub fn validate(&self) -> Result<()> {
        if self.slices.is_empty() {
            return Err(MvError::Structural("empty slice sequence".into()));
        }
        if self.links.len() + 1 != self.slices.len() {
            return Err(MvError::Structural(format!(
                "{} slices need {} links, got {}",
                self.slices.len(),
                self.slices.len() - 1,
                self.links.len()
            )));
        }
        for (o, link) in self.links.iter().enumerate() {
            let (a, b) = (&self.slices[o], &self.slices[o + 1]);
            let ok = match self.set_op {
                SetOp::Union => a.is_subset_of(link) && b.is_subset_of(link),
                SetOp::Intersection => link.is_subset_of(a) && link.is_subset_of(b),
            };
            if !ok {
                return Err(MvError::Structural(format!(
                    "link {} is not a {:?} of slices {} and {}",
                    2 * o + 2,
                    self.set_op,
                    o + 1,
                    o + 2
                )));
            }
        }
        Ok(())
    }
}

/// Per-frame vertex sets `{(x, y) : Z(x, y, t_o) >= theta}` as sorted
/// 0-based frame-linear ids.
pub fn threshold_slices(stack: &ImageStack, theta: f64) -> Vec<Vec<u32>> {
    (1..=stack.frames())
        .map(|o| {
            stack
                .frame_values(o)
                .iter()
                .enumerate()
                .filter(|(_, &v)| v >= theta)
                .map(|(i, _)| i as u32)
                .collect()
        })
        .collect()
}

/// Induced subcomplexes of the frame triangulation on each vertex set, plus
/// the links between consecutive slices.
pub fn build_slice_complexes(
    vertex_sets: &[Vec<u32>],
    rows: usize,
    cols: usize,
    set_op: SetOp,
    theta: f64,
) -> Result<SliceComplexSequence> {
    let n = rows * cols;
    let frame = freudenthal_complex(&[rows, cols])?;
    let mut slices = Vec::with_capacity(vertex_sets.len());
    for (o, set) in vertex_sets.iter().enumerate() {
        if let Some(&v) = set.iter().find(|&&v| v as usize >= n) {
            return Err(MvError::invalid(format!(
                "slice {} has vertex {v} outside a {rows}x{cols} frame",
                o + 1
            )));
        }
        let member: HashSet<u32> = set.iter().copied().collect();
        slices.push(SliceComplex {
            simplices: frame
                .iter()
                .filter(|s| s.vertices().iter().all(|v| member.contains(v)))
                .copied()
                .collect(),
        });
    }
    let links = slices
        .windows(2)
        .map(|w| match set_op {
            SetOp::Union => w[0].union(&w[1]),
            SetOp::Intersection => w[0].intersection(&w[1]),
        })
        .collect();
    let seq = SliceComplexSequence {
        rows,
        cols,
        times: (1..=vertex_sets.len()).collect(),
        slices,
        links,
        theta,
        set_op,
    };
    seq.validate()?;
    Ok(seq)
}

/// Writes one 0/1 CSV mask per frame (`mask_001.csv`, ...).
pub fn write_masks(dir: &Path, sets: &[Vec<u32>], rows: usize, cols: usize) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| MvError::io(dir, e))?;
    for (o, set) in sets.iter().enumerate() {
        let mut mask = vec![0u8; rows * cols];
        for &v in set {
            mask[v as usize] = 1;
        }
        let mut out = String::new();
        for row in mask.chunks(cols) {
            let cells: Vec<&str> = row
                .iter()
                .map(|&b| if b == 1 { "1" } else { "0" })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        let path = dir.join(format!("mask_{:03}.csv", o + 1));
        fs::write(&path, out).map_err(|e| MvError::io(&path, e))?;
    }
    Ok(())
}

/// Reads masks written by [`write_masks`], in file-name order.
pub fn read_masks(dir: &Path) -> Result<(usize, usize, Vec<Vec<u32>>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .map_err(|e| MvError::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("mask_") && n.ends_with(".csv"))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(MvError::invalid(format!(
            "no mask_*.csv files in {}",
            dir.display()
        )));
    }
    let mut dims = None;
    let mut sets = Vec::new();
    for f in files {
        let body = fs::read_to_string(&f).map_err(|e| MvError::io(&f, e))?;
        let frame = parse_csv_frame(&f.display().to_string(), &body)?;
        let d = (frame.rows(), frame.cols());
        if *dims.get_or_insert(d) != d {
            return Err(MvError::invalid(format!(
                "mask {} has a different shape",
                f.display()
            )));
        }
        sets.push(
            frame
                .values()
                .iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(i, _)| i as u32)
                .collect(),
        );
    }
    let (rows, cols) = dims.expect("at least one mask");
    Ok((rows, cols, sets))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_extremes() {
        let st = ImageStack::new(vec![2, 2, 2], (0..8).map(f64::from).collect()).unwrap();
        assert!(threshold_slices(&st, 100.0).iter().all(|s| s.is_empty()));
        assert!(threshold_slices(&st, 0.0).iter().all(|s| s.len() == 4));
        assert_eq!(threshold_slices(&st, 5.0), vec![vec![], vec![1, 2, 3]]);
    }

    #[test]
    fn empty_slice_union_is_neighbour() {
        let seq = build_slice_complexes(&[vec![], vec![0, 1, 3]], 2, 2, SetOp::Union, 0.0).unwrap();
        assert!(seq.slices[0].is_empty());
        assert_eq!(seq.links[0], seq.slices[1]);
        // 3 vertices, edges 0-1, 1-3 and diagonal 0-3, triangle 0-1-3.
        assert_eq!(seq.slices[1].len(), 7);
    }

    #[test]
    fn identical_slices_union_to_themselves() {
        let set = vec![0, 1, 2, 4];
        let seq = build_slice_complexes(&[set.clone(), set], 3, 3, SetOp::Union, 0.0).unwrap();
        assert_eq!(seq.links[0], seq.slices[0]);
        assert_eq!(seq.len(), 3);
        assert_eq!(seq.at(2), &seq.links[0]);
    }

    #[test]
    fn slices_and_links_are_closed() {
        let sets = vec![vec![0, 1, 4, 5, 8], vec![2, 3, 6, 7, 8]];
        for op in [SetOp::Union, SetOp::Intersection] {
            let seq = build_slice_complexes(&sets, 3, 3, op, 0.0).unwrap();
            for p in 1..=seq.len() {
                assert!(seq.at(p).is_closed());
            }
        }
    }

    #[test]
    fn malformed_sequences_are_rejected() {
        let mut seq = build_slice_complexes(&[vec![0], vec![1]], 2, 2, SetOp::Union, 0.0).unwrap();
        seq.links[0] = SliceComplex::default();
        assert!(matches!(seq.validate(), Err(MvError::Structural(_))));
        seq.links.clear();
        assert!(seq.validate().is_err());
        assert!(build_slice_complexes(&[vec![9]], 2, 2, SetOp::Union, 0.0).is_err());
    }

    #[test]
    fn masks_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let sets = vec![vec![0, 3], vec![], vec![1, 2, 5]];
        write_masks(dir.path(), &sets, 2, 3).unwrap();
        let (r, c, back) = read_masks(dir.path()).unwrap();
        assert_eq!((r, c), (2, 3));
        assert_eq!(back, sets);
    }
}
