//! Synthetic stacks with known loops. Shapes are painted on a background;
//! ground-truth loops are annotated separately, since a hole may be formed
//! by several shapes (a disk with a ring's interior cut out, a wall across a
//! ring). The shipped patterns are capped by solid frames so that all their
//! loops lie on one void through time.
//!
//! The canonical patterns live as JSON under `patterns/` and are compiled in.

use std::fmt;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{MvError, Result};
use crate::stack::ImageStack;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseFamily {
    #[default]
    Gaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseSpec {
    #[serde(default)]
    pub family: NoiseFamily,
    /// Background mean.
    pub mu0: f64,
    pub sigma0: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma0 >= 0.0) || !self.mu0.is_finite() {
            return Err(MvError::invalid(format!(
                "noise needs a finite mean and sigma0 >= 0, got mu0 = {}, sigma0 = {}",
                self.mu0, self.sigma0
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PatternId {
    A1,
    A2,
    A3,
    A4,
    #[serde(rename = "cylinder")]
    Cylinder,
    #[serde(rename = "custom")]
    Custom,
}

impl PatternId {
    pub const STUDY: [PatternId; 4] = [PatternId::A1, PatternId::A2, PatternId::A3, PatternId::A4];
}

impl fmt::Display for PatternId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PatternId::A1 => "A1",
            PatternId::A2 => "A2",
            PatternId::A3 => "A3",
            PatternId::A4 => "A4",
            PatternId::Cylinder => "cylinder",
            PatternId::Custom => "custom",
        })
    }
}

impl std::str::FromStr for PatternId {
    type Err = MvError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "A1" | "a1" => Ok(PatternId::A1),
            "A2" | "a2" => Ok(PatternId::A2),
            "A3" | "a3" => Ok(PatternId::A3),
            "A4" | "a4" => Ok(PatternId::A4),
            "cylinder" => Ok(PatternId::Cylinder),
            other => Err(MvError::invalid(format!(
                "unknown pattern {other:?} (expected A1..A4 or cylinder)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Euclidean,
    Chebyshev,
}

impl Metric {
    fn dist(self, r: f64, c: f64, center: [f64; 2]) -> f64 {
        let (dr, dc) = ((r - center[0]).abs(), (c - center[1]).abs());
        match self {
            Metric::Euclidean => dr.hypot(dc),
            Metric::Chebyshev => dr.max(dc),
        }
    }
}

/// A drawn primitive, painted in list order. Disks and rects are solid at
/// ring intensity; a ring paints `inner <= d <= outer` at ring intensity and
/// `d < inner` at interior intensity. Coordinates are 1-based `(row, col)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Shape {
    Disk {
        frame: usize,
        center: [f64; 2],
        radius: f64,
    },
    Ring {
        frame: usize,
        center: [f64; 2],
        inner: f64,
        outer: f64,
    },
    /// Inclusive pixel ranges.
    Rect {
        frame: usize,
        rows: [usize; 2],
        cols: [usize; 2],
    },
}

impl Shape {
    pub fn frame(&self) -> usize {
        match *self {
            Shape::Disk { frame, .. } | Shape::Ring { frame, .. } | Shape::Rect { frame, .. } => {
                frame
            }
        }
    }
}

/// A disc where a loop may be reported.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Site {
    pub center: [f64; 2],
    pub radius: f64,
}

impl Site {
    pub fn contains(&self, x: [f64; 2], margin: f64) -> bool {
        (x[0] - self.center[0]).hypot(x[1] - self.center[1]) <= self.radius + margin
    }
}

/// Where a ground-truth loop sits in one frame. Several sites mean any of
/// them is acceptable: when a loop splits, which of the two holes carries
/// the new class is not determined by the data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopFrame {
    pub frame: usize,
    pub sites: Vec<Site>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoopSpec {
    pub id: u32,
    pub frames: Vec<LoopFrame>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSpec {
    pub id: PatternId,
    #[serde(default)]
    pub description: String,
    /// `[rows, cols, frames]`.
    pub dims: [usize; 3],
    #[serde(default = "default_spacing")]
    pub time_spacing: f64,
    #[serde(default)]
    pub metric: Metric,
    pub mu_ring: f64,
    pub mu_in: f64,
    pub shapes: Vec<Shape>,
    pub loops: Vec<LoopSpec>,
    pub noise: NoiseSpec,
}

fn default_spacing() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthEntry {
    pub loop_id: u32,
    pub frame: usize,
    pub present: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sites: Vec<Site>,
}

/// Consecutive frames where the same loop is present.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruthLink {
    pub loop_id: u32,
    pub from: usize,
    pub to: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthTable {
    pub pattern: PatternId,
    pub frames: usize,
    pub entries: Vec<TruthEntry>,
    pub links: Vec<TruthLink>,
}

impl TruthTable {
    pub fn present(&self) -> impl Iterator<Item = &TruthEntry> {
        self.entries.iter().filter(|e| e.present)
    }

    pub fn loop_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.entries.iter().map(|e| e.loop_id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn get(&self, loop_id: u32, frame: usize) -> Option<&TruthEntry> {
        self.entries
            .iter()
            .find(|e| e.loop_id == loop_id && e.frame == frame && e.present)
    }
}

const PATTERN_FILES: [(PatternId, &str); 5] = [
    (PatternId::A1, include_str!("../patterns/A1.json")),
    (PatternId::A2, include_str!("../patterns/A2.json")),
    (PatternId::A3, include_str!("../patterns/A3.json")),
    (PatternId::A4, include_str!("../patterns/A4.json")),
    (
        PatternId::Cylinder,
        include_str!("../patterns/cylinder.json"),
    ),
];

impl PatternSpec {
    /// A shipped pattern.
    pub fn canonical(id: PatternId) -> Result<Self> {
        let (_, text) = PATTERN_FILES
            .iter()
            .find(|(p, _)| *p == id)
            .ok_or_else(|| MvError::invalid(format!("no shipped definition for pattern {id}")))?;
        Self::from_json(&format!("<builtin {id}>"), text)
    }

    pub fn from_json(file: &str, text: &str) -> Result<Self> {
        let spec: PatternSpec = serde_json::from_str(text).map_err(|e| MvError::Parse {
            file: file.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| MvError::io(path, e))?;
        Self::from_json(&path.display().to_string(), &text)
    }

    pub fn validate(&self) -> Result<()> {
        let [rows, cols, frames] = self.dims;
        if rows == 0 || cols == 0 || frames == 0 {
            return Err(MvError::invalid(format!(
                "pattern dims {:?} must be positive",
                self.dims
            )));
        }
        self.noise.validate()?;
        let fits = |center: [f64; 2], r: f64| {
            center[0] - r >= 1.0 - 1e-9
                && center[1] - r >= 1.0 - 1e-9
                && center[0] + r <= rows as f64 + 1e-9
                && center[1] + r <= cols as f64 + 1e-9
        };
        for (k, shape) in self.shapes.iter().enumerate() {
            let ok = match *shape {
                Shape::Disk { center, radius, .. } => radius > 0.0 && fits(center, radius),
                Shape::Ring {
                    center,
                    inner,
                    outer,
                    ..
                } => inner > 0.0 && inner <= outer && fits(center, outer),
                Shape::Rect {
                    rows: r, cols: c, ..
                } => {
                    1 <= r[0]
                        && r[0] <= r[1]
                        && r[1] <= rows
                        && 1 <= c[0]
                        && c[0] <= c[1]
                        && c[1] <= cols
                }
            };
            let f = shape.frame();
            if !ok || f == 0 || f > frames {
                return Err(MvError::invalid(format!(
                    "shape {} (frame {f}) does not fit a {rows}x{cols}x{frames} stack",
                    k + 1
                )));
            }
        }
        for l in &self.loops {
            for lf in &l.frames {
                if lf.frame == 0
                    || lf.frame > frames
                    || lf.sites.is_empty()
                    || lf.sites.iter().any(|s| !fits(s.center, s.radius))
                {
                    return Err(MvError::invalid(format!(
                        "loop {} frame {} out of bounds",
                        l.id, lf.frame
                    )));
                }
            }
        }
        if frames >= 3 {
            for o in [1, frames] {
                if !self.shapes.iter().any(|s| s.frame() == o) {
                    return Err(MvError::invalid(format!(
                        "frame {o} needs a solid component to cap the loops"
                    )));
                }
            }
            for o in 2..frames {
                if !self
                    .loops
                    .iter()
                    .any(|l| l.frames.iter().any(|f| f.frame == o))
                {
                    return Err(MvError::invalid(format!("middle frame {o} has no loop")));
                }
            }
        }
        Ok(())
    }

    /// The noiseless stack.
    pub fn render(&self, mu0: f64) -> Result<ImageStack> {
        let [rows, cols, frames] = self.dims;
        let mut values = vec![mu0; rows * cols * frames];
        let idx = |o: usize, r: usize, c: usize| (o - 1) * rows * cols + (r - 1) * cols + (c - 1);
        for shape in &self.shapes {
            for r in 1..=rows {
                for c in 1..=cols {
                    let (rf, cf) = (r as f64, c as f64);
                    let v = match *shape {
                        Shape::Disk { center, radius, .. } => {
                            (self.metric.dist(rf, cf, center) <= radius).then_some(self.mu_ring)
                        }
                        Shape::Ring {
                            center,
                            inner,
                            outer,
                            ..
                        } => {
                            let d = self.metric.dist(rf, cf, center);
                            if d < inner {
                                Some(self.mu_in)
                            } else {
                                (d <= outer).then_some(self.mu_ring)
                            }
                        }
                        Shape::Rect {
                            rows: rr, cols: cc, ..
                        } => (rr[0] <= r && r <= rr[1] && cc[0] <= c && c <= cc[1])
                            .then_some(self.mu_ring),
                    };
                    if let Some(v) = v {
                        values[idx(shape.frame(), r, c)] = v;
                    }
                }
            }
        }
        ImageStack::with_spacing(vec![rows, cols, frames], values, self.time_spacing)
    }

    pub fn truth_table(&self) -> TruthTable {
        let frames = self.dims[2];
        let mut entries = Vec::new();
        let mut links = Vec::new();
        for l in &self.loops {
            for o in 1..=frames {
                let at = l.frames.iter().find(|f| f.frame == o);
                entries.push(TruthEntry {
                    loop_id: l.id,
                    frame: o,
                    present: at.is_some(),
                    sites: at.map(|f| f.sites.clone()).unwrap_or_default(),
                });
                if o < frames && at.is_some() && l.frames.iter().any(|f| f.frame == o + 1) {
                    links.push(TruthLink {
                        loop_id: l.id,
                        from: o,
                        to: o + 1,
                    });
                }
            }
        }
        TruthTable {
            pattern: self.id,
            frames,
            entries,
            links,
        }
    }
}

/// Renders `spec` and adds i.i.d. noise: `(raw, truth, table)`.
pub fn generate(
    spec: &PatternSpec,
    noise: &NoiseSpec,
) -> Result<(ImageStack, ImageStack, TruthTable)> {
    spec.validate()?;
    noise.validate()?;
    let truth = spec.render(noise.mu0)?;
    let raw = if noise.sigma0 == 0.0 {
        truth.clone()
    } else {
        let dist = Normal::new(0.0, noise.sigma0).map_err(|e| MvError::invalid(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(noise.seed);
        let values = truth
            .values()
            .iter()
            .map(|v| v + dist.sample(&mut rng))
            .collect();
        truth.with_values(values)?
    };
    Ok((raw, truth, spec.truth_table()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtration::filter_stack;
    use crate::persistence::{betti_at, compute_persistence};

    #[test]
    fn shipped_patterns_parse_and_validate() {
        for (id, _) in PATTERN_FILES {
            let spec = PatternSpec::canonical(id).unwrap();
            assert_eq!(spec.id, id);
        }
    }

    #[test]
    fn zero_noise_is_truth() {
        let spec = PatternSpec::canonical(PatternId::A2).unwrap();
        let noise = NoiseSpec {
            sigma0: 0.0,
            ..spec.noise.clone()
        };
        let (raw, truth, _) = generate(&spec, &noise).unwrap();
        assert_eq!(raw, truth);
    }

    #[test]
    fn a2_has_one_contiguous_loop() {
        let spec = PatternSpec::canonical(PatternId::A2).unwrap();
        let table = spec.truth_table();
        assert_eq!(table.loop_ids(), vec![1]);
        let frames: Vec<usize> = table.present().map(|e| e.frame).collect();
        assert!(frames.windows(2).all(|w| w[1] == w[0] + 1));
        assert_eq!(table.links.len(), frames.len() - 1);
    }

    #[test]
    fn noise_is_seeded() {
        let spec = PatternSpec::canonical(PatternId::A1).unwrap();
        let a = generate(&spec, &spec.noise).unwrap().0;
        let b = generate(&spec, &spec.noise).unwrap().0;
        assert_eq!(a, b);
        let other = NoiseSpec {
            seed: spec.noise.seed + 1,
            ..spec.noise.clone()
        };
        assert_ne!(a, generate(&spec, &other).unwrap().0);
    }

    #[test]
    fn noiseless_cylinder_has_one_void() {
        let spec = PatternSpec::canonical(PatternId::Cylinder).unwrap();
        let (raw, _, _) = generate(&spec, &spec.noise).unwrap();
        let pd = compute_persistence(&filter_stack(&raw, 3).unwrap(), 2);
        let h2: Vec<_> = pd.in_dim(2).collect();
        assert_eq!(h2.len(), 1);
        assert_eq!((h2[0].birth, h2[0].death), (10.0, 2.0));
    }

    #[test]
    fn truth_frames_hold_the_listed_loops() {
        for (id, _) in PATTERN_FILES {
            let spec = PatternSpec::canonical(id).unwrap();
            let truth = spec.render(0.0).unwrap();
            let table = spec.truth_table();
            for o in 1..=spec.dims[2] {
                let fc = filter_stack(&truth.slice_at_time(o).unwrap(), 2).unwrap();
                let loops = table.present().filter(|e| e.frame == o).count();
                assert_eq!(betti_at(&fc, spec.mu_ring, 1)[1], loops, "{id} frame {o}");
            }
            // All loops lie on a single void through time.
            let pd = compute_persistence(&filter_stack(&truth, 3).unwrap(), 2);
            assert_eq!(pd.betti_at(2, spec.mu_ring), 1, "{id}");
        }
    }

    #[test]
    fn geometry_out_of_bounds() {
        let mut spec = PatternSpec::canonical(PatternId::A2).unwrap();
        spec.loops[0].frames[0].sites[0].center = [2.0, 2.0];
        assert!(spec.validate().is_err());
        let mut spec = PatternSpec::canonical(PatternId::A2).unwrap();
        spec.shapes.retain(|s| s.frame() != 1);
        assert!(spec.validate().is_err());
    }
}
