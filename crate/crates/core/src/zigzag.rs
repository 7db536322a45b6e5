//! Zigzag persistence over an interleaved slice/link sequence.
//!
//! The coarse sequence `K_1 → K_1∪K_2 ← K_2 → ...` is expanded into single
//! simplex insertions and deletions. Along that stream we keep a basis of
//! the cycle space in echelon form (unique pivot per column), split into
//! boundary cycles, each carrying a chain that bounds it, and live cycles,
//! each carrying a birth label.
//!
//! Live classes are ordered from most special to most general: classes born
//! by a deletion (later births first), then classes born by an insertion
//! (earlier births first). An insertion that kills a class kills the most
//! general class in the kernel; a deletion that kills a class kills the most
//! special class carrying the deleted simplex. Column additions only ever
//! add a more special column into a more general one, which keeps the basis
//! adapted to that order.

use std::fmt::Write as _;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{MvError, Result};
use crate::filtration::{ComplexTemplate, Simplex};
use crate::partition::{SetOp, SliceComplexSequence};
use crate::persistence::add_columns;
use crate::plot::{Marker, Svg};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZigzagInterval {
    pub dim: usize,
    pub birth_index: usize,
    pub death_index: usize,
    pub birth_time: f64,
    pub death_time: f64,
    /// The simplex whose insertion or deletion created the class.
    #[serde(skip)]
    pub birth_simplex: Option<Simplex>,
    /// Centroid `(row, col)`, 1-based, of the class representative at each
    /// slice position (odd index) the interval covers.
    #[serde(skip)]
    pub representatives: Representatives,
}

/// `(position, [row, col])` locations of one class.
pub type Representatives = Vec<(usize, [f64; 2])>;

impl ZigzagInterval {
    pub fn contains(&self, p: usize) -> bool {
        self.birth_index <= p && p <= self.death_index
    }

    pub fn len(&self) -> usize {
        self.death_index - self.birth_index + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Centroid `(row, col)`, 1-based, of the creating simplex on a frame
    /// with `cols` columns.
    pub fn birth_location(&self, cols: usize) -> Option<(f64, f64)> {
        let s = self.birth_simplex?;
        let v = s.vertices();
        let n = v.len() as f64;
        let (r, c) = v.iter().fold((0.0, 0.0), |(r, c), &id| {
            let id = id as usize;
            (r + (id / cols + 1) as f64, c + (id % cols + 1) as f64)
        });
        Some((r / n, c / n))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZigzagDiagram {
    pub intervals: Vec<ZigzagInterval>,
    pub sequence_length: usize,
}

/// Seconds for interleaved position `p`: slices land on whole frames,
/// links on half steps.
pub fn index_to_time(p: usize, spacing: f64) -> f64 {
    (p as f64 - 1.0) / 2.0 * spacing
}

impl ZigzagDiagram {
    pub fn in_dim(&self, m: usize) -> impl Iterator<Item = &ZigzagInterval> {
        self.intervals.iter().filter(move |i| i.dim == m)
    }

    /// Number of dimension-`m` intervals covering position `p`.
    pub fn coverage(&self, m: usize, p: usize) -> usize {
        self.in_dim(m).filter(|i| i.contains(p)).count()
    }

    /// Recomputes interval times for a frame spacing.
    pub fn with_spacing(mut self, spacing: f64) -> Self {
        for iv in &mut self.intervals {
            iv.birth_time = index_to_time(iv.birth_index, spacing);
            iv.death_time = index_to_time(iv.death_index, spacing);
        }
        self
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "dim,birth_index,death_index,birth_time,death_time")?;
        for iv in &self.intervals {
            writeln!(
                w,
                "{},{},{},{},{}",
                iv.dim, iv.birth_index, iv.death_index, iv.birth_time, iv.death_time
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to Vec");
        String::from_utf8(buf).expect("ascii")
    }
}

/// Renders a zigzag diagram as `(csv, svg)`: birth versus death time, `H0`
/// as circles and `H1` as triangles.
pub fn render_zigzag(zz: &ZigzagDiagram, time_spacing: f64) -> (String, String) {
    let zz = zz.clone().with_spacing(time_spacing);
    let span = index_to_time(zz.sequence_length.max(1), time_spacing).max(time_spacing);
    let mut svg = Svg::new(420.0, 420.0, (0.0, span), (0.0, span));
    svg.title("Zigzag diagram");
    svg.axes("birth (s)", "death (s)");
    svg.diagonal();
    for iv in &zz.intervals {
        let (marker, color) = if iv.dim == 0 {
            (Marker::Circle, "#1f4e9c")
        } else {
            (Marker::Triangle, "#c0262d")
        };
        svg.point(iv.birth_time, iv.death_time, marker, color);
    }
    svg.legend(&[
        ("H0", Marker::Circle, "#1f4e9c"),
        ("H1", Marker::Triangle, "#c0262d"),
    ]);
    (zz.to_csv(), svg.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Step {
    Add(u32),
    Remove(u32),
}

#[derive(Debug, Clone)]
enum Kind {
    Live {
        birth: usize,
        by_deletion: bool,
        creator: u32,
        bar: u32,
    },
    Boundary {
        chain: Vec<u32>,
    },
}

#[derive(Debug, Clone)]
struct Column {
    cycle: Vec<u32>,
    dim: u8,
    kind: Kind,
}

impl Column {
    /// Larger means more general.
    fn generality(&self) -> (u8, i64) {
        match self.kind {
            Kind::Boundary { .. } => (0, 0),
            Kind::Live {
                birth,
                by_deletion: true,
                ..
            } => (1, -(birth as i64)),
            Kind::Live {
                birth,
                by_deletion: false,
                ..
            } => (2, birth as i64),
        }
    }

    fn pivot(&self) -> Option<u32> {
        self.cycle.last().copied()
    }
}

/// Fine-grained interval `[birth, death]` over stream indices, inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
struct FineBar {
    dim: usize,
    birth: usize,
    death: usize,
    creator: u32,
    bar: u32,
}

fn add_into(scratch: &mut Vec<u32>, target: &mut Column, source: &Column) {
    add_columns(&target.cycle, &source.cycle, scratch);
    std::mem::swap(&mut target.cycle, scratch);
    if let (Kind::Boundary { chain: tc }, Kind::Boundary { chain: sc }) =
        (&mut target.kind, &source.kind)
    {
        add_columns(tc, sc, scratch);
        std::mem::swap(tc, scratch);
    }
}

struct Basis<'a> {
    template: &'a ComplexTemplate,
    cols: Vec<Option<Column>>,
    free: Vec<usize>,
    pivot_of: Vec<u32>,
    bars: Vec<FineBar>,
    scratch: Vec<u32>,
    /// Per bar id, representative centroids at snapshot positions.
    reps: Vec<Representatives>,
}

const NONE: u32 = u32::MAX;

impl<'a> Basis<'a> {
    fn new(template: &'a ComplexTemplate) -> Self {
        Basis {
            template,
            cols: Vec::new(),
            free: Vec::new(),
            pivot_of: vec![NONE; template.len()],
            bars: Vec::new(),
            scratch: Vec::new(),
            reps: Vec::new(),
        }
    }

    fn new_bar(&mut self) -> u32 {
        self.reps.push(Vec::new());
        (self.reps.len() - 1) as u32
    }

    /// Records where every live class currently sits: the centroid of the
    /// vertices outside `present` that its cycle encloses (odd crossing
    /// count of a rightward ray), or of the cycle itself for classes that
    /// enclose nothing, such as components.
    fn snapshot(&mut self, pos: usize, rows: usize, cols: usize, present: &[bool]) {
        let mut crossings: Vec<Vec<usize>> = vec![Vec::new(); rows];
        for c in self.cols.iter().flatten() {
            let Kind::Live { bar, .. } = c.kind else {
                continue;
            };
            crossings.iter_mut().for_each(Vec::clear);
            let (mut r, mut q, mut n) = (0.0, 0.0, 0.0);
            for &s in &c.cycle {
                let v = self.template.simplex(s as usize).vertices();
                for &id in v {
                    r += (id as usize / cols + 1) as f64;
                    q += (id as usize % cols + 1) as f64;
                    n += 1.0;
                }
                // Vertical and diagonal edges cross the strip just below
                // their upper endpoint's row.
                if let [a, b] = *v {
                    let (a, b) = (a as usize, b as usize);
                    if b - a == cols || b - a == cols + 1 {
                        crossings[a / cols].push(a % cols);
                    }
                }
            }
            let (mut hr, mut hc, mut hn) = (0.0, 0.0, 0.0);
            for (row, xs) in crossings.iter().enumerate() {
                for col in 0..cols {
                    if present[row * cols + col] {
                        continue;
                    }
                    if xs.iter().filter(|&&x| x > col).count() % 2 == 1 {
                        hr += (row + 1) as f64;
                        hc += (col + 1) as f64;
                        hn += 1.0;
                    }
                }
            }
            let loc = if hn > 0.0 {
                [hr / hn, hc / hn]
            } else if n > 0.0 {
                [r / n, q / n]
            } else {
                continue;
            };
            self.reps[bar as usize].push((pos, loc));
        }
    }

    fn take(&mut self, id: usize) -> Column {
        let col = self.cols[id].take().expect("live column id");
        if let Some(p) = col.pivot() {
            if self.pivot_of[p as usize] == id as u32 {
                self.pivot_of[p as usize] = NONE;
            }
        }
        self.free.push(id);
        col
    }

    /// Inserts a column, resolving pivot clashes by adding the more special
    /// column into the more general one.
    fn insert(&mut self, mut col: Column) -> Result<()> {
        loop {
            let p = col
                .pivot()
                .ok_or_else(|| MvError::Structural("cycle basis lost independence".into()))?;
            let owner = self.pivot_of[p as usize];
            if owner == NONE {
                let id = self.free.pop().unwrap_or_else(|| {
                    self.cols.push(None);
                    self.cols.len() - 1
                });
                self.pivot_of[p as usize] = id as u32;
                self.cols[id] = Some(col);
                return Ok(());
            }
            let owner = owner as usize;
            let resident = self.cols[owner].as_mut().expect("pivot owner exists");
            if col.generality() >= resident.generality() {
                add_into(&mut self.scratch, &mut col, resident);
            } else {
                let mut displaced = std::mem::replace(resident, col);
                add_into(&mut self.scratch, &mut displaced, resident);
                col = displaced;
            }
        }
    }

    fn add_simplex(&mut self, sigma: u32, step: usize) -> Result<()> {
        let dim = self.template.simplex(sigma as usize).dim() as u8;
        let mut bd: Vec<u32> = self.template.faces_of(sigma as usize).to_vec();
        bd.sort_unstable();
        let mut live_hits = Vec::new();
        let mut chain: Vec<u32> = vec![sigma];
        let mut v = bd.clone();
        while let Some(&p) = v.last() {
            let owner = self.pivot_of[p as usize];
            if owner == NONE {
                return Err(MvError::Structural(format!(
                    "boundary of simplex {sigma} is not a cycle of the current complex"
                )));
            }
            let col = self.cols[owner as usize].as_ref().expect("owner");
            add_columns(&v, &col.cycle, &mut self.scratch);
            std::mem::swap(&mut v, &mut self.scratch);
            match &col.kind {
                Kind::Boundary { chain: c } => {
                    add_columns(&chain, c, &mut self.scratch);
                    std::mem::swap(&mut chain, &mut self.scratch);
                }
                Kind::Live { .. } => live_hits.push(owner as usize),
            }
        }
        if live_hits.is_empty() {
            // ∂σ already bounds: σ closes a new cycle.
            chain.sort_unstable();
            let bar = self.new_bar();
            return self.insert(Column {
                cycle: chain,
                dim,
                kind: Kind::Live {
                    birth: step,
                    by_deletion: false,
                    creator: sigma,
                    bar,
                },
            });
        }
        let victim = *live_hits
            .iter()
            .max_by_key(|&&id| self.cols[id].as_ref().expect("hit").generality())
            .expect("non-empty");
        let dead = self.take(victim);
        if let Kind::Live {
            birth,
            creator,
            bar,
            ..
        } = dead.kind
        {
            self.bars.push(FineBar {
                dim: dead.dim as usize,
                birth,
                death: step - 1,
                creator,
                bar,
            });
        }
        self.insert(Column {
            cycle: bd,
            dim: dim - 1,
            kind: Kind::Boundary { chain: vec![sigma] },
        })
    }

    fn remove_simplex(&mut self, sigma: u32, step: usize) -> Result<()> {
        let dim = self.template.simplex(sigma as usize).dim() as u8;
        let carriers: Vec<usize> = (0..self.cols.len())
            .filter(|&id| {
                self.cols[id].as_ref().is_some_and(|c| {
                    c.dim == dim
                        && matches!(c.kind, Kind::Live { .. })
                        && c.cycle.binary_search(&sigma).is_ok()
                })
            })
            .collect();

        if let Some(&victim) = carriers
            .iter()
            .min_by_key(|&&id| self.cols[id].as_ref().expect("carrier").generality())
        {
            let dead = self.take(victim);
            if let Kind::Live {
                birth,
                creator,
                bar,
                ..
            } = dead.kind
            {
                self.bars.push(FineBar {
                    dim: dim as usize,
                    birth,
                    death: step - 1,
                    creator,
                    bar,
                });
            }
            // Bounding chains one dimension down must avoid σ too.
            for id in 0..self.cols.len() {
                if let Some(Column {
                    kind: Kind::Boundary { chain },
                    dim: d,
                    ..
                }) = self.cols[id].as_mut()
                {
                    if *d + 1 == dim && chain.binary_search(&sigma).is_ok() {
                        add_columns(chain, &dead.cycle, &mut self.scratch);
                        std::mem::swap(chain, &mut self.scratch);
                    }
                }
            }
            for &id in carriers.iter().filter(|&&id| id != victim) {
                let mut col = self.take(id);
                add_columns(&col.cycle, &dead.cycle, &mut self.scratch);
                std::mem::swap(&mut col.cycle, &mut self.scratch);
                self.insert(col)?;
            }
            return Ok(());
        }

        if dim == 0 {
            return Err(MvError::Structural(format!(
                "vertex {sigma} removed but no live cycle carries it"
            )));
        }
        // σ lies on no cycle: a bounded cycle loses its filling.
        let holders: Vec<usize> = (0..self.cols.len())
            .filter(|&id| {
                self.cols[id].as_ref().is_some_and(|c| {
                    c.dim + 1 == dim
                        && matches!(&c.kind, Kind::Boundary { chain } if chain.binary_search(&sigma).is_ok())
                })
            })
            .collect();
        // Freeing the holder with the lowest pivot keeps the others' pivots
        // unchanged when it is added into them.
        let Some(&freed) = holders
            .iter()
            .min_by_key(|&&id| self.cols[id].as_ref().and_then(Column::pivot))
        else {
            return Err(MvError::Structural(format!(
                "simplex {sigma} removed while it still has cofaces"
            )));
        };
        let freed_col = self.cols[freed].clone().expect("holder");
        for &id in holders.iter().filter(|&&id| id != freed) {
            let mut col = self.take(id);
            add_into(&mut self.scratch, &mut col, &freed_col);
            self.insert(col)?;
        }
        let bar = self.new_bar();
        let col = self.cols[freed].as_mut().expect("holder");
        col.kind = Kind::Live {
            birth: step,
            by_deletion: true,
            creator: sigma,
            bar,
        };
        Ok(())
    }

    fn finish(mut self, last: usize) -> (Vec<FineBar>, Vec<Representatives>) {
        for c in self.cols.iter().flatten() {
            if let Kind::Live {
                birth,
                creator,
                bar,
                ..
            } = c.kind
            {
                self.bars.push(FineBar {
                    dim: c.dim as usize,
                    birth,
                    death: last,
                    creator,
                    bar,
                });
            }
        }
        (self.bars, self.reps)
    }
}

fn canonical_ids(template: &ComplexTemplate, cx: &crate::partition::SliceComplex) -> Vec<u32> {
    cx.simplices()
        .iter()
        .map(|s| {
            template
                .simplices()
                .binary_search(s)
                .expect("slice simplex lies in the frame triangulation") as u32
        })
        .collect()
}

/// Expands the coarse sequence into a simplex stream. Returns the steps and,
/// for each coarse position, the stream index of its complex.
fn expand(template: &ComplexTemplate, seq: &SliceComplexSequence) -> (Vec<Step>, Vec<usize>) {
    let mut steps = Vec::new();
    let mut marks = Vec::with_capacity(seq.len());
    let diff = |a: &[u32], b: &[u32]| -> Vec<u32> {
        a.iter()
            .filter(|x| b.binary_search(x).is_err())
            .copied()
            .collect()
    };
    let slices: Vec<Vec<u32>> = seq
        .slices
        .iter()
        .map(|s| canonical_ids(template, s))
        .collect();
    let links: Vec<Vec<u32>> = seq
        .links
        .iter()
        .map(|s| canonical_ids(template, s))
        .collect();
    // Canonical ids are sorted by (dim, vertices): ascending order adds faces
    // first, descending order removes cofaces first.
    steps.extend(slices[0].iter().map(|&s| Step::Add(s)));
    marks.push(steps.len());
    for o in 0..links.len() {
        let (cur, link, next) = (&slices[o], &links[o], &slices[o + 1]);
        match seq.set_op {
            SetOp::Union => {
                steps.extend(diff(link, cur).into_iter().map(Step::Add));
                marks.push(steps.len());
                steps.extend(diff(link, next).into_iter().rev().map(Step::Remove));
            }
            SetOp::Intersection => {
                steps.extend(diff(cur, link).into_iter().rev().map(Step::Remove));
                marks.push(steps.len());
                steps.extend(diff(next, link).into_iter().map(Step::Add));
            }
        }
        marks.push(steps.len());
    }
    (steps, marks)
}

/// Interval decomposition of the zigzag module of `seq` in dimensions
/// `0..=max_dim`. Times use unit spacing; see [`ZigzagDiagram::with_spacing`].
pub fn zigzag_persistence(seq: &SliceComplexSequence, max_dim: usize) -> Result<ZigzagDiagram> {
    seq.validate()?;
    let template = ComplexTemplate::freudenthal(&[seq.rows, seq.cols], 2)?;
    let (steps, marks) = expand(&template, seq);
    let mut basis = Basis::new(&template);
    let mut next_mark = 0;
    let snap = |basis: &mut Basis, done: usize, next_mark: &mut usize| {
        while *next_mark < marks.len() && marks[*next_mark] == done {
            if (*next_mark).is_multiple_of(2) {
                let mut present = vec![false; seq.rows * seq.cols];
                for s in seq.slices[*next_mark / 2].simplices() {
                    if let [v] = s.vertices() {
                        present[*v as usize] = true;
                    }
                }
                basis.snapshot(*next_mark + 1, seq.rows, seq.cols, &present);
            }
            *next_mark += 1;
        }
    };
    snap(&mut basis, 0, &mut next_mark);
    for (i, step) in steps.iter().enumerate() {
        match *step {
            Step::Add(s) => basis.add_simplex(s, i + 1)?,
            Step::Remove(s) => basis.remove_simplex(s, i + 1)?,
        }
        snap(&mut basis, i + 1, &mut next_mark);
    }
    let (bars, reps) = basis.finish(steps.len());

    let mut intervals: Vec<ZigzagInterval> = bars
        .into_iter()
        .filter(|b| b.dim <= max_dim)
        .filter_map(|b| {
            let first = marks.iter().position(|&f| f >= b.birth)?;
            let last = marks.iter().rposition(|&f| f <= b.death)?;
            (first <= last).then(|| ZigzagInterval {
                dim: b.dim,
                birth_index: first + 1,
                death_index: last + 1,
                birth_time: index_to_time(first + 1, 1.0),
                death_time: index_to_time(last + 1, 1.0),
                birth_simplex: Some(*template.simplex(b.creator as usize)),
                representatives: reps[b.bar as usize].clone(),
            })
        })
        .collect();
    intervals.sort_by_key(|iv| (iv.dim, iv.birth_index, iv.death_index));
    Ok(ZigzagDiagram {
        intervals,
        sequence_length: seq.len(),
    })
}

/// Text summary used by the CLI.
pub fn summarize(zz: &ZigzagDiagram) -> String {
    let mut s = String::new();
    for m in 0..=1 {
        let n = zz.in_dim(m).count();
        let _ = write!(s, "H{m}: {n} interval{} ", if n == 1 { "" } else { "s" });
    }
    s.trim_end().to_string()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::build_slice_complexes;

    fn ring_3x3() -> Vec<u32> {
        vec![0, 1, 2, 3, 5, 6, 7, 8]
    }

    fn run(sets: &[Vec<u32>], rows: usize, cols: usize, op: SetOp) -> ZigzagDiagram {
        let seq = build_slice_complexes(sets, rows, cols, op, 0.0).unwrap();
        zigzag_persistence(&seq, 1).unwrap()
    }

    fn spans(zz: &ZigzagDiagram, m: usize) -> Vec<(usize, usize)> {
        zz.in_dim(m)
            .map(|i| (i.birth_index, i.death_index))
            .collect()
    }

    #[test]
    fn constant_loop_spans_everything() {
        let zz = run(&[ring_3x3(), ring_3x3(), ring_3x3()], 3, 3, SetOp::Union);
        assert_eq!(spans(&zz, 1), vec![(1, 5)]);
        assert_eq!(spans(&zz, 0), vec![(1, 5)]);
        assert_eq!(zz.sequence_length, 5);
    }

    #[test]
    fn components_joining() {
        // 1x3 strip: two end pixels at t1, the full strip at t2.
        let zz = run(&[vec![0, 2], vec![0, 1, 2]], 1, 3, SetOp::Union);
        let mut h0 = spans(&zz, 0);
        h0.sort();
        assert_eq!(h0, vec![(1, 1), (1, 3)]);
    }

    #[test]
    fn loop_filled_in_union() {
        let full: Vec<u32> = (0..9).collect();
        let zz = run(&[ring_3x3(), full], 3, 3, SetOp::Union);
        assert_eq!(spans(&zz, 1), vec![(1, 1)]);
    }

    #[test]
    fn intersection_variant() {
        let full: Vec<u32> = (0..9).collect();
        let zz = run(&[full, ring_3x3()], 3, 3, SetOp::Intersection);
        // Link is the ring itself; its loop dies entering the full frame.
        assert_eq!(spans(&zz, 1), vec![(2, 3)]);
        assert_eq!(spans(&zz, 0), vec![(1, 3)]);
    }

    #[test]
    fn empty_slices() {
        let zz = run(&[vec![], vec![], vec![]], 2, 2, SetOp::Union);
        assert!(zz.intervals.is_empty());
        let zz = run(&[vec![], vec![4], vec![]], 3, 3, SetOp::Union);
        assert_eq!(spans(&zz, 0), vec![(2, 4)]);
    }

    #[test]
    fn times_follow_spacing() {
        assert_eq!(index_to_time(3, 8.0), 8.0);
        assert_eq!(index_to_time(7, 8.0), 24.0);
        assert_eq!(index_to_time(4, 8.0), 12.0);
        let zz = ZigzagDiagram {
            intervals: vec![ZigzagInterval {
                dim: 1,
                birth_index: 3,
                death_index: 7,
                birth_time: 0.0,
                death_time: 0.0,
                birth_simplex: None,
                representatives: Vec::new(),
            }],
            sequence_length: 9,
        };
        let (csv, svg) = render_zigzag(&zz, 8.0);
        assert_eq!(
            csv,
            "dim,birth_index,death_index,birth_time,death_time\n1,3,7,8,24\n"
        );
        assert!(svg.starts_with("<svg") && svg.contains("polygon"));
    }

    #[test]
    fn empty_render() {
        let zz = ZigzagDiagram {
            intervals: vec![],
            sequence_length: 0,
        };
        let (csv, svg) = render_zigzag(&zz, 8.0);
        assert_eq!(csv, "dim,birth_index,death_index,birth_time,death_time\n");
        assert!(svg.contains("</svg>"));
    }
}
