//! Persistence diagrams of upper-level-set filtrations by boundary-matrix
//! reduction over the two-element field, with clearing.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{MvError, Result};
use crate::filtration::FilteredComplex;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersistencePoint {
    pub dim: usize,
    pub birth: f64,
    pub death: f64,
    pub essential: bool,
    /// Filtration position of the creating simplex; deterministic
    /// tie-breaker between points of equal persistence.
    #[serde(skip)]
    pub birth_position: u32,
}

impl PersistencePoint {
    /// `|birth - death|`; upper-level diagrams have `birth >= death`, Rips
    /// diagrams the reverse.
    pub fn persistence(&self) -> f64 {
        (self.birth - self.death).abs()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PersistenceDiagram {
    pub points: Vec<PersistencePoint>,
    #[serde(default)]
    pub betti: Vec<usize>,
}

impl PersistenceDiagram {
    pub fn from_points(mut points: Vec<PersistencePoint>, max_dim: usize) -> Self {
        points.sort_by(|a, b| {
            a.dim
                .cmp(&b.dim)
                .then(b.birth.total_cmp(&a.birth))
                .then(b.death.total_cmp(&a.death))
                .then(a.birth_position.cmp(&b.birth_position))
        });
        let mut betti = vec![0; max_dim + 1];
        for p in &points {
            if p.dim <= max_dim {
                betti[p.dim] += 1;
            }
        }
        PersistenceDiagram { points, betti }
    }

    pub fn in_dim(&self, m: usize) -> impl Iterator<Item = &PersistencePoint> {
        self.points.iter().filter(move |p| p.dim == m)
    }

    /// Number of classes of dimension `m` alive at threshold `delta`.
    pub fn betti_at(&self, m: usize, delta: f64) -> usize {
        self.in_dim(m)
            .filter(|p| p.birth >= delta && (p.essential || p.death < delta))
            .count()
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Out<'a> {
            points: &'a [PersistencePoint],
        }
        serde_json::to_string_pretty(&Out {
            points: &self.points,
        })
        .expect("diagram serializes")
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "dim,birth,death,essential")?;
        for p in &self.points {
            writeln!(w, "{},{},{},{}", p.dim, p.birth, p.death, p.essential)?;
        }
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("write to Vec");
        String::from_utf8(buf).expect("ascii")
    }
}

/// Symmetric difference of two ascending index lists.
pub(crate) fn add_columns(a: &[u32], b: &[u32], out: &mut Vec<u32>) {
    out.clear();
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => {
                out.push(a[i]);
                i += 1;
            }
            std::cmp::Ordering::Greater => {
                out.push(b[j]);
                j += 1;
            }
            std::cmp::Ordering::Equal => {
                i += 1;
                j += 1;
            }
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
}

/// Result of reducing the boundary matrix in filtration positions.
struct Reduction {
    /// `pivot_of[col] = row` for every negative column.
    pairs: Vec<(u32, u32)>,
    negative: Vec<bool>,
    positive_paired: Vec<bool>,
}

struct Boundary {
    dims: Vec<u8>,
    /// Position of each canonical simplex.
    pos: Vec<u32>,
}

impl Boundary {
    fn new(fc: &FilteredComplex) -> Self {
        let mut pos = vec![0u32; fc.len()];
        for (p, &i) in fc.order().iter().enumerate() {
            pos[i as usize] = p as u32;
        }
        let dims = fc
            .order()
            .iter()
            .map(|&i| fc.template().simplex(i as usize).dim() as u8)
            .collect();
        Boundary { dims, pos }
    }

    fn column(&self, fc: &FilteredComplex, position: usize, out: &mut Vec<u32>) {
        out.clear();
        let canon = fc.order()[position] as usize;
        out.extend(
            fc.template()
                .faces_of(canon)
                .iter()
                .map(|&f| self.pos[f as usize]),
        );
        out.sort_unstable();
    }
}

/// Reduces columns of dimensions `lo..=hi`, highest first, clearing the
/// columns of rows that become pivots.
fn reduce(fc: &FilteredComplex, bd: &Boundary, lo: usize, hi: usize) -> Reduction {
    let n = fc.len();
    let mut owner: Vec<u32> = vec![u32::MAX; n];
    let mut store: Vec<Vec<u32>> = vec![Vec::new(); n];
    let mut negative = vec![false; n];
    let mut positive_paired = vec![false; n];
    let mut pairs = Vec::new();
    let mut col = Vec::new();
    let mut scratch = Vec::new();
    for d in (lo.max(1)..=hi).rev() {
        for j in 0..n {
            if bd.dims[j] as usize != d || positive_paired[j] {
                continue;
            }
            bd.column(fc, j, &mut col);
            while let Some(&piv) = col.last() {
                let k = owner[piv as usize];
                if k == u32::MAX {
                    break;
                }
                add_columns(&col, &store[k as usize], &mut scratch);
                std::mem::swap(&mut col, &mut scratch);
            }
            if let Some(&piv) = col.last() {
                owner[piv as usize] = j as u32;
                negative[j] = true;
                positive_paired[piv as usize] = true;
                pairs.push((piv, j as u32));
                store[j] = std::mem::take(&mut col);
            }
        }
    }
    Reduction {
        pairs,
        negative,
        positive_paired,
    }
}

/// Persistence diagram in dimensions `0..=max_dim`. The complex must carry
/// simplices up to `max_dim + 1` for the top dimension to be complete.
pub fn compute_persistence(fc: &FilteredComplex, max_dim: usize) -> PersistenceDiagram {
    if fc.is_empty() {
        return PersistenceDiagram::from_points(Vec::new(), max_dim);
    }
    let bd = Boundary::new(fc);
    let red = reduce(fc, &bd, 1, max_dim + 1);
    let value_at = |p: u32| fc.value(fc.order()[p as usize] as usize);
    let floor = fc.min_value();
    let mut points = Vec::new();
    for &(b, d) in &red.pairs {
        let dim = bd.dims[b as usize] as usize;
        let (birth, death) = (value_at(b), value_at(d));
        if dim <= max_dim && birth != death {
            points.push(PersistencePoint {
                dim,
                birth,
                death,
                essential: false,
                birth_position: b,
            });
        }
    }
    for p in 0..fc.len() {
        let dim = bd.dims[p] as usize;
        if dim <= max_dim && !red.negative[p] && !red.positive_paired[p] {
            points.push(PersistencePoint {
                dim,
                birth: value_at(p as u32),
                death: floor,
                essential: true,
                birth_position: p as u32,
            });
        }
    }
    PersistenceDiagram::from_points(points, max_dim)
}

/// Finite non-zero pairs of dimension `m` only, by reducing the
/// `(m+1)`-columns. Cheaper than a full diagram when only one dimension is
/// needed; essential classes are not reported.
pub fn finite_pairs(fc: &FilteredComplex, m: usize) -> Vec<PersistencePoint> {
    if fc.is_empty() {
        return Vec::new();
    }
    let bd = Boundary::new(fc);
    let red = reduce(fc, &bd, m + 1, m + 1);
    let value_at = |p: u32| fc.value(fc.order()[p as usize] as usize);
    red.pairs
        .iter()
        .filter_map(|&(b, d)| {
            let (birth, death) = (value_at(b), value_at(d));
            (birth != death).then_some(PersistencePoint {
                dim: m,
                birth,
                death,
                essential: false,
                birth_position: b,
            })
        })
        .collect()
}

/// Betti numbers of `{σ : value(σ) >= delta}` by rank-nullity on explicit
/// boundary matrices, without any persistence pairing.
pub fn betti_at(fc: &FilteredComplex, delta: f64, max_dim: usize) -> Vec<usize> {
    use std::collections::HashMap;
    let simplices: Vec<_> = fc
        .prefix_at(delta)
        .iter()
        .map(|&i| *fc.template().simplex(i as usize))
        .collect();
    let mut by_dim: Vec<Vec<_>> = vec![Vec::new(); max_dim + 2];
    for s in simplices {
        if s.dim() <= max_dim + 1 {
            by_dim[s.dim()].push(s);
        }
    }
    let index: Vec<HashMap<_, usize>> = by_dim
        .iter()
        .map(|v| v.iter().enumerate().map(|(i, s)| (*s, i)).collect())
        .collect();
    // rank of ∂_k : C_k -> C_{k-1}
    let rank = |k: usize| -> usize {
        if k == 0 || by_dim[k].is_empty() || by_dim[k - 1].is_empty() {
            return 0;
        }
        let rows = by_dim[k - 1].len();
        let words = rows.div_ceil(64);
        let mut mat: Vec<Vec<u64>> = by_dim[k]
            .iter()
            .map(|s| {
                let mut v = vec![0u64; words];
                for f in s.faces() {
                    let r = index[k - 1][&f];
                    v[r / 64] ^= 1 << (r % 64);
                }
                v
            })
            .collect();
        gf2_rank(&mut mat, rows)
    };
    (0..=max_dim)
        .map(|m| by_dim[m].len() - rank(m) - rank(m + 1))
        .collect()
}

/// Rank of a set of GF(2) bit vectors (rows of length `bits`), by elimination.
pub fn gf2_rank(mat: &mut [Vec<u64>], bits: usize) -> usize {
    let mut rank = 0;
    for bit in 0..bits {
        let (w, b) = (bit / 64, 1u64 << (bit % 64));
        let Some(p) = (rank..mat.len()).find(|&r| mat[r][w] & b != 0) else {
            continue;
        };
        mat.swap(rank, p);
        let pivot = mat[rank].clone();
        for r in 0..mat.len() {
            if r != rank && mat[r][w] & b != 0 {
                for (x, y) in mat[r].iter_mut().zip(&pivot) {
                    *x ^= y;
                }
            }
        }
        rank += 1;
    }
    rank
}

/// Reads a diagram back from its JSON export.
pub fn diagram_from_json(text: &str) -> Result<PersistenceDiagram> {
    let mut d: PersistenceDiagram =
        serde_json::from_str(text).map_err(|e| MvError::invalid(format!("diagram JSON: {e}")))?;
    let max_dim = d.points.iter().map(|p| p.dim).max().unwrap_or(0);
    d = PersistenceDiagram::from_points(d.points, max_dim);
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtration::filter_stack;
    use crate::stack::ImageStack;

    #[test]
    fn constant_frame_has_single_essential_component() {
        let st = ImageStack::frame(3, 3, vec![4.0; 9]).unwrap();
        let pd = compute_persistence(&filter_stack(&st, 2).unwrap(), 1);
        assert_eq!(pd.points.len(), 1);
        let p = pd.points[0];
        assert_eq!((p.dim, p.birth, p.death, p.essential), (0, 4.0, 4.0, true));
    }

    #[test]
    fn two_peaks_merge() {
        let st = ImageStack::frame(1, 3, vec![5.0, 1.0, 3.0]).unwrap();
        let pd = compute_persistence(&filter_stack(&st, 2).unwrap(), 0);
        assert_eq!(pd.points.len(), 2);
        assert_eq!((pd.points[0].birth, pd.points[0].essential), (5.0, true));
        assert_eq!((pd.points[1].birth, pd.points[1].death), (3.0, 1.0));
    }

    #[test]
    fn betti_above_max_is_zero() {
        let st = ImageStack::frame(3, 3, (0..9).map(f64::from).collect()).unwrap();
        let fc = filter_stack(&st, 2).unwrap();
        assert_eq!(betti_at(&fc, 100.0, 1), vec![0, 0]);
        assert_eq!(betti_at(&fc, 0.0, 1), vec![1, 0]);
    }

    #[test]
    fn csv_and_json_exports() {
        let pd = PersistenceDiagram::from_points(
            vec![PersistencePoint {
                dim: 1,
                birth: 2007.0,
                death: 1404.0,
                essential: false,
                birth_position: 0,
            }],
            1,
        );
        assert_eq!(
            pd.to_csv(),
            "dim,birth,death,essential\n1,2007,1404,false\n"
        );
        let back = diagram_from_json(&pd.to_json()).unwrap();
        assert_eq!(back.points[0].birth, 2007.0);
        assert!(pd.to_json().contains("\"dim\": 1"));
    }
}
