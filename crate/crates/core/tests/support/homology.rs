//! Brute-force simplicial homology over GF(2) and the zigzag barcode via
//! Möbius inversion of the rank invariant.

use std::collections::{BTreeSet, HashMap};

use super::gf2::{kernel, rank, Bits, Echelon};

/// A complex as a list of sorted vertex lists.
pub type Cx = Vec<Vec<u32>>;

/// Shared chain coordinates for a family of complexes.
pub struct Ambient {
    index: HashMap<Vec<u32>, usize>,
}

impl Ambient {
    pub fn new<'a>(cxs: impl IntoIterator<Item = &'a Cx>) -> Self {
        let all: BTreeSet<&Vec<u32>> = cxs.into_iter().flatten().collect();
        Ambient {
            index: all
                .into_iter()
                .enumerate()
                .map(|(i, s)| (s.clone(), i))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    fn boundary(&self, s: &[u32]) -> Bits {
        let mut b = Bits::zeros(self.len());
        if s.len() > 1 {
            for i in 0..s.len() {
                let mut f = s.to_vec();
                f.remove(i);
                b.flip(self.index[&f]);
            }
        }
        b
    }
}

/// `H_m` of one complex: representative cycles and a way to express any
/// cycle in their basis.
pub struct Homology {
    pub reps: Vec<Bits>,
    ech: Echelon,
}

impl Homology {
    pub fn new(amb: &Ambient, cx: &Cx, m: usize) -> Self {
        let n = amb.len();
        let cells: Vec<&Vec<u32>> = cx.iter().filter(|s| s.len() == m + 1).collect();
        let cofaces: Vec<&Vec<u32>> = cx.iter().filter(|s| s.len() == m + 2).collect();
        let boundaries: Vec<Bits> = cofaces.iter().map(|s| amb.boundary(s)).collect();
        let images: Vec<Bits> = cells.iter().map(|s| amb.boundary(s)).collect();
        let cycles: Vec<Bits> = kernel(&images)
            .into_iter()
            .map(|t| {
                let mut z = Bits::zeros(n);
                for (j, s) in cells.iter().enumerate() {
                    if t.get(j) {
                        z.flip(amb.index[*s]);
                    }
                }
                z
            })
            .collect();
        let mut probe = Echelon::new(0);
        for b in &boundaries {
            probe.insert(b.clone(), Bits::zeros(0));
        }
        let reps: Vec<Bits> = cycles
            .into_iter()
            .filter(|z| probe.insert(z.clone(), Bits::zeros(0)).is_none())
            .collect();
        let k = reps.len();
        let mut ech = Echelon::new(k);
        for b in boundaries {
            ech.insert(b, Bits::zeros(k));
        }
        for (i, z) in reps.iter().enumerate() {
            ech.insert(z.clone(), Bits::unit(k, i));
        }
        Homology { reps, ech }
    }

    pub fn betti(&self) -> usize {
        self.reps.len()
    }

    /// Coordinates of cycle `z` in the representative basis.
    pub fn coords(&self, z: &Bits) -> Bits {
        let (r, t) = self.ech.reduce(z.clone());
        assert!(r.is_zero(), "not a cycle of this complex");
        t
    }
}

fn is_subset(a: &Cx, b: &Cx) -> bool {
    let b: BTreeSet<&Vec<u32>> = b.iter().collect();
    a.iter().all(|s| b.contains(s))
}

/// Rank of the limit-to-colimit map of the zigzag restricted to `[b, d]`
/// (0-based, inclusive): the number of intervals containing `[b, d]`.
fn lim_colim_rank(hs: &[Homology], arrows: &[(usize, usize)], b: usize, d: usize) -> usize {
    let offs: Vec<usize> = hs[b..=d]
        .iter()
        .scan(0, |acc, h| {
            let o = *acc;
            *acc += h.betti();
            Some(o)
        })
        .collect();
    let total: usize = hs[b..=d].iter().map(Homology::betti).sum();
    if total == 0 {
        return 0;
    }
    let at = |p: usize, i: usize| offs[p - b] + i;
    // For each arrow s -> t in range: relation e_s,i + A e_s,i, and the
    // lim constraint A v_s + v_t = 0 as one block of the constraint map.
    let mut relations = Vec::new();
    let mut blocks: Vec<(usize, usize, Vec<Bits>)> = Vec::new();
    for &(s, t) in &arrows[b..d] {
        let images: Vec<Bits> = hs[s].reps.iter().map(|z| hs[t].coords(z)).collect();
        for (i, img) in images.iter().enumerate() {
            let mut r = Bits::zeros(total);
            r.flip(at(s, i));
            for j in 0..hs[t].betti() {
                if img.get(j) {
                    r.flip(at(t, j));
                }
            }
            relations.push(r);
        }
        blocks.push((s, t, images));
    }
    // Constraint map W -> ⊕ V_t; columns indexed by W's basis.
    let rows: usize = blocks.iter().map(|(_, t, _)| hs[*t].betti()).sum();
    let mut cols = vec![Bits::zeros(rows); total];
    let mut row0 = 0;
    for (s, t, images) in &blocks {
        for (i, img) in images.iter().enumerate() {
            for j in 0..hs[*t].betti() {
                if img.get(j) {
                    cols[at(*s, i)].flip(row0 + j);
                }
            }
        }
        for j in 0..hs[*t].betti() {
            cols[at(*t, j)].flip(row0 + j);
        }
        row0 += hs[*t].betti();
    }
    let lim = if blocks.is_empty() {
        (0..total).map(|i| Bits::unit(total, i)).collect()
    } else {
        kernel(&cols)
    };
    // A compatible tuple maps to the colimit class of any one component;
    // take the component at `b`.
    let first = hs[b].betti();
    let mut both: Vec<Bits> = lim
        .into_iter()
        .map(|mut v| {
            for i in first..total {
                if v.get(i) {
                    v.flip(i);
                }
            }
            v
        })
        .collect();
    both.extend(relations.iter().cloned());
    rank(&both) - rank(&relations)
}

/// Interval decomposition `(dim, birth, death)`, 1-based inclusive, of a
/// zigzag of complexes where consecutive complexes are nested one way or
/// the other.
pub fn zigzag_barcode(seq: &[Cx], max_dim: usize) -> Vec<(usize, usize, usize)> {
    let n = seq.len();
    let amb = Ambient::new(seq);
    let arrows: Vec<(usize, usize)> = (0..n.saturating_sub(1))
        .map(|p| {
            if is_subset(&seq[p], &seq[p + 1]) {
                (p, p + 1)
            } else if is_subset(&seq[p + 1], &seq[p]) {
                (p + 1, p)
            } else {
                panic!("complexes {p} and {} are not nested", p + 1)
            }
        })
        .collect();
    let mut out = Vec::new();
    for m in 0..=max_dim {
        let hs: Vec<Homology> = seq.iter().map(|cx| Homology::new(&amb, cx, m)).collect();
        let mut r = vec![vec![0i64; n + 2]; n + 2];
        for b in 0..n {
            for d in b..n {
                r[b + 1][d + 1] = lim_colim_rank(&hs, &arrows, b, d) as i64;
            }
        }
        for b in 1..=n {
            for d in b..=n {
                let mult = r[b][d] - r[b - 1][d] - r[b][d + 1] + r[b - 1][d + 1];
                assert!(mult >= 0, "negative multiplicity");
                for _ in 0..mult {
                    out.push((m, b, d));
                }
            }
        }
    }
    out.sort();
    out
}

pub fn betti(cx: &Cx, m: usize) -> usize {
    Homology::new(&Ambient::new([cx]), cx, m).betti()
}
