//! Dense GF(2) linear algebra on bit vectors.

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Bits(pub Vec<u64>);

impl Bits {
    pub fn zeros(n: usize) -> Self {
        Bits(vec![0; n.div_ceil(64).max(1)])
    }

    pub fn unit(n: usize, i: usize) -> Self {
        let mut b = Self::zeros(n);
        b.flip(i);
        b
    }

    pub fn get(&self, i: usize) -> bool {
        self.0[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn flip(&mut self, i: usize) {
        self.0[i / 64] ^= 1 << (i % 64);
    }

    pub fn xor(&mut self, o: &Bits) {
        for (a, b) in self.0.iter_mut().zip(&o.0) {
            *a ^= b;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&w| w == 0)
    }

    pub fn lowest(&self) -> Option<usize> {
        self.0
            .iter()
            .enumerate()
            .find(|(_, &w)| w != 0)
            .map(|(k, w)| k * 64 + w.trailing_zeros() as usize)
    }
}

/// Echelon basis where every stored row carries a tag vector recording the
/// combination of inserted generators it represents.
pub struct Echelon {
    rows: Vec<(usize, Bits, Bits)>,
    tag_len: usize,
}

impl Echelon {
    pub fn new(tag_len: usize) -> Self {
        Echelon {
            rows: Vec::new(),
            tag_len,
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    /// Reduces `v`; returns the residual and the tag of what was subtracted.
    pub fn reduce(&self, mut v: Bits) -> (Bits, Bits) {
        let mut tag = Bits::zeros(self.tag_len);
        for (p, row, t) in &self.rows {
            if v.get(*p) {
                v.xor(row);
                tag.xor(t);
            }
        }
        (v, tag)
    }

    /// Inserts `v` with `tag`; returns `Some(residual tag)` if `v` was
    /// dependent (the tag combination that sums to zero), else `None`.
    pub fn insert(&mut self, v: Bits, tag: Bits) -> Option<Bits> {
        let (r, mut t) = self.reduce(v);
        t.xor(&tag);
        match r.lowest() {
            None => Some(t),
            Some(p) => {
                // Keep rows fully reduced at their pivots.
                for (_, row, rt) in &mut self.rows {
                    if row.get(p) {
                        row.xor(&r);
                        rt.xor(&t);
                    }
                }
                self.rows.push((p, r, t));
                None
            }
        }
    }
}

pub fn rank(vectors: &[Bits]) -> usize {
    let mut e = Echelon::new(0);
    for v in vectors {
        e.insert(v.clone(), Bits::zeros(0));
    }
    e.rank()
}

/// Kernel of the map sending generator `j` to `images[j]`, as tag vectors
/// over the generators.
pub fn kernel(images: &[Bits]) -> Vec<Bits> {
    let n = images.len();
    let mut e = Echelon::new(n);
    images
        .iter()
        .enumerate()
        .filter_map(|(j, v)| e.insert(v.clone(), Bits::unit(n, j)))
        .collect()
}
