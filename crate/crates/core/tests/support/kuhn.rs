//! Upper-level-set complexes of a grid, built straight from the definition:
//! every Kuhn simplex of every unit cube, kept when all its vertices reach
//! the threshold.

use std::collections::BTreeSet;

use super::homology::Cx;

fn permutations(items: &[usize]) -> Vec<Vec<usize>> {
    if items.len() <= 1 {
        return vec![items.to_vec()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

/// Every simplex of the triangulated grid `dims` (rows, cols[, frames]),
/// vertices numbered frame-major then row-major.
pub fn full_complex(dims: &[usize]) -> Cx {
    let mut strides = vec![dims[1], 1];
    if dims.len() == 3 {
        strides.push(dims[0] * dims[1]);
    }
    let n: usize = dims.iter().product();
    let mut all = BTreeSet::new();
    for base in 0..n {
        let coord: Vec<usize> = (0..dims.len())
            .map(|a| (base / strides[a]) % dims[a])
            .collect();
        let axes: Vec<usize> = (0..dims.len())
            .filter(|&a| coord[a] + 1 < dims[a])
            .collect();
        for perm in permutations(&axes) {
            let mut path = vec![base as u32];
            let mut v = base;
            for &a in &perm {
                v += strides[a];
                path.push(v as u32);
            }
            for mask in 1u32..(1 << path.len()) {
                let mut face: Vec<u32> = (0..path.len())
                    .filter(|i| mask & (1 << i) != 0)
                    .map(|i| path[i])
                    .collect();
                face.sort_unstable();
                all.insert(face);
            }
        }
    }
    all.into_iter().collect()
}

pub fn upper_level(full: &Cx, values: &[f64], delta: f64) -> Cx {
    full.iter()
        .filter(|s| s.iter().all(|&v| values[v as usize] >= delta))
        .cloned()
        .collect()
}
