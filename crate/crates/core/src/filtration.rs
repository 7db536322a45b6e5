//! Freudenthal (Kuhn) triangulation of pixel grids and upper-star filtrations.
//!
//! Every unit cube of the grid is split into `M!` simplices along its main
//! diagonal. A simplex is a chain `v0 < v1 < ... < vk` of grid points in a
//! single cube whose successive differences are 0/1 vectors with disjoint
//! supports, which is how the simplices are enumerated below.

use std::collections::HashMap;
use std::sync::Arc;

use crate::error::{MvError, Result};
use crate::stack::ImageStack;

const EMPTY: u32 = u32::MAX;

/// A simplex over grid-linearized vertex ids. Derived ordering is
/// `(dim, lexicographic vertex tuple)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Simplex {
    dim: u8,
    verts: [u32; 4],
}

impl Simplex {
    /// Builds a simplex from distinct vertex ids (any order, at most 4).
    pub fn new(vertices: &[u32]) -> Result<Self> {
        if vertices.is_empty() || vertices.len() > 4 {
            return Err(MvError::invalid(format!(
                "simplices need 1 to 4 vertices, got {}",
                vertices.len()
            )));
        }
        let mut verts = [EMPTY; 4];
        verts[..vertices.len()].copy_from_slice(vertices);
        verts[..vertices.len()].sort_unstable();
        if verts[..vertices.len()].windows(2).any(|w| w[0] == w[1]) {
            return Err(MvError::invalid(format!("repeated vertex in {vertices:?}")));
        }
        Ok(Simplex {
            dim: (vertices.len() - 1) as u8,
            verts,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim as usize
    }

    pub fn vertices(&self) -> &[u32] {
        &self.verts[..=self.dim as usize]
    }

    /// Codimension-one faces, each obtained by dropping one vertex.
    pub fn faces(&self) -> impl Iterator<Item = Simplex> + '_ {
        let k = self.dim as usize;
        (0..=k).filter(move |_| k > 0).map(move |skip| {
            let mut verts = [EMPTY; 4];
            let mut n = 0;
            for (i, &v) in self.vertices().iter().enumerate() {
                if i != skip {
                    verts[n] = v;
                    n += 1;
                }
            }
            Simplex {
                dim: (k - 1) as u8,
                verts,
            }
        })
    }
}

/// Chain patterns for the Kuhn triangulation: ordered sequences of disjoint
/// non-empty axis subsets, encoded as bit masks.
fn chain_patterns(naxes: usize, max_dim: usize) -> Vec<Vec<u8>> {
    let mut out = vec![Vec::new()];
    let mut frontier: Vec<(Vec<u8>, u8)> = vec![(Vec::new(), 0)];
    for _ in 0..max_dim.min(naxes) {
        let mut next = Vec::new();
        for (chain, used) in &frontier {
            for mask in 1u8..(1 << naxes) {
                if mask & used == 0 {
                    let mut c = chain.clone();
                    c.push(mask);
                    next.push((c, used | mask));
                }
            }
        }
        out.extend(next.iter().map(|(c, _)| c.clone()));
        frontier = next;
    }
    out
}

fn grid_strides(dims: &[usize]) -> Vec<usize> {
    let mut s = vec![dims[1], 1];
    if dims.len() == 3 {
        s.push(dims[0] * dims[1]);
    }
    s
}

/// All simplices of the Kuhn triangulation of a 2D or 3D grid, up to
/// dimension `max_dim`, sorted by `(dim, vertices)`.
pub fn freudenthal_complex_upto(dims: &[usize], max_dim: usize) -> Result<Vec<Simplex>> {
    if dims.len() < 2 || dims.len() > 3 {
        return Err(MvError::invalid(format!(
            "triangulation supports 2 or 3 axes, got {}",
            dims.len()
        )));
    }
    if dims.contains(&0) {
        return Err(MvError::invalid(format!("zero-length axis in {dims:?}")));
    }
    let m = dims.len();
    let strides = grid_strides(dims);
    let patterns = chain_patterns(m, max_dim.min(m));
    let n: usize = dims.iter().product();
    let mut out = Vec::new();
    let mut coord = vec![0usize; m];
    for base in 0..n {
        for (a, c) in coord.iter_mut().enumerate() {
            *c = (base / strides[a]) % dims[a];
        }
        'pattern: for pat in &patterns {
            let used = pat.iter().fold(0u8, |acc, &s| acc | s);
            for a in 0..m {
                if used & (1 << a) != 0 && coord[a] + 1 >= dims[a] {
                    continue 'pattern;
                }
            }
            let mut verts = [EMPTY; 4];
            let mut v = base;
            verts[0] = v as u32;
            for (i, &mask) in pat.iter().enumerate() {
                for (a, &s) in strides.iter().enumerate() {
                    if mask & (1 << a) != 0 {
                        v += s;
                    }
                }
                verts[i + 1] = v as u32;
            }
            out.push(Simplex {
                dim: pat.len() as u8,
                verts,
            });
        }
    }
    out.sort_unstable();
    Ok(out)
}

/// The full Kuhn triangulation of the grid.
pub fn freudenthal_complex(dims: &[usize]) -> Result<Vec<Simplex>> {
    freudenthal_complex_upto(dims, dims.len())
}

/// A closed simplicial complex in canonical `(dim, vertices)` order with
/// precomputed face indices. Values are attached separately, so one
/// template serves every filtration over the same grid.
#[derive(Debug, Clone)]
pub struct ComplexTemplate {
    simplices: Vec<Simplex>,
    face_offsets: Vec<u32>,
    faces: Vec<u32>,
    n_vertices_hint: usize,
}

impl ComplexTemplate {
    /// Builds a template from an arbitrary simplex list, checking closure.
    pub fn from_simplices(mut simplices: Vec<Simplex>) -> Result<Self> {
        simplices.sort_unstable();
        simplices.dedup();
        let index: HashMap<Simplex, u32> = simplices
            .iter()
            .enumerate()
            .map(|(i, s)| (*s, i as u32))
            .collect();
        let mut face_offsets = Vec::with_capacity(simplices.len() + 1);
        let mut faces = Vec::new();
        face_offsets.push(0);
        for s in &simplices {
            for f in s.faces() {
                let fi = index.get(&f).ok_or_else(|| {
                    MvError::Structural(format!(
                        "complex not closed: face {:?} of {:?} missing",
                        f.vertices(),
                        s.vertices()
                    ))
                })?;
                faces.push(*fi);
            }
            face_offsets.push(faces.len() as u32);
        }
        let n_vertices_hint = simplices
            .iter()
            .flat_map(|s| s.vertices().iter().copied())
            .max()
            .map_or(0, |v| v as usize + 1);
        Ok(ComplexTemplate {
            simplices,
            face_offsets,
            faces,
            n_vertices_hint,
        })
    }

    pub fn freudenthal(dims: &[usize], max_dim: usize) -> Result<Self> {
        Self::from_simplices(freudenthal_complex_upto(dims, max_dim)?)
    }

    pub fn len(&self) -> usize {
        self.simplices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.simplices.is_empty()
    }

    pub fn simplices(&self) -> &[Simplex] {
        &self.simplices
    }

    pub fn simplex(&self, i: usize) -> &Simplex {
        &self.simplices[i]
    }

    pub fn faces_of(&self, i: usize) -> &[u32] {
        &self.faces[self.face_offsets[i] as usize..self.face_offsets[i + 1] as usize]
    }

    pub fn top_dim(&self) -> usize {
        self.simplices.last().map_or(0, |s| s.dim())
    }

    fn vertex_span(&self) -> usize {
        self.n_vertices_hint
    }
}

/// A complex with per-simplex upper-star values and a total order in which
/// every prefix is an upper-level subcomplex.
#[derive(Debug, Clone)]
pub struct FilteredComplex {
    template: Arc<ComplexTemplate>,
    values: Vec<f64>,
    order: Vec<u32>,
}

impl FilteredComplex {
    /// Attaches upper-star values (minimum vertex intensity) to a template.
    pub fn from_template(template: Arc<ComplexTemplate>, intensities: &[f64]) -> Result<Self> {
        if template.vertex_span() > intensities.len() {
            return Err(MvError::invalid(format!(
                "complex references vertex {} but only {} intensities given",
                template.vertex_span() - 1,
                intensities.len()
            )));
        }
        let values: Vec<f64> = template
            .simplices
            .iter()
            .map(|s| {
                s.vertices()
                    .iter()
                    .map(|&v| intensities[v as usize])
                    .fold(f64::INFINITY, f64::min)
                    + 0.0
            })
            .collect();
        let mut order: Vec<u32> = (0..values.len() as u32).collect();
        // Canonical index already encodes (dim, lexicographic), so it is the
        // tie-breaker within a value class.
        order.sort_unstable_by(|&a, &b| {
            values[b as usize]
                .total_cmp(&values[a as usize])
                .then(a.cmp(&b))
        });
        Ok(FilteredComplex {
            template,
            values,
            order,
        })
    }

    pub fn template(&self) -> &ComplexTemplate {
        &self.template
    }

    /// Value of canonical simplex `i`.
    pub fn value(&self, i: usize) -> f64 {
        self.values[i]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Canonical simplex indices in filtration order.
    pub fn order(&self) -> &[u32] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    pub fn min_value(&self) -> f64 {
        self.order
            .last()
            .map_or(f64::NAN, |&i| self.values[i as usize])
    }

    /// Filtration-order prefix holding every simplex with value `>= delta`.
    pub fn prefix_at(&self, delta: f64) -> &[u32] {
        let n = self
            .order
            .partition_point(|&i| self.values[i as usize] >= delta);
        &self.order[..n]
    }

    /// Distinct simplex values in decreasing order.
    pub fn distinct_values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self
            .order
            .iter()
            .map(|&i| self.values[i as usize])
            .collect();
        v.dedup();
        v
    }
}

/// Full Freudenthal filtration of a stack, with simplices up to `max_dim`.
pub fn filter_stack(stack: &ImageStack, max_dim: usize) -> Result<FilteredComplex> {
    let t = Arc::new(ComplexTemplate::freudenthal(stack.dims(), max_dim)?);
    FilteredComplex::from_template(t, stack.values())
}

/// Assigns upper-star values from `stack` to an explicit simplex list.
pub fn assign_filtration(complex: &[Simplex], stack: &ImageStack) -> Result<FilteredComplex> {
    if let Some(v) = complex
        .iter()
        .flat_map(|s| s.vertices().iter().copied())
        .find(|&v| v as usize >= stack.len())
    {
        return Err(MvError::OutOfRange {
            index: v as usize + 1,
            len: stack.len(),
        });
    }
    let t = Arc::new(ComplexTemplate::from_simplices(complex.to_vec())?);
    FilteredComplex::from_template(t, stack.values())
}
