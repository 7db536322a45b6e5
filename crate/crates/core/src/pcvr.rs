//! Comparison baseline: threshold each frame, take pixel centers as a point
//! cloud, compute Vietoris–Rips persistence, and link loops across frames by
//! persistence rank.

use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MvError, Result};
use crate::persistence::{add_columns, PersistenceDiagram, PersistencePoint};
use crate::stack::ImageStack;

/// Largest cloud accepted by [`rips_persistence`].
pub const MAX_CLOUD_POINTS: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointCloud {
    /// Pixel centers as 1-based `(row, col)`.
    pub points: Vec<[f64; 2]>,
    pub source_frame: usize,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// Centers of the pixels of frame `o` (1-based) with intensity `>= threshold`.
pub fn binarize(stack: &ImageStack, o: usize, threshold: f64) -> PointCloud {
    let cols = stack.cols();
    let points = stack
        .frame_values(o)
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= threshold)
        .map(|(i, _)| [(i / cols + 1) as f64, (i % cols + 1) as f64])
        .collect();
    PointCloud {
        points,
        source_frame: o,
    }
}

/// A Rips feature with the edge that created it (for `H1`) or merged it
/// away (for `H0`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RipsFeature {
    pub dim: usize,
    pub birth: f64,
    pub death: f64,
    pub essential: bool,
    pub edge: (u32, u32),
}

impl RipsFeature {
    pub fn persistence(&self) -> f64 {
        self.death - self.birth
    }

    /// Midpoint of the recorded edge.
    pub fn location(&self, cloud: &PointCloud) -> [f64; 2] {
        let (a, b) = (
            cloud.points[self.edge.0 as usize],
            cloud.points[self.edge.1 as usize],
        );
        [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0]
    }
}

fn find(parent: &mut [u32], mut x: u32) -> u32 {
    while parent[x as usize] != x {
        let p = parent[x as usize];
        parent[x as usize] = parent[p as usize];
        x = p;
    }
    x
}

/// `H0` and `H1` of the Rips filtration up to `max_scale`. Classes still
/// alive at `max_scale` are essential with death `max_scale`.
pub fn rips_features(cloud: &PointCloud, max_scale: f64) -> Result<Vec<RipsFeature>> {
    let n = cloud.len();
    if n > MAX_CLOUD_POINTS {
        return Err(MvError::invalid(format!(
            "point cloud of {n} points exceeds the cap of {MAX_CLOUD_POINTS}; downsample the frame or raise the threshold"
        )));
    }
    if !(max_scale > 0.0) {
        return Err(MvError::invalid(format!(
            "max_scale must be positive, got {max_scale}"
        )));
    }
    let dist = |i: usize, j: usize| {
        let (a, b) = (cloud.points[i], cloud.points[j]);
        (a[0] - b[0]).hypot(a[1] - b[1])
    };
    let mut edges: Vec<(f64, u32, u32)> = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let d = dist(i, j);
            if d <= max_scale {
                edges.push((d, i as u32, j as u32));
            }
        }
    }
    edges.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));

    let mut out = Vec::new();
    let mut parent: Vec<u32> = (0..n as u32).collect();
    let mut merges_edge = vec![false; edges.len()];
    for (e, &(d, i, j)) in edges.iter().enumerate() {
        let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
        if ri != rj {
            // Elder rule is moot in Rips: every vertex is born at 0.
            parent[ri.max(rj) as usize] = ri.min(rj);
            merges_edge[e] = true;
            if d > 0.0 {
                out.push(RipsFeature {
                    dim: 0,
                    birth: 0.0,
                    death: d,
                    essential: false,
                    edge: (i, j),
                });
            }
        }
    }
    for v in 0..n as u32 {
        if find(&mut parent, v) == v {
            out.push(RipsFeature {
                dim: 0,
                birth: 0.0,
                death: max_scale,
                essential: true,
                edge: (v, v),
            });
        }
    }

    // Triangles as columns over edge positions.
    let index: HashMap<(u32, u32), u32> = edges
        .iter()
        .enumerate()
        .map(|(e, &(_, i, j))| ((i, j), e as u32))
        .collect();
    let mut nbrs: Vec<Vec<u32>> = vec![Vec::new(); n];
    for &(_, i, j) in &edges {
        nbrs[i as usize].push(j);
    }
    for l in &mut nbrs {
        l.sort_unstable();
    }
    let mut triangles: Vec<(u32, [u32; 3])> = Vec::new();
    for i in 0..n {
        for (a, &j) in nbrs[i].iter().enumerate() {
            for &k in &nbrs[i][a + 1..] {
                if let Some(&jk) = index.get(&(j, k)) {
                    let ij = index[&(i as u32, j)];
                    let ik = index[&(i as u32, k)];
                    let mut col = [ij, ik, jk];
                    col.sort_unstable();
                    triangles.push((col[2], col));
                }
            }
        }
    }
    // Order by diameter edge, then remaining edges: a valid filtration order.
    triangles.sort_unstable_by(|a, b| a.1[2].cmp(&b.1[2]).then(a.1.cmp(&b.1)));

    let mut pivot_of: Vec<u32> = vec![u32::MAX; edges.len()];
    let mut reduced: Vec<Vec<u32>> = Vec::with_capacity(triangles.len());
    let mut scratch = Vec::new();
    let mut paired = vec![false; edges.len()];
    for (_, col) in &triangles {
        let mut v = col.to_vec();
        while let Some(&p) = v.last() {
            let owner = pivot_of[p as usize];
            if owner == u32::MAX {
                break;
            }
            add_columns(&v, &reduced[owner as usize], &mut scratch);
            std::mem::swap(&mut v, &mut scratch);
        }
        if let Some(&p) = v.last() {
            pivot_of[p as usize] = reduced.len() as u32;
            paired[p as usize] = true;
            let (b, i, j) = edges[p as usize];
            let d = edges[col[2] as usize].0;
            if d > b {
                out.push(RipsFeature {
                    dim: 1,
                    birth: b,
                    death: d,
                    essential: false,
                    edge: (i, j),
                });
            }
        }
        reduced.push(v);
    }
    for (e, &(b, i, j)) in edges.iter().enumerate() {
        if !merges_edge[e] && !paired[e] && b < max_scale {
            out.push(RipsFeature {
                dim: 1,
                birth: b,
                death: max_scale,
                essential: true,
                edge: (i, j),
            });
        }
    }
    out.sort_by(|a, b| {
        a.dim
            .cmp(&b.dim)
            .then(b.persistence().total_cmp(&a.persistence()))
            .then(a.birth.total_cmp(&b.birth))
            .then(a.edge.cmp(&b.edge))
    });
    Ok(out)
}

/// Rips persistence diagram of `H0` and `H1` (birth < death in scale units).
pub fn rips_persistence(cloud: &PointCloud, max_scale: f64) -> Result<PersistenceDiagram> {
    let points = rips_features(cloud, max_scale)?
        .into_iter()
        .enumerate()
        .map(|(k, f)| PersistencePoint {
            dim: f.dim,
            birth: f.birth,
            death: f.death,
            essential: f.essential,
            birth_position: k as u32,
        })
        .collect();
    Ok(PersistenceDiagram::from_points(points, 1))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrackPoint {
    pub track: usize,
    pub frame: usize,
    pub rank: usize,
    pub birth: f64,
    pub death: f64,
    /// Midpoint of the creating edge, 1-based `(row, col)`.
    pub location: [f64; 2],
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrackTable {
    pub points: Vec<TrackPoint>,
}

impl TrackTable {
    pub fn track_ids(&self) -> Vec<usize> {
        let mut ids: Vec<usize> = self.points.iter().map(|p| p.track).collect();
        ids.sort_unstable();
        ids.dedup();
        ids
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "track,frame,rank,birth,death,row,col")?;
        for p in &self.points {
            writeln!(
                w,
                "{},{},{},{},{},{},{}",
                p.track, p.frame, p.rank, p.birth, p.death, p.location[0], p.location[1]
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

/// Links the `H1` features of consecutive frames rank to rank, by decreasing
/// persistence. `frames[k]` holds frame `k + 1`; features with persistence
/// below `min_persistence` are ignored.
pub fn match_by_persistence(frames: &[FrameFeatures], min_persistence: f64) -> TrackTable {
    let mut points = Vec::new();
    let mut open: Vec<usize> = Vec::new(); // track id per rank
    let mut next_track = 0;
    for (cloud, features) in frames {
        let mut loops: Vec<&RipsFeature> = features
            .iter()
            .filter(|f| f.dim == 1 && f.persistence() >= min_persistence)
            .collect();
        loops.sort_by(|a, b| {
            b.persistence()
                .total_cmp(&a.persistence())
                .then(a.birth.total_cmp(&b.birth))
                .then(a.edge.cmp(&b.edge))
        });
        open.truncate(loops.len());
        for (rank, f) in loops.iter().enumerate() {
            if rank == open.len() {
                open.push(next_track);
                next_track += 1;
            }
            points.push(TrackPoint {
                track: open[rank],
                frame: cloud.source_frame,
                rank: rank + 1,
                birth: f.birth,
                death: f.death,
                location: f.location(cloud),
            });
        }
    }
    TrackTable { points }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcvrConfig {
    pub threshold: f64,
    pub max_scale: f64,
    pub min_persistence: f64,
}

impl Default for PcvrConfig {
    fn default() -> Self {
        PcvrConfig {
            threshold: 5.0,
            max_scale: 12.0,
            min_persistence: 0.5,
        }
    }
}

/// One frame's point cloud and its Rips features.
pub type FrameFeatures = (PointCloud, Vec<RipsFeature>);

/// Per-frame clouds and Rips features (frames in parallel), then tracks.
pub fn run_pcvr(stack: &ImageStack, cfg: &PcvrConfig) -> Result<(Vec<FrameFeatures>, TrackTable)> {
    if stack.ndim() != 3 {
        return Err(MvError::invalid(
            "the point-cloud baseline needs a 2D+time stack",
        ));
    }
    let frames = (1..=stack.frames())
        .into_par_iter()
        .map(|o| {
            let cloud = binarize(stack, o, cfg.threshold);
            let feats = rips_features(&cloud, cfg.max_scale)?;
            Ok((cloud, feats))
        })
        .collect::<Result<Vec<_>>>()?;
    let tracks = match_by_persistence(&frames, cfg.min_persistence);
    Ok((frames, tracks))
}
