//! Per-frame 2D local polynomial regression (LOESS).
//!
//! Each output pixel is the value at that pixel of a tricube-weighted
//! least-squares polynomial fitted over its nearest neighbours. The fit is
//! linear in the responses, so for a fixed frame geometry the smoother is a
//! sparse linear operator; [`SmootherPlan`] precomputes it once and applies
//! it to any number of frames.

use serde::{Deserialize, Serialize};

use crate::error::{MvError, Result};
use crate::stack::ImageStack;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmootherConfig {
    pub degree: u8,
    pub span: f64,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        SmootherConfig {
            degree: 2,
            span: 0.1,
        }
    }
}

impl SmootherConfig {
    pub fn new(degree: u8, span: f64) -> Result<Self> {
        let cfg = SmootherConfig { degree, span };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.degree > 2 {
            return Err(MvError::invalid(format!(
                "smoothing degree must be 0, 1 or 2, got {}",
                self.degree
            )));
        }
        if !(self.span > 0.0 && self.span <= 1.0) {
            return Err(MvError::invalid(format!(
                "smoothing span must lie in (0, 1], got {}",
                self.span
            )));
        }
        Ok(())
    }

    fn n_monomials(&self) -> usize {
        match self.degree {
            0 => 1,
            1 => 3,
            _ => 6,
        }
    }
}

fn monomials(degree: u8, x: f64, y: f64, out: &mut [f64; 6]) {
    out[0] = 1.0;
    if degree >= 1 {
        out[1] = x;
        out[2] = y;
    }
    if degree >= 2 {
        out[3] = x * x;
        out[4] = x * y;
        out[5] = y * y;
    }
}

/// Precomputed smoothing weights for one frame geometry.
#[derive(Debug, Clone)]
pub struct SmootherPlan {
    rows: usize,
    cols: usize,
    /// Per output pixel, a range into `taps`.
    offsets: Vec<usize>,
    taps: Vec<(u32, f64)>,
}

impl SmootherPlan {
    pub fn new(rows: usize, cols: usize, cfg: &SmootherConfig) -> Result<Self> {
        cfg.validate()?;
        let n = rows * cols;
        let p = cfg.n_monomials();
        let k = ((cfg.span * n as f64).ceil() as usize).clamp(1, n);
        if k < p {
            return Err(MvError::invalid(format!(
                "span {} keeps {k} of {n} pixels, fewer than the {p} coefficients of a degree-{} fit",
                cfg.span, cfg.degree
            )));
        }

        let mut offsets = Vec::with_capacity(n + 1);
        let mut taps = Vec::new();
        let mut dist: Vec<(u64, u32)> = Vec::with_capacity(n);
        offsets.push(0);
        for r in 0..rows {
            for c in 0..cols {
                dist.clear();
                for rr in 0..rows {
                    for cc in 0..cols {
                        let dr = rr.abs_diff(r) as u64;
                        let dc = cc.abs_diff(c) as u64;
                        dist.push((dr * dr + dc * dc, (rr * cols + cc) as u32));
                    }
                }
                dist.select_nth_unstable(k - 1);
                let cutoff = dist[k - 1].0;
                let dmax = (cutoff as f64).sqrt();

                // XᵀWX over the neighbourhood, coordinates centred on the target.
                let mut gram = [[0.0f64; 6]; 6];
                let mut rowv = [0.0f64; 6];
                let mut nbrs: Vec<(u32, f64, [f64; 6])> = Vec::new();
                for &(d2, j) in dist.iter().filter(|(d2, _)| *d2 <= cutoff) {
                    let w = if dmax == 0.0 {
                        1.0
                    } else {
                        let u = (d2 as f64).sqrt() / dmax;
                        let t = 1.0 - u * u * u;
                        t * t * t
                    };
                    if w <= 0.0 {
                        continue;
                    }
                    let (jr, jc) = (j as usize / cols, j as usize % cols);
                    monomials(
                        cfg.degree,
                        jr as f64 - r as f64,
                        jc as f64 - c as f64,
                        &mut rowv,
                    );
                    for a in 0..p {
                        for b in 0..p {
                            gram[a][b] += w * rowv[a] * rowv[b];
                        }
                    }
                    nbrs.push((j, w, rowv));
                }
                // Fitted value at the target is the intercept: e₀ᵀ(XᵀWX)⁻¹XᵀW y.
                let sol = cholesky_solve_unit(&gram, p).ok_or(MvError::RankDeficient {
                    row: r + 1,
                    col: c + 1,
                })?;
                nbrs.sort_by_key(|t| t.0);
                for (j, w, xv) in nbrs {
                    let coef: f64 = (0..p).map(|a| xv[a] * sol[a]).sum::<f64>() * w;
                    taps.push((j, coef));
                }
                offsets.push(taps.len());
            }
        }
        Ok(SmootherPlan {
            rows,
            cols,
            offsets,
            taps,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Smooths one row-major frame.
    pub fn apply(&self, frame: &[f64]) -> Vec<f64> {
        assert_eq!(frame.len(), self.rows * self.cols, "frame size mismatch");
        self.offsets
            .windows(2)
            .map(|w| {
                self.taps[w[0]..w[1]]
                    .iter()
                    .map(|&(j, c)| c * frame[j as usize])
                    .sum()
            })
            .collect()
    }

    /// Smooths every frame of a stack, leaving the time axis untouched.
    pub fn apply_stack(&self, stack: &ImageStack) -> Result<ImageStack> {
        if stack.rows() != self.rows || stack.cols() != self.cols {
            return Err(MvError::invalid(format!(
                "plan built for {}x{} frames, stack has {:?}",
                self.rows,
                self.cols,
                stack.dims()
            )));
        }
        let mut out = Vec::with_capacity(stack.len());
        for frame in stack.values().chunks(self.rows * self.cols) {
            out.extend(self.apply(frame));
        }
        stack.with_values(out)
    }
}

/// Solves `G a = e₀` for symmetric positive definite `G` (top-left `p×p`
/// block). Returns `None` when a pivot collapses relative to the diagonal.
fn cholesky_solve_unit(g: &[[f64; 6]; 6], p: usize) -> Option<[f64; 6]> {
    let scale = (0..p).map(|i| g[i][i]).fold(0.0f64, f64::max);
    if scale <= 0.0 {
        return None;
    }
    let mut l = [[0.0f64; 6]; 6];
    for i in 0..p {
        for j in 0..=i {
            let mut s = g[i][j];
            for k in 0..j {
                s -= l[i][k] * l[j][k];
            }
            if i == j {
                if s <= 1e-10 * scale {
                    return None;
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut z = [0.0f64; 6];
    for i in 0..p {
        let mut s = if i == 0 { 1.0 } else { 0.0 };
        for k in 0..i {
            s -= l[i][k] * z[k];
        }
        z[i] = s / l[i][i];
    }
    let mut a = [0.0f64; 6];
    for i in (0..p).rev() {
        let mut s = z[i];
        for k in i + 1..p {
            s -= l[k][i] * a[k];
        }
        a[i] = s / l[i][i];
    }
    Some(a)
}

pub fn smooth_frame(frame: &ImageStack, cfg: &SmootherConfig) -> Result<ImageStack> {
    if frame.ndim() != 2 {
        return Err(MvError::invalid(format!(
            "smooth_frame expects a 2D frame, got dims {:?}",
            frame.dims()
        )));
    }
    let plan = SmootherPlan::new(frame.rows(), frame.cols(), cfg)?;
    frame.with_values(plan.apply(frame.values()))
}

pub fn smooth_stack(stack: &ImageStack, cfg: &SmootherConfig) -> Result<ImageStack> {
    if stack.ndim() != 3 {
        return Err(MvError::invalid(format!(
            "smooth_stack expects a 3D stack, got dims {:?}",
            stack.dims()
        )));
    }
    SmootherPlan::new(stack.rows(), stack.cols(), cfg)?.apply_stack(stack)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stack::permute_stack;

    fn quad(x: f64, y: f64) -> f64 {
        1.0 + 2.0 * x + 3.0 * y + x * x - y * y + x * y
    }

    #[test]
    fn constant_frame_is_fixed() {
        let f = ImageStack::frame(6, 7, vec![3.25; 42]).unwrap();
        for (deg, span) in [(0, 0.2), (1, 0.3), (2, 0.5), (2, 1.0)] {
            let cfg = SmootherConfig::new(deg, span).unwrap();
            let s = smooth_frame(&f, &cfg).unwrap();
            for v in s.values() {
                assert!((v - 3.25).abs() < 1e-12, "deg {deg} span {span}: {v}");
            }
        }
    }

    #[test]
    fn reproduces_quadratic_at_full_span() {
        let vals: Vec<f64> = (0..100)
            .map(|i| quad((i / 10) as f64 + 1.0, (i % 10) as f64 + 1.0))
            .collect();
        let f = ImageStack::frame(10, 10, vals.clone()).unwrap();
        let s = smooth_frame(&f, &SmootherConfig::new(2, 1.0).unwrap()).unwrap();
        for (a, b) in s.values().iter().zip(&vals) {
            assert!((a - b).abs() < 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn rejects_bad_configs() {
        assert!(SmootherConfig::new(3, 0.5).is_err());
        assert!(SmootherConfig::new(2, 0.0).is_err());
        assert!(SmootherConfig::new(2, 1.5).is_err());
        // 25 pixels at span 0.1 keeps 3 < 6 coefficients.
        let f = ImageStack::frame(5, 5, vec![0.0; 25]).unwrap();
        assert!(matches!(
            smooth_frame(&f, &SmootherConfig::new(2, 0.1).unwrap()),
            Err(MvError::Invalid(_))
        ));
    }

    #[test]
    fn degenerate_geometry_is_rank_deficient() {
        // A single row cannot support a quadratic in two variables.
        let f = ImageStack::frame(1, 12, (0..12).map(f64::from).collect()).unwrap();
        let err = smooth_frame(&f, &SmootherConfig::new(2, 1.0).unwrap()).unwrap_err();
        assert!(matches!(err, MvError::RankDeficient { .. }), "{err}");
    }

    #[test]
    fn stack_smoothing_is_framewise() {
        let vals: Vec<f64> = (0..75).map(|i| ((i * 37) % 11) as f64).collect();
        let st = ImageStack::new(vec![5, 5, 3], vals).unwrap();
        let cfg = SmootherConfig::new(2, 0.5).unwrap();
        let whole = smooth_stack(&st, &cfg).unwrap();
        for o in 1..=3 {
            let f = smooth_frame(&st.slice_at_time(o).unwrap(), &cfg).unwrap();
            assert_eq!(whole.frame_values(o), f.values());
        }
    }

    #[test]
    fn permute_then_smooth_differs_from_smooth_then_permute() {
        let vals: Vec<f64> = (0..75).map(|i| ((i * 37) % 11) as f64).collect();
        let st = ImageStack::new(vec![5, 5, 3], vals).unwrap();
        let cfg = SmootherConfig::new(2, 0.5).unwrap();
        let a = smooth_stack(&permute_stack(&st, 5), &cfg).unwrap();
        let b = permute_stack(&smooth_stack(&st, &cfg).unwrap(), 5);
        assert_ne!(a.values(), b.values());
    }
}
