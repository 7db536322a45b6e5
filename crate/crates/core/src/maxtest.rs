//! Permutation test on the most persistent `H_m` feature of a whole stack.
//!
//! The raw stack is permuted over all pixels, smoothed frame by frame, and
//! filtered; the maximum persistence of each replicate forms the null
//! sample. Replicate `q` draws from its own RNG stream, so results do not
//! depend on how replicates are scheduled across threads.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{MvError, Result};
use crate::filtration::{ComplexTemplate, FilteredComplex};
use crate::persistence::{compute_persistence, finite_pairs, PersistenceDiagram, PersistencePoint};
use crate::smoothing::{SmootherConfig, SmootherPlan};
use crate::stack::{replicate_rng, ImageStack};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxTestConfig {
    pub permutations: usize,
    pub dim: usize,
    pub alpha: f64,
    pub seed: u64,
    pub smoother: Option<SmootherConfig>,
    /// Use `(1 + #{null >= obs}) / (1 + B)` instead of `#{null >= obs} / B`.
    #[serde(default)]
    pub pvalue_add_one: bool,
}

impl Default for MaxTestConfig {
    fn default() -> Self {
        MaxTestConfig {
            permutations: 1000,
            dim: 2,
            alpha: 0.05,
            seed: 42,
            smoother: Some(SmootherConfig::default()),
            pvalue_add_one: false,
        }
    }
}

impl MaxTestConfig {
    pub fn validate(&self, ndim: usize) -> Result<()> {
        if self.permutations == 0 {
            return Err(MvError::invalid(
                "number of permutations must be at least 1",
            ));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(MvError::invalid(format!(
                "alpha must lie in (0, 1), got {}",
                self.alpha
            )));
        }
        if self.dim == 0 || self.dim >= ndim {
            return Err(MvError::invalid(format!(
                "homology dimension {} not testable on a {ndim}-axis stack",
                self.dim
            )));
        }
        if let Some(s) = &self.smoother {
            s.validate()?;
        }
        Ok(())
    }
}

/// The most persistent feature of one dimension. `birth`/`death` are absent
/// when the diagram has no point in that dimension, in which case `rho` is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MaxFeature {
    pub rho: f64,
    pub birth: Option<f64>,
    pub death: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaxTestResult {
    pub dim: usize,
    pub permutations: usize,
    pub alpha: f64,
    pub seed: u64,
    pub pvalue_add_one: bool,
    pub rho_obs: f64,
    pub birth_obs: Option<f64>,
    pub death_obs: Option<f64>,
    pub null_samples: Vec<f64>,
    pub p_value: f64,
    pub reject: bool,
    pub theta_hat: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

fn pick_max<'a>(points: impl Iterator<Item = &'a PersistencePoint>) -> MaxFeature {
    let best = points.max_by(|a, b| {
        a.persistence()
            .total_cmp(&b.persistence())
            .then(a.birth.total_cmp(&b.birth))
            .then(b.birth_position.cmp(&a.birth_position))
    });
    match best {
        Some(p) => MaxFeature {
            rho: p.persistence(),
            birth: Some(p.birth),
            death: Some(p.death),
        },
        None => MaxFeature {
            rho: 0.0,
            birth: None,
            death: None,
        },
    }
}

/// Most persistent dimension-`m` point. Essential classes count only for
/// `m = 0`; ties go to the larger birth, then the earlier creating simplex.
pub fn max_persistence(pd: &PersistenceDiagram, m: usize) -> MaxFeature {
    pick_max(pd.in_dim(m).filter(|p| m == 0 || !p.essential))
}

/// Permutation p-value from an observed statistic and its null sample.
pub fn permutation_p_value(rho_obs: f64, nulls: &[f64], add_one: bool) -> f64 {
    let hits = nulls.iter().filter(|&&r| r >= rho_obs).count();
    if add_one {
        (hits + 1) as f64 / (nulls.len() + 1) as f64
    } else {
        hits as f64 / nulls.len() as f64
    }
}

/// Applies the test's decision rule to a precomputed null sample.
pub fn decide(observed: MaxFeature, null_samples: Vec<f64>, cfg: &MaxTestConfig) -> MaxTestResult {
    let p_value = permutation_p_value(observed.rho, &null_samples, cfg.pvalue_add_one);
    let reject = p_value < cfg.alpha && observed.birth.is_some();
    let mut warnings = Vec::new();
    let b = null_samples.len();
    if b > 0 && 1.0 / b as f64 >= cfg.alpha {
        let msg = format!(
            "{b} permutations cannot resolve alpha = {}; only p = 0 rejects",
            cfg.alpha
        );
        log::warn!("{msg}");
        warnings.push(msg);
    }
    MaxTestResult {
        dim: cfg.dim,
        permutations: b,
        alpha: cfg.alpha,
        seed: cfg.seed,
        pvalue_add_one: cfg.pvalue_add_one,
        rho_obs: observed.rho,
        birth_obs: observed.birth,
        death_obs: observed.death,
        null_samples,
        p_value,
        reject,
        theta_hat: if reject { observed.birth } else { None },
        warnings,
    }
}

/// Shared per-geometry state: complex template and smoothing operator.
pub struct StatisticKernel {
    template: Arc<ComplexTemplate>,
    plan: Option<SmootherPlan>,
    dim: usize,
}

impl StatisticKernel {
    pub fn new(dims: &[usize], dim: usize, smoother: Option<&SmootherConfig>) -> Result<Self> {
        let template = Arc::new(ComplexTemplate::freudenthal(dims, dim + 1)?);
        let plan = smoother
            .map(|cfg| SmootherPlan::new(dims[0], dims[1], cfg))
            .transpose()?;
        Ok(StatisticKernel {
            template,
            plan,
            dim,
        })
    }

    pub fn smooth(&self, stack: &ImageStack) -> Result<ImageStack> {
        match &self.plan {
            Some(plan) => plan.apply_stack(stack),
            None => Ok(stack.clone()),
        }
    }

    /// Maximum persistence of an already smoothed stack.
    pub fn statistic_smoothed(&self, values: &[f64]) -> Result<MaxFeature> {
        let fc = FilteredComplex::from_template(self.template.clone(), values)?;
        Ok(if self.dim == 0 {
            max_persistence(&compute_persistence(&fc, 0), 0)
        } else {
            pick_max(finite_pairs(&fc, self.dim).iter())
        })
    }

    pub fn statistic(&self, raw: &ImageStack) -> Result<MaxFeature> {
        self.statistic_smoothed(self.smooth(raw)?.values())
    }

    /// Null replicate `q` (1-based): permute, smooth, filter, maximize.
    pub fn replicate(&self, raw: &ImageStack, seed: u64, q: u64) -> Result<f64> {
        use rand::seq::SliceRandom;
        let mut vals = raw.values().to_vec();
        vals.shuffle(&mut replicate_rng(seed, q));
        let vals = match &self.plan {
            Some(plan) => vals
                .chunks(plan.rows() * plan.cols())
                .flat_map(|f| plan.apply(f))
                .collect(),
            None => vals,
        };
        Ok(self.statistic_smoothed(&vals)?.rho)
    }
}

/// Runs the full test on an unsmoothed stack.
pub fn run_max_test(raw: &ImageStack, cfg: &MaxTestConfig) -> Result<MaxTestResult> {
    cfg.validate(raw.ndim())?;
    let kernel = StatisticKernel::new(raw.dims(), cfg.dim, cfg.smoother.as_ref())?;
    let observed = kernel.statistic(raw)?;
    let nulls = (1..=cfg.permutations as u64)
        .into_par_iter()
        .map(|q| kernel.replicate(raw, cfg.seed, q))
        .collect::<Result<Vec<f64>>>()?;
    Ok(decide(observed, nulls, cfg))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(dim: usize, birth: f64, death: f64, pos: u32) -> PersistencePoint {
        PersistencePoint {
            dim,
            birth,
            death,
            essential: false,
            birth_position: pos,
        }
    }

    fn diagram(points: Vec<PersistencePoint>) -> PersistenceDiagram {
        PersistenceDiagram {
            points,
            betti: vec![],
        }
    }

    #[test]
    fn single_candidate() {
        let f = max_persistence(&diagram(vec![pt(1, 10.0, 2.0, 0)]), 1);
        assert_eq!(
            f,
            MaxFeature {
                rho: 8.0,
                birth: Some(10.0),
                death: Some(2.0)
            }
        );
    }

    #[test]
    fn empty_dimension_means_no_feature() {
        let f = max_persistence(&diagram(vec![pt(0, 10.0, 2.0, 0)]), 1);
        assert_eq!(f.rho, 0.0);
        assert!(f.birth.is_none() && f.death.is_none());
    }

    #[test]
    fn picks_largest_persistence() {
        let f = max_persistence(&diagram(vec![pt(1, 9.0, 4.0, 0), pt(1, 10.0, 2.0, 1)]), 1);
        assert_eq!((f.rho, f.birth, f.death), (8.0, Some(10.0), Some(2.0)));
    }

    #[test]
    fn ties_prefer_larger_birth_then_earlier_simplex() {
        let f = max_persistence(&diagram(vec![pt(1, 9.0, 4.0, 3), pt(1, 6.0, 1.0, 0)]), 1);
        assert_eq!(f.birth, Some(9.0));
        let f = max_persistence(&diagram(vec![pt(1, 9.0, 4.0, 3), pt(1, 9.0, 4.0, 1)]), 1);
        assert_eq!(f.birth, Some(9.0));
    }

    #[test]
    fn essential_counts_only_in_dimension_zero() {
        let mut e = pt(0, 10.0, 0.0, 0);
        e.essential = true;
        let f = max_persistence(&diagram(vec![e, pt(0, 5.0, 4.0, 1)]), 0);
        assert_eq!(f.rho, 10.0);
        let mut e1 = pt(1, 10.0, 0.0, 0);
        e1.essential = true;
        assert_eq!(max_persistence(&diagram(vec![e1]), 1).rho, 0.0);
    }

    #[test]
    fn p_value_forms() {
        let nulls = [1.0, 5.0, 8.0, 9.0];
        assert_eq!(permutation_p_value(8.0, &nulls, false), 0.5);
        assert_eq!(permutation_p_value(8.0, &nulls, true), 3.0 / 5.0);
        assert_eq!(permutation_p_value(10.0, &nulls, false), 0.0);
    }

    #[test]
    fn observed_below_all_nulls() {
        let cfg = MaxTestConfig::default();
        let obs = MaxFeature {
            rho: 1.0,
            birth: Some(3.0),
            death: Some(2.0),
        };
        let r = decide(obs, vec![2.0; 20], &cfg);
        assert_eq!(r.p_value, 1.0);
        assert!(!r.reject);
        assert!(r.theta_hat.is_none());
    }

    #[test]
    fn warns_on_coarse_p_floor() {
        let cfg = MaxTestConfig {
            alpha: 0.05,
            ..Default::default()
        };
        let obs = MaxFeature {
            rho: 1.0,
            birth: Some(3.0),
            death: Some(2.0),
        };
        assert!(!decide(obs, vec![0.0; 10], &cfg).warnings.is_empty());
        assert!(decide(obs, vec![0.0; 99], &cfg).warnings.is_empty());
    }

    #[test]
    fn config_validation() {
        let mut cfg = MaxTestConfig::default();
        assert!(cfg.validate(3).is_ok());
        cfg.dim = 3;
        assert!(cfg.validate(3).is_err());
        cfg.dim = 0;
        assert!(cfg.validate(3).is_err());
        cfg.dim = 1;
        cfg.alpha = 1.0;
        assert!(cfg.validate(3).is_err());
        cfg.alpha = 0.05;
        cfg.permutations = 0;
        assert!(cfg.validate(3).is_err());
    }
}
