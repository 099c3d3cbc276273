use serde::{Deserialize, Serialize};

use crate::chernoff::{log_affinity_unchecked, DEFAULT_TILT_TOL};
use crate::error::{Error, Result};
use crate::model::Instance;
use crate::optimize::golden_section_min;

/// Every parameter the approximation scheme needs, derived from the instance
/// and the accuracy `epsilon`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DerivedConstants {
    pub epsilon: f64,
    /// Largest absolute per-symbol log-likelihood ratio.
    #[serde(rename = "B")]
    pub b: f64,
    /// Worst pair's best contraction of the all-ones design.
    pub rho: f64,
    pub n_unif: u32,
    pub kappa_min: f64,
    pub delta_margin: f64,
    pub theta: f64,
    pub k_eps: u32,
    pub k_max: u32,
    #[serde(rename = "N_max")]
    pub n_max: u32,
    #[serde(rename = "Lambda")]
    pub lambda: f64,
    pub h: f64,
    #[serde(rename = "Delta_round")]
    pub delta_round: f64,
    #[serde(rename = "T_max")]
    pub t_max: u64,
    /// Tolerance level below which the `(1+eps)` bound is proven to hold.
    pub alpha_padding_threshold: f64,
}

/// `sum_m log M_m^{(y,y')}(s)`: the log affinity of the all-ones design.
pub(crate) fn log_product_affinity(instance: &Instance, y: usize, y2: usize, s: f64) -> f64 {
    (0..instance.num_models())
        .map(|m| log_affinity_unchecked(instance, m, y, y2, s))
        .sum()
}

/// `rho = max_{y != y'} min_s prod_m M_m(s)`.
pub fn pair_contraction(instance: &Instance) -> f64 {
    instance
        .pairs()
        .into_iter()
        .map(|(y, y2)| golden_section_min(|s| log_product_affinity(instance, y, y2, s), 0.0, 1.0, DEFAULT_TILT_TOL).1)
        .fold(f64::NEG_INFINITY, f64::max)
        .exp()
}

fn n_unif_from_rho(instance: &Instance, rho: f64) -> u32 {
    let l = instance.num_labels() as f64;
    let num = ((l - 1.0) * instance.prior_max() / (instance.prior_min() * instance.alpha_min())).ln();
    ((num / -rho.ln()).ceil() as u32).max(1)
}

/// Smallest `n` for which querying every model `n` times is guaranteed
/// surrogate-feasible.
pub fn uniform_design_count(instance: &Instance) -> u32 {
    n_unif_from_rho(instance, pair_contraction(instance))
}

fn ceil_count(x: f64) -> f64 {
    // guard against 6.000000000001 style round-off before the ceiling
    (x - 1e-9).ceil().max(0.0)
}

pub fn derive_constants(instance: &Instance, epsilon: f64) -> Result<DerivedConstants> {
    instance.ensure_valid()?;
    if !(epsilon > 0.0 && epsilon <= 1.0) {
        return Err(Error::Argument(format!("epsilon must lie in (0, 1], got {epsilon}")));
    }
    let l = instance.num_labels();
    let k = instance.num_models();
    let b = instance
        .models()
        .iter()
        .map(|m| m.max_abs_log_ratio())
        .fold(0.0, f64::max);

    let rho = pair_contraction(instance);
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Internal(format!("pair contraction {rho} outside (0,1)")));
    }
    let n_unif = n_unif_from_rho(instance, rho);

    let mut kappa_min = f64::INFINITY;
    for m in instance.models() {
        for y in 0..l {
            for y2 in (y + 1)..l {
                if m.distinguishes(y, y2) {
                    kappa_min = kappa_min.min(m.kl(y, y2)).min(m.kl(y2, y));
                }
            }
        }
    }
    let delta_margin = (kappa_min / (4.0 * b * b)).min(0.25);

    let theta = instance
        .pairs()
        .into_iter()
        .flat_map(|(y, y2)| [delta_margin, 1.0 - delta_margin].map(|s| log_product_affinity(instance, y, y2, s)))
        .fold(f64::NEG_INFINITY, f64::max)
        .exp();
    if !(theta > 0.0 && theta < 1.0) {
        return Err(Error::Internal(format!("contraction constant {theta} outside (0,1)")));
    }

    let log1e = (1.0 + epsilon).ln();
    let k_eps = (2.0 * log1e / -theta.ln()).ceil() as u32;
    let k_max = (2.0 * 2f64.ln() / -theta.ln()).ceil() as u32;
    let c_sum = instance.cost_sum();
    let c_min = instance.cost_min();
    let n_max = ceil_count(n_unif as f64 * c_sum / c_min) + k_max as f64 * k as f64;
    if n_max > u32::MAX as f64 {
        return Err(Error::Budget {
            unit: "queries in N_max",
            required: n_max,
            budget: u32::MAX as f64,
        });
    }
    let n_max = n_max as u32;
    let lambda = (instance.prior_max() / instance.prior_min()).ln() + b * n_max as f64;
    let h = log1e / lambda;
    let delta_round = log1e / n_max as f64;
    let t_max = (b * n_max as f64 / delta_round).ceil() as u64;
    let pad = (l as f64 - 1.0) * instance.prior_min() / instance.prior_max()
        * (-b * k_eps as f64 * c_sum / (epsilon * c_min)).exp();

    Ok(DerivedConstants {
        epsilon,
        b,
        rho,
        n_unif,
        kappa_min,
        delta_margin,
        theta,
        k_eps,
        k_max,
        n_max,
        lambda,
        h,
        delta_round,
        t_max,
        alpha_padding_threshold: pad,
    })
}

impl DerivedConstants {
    pub fn invariant_violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if !(self.b > 0.0) {
            v.push(format!("B = {} not positive", self.b));
        }
        if !(self.rho > 0.0 && self.rho < 1.0) {
            v.push(format!("rho = {} not in (0,1)", self.rho));
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            v.push(format!("theta = {} not in (0,1)", self.theta));
        }
        if !(self.delta_margin > 0.0 && self.delta_margin < 0.5) {
            v.push(format!("delta_margin = {} not in (0,1/2)", self.delta_margin));
        }
        if self.n_unif == 0 || self.k_eps == 0 || self.k_max == 0 || self.n_max == 0 || self.t_max == 0 {
            v.push("a count is zero".into());
        }
        if !(self.lambda >= self.b) {
            v.push(format!("Lambda = {} below B = {}", self.lambda, self.b));
        }
        v
    }

    /// Lower bound on the cost of any surrogate-feasible plan, when the
    /// tolerances are tight enough for it to say anything.
    pub fn cost_lower_bound(&self, instance: &Instance) -> Option<f64> {
        let l = instance.num_labels() as f64;
        let ratio = (l - 1.0) * instance.prior_min() / instance.prior_max();
        let a = instance.alpha_min();
        (a < ratio).then(|| instance.cost_min() / self.b * (ratio / a).ln())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fixtures::bsc;

    #[test]
    fn bsc_constants() {
        let c = derive_constants(&bsc(), 0.5).unwrap();
        let ln9 = 9f64.ln();
        assert!((c.b - ln9).abs() < 1e-12);
        assert!((c.rho - 0.6).abs() < 1e-10);
        assert_eq!(c.n_unif, 6);
        assert!((c.kappa_min - 0.8 * ln9).abs() < 1e-12);
        let dm = 0.8 * ln9 / (4.0 * ln9 * ln9);
        assert!((c.delta_margin - dm).abs() < 1e-15);
        assert!((c.delta_margin - 0.09102).abs() < 1e-4);
        // direct evaluation of the affinity at the interval endpoint
        let m = 0.9f64.powf(1.0 - dm) * 0.1f64.powf(dm) + 0.1f64.powf(1.0 - dm) * 0.9f64.powf(dm);
        assert!((c.theta - m).abs() < 1e-12);
        assert!((c.theta - 0.859).abs() < 1e-3);
        assert!(c.invariant_violations().is_empty());
        assert_eq!(c.n_max, 6 + c.k_max);
    }

    #[test]
    fn theta_is_max_on_interval() {
        let inst = bsc();
        let c = derive_constants(&inst, 0.5).unwrap();
        let grid_max = (0..=1000)
            .map(|i| c.delta_margin + (1.0 - 2.0 * c.delta_margin) * i as f64 / 1000.0)
            .map(|s| log_product_affinity(&inst, 0, 1, s).exp())
            .fold(0.0, f64::max);
        assert!((grid_max - c.theta).abs() < 1e-12);
    }

    #[test]
    fn epsilon_range() {
        assert!(derive_constants(&bsc(), 0.0).is_err());
        assert!(derive_constants(&bsc(), 1.5).is_err());
        assert!(derive_constants(&bsc(), 1.0).is_ok());
    }
}
