//! Chernoff affinity factors and the statewise surrogate error bound.
//!
//! For an ordered pair `(y, y')` and tilt `s` the affinity of model `m` is
//! `M(s) = sum_x p(x|y)^(1-s) p(x|y')^s`. The pairwise proxy
//! `(pi(y')/pi(y))^s prod_m M_m(s)^(r_m)` upper-bounds the probability that
//! `y'` scores at least as high as `y` when `y` is true, and the surrogate
//! for label `y` sums the minimized proxies over competitors. Everything is
//! carried in log space.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Instance, QueryPlan};
use crate::optimize::golden_section_min;

/// Default tolerance on the optimized tilt.
pub const DEFAULT_TILT_TOL: f64 = 1e-6;

/// Tilt returned for pairs whose proxy is constant in `s`.
pub const FLAT_TILT: f64 = 0.5;

/// `log M_m^{(y,y')}(s)`, no argument checks. Clamped to `<= 0` (Hölder).
#[inline]
pub fn log_affinity_unchecked(instance: &Instance, m: usize, y: usize, y2: usize, s: f64) -> f64 {
    if s == 0.0 || s == 1.0 {
        return 0.0;
    }
    let model = instance.model(m);
    if !model.distinguishes(y, y2) {
        return 0.0;
    }
    let (a, b) = (model.log_row(y), model.log_row(y2));
    let mut hi = f64::NEG_INFINITY;
    for (la, lb) in a.iter().zip(b) {
        hi = hi.max((1.0 - s) * la + s * lb);
    }
    let sum: f64 = a
        .iter()
        .zip(b)
        .map(|(la, lb)| ((1.0 - s) * la + s * lb - hi).exp())
        .sum();
    (hi + sum.ln()).min(0.0)
}

fn check_pair(instance: &Instance, y: usize, y2: usize) -> Result<()> {
    instance.check_label(y)?;
    instance.check_label(y2)?;
    if y == y2 {
        return Err(Error::Argument(format!("pair ({y}, {y2}) must have distinct labels")));
    }
    Ok(())
}

fn check_tilt(s: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) {
        return Err(Error::Argument(format!("tilt {s} outside [0, 1]")));
    }
    Ok(())
}

/// Chernoff affinity factor `M_m^{(y,y')}(s)`, in `(0, 1]`.
pub fn affinity(instance: &Instance, m: usize, y: usize, y2: usize, s: f64) -> Result<f64> {
    check_pair(instance, y, y2)?;
    check_tilt(s)?;
    if m >= instance.num_models() {
        return Err(Error::OutOfRange {
            what: "model",
            index: m,
            size: instance.num_models(),
        });
    }
    Ok(log_affinity_unchecked(instance, m, y, y2, s).exp())
}

#[inline]
pub(crate) fn proxy_log_unchecked(instance: &Instance, counts: &[u32], y: usize, y2: usize, s: f64) -> f64 {
    let lp = instance.log_prior();
    let mut v = s * (lp[y2] - lp[y]);
    for (m, &r) in counts.iter().enumerate() {
        if r > 0 {
            v += r as f64 * log_affinity_unchecked(instance, m, y, y2, s);
        }
    }
    v
}

/// Log of the pairwise Chernoff proxy at a fixed tilt.
pub fn pairwise_proxy_log(instance: &Instance, plan: &QueryPlan, y: usize, y2: usize, s: f64) -> Result<f64> {
    check_pair(instance, y, y2)?;
    check_tilt(s)?;
    instance.check_plan(plan)?;
    Ok(proxy_log_unchecked(instance, plan.counts(), y, y2, s))
}

/// Optimized tilt for one ordered pair and the log proxy value there.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tilt {
    pub s: f64,
    pub log_value: f64,
}

fn is_flat(instance: &Instance, counts: &[u32], y: usize, y2: usize) -> bool {
    let lp = instance.log_prior();
    lp[y] == lp[y2]
        && counts
            .iter()
            .enumerate()
            .all(|(m, &r)| r == 0 || !instance.model(m).distinguishes(y, y2))
}

pub(crate) fn optimize_tilt_unchecked(instance: &Instance, counts: &[u32], y: usize, y2: usize, tol: f64) -> Tilt {
    if is_flat(instance, counts, y, y2) {
        return Tilt {
            s: FLAT_TILT,
            log_value: proxy_log_unchecked(instance, counts, y, y2, FLAT_TILT),
        };
    }
    let (s, _) = golden_section_min(|s| proxy_log_unchecked(instance, counts, y, y2, s), 0.0, 1.0, tol);
    Tilt {
        s,
        log_value: proxy_log_unchecked(instance, counts, y, y2, s),
    }
}

/// Minimizes the log proxy over `s in [0, 1]`. The log proxy is convex in
/// `s`, so golden-section search converges to the global minimizer.
pub fn optimize_tilt(instance: &Instance, plan: &QueryPlan, y: usize, y2: usize, tol: f64) -> Result<Tilt> {
    check_pair(instance, y, y2)?;
    instance.check_plan(plan)?;
    if !(tol > 0.0) {
        return Err(Error::Argument(format!("tilt tolerance must be positive, got {tol}")));
    }
    Ok(optimize_tilt_unchecked(instance, plan.counts(), y, y2, tol))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairBound {
    pub competitor: String,
    pub s: f64,
    pub log_value: f64,
}

/// Surrogate bound for one label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabelBound {
    pub label: String,
    pub value: f64,
    pub log_value: f64,
    pub tolerance: f64,
    pub feasible: bool,
    pub pairs: Vec<PairBound>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurrogateReport {
    pub feasible: bool,
    pub labels: Vec<LabelBound>,
}

impl SurrogateReport {
    pub fn values(&self) -> Vec<f64> {
        self.labels.iter().map(|l| l.value).collect()
    }
}

fn log_sum_exp(v: &[f64]) -> f64 {
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi == f64::NEG_INFINITY {
        return hi;
    }
    hi + v.iter().map(|x| (x - hi).exp()).sum::<f64>().ln()
}

pub(crate) fn label_bound_unchecked(instance: &Instance, counts: &[u32], y: usize, tol: f64) -> LabelBound {
    let mut pairs = Vec::with_capacity(instance.num_labels() - 1);
    let mut logs = Vec::with_capacity(instance.num_labels() - 1);
    for y2 in 0..instance.num_labels() {
        if y2 == y {
            continue;
        }
        let t = optimize_tilt_unchecked(instance, counts, y, y2, tol);
        logs.push(t.log_value);
        pairs.push(PairBound {
            competitor: instance.labels()[y2].clone(),
            s: t.s,
            log_value: t.log_value,
        });
    }
    let value: f64 = logs.iter().map(|l| l.exp()).sum();
    let alpha = instance.tolerances()[y];
    LabelBound {
        label: instance.labels()[y].clone(),
        value,
        log_value: log_sum_exp(&logs),
        tolerance: alpha,
        feasible: value <= alpha,
        pairs,
    }
}

/// `P̄_e(y; r)`: sum over competitors of the minimized pairwise proxies.
pub fn surrogate_error(instance: &Instance, plan: &QueryPlan, y: usize, tol: f64) -> Result<LabelBound> {
    instance.check_label(y)?;
    instance.check_plan(plan)?;
    Ok(label_bound_unchecked(instance, plan.counts(), y, tol))
}

/// Checks the surrogate constraint for every label.
pub fn is_surrogate_feasible(instance: &Instance, plan: &QueryPlan, tol: f64) -> Result<SurrogateReport> {
    instance.check_plan(plan)?;
    let labels: Vec<LabelBound> = (0..instance.num_labels())
        .map(|y| label_bound_unchecked(instance, plan.counts(), y, tol))
        .collect();
    Ok(SurrogateReport {
        feasible: labels.iter().all(|l| l.feasible),
        labels,
    })
}

/// Feasibility only, stopping at the first violated label.
pub(crate) fn surrogate_feasible_fast(instance: &Instance, counts: &[u32], tol: f64) -> bool {
    (0..instance.num_labels()).all(|y| {
        let alpha = instance.tolerances()[y];
        let mut total = 0.0;
        for y2 in 0..instance.num_labels() {
            if y2 != y {
                total += optimize_tilt_unchecked(instance, counts, y, y2, tol).log_value.exp();
                if total > alpha {
                    return false;
                }
            }
        }
        true
    })
}
