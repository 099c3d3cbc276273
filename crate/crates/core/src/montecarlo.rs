//! Simulation estimates of statewise errors for plans too large to enumerate.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::likelihood::{decide, log_posterior_scores, sample_with, TiePolicy};
use crate::model::{Instance, QueryPlan};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub estimate: f64,
    pub errors: u64,
    pub trials: u64,
    pub std_error: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub seed: u64,
}

/// Wilson score interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64, z: f64) -> (f64, f64) {
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z / denom * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if k as f64 == n { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// Generator for one trial: the seed picks the key, the trial index picks
/// the stream, so any subset of trials can be replayed independently.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

/// Fraction of `trials` simulated rounds, conditional on `Y = truth`, in
/// which the MAP decision is wrong.
pub fn simulate_error(
    instance: &Instance,
    plan: &QueryPlan,
    truth: usize,
    trials: u64,
    seed: u64,
    policy: TiePolicy,
) -> Result<McEstimate> {
    instance.check_plan(plan)?;
    instance.check_label(truth)?;
    if trials == 0 {
        return Err(Error::Argument("trials must be at least 1".into()));
    }
    let errors = (0..trials)
        .into_par_iter()
        .filter(|&t| {
            let mut rng = trial_rng(seed, t);
            let obs = sample_with(instance, plan, truth, &mut rng);
            let scores = log_posterior_scores(instance, &obs).expect("sampled counts match alphabets");
            decide(&scores, policy).is_error(truth)
        })
        .count() as u64;
    let p = errors as f64 / trials as f64;
    let (lo, hi) = wilson_interval(errors, trials, Z95);
    Ok(McEstimate {
        estimate: p,
        errors,
        trials,
        std_error: (p * (1.0 - p) / trials as f64).sqrt(),
        wilson_low: lo,
        wilson_high: hi,
        seed,
    })
}
