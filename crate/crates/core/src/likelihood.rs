//! Posterior scores, the MAP rule, the log-likelihood difference and
//! conditional sampling of observation counts.
//!
//! Observations are kept as per-model symbol counts: the joint likelihood of
//! independent queries depends on the data only through those counts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::{Error, Result};
use crate::model::{Instance, QueryPlan};

/// Relative tolerance under which two log scores count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// `a >= b` up to [`TIE_TOLERANCE`] relative to the magnitudes involved.
/// Shared by the MAP rule, the exact oracle and the pairwise events so that
/// all of them agree on what a tie is.
#[inline]
pub fn at_least(a: f64, b: f64) -> bool {
    a >= b - TIE_TOLERANCE * 1f64.max(a.abs()).max(b.abs())
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TiePolicy {
    /// Ties go to the smallest label index.
    #[default]
    LowestIndex,
    /// A tie in the argmax set is reported as [`Decision::Tie`] and scored
    /// as an error.
    CountTieAsError,
}

impl TiePolicy {
    pub const ALL: [TiePolicy; 2] = [TiePolicy::LowestIndex, TiePolicy::CountTieAsError];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Decision {
    Label(usize),
    Tie,
}

impl Decision {
    /// Whether this decision is a misclassification of `truth`.
    pub fn is_error(self, truth: usize) -> bool {
        self != Decision::Label(truth)
    }
}

/// Per-model symbol counts `n_m(x)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ObservationSet {
    counts: Vec<Vec<u32>>,
}

impl ObservationSet {
    pub fn empty(instance: &Instance) -> Self {
        Self {
            counts: instance.models().iter().map(|m| vec![0; m.alphabet_size()]).collect(),
        }
    }

    /// Checks shapes against the instance alphabets.
    pub fn new(instance: &Instance, counts: Vec<Vec<u32>>) -> Result<Self> {
        if counts.len() != instance.num_models() {
            return Err(Error::Dimension {
                what: "models in observation set",
                expected: instance.num_models(),
                got: counts.len(),
            });
        }
        for (m, c) in instance.models().iter().zip(&counts) {
            if c.len() != m.alphabet_size() {
                return Err(Error::Dimension {
                    what: "symbols in observation counts",
                    expected: m.alphabet_size(),
                    got: c.len(),
                });
            }
        }
        Ok(Self { counts })
    }

    /// Builds counts from `(model, symbol, count)` tokens.
    pub fn from_symbols<'a>(
        instance: &Instance,
        entries: impl IntoIterator<Item = (&'a str, &'a str, u32)>,
    ) -> Result<Self> {
        let mut obs = Self::empty(instance);
        for (model, symbol, n) in entries {
            let m = instance.model_index(model)?;
            let x = instance
                .model(m)
                .symbol_index(symbol)
                .ok_or_else(|| Error::UnknownToken {
                    kind: "symbol",
                    token: symbol.to_string(),
                })?;
            obs.counts[m][x] += n;
        }
        Ok(obs)
    }

    pub fn counts(&self) -> &[Vec<u32>] {
        &self.counts
    }

    pub fn model_counts(&self, m: usize) -> &[u32] {
        &self.counts[m]
    }

    /// Per-model totals, i.e. the plan that generated these counts.
    pub fn totals(&self) -> QueryPlan {
        QueryPlan::new(self.counts.iter().map(|c| c.iter().sum()).collect())
    }

    /// `{model: {symbol: count}}` with zero counts omitted.
    pub fn to_json(&self, instance: &Instance) -> Value {
        let mut out = Map::new();
        for (m, c) in instance.models().iter().zip(&self.counts) {
            let mut per = Map::new();
            for (sym, &n) in m.alphabet().iter().zip(c) {
                if n > 0 {
                    per.insert(sym.clone(), Value::from(n));
                }
            }
            out.insert(m.name().to_string(), Value::Object(per));
        }
        Value::Object(out)
    }

    pub fn from_json(instance: &Instance, value: &Value) -> Result<Self> {
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Argument("observation set must be a JSON object".into()))?;
        let mut entries = Vec::new();
        for (model, per) in obj {
            let per = per
                .as_object()
                .ok_or_else(|| Error::Argument(format!("counts for `{model}` must be an object")))?;
            for (sym, n) in per {
                let n = n
                    .as_u64()
                    .and_then(|n| u32::try_from(n).ok())
                    .ok_or_else(|| Error::Argument(format!("bad count for `{model}`/`{sym}`")))?;
                entries.push((model.as_str(), sym.as_str(), n));
            }
        }
        Self::from_symbols(instance, entries)
    }
}

/// Sums `f(0..n)` by recursive halving.
fn pairwise_sum_by(lo: usize, hi: usize, f: &impl Fn(usize) -> f64) -> f64 {
    if hi - lo <= 8 {
        (lo..hi).map(f).sum()
    } else {
        let mid = lo + (hi - lo) / 2;
        pairwise_sum_by(lo, mid, f) + pairwise_sum_by(mid, hi, f)
    }
}

fn score_unchecked(instance: &Instance, obs: &ObservationSet, y: usize) -> f64 {
    let mut s = instance.log_prior()[y];
    for (m, c) in instance.models().iter().zip(&obs.counts) {
        let lr = m.log_row(y);
        s += pairwise_sum_by(0, c.len(), &|x| {
            if c[x] == 0 {
                0.0
            } else {
                c[x] as f64 * lr[x]
            }
        });
    }
    s
}

fn check_obs(instance: &Instance, obs: &ObservationSet) -> Result<()> {
    if obs.counts.len() != instance.num_models()
        || obs
            .counts
            .iter()
            .zip(instance.models())
            .any(|(c, m)| c.len() != m.alphabet_size())
    {
        return Err(Error::Argument(
            "observation set does not match instance alphabets".into(),
        ));
    }
    Ok(())
}

/// Unnormalized log posterior `log pi(y) + sum n_m(x) log p_m(x|y)` per label.
pub fn log_posterior_scores(instance: &Instance, obs: &ObservationSet) -> Result<Vec<f64>> {
    check_obs(instance, obs)?;
    Ok((0..instance.num_labels())
        .map(|y| score_unchecked(instance, obs, y))
        .collect())
}

/// MAP decision from precomputed scores.
pub fn decide(scores: &[f64], policy: TiePolicy) -> Decision {
    let best = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut winners = scores.iter().enumerate().filter(|(_, &s)| at_least(s, best));
    let first = winners.next().map(|(i, _)| i).expect("non-empty scores");
    match policy {
        TiePolicy::LowestIndex => Decision::Label(first),
        TiePolicy::CountTieAsError => {
            if winners.next().is_some() {
                Decision::Tie
            } else {
                Decision::Label(first)
            }
        }
    }
}

pub fn map_estimate(instance: &Instance, obs: &ObservationSet, policy: TiePolicy) -> Result<Decision> {
    Ok(decide(&log_posterior_scores(instance, obs)?, policy))
}

/// `Delta_{y,y'} = score(y') - score(y)`: the log-posterior advantage of the
/// competitor `y2` over `y`.
pub fn delta(instance: &Instance, obs: &ObservationSet, y: usize, y2: usize) -> Result<f64> {
    instance.check_label(y)?;
    instance.check_label(y2)?;
    if y == y2 {
        return Err(Error::Argument("delta needs two distinct labels".into()));
    }
    check_obs(instance, obs)?;
    Ok(score_unchecked(instance, obs, y2) - score_unchecked(instance, obs, y))
}

/// Draws `r_m` independent responses from each model under `truth`,
/// deterministic in `seed`.
pub fn sample_observations(instance: &Instance, plan: &QueryPlan, truth: usize, seed: u64) -> Result<ObservationSet> {
    instance.check_plan(plan)?;
    instance.check_label(truth)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok(sample_with(instance, plan, truth, &mut rng))
}

/// Multinomial draw per model as a chain of conditional binomials.
pub(crate) fn sample_with<R: Rng + ?Sized>(
    instance: &Instance,
    plan: &QueryPlan,
    truth: usize,
    rng: &mut R,
) -> ObservationSet {
    let counts = instance
        .models()
        .iter()
        .zip(plan.counts())
        .map(|(m, &r)| {
            let row = m.row(truth);
            let mut c = vec![0u32; row.len()];
            let mut left = r as u64;
            let mut mass = 1.0f64;
            for x in 0..row.len() {
                if left == 0 {
                    break;
                }
                if x + 1 == row.len() {
                    c[x] = left as u32;
                    break;
                }
                let p = (row[x] / mass).clamp(0.0, 1.0);
                let k = Binomial::new(left, p).expect("valid binomial").sample(rng);
                c[x] = k as u32;
                left -= k;
                mass -= row[x];
            }
            c
        })
        .collect();
    ObservationSet { counts }
}
