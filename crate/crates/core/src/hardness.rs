//! Set-cover reduction: builds a query-design instance whose feasible 0/1
//! plans correspond to covers, and checks the correspondence exhaustively on
//! small inputs.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{Error, Result};
use crate::exact::{exact_errors, exact_opt, OptOptions, OptResult, Problem, DEFAULT_PROFILE_BUDGET, PROB_SLACK};
use crate::likelihood::TiePolicy;
use crate::model::{Instance, ModelSpec, QueryPlan, Rule, Violation};

/// Default perturbation of the discriminator's zero cells.
pub const DEFAULT_ETA: f64 = 1e-9;
/// Default slack below one for the null label's tolerance.
pub const DEFAULT_DELTA_DOUBLE_PRIME: f64 = 1e-3;
/// Discriminator cost as a fraction of the smallest set weight.
pub const DEFAULT_DELTA_PRIME_FRACTION: f64 = 1e-3;

/// Weighted set cover over the universe `{1..n}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetCoverInstance {
    pub n: usize,
    pub sets: Vec<Vec<usize>>,
    pub weights: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<f64>,
}

impl SetCoverInstance {
    pub fn from_json_str(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.n < 2 {
            // a one-element universe leaves the discriminator a single symbol
            out.push(Violation::new(
                "n",
                Rule::AlphabetSize,
                format!("universe size {} below 2", self.n),
            ));
        }
        if self.weights.len() != self.sets.len() {
            out.push(Violation::new(
                "weights",
                Rule::Dimension,
                format!("{} weights for {} sets", self.weights.len(), self.sets.len()),
            ));
        }
        for (j, w) in self.weights.iter().enumerate() {
            if !(*w > 0.0 && w.is_finite()) {
                out.push(Violation::new(
                    format!("weights[{j}]"),
                    Rule::PositiveCost,
                    format!("weight {w} not positive"),
                ));
            }
        }
        let mut covered = vec![false; self.n + 1];
        for (j, s) in self.sets.iter().enumerate() {
            for &e in s {
                if e == 0 || e > self.n {
                    out.push(Violation::new(
                        format!("sets[{j}]"),
                        Rule::Dimension,
                        format!("element {e} outside 1..={}", self.n),
                    ));
                } else {
                    covered[e] = true;
                }
            }
        }
        let missing: Vec<usize> = (1..=self.n).filter(|&e| !covered[e]).collect();
        if !missing.is_empty() {
            out.push(Violation::new(
                "sets",
                Rule::UniverseCoverage,
                format!("elements {missing:?} not covered by any set"),
            ));
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(v))
        }
    }

    /// Whether the sets selected by `mask` cover the universe.
    pub fn covers(&self, mask: u64) -> bool {
        let mut covered = vec![false; self.n + 1];
        for (j, s) in self.sets.iter().enumerate() {
            if mask >> j & 1 == 1 {
                for &e in s {
                    covered[e] = true;
                }
            }
        }
        covered[1..].iter().all(|&c| c)
    }

    pub fn mask_weight(&self, mask: u64) -> f64 {
        (0..self.sets.len())
            .filter(|j| mask >> j & 1 == 1)
            .map(|j| self.weights[j])
            .sum()
    }

    /// Cheapest cover by exhaustive search, ties to the smallest mask.
    pub fn min_cover(&self) -> Result<(u64, f64)> {
        if self.sets.len() > 24 {
            return Err(Error::Budget {
                unit: "set subsets",
                required: 2f64.powi(self.sets.len() as i32),
                budget: 2f64.powi(24),
            });
        }
        (0..1u64 << self.sets.len())
            .filter(|&m| self.covers(m))
            .map(|m| (m, self.mask_weight(m)))
            .fold(None, |best: Option<(u64, f64)>, c| match best {
                Some(b) if b.1 <= c.1 => Some(b),
                _ => Some(c),
            })
            .ok_or_else(|| Error::Argument("sets do not cover the universe".into()))
    }
}

/// Draws a valid instance with `2..=max_n` elements and `1..=max_sets` sets.
pub fn random_set_cover(seed: u64, max_n: usize, max_sets: usize) -> SetCoverInstance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(2..=max_n.max(2));
    let k = rng.random_range(1..=max_sets.max(1));
    let mut sets: Vec<Vec<usize>> = (0..k)
        .map(|_| (1..=n).filter(|_| rng.random_bool(0.5)).collect())
        .collect();
    for e in 1..=n {
        if !sets.iter().any(|s| s.contains(&e)) {
            let j = rng.random_range(0..k);
            sets[j].push(e);
        }
    }
    for s in &mut sets {
        if s.is_empty() {
            s.push(rng.random_range(1..=n));
        }
        s.sort_unstable();
    }
    let weights = (0..k)
        .map(|_| (rng.random_range(1.0..3.0) * 100.0f64).round() / 100.0)
        .collect();
    SetCoverInstance {
        n,
        sets,
        weights,
        budget: None,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReductionParams {
    pub epsilon: f64,
    /// Discriminator cost; `None` uses a thousandth of the smallest weight.
    pub delta_prime: Option<f64>,
    pub delta_double_prime: f64,
    pub eta: f64,
}

impl ReductionParams {
    pub fn new(epsilon: f64) -> Self {
        Self {
            epsilon,
            delta_prime: None,
            delta_double_prime: DEFAULT_DELTA_DOUBLE_PRIME,
            eta: DEFAULT_ETA,
        }
    }

    pub fn delta_prime_for(&self, sc: &SetCoverInstance) -> f64 {
        self.delta_prime
            .unwrap_or_else(|| DEFAULT_DELTA_PRIME_FRACTION * sc.weights.iter().copied().fold(f64::INFINITY, f64::min))
    }
}

/// Name of the discriminator model in reduced instances.
pub const DISCRIMINATOR: &str = "discriminator";

/// Builds the reduced instance: labels `0..=n`, a discriminator model first,
/// then one binary model per set.
pub fn reduce(sc: &SetCoverInstance, params: &ReductionParams) -> Result<Instance> {
    sc.ensure_valid()?;
    let eps = params.epsilon;
    if !(eps > 0.0 && eps < 0.25) {
        return Err(Error::Argument(format!("epsilon must lie in (0, 1/4), got {eps}")));
    }
    let dp = params.delta_prime_for(sc);
    let ddp = params.delta_double_prime;
    let eta = params.eta;
    if !(dp > 0.0) || !(ddp > 0.0 && ddp < 1.0) {
        return Err(Error::Argument(
            "delta' and delta'' must be positive, delta'' below 1".into(),
        ));
    }
    let n = sc.n;
    if !(eta > 0.0 && (n as f64 - 1.0) * eta < 1.0 / n as f64) {
        return Err(Error::Argument(format!("eta {eta} out of range for n = {n}")));
    }

    let labels: Vec<String> = (0..=n).map(|i| i.to_string()).collect();
    let mut prior = vec![1.0 / (2.0 * n as f64); n + 1];
    prior[0] = 0.5;
    let mut tolerances = vec![2.0 * eps; n + 1];
    tolerances[0] = 1.0 - ddp;

    let symbols: Vec<String> = (1..=n).map(|i| i.to_string()).collect();
    let mut disc = vec![vec![1.0 / n as f64; n]];
    for i in 1..=n {
        disc.push(
            (1..=n)
                .map(|x| if x == i { 1.0 - (n as f64 - 1.0) * eta } else { eta })
                .collect(),
        );
    }
    let mut models = vec![ModelSpec::new(DISCRIMINATOR, symbols, disc, dp)];
    for (j, (set, &w)) in sc.sets.iter().zip(&sc.weights).enumerate() {
        let rows = (0..=n)
            .map(|y| {
                if y > 0 && set.contains(&y) {
                    vec![eps, 1.0 - eps]
                } else {
                    vec![0.5, 0.5]
                }
            })
            .collect();
        models.push(ModelSpec::new(
            format!("set{}", j + 1),
            vec!["0".into(), "1".into()],
            rows,
            w,
        ));
    }

    let mut meta = BTreeMap::new();
    meta.insert("reduction".into(), json!("set-cover"));
    meta.insert("epsilon".into(), json!(eps));
    meta.insert("delta_prime".into(), json!(dp));
    meta.insert("delta_double_prime".into(), json!(ddp));
    meta.insert("eta".into(), json!(eta));
    meta.insert(
        "discriminator_perturbation".into(),
        json!("zero cells of the discriminator raised to eta so every probability is positive"),
    );
    meta.insert("set_cover".into(), serde_json::to_value(sc)?);
    Instance::validated(labels, prior, tolerances, models).map(|i| i.with_metadata(meta))
}

/// Plan querying the discriminator once and each selected set once.
pub fn cover_plan(sc: &SetCoverInstance, mask: u64) -> QueryPlan {
    let mut counts = vec![1u32];
    counts.extend((0..sc.sets.len()).map(|j| (mask >> j & 1) as u32));
    QueryPlan::new(counts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanCheck {
    /// One-based indices of the selected sets.
    pub sets: Vec<usize>,
    pub covers: bool,
    pub feasible: bool,
    pub errors: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleQueryCheck {
    pub element: usize,
    pub set: usize,
    pub error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub epsilon: f64,
    pub delta_prime: f64,
    pub eta: f64,
    pub tie_policy: TiePolicy,
    pub plans: Vec<PlanCheck>,
    /// 0/1 plans where covering and feasibility disagree.
    pub mismatches: Vec<PlanCheck>,
    pub min_cover: Vec<usize>,
    pub min_cover_weight: f64,
    /// Cheapest feasible plan among the 0/1 plans with one discriminator query.
    pub reduction_class_opt: Option<f64>,
    /// Cheapest feasible plan with no restriction on counts.
    pub unrestricted_opt: OptResult,
    /// Error of label `i` when a single set containing `i` is queried.
    pub single_query: Vec<SingleQueryCheck>,
}

impl EquivalenceReport {
    pub fn equivalent(&self) -> bool {
        self.mismatches.is_empty()
    }

    /// Whether the unrestricted optimum equals `delta' + min cover` within `tol`.
    pub fn opt_matches_cover(&self, tol: f64) -> bool {
        (self.unrestricted_opt.cost - (self.delta_prime + self.min_cover_weight)).abs() <= tol
    }
}

fn selected(mask: u64, k: usize) -> Vec<usize> {
    (0..k).filter(|j| mask >> j & 1 == 1).map(|j| j + 1).collect()
}

pub fn verify_equivalence(
    sc: &SetCoverInstance,
    params: &ReductionParams,
    tie_policy: TiePolicy,
) -> Result<EquivalenceReport> {
    let inst = reduce(sc, params)?;
    let k = sc.sets.len();
    if k > 16 {
        return Err(Error::Budget {
            unit: "0/1 plans",
            required: 2f64.powi(k as i32),
            budget: 2f64.powi(16),
        });
    }
    let tol = inst.tolerances().to_vec();
    let mut plans = Vec::with_capacity(1 << k);
    let mut reduction_class_opt: Option<f64> = None;
    for mask in 0..1u64 << k {
        let plan = cover_plan(sc, mask);
        let errors = exact_errors(&inst, &plan, DEFAULT_PROFILE_BUDGET)?
            .for_policy(tie_policy)
            .to_vec();
        let feasible = errors.iter().zip(&tol).all(|(e, a)| *e <= a + PROB_SLACK);
        if feasible {
            let c = inst.plan_cost(&plan)?;
            reduction_class_opt = Some(reduction_class_opt.map_or(c, |b| b.min(c)));
        }
        plans.push(PlanCheck {
            sets: selected(mask, k),
            covers: sc.covers(mask),
            feasible,
            errors,
        });
    }
    let mismatches = plans.iter().filter(|p| p.covers != p.feasible).cloned().collect();

    let mut single_query = Vec::new();
    for (j, set) in sc.sets.iter().enumerate() {
        for &e in set {
            let plan = cover_plan(sc, 1 << j);
            let err = exact_errors(&inst, &plan, DEFAULT_PROFILE_BUDGET)?.for_policy(tie_policy)[e];
            single_query.push(SingleQueryCheck {
                element: e,
                set: j + 1,
                error: err,
            });
        }
    }

    let (mask, weight) = sc.min_cover()?;
    // every cover plan is a valid cap for the unrestricted search
    let cap = inst.plan_cost(&cover_plan(sc, (1 << k) - 1))? * (1.0 + 1e-12);
    let unrestricted_opt = exact_opt(
        &inst,
        Problem::True,
        &OptOptions {
            tie_policy,
            cost_cap: Some(cap),
            ..OptOptions::default()
        },
    )?;
    Ok(EquivalenceReport {
        epsilon: params.epsilon,
        delta_prime: params.delta_prime_for(sc),
        eta: params.eta,
        tie_policy,
        plans,
        mismatches,
        min_cover: selected(mask, k),
        min_cover_weight: weight,
        reduction_class_opt,
        unrestricted_opt,
        single_query,
    })
}
