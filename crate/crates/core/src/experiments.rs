//! Experiment drivers: surrogate tightness across tolerances, approximation
//! guarantee on random instances, and a greedy baseline.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::afptas::{derive_constants, run_afptas_with, GuaranteeStatus, SolveOptions};
use crate::chernoff::label_bound_unchecked;
use crate::error::{Error, Result};
use crate::exact::{exact_opt, OptOptions, Problem};
use crate::likelihood::TiePolicy;
use crate::model::{Instance, ModelSpec, QueryPlan};

/// Parameters of the random instance family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InstanceFamily {
    pub labels: usize,
    pub max_models: usize,
    pub min_alphabet: usize,
    pub max_alphabet: usize,
    pub alpha: f64,
    /// Draw a random prior instead of the uniform one.
    pub random_prior: bool,
}

impl Default for InstanceFamily {
    fn default() -> Self {
        Self {
            labels: 2,
            max_models: 3,
            min_alphabet: 2,
            max_alphabet: 3,
            alpha: 1e-3,
            random_prior: false,
        }
    }
}

/// Smallest probability kept after flooring a random row.
pub const ROW_FLOOR: f64 = 0.01;
const PRIOR_FLOOR: f64 = 0.1;

/// Symmetric Dirichlet(1) draw, floored and renormalized.
fn floored_simplex(rng: &mut impl Rng, k: usize, floor: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = raw.iter().sum();
    let floored: Vec<f64> = raw.iter().map(|x| (x / total).max(floor)).collect();
    let total: f64 = floored.iter().sum();
    floored.iter().map(|x| x / total).collect()
}

/// One member of the family. The number of labels is
/// `family.labels`; models, alphabets and costs are random.
pub fn random_instance(seed: u64, family: &InstanceFamily) -> Result<Instance> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let l = family.labels;
    let k = rng.random_range(1..=family.max_models.max(1));
    let prior = if family.random_prior {
        floored_simplex(&mut rng, l, PRIOR_FLOOR)
    } else {
        vec![1.0 / l as f64; l]
    };
    let models = (0..k)
        .map(|m| {
            let a = rng.random_range(family.min_alphabet..=family.max_alphabet);
            let rows = (0..l).map(|_| floored_simplex(&mut rng, a, ROW_FLOOR)).collect();
            let cost = rng.random_range(0.5f64.ln()..=2f64.ln()).exp();
            let alphabet = (0..a).map(|x| x.to_string()).collect();
            ModelSpec::new(format!("m{}", m + 1), alphabet, rows, cost)
        })
        .collect();
    let labels = (0..l).map(|y| format!("y{}", y + 1)).collect();
    Instance::validated(labels, prior, vec![family.alpha; l], models)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TightnessRow {
    pub alpha_min: f64,
    pub opt: f64,
    pub surrogate_opt: f64,
    pub ratio: f64,
    pub opt_plan: QueryPlan,
    pub surrogate_plan: QueryPlan,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TightnessTable {
    pub rows: Vec<TightnessRow>,
    /// False when some schedule point ran out of budget; `rows` then holds
    /// the points before it.
    pub complete: bool,
    pub failure: Option<String>,
}

pub const TIGHTNESS_HEADER: &str = "alpha_min,opt,surrogate_opt,ratio";

impl TightnessTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(TIGHTNESS_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("{},{},{},{}\n", r.alpha_min, r.opt, r.surrogate_opt, r.ratio));
        }
        out
    }

    /// Columns as parallel arrays, ready for plotting.
    pub fn series(&self) -> serde_json::Value {
        serde_json::json!({
            "alpha_min": self.rows.iter().map(|r| r.alpha_min).collect::<Vec<_>>(),
            "opt": self.rows.iter().map(|r| r.opt).collect::<Vec<_>>(),
            "surrogate_opt": self.rows.iter().map(|r| r.surrogate_opt).collect::<Vec<_>>(),
            "ratio": self.rows.iter().map(|r| r.ratio).collect::<Vec<_>>(),
        })
    }
}

/// Both optimal costs at each tolerance of a decreasing schedule.
pub fn tightness_sweep(
    instance: &Instance,
    alphas: &[f64],
    tie_policy: TiePolicy,
    options: &OptOptions,
) -> Result<TightnessTable> {
    let opts = OptOptions {
        tie_policy,
        ..options.clone()
    };
    let results: Vec<Result<TightnessRow>> = alphas
        .par_iter()
        .map(|&a| {
            let inst = instance.with_uniform_tolerance(a);
            let t = exact_opt(&inst, Problem::True, &opts)?;
            let s = exact_opt(&inst, Problem::Surrogate, &opts)?;
            Ok(TightnessRow {
                alpha_min: inst.alpha_min(),
                opt: t.cost,
                surrogate_opt: s.cost,
                ratio: s.cost / t.cost,
                opt_plan: t.plan,
                surrogate_plan: s.plan,
            })
        })
        .collect();
    let mut rows = Vec::new();
    for r in results {
        match r {
            Ok(row) => rows.push(row),
            Err(e @ (Error::Budget { .. } | Error::InfeasibleWithinCap { .. })) => {
                return Ok(TightnessTable {
                    rows,
                    complete: false,
                    failure: Some(e.to_string()),
                })
            }
            Err(e) => return Err(e),
        }
    }
    Ok(TightnessTable {
        rows,
        complete: true,
        failure: None,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GuaranteeRow {
    pub instance: usize,
    pub seed: u64,
    pub epsilon: f64,
    pub cost: f64,
    pub surrogate_opt: f64,
    pub ratio: f64,
    pub pass: bool,
    /// Returned plan passed the unrounded surrogate check.
    pub sound: bool,
    pub guarantee: GuaranteeStatus,
    pub below_padding_threshold: bool,
    pub plan: QueryPlan,
}

pub const GUARANTEE_HEADER: &str = "instance,seed,epsilon,cost,surrogate_opt,ratio,pass,sound,guarantee";

pub fn guarantee_csv(rows: &[GuaranteeRow]) -> String {
    let mut out = String::from(GUARANTEE_HEADER);
    out.push('\n');
    for r in rows {
        let g = match r.guarantee {
            GuaranteeStatus::Guaranteed => "guaranteed",
            GuaranteeStatus::HeuristicOnly => "heuristic-only",
        };
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{}\n",
            r.instance, r.seed, r.epsilon, r.cost, r.surrogate_opt, r.ratio, r.pass, r.sound, g
        ));
    }
    out
}

/// Runs the solver on `count` random instances, instance `i` drawn with seed
/// `seed + i`, and compares against the exact surrogate optimum.
pub fn guarantee_sweep(
    seed: u64,
    family: &InstanceFamily,
    count: usize,
    epsilons: &[f64],
    solve: &SolveOptions,
) -> Result<Vec<GuaranteeRow>> {
    let per_instance = |i: usize| -> Result<Vec<GuaranteeRow>> {
        let s = seed.wrapping_add(i as u64);
        let inst = random_instance(s, family)?;
        let opt = exact_opt(&inst, Problem::Surrogate, &OptOptions::default())?.cost;
        epsilons
            .iter()
            .map(|&eps| {
                let opts = SolveOptions {
                    known_surrogate_opt: Some(opt),
                    ..solve.clone()
                };
                let cert = run_afptas_with(&inst, eps, &opts)?;
                Ok(GuaranteeRow {
                    instance: i,
                    seed: s,
                    epsilon: eps,
                    cost: cert.cost,
                    surrogate_opt: opt,
                    ratio: cert.cost / opt,
                    pass: cert.cost <= (1.0 + eps) * opt + 1e-9 * (1.0 + opt),
                    sound: cert.feasible,
                    guarantee: cert.guarantee,
                    below_padding_threshold: cert.below_padding_threshold,
                    plan: cert.plan,
                })
            })
            .collect()
    };
    let nested: Vec<Result<Vec<GuaranteeRow>>> = (0..count).into_par_iter().map(per_instance).collect();
    let mut rows = Vec::new();
    for r in nested {
        rows.extend(r?);
    }
    Ok(rows)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreedyResult {
    pub plan: QueryPlan,
    pub cost: f64,
    /// False when the query-count limit was hit first.
    pub feasible: bool,
    pub limit: u32,
}

fn worst_ratio(instance: &Instance, counts: &[u32], tol: f64) -> f64 {
    (0..instance.num_labels())
        .map(|y| label_bound_unchecked(instance, counts, y, tol).value / instance.tolerances()[y])
        .fold(0.0, f64::max)
}

/// Adds one query at a time to the model with the largest drop in
/// `max_y surrogate(y) / alpha_y` per unit cost until the plan is surrogate
/// feasible or holds `N_max` queries. Ties go to the lower model index.
pub fn greedy_baseline(instance: &Instance, tol: f64) -> Result<GreedyResult> {
    instance.ensure_valid()?;
    let limit = derive_constants(instance, 1.0)?.n_max;
    let costs = instance.costs();
    let mut counts = vec![0u32; instance.num_models()];
    let mut current = worst_ratio(instance, &counts, tol);
    let mut total = 0u32;
    while current > 1.0 && total < limit {
        let mut best: Option<(f64, usize, f64)> = None;
        for m in 0..counts.len() {
            counts[m] += 1;
            let v = worst_ratio(instance, &counts, tol);
            counts[m] -= 1;
            let gain = (current - v) / costs[m];
            if best.is_none_or(|b| gain > b.0) {
                best = Some((gain, m, v));
            }
        }
        let (_, m, v) = best.expect("at least one model");
        counts[m] += 1;
        current = v;
        total += 1;
    }
    let plan = QueryPlan::new(counts);
    Ok(GreedyResult {
        cost: instance.plan_cost(&plan)?,
        feasible: current <= 1.0,
        plan,
        limit,
    })
}

/// Two symmetric binary models on two labels: a cheap one with affinity about
/// 1/2 and a strong one with affinity about 1/10 at unit cost. Greedy
/// prefers the cheap model, whose per-cost drop in the bound is larger, yet
/// three strong queries are cheaper than the nine cheap ones it needs.
pub fn greedy_trap_instance() -> Instance {
    let bin = |p: f64| vec![vec![p, 1.0 - p], vec![1.0 - p, p]];
    let ab = || vec!["0".to_string(), "1".to_string()];
    Instance::validated(
        vec!["a".into(), "b".into()],
        vec![0.5, 0.5],
        vec![2e-3, 2e-3],
        vec![
            ModelSpec::new("cheap", ab(), bin(0.067), 0.5),
            ModelSpec::new("strong", ab(), bin(0.0025), 1.0),
        ],
    )
    .expect("fixed instance is valid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chernoff::{is_surrogate_feasible, DEFAULT_TILT_TOL};
    use crate::model::fixtures::bsc;

    #[test]
    fn random_family_is_valid_and_deterministic() {
        let fam = InstanceFamily {
            labels: 3,
            random_prior: true,
            ..InstanceFamily::default()
        };
        for seed in 0..30 {
            let a = random_instance(seed, &fam).unwrap();
            assert_eq!(a, random_instance(seed, &fam).unwrap());
            for m in a.models() {
                assert!((0.5..=2.0).contains(&m.cost()));
                assert!((2..=3).contains(&m.alphabet_size()));
            }
        }
    }

    #[test]
    fn greedy_bsc() {
        let g = greedy_baseline(&bsc(), DEFAULT_TILT_TOL).unwrap();
        assert!(g.feasible);
        assert_eq!(g.plan, QueryPlan::new(vec![6]));
    }

    #[test]
    fn greedy_trap() {
        let inst = greedy_trap_instance();
        let g = greedy_baseline(&inst, DEFAULT_TILT_TOL).unwrap();
        let opt = exact_opt(&inst, Problem::Surrogate, &OptOptions::default()).unwrap();
        assert!(g.feasible);
        assert!(
            is_surrogate_feasible(&inst, &g.plan, DEFAULT_TILT_TOL)
                .unwrap()
                .feasible
        );
        assert_eq!(g.plan, QueryPlan::new(vec![9, 0]));
        assert_eq!(opt.plan, QueryPlan::new(vec![0, 3]));
        assert!(g.cost > opt.cost);
    }

    #[test]
    fn tightness_bsc() {
        let alphas = [0.1, 0.05, 0.01, 1e-3, 1e-4];
        let t = tightness_sweep(&bsc(), &alphas, TiePolicy::LowestIndex, &OptOptions::default()).unwrap();
        assert!(t.complete);
        let opts: Vec<f64> = t.rows.iter().map(|r| r.opt).collect();
        let sur: Vec<f64> = t.rows.iter().map(|r| r.surrogate_opt).collect();
        assert_eq!(opts, vec![1.0, 3.0, 5.0, 9.0, 13.0]);
        assert_eq!(sur, vec![5.0, 6.0, 10.0, 14.0, 19.0]);
        assert!(t.to_csv().starts_with("alpha_min,opt,surrogate_opt,ratio\n"));
        let again = tightness_sweep(&bsc(), &alphas, TiePolicy::LowestIndex, &OptOptions::default()).unwrap();
        assert_eq!(t, again);
    }
}
