//! Exact statewise errors by enumerating per-model count profiles, and
//! brute-force optimal costs for the true and surrogate problems.
//!
//! A profile fixes the symbol counts of every model. Its probability under
//! label `y` is `prod_m multinomial(r_m; n_m) prod_x p_m(x|y)^(n_m(x))` and
//! the MAP decision depends on the profile only, so summing over profiles
//! gives the exact error without touching raw sequences.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashSet};

use serde::{Deserialize, Serialize};

use crate::afptas::constants::uniform_design_count;
use crate::chernoff::{surrogate_feasible_fast, DEFAULT_TILT_TOL};
use crate::error::{Error, Result};
use crate::likelihood::{at_least, decide, TiePolicy};
use crate::model::{Instance, QueryPlan};

pub const DEFAULT_PROFILE_BUDGET: f64 = 1e7;
pub const DEFAULT_PLAN_BUDGET: usize = 1_000_000;

/// Absolute slack when comparing an exact probability with its tolerance.
pub const PROB_SLACK: f64 = 1e-12;

/// Compensated (Neumaier) summation.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct StableSum {
    sum: f64,
    comp: f64,
}

impl StableSum {
    #[inline]
    pub fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

fn binomial(n: u64, k: u64) -> f64 {
    let k = k.min(n - k);
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Number of count profiles a plan induces.
pub fn profile_count(instance: &Instance, plan: &QueryPlan) -> f64 {
    instance
        .models()
        .iter()
        .zip(plan.counts())
        .map(|(m, &r)| binomial(r as u64 + m.alphabet_size() as u64 - 1, m.alphabet_size() as u64 - 1))
        .product()
}

/// One model's contribution for one count vector.
struct Composition {
    log_coef: f64,
    /// `sum_x n(x) log p(x|y)` per label.
    loglik: Vec<f64>,
}

fn ln_factorials(n: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(0.0);
    let mut acc = 0.0;
    for i in 1..=n {
        acc += (i as f64).ln();
        out.push(acc);
    }
    out
}

fn compositions(instance: &Instance, m: usize, r: u32, lnf: &[f64]) -> Vec<Composition> {
    let model = instance.model(m);
    let k = model.alphabet_size();
    let l = instance.num_labels();
    let mut out = Vec::new();
    let mut counts = vec![0u32; k];
    #[allow(clippy::too_many_arguments)]
    fn rec(
        pos: usize,
        left: u32,
        counts: &mut [u32],
        out: &mut Vec<Composition>,
        model: &crate::model::ModelSpec,
        l: usize,
        lnf: &[f64],
        r: u32,
    ) {
        let k = counts.len();
        if pos + 1 == k {
            counts[pos] = left;
            let log_coef = lnf[r as usize] - counts.iter().map(|&c| lnf[c as usize]).sum::<f64>();
            let loglik = (0..l)
                .map(|y| {
                    model
                        .log_row(y)
                        .iter()
                        .zip(counts.iter())
                        .filter(|(_, &c)| c > 0)
                        .map(|(lp, &c)| c as f64 * lp)
                        .sum()
                })
                .collect();
            out.push(Composition { log_coef, loglik });
            return;
        }
        for c in (0..=left).rev() {
            counts[pos] = c;
            rec(pos + 1, left - c, counts, out, model, l, lnf, r);
        }
    }
    rec(0, r, &mut counts, &mut out, model, l, lnf, r);
    debug_assert_eq!(out.len() as f64, binomial(r as u64 + k as u64 - 1, k as u64 - 1));
    out
}

/// Calls `visit(log_coef, scores)` for every profile, where `scores[y]` is
/// the unnormalized log posterior of `y` and `log_coef + scores[y] -
/// log pi(y)` is the profile's log probability under `y`.
fn for_each_profile(
    instance: &Instance,
    plan: &QueryPlan,
    budget: f64,
    mut visit: impl FnMut(f64, &[f64]),
) -> Result<u64> {
    instance.check_plan(plan)?;
    let required = profile_count(instance, plan);
    if required > budget {
        return Err(Error::Budget {
            unit: "profiles",
            required,
            budget,
        });
    }
    let max_r = plan.counts().iter().copied().max().unwrap_or(0) as usize;
    let lnf = ln_factorials(max_r);
    let lists: Vec<Vec<Composition>> = plan
        .counts()
        .iter()
        .enumerate()
        .filter(|(_, &r)| r > 0)
        .map(|(m, &r)| compositions(instance, m, r, &lnf))
        .collect();
    let l = instance.num_labels();
    // stack[d] holds the partial sums after the first d active models
    let mut coef = vec![0.0; lists.len() + 1];
    let mut scores = vec![instance.log_prior().to_vec(); lists.len() + 1];
    let mut idx = vec![0usize; lists.len()];
    let mut visited = 0u64;
    if lists.is_empty() {
        visit(0.0, &scores[0]);
        return Ok(1);
    }
    let mut depth = 0;
    loop {
        if idx[depth] < lists[depth].len() {
            let c = &lists[depth][idx[depth]];
            coef[depth + 1] = coef[depth] + c.log_coef;
            let (head, tail) = scores.split_at_mut(depth + 1);
            for y in 0..l {
                tail[0][y] = head[depth][y] + c.loglik[y];
            }
            if depth + 1 == lists.len() {
                visit(coef[depth + 1], &scores[depth + 1]);
                visited += 1;
                idx[depth] += 1;
            } else {
                depth += 1;
                idx[depth] = 0;
            }
        } else {
            if depth == 0 {
                break;
            }
            depth -= 1;
            idx[depth] += 1;
        }
    }
    Ok(visited)
}

/// Exact statewise errors under both tie policies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactErrorResult {
    pub labels: Vec<String>,
    pub lowest_index: Vec<f64>,
    pub count_tie_as_error: Vec<f64>,
    pub profiles: u64,
}

impl ExactErrorResult {
    pub fn for_policy(&self, policy: TiePolicy) -> &[f64] {
        match policy {
            TiePolicy::LowestIndex => &self.lowest_index,
            TiePolicy::CountTieAsError => &self.count_tie_as_error,
        }
    }
}

/// `P_e(y; r)` for every label and both tie policies in one enumeration.
pub fn exact_errors(instance: &Instance, plan: &QueryPlan, budget: f64) -> Result<ExactErrorResult> {
    let l = instance.num_labels();
    let lp = instance.log_prior();
    let mut low = vec![StableSum::default(); l];
    let mut tie = vec![StableSum::default(); l];
    let profiles = for_each_profile(instance, plan, budget, |coef, scores| {
        let d_low = decide(scores, TiePolicy::LowestIndex);
        let d_tie = decide(scores, TiePolicy::CountTieAsError);
        for y in 0..l {
            let e_low = d_low.is_error(y);
            let e_tie = d_tie.is_error(y);
            if e_low || e_tie {
                let p = (coef + scores[y] - lp[y]).exp();
                if e_low {
                    low[y].add(p);
                }
                if e_tie {
                    tie[y].add(p);
                }
            }
        }
    })?;
    let clamp = |v: Vec<StableSum>| v.iter().map(|s| s.value().clamp(0.0, 1.0)).collect();
    Ok(ExactErrorResult {
        labels: instance.labels().to_vec(),
        lowest_index: clamp(low),
        count_tie_as_error: clamp(tie),
        profiles,
    })
}

/// `P_e(y; r)` under one tie policy.
pub fn exact_error(instance: &Instance, plan: &QueryPlan, y: usize, policy: TiePolicy) -> Result<f64> {
    instance.check_label(y)?;
    Ok(exact_errors(instance, plan, DEFAULT_PROFILE_BUDGET)?.for_policy(policy)[y])
}

/// `Pr(Delta_{y,y'} >= 0 | Y = y)` for every ordered pair, as an `L x L`
/// matrix with zeros on the diagonal.
pub fn exact_pairwise_all(instance: &Instance, plan: &QueryPlan, budget: f64) -> Result<Vec<Vec<f64>>> {
    let l = instance.num_labels();
    let lp = instance.log_prior();
    let mut acc = vec![vec![StableSum::default(); l]; l];
    for_each_profile(instance, plan, budget, |coef, scores| {
        for y in 0..l {
            let mut p = None;
            for y2 in 0..l {
                if y2 != y && at_least(scores[y2], scores[y]) {
                    let pv = *p.get_or_insert_with(|| (coef + scores[y] - lp[y]).exp());
                    acc[y][y2].add(pv);
                }
            }
        }
    })?;
    Ok(acc
        .iter()
        .map(|row| row.iter().map(|s| s.value().clamp(0.0, 1.0)).collect())
        .collect())
}

pub fn exact_pairwise(instance: &Instance, plan: &QueryPlan, y: usize, y2: usize) -> Result<f64> {
    instance.check_label(y)?;
    instance.check_label(y2)?;
    if y == y2 {
        return Err(Error::Argument("pairwise probability needs distinct labels".into()));
    }
    Ok(exact_pairwise_all(instance, plan, DEFAULT_PROFILE_BUDGET)?[y][y2])
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Problem {
    True,
    Surrogate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptResult {
    pub problem: Problem,
    pub cost: f64,
    pub plan: QueryPlan,
    pub plans_enumerated: usize,
    pub cost_cap: f64,
}

#[derive(Clone, Debug)]
pub struct OptOptions {
    pub tie_policy: TiePolicy,
    /// `None` uses `c_sum * n_unif`.
    pub cost_cap: Option<f64>,
    pub plan_budget: usize,
    pub profile_budget: f64,
    pub tilt_tol: f64,
}

impl Default for OptOptions {
    fn default() -> Self {
        Self {
            tie_policy: TiePolicy::LowestIndex,
            cost_cap: None,
            plan_budget: DEFAULT_PLAN_BUDGET,
            profile_budget: DEFAULT_PROFILE_BUDGET,
            tilt_tol: DEFAULT_TILT_TOL,
        }
    }
}

/// Cost of the uniform design that is guaranteed surrogate-feasible; every
/// optimal plan of either problem costs at most this much.
pub fn default_cost_cap(instance: &Instance) -> f64 {
    instance.cost_sum() * uniform_design_count(instance) as f64
}

#[derive(Clone, Debug, PartialEq)]
struct Frontier {
    cost: f64,
    plan: QueryPlan,
}

impl Eq for Frontier {}

impl Ord for Frontier {
    // min-heap on (cost, plan)
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.plan.cmp(&self.plan))
    }
}

impl PartialOrd for Frontier {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Visits plans with cost `<= cap` in nondecreasing cost, ties broken by
/// lexicographic order of the counts, until `accept` returns true.
pub(crate) fn best_first_search(
    instance: &Instance,
    cap: f64,
    budget: usize,
    mut accept: impl FnMut(&QueryPlan) -> Result<bool>,
) -> Result<Option<(QueryPlan, f64, usize)>> {
    let k = instance.num_models();
    let costs = instance.costs();
    let cost_of = |p: &QueryPlan| -> f64 { p.counts().iter().zip(&costs).map(|(&r, c)| r as f64 * c).sum() };
    let mut heap = BinaryHeap::new();
    let mut seen = HashSet::new();
    let zero = QueryPlan::zeros(k);
    seen.insert(zero.clone());
    heap.push(Frontier { cost: 0.0, plan: zero });
    let mut visited = 0usize;
    while let Some(Frontier { cost, plan }) = heap.pop() {
        visited += 1;
        if visited > budget {
            return Err(Error::Budget {
                unit: "plans",
                required: visited as f64,
                budget: budget as f64,
            });
        }
        if accept(&plan)? {
            return Ok(Some((plan, cost, visited)));
        }
        for m in 0..k {
            let next = plan.incremented(m);
            let c = cost_of(&next);
            if c <= cap && seen.insert(next.clone()) {
                heap.push(Frontier { cost: c, plan: next });
            }
        }
    }
    Ok(None)
}

/// Brute-force `OPT(alpha)` (true problem) or surrogate `OPT(alpha)`.
pub fn exact_opt(instance: &Instance, problem: Problem, options: &OptOptions) -> Result<OptResult> {
    instance.ensure_valid()?;
    let cap = options
        .cost_cap
        .unwrap_or_else(|| default_cost_cap(instance) * (1.0 + 1e-12));
    let tol = instance.tolerances().to_vec();
    let found = best_first_search(instance, cap, options.plan_budget, |plan| match problem {
        Problem::Surrogate => Ok(surrogate_feasible_fast(instance, plan.counts(), options.tilt_tol)),
        Problem::True => {
            let e = exact_errors(instance, plan, options.profile_budget)?;
            Ok(e.for_policy(options.tie_policy)
                .iter()
                .zip(&tol)
                .all(|(p, a)| *p <= a + PROB_SLACK))
        }
    })?;
    match found {
        Some((plan, cost, n)) => Ok(OptResult {
            problem,
            cost,
            plan,
            plans_enumerated: n,
            cost_cap: cap,
        }),
        None => Err(Error::InfeasibleWithinCap { cap }),
    }
}
