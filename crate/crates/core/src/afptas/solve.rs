//! End-to-end solver: derived constants, grid, rounding, recursion, scan,
//! backtracking, then exact re-verification of the returned plan.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::constants::{derive_constants, DerivedConstants};
use super::dp::{
    backtrack, round_weight, round_weights, scan_feasible, DpProblem, FeasibilityCheck, DEFAULT_MEMORY_BUDGET,
};
use super::grid::{LazyAxis, TiltGrid};
use crate::chernoff::{is_surrogate_feasible, log_affinity_unchecked, SurrogateReport, DEFAULT_TILT_TOL};
use crate::error::{Error, Result};
use crate::exact::{exact_opt, OptOptions, Problem};
use crate::model::{Instance, QueryPlan, SCHEMA_VERSION};

/// How the grid-and-recursion optimum is computed.
///
/// `GridDense` and `GridSparse` run the recursion at every grid point.
/// `PairSeparable` returns a plan of the same cost without materializing the
/// grid: each label's rounded bound at a grid point is a sum of per-pair
/// terms, so a plan is feasible at some grid point exactly when it is
/// feasible with every pair's tilt chosen independently. Plans are then
/// searched in nondecreasing cost.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Strategy {
    #[default]
    Auto,
    GridDense,
    GridSparse,
    PairSeparable,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GuaranteeStatus {
    Guaranteed,
    HeuristicOnly,
}

#[derive(Clone, Debug)]
pub struct SolveOptions {
    pub strategy: Strategy,
    /// Cap on DP entries per grid point.
    pub memory_budget: usize,
    /// Cap on grid points for the grid strategies.
    pub grid_budget: f64,
    /// `Auto` picks the dense grid strategy when grid points times states
    /// stays below this.
    pub auto_work_budget: f64,
    /// Cap on plans visited by the pair-separable search.
    pub plan_budget: usize,
    pub tilt_tol: f64,
    /// Compare against the exact surrogate optimum when it is affordable.
    pub oracle_check: bool,
    pub oracle_plan_budget: usize,
    /// Exact surrogate optimum computed elsewhere; skips the oracle run.
    pub known_surrogate_opt: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            strategy: Strategy::Auto,
            memory_budget: DEFAULT_MEMORY_BUDGET,
            grid_budget: 1e7,
            auto_work_budget: 5e7,
            plan_budget: 5_000_000,
            tilt_tol: DEFAULT_TILT_TOL,
            oracle_check: true,
            oracle_plan_budget: 200_000,
            known_surrogate_opt: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveCertificate {
    pub schema_version: u32,
    pub epsilon: f64,
    pub plan: QueryPlan,
    pub cost: f64,
    /// Ordered label pairs indexing the coordinates of `grid_point`.
    pub pairs: Vec<(String, String)>,
    pub grid_point: Vec<f64>,
    /// Unrounded surrogate of the returned plan.
    pub surrogate: SurrogateReport,
    pub feasible: bool,
    pub guarantee: GuaranteeStatus,
    pub reason: String,
    pub alpha_min: f64,
    pub below_padding_threshold: bool,
    pub surrogate_opt: Option<f64>,
    pub strategy: Strategy,
    pub constants: DerivedConstants,
}

#[derive(Clone, Debug)]
struct Candidate {
    plan: QueryPlan,
    cost: f64,
    grid_point: Vec<f64>,
}

fn resolve(instance: &Instance, c: &DerivedConstants, opts: &SolveOptions) -> Result<Strategy> {
    if opts.strategy != Strategy::Auto {
        return Ok(opts.strategy);
    }
    let p = instance.pairs().len() as i32;
    let grid = (LazyAxis::new(c.h)?.len() as f64).powi(p);
    let states = (c.t_max as f64 + 1.0).powi(p);
    Ok(
        if grid * states <= opts.auto_work_budget && states <= opts.memory_budget as f64 {
            Strategy::GridDense
        } else {
            Strategy::PairSeparable
        },
    )
}

fn solve_grid(
    instance: &Instance,
    c: &DerivedConstants,
    sparse: bool,
    opts: &SolveOptions,
) -> Result<Option<Candidate>> {
    let grid = TiltGrid::with_mesh(c.h, instance.pairs().len(), opts.grid_budget)?;
    let per_point = |i: usize| -> Result<Option<(f64, usize, QueryPlan)>> {
        let s = grid.point(i);
        let rw = round_weights(instance, c, &s)?;
        let check = FeasibilityCheck::new(instance, c.delta_round, &s)?;
        let problem = DpProblem::from_instance(instance, &rw, c.t_max)?;
        let table = if sparse {
            let targets = check.minimal_states(c.t_max, opts.memory_budget)?;
            if targets.is_empty() {
                return Ok(None);
            }
            problem.solve_sparse(&targets, opts.memory_budget)?
        } else {
            problem.solve_dense(opts.memory_budget)?
        };
        let Some((t, _)) = scan_feasible(&check, &table) else {
            return Ok(None);
        };
        let plan = backtrack(&table, &t)?;
        Ok(Some((instance.plan_cost(&plan)?, i, plan)))
    };
    let results: Vec<Result<Option<(f64, usize, QueryPlan)>>> =
        (0..grid.len()).into_par_iter().map(per_point).collect();
    let mut best: Option<(f64, usize, QueryPlan)> = None;
    for r in results {
        if let Some(cand) = r? {
            // results arrive in grid order, so strict improvement keeps the
            // lexicographically smallest grid point among equal costs
            if best.as_ref().is_none_or(|b| cand.0 < b.0) {
                best = Some(cand);
            }
        }
    }
    Ok(best.map(|(cost, i, plan)| Candidate {
        plan,
        cost,
        grid_point: grid.point(i),
    }))
}

struct Separable<'a> {
    instance: &'a Instance,
    axis: LazyAxis,
    /// Ordered label pairs with the log prior ratio of each.
    pairs: Vec<(usize, usize, f64)>,
    /// `[p][j][m]` weights, flattened, when the table is small enough to keep.
    table: Option<Vec<f64>>,
    models: usize,
    /// `[p][m]` axis index maximizing each weight.
    peaks: Vec<usize>,
    blocks: usize,
    alpha: &'a [f64],
    delta: f64,
    t_max: u64,
}

/// Margin absorbing floating-point noise in the convexity-based pruning.
const PRUNE_MARGIN: f64 = 1e-9;

/// Largest weight table kept in memory (entries of eight bytes).
const WEIGHT_TABLE_LIMIT: f64 = (1u64 << 25) as f64;

impl<'a> Separable<'a> {
    fn new(instance: &'a Instance, c: &DerivedConstants) -> Result<Self> {
        let lp = instance.log_prior();
        let pairs = instance
            .pairs()
            .into_iter()
            .map(|(y, y2)| (y, y2, lp[y2] - lp[y]))
            .collect::<Vec<_>>();
        let axis = LazyAxis::new(c.h)?;
        let k = instance.num_models();
        let entries = pairs.len() as f64 * axis.len() as f64 * k as f64;
        let table = (entries <= WEIGHT_TABLE_LIMIT).then(|| {
            let mut t = vec![0.0; entries as usize];
            t.par_chunks_mut(axis.len() * k)
                .zip(&pairs)
                .for_each(|(chunk, &(y, y2, _))| {
                    for (j, row) in chunk.chunks_mut(k).enumerate() {
                        let s = axis.point(j);
                        for (m, v) in row.iter_mut().enumerate() {
                            *v = -log_affinity_unchecked(instance, m, y, y2, s);
                        }
                    }
                });
            t
        });
        let mut sep = Self {
            instance,
            axis,
            pairs,
            table,
            models: k,
            peaks: Vec::new(),
            blocks: instance.num_labels() - 1,
            alpha: instance.tolerances(),
            delta: c.delta_round,
            t_max: c.t_max,
        };
        sep.peaks = (0..sep.pairs.len())
            .flat_map(|p| (0..k).map(move |m| (p, m)))
            .map(|(p, m)| sep.weight_peak(p, m))
            .collect();
        Ok(sep)
    }

    fn log_coef(&self, p: usize, s: f64) -> f64 {
        if s == 0.0 {
            0.0
        } else {
            s * self.pairs[p].2
        }
    }

    fn weight(&self, p: usize, j: usize, m: usize, s: f64) -> f64 {
        match &self.table {
            Some(t) => t[(p * self.axis.len() + j) * self.models + m],
            None => {
                let (y, y2, _) = self.pairs[p];
                -log_affinity_unchecked(self.instance, m, y, y2, s)
            }
        }
    }

    fn lower(&self, p: usize, j: usize, r: &[u32]) -> f64 {
        let s = self.axis.point(j);
        let w: f64 = r
            .iter()
            .enumerate()
            .filter(|&(_, &n)| n > 0)
            .map(|(m, &n)| self.weight(p, j, m, s) * n as f64)
            .sum();
        self.log_coef(p, s) - w
    }

    fn rounded(&self, p: usize, j: usize, r: &[u32]) -> f64 {
        let s = self.axis.point(j);
        let t = r
            .iter()
            .enumerate()
            .filter(|&(_, &n)| n > 0)
            .fold(0u64, |acc, (m, &n)| {
                acc.saturating_add(round_weight(self.weight(p, j, m, s), self.delta).saturating_mul(n as u64))
            })
            .min(self.t_max);
        self.log_coef(p, s) - self.delta * t as f64
    }

    /// Grid index minimizing the unrounded log proxy, which is convex in `s`.
    fn lower_argmin(&self, p: usize, r: &[u32]) -> usize {
        let (mut lo, mut hi) = (0usize, self.axis.len() - 1);
        while hi - lo > 2 {
            let m1 = lo + (hi - lo) / 3;
            let m2 = hi - (hi - lo) / 3;
            if self.lower(p, m1, r) <= self.lower(p, m2, r) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        (lo..=hi)
            .min_by(|&a, &b| self.lower(p, a, r).total_cmp(&self.lower(p, b, r)))
            .unwrap()
    }

    /// Axis index of the peak of the concave weight of model `m` on pair `p`.
    fn weight_peak(&self, p: usize, m: usize) -> usize {
        let w = |j: usize| self.weight(p, j, m, self.axis.point(j));
        let (mut lo, mut hi) = (0usize, self.axis.len() - 1);
        while hi - lo > 2 {
            let m1 = lo + (hi - lo) / 3;
            let m2 = hi - (hi - lo) / 3;
            if w(m1) >= w(m2) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        (lo..=hi).max_by(|&a, &b| w(a).total_cmp(&w(b))).unwrap()
    }

    /// Lower bound on the rounded term over indices `a..=b`.
    fn interval_bound(&self, p: usize, r: &[u32], a: usize, b: usize, argmin: usize) -> f64 {
        let coef = self
            .log_coef(p, self.axis.point(a))
            .min(self.log_coef(p, self.axis.point(b)));
        let mut t = 0u64;
        for (m, &n) in r.iter().enumerate().filter(|&(_, &n)| n > 0) {
            let peak = self.peaks[p * self.models + m].clamp(a, b);
            // a few neighbours guard against a slightly misplaced peak
            let w = (peak.saturating_sub(2).max(a)..=(peak + 2).min(b))
                .map(|j| self.weight(p, j, m, self.axis.point(j)))
                .fold(0.0, f64::max);
            t = t.saturating_add(round_weight(w * (1.0 + PRUNE_MARGIN), self.delta).saturating_mul(n as u64));
        }
        let from_rounding = coef - self.delta * t.min(self.t_max) as f64;
        let closest = argmin.clamp(a, b);
        let convex = self.lower(p, closest, r);
        from_rounding.max(convex - PRUNE_MARGIN * (1.0 + convex.abs()))
    }

    /// Smallest rounded log term over the axis and the first index attaining it.
    fn best_rounded(&self, p: usize, r: &[u32], start: usize) -> (f64, usize) {
        let mut best = (self.rounded(p, start, r), start);
        let mut stack = vec![(0, self.axis.len() - 1)];
        while let Some((a, b)) = stack.pop() {
            if b - a < 8 {
                for j in a..=b {
                    let v = self.rounded(p, j, r);
                    if v < best.0 || (v == best.0 && j < best.1) {
                        best = (v, j);
                    }
                }
                continue;
            }
            let bound = self.interval_bound(p, r, a, b, start);
            if bound > best.0 || (bound == best.0 && a > best.1) {
                continue;
            }
            let mid = a + (b - a) / 2;
            // nearer half first tightens the incumbent sooner
            if start <= mid {
                stack.push((mid + 1, b));
                stack.push((a, mid));
            } else {
                stack.push((a, mid));
                stack.push((mid + 1, b));
            }
        }
        best
    }

    /// Feasibility at the best grid point for `r`, and that point.
    fn evaluate(&self, r: &[u32]) -> Option<Vec<usize>> {
        let mut starts = Vec::with_capacity(self.pairs.len());
        // cheap screen: the unrounded bound never exceeds the rounded one
        for (y, &alpha) in self.alpha.iter().enumerate() {
            let mut total = 0.0;
            for p in y * self.blocks..(y + 1) * self.blocks {
                let j = self.lower_argmin(p, r);
                total += self.lower(p, j, r).exp();
                starts.push(j);
            }
            if total > alpha * (1.0 + PRUNE_MARGIN) {
                return None;
            }
        }
        let mut choice = Vec::with_capacity(self.pairs.len());
        for (y, &alpha) in self.alpha.iter().enumerate() {
            let mut total = 0.0;
            for p in y * self.blocks..(y + 1) * self.blocks {
                let (v, j) = self.best_rounded(p, r, starts[p]);
                total += v.exp();
                choice.push(j);
            }
            if total > alpha {
                return None;
            }
        }
        Some(choice)
    }
}

/// Minimum of `(cost, lexicographic plan)` over feasible plans when
/// feasibility is monotone in every count. For each prefix only the smallest
/// feasible last count can be optimal, and that count never grows as the
/// second-to-last count grows, so it is tracked by walking down.
struct Staircase<F> {
    costs: Vec<f64>,
    budget: usize,
    evaluations: usize,
    test: F,
    best: Option<(f64, Vec<u32>, Vec<usize>)>,
}

impl<F: FnMut(&[u32]) -> Option<Vec<usize>>> Staircase<F> {
    fn new(instance: &Instance, budget: usize, test: F) -> Self {
        Self {
            costs: instance.costs(),
            budget,
            evaluations: 0,
            test,
            best: None,
        }
    }

    fn cost(&self, r: &[u32]) -> f64 {
        r.iter().zip(&self.costs).map(|(&n, c)| n as f64 * c).sum()
    }

    fn feasible(&mut self, r: &[u32]) -> Result<Option<Vec<usize>>> {
        self.evaluations += 1;
        if self.evaluations > self.budget {
            return Err(Error::Budget {
                unit: "plans",
                required: self.evaluations as f64,
                budget: self.budget as f64,
            });
        }
        Ok((self.test)(r))
    }

    fn bound(&self, cap: f64) -> f64 {
        self.best.as_ref().map_or(cap, |b| b.0)
    }

    fn offer(&mut self, r: &[u32], witness: Vec<usize>, cap: f64) {
        let c = self.cost(r);
        let improves = match &self.best {
            Some(b) => c < b.0,
            None => c <= cap,
        };
        if improves {
            self.best = Some((c, r.to_vec(), witness));
        }
    }

    /// Largest last count whose plan may still fit under the bound.
    fn last_limit(&self, r: &[u32], cap: f64) -> u32 {
        let k = r.len();
        let rest = self.bound(cap) - self.cost(&r[..k - 1]);
        if rest < 0.0 {
            return 0;
        }
        ((rest / self.costs[k - 1]) * (1.0 + 1e-12) + 1e-9)
            .floor()
            .min(u32::MAX as f64 / 2.0) as u32
    }

    /// Smallest last count in `0..=limit` that is feasible.
    fn smallest_last(&mut self, r: &mut [u32], limit: u32) -> Result<Option<(u32, Vec<usize>)>> {
        let k = r.len();
        r[k - 1] = limit;
        let Some(mut witness) = self.feasible(r)? else {
            return Ok(None);
        };
        let (mut lo, mut hi) = (None, limit);
        let mut step = 1u32;
        // exponential probe from zero keeps the cost logarithmic in the answer
        let mut probe = 0u32;
        while probe < hi {
            r[k - 1] = probe;
            match self.feasible(r)? {
                Some(w) => {
                    hi = probe;
                    witness = w;
                    break;
                }
                None => lo = Some(probe),
            }
            probe = probe.saturating_add(step).min(hi);
            step = step.saturating_mul(2);
        }
        while let Some(l) = lo.filter(|&l| hi - l > 1) {
            let mid = l + (hi - l) / 2;
            r[k - 1] = mid;
            match self.feasible(r)? {
                Some(w) => {
                    hi = mid;
                    witness = w;
                }
                None => lo = Some(mid),
            }
        }
        Ok(Some((hi, witness)))
    }

    fn run(&mut self, cap: f64) -> Result<Option<(Vec<u32>, Vec<usize>)>> {
        let k = self.costs.len();
        let mut r = vec![0u32; k];
        self.outer(&mut r, 0, cap)?;
        Ok(self.best.take().map(|(_, plan, witness)| (plan, witness)))
    }

    fn outer(&mut self, r: &mut Vec<u32>, depth: usize, cap: f64) -> Result<()> {
        let k = r.len();
        if depth + 2 >= k {
            return self.inner(r, cap);
        }
        r[depth] = 0;
        while self.cost(&r[..=depth]) <= self.bound(cap) {
            for v in &mut r[depth + 1..] {
                *v = 0;
            }
            self.outer(r, depth + 1, cap)?;
            r[depth] += 1;
        }
        r[depth] = 0;
        Ok(())
    }

    /// Walks the last two coordinates, or the only one when there is one model.
    fn inner(&mut self, r: &mut [u32], cap: f64) -> Result<()> {
        let k = r.len();
        if k == 1 {
            let limit = self.last_limit(r, cap);
            if let Some((v, w)) = self.smallest_last(r, limit)? {
                r[0] = v;
                self.offer(r, w, cap);
            }
            r[0] = 0;
            return Ok(());
        }
        let a = k - 2;
        let mut current: Option<(u32, Vec<usize>)> = None;
        r[a] = 0;
        r[k - 1] = 0;
        while self.cost(&r[..=a]) <= self.bound(cap) {
            let limit = self.last_limit(r, cap);
            current = match current.take() {
                Some((mut v, mut w)) => {
                    while v > 0 {
                        r[k - 1] = v - 1;
                        match self.feasible(r)? {
                            Some(next) => {
                                v -= 1;
                                w = next;
                            }
                            None => break,
                        }
                    }
                    Some((v, w))
                }
                None => self.smallest_last(r, limit)?,
            };
            if let Some((v, w)) = &current {
                if *v <= limit {
                    r[k - 1] = *v;
                    self.offer(r, w.clone(), cap);
                }
            }
            r[a] += 1;
        }
        r[a] = 0;
        r[k - 1] = 0;
        Ok(())
    }
}

fn solve_separable(instance: &Instance, c: &DerivedConstants, opts: &SolveOptions) -> Result<Option<Candidate>> {
    let sep = Separable::new(instance, c)?;
    let k = instance.num_models();
    // incumbent from the uniform designs bounds the search
    // rounded weights are nonnegative, so feasibility is monotone in n
    let limit = c.n_max.max(c.n_unif).saturating_mul(64);
    let feasible = |n: u32| sep.evaluate(&vec![n; k]).is_some();
    let mut hi = 1;
    while hi < limit && !feasible(hi) {
        hi = (hi * 2).min(limit);
    }
    if !feasible(hi) {
        return Ok(None);
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = lo + (hi - lo) / 2;
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let n = hi;
    let cap = instance.plan_cost(&QueryPlan::uniform(k, n))? * (1.0 + 1e-12);
    let mut search = Staircase::new(instance, opts.plan_budget, |r: &[u32]| sep.evaluate(r));
    let found = search.run(cap)?;
    Ok(found.map(|(counts, witness)| {
        let plan = QueryPlan::new(counts);
        Candidate {
            cost: instance.plan_cost(&plan).expect("plan length matches"),
            plan,
            grid_point: witness.iter().map(|&j| sep.axis.point(j)).collect(),
        }
    }))
}

pub fn run_afptas(instance: &Instance, epsilon: f64) -> Result<SolveCertificate> {
    run_afptas_with(instance, epsilon, &SolveOptions::default())
}

pub fn run_afptas_with(instance: &Instance, epsilon: f64, opts: &SolveOptions) -> Result<SolveCertificate> {
    let constants = derive_constants(instance, epsilon)?;
    let strategy = resolve(instance, &constants, opts)?;
    let found = match strategy {
        Strategy::GridDense => solve_grid(instance, &constants, false, opts)?,
        Strategy::GridSparse => solve_grid(instance, &constants, true, opts)?,
        Strategy::PairSeparable | Strategy::Auto => solve_separable(instance, &constants, opts)?,
    };
    let cand = found.ok_or_else(|| Error::Internal("no grid point admits a feasible state within T_max".into()))?;

    let surrogate = is_surrogate_feasible(instance, &cand.plan, opts.tilt_tol)?;
    if !surrogate.feasible {
        return Err(Error::Internal(format!(
            "returned plan {} fails the unrounded surrogate check",
            cand.plan
        )));
    }

    let alpha_min = instance.alpha_min();
    let padded = alpha_min <= constants.alpha_padding_threshold;
    let mut surrogate_opt = opts.known_surrogate_opt;
    let mut oracle_note = String::from("exact surrogate optimum not attempted");
    if surrogate_opt.is_none() && opts.oracle_check {
        let oracle = OptOptions {
            plan_budget: opts.oracle_plan_budget,
            tilt_tol: opts.tilt_tol,
            ..OptOptions::default()
        };
        match exact_opt(instance, Problem::Surrogate, &oracle) {
            Ok(r) => surrogate_opt = Some(r.cost),
            Err(Error::Budget { required, budget, .. }) => {
                oracle_note = format!("exact surrogate optimum intractable ({required} plans > {budget})");
            }
            Err(e) => return Err(e),
        }
    }
    let bound_tol = 1e-9 * (1.0 + cand.cost.abs());
    let (guarantee, reason) = match surrogate_opt {
        Some(opt) if cand.cost <= (1.0 + epsilon) * opt + bound_tol => (
            GuaranteeStatus::Guaranteed,
            format!("cost {} within (1+eps) of exact surrogate optimum {}", cand.cost, opt),
        ),
        Some(opt) if padded => (
            GuaranteeStatus::Guaranteed,
            format!(
                "alpha_min {alpha_min:e} below padding threshold {:e}; note cost {} exceeds (1+eps) x optimum {}",
                constants.alpha_padding_threshold, cand.cost, opt
            ),
        ),
        Some(opt) => (
            GuaranteeStatus::HeuristicOnly,
            format!(
                "cost {} exceeds (1+eps) x exact surrogate optimum {}; alpha_min {alpha_min:e} above padding threshold {:e}",
                cand.cost, opt, constants.alpha_padding_threshold
            ),
        ),
        None if padded => (
            GuaranteeStatus::Guaranteed,
            format!(
                "alpha_min {alpha_min:e} below padding threshold {:e}",
                constants.alpha_padding_threshold
            ),
        ),
        None => (
            GuaranteeStatus::HeuristicOnly,
            format!(
                "alpha_min {alpha_min:e} above padding threshold {:e}; {oracle_note}",
                constants.alpha_padding_threshold
            ),
        ),
    };

    let labels = instance.labels();
    Ok(SolveCertificate {
        schema_version: SCHEMA_VERSION,
        epsilon,
        cost: cand.cost,
        pairs: instance
            .pairs()
            .into_iter()
            .map(|(y, y2)| (labels[y].clone(), labels[y2].clone()))
            .collect(),
        grid_point: cand.grid_point,
        feasible: surrogate.feasible,
        surrogate,
        plan: cand.plan,
        guarantee,
        reason,
        alpha_min,
        below_padding_threshold: padded,
        surrogate_opt,
        strategy,
        constants,
    })
}
