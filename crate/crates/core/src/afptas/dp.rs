//! Conservative weight rounding and the unbounded-knapsack recursion over
//! pair-indexed discrimination states.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use super::constants::DerivedConstants;
use crate::chernoff::log_affinity_unchecked;
use crate::error::{Error, Result};
use crate::model::{Instance, QueryPlan};

/// Default cap on the number of stored DP entries.
pub const DEFAULT_MEMORY_BUDGET: usize = 1 << 28;

/// Accumulated rounded discrimination per ordered pair.
pub type State = Vec<u64>;

/// `floor(w / delta)`, never negative.
pub fn round_weight(w: f64, delta: f64) -> u64 {
    (w.max(0.0) / delta).floor() as u64
}

/// Exact and rounded discrimination weights, indexed `[m][p]`.
#[derive(Clone, Debug, PartialEq)]
pub struct RoundedWeights {
    pub exact: Vec<Vec<f64>>,
    pub rounded: Vec<Vec<u64>>,
}

fn check_grid_point(instance: &Instance, grid_point: &[f64]) -> Result<()> {
    let p = instance.pairs().len();
    if grid_point.len() != p {
        return Err(Error::Dimension {
            what: "grid point",
            expected: p,
            got: grid_point.len(),
        });
    }
    if let Some(s) = grid_point.iter().find(|s| !(0.0..=1.0).contains(*s)) {
        return Err(Error::Argument(format!("tilt {s} outside [0, 1]")));
    }
    Ok(())
}

/// `w_{m,p} = -log M_m^{p}(s_p)` and its rounding in units of `Delta_round`.
pub fn round_weights(instance: &Instance, constants: &DerivedConstants, grid_point: &[f64]) -> Result<RoundedWeights> {
    check_grid_point(instance, grid_point)?;
    let pairs = instance.pairs();
    let exact: Vec<Vec<f64>> = (0..instance.num_models())
        .map(|m| {
            pairs
                .iter()
                .zip(grid_point)
                .map(|(&(y, y2), &s)| -log_affinity_unchecked(instance, m, y, y2, s))
                .collect()
        })
        .collect();
    let rounded = exact
        .iter()
        .map(|row| row.iter().map(|&w| round_weight(w, constants.delta_round)).collect())
        .collect();
    Ok(RoundedWeights { exact, rounded })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DpStorage {
    #[default]
    Dense,
    Sparse,
}

/// Costs and rounded weights of one knapsack instance.
#[derive(Clone, Debug, PartialEq)]
pub struct DpProblem {
    costs: Vec<f64>,
    weights: Vec<Vec<u64>>,
    t_max: u64,
    dims: usize,
}

const NO_BACK: u32 = u32::MAX;

#[derive(Clone, Debug)]
enum Storage {
    Dense { values: Vec<f64>, back: Vec<u32> },
    Sparse { entries: HashMap<State, (f64, u32)> },
}

/// Solved recursion: minimum cost and chosen model per state.
#[derive(Clone, Debug)]
pub struct DpTable {
    problem: DpProblem,
    storage: Storage,
}

impl DpProblem {
    pub fn new(costs: Vec<f64>, weights: Vec<Vec<u64>>, t_max: u64) -> Result<Self> {
        if weights.len() != costs.len() {
            return Err(Error::Dimension {
                what: "weight rows",
                expected: costs.len(),
                got: weights.len(),
            });
        }
        let dims = weights.first().map_or(0, Vec::len);
        if let Some(row) = weights.iter().find(|r| r.len() != dims) {
            return Err(Error::Dimension {
                what: "weight row",
                expected: dims,
                got: row.len(),
            });
        }
        Ok(Self {
            costs,
            weights,
            t_max,
            dims,
        })
    }

    pub fn from_instance(instance: &Instance, weights: &RoundedWeights, t_max: u64) -> Result<Self> {
        Self::new(instance.costs(), weights.rounded.clone(), t_max)
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn t_max(&self) -> u64 {
        self.t_max
    }

    pub fn dense_size(&self) -> f64 {
        (self.t_max as f64 + 1.0).powi(self.dims as i32)
    }

    fn step_into(&self, t: &[u64], m: usize, out: &mut [u64]) {
        for ((o, &v), &w) in out.iter_mut().zip(t).zip(&self.weights[m]) {
            *o = v.saturating_sub(w);
        }
    }

    fn step(&self, t: &[u64], m: usize) -> State {
        let mut out = vec![0; self.dims];
        self.step_into(t, m, &mut out);
        out
    }

    pub fn solve(&self, storage: DpStorage, targets: &[State], memory_budget: usize) -> Result<DpTable> {
        match storage {
            DpStorage::Dense => self.solve_dense(memory_budget),
            DpStorage::Sparse => self.solve_sparse(targets, memory_budget),
        }
    }

    /// Fills every state of `{0..T_max}^P`. States are visited in
    /// lexicographic order; every predecessor `(t - w)_+` is componentwise
    /// below `t` and hence already final, so the values equal those of an
    /// l1-ordered sweep.
    pub fn solve_dense(&self, memory_budget: usize) -> Result<DpTable> {
        let size = self.dense_size();
        if size > memory_budget as f64 {
            return Err(Error::Budget {
                unit: "DP entries",
                required: size,
                budget: memory_budget as f64,
            });
        }
        let size = size as usize;
        let radix = self.t_max + 1;
        let mut values = vec![f64::INFINITY; size];
        let mut back = vec![NO_BACK; size];
        values[0] = 0.0;
        let mut t = vec![0u64; self.dims];
        let mut pred = vec![0u64; self.dims];
        for idx in 1..size {
            // odometer increment, last coordinate fastest
            for slot in t.iter_mut().rev() {
                if *slot < self.t_max {
                    *slot += 1;
                    break;
                }
                *slot = 0;
            }
            let mut best = f64::INFINITY;
            let mut arg = NO_BACK;
            for m in 0..self.costs.len() {
                self.step_into(&t, m, &mut pred);
                let pidx = pred.iter().fold(0u64, |acc, &v| acc * radix + v) as usize;
                if pidx == idx {
                    continue;
                }
                let v = self.costs[m] + values[pidx];
                if v < best {
                    best = v;
                    arg = m as u32;
                }
            }
            values[idx] = best;
            back[idx] = arg;
        }
        Ok(DpTable {
            problem: self.clone(),
            storage: Storage::Dense { values, back },
        })
    }

    /// Evaluates only the states reachable backwards from `targets`, in
    /// nondecreasing l1 order. Values agree exactly with the dense table.
    pub fn solve_sparse(&self, targets: &[State], memory_budget: usize) -> Result<DpTable> {
        let mut seen: HashSet<State> = HashSet::new();
        let mut stack = Vec::new();
        for t in targets {
            if t.len() != self.dims {
                return Err(Error::Dimension {
                    what: "target state",
                    expected: self.dims,
                    got: t.len(),
                });
            }
            let t: State = t.iter().map(|&v| v.min(self.t_max)).collect();
            if seen.insert(t.clone()) {
                stack.push(t);
            }
        }
        seen.insert(vec![0; self.dims]);
        while let Some(t) = stack.pop() {
            for m in 0..self.costs.len() {
                let p = self.step(&t, m);
                if !seen.contains(&p) {
                    if seen.len() >= memory_budget {
                        return Err(Error::Budget {
                            unit: "DP entries",
                            required: (seen.len() + 1) as f64,
                            budget: memory_budget as f64,
                        });
                    }
                    seen.insert(p.clone());
                    stack.push(p);
                }
            }
        }
        let mut order: Vec<State> = seen.into_iter().collect();
        order.sort_by(|a, b| {
            let (na, nb) = (a.iter().sum::<u64>(), b.iter().sum::<u64>());
            na.cmp(&nb).then_with(|| a.cmp(b))
        });
        let mut entries: HashMap<State, (f64, u32)> = HashMap::with_capacity(order.len());
        for t in order {
            if t.iter().all(|&v| v == 0) {
                entries.insert(t, (0.0, NO_BACK));
                continue;
            }
            let mut best = f64::INFINITY;
            let mut arg = NO_BACK;
            for m in 0..self.costs.len() {
                let p = self.step(&t, m);
                if p == t {
                    continue;
                }
                let v = self.costs[m] + entries[&p].0;
                if v < best {
                    best = v;
                    arg = m as u32;
                }
            }
            entries.insert(t, (best, arg));
        }
        Ok(DpTable {
            problem: self.clone(),
            storage: Storage::Sparse { entries },
        })
    }
}

impl DpTable {
    pub fn problem(&self) -> &DpProblem {
        &self.problem
    }

    pub fn storage(&self) -> DpStorage {
        match self.storage {
            Storage::Dense { .. } => DpStorage::Dense,
            Storage::Sparse { .. } => DpStorage::Sparse,
        }
    }

    pub fn len(&self) -> usize {
        match &self.storage {
            Storage::Dense { values, .. } => values.len(),
            Storage::Sparse { entries } => entries.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn dense_index(&self, t: &[u64]) -> Option<usize> {
        if t.len() != self.problem.dims || t.iter().any(|&v| v > self.problem.t_max) {
            return None;
        }
        let radix = self.problem.t_max + 1;
        Some(t.iter().fold(0u64, |acc, &v| acc * radix + v) as usize)
    }

    fn entry(&self, t: &[u64]) -> Option<(f64, u32)> {
        match &self.storage {
            Storage::Dense { values, back } => self.dense_index(t).map(|i| (values[i], back[i])),
            Storage::Sparse { entries } => entries.get(t).copied(),
        }
    }

    /// `DP[t]`; `None` when the state is outside the table.
    pub fn value(&self, t: &[u64]) -> Option<f64> {
        self.entry(t).map(|e| e.0)
    }

    pub fn backpointer(&self, t: &[u64]) -> Option<usize> {
        self.entry(t).and_then(|e| (e.1 != NO_BACK).then_some(e.1 as usize))
    }

    /// Calls `f(state, value)` for every stored state.
    pub fn for_each(&self, mut f: impl FnMut(&[u64], f64)) {
        match &self.storage {
            Storage::Dense { values, .. } => {
                let mut t = vec![0u64; self.problem.dims];
                for (idx, &v) in values.iter().enumerate() {
                    if idx > 0 {
                        for slot in t.iter_mut().rev() {
                            if *slot < self.problem.t_max {
                                *slot += 1;
                                break;
                            }
                            *slot = 0;
                        }
                    }
                    f(&t, v);
                }
            }
            Storage::Sparse { entries } => entries.iter().for_each(|(t, e)| f(t, e.0)),
        }
    }
}

/// Follows backpointers from `t` to the zero state, counting model picks.
pub fn backtrack(table: &DpTable, t: &[u64]) -> Result<QueryPlan> {
    let problem = &table.problem;
    match table.value(t) {
        Some(v) if v.is_finite() => {}
        _ => {
            return Err(Error::Internal(format!(
                "backtrack from state {t:?} without a finite value"
            )))
        }
    }
    let mut counts = vec![0u32; problem.costs.len()];
    let mut cur: State = t.to_vec();
    while cur.iter().any(|&v| v > 0) {
        let m = table
            .backpointer(&cur)
            .ok_or_else(|| Error::Internal(format!("dangling backpointer at state {cur:?}")))?;
        counts[m] += 1;
        cur = problem.step(&cur, m);
    }
    Ok(QueryPlan::new(counts))
}

/// The rounded statewise bound at one grid point:
/// `sum_{y'} (pi(y')/pi(y))^{s_p} exp(-Delta t_p) <= alpha_y`.
#[derive(Clone, Debug)]
pub struct FeasibilityCheck {
    log_coef: Vec<f64>,
    alpha: Vec<f64>,
    blocks: Vec<std::ops::Range<usize>>,
    delta: f64,
}

impl FeasibilityCheck {
    pub fn new(instance: &Instance, delta_round: f64, grid_point: &[f64]) -> Result<Self> {
        check_grid_point(instance, grid_point)?;
        let lp = instance.log_prior();
        let pairs = instance.pairs();
        let log_coef = pairs
            .iter()
            .zip(grid_point)
            .map(|(&(y, y2), &s)| if s == 0.0 { 0.0 } else { s * (lp[y2] - lp[y]) })
            .collect();
        let l = instance.num_labels();
        let blocks = (0..l).map(|y| y * (l - 1)..(y + 1) * (l - 1)).collect();
        Ok(Self {
            log_coef,
            alpha: instance.tolerances().to_vec(),
            blocks,
            delta: delta_round,
        })
    }

    pub fn label_sum(&self, y: usize, t: &[u64]) -> f64 {
        self.blocks[y]
            .clone()
            .map(|p| (self.log_coef[p] - self.delta * t[p] as f64).exp())
            .sum()
    }

    pub fn label_feasible(&self, y: usize, t: &[u64]) -> bool {
        self.label_sum(y, t) <= self.alpha[y]
    }

    pub fn is_feasible(&self, t: &[u64]) -> bool {
        (0..self.alpha.len()).all(|y| self.label_feasible(y, t))
    }

    /// Minimal feasible states of one label's block, as block-local vectors.
    fn label_minimal(&self, y: usize, t_max: u64, budget: usize) -> Result<Vec<Vec<u64>>> {
        let block = self.blocks[y].clone();
        let d = block.len();
        let mut full = vec![0u64; self.log_coef.len()];
        let mut out = Vec::new();
        let outer = (t_max as f64 + 1.0).powi(d as i32 - 1);
        if outer > budget as f64 {
            return Err(Error::Budget {
                unit: "feasibility frontier",
                required: outer,
                budget: budget as f64,
            });
        }
        let mut prefix = vec![0u64; d - 1];
        loop {
            for (j, &v) in prefix.iter().enumerate() {
                full[block.start + j] = v;
            }
            let last = block.end - 1;
            full[last] = t_max;
            if self.label_feasible(y, &full) {
                // smallest last coordinate keeping the label feasible
                let (mut lo, mut hi) = (0u64, t_max);
                while lo < hi {
                    let mid = lo + (hi - lo) / 2;
                    full[last] = mid;
                    if self.label_feasible(y, &full) {
                        hi = mid;
                    } else {
                        lo = mid + 1;
                    }
                }
                full[last] = lo;
                let minimal = (block.start..last).all(|j| {
                    full[j] == 0 || {
                        full[j] -= 1;
                        let infeasible = !self.label_feasible(y, &full);
                        full[j] += 1;
                        infeasible
                    }
                });
                if minimal {
                    out.push(full[block.clone()].to_vec());
                    if out.len() > budget {
                        return Err(Error::Budget {
                            unit: "feasibility frontier",
                            required: out.len() as f64,
                            budget: budget as f64,
                        });
                    }
                }
            }
            // advance the prefix odometer
            let mut j = d - 1;
            loop {
                if j == 0 {
                    return Ok(out);
                }
                j -= 1;
                if prefix[j] < t_max {
                    prefix[j] += 1;
                    break;
                }
                prefix[j] = 0;
            }
        }
    }

    /// Every feasible state that stops being feasible when any single
    /// coordinate is lowered. Empty when nothing within `T_max` is feasible.
    pub fn minimal_states(&self, t_max: u64, budget: usize) -> Result<Vec<State>> {
        let mut acc: Vec<State> = vec![Vec::new()];
        for y in 0..self.alpha.len() {
            let part = self.label_minimal(y, t_max, budget)?;
            let size = acc.len() as f64 * part.len() as f64;
            if size > budget as f64 {
                return Err(Error::Budget {
                    unit: "feasibility frontier",
                    required: size,
                    budget: budget as f64,
                });
            }
            acc = acc
                .iter()
                .flat_map(|a| {
                    part.iter().map(move |b| {
                        let mut v = a.clone();
                        v.extend_from_slice(b);
                        v
                    })
                })
                .collect();
        }
        Ok(acc)
    }
}

/// Cheapest feasible state of a solved table, ties to the lexicographically
/// smallest state. `None` when no stored state is feasible at a finite cost.
pub fn find_feasible_state(
    instance: &Instance,
    constants: &DerivedConstants,
    grid_point: &[f64],
    table: &DpTable,
) -> Result<Option<(State, f64)>> {
    let check = FeasibilityCheck::new(instance, constants.delta_round, grid_point)?;
    Ok(scan_feasible(&check, table))
}

pub(crate) fn scan_feasible(check: &FeasibilityCheck, table: &DpTable) -> Option<(State, f64)> {
    let mut best: Option<(State, f64)> = None;
    table.for_each(|t, v| {
        if !v.is_finite() {
            return;
        }
        let better = match &best {
            None => true,
            Some((bt, bv)) => v < *bv || (v == *bv && t < bt.as_slice()),
        };
        if better && check.is_feasible(t) {
            best = Some((t.to_vec(), v));
        }
    });
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::afptas::constants::derive_constants;
    use crate::model::fixtures::bsc;

    fn knapsack() -> DpProblem {
        DpProblem::new(vec![2.0, 1.0], vec![vec![3], vec![1]], 10).unwrap()
    }

    #[test]
    fn round_weight_examples() {
        assert_eq!(round_weight(0.0, 0.1), 0);
        let w = -(2.0 * (0.09f64).sqrt()).ln();
        assert!((w - 0.51083).abs() < 1e-5);
        assert_eq!(round_weight(w, 0.1), 5);
        assert_eq!(round_weight(0.0999, 0.1), 0);
    }

    #[test]
    fn rounding_sandwich_bsc() {
        let inst = bsc();
        let c = derive_constants(&inst, 0.5).unwrap();
        let rw = round_weights(&inst, &c, &[0.3, 0.7]).unwrap();
        for (e, r) in rw.exact[0].iter().zip(&rw.rounded[0]) {
            let lo = c.delta_round * *r as f64;
            assert!(lo <= *e && *e < lo + c.delta_round);
        }
    }

    #[test]
    fn one_pair_example() {
        let table = knapsack().solve_dense(1000).unwrap();
        assert_eq!(table.value(&[0]), Some(0.0));
        assert_eq!(table.value(&[5]), Some(4.0));
        assert_eq!(backtrack(&table, &[5]).unwrap(), QueryPlan::new(vec![2, 0]));
        assert_eq!(backtrack(&table, &[0]).unwrap(), QueryPlan::new(vec![0, 0]));
    }

    #[test]
    fn single_model_ceiling() {
        let p = DpProblem::new(vec![1.5], vec![vec![4]], 20).unwrap();
        let table = p.solve_dense(100).unwrap();
        for t in 0..=20u64 {
            let n = t.div_ceil(4);
            assert_eq!(table.value(&[t]), Some(1.5 * n as f64));
            assert_eq!(backtrack(&table, &[t]).unwrap(), QueryPlan::new(vec![n as u32]));
        }
    }

    #[test]
    fn dense_and_sparse_agree() {
        let p = DpProblem::new(vec![1.0, 1.7, 0.6], vec![vec![2, 0], vec![3, 4], vec![0, 1]], 12).unwrap();
        let dense = p.solve_dense(1000).unwrap();
        let targets = vec![vec![12, 5], vec![7, 9], vec![3, 12]];
        let sparse = p.solve_sparse(&targets, 1000).unwrap();
        assert!(sparse.len() < dense.len());
        sparse.for_each(|t, v| {
            assert_eq!(dense.value(t).unwrap().to_bits(), v.to_bits());
            assert_eq!(dense.backpointer(t), sparse.backpointer(t));
        });
    }

    #[test]
    fn memory_budget_enforced() {
        assert!(matches!(knapsack().solve_dense(5), Err(Error::Budget { .. })));
    }

    #[test]
    fn unreachable_state_is_infinite() {
        let p = DpProblem::new(vec![1.0], vec![vec![1, 0]], 3).unwrap();
        let t = p.solve_dense(100).unwrap();
        assert_eq!(t.value(&[0, 1]), Some(f64::INFINITY));
        assert!(backtrack(&t, &[0, 1]).is_err());
    }

    #[test]
    fn feasibility_threshold_example() {
        let inst = bsc();
        let check = FeasibilityCheck::new(&inst, 0.1, &[0.5, 0.5]).unwrap();
        assert!(check.label_feasible(0, &[30, 0]));
        assert!(!check.label_feasible(0, &[29, 0]));
        let mins = check.minimal_states(100, 1000).unwrap();
        assert_eq!(mins, vec![vec![30, 30]]);
        assert!(check.minimal_states(20, 1000).unwrap().is_empty());
    }

    #[test]
    fn vacuous_tolerances_accept_zero_state() {
        let inst = bsc().with_uniform_tolerance(1.0);
        let check = FeasibilityCheck::new(&inst, 0.1, &[0.5, 0.5]).unwrap();
        assert!(check.is_feasible(&[0, 0]));
        let p = DpProblem::new(vec![1.0], vec![vec![1, 1]], 5).unwrap();
        let t = p.solve_dense(100).unwrap();
        assert_eq!(scan_feasible(&check, &t), Some((vec![0, 0], 0.0)));
    }
}
