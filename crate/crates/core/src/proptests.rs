//! Property tests over randomly generated instances.

use proptest::prelude::*;

use crate::afptas::{
    derive_constants, pair_contraction, round_weights, run_afptas_with, tilt_axis, DpProblem, DpStorage, LazyAxis,
    SolveOptions, Strategy as SolveStrategy,
};
use crate::chernoff::{is_surrogate_feasible, log_affinity_unchecked, pairwise_proxy_log, DEFAULT_TILT_TOL};
use crate::exact::{exact_errors, DEFAULT_PROFILE_BUDGET};
use crate::experiments::{random_instance, InstanceFamily};
use crate::likelihood::TiePolicy;
use crate::{Error, Instance, ModelSpec, QueryPlan};

fn instance(seed: u64, labels: usize, alpha: f64) -> Instance {
    let family = InstanceFamily {
        labels,
        max_models: 3,
        min_alphabet: 2,
        max_alphabet: 3,
        alpha,
        random_prior: seed % 2 == 1,
    };
    random_instance(seed, &family).unwrap()
}

fn arb_instance() -> impl Strategy<Value = Instance> {
    (
        any::<u64>(),
        2usize..=3,
        prop::sample::select(vec![0.2, 0.05, 1e-2, 1e-3]),
    )
        .prop_map(|(seed, labels, alpha)| instance(seed, labels, alpha))
}

fn arb_counts(k: usize, max: u32) -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(0..=max, k)
}

fn with_plan(max: u32) -> impl Strategy<Value = (Instance, QueryPlan)> {
    arb_instance().prop_flat_map(move |inst| {
        let k = inst.num_models();
        (Just(inst), arb_counts(k, max).prop_map(QueryPlan::new))
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn plan_cost_is_linear((inst, a) in with_plan(6), extra in arb_counts(3, 6)) {
        let b = QueryPlan::new(extra[..inst.num_models()].to_vec());
        let sum = inst.plan_cost(&(&a + &b)).unwrap();
        let parts = inst.plan_cost(&a).unwrap() + inst.plan_cost(&b).unwrap();
        prop_assert!((sum - parts).abs() <= 1e-12 * (1.0 + sum));
    }

    #[test]
    fn log_affinity_is_convex(inst in arb_instance(), a in 0.0..1.0f64, b in 0.0..1.0f64, lam in 0.0..1.0f64) {
        for m in 0..inst.num_models() {
            for (y, z) in inst.pairs() {
                let f = |s: f64| log_affinity_unchecked(&inst, m, y, z, s);
                let mid = f(lam * a + (1.0 - lam) * b);
                prop_assert!(mid <= lam * f(a) + (1.0 - lam) * f(b) + 1e-12);
                prop_assert!(f(a) <= 0.0);
            }
        }
    }

    #[test]
    fn more_queries_never_loosen_the_bound((inst, plan) in with_plan(5), m in 0usize..3, s in 0.0..1.0f64) {
        let m = m % inst.num_models();
        let bigger = plan.incremented(m);
        let before = is_surrogate_feasible(&inst, &plan, DEFAULT_TILT_TOL).unwrap().values();
        let after = is_surrogate_feasible(&inst, &bigger, DEFAULT_TILT_TOL).unwrap().values();
        for (b, a) in before.iter().zip(&after) {
            prop_assert!(*a <= b + 1e-9);
        }
        for (y, z) in inst.pairs() {
            let p0 = pairwise_proxy_log(&inst, &plan, y, z, s).unwrap();
            let p1 = pairwise_proxy_log(&inst, &bigger, y, z, s).unwrap();
            prop_assert!(p1 <= p0 + 1e-12);
        }
    }

    #[test]
    fn surrogate_dominates_exact_error((inst, plan) in with_plan(5)) {
        let exact = exact_errors(&inst, &plan, DEFAULT_PROFILE_BUDGET).unwrap();
        let bound = is_surrogate_feasible(&inst, &plan, DEFAULT_TILT_TOL).unwrap().values();
        for policy in TiePolicy::ALL {
            for (pe, sb) in exact.for_policy(policy).iter().zip(&bound) {
                prop_assert!(*pe <= sb + 1e-9);
            }
        }
    }

    #[test]
    fn proxy_is_lipschitz_in_tilt(inst in arb_instance(), s in 0.0..1.0f64, t in 0.0..1.0f64, seed in any::<u64>()) {
        let c = derive_constants(&inst, 0.5).unwrap();
        let k = inst.num_models();
        let counts: Vec<u32> = (0..k).map(|m| ((seed >> (8 * m)) % (c.n_max as u64 + 1)) as u32).collect();
        let plan = QueryPlan::new(counts);
        for (y, z) in inst.pairs() {
            let a = pairwise_proxy_log(&inst, &plan, y, z, s).unwrap();
            let b = pairwise_proxy_log(&inst, &plan, y, z, t).unwrap();
            prop_assert!((a - b).abs() <= c.lambda * (s - t).abs() + 1e-9);
        }
    }

    #[test]
    fn rounding_is_sandwiched((inst, plan) in with_plan(40), eps in prop::sample::select(vec![0.1, 0.5, 1.0]), u in any::<u64>()) {
        let c = derive_constants(&inst, eps).unwrap();
        let point: Vec<f64> = (0..inst.pairs().len()).map(|p| ((u >> (4 * p)) % 16) as f64 / 15.0).collect();
        let rw = round_weights(&inst, &c, &point).unwrap();
        prop_assume!(plan.total() <= c.n_max as u64);
        for p in 0..point.len() {
            let exact: f64 = (0..inst.num_models()).map(|m| plan.get(m) as f64 * rw.exact[m][p]).sum();
            let rounded = (0..inst.num_models()).map(|m| plan.get(m) as f64 * rw.rounded[m][p] as f64).sum::<f64>() * c.delta_round;
            prop_assert!(rounded <= exact + 1e-12);
            prop_assert!(exact < rounded + (1.0 + eps).ln());
        }
    }

    #[test]
    fn uniform_designs_contract((inst, plan) in with_plan(5), n in 1u32..=5, u in 0.0..1.0f64) {
        let c = derive_constants(&inst, 0.5).unwrap();
        let rho = pair_contraction(&inst);
        prop_assert!(c.theta < 1.0 && rho <= c.theta + 1e-12);
        let s = c.delta_margin + (1.0 - 2.0 * c.delta_margin) * u;
        let bigger = &plan + &QueryPlan::uniform(inst.num_models(), n);
        for (y, z) in inst.pairs() {
            let base = pairwise_proxy_log(&inst, &plan, y, z, s).unwrap();
            let v = pairwise_proxy_log(&inst, &bigger, y, z, s).unwrap();
            prop_assert!(v <= n as f64 * c.theta.ln() + base + 1e-9);
        }
    }

    #[test]
    fn lazy_axis_matches_materialized(h in 1e-3..1.5f64) {
        let axis = tilt_axis(h).unwrap();
        let lazy = LazyAxis::new(h).unwrap();
        prop_assert_eq!(axis.len(), lazy.len());
        for (j, v) in axis.iter().enumerate() {
            prop_assert_eq!(*v, lazy.point(j));
        }
        prop_assert!(axis.windows(2).all(|w| w[0] < w[1]));
        prop_assert_eq!(axis[0], 0.0);
        prop_assert_eq!(*axis.last().unwrap(), 1.0);
    }

    #[test]
    fn dp_matches_exhaustive_minimum(
        costs in prop::collection::vec(1u32..=8, 1..=3),
        raw in prop::collection::vec(0u64..=5, 6),
        t_max in 1u64..=12,
    ) {
        let k = costs.len();
        let costs: Vec<f64> = costs.iter().map(|&c| c as f64 / 4.0).collect();
        let weights: Vec<Vec<u64>> = (0..k).map(|m| raw[2 * m..2 * m + 2].to_vec()).collect();
        let problem = DpProblem::new(costs.clone(), weights.clone(), t_max).unwrap();
        let table = problem.solve(DpStorage::Dense, &[], 1 << 20).unwrap();
        let mut ok = true;
        table.for_each(|t, v| {
            // exhaustive over counts up to t_max each
            let mut best = f64::INFINITY;
            let mut r = vec![0u64; k];
            loop {
                let covers = (0..2).all(|p| (0..k).map(|m| r[m] * weights[m][p]).sum::<u64>() >= t[p]);
                if covers {
                    best = best.min((0..k).map(|m| r[m] as f64 * costs[m]).sum());
                }
                let mut m = 0;
                while m < k && r[m] == t_max {
                    r[m] = 0;
                    m += 1;
                }
                if m == k {
                    break;
                }
                r[m] += 1;
            }
            ok &= v == best;
        });
        prop_assert!(ok);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn literal_grid_and_separable_agree_on_cost(
        flips in prop::collection::vec(0.02..0.15f64, 1..=2),
        costs in prop::collection::vec(0.5..2.0f64, 2),
        alpha in 0.1..0.3f64,
    ) {
        let models = flips
            .iter()
            .zip(&costs)
            .enumerate()
            .map(|(i, (&p, &c))| {
                ModelSpec::new(format!("m{i}"), vec!["0".into(), "1".into()], vec![vec![p, 1.0 - p], vec![1.0 - p, p]], c)
            })
            .collect();
        let inst = Instance::validated(vec!["a".into(), "b".into()], vec![0.5, 0.5], vec![alpha; 2], models).unwrap();
        let opts = |strategy| SolveOptions { strategy, oracle_check: false, ..SolveOptions::default() };
        let literal = match run_afptas_with(&inst, 1.0, &opts(SolveStrategy::GridSparse)) {
            Ok(cert) => cert,
            Err(Error::Budget { .. }) => return Err(TestCaseError::reject("grid too large")),
            Err(e) => return Err(TestCaseError::fail(e.to_string())),
        };
        let separable = run_afptas_with(&inst, 1.0, &opts(SolveStrategy::PairSeparable)).unwrap();
        prop_assert!((literal.cost - separable.cost).abs() <= 1e-9 * (1.0 + literal.cost));
    }
}
