//! Acceptance suite. Each criterion is its own test and writes one
//! `ACCEPTANCE <n> PASS|FAIL` line straight to stdout, so the lines show up
//! even when the harness captures output.

use std::io::Write;
use std::time::{Duration, Instant};

use query_design::afptas::{derive_constants, round_weights, run_afptas_with, DpProblem, SolveOptions};
use query_design::chernoff::{affinity, is_surrogate_feasible, pairwise_proxy_log, DEFAULT_TILT_TOL};
use query_design::exact::{exact_errors, exact_opt, exact_pairwise_all, OptOptions, Problem, DEFAULT_PROFILE_BUDGET};
use query_design::experiments::{guarantee_sweep, random_instance, tightness_sweep, InstanceFamily};
use query_design::hardness::{random_set_cover, verify_equivalence, ReductionParams};
use query_design::likelihood::TiePolicy;
use query_design::montecarlo::{simulate_error, wilson_interval, Z95};
use query_design::{Error, Instance, ModelSpec, QueryPlan};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SUITE_SIZE: u64 = 200;

fn report(n: &str, pass: bool, detail: String) -> bool {
    let line = format!("ACCEPTANCE {n} {}: {detail}\n", if pass { "PASS" } else { "FAIL" });
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(line.as_bytes());
    let _ = out.flush();
    pass
}

fn suite_instance(seed: u64) -> Instance {
    let family = InstanceFamily {
        labels: 2 + (seed % 2) as usize,
        max_models: 3,
        min_alphabet: 2,
        max_alphabet: 3,
        alpha: [0.05, 1e-2, 1e-3][(seed % 3) as usize],
        random_prior: true,
    };
    random_instance(seed, &family).unwrap()
}

fn suite() -> Vec<Instance> {
    (0..SUITE_SIZE).map(suite_instance).collect()
}

/// Plan with at most `max_total` queries spread at random over the models.
fn random_plan(rng: &mut ChaCha8Rng, k: usize, max_total: u32) -> QueryPlan {
    let total = rng.random_range(0..=max_total);
    let mut counts = vec![0u32; k];
    for _ in 0..total {
        counts[rng.random_range(0..k)] += 1;
    }
    QueryPlan::new(counts)
}

fn elapsed(t: Instant) -> String {
    format!("{:.1}s", t.elapsed().as_secs_f64())
}

#[test]
fn criterion_01_surrogate_domination() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let (mut checks, mut worst) = (0usize, f64::NEG_INFINITY);
    let mut failures = Vec::new();
    for (i, inst) in suite().iter().enumerate() {
        for _ in 0..5 {
            let plan = random_plan(&mut rng, inst.num_models(), 8);
            let exact = exact_errors(inst, &plan, DEFAULT_PROFILE_BUDGET).unwrap();
            let bound = is_surrogate_feasible(inst, &plan, DEFAULT_TILT_TOL).unwrap().values();
            for policy in TiePolicy::ALL {
                for (y, (&pe, &sb)) in exact.for_policy(policy).iter().zip(&bound).enumerate() {
                    checks += 1;
                    worst = worst.max(pe - sb);
                    if pe > sb + 1e-9 {
                        failures.push(format!("instance {i} plan {plan} label {y} {policy:?}: {pe} > {sb}"));
                    }
                }
            }
        }
    }
    let time_ok = start.elapsed() < Duration::from_secs(120);
    let pass = report(
        "1",
        failures.is_empty() && time_ok,
        format!(
            "exact error <= surrogate on {checks} (instance, plan, label, policy) checks, max excess {worst:.3e}, {} violations, {}",
            failures.len(),
            elapsed(start)
        ),
    );
    assert!(pass, "{failures:?}");
}

#[test]
fn criterion_02_union_and_pairwise_chains() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut failures = Vec::new();
    let mut checks = 0usize;
    for (i, inst) in suite().iter().enumerate() {
        for _ in 0..5 {
            let plan = random_plan(&mut rng, inst.num_models(), 8);
            let exact = exact_errors(inst, &plan, DEFAULT_PROFILE_BUDGET).unwrap();
            let pw = exact_pairwise_all(inst, &plan, DEFAULT_PROFILE_BUDGET).unwrap();
            let sur = is_surrogate_feasible(inst, &plan, DEFAULT_TILT_TOL).unwrap();
            for y in 0..inst.num_labels() {
                let pair_sum: f64 = (0..inst.num_labels()).filter(|&z| z != y).map(|z| pw[y][z]).sum();
                let proxy_sum: f64 = sur.labels[y].pairs.iter().map(|p| p.log_value.exp()).sum();
                checks += 1;
                // count-tie-as-error is the larger of the two policies
                let pe = exact.count_tie_as_error[y];
                if pe > pair_sum + 1e-12 || pair_sum > proxy_sum + 1e-12 {
                    failures.push(format!(
                        "instance {i} plan {plan} label {y}: {pe} / {pair_sum} / {proxy_sum}"
                    ));
                }
                for (p, z) in (0..inst.num_labels()).filter(|&z| z != y).enumerate() {
                    if pw[y][z] > sur.labels[y].pairs[p].log_value.exp() + 1e-12 {
                        failures.push(format!("instance {i} plan {plan} pair ({y},{z})"));
                    }
                }
            }
        }
    }
    let pass = report(
        "2",
        failures.is_empty(),
        format!(
            "P_e <= sum of exact pairwise <= sum of optimized proxies on {checks} label checks, {} violations",
            failures.len()
        ),
    );
    assert!(pass, "{failures:?}");
}

#[test]
fn criterion_03_affinity_laws() {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut failures = Vec::new();
    let mut checks = 0usize;
    for (i, inst) in suite().iter().enumerate() {
        for m in 0..inst.num_models() {
            for (y, z) in inst.pairs() {
                checks += 1;
                let f = |s: f64| affinity(inst, m, y, z, s).unwrap();
                if (f(0.0) - 1.0).abs() > 1e-12 || (f(1.0) - 1.0).abs() > 1e-12 {
                    failures.push(format!("instance {i} model {m} pair ({y},{z}): endpoints"));
                }
                let grid: Vec<f64> = (1..100).map(|j| j as f64 / 100.0).collect();
                if grid.iter().any(|&s| !(f(s) > 0.0 && f(s) <= 1.0)) {
                    failures.push(format!("instance {i} model {m} pair ({y},{z}): range"));
                }
                let model = inst.model(m);
                let gap = model
                    .row(y)
                    .iter()
                    .zip(model.row(z))
                    .map(|(a, b)| (a - b).abs())
                    .fold(0.0, f64::max);
                if gap > 1e-6 && grid.iter().all(|&s| f(s) >= 1.0 - 1e-9) {
                    failures.push(format!("instance {i} model {m} pair ({y},{z}): no contraction"));
                }
                for _ in 0..10 {
                    let (a, b) = (rng.random::<f64>(), rng.random::<f64>());
                    let lam = rng.random::<f64>();
                    let mid = lam * a + (1.0 - lam) * b;
                    let lhs = f(mid).ln();
                    let rhs = lam * f(a).ln() + (1.0 - lam) * f(b).ln();
                    if lhs > rhs + 1e-12 {
                        failures.push(format!(
                            "instance {i} model {m} pair ({y},{z}): log-convexity at {a},{b}"
                        ));
                    }
                }
            }
        }
    }
    let pass = report(
        "3",
        failures.is_empty(),
        format!(
            "endpoint, range, contraction and log-convexity laws on {checks} (model, pair) cases, {} violations",
            failures.len()
        ),
    );
    assert!(pass, "{failures:?}");
}

#[test]
fn criterion_04_solver_soundness() {
    let start = Instant::now();
    let opts = SolveOptions {
        oracle_check: false,
        ..SolveOptions::default()
    };
    let mut runs = 0usize;
    let mut failures = Vec::new();
    for (i, inst) in suite().iter().enumerate() {
        for eps in [0.5, 1.0] {
            runs += 1;
            match run_afptas_with(inst, eps, &opts) {
                Ok(cert) => {
                    let again = is_surrogate_feasible(inst, &cert.plan, DEFAULT_TILT_TOL).unwrap();
                    if !again.feasible || !cert.feasible || cert.cost != inst.plan_cost(&cert.plan).unwrap() {
                        failures.push(format!("instance {i} eps {eps}: plan {} not feasible", cert.plan));
                    }
                }
                Err(e) => failures.push(format!("instance {i} eps {eps}: {e}")),
            }
        }
    }
    let pass = report(
        "4",
        failures.is_empty(),
        format!(
            "{}/{runs} solver outputs pass unrounded surrogate re-verification, {}",
            runs - failures.len(),
            elapsed(start)
        ),
    );
    assert!(pass, "{failures:?}");
}

#[test]
fn criterion_05_approximation_guarantee() {
    let start = Instant::now();
    let family = InstanceFamily {
        labels: 2,
        max_models: 3,
        alpha: 1e-3,
        ..InstanceFamily::default()
    };
    let eps = [0.1, 0.5, 1.0];
    let rows = guarantee_sweep(5000, &family, 50, &eps, &SolveOptions::default()).unwrap();
    let per_eps: Vec<String> = eps
        .iter()
        .map(|&e| {
            let sel: Vec<_> = rows.iter().filter(|r| r.epsilon == e).collect();
            let worst = sel.iter().map(|r| r.ratio).fold(0.0, f64::max);
            format!(
                "eps {e}: {}/{} pass (worst ratio {worst:.4})",
                sel.iter().filter(|r| r.pass).count(),
                sel.len()
            )
        })
        .collect();
    let all_pass = rows.iter().all(|r| r.pass && r.sound);
    let time_ok = start.elapsed() < Duration::from_secs(600);
    let failures: Vec<_> = rows.iter().filter(|r| !r.pass || !r.sound).collect();
    let pass = report(
        "5",
        all_pass && time_ok && rows.len() == 150,
        format!("{}, {}", per_eps.join("; "), elapsed(start)),
    );
    assert!(pass, "{failures:?}");
}

/// Brute-force `min C(r)` over multisets whose clamped accumulated weight
/// dominates each state, independent of the recursion.
fn brute_force(costs: &[f64], weights: &[Vec<u64>], t_max: u64) -> Vec<f64> {
    let dims = weights[0].len();
    let radix = (t_max + 1) as usize;
    let size = radix.pow(dims as u32);
    let mut exact_at = vec![f64::INFINITY; size];
    let k = costs.len();
    let bound: Vec<u64> = weights
        .iter()
        .map(|w| if w.iter().any(|&v| v > 0) { t_max } else { 0 })
        .collect();
    let mut r = vec![0u64; k];
    loop {
        let mut idx = 0usize;
        for p in 0..dims {
            let acc: u64 = (0..k).map(|m| r[m] * weights[m][p]).sum();
            idx = idx * radix + acc.min(t_max) as usize;
        }
        let c: f64 = (0..k).map(|m| r[m] as f64 * costs[m]).sum();
        if c < exact_at[idx] {
            exact_at[idx] = c;
        }
        let mut m = 0;
        loop {
            if m == k {
                break;
            }
            if r[m] < bound[m] {
                r[m] += 1;
                break;
            }
            r[m] = 0;
            m += 1;
        }
        if m == k {
            break;
        }
    }
    // suffix minimum over componentwise-larger accumulations
    let mut best = exact_at;
    for p in 0..dims {
        let stride = radix.pow((dims - 1 - p) as u32);
        for idx in (0..size).rev() {
            let coord = idx / stride % radix;
            if coord < t_max as usize {
                let up = best[idx + stride];
                if up < best[idx] {
                    best[idx] = up;
                }
            }
        }
    }
    best
}

fn dp_fixtures() -> Vec<(Vec<f64>, Vec<Vec<u64>>, u64)> {
    let mut fx = vec![
        (vec![2.0, 1.0], vec![vec![3], vec![1]], 10),
        (vec![1.5], vec![vec![4]], 30),
        (vec![1.0, 1.75, 0.5], vec![vec![2, 0], vec![3, 4], vec![0, 1]], 12),
        (vec![1.0, 1.0], vec![vec![5, 1], vec![1, 5]], 30),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    for dims in [1usize, 2] {
        for _ in 0..15 {
            let k = rng.random_range(1..=3);
            let t_max = if dims == 1 {
                30
            } else {
                [10, 20, 30][rng.random_range(0..3)]
            };
            let costs = (0..k).map(|_| rng.random_range(2..=8) as f64 / 4.0).collect();
            let weights = (0..k)
                .map(|_| loop {
                    let w: Vec<u64> = (0..dims).map(|_| rng.random_range(0..=8)).collect();
                    if w.iter().any(|&v| v > 0) {
                        break w;
                    }
                })
                .collect();
            fx.push((costs, weights, t_max));
        }
    }
    fx
}

#[test]
fn criterion_06_dp_correctness() {
    let mut failures = Vec::new();
    let mut states = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(607);
    let fixtures = dp_fixtures();
    for (f, (costs, weights, t_max)) in fixtures.iter().enumerate() {
        let problem = DpProblem::new(costs.clone(), weights.clone(), *t_max).unwrap();
        let dense = problem.solve_dense(1 << 20).unwrap();
        let brute = brute_force(costs, weights, *t_max);
        let mut idx = 0usize;
        dense.for_each(|t, v| {
            states += 1;
            if v != brute[idx] {
                failures.push(format!("fixture {f} state {t:?}: dp {v} brute {}", brute[idx]));
            }
            idx += 1;
        });
        let dims = weights[0].len();
        let targets: Vec<Vec<u64>> = (0..4)
            .map(|_| (0..dims).map(|_| rng.random_range(0..=*t_max)).collect())
            .collect();
        let sparse = problem.solve_sparse(&targets, 1 << 20).unwrap();
        sparse.for_each(|t, v| {
            if dense.value(t).map(f64::to_bits) != Some(v.to_bits()) || dense.backpointer(t) != sparse.backpointer(t) {
                failures.push(format!("fixture {f} state {t:?}: sparse and dense differ"));
            }
        });
    }
    let pass = report(
        "6",
        failures.is_empty(),
        format!(
            "{} one/two-pair fixtures, {states} dense states match brute force, sparse tables bit-identical to dense, {} mismatches",
            fixtures.len(),
            failures.len()
        ),
    );
    assert!(pass, "{failures:?}");
}

#[test]
fn criterion_07_set_cover_equivalence() {
    let eps = 0.1;
    let params = ReductionParams::new(eps);
    let (mut plans, mut mismatched, mut opt_ok, mut single, mut single_ok) = (0usize, 0usize, 0usize, 0usize, 0usize);
    let mut class_ok = 0usize;
    let mut examples = Vec::new();
    let mut opt_gap = Vec::new();
    let total = 20;
    for seed in 0..total {
        let sc = random_set_cover(700 + seed, 4, 4);
        for policy in TiePolicy::ALL {
            let rep = verify_equivalence(&sc, &params, policy).unwrap();
            plans += rep.plans.len();
            mismatched += rep.mismatches.len();
            if examples.len() < 3 {
                if let Some(m) = rep.mismatches.first() {
                    examples.push(format!("sets {:?} covers but P_e = {:?}", m.sets, m.errors));
                }
            }
            if policy == TiePolicy::LowestIndex {
                if rep.opt_matches_cover(1e-6) {
                    opt_ok += 1;
                } else if opt_gap.len() < 2 {
                    opt_gap.push(format!(
                        "exact OPT {:.6} with plan {} vs delta' + min cover {:.6}",
                        rep.unrestricted_opt.cost,
                        rep.unrestricted_opt.plan,
                        rep.delta_prime + rep.min_cover_weight
                    ));
                }
                let target = rep.delta_prime + rep.min_cover_weight;
                if rep.reduction_class_opt.is_some_and(|c| (c - target).abs() <= 1e-6) {
                    class_ok += 1;
                }
            }
            for s in &rep.single_query {
                single += 1;
                if (s.error - eps).abs() <= 1e-6 {
                    single_ok += 1;
                }
            }
        }
    }
    let a = report(
        "7a",
        mismatched == 0,
        format!("cover <=> true feasibility over {plans} 0/1 plans (both tie policies): {mismatched} mismatches; e.g. {examples:?}"),
    );
    let b = report(
        "7b",
        opt_ok == total as usize,
        format!(
            "exact OPT = delta' + min cover on {opt_ok}/{total} instances (restricted to one discriminator query and 0/1 set plans: {class_ok}/{total}); e.g. {opt_gap:?}"
        ),
    );
    let c = report(
        "7c",
        single_ok == single,
        format!("single covering query error within 1e-6 of eps on {single_ok}/{single} cases"),
    );
    let pass = report("7", a && b && c, "all of 7a, 7b, 7c".into());
    assert!(pass);
}

fn bsc() -> Instance {
    Instance::validated(
        vec!["1".into(), "2".into()],
        vec![0.5, 0.5],
        vec![0.05, 0.05],
        vec![ModelSpec::new(
            "bsc",
            vec!["0".into(), "1".into()],
            vec![vec![0.1, 0.9], vec![0.9, 0.1]],
            1.0,
        )],
    )
    .unwrap()
}

#[test]
fn criterion_08_tightness_trend() {
    let alphas = [0.1, 0.05, 0.01, 1e-3, 1e-4];
    let table = tightness_sweep(&bsc(), &alphas, TiePolicy::LowestIndex, &OptOptions::default()).unwrap();
    let ratios: Vec<f64> = table.rows.iter().map(|r| r.ratio).collect();
    let pass = report(
        "8",
        table.complete
            && ratios.len() == alphas.len()
            && ratios.iter().all(|&r| r >= 1.0 - 1e-12)
            && ratios[ratios.len() - 1] <= ratios[0] + 0.05,
        format!(
            "ratios {:?} (opt {:?}, surrogate opt {:?})",
            ratios.iter().map(|r| format!("{r:.3}")).collect::<Vec<_>>(),
            table.rows.iter().map(|r| r.opt).collect::<Vec<_>>(),
            table.rows.iter().map(|r| r.surrogate_opt).collect::<Vec<_>>()
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_09_monte_carlo_consistency() {
    let inst = bsc();
    let plan = QueryPlan::new(vec![6]);
    let exact = exact_errors(&inst, &plan, DEFAULT_PROFILE_BUDGET).unwrap().lowest_index[0];
    // independent closed form: four or more flips out of six
    let closed: f64 = (4..=6u32)
        .map(|k| {
            let c = [1.0, 6.0, 15.0, 20.0, 15.0, 6.0, 1.0][k as usize];
            c * 0.1f64.powi(k as i32) * 0.9f64.powi(6 - k as i32)
        })
        .sum();
    let big = simulate_error(&inst, &plan, 0, 2_000_000, 9, TiePolicy::LowestIndex).unwrap();
    let z = (big.estimate - exact).abs() / big.std_error;
    let runs = 100;
    let covered = (0..runs)
        .filter(|&i| {
            let e = simulate_error(&inst, &plan, 0, 20_000, 10_000 + i, TiePolicy::LowestIndex).unwrap();
            let (lo, hi) = wilson_interval(e.errors, e.trials, Z95);
            lo <= exact && exact <= hi
        })
        .count();
    let pass = report(
        "9",
        (exact - closed).abs() < 1e-15 && z <= 3.0 && covered >= 90,
        format!(
            "exact {exact:.6e}, estimate {:.6e} ({z:.2} standard errors), Wilson coverage {covered}/{runs}",
            big.estimate
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_10_constants_audit() {
    let mut rng = ChaCha8Rng::seed_from_u64(1010);
    let mut failures = Vec::new();
    let mut bounds_checked = 0usize;
    let mut oracle_skipped = 0usize;
    let eps = 0.5;
    let solve = SolveOptions {
        oracle_check: false,
        ..SolveOptions::default()
    };
    for (i, inst) in suite().iter().enumerate() {
        let c = derive_constants(inst, eps).unwrap();
        for v in c.invariant_violations() {
            failures.push(format!("instance {i}: {v}"));
        }
        let pairs = inst.pairs();
        for _ in 0..5 {
            let plan = random_plan(&mut rng, inst.num_models(), c.n_max);
            let point: Vec<f64> = pairs.iter().map(|_| rng.random::<f64>()).collect();
            let rw = round_weights(inst, &c, &point).unwrap();
            for p in 0..pairs.len() {
                let exact: f64 = (0..inst.num_models())
                    .map(|m| plan.get(m) as f64 * rw.exact[m][p])
                    .sum();
                let rounded: f64 = (0..inst.num_models())
                    .map(|m| plan.get(m) as f64 * rw.rounded[m][p] as f64)
                    .sum::<f64>()
                    * c.delta_round;
                if !(rounded <= exact + 1e-12 && exact < rounded + (1.0 + eps).ln()) {
                    failures.push(format!("instance {i}: rounding sandwich {rounded} {exact}"));
                }
            }
            for &(y, z) in &pairs {
                let (s, t) = (rng.random::<f64>(), rng.random::<f64>());
                let a = pairwise_proxy_log(inst, &plan, y, z, s).unwrap();
                let b = pairwise_proxy_log(inst, &plan, y, z, t).unwrap();
                if (a - b).abs() > c.lambda * (s - t).abs() + 1e-9 {
                    failures.push(format!("instance {i}: Lipschitz at ({s}, {t})"));
                }
                let s = c.delta_margin + (1.0 - 2.0 * c.delta_margin) * rng.random::<f64>();
                let base = pairwise_proxy_log(inst, &plan, y, z, s).unwrap();
                for n in 1..=5u32 {
                    let bigger = &plan + &QueryPlan::uniform(inst.num_models(), n);
                    let v = pairwise_proxy_log(inst, &bigger, y, z, s).unwrap();
                    if v > n as f64 * c.theta.ln() + base + 1e-9 {
                        failures.push(format!("instance {i}: contraction n={n} at s={s}"));
                    }
                }
            }
        }
        if let Some(lb) = c.cost_lower_bound(inst) {
            let cert = run_afptas_with(inst, eps, &solve).unwrap();
            bounds_checked += 1;
            if cert.cost < lb - 1e-9 {
                failures.push(format!(
                    "instance {i}: solver cost {} below lower bound {lb}",
                    cert.cost
                ));
            }
            if inst.num_labels() == 2 {
                match exact_opt(inst, Problem::Surrogate, &OptOptions::default()) {
                    Ok(opt) => {
                        bounds_checked += 1;
                        if opt.cost < lb - 1e-9 {
                            failures.push(format!(
                                "instance {i}: surrogate optimum {} below lower bound {lb}",
                                opt.cost
                            ));
                        }
                    }
                    Err(Error::Budget { .. }) => oracle_skipped += 1,
                    Err(e) => failures.push(format!("instance {i}: {e}")),
                }
            }
        }
    }
    let pass = report(
        "10",
        failures.is_empty(),
        format!(
            "constant invariants, rounding sandwich, Lipschitz, contraction on {SUITE_SIZE} instances; {bounds_checked} feasible costs above the lower bound ({oracle_skipped} oracle runs over budget); {} violations",
            failures.len()
        ),
    );
    assert!(pass, "{:?}", &failures[..failures.len().min(10)]);
}
