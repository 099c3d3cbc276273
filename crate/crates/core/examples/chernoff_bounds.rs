//! Affinities, optimized tilts and the per-label surrogate bound.

use query_design::chernoff::{affinity, is_surrogate_feasible, optimize_tilt, DEFAULT_TILT_TOL};
use query_design::{Instance, QueryPlan};

fn main() -> query_design::Result<()> {
    let inst = Instance::load(concat!(env!("CARGO_MANIFEST_DIR"), "/data/triage.json"))?;
    for m in 0..inst.num_models() {
        let at_half = affinity(&inst, m, 0, 2, 0.5)?;
        println!(
            "{}: affinity(benign, malicious, 1/2) = {at_half:.4}",
            inst.model(m).name()
        );
    }
    let plan = QueryPlan::new(vec![4, 2, 1]);
    let tilt = optimize_tilt(&inst, &plan, 0, 2, DEFAULT_TILT_TOL)?;
    println!("best tilt {:.4}, log proxy {:.4}", tilt.s, tilt.log_value);
    let report = is_surrogate_feasible(&inst, &plan, DEFAULT_TILT_TOL)?;
    for (label, bound) in inst.labels().iter().zip(report.values()) {
        println!("{label:>10}: bound {bound:.4e}");
    }
    println!("plan {plan} feasible: {}", report.feasible);
    Ok(())
}
