//! Seeded Monte Carlo estimate next to the exact error.

use query_design::exact::{exact_errors, DEFAULT_PROFILE_BUDGET};
use query_design::likelihood::TiePolicy;
use query_design::montecarlo::simulate_error;
use query_design::{Instance, QueryPlan};

fn main() -> query_design::Result<()> {
    let inst = Instance::load(concat!(env!("CARGO_MANIFEST_DIR"), "/data/bsc.json"))?;
    let plan = QueryPlan::new(vec![6]);
    let exact = exact_errors(&inst, &plan, DEFAULT_PROFILE_BUDGET)?.lowest_index[0];
    let mc = simulate_error(&inst, &plan, 0, 500_000, 42, TiePolicy::LowestIndex)?;
    println!("exact    {exact:.6}");
    println!(
        "estimate {:.6} +- {:.6}, 95% Wilson [{:.6}, {:.6}]",
        mc.estimate, mc.std_error, mc.wilson_low, mc.wilson_high
    );
    Ok(())
}
