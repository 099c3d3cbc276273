//! Exact MAP error by profile enumeration, and the brute-force optimum.

use query_design::exact::{exact_errors, exact_opt, OptOptions, Problem, DEFAULT_PROFILE_BUDGET};
use query_design::{Instance, QueryPlan};

fn main() -> query_design::Result<()> {
    let inst = Instance::load(concat!(env!("CARGO_MANIFEST_DIR"), "/data/bsc.json"))?;
    for n in [1, 3, 6] {
        let e = exact_errors(&inst, &QueryPlan::new(vec![n]), DEFAULT_PROFILE_BUDGET)?;
        println!("r = {n}: P_e = {:?} (ties to lowest index)", e.lowest_index);
    }
    for problem in [Problem::True, Problem::Surrogate] {
        let opt = exact_opt(&inst, problem, &OptOptions::default())?;
        println!("{problem:?} optimum: plan {} cost {}", opt.plan, opt.cost);
    }
    Ok(())
}
