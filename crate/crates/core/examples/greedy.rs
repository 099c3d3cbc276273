//! Cost-effectiveness greedy against the solver on an instance built to trap it.

use query_design::afptas::run_afptas;
use query_design::chernoff::DEFAULT_TILT_TOL;
use query_design::experiments::{greedy_baseline, greedy_trap_instance};

fn main() -> query_design::Result<()> {
    let inst = greedy_trap_instance();
    let greedy = greedy_baseline(&inst, DEFAULT_TILT_TOL)?;
    let cert = run_afptas(&inst, 0.5)?;
    println!("greedy: plan {} cost {}", greedy.plan, greedy.cost);
    println!("solver: plan {} cost {}", cert.plan, cert.cost);
    Ok(())
}
