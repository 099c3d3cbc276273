//! Approximate minimum-cost plan with its certificate.

use query_design::afptas::run_afptas;
use query_design::Instance;

fn main() -> query_design::Result<()> {
    let inst = Instance::load(concat!(env!("CARGO_MANIFEST_DIR"), "/data/triage.json"))?;
    for eps in [1.0, 0.5, 0.1] {
        let cert = run_afptas(&inst, eps)?;
        println!(
            "eps {eps}: plan {} cost {} ({:?}, {:?})",
            cert.plan, cert.cost, cert.strategy, cert.guarantee
        );
        println!("  {}", cert.reason);
    }
    Ok(())
}
