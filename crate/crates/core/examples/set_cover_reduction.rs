//! Encode set cover as a query design instance and check plan by plan.

use query_design::hardness::{reduce, verify_equivalence, ReductionParams, SetCoverInstance};
use query_design::likelihood::TiePolicy;

fn main() -> query_design::Result<()> {
    let text = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/data/setcover.json"))?;
    let sc = SetCoverInstance::from_json_str(&text)?;
    let params = ReductionParams::new(0.1);
    let inst = reduce(&sc, &params)?;
    println!("{} labels, {} models", inst.num_labels(), inst.num_models());
    let report = verify_equivalence(&sc, &params, TiePolicy::LowestIndex)?;
    println!("min cover {:?} weight {}", report.min_cover, report.min_cover_weight);
    println!(
        "{} of {} set plans disagree with coverage",
        report.mismatches.len(),
        report.plans.len()
    );
    for m in &report.mismatches {
        println!("  sets {:?}: covers {} but errors {:?}", m.sets, m.covers, m.errors);
    }
    println!(
        "unrestricted optimum: plan {} cost {}",
        report.unrestricted_opt.plan, report.unrestricted_opt.cost
    );
    Ok(())
}
