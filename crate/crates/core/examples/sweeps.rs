//! Tightness of the surrogate on one instance, and solver ratios on many.

use query_design::afptas::SolveOptions;
use query_design::exact::OptOptions;
use query_design::experiments::{guarantee_csv, guarantee_sweep, tightness_sweep, InstanceFamily};
use query_design::likelihood::TiePolicy;
use query_design::Instance;

fn main() -> query_design::Result<()> {
    let inst = Instance::load(concat!(env!("CARGO_MANIFEST_DIR"), "/data/bsc.json"))?;
    let table = tightness_sweep(
        &inst,
        &[0.1, 1e-2, 1e-3, 1e-4],
        TiePolicy::LowestIndex,
        &OptOptions::default(),
    )?;
    print!("{}", table.to_csv());
    let rows = guarantee_sweep(1, &InstanceFamily::default(), 5, &[0.5], &SolveOptions::default())?;
    print!("{}", guarantee_csv(&rows));
    Ok(())
}
