//! Calibrate response tables from a labelled log, then validate the result.

use std::fs::File;

use query_design::model::{read_calibration_log, InstanceTemplate};

fn main() -> query_design::Result<()> {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let template = InstanceTemplate::from_json_str(&std::fs::read_to_string(format!("{dir}/template.json"))?)?;
    let records = read_calibration_log(File::open(format!("{dir}/responses.csv"))?)?;
    let inst = template.calibrate(&records, 1.0)?;
    for m in inst.models() {
        println!("{} (cost {}):", m.name(), m.cost());
        for (y, label) in inst.labels().iter().enumerate() {
            let row: Vec<String> = m.row(y).iter().map(|p| format!("{p:.3}")).collect();
            println!("  {label:>4}: {}", row.join(" "));
        }
    }
    let violations = inst.validate();
    println!("valid: {}", violations.is_empty());
    Ok(())
}
