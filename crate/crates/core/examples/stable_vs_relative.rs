//! Stable and relative facts for two observers, loaded from the scenario
//! gallery next to this file.

use std::path::Path;

use qhist::linalg::Tolerance;
use qhist::scenario::{parse_scenario, resolve};
use qhist::stablefacts::{check_compatibility, combine, FailingCondition};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tol = Tolerance::default();
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("examples");
    for file in ["stable_facts.json", "relative_facts.json"] {
        let scenario = parse_scenario(&std::fs::read(dir.join(file))?)?;
        let observers = resolve(&scenario)?;
        let report = check_compatibility(&observers[0], &observers[1], &tol)?;
        println!(
            "{}: {} vs {} -> {}",
            scenario.name,
            report.first,
            report.second,
            report.verdict.as_str()
        );
        for slot in &report.per_slot {
            println!("  {}: max commutator entry {:.3e}", slot.time, slot.max_residual);
        }
        match report.failing {
            Some(FailingCondition::Commutation { time }) => {
                println!("  observers disagree about which properties exist at {time}")
            }
            Some(FailingCondition::ProductConsistency) => println!("  joint histories interfere"),
            None => {
                let joint = combine(&observers[0], &observers[1], &tol)?;
                println!("  shared family has {} histories", joint.histories().len());
            }
        }
    }
    Ok(())
}
