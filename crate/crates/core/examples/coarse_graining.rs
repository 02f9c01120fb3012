//! Merging outcomes at one time. For the z, x, z family the fine-grained
//! weights fail to add up; erasing the t1 distinction restores consistency.

use qhist::histories::{build_family, identity_evolutions, SlotSpec, TimeGrid};
use qhist::linalg::{sigma_x, sigma_z, Ket, Tolerance};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tol = Tolerance::default();
    let fine = build_family(
        Ket::basis(2, 0),
        TimeGrid::numbered(2)?,
        identity_evolutions(2, 2),
        vec![SlotSpec::Observable(sigma_x()), SlotSpec::Observable(sigma_z())],
        &tol,
    )?;
    let fine_report = fine.consistency_check(&tol);
    let up_sum: f64 = fine
        .histories()
        .iter()
        .zip(&fine_report.probabilities)
        .filter(|(h, _)| h.labels()[1] == "+1")
        .map(|(_, p)| p)
        .sum();

    let coarse = fine.coarse_grain(0, &[vec!["-1", "+1"]], &tol)?;
    let coarse_report = coarse.consistency_check(&tol);
    println!("fine family consistent: {}", fine_report.consistent);
    println!("coarse family consistent: {}", coarse_report.consistent);
    for (h, p) in coarse.histories().iter().zip(&coarse_report.probabilities) {
        println!("  {h}: {p}");
    }
    let merged = coarse.history(&["-1∨+1", "+1"]).unwrap();
    println!(
        "P(+z at t2): merged {} vs sum of fine weights {}",
        coarse.history_probability(merged)?,
        up_sum
    );
    Ok(())
}
