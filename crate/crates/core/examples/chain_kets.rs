//! Chain kets and the Gram matrix of the z, x, z family: spin up along z,
//! then sigma_x at t1 and sigma_z at t2.

use qhist::histories::{build_family, identity_evolutions, SlotSpec, TimeGrid};
use qhist::linalg::{sigma_x, sigma_z, Ket, Tolerance};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tol = Tolerance::default();
    let family = build_family(
        Ket::basis(2, 0),
        TimeGrid::new(["t0", "t1", "t2"])?,
        identity_evolutions(2, 2),
        vec![SlotSpec::Observable(sigma_x()), SlotSpec::Observable(sigma_z())],
        &tol,
    )?;

    for h in family.histories() {
        let ket = family.chain_ket(h)?;
        let amps: Vec<String> = ket.amplitudes().iter().map(|a| format!("{:+.3}", a.re)).collect();
        println!("{h}: |Y> = [{}], <Y|Y> = {}", amps.join(", "), ket.norm_sqr());
    }

    let report = family.consistency_check(&tol);
    let (a, b) = report.worst_pair.unwrap();
    println!(
        "\nconsistent: {} (max |<Y_a|Y_b>| = {} between {} and {})",
        report.consistent,
        report.max_offdiag,
        family.histories()[a],
        family.histories()[b]
    );

    // the classic textbook case: repeating sigma_x is always consistent
    let xx = build_family(
        Ket::basis(2, 0),
        TimeGrid::numbered(2)?,
        identity_evolutions(2, 2),
        vec![SlotSpec::Observable(sigma_x()), SlotSpec::Observable(sigma_x())],
        &tol,
    )?;
    println!("x, x family consistent: {}", xx.consistency_check(&tol).consistent);
    Ok(())
}
