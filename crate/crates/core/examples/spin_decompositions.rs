//! Projective decompositions of a spin-half and the logic of their projectors.

use qhist::framework::{self, Conjunction, ProjectiveDecomposition};
use qhist::linalg::{commutator, sigma_x, sigma_y, sigma_z, Tolerance};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tol = Tolerance::default();
    let x = ProjectiveDecomposition::from_observable(&sigma_x(), &tol)?;
    let y = ProjectiveDecomposition::from_observable(&sigma_y(), &tol)?;
    let z = ProjectiveDecomposition::from_observable(&sigma_z(), &tol)?;

    for (name, d) in [("sigma_x", &x), ("sigma_y", &y), ("sigma_z", &z)] {
        println!("{name}: outcomes {:?}", d.labels());
    }

    let up_x = x.projector("+1").unwrap();
    let up_y = y.projector("+1").unwrap();
    println!("\n|[P(+x), P(+y)]|_max = {}", commutator(up_x, up_y)?.max_abs());
    match framework::conjunction(up_x, up_y, &tol)? {
        Conjunction::Defined(_) => println!("+x AND +y is a property"),
        Conjunction::Undefined => println!("+x AND +y is meaningless: the projectors do not commute"),
    }

    let not_up = framework::negation(up_x, &tol)?;
    println!(
        "NOT +x equals P(-x): {}",
        not_up.approx_eq(x.projector("-1").unwrap(), 1e-12)
    );

    let compat = framework::decompositions_compatible(&x, &z, &tol)?;
    println!("\nsigma_x and sigma_z frameworks compatible: {}", compat.compatible);
    println!(
        "refining sigma_x with itself: {:?}",
        framework::refine(&x, &x, &tol)?.labels()
    );
    Ok(())
}
