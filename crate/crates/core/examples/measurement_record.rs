//! A detector records which basis state a system was in. Within the family
//! that contains the system states, the pointer reading at t2 determines the
//! state at t1. A family that omits them says nothing about it.

use qhist::linalg::Tolerance;
use qhist::sample::MeasurementModel;
use qhist::stablefacts::{conditional_probability, information_preserved, Fact, FactQuery, FactsError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tol = Tolerance::default();
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for d in 2..=4 {
        let model = MeasurementModel::random(d, &mut rng);
        let fam1 = model.fam1(&tol);
        println!(
            "system dimension {d}: fam1 consistent = {}",
            fam1.consistency_check(&tol).consistent
        );
        for i in 1..=d {
            let row: Vec<String> = (1..=d)
                .map(|j| {
                    let q = FactQuery {
                        event: Fact::label("t1", format!("s{i}")),
                        condition: Fact::label("t2", format!("M{j}")),
                    };
                    format!("{:.3}", conditional_probability(&fam1, &q, &tol).unwrap())
                })
                .collect();
            println!("  P(s{i} | M_j) = [{}]", row.join(", "));
        }
        println!(
            "  t1 record preserved at t2: {}",
            information_preserved(&fam1, "t1", "t2", &tol)?
        );

        let fam2 = model.fam2(&tol);
        let q = FactQuery {
            event: Fact::label("t1", "s1"),
            condition: Fact::label("t2", "M1"),
        };
        match conditional_probability(&fam2, &q, &tol) {
            Err(FactsError::UnknownLabel { .. }) => println!("  fam2: s1 at t1 is not part of the family"),
            other => println!("  fam2: unexpected {other:?}"),
        }
    }
    Ok(())
}
