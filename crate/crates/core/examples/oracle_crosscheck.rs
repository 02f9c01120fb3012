//! Chain-ket probabilities against an independent sequential Born-rule
//! simulation, plus the additivity scan on inconsistent families.

use qhist::linalg::Tolerance;
use qhist::oracle::{cross_check, exhaustive_additivity_scan};
use qhist::sample::random_family;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let tol = Tolerance::default();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    let mut histories = 0;
    let mut inconsistent = 0;
    for dim in 2..=4 {
        for slots in 2..=3 {
            for _ in 0..10 {
                let family = random_family(dim, slots, &mut rng, &tol);
                let check = cross_check(&family, |f, h| f.history_probability(h))?;
                worst = worst.max(check.max_discrepancy);
                histories += check.histories;
                if !family.consistency_check(&tol).consistent {
                    inconsistent += 1;
                    if inconsistent == 1 {
                        let violations = exhaustive_additivity_scan(&family, &tol)?;
                        println!("first inconsistent family (dim {dim}, {slots} slots):");
                        for v in violations.iter().take(3) {
                            println!(
                                "  merge {}: {:.6} vs {:.6}",
                                v.context.join(","),
                                v.merged_probability,
                                v.fine_sum
                            );
                        }
                    }
                }
            }
        }
    }
    println!("{histories} histories checked, max discrepancy {worst:.2e}, {inconsistent} of 60 families inconsistent");
    Ok(())
}
