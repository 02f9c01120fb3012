use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qhist::framework::{self, Conjunction, ProjectiveDecomposition};
use qhist::histories::{HistoryFamily, SlotSpec, TimeGrid, DEFAULT_MAX_HISTORIES};
use qhist::linalg::{self, is_projector, ComplexMatrix, Ket, Tolerance};
use qhist::oracle::{cross_check, exhaustive_additivity_scan};
use qhist::sample::{
    columns, commuting_family, decomposition_from_basis, ginibre, random_blocks, random_decomposition, random_family,
    random_hermitian, random_ket, random_unitary, MeasurementModel,
};
use qhist::stablefacts::{
    check_compatibility, combine, conditional_probability, event_probability, Fact, FactQuery, ObserverRecord,
};

fn tol() -> Tolerance {
    Tolerance::default()
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Two observers whose slots are all coarse-grainings of one shared basis,
/// with no evolution: compatible, and every family involved is consistent.
fn shared_basis_observers(dim: usize, slots: usize, r: &mut ChaCha8Rng) -> (ObserverRecord, ObserverRecord) {
    let basis = columns(&random_unitary(dim, r));
    let initial = random_ket(dim, r);
    let observer = |name: &str, r: &mut ChaCha8Rng| {
        let specs = (0..slots)
            .map(|_| SlotSpec::Decomposition(decomposition_from_basis(&basis, &random_blocks(dim, r), &tol())))
            .collect();
        let family = HistoryFamily::build(
            initial.clone(),
            TimeGrid::numbered(slots).unwrap(),
            vec![ComplexMatrix::identity(dim); slots],
            specs,
            &tol(),
            DEFAULT_MAX_HISTORIES,
        )
        .unwrap();
        ObserverRecord::new(name, family)
    };
    let a = observer("A", r);
    let b = observer("B", r);
    (a, b)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eigenprojectors_reconstruct_and_complete(seed in any::<u64>(), dim in 1usize..=5) {
        let h = random_hermitian(dim, &mut rng(seed));
        let eig = linalg::hermitian_eigenprojectors(&h, &tol()).unwrap();
        let mut recon = ComplexMatrix::zeros(dim, dim);
        let mut total = ComplexMatrix::zeros(dim, dim);
        for e in &eig {
            prop_assert!(is_projector(&e.projector, &tol()).unwrap());
            recon = &recon + &e.projector.scale(linalg::C64::new(e.value, 0.0));
            total = &total + &e.projector;
        }
        prop_assert!(recon.max_abs_diff(&h) <= 1e-9);
        prop_assert!(total.max_abs_diff(&ComplexMatrix::identity(dim)) <= 1e-9);
        prop_assert!(eig.windows(2).all(|w| w[0].value < w[1].value));
    }

    #[test]
    fn kron_mixed_product(seed in any::<u64>(), m in 1usize..=3, n in 1usize..=3) {
        let mut r = rng(seed);
        let (a, c) = (ginibre(m, m, &mut r), ginibre(m, m, &mut r));
        let (b, d) = (ginibre(n, n, &mut r), ginibre(n, n, &mut r));
        let lhs = &a.kron(&b) * &c.kron(&d);
        let rhs = (&a * &c).kron(&(&b * &d));
        prop_assert!(lhs.max_abs_diff(&rhs) <= 1e-9 * (1.0 + rhs.max_abs()));
    }

    #[test]
    fn commuting_projectors_multiply_to_projectors(seed in any::<u64>(), dim in 2usize..=5) {
        let mut r = rng(seed);
        let basis = columns(&random_unitary(dim, &mut r));
        let d1 = decomposition_from_basis(&basis, &random_blocks(dim, &mut r), &tol());
        let d2 = decomposition_from_basis(&basis, &random_blocks(dim, &mut r), &tol());
        for p in d1.projectors() {
            for q in d2.projectors() {
                prop_assert!(linalg::commutator(p, q).unwrap().max_abs() <= 1e-9);
                prop_assert!(is_projector(&(p * q), &tol()).unwrap());
            }
        }
    }

    #[test]
    fn refinement_is_a_common_refinement(seed in any::<u64>(), dim in 2usize..=5) {
        let mut r = rng(seed);
        let basis = columns(&random_unitary(dim, &mut r));
        let a = decomposition_from_basis(&basis, &random_blocks(dim, &mut r), &tol());
        let b = decomposition_from_basis(&basis, &random_blocks(dim, &mut r), &tol());
        let refined = framework::refine(&a, &b, &tol()).unwrap();
        prop_assert!(refined.len() <= a.len() * b.len());
        prop_assert!(refined.len() >= a.len().max(b.len()));
        // each element lies under exactly one element of each factor
        for p in refined.projectors() {
            for parent in [&a, &b] {
                let under = parent.projectors().iter().filter(|q| (*q * p).max_abs_diff(p) <= 1e-9).count();
                prop_assert_eq!(under, 1);
            }
        }
        // refining with the trivial decomposition changes nothing but labels
        let same = framework::refine(&a, &ProjectiveDecomposition::trivial(dim), &tol()).unwrap();
        prop_assert_eq!(same.projectors(), a.projectors());
    }

    #[test]
    fn conjunction_is_symmetric(seed in any::<u64>(), dim in 2usize..=4) {
        let mut r = rng(seed);
        let d1 = random_decomposition(dim, &mut r, &tol());
        let d2 = if r.random_bool(0.5) {
            d1.clone()
        } else {
            random_decomposition(dim, &mut r, &tol())
        };
        for p in d1.projectors() {
            for q in d2.projectors() {
                let pq = framework::conjunction(p, q, &tol()).unwrap();
                let qp = framework::conjunction(q, p, &tol()).unwrap();
                match (pq, qp) {
                    (Conjunction::Defined(x), Conjunction::Defined(y)) => prop_assert!(x.max_abs_diff(&y) <= 1e-9),
                    (Conjunction::Undefined, Conjunction::Undefined) => {}
                    (x, y) => prop_assert!(false, "asymmetric conjunction: {:?} vs {:?}", x.is_defined(), y.is_defined()),
                }
            }
        }
    }

    #[test]
    fn chain_kets_sum_to_the_evolved_state(seed in any::<u64>(), dim in 2usize..=4, slots in 1usize..=3) {
        let f = random_family(dim, slots, &mut rng(seed), &tol());
        let mut evolved = f.initial().clone();
        for u in f.evolution_matrices() {
            evolved = u.apply(&evolved).unwrap();
        }
        let sum = f.chain_kets().into_iter().fold(Ket::zero(dim), |acc, k| {
            Ket::new(acc.amplitudes().iter().zip(k.amplitudes()).map(|(a, b)| a + b).collect()).unwrap()
        });
        prop_assert!(sum.max_abs_diff(&evolved) <= 1e-9);
    }

    #[test]
    fn consistent_families_are_normalized_and_additive(seed in any::<u64>(), dim in 2usize..=4, slots in 2usize..=3) {
        let f = commuting_family(dim, slots, &mut rng(seed), &tol());
        let report = f.consistency_check(&tol());
        prop_assert!(report.consistent);
        prop_assert!((report.probability_sum() - 1.0).abs() <= 1e-9);
        prop_assert!(exhaustive_additivity_scan(&f, &tol()).unwrap().is_empty());
    }

    #[test]
    fn additivity_failures_match_real_overlaps(seed in any::<u64>(), dim in 2usize..=4) {
        // with two slots every single-slot merge joins exactly one pair of
        // histories, so a violation exists iff such a pair has a real overlap
        let f = random_family(dim, 2, &mut rng(seed), &tol());
        let report = f.consistency_check(&tol());
        let limit = 10.0 * tol().cons();
        let hs = f.histories();
        let mut real_overlap = false;
        for a in 0..hs.len() {
            for b in a + 1..hs.len() {
                let differ = hs[a].outcomes().iter().zip(hs[b].outcomes()).filter(|(x, y)| x != y).count();
                if differ == 1 && 2.0 * report.gram[(a, b)].re.abs() > limit {
                    real_overlap = true;
                }
            }
        }
        let violations = exhaustive_additivity_scan(&f, &tol()).unwrap();
        prop_assert_eq!(!violations.is_empty(), real_overlap);
        for v in &violations {
            prop_assert!((v.merged_probability - v.fine_sum - v.discrepancy).abs() <= 1e-12);
        }
    }

    #[test]
    fn oracle_matches_chain_kets(seed in any::<u64>(), dim in 2usize..=4, slots in 1usize..=3) {
        let f = random_family(dim, slots, &mut rng(seed), &tol());
        let check = cross_check(&f, |f, h| f.history_probability(h)).unwrap();
        prop_assert_eq!(check.histories, f.histories().len());
        prop_assert!(check.max_discrepancy <= 1e-12, "{}", check.max_discrepancy);
    }

    #[test]
    fn gram_matrix_is_unitarily_invariant(seed in any::<u64>(), dim in 2usize..=4, slots in 1usize..=3) {
        let mut r = rng(seed);
        let f = random_family(dim, slots, &mut r, &tol());
        let v = random_unitary(dim, &mut r);
        let vd = v.dagger();
        let moved = HistoryFamily::build(
            v.apply(f.initial()).unwrap(),
            f.grid().clone(),
            f.evolution_matrices().iter().map(|u| &(&v * u) * &vd).collect(),
            f.slots().iter().map(|d| SlotSpec::Decomposition(d.conjugated(&vd))).collect(),
            &tol(),
            DEFAULT_MAX_HISTORIES,
        )
        .unwrap();
        let g0 = f.consistency_check(&tol()).gram;
        let g1 = moved.consistency_check(&tol()).gram;
        prop_assert!(g0.max_abs_diff(&g1) <= 1e-9);
    }

    #[test]
    fn compatibility_is_symmetric(seed in any::<u64>(), dim in 2usize..=4) {
        let mut r = rng(seed);
        let (a, b) = if r.random_bool(0.5) {
            shared_basis_observers(dim, 2, &mut r)
        } else {
            // same initial state and dynamics, independent slot bases
            let f = random_family(dim, 2, &mut r, &tol());
            let other = HistoryFamily::build(
                f.initial().clone(),
                f.grid().clone(),
                f.evolution_matrices(),
                (0..2).map(|_| SlotSpec::Decomposition(random_decomposition(dim, &mut r, &tol()))).collect(),
                &tol(),
                DEFAULT_MAX_HISTORIES,
            )
            .unwrap();
            (ObserverRecord::new("A", f), ObserverRecord::new("B", other))
        };
        let ab = check_compatibility(&a, &b, &tol()).unwrap();
        let ba = check_compatibility(&b, &a, &tol()).unwrap();
        prop_assert_eq!(ab.verdict, ba.verdict);
        prop_assert_eq!(&ab.failing, &ba.failing);
        for (x, y) in ab.per_slot.iter().zip(&ba.per_slot) {
            prop_assert!((x.max_residual - y.max_residual).abs() <= 1e-12);
        }
        // a family is compatible with itself exactly when it is consistent
        let aa = check_compatibility(&a, &a, &tol()).unwrap();
        prop_assert!(aa.per_slot.iter().all(|s| s.commutes));
        prop_assert_eq!(aa.failing.is_none(), a.family().consistency_check(&tol()).consistent);
    }

    #[test]
    fn combined_family_marginalizes(seed in any::<u64>(), dim in 2usize..=4) {
        let (a, b) = shared_basis_observers(dim, 2, &mut rng(seed));
        let joint = combine(&a, &b, &tol()).unwrap();
        for observer in [&a, &b] {
            let f = observer.family();
            for (k, slot) in f.slots().iter().enumerate() {
                let time = f.grid().slot_label(k).to_string();
                for (label, p) in slot.iter() {
                    let own = event_probability(f, &Fact::label(time.clone(), label), &tol()).unwrap();
                    let marginal = event_probability(&joint, &Fact::projector(time.clone(), p.clone()), &tol()).unwrap();
                    prop_assert!((own - marginal).abs() <= 1e-9, "{own} vs {marginal}");
                }
            }
        }
    }

    #[test]
    fn measurement_records_give_kronecker_delta(seed in any::<u64>(), d in 2usize..=4) {
        let model = MeasurementModel::random(d, &mut rng(seed));
        let fam1 = model.fam1(&tol());
        for i in 1..=d {
            for j in 1..=d {
                let q = FactQuery {
                    event: Fact::label("t1", format!("s{i}")),
                    condition: Fact::label("t2", format!("M{j}")),
                };
                let p = conditional_probability(&fam1, &q, &tol()).unwrap();
                let expected = if i == j { 1.0 } else { 0.0 };
                prop_assert!((p - expected).abs() <= 1e-9, "P(s{i}|M{j}) = {p}");
            }
        }
    }
}
