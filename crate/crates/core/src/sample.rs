//! Random instances for property tests and demonstrations.
//!
//! All generators take a caller-provided RNG, so seeded runs are reproducible.

use nalgebra::DMatrix;
use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::framework::ProjectiveDecomposition;
use crate::histories::{HistoryFamily, SlotSpec, TimeGrid, DEFAULT_MAX_HISTORIES};
use crate::linalg::{ComplexMatrix, Ket, Tolerance, C64};
use crate::scenario::{
    EvolutionSpec, InitialState, LabeledProjector, MeasurementSpec, ObservableSpec, ObserverSpec, Scenario,
    ToleranceOverrides, FORMAT_VERSION, PRESET_NAMES,
};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
}

/// Matrix with independent standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    let data = (0..rows * cols).map(|_| gaussian(rng)).collect();
    ComplexMatrix::new(rows, cols, data).expect("finite samples")
}

/// Unitary from the QR factorization of a Ginibre matrix.
pub fn random_unitary<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let g = ginibre(dim, dim, rng);
    let q = DMatrix::from_row_slice(dim, dim, g.entries()).qr().q();
    let data = (0..dim)
        .flat_map(|r| (0..dim).map(move |c| (r, c)))
        .map(|(r, c)| q[(r, c)])
        .collect();
    ComplexMatrix::new(dim, dim, data).expect("finite unitary")
}

pub fn random_hermitian<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> ComplexMatrix {
    let g = ginibre(dim, dim, rng);
    (&g + &g.dagger()).scale(C64::new(0.5, 0.0))
}

/// Normalized random ket.
pub fn random_ket<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Ket {
    let v = Ket::new((0..dim).map(|_| gaussian(rng)).collect()).expect("finite samples");
    v.normalized().expect("nonzero sample")
}

/// Columns of `u` as kets.
pub fn columns(u: &ComplexMatrix) -> Vec<Ket> {
    (0..u.cols())
        .map(|c| Ket::new((0..u.rows()).map(|r| u[(r, c)]).collect()).expect("finite"))
        .collect()
}

/// Random partition of `0..n` into between 1 and `n` nonempty blocks.
pub fn random_blocks<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let blocks = rng.random_range(1..=n);
    let mut cuts: Vec<usize> = (1..n).collect();
    cuts.shuffle(rng);
    let mut cuts: Vec<usize> = cuts.into_iter().take(blocks - 1).collect();
    cuts.sort_unstable();
    let mut out = Vec::with_capacity(blocks);
    let mut start = 0;
    for c in cuts.into_iter().chain(std::iter::once(n)) {
        out.push(idx[start..c].to_vec());
        start = c;
    }
    out
}

/// Decomposition built by grouping the vectors of an orthonormal basis into
/// blocks; labels are `o0, o1, ...`.
pub fn decomposition_from_basis(basis: &[Ket], blocks: &[Vec<usize>], tol: &Tolerance) -> ProjectiveDecomposition {
    let dim = basis[0].dim();
    let projectors = blocks
        .iter()
        .map(|b| {
            b.iter()
                .fold(ComplexMatrix::zeros(dim, dim), |acc, &i| &acc + &basis[i].outer())
        })
        .collect();
    let labels = (0..blocks.len()).map(|i| format!("o{i}")).collect();
    ProjectiveDecomposition::new(projectors, labels, tol).expect("orthonormal basis gives a decomposition")
}

pub fn random_decomposition<R: Rng + ?Sized>(dim: usize, rng: &mut R, tol: &Tolerance) -> ProjectiveDecomposition {
    let basis = columns(&random_unitary(dim, rng));
    let blocks = random_blocks(dim, rng);
    decomposition_from_basis(&basis, &blocks, tol)
}

/// Random family: random initial ket, Haar-like evolutions and independent
/// random slot decompositions. Usually inconsistent for two or more slots.
pub fn random_family<R: Rng + ?Sized>(dim: usize, slots: usize, rng: &mut R, tol: &Tolerance) -> HistoryFamily {
    let initial = random_ket(dim, rng);
    let evolutions = (0..slots).map(|_| random_unitary(dim, rng)).collect();
    let specs = (0..slots)
        .map(|_| SlotSpec::Decomposition(random_decomposition(dim, rng, tol)))
        .collect();
    HistoryFamily::build(
        initial,
        TimeGrid::numbered(slots).unwrap(),
        evolutions,
        specs,
        tol,
        DEFAULT_MAX_HISTORIES,
    )
    .expect("random family is well formed")
}

/// Random family that is consistent by construction: every slot projector,
/// carried forward to the final time by the dynamics, is diagonal in one
/// shared random basis, so all of them commute in the Heisenberg picture.
pub fn commuting_family<R: Rng + ?Sized>(dim: usize, slots: usize, rng: &mut R, tol: &Tolerance) -> HistoryFamily {
    let initial = random_ket(dim, rng);
    let evolutions: Vec<ComplexMatrix> = (0..slots).map(|_| random_unitary(dim, rng)).collect();
    let final_basis = columns(&random_unitary(dim, rng));
    let mut specs = Vec::with_capacity(slots);
    for k in 0..slots {
        // W carries slot k to the last slot: T_n ... T_{k+1}
        let carry = evolutions[k + 1..]
            .iter()
            .fold(ComplexMatrix::identity(dim), |acc, u| u * &acc);
        let heisenberg = decomposition_from_basis(&final_basis, &random_blocks(dim, rng), tol);
        let slot = heisenberg.conjugated(&carry);
        // re-validate after the rotation
        let slot = ProjectiveDecomposition::new(slot.projectors().to_vec(), slot.labels().to_vec(), tol)
            .expect("rotated decomposition stays valid");
        specs.push(SlotSpec::Decomposition(slot));
    }
    HistoryFamily::build(
        initial,
        TimeGrid::numbered(slots).unwrap(),
        evolutions,
        specs,
        tol,
        DEFAULT_MAX_HISTORIES,
    )
    .expect("commuting family is well formed")
}

/// A system of dimension `d` coupled to a detector of dimension `d + 1`
/// (ready state `|M0⟩ = |0⟩`, pointer states `|Mi⟩ = |i⟩`).
///
/// The interaction unitary maps `|s_i⟩|M0⟩ → |s_i⟩|M_i⟩` for a random
/// orthonormal system basis `{s_i}`.
#[derive(Debug, Clone)]
pub struct MeasurementModel {
    pub system_dim: usize,
    pub system_basis: Vec<Ket>,
    /// Initial system state, with weight on every basis vector.
    pub phi0: Ket,
    pub interaction: ComplexMatrix,
}

impl MeasurementModel {
    pub fn random<R: Rng + ?Sized>(system_dim: usize, rng: &mut R) -> Self {
        let d = system_dim;
        let basis = columns(&random_unitary(d, rng));
        // amplitudes bounded away from zero so every pointer reading can occur
        let coeffs: Vec<C64> = (0..d)
            .map(|_| C64::from_polar(rng.random_range(0.3..1.0), rng.random_range(0.0..std::f64::consts::TAU)))
            .collect();
        let phi0 = basis
            .iter()
            .zip(&coeffs)
            .fold(Ket::zero(d), |acc, (s, &c)| {
                Ket::new(
                    acc.amplitudes()
                        .iter()
                        .zip(s.amplitudes())
                        .map(|(a, b)| a + c * b)
                        .collect(),
                )
                .unwrap()
            })
            .normalized()
            .unwrap();
        let interaction = Self::interaction(&basis, rng);
        MeasurementModel {
            system_dim: d,
            system_basis: basis,
            phi0,
            interaction,
        }
    }

    /// `Σ_i |s_i⟩⟨s_i| ⊗ V_i` with `V_i = swap(0, i) (1 ⊕ R_i)` for random
    /// unitaries `R_i` on the span of `|1⟩..|d⟩`.
    fn interaction<R: Rng + ?Sized>(basis: &[Ket], rng: &mut R) -> ComplexMatrix {
        let d = basis.len();
        let m = d + 1;
        let mut total = ComplexMatrix::zeros(d * m, d * m);
        for (i, s) in basis.iter().enumerate() {
            let r = random_unitary(d, rng);
            let mut fixed = ComplexMatrix::zeros(m, m).to_rows();
            fixed[0][0] = C64::new(1.0, 0.0);
            for a in 0..d {
                for b in 0..d {
                    fixed[a + 1][b + 1] = r[(a, b)];
                }
            }
            let fixed = ComplexMatrix::from_rows(&fixed).unwrap();
            let swap = Self::swap(m, 0, i + 1);
            let v = &swap * &fixed;
            total = &total + &s.outer().kron(&v);
        }
        total
    }

    fn swap(m: usize, a: usize, b: usize) -> ComplexMatrix {
        let mut rows = ComplexMatrix::identity(m).to_rows();
        rows.swap(a, b);
        ComplexMatrix::from_rows(&rows).unwrap()
    }

    pub fn detector_dim(&self) -> usize {
        self.system_dim + 1
    }

    pub fn pointer(&self, i: usize) -> Ket {
        Ket::basis(self.detector_dim(), i)
    }

    pub fn initial(&self) -> Ket {
        self.phi0.tensor(&self.pointer(0))
    }

    fn final_slot(&self) -> SlotSpec {
        SlotSpec::Projectors(
            (0..self.system_dim)
                .map(|i| {
                    let p = self.system_basis[i].tensor(&self.pointer(i + 1)).outer();
                    (format!("M{}", i + 1), p)
                })
                .collect(),
        )
    }

    fn family(&self, t1: SlotSpec, tol: &Tolerance) -> HistoryFamily {
        let dim = self.system_dim * self.detector_dim();
        HistoryFamily::build(
            self.initial(),
            TimeGrid::numbered(2).unwrap(),
            vec![ComplexMatrix::identity(dim), self.interaction.clone()],
            vec![t1, self.final_slot()],
            tol,
            DEFAULT_MAX_HISTORIES,
        )
        .expect("measurement family is well formed")
    }

    /// `[φ0⊗M0] ⊙ {[s_i⊗M0]} ⊙ {[s_i⊗M_i]}`, labels `s1..sd` and `M1..Md`
    /// (plus `rest` complements).
    pub fn fam1(&self, tol: &Tolerance) -> HistoryFamily {
        let t1 = SlotSpec::Projectors(
            (0..self.system_dim)
                .map(|i| {
                    (
                        format!("s{}", i + 1),
                        self.system_basis[i].tensor(&self.pointer(0)).outer(),
                    )
                })
                .collect(),
        );
        self.family(t1, tol)
    }

    /// `[φ0⊗M0] ⊙ [φ0⊗M0] ⊙ {[s_i⊗M_i]}`: no `s_i` at `t1`.
    pub fn fam2(&self, tol: &Tolerance) -> HistoryFamily {
        let t1 = SlotSpec::Projectors(vec![("phi0".to_string(), self.initial().outer())]);
        self.family(t1, tol)
    }
}

/// A random well-formed scenario: up to three qubits or a single qudit of
/// dimension up to 4, two to four times, and one to three observers using
/// every observable form.
pub fn random_scenario<R: Rng + ?Sized>(rng: &mut R) -> Scenario {
    let tol = Tolerance::default();
    let qubits = rng.random_bool(0.6);
    let subsystem_dims = if qubits {
        vec![2; rng.random_range(1..=3)]
    } else {
        vec![rng.random_range(2..=4)]
    };
    let dim: usize = subsystem_dims.iter().product();
    let initial_state = if qubits && rng.random_bool(0.5) {
        InitialState::Presets(
            subsystem_dims
                .iter()
                .map(|_| PRESET_NAMES.choose(rng).unwrap().to_string())
                .collect(),
        )
    } else {
        InitialState::Amplitudes(random_ket(dim, rng).amplitudes().to_vec())
    };
    let times: Vec<String> = (0..rng.random_range(2..=4)).map(|i| format!("t{i}")).collect();
    let evolutions = (1..times.len())
        .map(|_| {
            if rng.random_bool(0.5) {
                EvolutionSpec::Identity
            } else {
                EvolutionSpec::Matrix(random_unitary(dim, rng).to_rows())
            }
        })
        .collect();
    let observers = (0..rng.random_range(1..=3))
        .map(|o| {
            let mut measurements = Vec::new();
            for t in &times[1..] {
                if rng.random_bool(0.7) {
                    measurements.push(MeasurementSpec {
                        time: t.clone(),
                        observable: random_observable(&subsystem_dims, rng, &tol),
                    });
                }
            }
            ObserverSpec {
                name: format!("O{}", o + 1),
                measurements,
            }
        })
        .collect();
    let tolerance = rng.random_bool(0.3).then(|| ToleranceOverrides {
        eps_cons: Some(10f64.powi(-rng.random_range(6..=12))),
        eps_comm: rng.random_bool(0.5).then_some(1e-8),
        ..Default::default()
    });
    Scenario {
        format: FORMAT_VERSION,
        name: format!("random-{}", rng.random::<u32>()),
        description: rng.random_bool(0.5).then(|| "generated".to_string()),
        subsystem_dims,
        initial_state,
        times,
        evolutions,
        observers,
        tolerance,
    }
}

fn random_observable<R: Rng + ?Sized>(dims: &[usize], rng: &mut R, tol: &Tolerance) -> ObservableSpec {
    let dim: usize = dims.iter().product();
    let qubits = dims.iter().all(|&d| d == 2);
    match rng.random_range(0..3) {
        0 if qubits => {
            let name = ["sigma_x", "sigma_y", "sigma_z"].choose(rng).unwrap();
            if dims.len() == 1 && rng.random_bool(0.5) {
                ObservableSpec::Named(name.to_string())
            } else {
                ObservableSpec::Named(format!("{name}@{}", rng.random_range(1..=dims.len())))
            }
        }
        1 => ObservableSpec::Hermitian(random_hermitian(dim, rng).to_rows()),
        _ => {
            let d = random_decomposition(dim, rng, tol);
            // drop one element now and then so the rest complement gets exercised
            let keep = if d.len() > 1 && rng.random_bool(0.3) {
                d.len() - 1
            } else {
                d.len()
            };
            ObservableSpec::Projectors(
                d.labels()
                    .iter()
                    .zip(d.projectors())
                    .take(keep)
                    .map(|(label, p)| LabeledProjector {
                        label: label.clone(),
                        matrix: p.to_rows(),
                    })
                    .collect(),
            )
        }
    }
}
