//! Families of histories on a discrete time grid.
//!
//! A family is fixed by an initial ket at `t0`, one unitary per interval and
//! one projective decomposition per later time `t1..tn`. A history picks one
//! projector per slot; its chain ket is
//!
//! ```text
//! |Y⟩ = P_n T(t_n, t_{n-1}) ... P_1 T(t_1, t_0) |ψ0⟩
//! ```
//!
//! and its weight is `⟨Y|Y⟩`. Those weights are probabilities only when all
//! chain kets of the family are mutually orthogonal.

use std::fmt;

use thiserror::Error;

use crate::framework::{FrameworkError, ProjectiveDecomposition};
use crate::linalg::{self, ComplexMatrix, Ket, LinalgError, Tolerance, C64};

pub const DEFAULT_MAX_HISTORIES: usize = 1_000_000;

/// Label of the complement projector added to incomplete slots.
pub const REST_LABEL: &str = "rest";

/// Separator used when outcomes of one slot are merged by coarse-graining.
pub const MERGE_SEPARATOR: &str = "∨";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HistoryError {
    #[error("a time grid needs at least two times (t0 and one slot)")]
    GridTooShort,
    #[error("time label `{0}` appears twice")]
    DuplicateTime(String),
    #[error("unknown time `{0}`")]
    UnknownTime(String),
    #[error("time `{0}` is the initial time and carries no slot")]
    InitialTime(String),
    #[error("expected {expected} {what}, got {got}")]
    CountMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("{what}: expected dimension {expected}, got {got}")]
    DimMismatch { what: String, expected: usize, got: usize },
    #[error("initial ket is not normalized (⟨ψ|ψ⟩ = {norm_sqr})")]
    NotNormalized { norm_sqr: f64 },
    #[error("evolution {index} is not unitary")]
    NotUnitaryEvolution { index: usize },
    #[error("slot {slot}: {source}")]
    BadDecomposition {
        slot: usize,
        #[source]
        source: FrameworkError,
    },
    #[error("family would contain {count} histories, cap is {cap}")]
    TooManyHistories { count: u128, cap: usize },
    #[error("history does not belong to this family")]
    UnknownHistory,
    #[error("slot {slot}: merge sets are not a partition ({reason})")]
    NotAPartition { slot: usize, reason: String },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T, E = HistoryError> = std::result::Result<T, E>;

/// Ordered, uniquely labeled times `t0, t1, ..., tn` with `n >= 1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TimeGrid {
    labels: Vec<String>,
}

impl TimeGrid {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Result<Self> {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        if labels.len() < 2 {
            return Err(HistoryError::GridTooShort);
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(HistoryError::DuplicateTime(l.clone()));
            }
        }
        Ok(TimeGrid { labels })
    }

    /// `t0, t1, ..., t{slots}`.
    pub fn numbered(slots: usize) -> Result<Self> {
        Self::new((0..=slots).map(|i| format!("t{i}")))
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn initial(&self) -> &str {
        &self.labels[0]
    }

    pub fn slot_count(&self) -> usize {
        self.labels.len() - 1
    }

    /// Slot index (0 for `t1`) of a time label.
    pub fn slot_of(&self, time: &str) -> Result<usize> {
        match self.labels.iter().position(|l| l == time) {
            Some(0) => Err(HistoryError::InitialTime(time.to_string())),
            Some(i) => Ok(i - 1),
            None => Err(HistoryError::UnknownTime(time.to_string())),
        }
    }

    pub fn slot_label(&self, slot: usize) -> &str {
        &self.labels[slot + 1]
    }
}

/// Unitary evolution over one grid interval.
#[derive(Debug, Clone, PartialEq)]
pub struct Evolution {
    from: String,
    to: String,
    unitary: ComplexMatrix,
}

impl Evolution {
    pub fn from_time(&self) -> &str {
        &self.from
    }

    pub fn to_time(&self) -> &str {
        &self.to
    }

    pub fn unitary(&self) -> &ComplexMatrix {
        &self.unitary
    }
}

/// How a slot's sample space is given to [`build_family`].
#[derive(Debug, Clone, PartialEq)]
pub enum SlotSpec {
    /// No measurement: the sample space `{I}`.
    Trivial,
    /// Hermitian observable, split into eigenprojectors labeled by eigenvalue.
    Observable(ComplexMatrix),
    /// Already-validated decomposition.
    Decomposition(ProjectiveDecomposition),
    /// Labeled orthogonal projectors; a `"rest"` complement is appended when
    /// they do not sum to the identity.
    Projectors(Vec<(String, ComplexMatrix)>),
}

/// One outcome per slot `t1..tn`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct History {
    outcomes: Vec<usize>,
    labels: Vec<String>,
}

impl History {
    /// Outcome index at each slot.
    pub fn outcomes(&self) -> &[usize] {
        &self.outcomes
    }

    /// Outcome label at each slot.
    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Slot labels joined by commas, e.g. `"+1,-1"`.
    pub fn label(&self) -> String {
        self.labels.join(",")
    }
}

impl fmt::Display for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({})", self.label())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HistoryFamily {
    dim: usize,
    grid: TimeGrid,
    initial: Ket,
    evolutions: Vec<Evolution>,
    slots: Vec<ProjectiveDecomposition>,
    histories: Vec<History>,
    max_histories: usize,
}

/// Gram-matrix evidence for the consistency condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    /// `gram[(a, b)] = ⟨Y_a|Y_b⟩`, histories in family order.
    pub gram: ComplexMatrix,
    pub max_offdiag: f64,
    /// History indices attaining `max_offdiag`, if there is more than one history.
    pub worst_pair: Option<(usize, usize)>,
    /// Threshold actually applied: `eps_cons * max(1, max diagonal)`.
    pub threshold: f64,
    pub consistent: bool,
    /// Gram diagonal. Only additive when `consistent` holds.
    pub probabilities: Vec<f64>,
}

impl ConsistencyReport {
    pub fn probability_sum(&self) -> f64 {
        self.probabilities.iter().sum()
    }
}

fn slot_decomposition(slot: usize, spec: SlotSpec, dim: usize, tol: &Tolerance) -> Result<ProjectiveDecomposition> {
    let bad = |source: FrameworkError| HistoryError::BadDecomposition { slot, source };
    let decomp = match spec {
        SlotSpec::Trivial => ProjectiveDecomposition::trivial(dim),
        SlotSpec::Observable(h) => ProjectiveDecomposition::from_observable(&h, tol).map_err(bad)?,
        SlotSpec::Decomposition(d) => d,
        SlotSpec::Projectors(list) => {
            if list.is_empty() {
                return Err(bad(FrameworkError::Empty));
            }
            let (mut labels, mut projectors): (Vec<String>, Vec<ComplexMatrix>) = list.into_iter().unzip();
            if let Some(p) = projectors.iter().find(|p| p.shape() != (dim, dim)) {
                return Err(HistoryError::DimMismatch {
                    what: format!("slot {slot} projector"),
                    expected: dim,
                    got: p.rows().max(p.cols()),
                });
            }
            let rest = &ComplexMatrix::identity(dim) - &crate::framework::sum(dim, &projectors);
            if rest.max_abs() > tol.proj() {
                projectors.push(rest);
                labels.push(REST_LABEL.to_string());
            }
            ProjectiveDecomposition::new(projectors, labels, tol).map_err(bad)?
        }
    };
    if decomp.dim() != dim {
        return Err(HistoryError::DimMismatch {
            what: format!("slot {slot}"),
            expected: dim,
            got: decomp.dim(),
        });
    }
    Ok(decomp)
}

fn enumerate(slots: &[ProjectiveDecomposition], cap: usize) -> Result<Vec<History>> {
    let count = slots
        .iter()
        .try_fold(1u128, |acc, s| acc.checked_mul(s.len() as u128))
        .unwrap_or(u128::MAX);
    if count > cap as u128 {
        return Err(HistoryError::TooManyHistories { count, cap });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut outcomes = vec![0usize; slots.len()];
    loop {
        out.push(History {
            labels: outcomes
                .iter()
                .zip(slots)
                .map(|(&o, s)| s.labels()[o].clone())
                .collect(),
            outcomes: outcomes.clone(),
        });
        // odometer, last slot fastest
        let mut k = slots.len();
        loop {
            if k == 0 {
                return Ok(out);
            }
            k -= 1;
            outcomes[k] += 1;
            if outcomes[k] < slots[k].len() {
                break;
            }
            outcomes[k] = 0;
        }
    }
}

impl HistoryFamily {
    /// Builds a family, converting observables to eigenprojectors, padding
    /// incomplete slots with `"rest"` and enumerating every history.
    ///
    /// `evolutions[k]` carries the state from `grid[k]` to `grid[k + 1]`.
    pub fn build(
        initial: Ket,
        grid: TimeGrid,
        evolutions: Vec<ComplexMatrix>,
        slots: Vec<SlotSpec>,
        tol: &Tolerance,
        max_histories: usize,
    ) -> Result<Self> {
        let dim = initial.dim();
        let n = grid.slot_count();
        if slots.len() != n {
            return Err(HistoryError::CountMismatch {
                what: "slots",
                expected: n,
                got: slots.len(),
            });
        }
        let decomps = slots
            .into_iter()
            .enumerate()
            .map(|(k, spec)| slot_decomposition(k, spec, dim, tol))
            .collect::<Result<Vec<_>>>()?;
        Self::from_parts(initial, grid, evolutions, decomps, tol, max_histories)
    }

    pub(crate) fn from_parts(
        initial: Ket,
        grid: TimeGrid,
        evolutions: Vec<ComplexMatrix>,
        slots: Vec<ProjectiveDecomposition>,
        tol: &Tolerance,
        max_histories: usize,
    ) -> Result<Self> {
        let dim = initial.dim();
        let n = grid.slot_count();
        if !initial.is_normalized(tol) {
            return Err(HistoryError::NotNormalized {
                norm_sqr: initial.norm_sqr(),
            });
        }
        if evolutions.len() != n {
            return Err(HistoryError::CountMismatch {
                what: "evolutions",
                expected: n,
                got: evolutions.len(),
            });
        }
        if slots.len() != n {
            return Err(HistoryError::CountMismatch {
                what: "slots",
                expected: n,
                got: slots.len(),
            });
        }
        let evolutions = evolutions
            .into_iter()
            .enumerate()
            .map(|(index, u)| {
                if u.shape() != (dim, dim) {
                    return Err(HistoryError::DimMismatch {
                        what: format!("evolution {index}"),
                        expected: dim,
                        got: u.rows().max(u.cols()),
                    });
                }
                if !linalg::is_unitary(&u, tol)? {
                    return Err(HistoryError::NotUnitaryEvolution { index });
                }
                Ok(Evolution {
                    from: grid.labels()[index].clone(),
                    to: grid.labels()[index + 1].clone(),
                    unitary: u,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        for (slot, d) in slots.iter().enumerate() {
            if d.dim() != dim {
                return Err(HistoryError::DimMismatch {
                    what: format!("slot {slot}"),
                    expected: dim,
                    got: d.dim(),
                });
            }
        }
        let histories = enumerate(&slots, max_histories)?;
        Ok(HistoryFamily {
            dim,
            grid,
            initial,
            evolutions,
            slots,
            histories,
            max_histories,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn initial(&self) -> &Ket {
        &self.initial
    }

    pub fn evolutions(&self) -> &[Evolution] {
        &self.evolutions
    }

    pub fn evolution_matrices(&self) -> Vec<ComplexMatrix> {
        self.evolutions.iter().map(|e| e.unitary.clone()).collect()
    }

    pub fn slots(&self) -> &[ProjectiveDecomposition] {
        &self.slots
    }

    pub fn histories(&self) -> &[History] {
        &self.histories
    }

    pub fn max_histories(&self) -> usize {
        self.max_histories
    }

    /// Looks up a history by its per-slot labels.
    pub fn history<S: AsRef<str>>(&self, labels: &[S]) -> Option<&History> {
        self.histories
            .iter()
            .find(|h| h.labels.len() == labels.len() && h.labels.iter().zip(labels).all(|(a, b)| a == b.as_ref()))
    }

    /// Index of `history` in [`histories`](Self::histories).
    pub fn index_of(&self, history: &History) -> Result<usize> {
        let valid = history.outcomes.len() == self.slots.len()
            && history
                .outcomes
                .iter()
                .zip(&history.labels)
                .zip(&self.slots)
                .all(|((&o, l), s)| o < s.len() && &s.labels()[o] == l);
        if !valid {
            return Err(HistoryError::UnknownHistory);
        }
        // odometer order: mixed-radix number, last slot fastest
        Ok(history
            .outcomes
            .iter()
            .zip(&self.slots)
            .fold(0, |acc, (&o, s)| acc * s.len() + o))
    }

    /// The unnormalized chain ket `P_n T_n ... P_1 T_1 |ψ0⟩`. May be zero.
    pub fn chain_ket(&self, history: &History) -> Result<Ket> {
        self.index_of(history)?;
        Ok(self.chain_ket_unchecked(history))
    }

    fn chain_ket_unchecked(&self, history: &History) -> Ket {
        history.outcomes.iter().zip(&self.slots).zip(&self.evolutions).fold(
            self.initial.clone(),
            |state, ((&o, slot), evo)| {
                let evolved = evo.unitary.apply(&state).expect("dims validated");
                slot.projectors()[o].apply(&evolved).expect("dims validated")
            },
        )
    }

    /// `⟨Y|Y⟩` for one history.
    pub fn history_probability(&self, history: &History) -> Result<f64> {
        Ok(self.chain_ket(history)?.norm_sqr())
    }

    pub fn chain_kets(&self) -> Vec<Ket> {
        self.histories.iter().map(|h| self.chain_ket_unchecked(h)).collect()
    }

    /// Full Gram matrix of chain kets and the consistency verdict.
    ///
    /// The family is consistent when every off-diagonal `|⟨Y_a|Y_b⟩|` is at
    /// most `eps_cons * max(1, max_a ⟨Y_a|Y_a⟩)`. The full complex overlap is
    /// tested, not only its real part.
    pub fn consistency_check(&self, tol: &Tolerance) -> ConsistencyReport {
        let kets = self.chain_kets();
        let n = kets.len();
        let mut gram = vec![C64::new(0.0, 0.0); n * n];
        let mut max_offdiag = 0.0;
        let mut worst_pair = None;
        for a in 0..n {
            for b in a..n {
                let g = kets[a].inner(&kets[b]);
                gram[a * n + b] = g;
                gram[b * n + a] = g.conj();
                if a != b && (worst_pair.is_none() || g.norm() > max_offdiag) {
                    max_offdiag = g.norm();
                    worst_pair = Some((a, b));
                }
            }
        }
        let probabilities: Vec<f64> = (0..n).map(|a| gram[a * n + a].re).collect();
        let max_diag = probabilities.iter().copied().fold(0.0, f64::max);
        let threshold = tol.cons() * max_diag.max(1.0);
        ConsistencyReport {
            gram: ComplexMatrix::new(n, n, gram).expect("finite gram"),
            max_offdiag,
            worst_pair,
            threshold,
            consistent: max_offdiag <= threshold,
            probabilities,
        }
    }

    /// Slot index for a time label (`t1` is slot 0).
    pub fn slot_index(&self, time: &str) -> Result<usize> {
        self.grid.slot_of(time)
    }

    /// Coarse-grains one slot: each set of labels in `partition` is merged
    /// into a single projector (the sum), labeled with the members joined by
    /// `"∨"`. Every label of the slot must appear in exactly one set.
    pub fn coarse_grain<S: AsRef<str>>(&self, slot: usize, partition: &[Vec<S>], tol: &Tolerance) -> Result<Self> {
        let not_partition = |reason: String| HistoryError::NotAPartition { slot, reason };
        let decomp = self
            .slots
            .get(slot)
            .ok_or_else(|| not_partition(format!("family has {} slots", self.slots.len())))?;
        let mut seen = vec![false; decomp.len()];
        let mut projectors = Vec::with_capacity(partition.len());
        let mut labels = Vec::with_capacity(partition.len());
        for set in partition {
            if set.is_empty() {
                return Err(not_partition("empty merge set".into()));
            }
            let mut merged = ComplexMatrix::zeros(self.dim, self.dim);
            for label in set {
                let label = label.as_ref();
                let i = decomp
                    .index_of(label)
                    .ok_or_else(|| not_partition(format!("unknown label `{label}`")))?;
                if std::mem::replace(&mut seen[i], true) {
                    return Err(not_partition(format!("label `{label}` used twice")));
                }
                merged = &merged + &decomp.projectors()[i];
            }
            projectors.push(merged);
            labels.push(set.iter().map(|s| s.as_ref()).collect::<Vec<_>>().join(MERGE_SEPARATOR));
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(not_partition(format!("label `{}` not covered", decomp.labels()[i])));
        }
        let merged = ProjectiveDecomposition::new(projectors, labels, tol)
            .map_err(|source| HistoryError::BadDecomposition { slot, source })?;
        let mut slots = self.slots.clone();
        slots[slot] = merged;
        Self::from_parts(
            self.initial.clone(),
            self.grid.clone(),
            self.evolution_matrices(),
            slots,
            tol,
            self.max_histories,
        )
    }
}

pub fn build_family(
    initial: Ket,
    grid: TimeGrid,
    evolutions: Vec<ComplexMatrix>,
    slots: Vec<SlotSpec>,
    tol: &Tolerance,
) -> Result<HistoryFamily> {
    HistoryFamily::build(initial, grid, evolutions, slots, tol, DEFAULT_MAX_HISTORIES)
}

pub fn chain_ket(family: &HistoryFamily, history: &History) -> Result<Ket> {
    family.chain_ket(history)
}

pub fn history_probability(family: &HistoryFamily, history: &History) -> Result<f64> {
    family.history_probability(history)
}

pub fn consistency_check(family: &HistoryFamily, tol: &Tolerance) -> ConsistencyReport {
    family.consistency_check(tol)
}

pub fn coarse_grain<S: AsRef<str>>(
    family: &HistoryFamily,
    slot: usize,
    partition: &[Vec<S>],
    tol: &Tolerance,
) -> Result<HistoryFamily> {
    family.coarse_grain(slot, partition, tol)
}

/// `count` identity evolutions of size `dim`.
pub fn identity_evolutions(dim: usize, count: usize) -> Vec<ComplexMatrix> {
    vec![ComplexMatrix::identity(dim); count]
}
