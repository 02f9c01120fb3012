//! Stable and relative facts between observers.
//!
//! Each observer contributes one history family over a shared system, grid,
//! initial state and dynamics. Two observers share stable facts when
//!
//! 1. their slot decompositions commute at every time, and
//! 2. the slot-wise product family `{K_i ∧ Y_j}` is consistent.
//!
//! Otherwise their facts are only relative. Probabilistic queries are refused
//! on inconsistent families.

use thiserror::Error;

use crate::framework::{self, FrameworkError, ProjectiveDecomposition};
use crate::histories::{ConsistencyReport, HistoryError, HistoryFamily};
use crate::linalg::{ComplexMatrix, Tolerance};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FactsError {
    #[error("observers do not describe the same scenario: {0}")]
    MismatchedScenario(String),
    #[error("observers `{}` and `{}` are not compatible", .0.first, .0.second)]
    NotCompatible(Box<CompatibilityReport>),
    #[error(
        "family is inconsistent (max off-diagonal overlap {max_offdiag:e}); \
         probabilistic reasoning requires a single consistent framework"
    )]
    InconsistentFamily { max_offdiag: f64 },
    #[error("conditioning event has probability {probability:e}")]
    ZeroProbabilityCondition { probability: f64 },
    #[error("no outcome `{label}` at time `{time}` in this family")]
    UnknownLabel { time: String, label: String },
    #[error("projector at time `{time}` is not in the family's event algebra")]
    NotInEventAlgebra { time: String },
    #[error("bad times: {0}")]
    BadTimes(String),
    #[error("need at least {needed} observers, got {got}")]
    TooFewObservers { needed: usize, got: usize },
    #[error(transparent)]
    History(#[from] HistoryError),
    #[error(transparent)]
    Framework(#[from] FrameworkError),
}

pub type Result<T, E = FactsError> = std::result::Result<T, E>;

/// The facts an observer holds about the system: a named history family.
#[derive(Debug, Clone, PartialEq)]
pub struct ObserverRecord {
    name: String,
    family: HistoryFamily,
}

impl ObserverRecord {
    pub fn new(name: impl Into<String>, family: HistoryFamily) -> Self {
        ObserverRecord {
            name: name.into(),
            family,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn family(&self) -> &HistoryFamily {
        &self.family
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Stable,
    Relative,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Stable => "Stable",
            Verdict::Relative => "Relative",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FailingCondition {
    /// Slot decompositions fail to commute at this time (first failing time).
    Commutation { time: String },
    /// The product family is not consistent.
    ProductConsistency,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlotCommutation {
    pub time: String,
    pub max_residual: f64,
    pub commutes: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompatibilityReport {
    pub first: String,
    pub second: String,
    pub per_slot: Vec<SlotCommutation>,
    /// Consistency of the product family; `None` when some slot products are
    /// not well-formed (the check is skipped).
    pub product_family: Option<ConsistencyReport>,
    /// History labels of the product family, in Gram-matrix order.
    pub product_histories: Vec<String>,
    pub verdict: Verdict,
    pub failing: Option<FailingCondition>,
}

fn require_same_scenario(a: &HistoryFamily, b: &HistoryFamily, tol: &Tolerance) -> Result<()> {
    let mismatch = |what: &str| Err(FactsError::MismatchedScenario(what.to_string()));
    if a.dim() != b.dim() {
        return mismatch("dimensions differ");
    }
    if a.grid() != b.grid() {
        return mismatch("time grids differ");
    }
    if a.initial().max_abs_diff(b.initial()) > tol.norm() {
        return mismatch("initial states differ");
    }
    let same_dynamics = a
        .evolutions()
        .iter()
        .zip(b.evolutions())
        .all(|(x, y)| x.unitary().max_abs_diff(y.unitary()) <= tol.herm());
    if !same_dynamics {
        return mismatch("evolutions differ");
    }
    Ok(())
}

/// Slot-wise common refinement of several families over one scenario.
fn product_family(families: &[&HistoryFamily], tol: &Tolerance) -> Result<HistoryFamily> {
    let first = families[0];
    let slots = (0..first.slots().len())
        .map(|k| {
            let decomps: Vec<ProjectiveDecomposition> = families.iter().map(|f| f.slots()[k].clone()).collect();
            framework::refine_all(&decomps, tol)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(HistoryFamily::from_parts(
        first.initial().clone(),
        first.grid().clone(),
        first.evolution_matrices(),
        slots,
        tol,
        first.max_histories(),
    )?)
}

/// Runs both compatibility conditions on a pair of observers.
pub fn check_compatibility(a: &ObserverRecord, b: &ObserverRecord, tol: &Tolerance) -> Result<CompatibilityReport> {
    let (fa, fb) = (a.family(), b.family());
    require_same_scenario(fa, fb, tol)?;

    let per_slot = fa
        .slots()
        .iter()
        .zip(fb.slots())
        .enumerate()
        .map(|(k, (p, q))| {
            let c = framework::decompositions_compatible(p, q, tol)?;
            Ok(SlotCommutation {
                time: fa.grid().slot_label(k).to_string(),
                max_residual: c.max_residual,
                commutes: c.compatible,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let product = match product_family(&[fa, fb], tol) {
        Ok(f) => Some(f),
        Err(FactsError::Framework(_)) => None,
        Err(e) => return Err(e),
    };
    let product_family = product.as_ref().map(|f| f.consistency_check(tol));
    let product_histories = product
        .map(|f| f.histories().iter().map(|h| h.label()).collect())
        .unwrap_or_default();

    let failing = if let Some(s) = per_slot.iter().find(|s| !s.commutes) {
        Some(FailingCondition::Commutation { time: s.time.clone() })
    } else if !product_family.as_ref().is_some_and(|r| r.consistent) {
        Some(FailingCondition::ProductConsistency)
    } else {
        None
    };
    Ok(CompatibilityReport {
        first: a.name().to_string(),
        second: b.name().to_string(),
        per_slot,
        product_family,
        product_histories,
        verdict: if failing.is_none() {
            Verdict::Stable
        } else {
            Verdict::Relative
        },
        failing,
    })
}

/// The combined family of two compatible observers, outcomes labeled `"k∧y"`.
pub fn combine(a: &ObserverRecord, b: &ObserverRecord, tol: &Tolerance) -> Result<HistoryFamily> {
    let report = check_compatibility(a, b, tol)?;
    if report.verdict != Verdict::Stable {
        return Err(FactsError::NotCompatible(Box::new(report)));
    }
    product_family(&[a.family(), b.family()], tol)
}

/// Verdict for the product of all observers at once. This goes beyond the
/// pairwise test and is reported separately.
#[derive(Debug, Clone, PartialEq)]
pub struct JointVerdict {
    pub observers: Vec<String>,
    pub verdict: Verdict,
    /// `None` when some slot decompositions do not commute.
    pub consistency: Option<ConsistencyReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Classification {
    /// One report per unordered pair `(i, j)`, `i < j`, in observer order.
    pub pairs: Vec<CompatibilityReport>,
    /// Present when there are three or more observers.
    pub joint: Option<JointVerdict>,
}

/// Pairwise classification of every observer pair plus, for three or more
/// observers, the joint product-family verdict.
pub fn classify(observers: &[ObserverRecord], tol: &Tolerance) -> Result<Classification> {
    if observers.len() < 2 {
        return Err(FactsError::TooFewObservers {
            needed: 2,
            got: observers.len(),
        });
    }
    let mut pairs = Vec::new();
    for i in 0..observers.len() {
        for j in i + 1..observers.len() {
            pairs.push(check_compatibility(&observers[i], &observers[j], tol)?);
        }
    }
    let joint = if observers.len() >= 3 {
        let families: Vec<&HistoryFamily> = observers.iter().map(|o| o.family()).collect();
        let consistency = match product_family(&families, tol) {
            Ok(f) => Some(f.consistency_check(tol)),
            Err(FactsError::Framework(_)) => None,
            Err(e) => return Err(e),
        };
        let stable = consistency.as_ref().is_some_and(|r| r.consistent);
        Some(JointVerdict {
            observers: observers.iter().map(|o| o.name().to_string()).collect(),
            verdict: if stable { Verdict::Stable } else { Verdict::Relative },
            consistency,
        })
    } else {
        None
    };
    Ok(Classification { pairs, joint })
}

/// Product family of every observer; errors unless the result is consistent.
pub fn combine_all(observers: &[ObserverRecord], tol: &Tolerance) -> Result<HistoryFamily> {
    let first = observers
        .first()
        .ok_or(FactsError::TooFewObservers { needed: 1, got: 0 })?;
    for o in &observers[1..] {
        require_same_scenario(first.family(), o.family(), tol)?;
    }
    let families: Vec<&HistoryFamily> = observers.iter().map(|o| o.family()).collect();
    let combined = product_family(&families, tol)?;
    let report = combined.consistency_check(tol);
    if !report.consistent {
        return Err(FactsError::InconsistentFamily {
            max_offdiag: report.max_offdiag,
        });
    }
    Ok(combined)
}

/// Which outcomes at a time make up an event.
#[derive(Debug, Clone, PartialEq)]
pub enum EventSelector {
    Label(String),
    /// A projector that must be a sum of the slot's projectors.
    Projector(ComplexMatrix),
}

/// An event at one time of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Fact {
    pub time: String,
    pub selector: EventSelector,
}

impl Fact {
    pub fn label(time: impl Into<String>, label: impl Into<String>) -> Self {
        Fact {
            time: time.into(),
            selector: EventSelector::Label(label.into()),
        }
    }

    pub fn projector(time: impl Into<String>, projector: ComplexMatrix) -> Self {
        Fact {
            time: time.into(),
            selector: EventSelector::Projector(projector),
        }
    }
}

/// `P(event | condition)`.
#[derive(Debug, Clone, PartialEq)]
pub struct FactQuery {
    pub event: Fact,
    pub condition: Fact,
}

/// A fact resolved against a family: a slot and the outcome indices it covers.
struct ResolvedFact {
    slot: usize,
    outcomes: Vec<bool>,
}

impl ResolvedFact {
    fn new(family: &HistoryFamily, fact: &Fact, tol: &Tolerance) -> Result<Self> {
        let slot = family.slot_index(&fact.time)?;
        let decomp = &family.slots()[slot];
        let outcomes = match &fact.selector {
            EventSelector::Label(label) => {
                let i = decomp.index_of(label).ok_or_else(|| FactsError::UnknownLabel {
                    time: fact.time.clone(),
                    label: label.clone(),
                })?;
                (0..decomp.len()).map(|k| k == i).collect()
            }
            EventSelector::Projector(e) => {
                if e.shape() != (family.dim(), family.dim()) {
                    return Err(FactsError::NotInEventAlgebra {
                        time: fact.time.clone(),
                    });
                }
                decomp
                    .projectors()
                    .iter()
                    .map(|p| {
                        let ep = e * p;
                        if ep.max_abs_diff(p) <= tol.proj() {
                            Ok(true)
                        } else if ep.max_abs() <= tol.proj() {
                            Ok(false)
                        } else {
                            Err(FactsError::NotInEventAlgebra {
                                time: fact.time.clone(),
                            })
                        }
                    })
                    .collect::<Result<Vec<_>>>()?
            }
        };
        Ok(ResolvedFact { slot, outcomes })
    }

    fn matches(&self, outcomes: &[usize]) -> bool {
        self.outcomes[outcomes[self.slot]]
    }
}

/// History weights of a family that passed the consistency check.
struct Probabilities<'a> {
    family: &'a HistoryFamily,
    weights: Vec<f64>,
}

impl<'a> Probabilities<'a> {
    fn new(family: &'a HistoryFamily, tol: &Tolerance) -> Result<Self> {
        let report = family.consistency_check(tol);
        if !report.consistent {
            return Err(FactsError::InconsistentFamily {
                max_offdiag: report.max_offdiag,
            });
        }
        Ok(Probabilities {
            family,
            weights: report.probabilities,
        })
    }

    fn of(&self, facts: &[&ResolvedFact]) -> f64 {
        self.family
            .histories()
            .iter()
            .zip(&self.weights)
            .filter(|(h, _)| facts.iter().all(|f| f.matches(h.outcomes())))
            .map(|(_, w)| w)
            .sum()
    }
}

/// `P(event | condition)` inside one consistent family.
pub fn conditional_probability(family: &HistoryFamily, query: &FactQuery, tol: &Tolerance) -> Result<f64> {
    let event = ResolvedFact::new(family, &query.event, tol)?;
    let condition = ResolvedFact::new(family, &query.condition, tol)?;
    let probs = Probabilities::new(family, tol)?;
    let p_condition = probs.of(&[&condition]);
    if p_condition <= tol.cons() {
        return Err(FactsError::ZeroProbabilityCondition {
            probability: p_condition,
        });
    }
    Ok(probs.of(&[&event, &condition]) / p_condition)
}

/// Probability of a single event in a consistent family.
pub fn event_probability(family: &HistoryFamily, fact: &Fact, tol: &Tolerance) -> Result<f64> {
    let event = ResolvedFact::new(family, fact, tol)?;
    Ok(Probabilities::new(family, tol)?.of(&[&event]))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TotalProbabilityCheck {
    /// `P(b)`
    pub lhs: f64,
    /// `Σ_i P(b | a_i) P(a_i)` over the outcomes `a_i` at the partition time
    /// with `P(a_i) > eps_cons`.
    pub rhs: f64,
    pub holds: bool,
}

/// Checks `P(b) = Σ_i P(b|a_i) P(a_i)` with `a_i` ranging over the outcomes
/// at `partition_time`. Holds when the two sides agree within `10 eps_cons`.
pub fn check_total_probability_law(
    family: &HistoryFamily,
    event: &Fact,
    partition_time: &str,
    tol: &Tolerance,
) -> Result<TotalProbabilityCheck> {
    let event = ResolvedFact::new(family, event, tol)?;
    let partition_slot = family.slot_index(partition_time)?;
    if partition_slot == event.slot {
        return Err(FactsError::BadTimes(format!(
            "partition time `{partition_time}` equals the event time"
        )));
    }
    let probs = Probabilities::new(family, tol)?;
    let lhs = probs.of(&[&event]);
    let n = family.slots()[partition_slot].len();
    let rhs = (0..n)
        .map(|i| {
            let part = ResolvedFact {
                slot: partition_slot,
                outcomes: (0..n).map(|k| k == i).collect(),
            };
            let p_part = probs.of(&[&part]);
            if p_part > tol.cons() {
                probs.of(&[&event, &part]) / p_part * p_part
            } else {
                0.0
            }
        })
        .sum::<f64>();
    Ok(TotalProbabilityCheck {
        lhs,
        rhs,
        holds: (lhs - rhs).abs() <= 10.0 * tol.cons(),
    })
}

/// Whether the record made at `record_time` survives until `later_time`: the
/// later slot's decomposition, pulled back through the intervening
/// evolutions, must commute with the record slot's decomposition.
pub fn information_preserved(
    family: &HistoryFamily,
    record_time: &str,
    later_time: &str,
    tol: &Tolerance,
) -> Result<bool> {
    let record = family.slot_index(record_time)?;
    let later = family.slot_index(later_time)?;
    if record >= later {
        return Err(FactsError::BadTimes(format!(
            "`{record_time}` must come before `{later_time}`"
        )));
    }
    // evolution k carries grid time k to k + 1; slot s sits at grid time s + 1
    let carry = family.evolutions()[record + 1..=later]
        .iter()
        .fold(ComplexMatrix::identity(family.dim()), |acc, e| e.unitary() * &acc);
    let pulled_back = family.slots()[later].conjugated(&carry);
    Ok(framework::decompositions_compatible(&family.slots()[record], &pulled_back, tol)?.compatible)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::histories::{build_family, identity_evolutions, SlotSpec, TimeGrid};
    use crate::linalg::{embed_operator, sigma_x, sigma_y, sigma_z, Ket};

    fn tol() -> Tolerance {
        Tolerance::default()
    }

    fn qubit_observer(name: &str, slots: Vec<ComplexMatrix>, evolutions: Vec<ComplexMatrix>) -> ObserverRecord {
        let n = slots.len();
        let family = build_family(
            Ket::basis(2, 0),
            TimeGrid::numbered(n).unwrap(),
            evolutions,
            slots.into_iter().map(SlotSpec::Observable).collect(),
            &tol(),
        )
        .unwrap();
        ObserverRecord::new(name, family)
    }

    fn plain(name: &str, slots: Vec<ComplexMatrix>) -> ObserverRecord {
        let n = slots.len();
        qubit_observer(name, slots, identity_evolutions(2, n))
    }

    /// Spin on factor 1, two stand-in degrees of freedom on factors 2 and 3.
    fn three_qubit_observer(name: &str, t1: ComplexMatrix, t2: ComplexMatrix) -> ObserverRecord {
        let dims = [2, 2, 2];
        let plus = Ket::from_real(&[1.0, 1.0]).unwrap().normalized().unwrap();
        let psi = Ket::basis(2, 0).tensor(&plus).tensor(&plus);
        let family = build_family(
            psi,
            TimeGrid::numbered(2).unwrap(),
            identity_evolutions(8, 2),
            vec![
                SlotSpec::Observable(embed_operator(&t1, 0, &dims).unwrap()),
                SlotSpec::Observable(t2),
            ],
            &tol(),
        )
        .unwrap();
        ObserverRecord::new(name, family)
    }

    #[test]
    fn shared_x_then_commuting_observables_is_stable() {
        let dims = [2, 2, 2];
        let o1 = three_qubit_observer("O1", sigma_x(), embed_operator(&sigma_z(), 1, &dims).unwrap());
        let o2 = three_qubit_observer("O2", sigma_x(), embed_operator(&sigma_z(), 2, &dims).unwrap());
        let r = check_compatibility(&o1, &o2, &tol()).unwrap();
        assert_eq!(r.verdict, Verdict::Stable);
        assert_eq!(r.failing, None);
        assert!(r.product_family.as_ref().unwrap().consistent);

        let combined = combine(&o1, &o2, &tol()).unwrap();
        // 2 nonzero products at t1, 4 at t2
        assert_eq!(combined.histories().len(), 8);
        assert!(combined.consistency_check(&tol()).consistent);
        assert!(combined.slots()[1].labels().contains(&"+1∧-1".to_string()));
    }

    #[test]
    fn x_versus_y_is_relative_at_t1() {
        let a = plain("O1", vec![sigma_x()]);
        let b = plain("O2", vec![sigma_y()]);
        let r = check_compatibility(&a, &b, &tol()).unwrap();
        assert_eq!(r.verdict, Verdict::Relative);
        assert_eq!(r.failing, Some(FailingCondition::Commutation { time: "t1".into() }));
        assert!((r.per_slot[0].max_residual - 0.5).abs() < 1e-12);
        assert!(r.product_family.is_none());

        match combine(&a, &b, &tol()) {
            Err(FactsError::NotCompatible(report)) => assert_eq!(report.verdict, Verdict::Relative),
            other => panic!("expected NotCompatible, got {other:?}"),
        }
    }

    #[test]
    fn self_compatibility() {
        let a = plain("O", vec![sigma_x(), sigma_x()]);
        let r = check_compatibility(&a, &a, &tol()).unwrap();
        assert_eq!(r.verdict, Verdict::Stable);
    }

    #[test]
    fn commuting_but_inconsistent_pair_fails_condition_two() {
        // both observers measure x then z: slots commute, product is the zxz family
        let a = plain("A", vec![sigma_x(), sigma_z()]);
        let r = check_compatibility(&a, &a, &tol()).unwrap();
        assert_eq!(r.failing, Some(FailingCondition::ProductConsistency));
        assert_eq!(r.verdict, Verdict::Relative);
    }

    #[test]
    fn combine_with_trivial_observer_keeps_the_family() {
        let a = plain("A", vec![sigma_x(), sigma_x()]);
        let trivial = plain("T", vec![ComplexMatrix::identity(2), ComplexMatrix::identity(2)]);
        let c = combine(&a, &trivial, &tol()).unwrap();
        assert_eq!(c.histories().len(), a.family().histories().len());
        for (k, slot) in c.slots().iter().enumerate() {
            assert_eq!(slot.projectors(), a.family().slots()[k].projectors());
        }
    }

    #[test]
    fn mismatched_scenarios_are_rejected() {
        let a = plain("A", vec![sigma_x()]);
        let b = qubit_observer("B", vec![sigma_x()], vec![sigma_x()]);
        assert!(matches!(
            check_compatibility(&a, &b, &tol()),
            Err(FactsError::MismatchedScenario(_))
        ));
        let c = plain("C", vec![sigma_x(), sigma_x()]);
        assert!(matches!(
            check_compatibility(&a, &c, &tol()),
            Err(FactsError::MismatchedScenario(_))
        ));
    }

    #[test]
    fn conditional_probability_examples() {
        let f = plain("A", vec![sigma_x(), sigma_x()]).family().clone();
        let q = FactQuery {
            event: Fact::label("t1", "+1"),
            condition: Fact::label("t2", "+1"),
        };
        assert!((conditional_probability(&f, &q, &tol()).unwrap() - 1.0).abs() < 1e-12);

        let q = FactQuery {
            event: Fact::label("t2", "-1"),
            condition: Fact::label("t2", "-1"),
        };
        assert!((conditional_probability(&f, &q, &tol()).unwrap() - 1.0).abs() < 1e-12);

        let zxz = plain("A", vec![sigma_x(), sigma_z()]).family().clone();
        assert!(matches!(
            conditional_probability(&zxz, &q, &tol()),
            Err(FactsError::InconsistentFamily { .. })
        ));

        let zz = plain("A", vec![sigma_z(), sigma_z()]).family().clone();
        let q = FactQuery {
            event: Fact::label("t1", "+1"),
            condition: Fact::label("t2", "-1"),
        };
        assert!(matches!(
            conditional_probability(&zz, &q, &tol()),
            Err(FactsError::ZeroProbabilityCondition { .. })
        ));
    }

    #[test]
    fn facts_by_projector() {
        let f = plain("A", vec![sigma_x(), sigma_x()]).family().clone();
        let plus = f.slots()[0].projector("+1").unwrap().clone();
        let q = FactQuery {
            event: Fact::projector("t1", plus),
            condition: Fact::projector("t2", ComplexMatrix::identity(2)),
        };
        assert!((conditional_probability(&f, &q, &tol()).unwrap() - 0.5).abs() < 1e-12);

        let q = FactQuery {
            event: Fact::projector("t1", Ket::basis(2, 0).outer()),
            condition: Fact::label("t2", "+1"),
        };
        assert!(matches!(
            conditional_probability(&f, &q, &tol()),
            Err(FactsError::NotInEventAlgebra { .. })
        ));
        let q = FactQuery {
            event: Fact::label("t1", "up"),
            condition: Fact::label("t2", "+1"),
        };
        assert!(matches!(
            conditional_probability(&f, &q, &tol()),
            Err(FactsError::UnknownLabel { .. })
        ));
        let q = FactQuery {
            event: Fact::label("t0", "+1"),
            condition: Fact::label("t2", "+1"),
        };
        assert!(matches!(
            conditional_probability(&f, &q, &tol()),
            Err(FactsError::History(HistoryError::InitialTime(_)))
        ));
    }

    #[test]
    fn total_probability_law_examples() {
        let zxz = plain("A", vec![sigma_x(), sigma_z()]).family().clone();
        let coarse = zxz.coarse_grain(0, &[vec!["-1", "+1"]], &tol()).unwrap();
        let c = check_total_probability_law(&coarse, &Fact::label("t2", "+1"), "t1", &tol()).unwrap();
        assert!(c.holds);
        assert!((c.lhs - 1.0).abs() < 1e-12);

        let zz = plain("A", vec![sigma_z(), sigma_z()]).family().clone();
        let c = check_total_probability_law(&zz, &Fact::label("t2", "-1"), "t1", &tol()).unwrap();
        assert_eq!((c.lhs, c.rhs, c.holds), (0.0, 0.0, true));

        assert!(matches!(
            check_total_probability_law(&zz, &Fact::label("t2", "-1"), "t2", &tol()),
            Err(FactsError::BadTimes(_))
        ));
        assert!(matches!(
            check_total_probability_law(&zxz, &Fact::label("t2", "+1"), "t1", &tol()),
            Err(FactsError::InconsistentFamily { .. })
        ));
    }

    #[test]
    fn information_preserved_examples() {
        let zz = plain("A", vec![sigma_z(), sigma_z()]).family().clone();
        assert!(information_preserved(&zz, "t1", "t2", &tol()).unwrap());

        let zx = plain("A", vec![sigma_z(), sigma_x()]).family().clone();
        assert!(!information_preserved(&zx, "t1", "t2", &tol()).unwrap());

        // σx σz σx = -σz commutes with σz
        let flipped = qubit_observer(
            "A",
            vec![sigma_z(), sigma_z()],
            vec![ComplexMatrix::identity(2), sigma_x()],
        );
        assert!(information_preserved(flipped.family(), "t1", "t2", &tol()).unwrap());

        // a Hadamard between the slots rotates z into x
        let h = (&sigma_x() + &sigma_z()).scale(crate::linalg::C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0));
        let rotated = qubit_observer("A", vec![sigma_z(), sigma_z()], vec![ComplexMatrix::identity(2), h]);
        assert!(!information_preserved(rotated.family(), "t1", "t2", &tol()).unwrap());

        assert!(matches!(
            information_preserved(&zz, "t2", "t1", &tol()),
            Err(FactsError::BadTimes(_))
        ));
    }

    #[test]
    fn classify_reports_pairs_and_joint_verdict() {
        let a = plain("A", vec![sigma_z()]);
        let b = plain("B", vec![sigma_z()]);
        let c = plain("C", vec![sigma_x()]);
        let r = classify(&[a.clone(), b.clone(), c], &tol()).unwrap();
        let verdicts: Vec<Verdict> = r.pairs.iter().map(|p| p.verdict).collect();
        assert_eq!(verdicts, [Verdict::Stable, Verdict::Relative, Verdict::Relative]);
        let joint = r.joint.unwrap();
        assert_eq!(joint.verdict, Verdict::Relative);
        assert!(joint.consistency.is_none());

        let r = classify(&[a.clone(), b], &tol()).unwrap();
        assert!(r.joint.is_none());
        assert!(matches!(
            classify(&[a], &tol()),
            Err(FactsError::TooFewObservers { .. })
        ));
    }
}
