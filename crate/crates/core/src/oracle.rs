//! Brute-force cross-checks for history families.
//!
//! Nothing in here calls the chain-ket code in [`crate::histories`]. The
//! probabilities are recomputed from the raw family data with a sequential
//! Born rule (evolve, project, renormalize, multiply the step weights).

use thiserror::Error;

use crate::histories::HistoryFamily;
use crate::linalg::{ComplexMatrix, Tolerance, C64};

/// Largest number of outcomes per slot the additivity scan accepts.
pub const SCAN_MAX_OUTCOMES: usize = 12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error("expected {expected} outcome labels, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("slot {slot} has no outcome `{label}`")]
    UnknownLabel { slot: usize, label: String },
    #[error("slot {slot} has {outcomes} outcomes; the additivity scan handles at most {cap}")]
    SizeCap { slot: usize, outcomes: usize, cap: usize },
}

/// One outcome label per slot `t1..tn`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutcomeSequence {
    pub labels: Vec<String>,
}

impl OutcomeSequence {
    pub fn new<S: Into<String>>(labels: impl IntoIterator<Item = S>) -> Self {
        OutcomeSequence {
            labels: labels.into_iter().map(Into::into).collect(),
        }
    }
}

fn matvec(m: &ComplexMatrix, v: &[C64]) -> Vec<C64> {
    let n = m.cols();
    m.entries()
        .chunks_exact(n)
        .map(|row| {
            let mut acc = C64::new(0.0, 0.0);
            for (a, b) in row.iter().zip(v) {
                acc += a * b;
            }
            acc
        })
        .collect()
}

/// Sequential Born rule with collapse. Returns the product of the step
/// probabilities.
fn born_sequence<'a>(initial: &[C64], steps: impl Iterator<Item = (&'a ComplexMatrix, &'a ComplexMatrix)>) -> f64 {
    let mut state = initial.to_vec();
    let mut probability = 1.0;
    for (evolution, projector) in steps {
        let projected = matvec(projector, &matvec(evolution, &state));
        let weight: f64 = projected.iter().map(|z| z.norm_sqr()).sum();
        if weight == 0.0 {
            return 0.0;
        }
        probability *= weight;
        let renorm = 1.0 / weight.sqrt();
        state = projected.into_iter().map(|z| z * renorm).collect();
    }
    probability
}

fn resolve(family: &HistoryFamily, seq: &OutcomeSequence) -> Result<Vec<usize>, OracleError> {
    if seq.labels.len() != family.slots().len() {
        return Err(OracleError::LengthMismatch {
            expected: family.slots().len(),
            got: seq.labels.len(),
        });
    }
    seq.labels
        .iter()
        .zip(family.slots())
        .enumerate()
        .map(|(slot, (label, d))| {
            d.labels()
                .iter()
                .position(|l| l == label)
                .ok_or_else(|| OracleError::UnknownLabel {
                    slot,
                    label: label.clone(),
                })
        })
        .collect()
}

/// Probability of observing `seq` in successive projective measurements.
pub fn sequential_probability(family: &HistoryFamily, seq: &OutcomeSequence) -> Result<f64, OracleError> {
    let outcomes = resolve(family, seq)?;
    let steps = family
        .evolutions()
        .iter()
        .zip(family.slots())
        .zip(outcomes)
        .map(|((e, d), o)| (e.unitary(), &d.projectors()[o]));
    Ok(born_sequence(family.initial().amplitudes(), steps))
}

/// A merge of two outcomes at one slot under which probabilities fail to add.
#[derive(Debug, Clone, PartialEq)]
pub struct AdditivityViolation {
    pub slot: usize,
    pub time: String,
    /// The two merged outcome labels at `slot`.
    pub merged: (String, String),
    /// Outcome labels at every slot; the entry at `slot` is `"a∨b"`.
    pub context: Vec<String>,
    pub merged_probability: f64,
    pub fine_sum: f64,
    /// `merged_probability - fine_sum`, equal to `2 Re⟨Y_a|Y_b⟩`.
    pub discrepancy: f64,
}

/// Tries every pairwise merge of outcomes at every slot, for every choice of
/// outcomes at the other slots, and reports each case where the merged
/// probability differs from the sum of the fine-grained ones by more than
/// `10 eps_cons`.
pub fn exhaustive_additivity_scan(
    family: &HistoryFamily,
    tol: &Tolerance,
) -> Result<Vec<AdditivityViolation>, OracleError> {
    let slots = family.slots();
    for (slot, d) in slots.iter().enumerate() {
        if d.len() > SCAN_MAX_OUTCOMES {
            return Err(OracleError::SizeCap {
                slot,
                outcomes: d.len(),
                cap: SCAN_MAX_OUTCOMES,
            });
        }
    }
    let limit = 10.0 * tol.cons();
    let initial = family.initial().amplitudes();
    let evolutions: Vec<&ComplexMatrix> = family.evolutions().iter().map(|e| e.unitary()).collect();
    let mut violations = Vec::new();

    for (slot, decomp) in slots.iter().enumerate() {
        let others: Vec<usize> = (0..slots.len()).filter(|&k| k != slot).collect();
        for a in 0..decomp.len() {
            for b in a + 1..decomp.len() {
                let merged_projector = &decomp.projectors()[a] + &decomp.projectors()[b];
                let mut choice = vec![0usize; slots.len()];
                loop {
                    let string_with = |at_slot: &ComplexMatrix| -> f64 {
                        let steps = (0..slots.len()).map(|k| {
                            let p = if k == slot {
                                at_slot
                            } else {
                                &slots[k].projectors()[choice[k]]
                            };
                            (evolutions[k], p)
                        });
                        born_sequence(initial, steps)
                    };
                    let fine_sum = string_with(&decomp.projectors()[a]) + string_with(&decomp.projectors()[b]);
                    let merged_probability = string_with(&merged_projector);
                    let discrepancy = merged_probability - fine_sum;
                    if discrepancy.abs() > limit {
                        let merged = (decomp.labels()[a].clone(), decomp.labels()[b].clone());
                        let context = (0..slots.len())
                            .map(|k| {
                                if k == slot {
                                    format!("{}∨{}", merged.0, merged.1)
                                } else {
                                    slots[k].labels()[choice[k]].clone()
                                }
                            })
                            .collect();
                        violations.push(AdditivityViolation {
                            slot,
                            time: family.grid().slot_label(slot).to_string(),
                            merged,
                            context,
                            merged_probability,
                            fine_sum,
                            discrepancy,
                        });
                    }
                    // advance over the other slots, last fastest
                    let mut advanced = false;
                    for &k in others.iter().rev() {
                        choice[k] += 1;
                        if choice[k] < slots[k].len() {
                            advanced = true;
                            break;
                        }
                        choice[k] = 0;
                    }
                    if !advanced {
                        break;
                    }
                }
            }
        }
    }
    Ok(violations)
}

/// Largest `|sequential_probability - reference(history)|` over a family.
#[derive(Debug, Clone, PartialEq)]
pub struct CrossCheck {
    pub histories: usize,
    pub max_discrepancy: f64,
    /// Label of the history attaining `max_discrepancy`.
    pub worst_history: Option<String>,
}

/// Compares the oracle against `reference` on every history of `family`.
pub fn cross_check<E>(
    family: &HistoryFamily,
    mut reference: impl FnMut(&HistoryFamily, &crate::histories::History) -> Result<f64, E>,
) -> Result<CrossCheck, E> {
    let mut check = CrossCheck {
        histories: 0,
        max_discrepancy: 0.0,
        worst_history: None,
    };
    for h in family.histories() {
        let seq = OutcomeSequence::new(h.labels().iter().cloned());
        let oracle = sequential_probability(family, &seq).expect("family labels resolve");
        let d = (oracle - reference(family, h)?).abs();
        if check.worst_history.is_none() || d > check.max_discrepancy {
            check.max_discrepancy = d;
            check.worst_history = Some(h.label());
        }
        check.histories += 1;
    }
    Ok(check)
}
