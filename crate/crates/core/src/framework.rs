//! Quantum sample spaces.
//!
//! A [`ProjectiveDecomposition`] is a set of mutually orthogonal projectors
//! summing to the identity. Two decompositions can be reasoned about together
//! only when every projector of one commutes with every projector of the
//! other; conjunctions of non-commuting projectors are undefined rather than
//! false.

use thiserror::Error;

use crate::linalg::{self, ComplexMatrix, LinalgError, Tolerance};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FrameworkError {
    #[error("a decomposition needs at least one projector")]
    Empty,
    #[error("{projectors} projectors but {labels} labels")]
    LabelCount { projectors: usize, labels: usize },
    #[error("element {index} has shape {shape:?}, expected {dim}x{dim}")]
    DimMismatch {
        index: usize,
        shape: (usize, usize),
        dim: usize,
    },
    #[error("element {index} is not a projector")]
    NotAProjector { index: usize },
    #[error("elements {first} and {second} are not orthogonal (residual {residual:e})")]
    NotOrthogonal { first: usize, second: usize, residual: f64 },
    #[error("projectors do not sum to the identity (residual {residual:e})")]
    NotComplete { residual: f64 },
    #[error("label `{label}` at element {index} is already used")]
    DuplicateLabel { index: usize, label: String },
    #[error(
        "frameworks are incompatible: projectors {} and {} fail to commute (residual {max_residual:e})",
        worst_pair.0, worst_pair.1
    )]
    IncompatibleFrameworks {
        max_residual: f64,
        worst_pair: (usize, usize),
    },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T, E = FrameworkError> = std::result::Result<T, E>;

/// A quantum sample space: labeled, mutually orthogonal projectors that sum
/// to the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectiveDecomposition {
    dim: usize,
    projectors: Vec<ComplexMatrix>,
    labels: Vec<String>,
}

pub const TRIVIAL_LABEL: &str = "I";

impl ProjectiveDecomposition {
    /// Validates and builds a decomposition. Errors name the offending index.
    pub fn new(projectors: Vec<ComplexMatrix>, labels: Vec<String>, tol: &Tolerance) -> Result<Self> {
        if projectors.is_empty() {
            return Err(FrameworkError::Empty);
        }
        if projectors.len() != labels.len() {
            return Err(FrameworkError::LabelCount {
                projectors: projectors.len(),
                labels: labels.len(),
            });
        }
        let dim = projectors[0].rows();
        for (index, p) in projectors.iter().enumerate() {
            if p.shape() != (dim, dim) {
                return Err(FrameworkError::DimMismatch {
                    index,
                    shape: p.shape(),
                    dim,
                });
            }
            if !linalg::is_projector(p, tol)? {
                return Err(FrameworkError::NotAProjector { index });
            }
        }
        for (index, label) in labels.iter().enumerate() {
            if labels[..index].contains(label) {
                return Err(FrameworkError::DuplicateLabel {
                    index,
                    label: label.clone(),
                });
            }
        }
        for i in 0..projectors.len() {
            for j in i + 1..projectors.len() {
                let residual = (&projectors[i] * &projectors[j]).max_abs();
                if residual > tol.proj() {
                    return Err(FrameworkError::NotOrthogonal {
                        first: i,
                        second: j,
                        residual,
                    });
                }
            }
        }
        let residual = sum(dim, &projectors).max_abs_diff(&ComplexMatrix::identity(dim));
        if residual > tol.proj() {
            return Err(FrameworkError::NotComplete { residual });
        }
        Ok(ProjectiveDecomposition {
            dim,
            projectors,
            labels,
        })
    }

    /// The one-element sample space `{I}`.
    pub fn trivial(dim: usize) -> Self {
        ProjectiveDecomposition {
            dim,
            projectors: vec![ComplexMatrix::identity(dim)],
            labels: vec![TRIVIAL_LABEL.to_string()],
        }
    }

    /// Eigenspace decomposition of a Hermitian observable, labeled by
    /// eigenvalue (`"+1"`, `"-1"`, `"0"`, `"+0.5"`, ...), ascending.
    pub fn from_observable(h: &ComplexMatrix, tol: &Tolerance) -> Result<Self> {
        let eig = linalg::hermitian_eigenprojectors(h, tol)?;
        let labels = eig.iter().map(|e| eigenvalue_label(e.value)).collect();
        Self::new(eig.into_iter().map(|e| e.projector).collect(), labels, tol)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.projectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.projectors.is_empty()
    }

    pub fn projectors(&self) -> &[ComplexMatrix] {
        &self.projectors
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn projector(&self, label: &str) -> Option<&ComplexMatrix> {
        self.index_of(label).map(|i| &self.projectors[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &ComplexMatrix)> {
        self.labels.iter().map(String::as_str).zip(&self.projectors)
    }

    pub fn is_trivial(&self) -> bool {
        self.projectors.len() == 1
    }

    /// `P -> U† P U` for every element. `u` must be unitary for the result to
    /// remain a decomposition; this is not re-validated.
    pub fn conjugated(&self, u: &ComplexMatrix) -> Self {
        let ud = u.dagger();
        ProjectiveDecomposition {
            dim: self.dim,
            projectors: self.projectors.iter().map(|p| &(&ud * p) * u).collect(),
            labels: self.labels.clone(),
        }
    }
}

pub fn make_decomposition(
    projectors: Vec<ComplexMatrix>,
    labels: Vec<String>,
    tol: &Tolerance,
) -> Result<ProjectiveDecomposition> {
    ProjectiveDecomposition::new(projectors, labels, tol)
}

pub(crate) fn sum(dim: usize, projectors: &[ComplexMatrix]) -> ComplexMatrix {
    projectors
        .iter()
        .fold(ComplexMatrix::zeros(dim, dim), |acc, p| &acc + p)
}

/// Label for an eigenvalue, rounded to 10 decimal places, with an explicit
/// sign for nonzero values.
pub fn eigenvalue_label(value: f64) -> String {
    let rounded: f64 = format!("{value:.10}").parse().unwrap_or(value);
    if rounded == 0.0 {
        "0".to_string()
    } else if rounded > 0.0 {
        format!("+{rounded}")
    } else {
        format!("{rounded}")
    }
}

/// Result of `P ∧ Q` in the three-valued logic: the product when the
/// projectors commute, `Undefined` otherwise.
#[derive(Debug, Clone, PartialEq)]
pub enum Conjunction {
    Defined(ComplexMatrix),
    Undefined,
}

impl Conjunction {
    pub fn is_defined(&self) -> bool {
        matches!(self, Conjunction::Defined(_))
    }

    pub fn defined(self) -> Option<ComplexMatrix> {
        match self {
            Conjunction::Defined(m) => Some(m),
            Conjunction::Undefined => None,
        }
    }
}

fn require_projector(p: &ComplexMatrix, index: usize, tol: &Tolerance) -> Result<()> {
    if linalg::is_projector(p, tol)? {
        Ok(())
    } else {
        Err(FrameworkError::NotAProjector { index })
    }
}

pub fn conjunction(p: &ComplexMatrix, q: &ComplexMatrix, tol: &Tolerance) -> Result<Conjunction> {
    require_projector(p, 0, tol)?;
    require_projector(q, 1, tol)?;
    let residual = linalg::commutator(p, q)?.max_abs();
    if residual <= tol.comm() {
        Ok(Conjunction::Defined(p * q))
    } else {
        Ok(Conjunction::Undefined)
    }
}

/// `¬P = I - P`.
pub fn negation(p: &ComplexMatrix, tol: &Tolerance) -> Result<ComplexMatrix> {
    require_projector(p, 0, tol)?;
    Ok(&ComplexMatrix::identity(p.rows()) - p)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameworkCompatibility {
    pub compatible: bool,
    /// Largest `‖[P_j, Q_k]‖_max` over all pairs.
    pub max_residual: f64,
    /// `(j, k)` attaining `max_residual`.
    pub worst_pair: (usize, usize),
}

pub fn decompositions_compatible(
    a: &ProjectiveDecomposition,
    b: &ProjectiveDecomposition,
    tol: &Tolerance,
) -> Result<FrameworkCompatibility> {
    if a.dim != b.dim {
        return Err(LinalgError::DimMismatch {
            left: (a.dim, a.dim),
            right: (b.dim, b.dim),
        }
        .into());
    }
    let mut max_residual = 0.0;
    let mut worst_pair = (0, 0);
    for (j, p) in a.projectors.iter().enumerate() {
        for (k, q) in b.projectors.iter().enumerate() {
            let r = linalg::commutator(p, q)?.max_abs();
            if r > max_residual {
                max_residual = r;
                worst_pair = (j, k);
            }
        }
    }
    Ok(FrameworkCompatibility {
        compatible: max_residual <= tol.comm(),
        max_residual,
        worst_pair,
    })
}

/// Label joining two refined outcomes.
pub fn join_labels(a: &str, b: &str) -> String {
    format!("{a}∧{b}")
}

/// Common refinement of two compatible decompositions: every nonzero product
/// `P_j Q_k`, labeled `"j∧k"`, in row-major `(j, k)` order.
pub fn refine(
    a: &ProjectiveDecomposition,
    b: &ProjectiveDecomposition,
    tol: &Tolerance,
) -> Result<ProjectiveDecomposition> {
    let compat = decompositions_compatible(a, b, tol)?;
    if !compat.compatible {
        return Err(FrameworkError::IncompatibleFrameworks {
            max_residual: compat.max_residual,
            worst_pair: compat.worst_pair,
        });
    }
    let mut projectors = Vec::new();
    let mut labels = Vec::new();
    for (la, p) in a.iter() {
        for (lb, q) in b.iter() {
            let product = p * q;
            if product.max_abs() > tol.proj() {
                projectors.push(product);
                labels.push(join_labels(la, lb));
            }
        }
    }
    ProjectiveDecomposition::new(projectors, labels, tol)
}

/// Left fold of [`refine`] over a list of decompositions.
pub fn refine_all(decomps: &[ProjectiveDecomposition], tol: &Tolerance) -> Result<ProjectiveDecomposition> {
    let (first, rest) = decomps.split_first().ok_or(FrameworkError::Empty)?;
    rest.iter().try_fold(first.clone(), |acc, d| refine(&acc, d, tol))
}
