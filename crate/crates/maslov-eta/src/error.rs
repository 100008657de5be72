//! Error type shared by every module of the crate.

use thiserror::Error;

/// Errors raised by the numerical routines.
///
/// Every variant carries enough context (residuals, offending pair, grid
/// node) to locate the failure without re-running the computation.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An input violated a documented precondition.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// Two Lagrangian projections that must be transverse are not.
    #[error("pair ({i}, {j}) is not transverse{}", node_suffix(.node))]
    Transversality {
        /// Index of the first projection of the offending pair.
        i: usize,
        /// Index of the second projection of the offending pair.
        j: usize,
        /// Grid node (multi-index) where the failure occurred, if any.
        node: Option<Vec<usize>>,
    },

    /// A constituent triple of a composite index is not pairwise transverse.
    #[error("constituent triple {constituent}: pair ({i}, {j}) is not transverse")]
    ConstituentTransversality {
        /// Index of the constituent triple.
        constituent: usize,
        /// First projection of the offending pair within the constituent.
        i: usize,
        /// Second projection of the offending pair within the constituent.
        j: usize,
    },

    /// A unitary has an eigenvalue too close to the branch cut at 1.
    #[error("eigenvalue within branch tolerance of 1 (phase {phase:.3e}){}", node_suffix(.node))]
    BranchCut {
        /// Offending phase in `(0, 2π]`.
        phase: f64,
        /// Grid node where the failure occurred, if any.
        node: Option<Vec<usize>>,
    },

    /// The Maslov form has a near-zero eigenvalue beyond its forced kernel.
    #[error("degenerate hermitian form: {n_zero} near-zero eigenvalues, expected {expected}{}", node_suffix(.node))]
    Degeneracy {
        /// Number of eigenvalues inside `(-gap_tol, gap_tol)`.
        n_zero: usize,
        /// Expected kernel dimension.
        expected: usize,
        /// Grid node where the failure occurred, if any.
        node: Option<Vec<usize>>,
    },

    /// A quantity that must be locally constant over a family varied.
    #[error("value changed across the grid: {first} at node {first_node:?}, {other} at node {other_node:?}")]
    ContinuityBreak {
        /// Value at the first node.
        first: i64,
        /// Node index of the first value.
        first_node: Vec<usize>,
        /// Differing value.
        other: i64,
        /// Node index of the differing value.
        other_node: Vec<usize>,
    },

    /// The requested mode cutoff cannot meet the truncation tolerance.
    #[error("mode truncation insufficient: tail bound {tail:.3e} exceeds {tol:.3e}")]
    TruncationInsufficient {
        /// Estimated tail contribution.
        tail: f64,
        /// Tolerance that was requested.
        tol: f64,
    },

    /// The spatial quadrature is too coarse for the requested modes.
    #[error("quadrature too coarse: {nodes} nodes, at least {required} needed")]
    QuadratureInsufficient {
        /// Nodes supplied.
        nodes: usize,
        /// Nodes required by the oscillation criterion.
        required: usize,
    },

    /// A scalar argument lies outside the domain of a function.
    #[error("argument {value} outside domain {domain}")]
    Domain {
        /// Offending value.
        value: f64,
        /// Human-readable description of the admissible domain.
        domain: &'static str,
    },

    /// An index (branch, mode, node) is out of range.
    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    /// A differential-form operation received incompatible degrees.
    #[error("form degree mismatch: {0}")]
    DegreeMismatch(String),

    /// A matrix that should be a Lagrangian projection is malformed.
    #[error("malformed projection: {0}")]
    Malformed(String),
}

fn node_suffix(node: &Option<Vec<usize>>) -> String {
    match node {
        Some(n) => format!(" at node {n:?}"),
        None => String::new(),
    }
}

impl Error {
    /// Attach a grid node to errors that carry node information.
    pub fn at_node(self, at: &[usize]) -> Self {
        let n = Some(at.to_vec());
        match self {
            Error::Transversality { i, j, .. } => Error::Transversality { i, j, node: n },
            Error::BranchCut { phase, .. } => Error::BranchCut { phase, node: n },
            Error::Degeneracy { n_zero, expected, .. } => Error::Degeneracy { n_zero, expected, node: n },
            other => other,
        }
    }

    /// Re-label the projections of a transversality error.
    pub fn with_pair(self, a: usize, b: usize) -> Self {
        match self {
            Error::Transversality { node, .. } => Error::Transversality { i: a, j: b, node },
            other => other,
        }
    }
}

/// Result alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
