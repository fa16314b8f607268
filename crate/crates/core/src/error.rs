//! Error taxonomy shared by all modules.

use thiserror::Error;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    // --- metric / instance validation ---
    #[error("distance matrix is not square: {rows} rows, row {row} has {len} entries")]
    NotSquare { rows: usize, row: usize, len: usize },
    #[error("distance matrix entry ({a},{b}) is not finite")]
    NotFinite { a: usize, b: usize },
    #[error("asymmetric distances at ({a},{b}): {forward} vs {backward}")]
    Asymmetric { a: usize, b: usize, forward: f64, backward: f64 },
    #[error("negative distance at ({a},{b}): {value}")]
    NegativeDistance { a: usize, b: usize, value: f64 },
    #[error("nonzero diagonal at {j}: {value}")]
    NonzeroDiagonal { j: usize, value: f64 },
    #[error("triangle inequality violated on ({a},{b},{c}): d(a,c)={ac} > d(a,b)+d(b,c)={abc}")]
    TriangleViolation { a: usize, b: usize, c: usize, ac: f64, abc: f64 },
    #[error("weight row {group} has no strictly positive entry")]
    ZeroWeightGroup { group: usize },
    #[error("weight {value} for group {group}, point {point} is negative or not finite")]
    BadWeight { group: usize, point: usize, value: f64 },
    #[error("invalid center budget k={k} for m={m} points")]
    InvalidK { k: usize, m: usize },
    #[error("norm exponent {name}={value} must be a finite real >= 1")]
    BadExponent { name: &'static str, value: f64 },
    #[error("weight matrix row {row} has {len} entries, expected m={m}")]
    WeightShape { row: usize, len: usize, m: usize },
    #[error("point index {index} out of range for m={m}")]
    PointOutOfRange { index: usize, m: usize },
    #[error("group index {index} out of range for n={n}")]
    GroupOutOfRange { index: usize, n: usize },
    #[error("center set is empty")]
    EmptyCenterSet,
    #[error("vol is undefined for U = [m]; the complement must be non-empty")]
    FullSet,
    #[error("cluster family sets are not pairwise disjoint (point {point} repeats)")]
    FamilyOverlap { point: usize },

    // --- relaxation solver ---
    #[error("operation requires regime {expected:?} but solution is {actual:?}")]
    RegimeMismatch { expected: crate::relax::Regime, actual: crate::relax::Regime },
    #[error("master LP reported infeasible; this cannot happen for a valid instance")]
    Infeasible,
    #[error("cutting-plane solver hit the iteration cap ({cap}) before reaching tolerance")]
    IterationLimit { cap: usize },

    // --- reduction / rounding ---
    #[error("bipartition needs |K| >= 2, got {size}")]
    DegenerateK { size: usize },
    #[error("no surplus: |K|={ksize} <= k={k}")]
    NoSurplus { ksize: usize, k: usize },
    #[error("closing probability {value} for center {center} exceeds 1")]
    ProbabilityOverflow { center: usize, value: f64 },
    #[error("local search needs at least k={k} points, got {points}")]
    TooFewPoints { points: usize, k: usize },

    // --- oracle ---
    #[error("enumeration too large: {count} subsets exceeds limit {limit}")]
    TooLarge { count: u128, limit: u128 },

    // --- hardness generators ---
    #[error("dense case requires eps < delta, got eps={eps}, delta={delta}")]
    ParameterOrder { eps: f64, delta: f64 },
    #[error("Min s-Union instance invalid: {reason}")]
    BadMinSUnion { reason: String },

    // --- io ---
    #[error("document parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(String),

    /// An invariant the implementation guarantees was observed broken;
    /// indicates a bug rather than bad input.
    #[error("internal assertion failed: {0}")]
    Internal(String),
}

impl Error {
    /// Whether this is a user/input problem (CLI exit 1) as opposed to an
    /// internal assertion failure (exit 2).
    pub fn is_validation(&self) -> bool {
        !matches!(
            self,
            Error::Infeasible
                | Error::IterationLimit { .. }
                | Error::ProbabilityOverflow { .. }
                | Error::Internal(_)
        )
    }
}
