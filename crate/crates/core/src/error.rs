//! Error type shared by all solver and analysis routines.

use std::fmt;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Failures surfaced by construction, analysis, optimization and simulation
/// routines.
///
/// Quantities that are legitimately unbounded (an infinite objective on an
/// unstable closed loop, say) are reported as values, not errors; an `Error`
/// always means the requested computation has no meaningful answer.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Matrix or vector dimensions are inconsistent. The message names the
    /// offending operand and the expected shape.
    DimensionMismatch(String),
    /// The closed-loop matrix is not Hurwitz, so the requested quantity
    /// (DC gain, subgradient, worst-case disturbance, ...) is undefined.
    UnstableClosedLoop {
        /// Largest real part over the closed-loop spectrum.
        spectral_abscissa: f64,
    },
    /// A closed-form expression was evaluated outside the input region where
    /// the closed loop is stable.
    OutsideStabilityRegion {
        /// How far inside the unstable region the input sits
        /// (stability margin; nonpositive here).
        margin: f64,
    },
    /// Subdifferential weights are not a valid convex combination over the
    /// active singular triplets.
    InvalidWeights(String),
    /// A gradient was requested where the top singular value is repeated and
    /// no structural condition guarantees differentiability.
    DegenerateTopSingularValue {
        /// Number of singular values within the multiplicity tolerance of
        /// the largest one.
        active: usize,
    },
    /// The stabilizing-input search exhausted its ray without finding a
    /// Hurwitz closed loop.
    NoStabilizingInitialPoint,
    /// Robustification requires every entry of the input map `D_u` to be
    /// nonpositive so that larger doses never help the disturbance path.
    NonMonotoneInputMap {
        /// First offending entry (zero-based row, column) of `D_u`.
        entry: (usize, usize),
        value: f64,
    },
    /// A perturbation sample exceeds the declared uncertainty bounds.
    BoundViolation(String),
    /// Simulated state left the trust region (entry magnitude above the
    /// blow-up guard) before the horizon was reached.
    StateBlowup {
        /// Time at which the guard first triggered.
        time: f64,
    },
    /// The state weight `Q` has a negative eigenvalue, so it admits no real
    /// symmetric square root.
    IndefiniteStateWeight {
        /// Most negative eigenvalue found.
        eigenvalue: f64,
    },
    /// The input weight `R` is not positive definite.
    IndefiniteControlWeight {
        /// Smallest eigenvalue found.
        eigenvalue: f64,
    },
    /// Caller-supplied options are out of range (nonpositive step, empty
    /// horizon, non-zero-mean variation, ...).
    InvalidOptions(String),
    /// A dense linear-algebra kernel failed where the surrounding contract
    /// says it cannot (e.g. LU solve on a certified-Hurwitz matrix).
    Numerical(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::DimensionMismatch(msg) => write!(f, "dimension mismatch: {msg}"),
            Error::UnstableClosedLoop { spectral_abscissa } => write!(
                f,
                "closed loop is not Hurwitz (spectral abscissa {spectral_abscissa:.6e})"
            ),
            Error::OutsideStabilityRegion { margin } => write!(
                f,
                "input lies outside the stability region (margin {margin:.6e})"
            ),
            Error::InvalidWeights(msg) => write!(f, "invalid subdifferential weights: {msg}"),
            Error::DegenerateTopSingularValue { active } => write!(
                f,
                "objective is not differentiable here: {active} singular values share the peak"
            ),
            Error::NoStabilizingInitialPoint => {
                write!(f, "no stabilizing constant input found along the search ray")
            }
            Error::NonMonotoneInputMap { entry, value } => write!(
                f,
                "input map entry D_u[{},{}] = {value} is positive; robustification \
                 requires a nonpositive input map",
                entry.0, entry.1
            ),
            Error::BoundViolation(msg) => write!(f, "uncertainty bound violated: {msg}"),
            Error::StateBlowup { time } => {
                write!(f, "state magnitude exceeded the blow-up guard at t = {time:.6}")
            }
            Error::IndefiniteStateWeight { eigenvalue } => write!(
                f,
                "state weight Q is indefinite (eigenvalue {eigenvalue:.6e}); \
                 no real square root"
            ),
            Error::IndefiniteControlWeight { eigenvalue } => write!(
                f,
                "input weight R is not positive definite (eigenvalue {eigenvalue:.6e})"
            ),
            Error::InvalidOptions(msg) => write!(f, "invalid options: {msg}"),
            Error::Numerical(msg) => write!(f, "numerical failure: {msg}"),
        }
    }
}

impl std::error::Error for Error {}
