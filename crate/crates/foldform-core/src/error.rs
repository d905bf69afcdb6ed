use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Crate-wide error type. Checks that can legitimately fail (grid residuals,
/// profile certification) report through `report::CheckResult` instead; this
/// enum is for contract violations and numeric breakdowns.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// Two objects living on different charts were combined.
    ChartMismatch { left: String, right: String },
    /// A coordinate name is not part of the chart.
    UnknownCoordinate(String),
    /// Operation received a form of the wrong degree.
    DegreeMismatch { expected: usize, found: usize },
    /// A point lies outside the chart domain.
    OutOfDomain { coord: String, value: f64 },
    /// Pointwise linear system was singular (form not contact there).
    DegenerateSystem { point: Vec<f64> },
    /// Gradient of a hypersurface level function vanished at a sample.
    DegenerateGradient { point: Vec<f64> },
    /// The vertical 2-form has no complement (fold point).
    DegenerateVertical { point: Vec<f64> },
    /// A gluing-profile or cutoff condition failed.
    ProfileCondition { condition: String, witness: f64 },
    /// ODE integration failed (step underflow or non-finite state).
    FlowFailure(String),
    /// Trajectory left the chart domain.
    DomainExit { time: f64, coord: String, value: f64 },
    /// Invalid argument or configuration value.
    InvalidParameter(String),
    /// Contact precondition failed on a coarse validation grid.
    NotContact { witness: Vec<f64>, ratio: f64 },
    /// Symbolic pullback requested on a numeric-flow map.
    FlowPullbackIsPointwise,
    /// Doubling search for the contact constant did not terminate.
    ContactConstantDiverged { witness: Vec<f64> },
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::ChartMismatch { left, right } => {
                write!(f, "chart mismatch: `{left}` vs `{right}`")
            }
            Error::UnknownCoordinate(c) => write!(f, "unknown coordinate `{c}`"),
            Error::DegreeMismatch { expected, found } => {
                write!(f, "degree mismatch: expected {expected}, found {found}")
            }
            Error::OutOfDomain { coord, value } => {
                write!(f, "point out of domain: {coord} = {value}")
            }
            Error::DegenerateSystem { point } => {
                write!(f, "singular pointwise system at {point:?}")
            }
            Error::DegenerateGradient { point } => {
                write!(f, "degenerate level gradient at {point:?}")
            }
            Error::DegenerateVertical { point } => {
                write!(f, "degenerate vertical form at {point:?}")
            }
            Error::ProfileCondition { condition, witness } => {
                write!(f, "profile condition {condition} violated at t = {witness}")
            }
            Error::FlowFailure(msg) => write!(f, "flow integration failed: {msg}"),
            Error::DomainExit { time, coord, value } => {
                write!(f, "trajectory exited domain at t = {time} ({coord} = {value})")
            }
            Error::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Error::NotContact { witness, ratio } => {
                write!(f, "form is not contact: ratio {ratio} at {witness:?}")
            }
            Error::FlowPullbackIsPointwise => {
                write!(f, "numeric-flow pullback is pointwise only")
            }
            Error::ContactConstantDiverged { witness } => {
                write!(f, "contact constant search diverged; degenerate at {witness:?}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
