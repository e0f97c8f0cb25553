use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// Argument outside the domain of an operation.
    InvalidInput(String),
    /// An inverse could not bracket its target value.
    Range { target: f64, searched_to: f64 },
    /// The operation needs every gain to be linear.
    RequiresLinearGains,
    /// The operation is defined for the max-form operator only.
    UnsupportedMode(&'static str),
    /// The operation cannot run on this index structure.
    UnsupportedStructure(&'static str),
    /// A state vector does not fit the operator's index structure.
    WindowMismatch { expected: usize, found: usize },
    /// `(1 + eps) * r >= 1` for the requested strict-decay point.
    EpsilonTooLarge { epsilon: f64, spectral_radius: f64 },
    /// `eta * r >= 1` for the requested Lyapunov function.
    EtaTooLarge { eta: f64, spectral_radius: f64 },
    /// The constant-profile reference formula does not apply.
    UnsupportedReference(String),
    /// An iteration exceeded its budget.
    Budget(String),
    /// A simulated state left the overflow guard.
    Overflow { step: usize, norm: f64 },
    /// An iterate grew past the divergence guard.
    Divergence { step: usize, norm: f64 },
}

impl Error {
    /// Numeric failures, as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::Range { .. } | Error::Budget(_) | Error::Overflow { .. } | Error::Divergence { .. }
        )
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::Range { target, searched_to } => write!(
                f,
                "range error: inverse target {target} not bracketed on [0, {searched_to}]"
            ),
            Error::RequiresLinearGains => write!(f, "operation requires linear gains"),
            Error::UnsupportedMode(what) => write!(f, "unsupported aggregation mode: {what}"),
            Error::UnsupportedStructure(what) => write!(f, "unsupported structure: {what}"),
            Error::WindowMismatch { expected, found } => {
                write!(f, "window mismatch: expected {expected} components, found {found}")
            }
            Error::EpsilonTooLarge { epsilon, spectral_radius } => write!(
                f,
                "epsilon too large: (1 + {epsilon}) * {spectral_radius} >= 1"
            ),
            Error::EtaTooLarge { eta, spectral_radius } => {
                write!(f, "eta too large: {eta} * {spectral_radius} >= 1")
            }
            Error::UnsupportedReference(msg) => write!(f, "unsupported reference: {msg}"),
            Error::Budget(msg) => write!(f, "budget exhausted: {msg}"),
            Error::Overflow { step, norm } => write!(f, "overflow at step {step}: norm {norm}"),
            Error::Divergence { step, norm } => {
                write!(f, "iterates diverge: norm {norm} at step {step}")
            }
        }
    }
}

impl core::error::Error for Error {}
