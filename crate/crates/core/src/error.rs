use alloc::boxed::Box;
use core::fmt;

use crate::qp::QpSolution;
use crate::sqp::SolverReport;

/// Errors produced by the model, the QP kernel and the allocators.
#[derive(Debug, Clone)]
pub enum Error {
    InvalidArgument(&'static str),
    /// A device has no associated users, so its average rate is undefined.
    UndefinedAverage {
        device: usize,
    },
    /// Gradient requested at a zero share for an interference-free device.
    Singularity {
        device: usize,
    },
    ZeroDistance {
        device: usize,
    },
    DimensionMismatch,
    Infeasible,
    /// The QP hit its iteration cap; the best iterate is attached.
    QpMaxIterations(Box<QpSolution>),
    /// SQP hit its iteration cap; the uncertified report is attached.
    MaxIterations(Box<SolverReport>),
    /// The barrier method did not reach its gap tolerance.
    BarrierMaxIterations,
    DegenerateStep,
    NoDecrease,
    BracketFailure,
    TooLargeInstance {
        devices: usize,
    },
    NotPositiveDefinite,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(msg) => write!(f, "invalid argument: {msg}"),
            Error::UndefinedAverage { device } => {
                write!(f, "device {device} has no associated users")
            }
            Error::Singularity { device } => {
                write!(f, "gradient diverges at zero share for device {device}")
            }
            Error::ZeroDistance { device } => {
                write!(f, "zero transmitter-receiver distance at device {device}")
            }
            Error::DimensionMismatch => f.write_str("dimension mismatch"),
            Error::Infeasible => f.write_str("quadratic subproblem is infeasible"),
            Error::QpMaxIterations(_) => f.write_str("QP active-set iteration limit reached"),
            Error::MaxIterations(report) => write!(
                f,
                "SQP iteration limit reached after {} iterations",
                report.iterations
            ),
            Error::BarrierMaxIterations => f.write_str("interior-point iteration limit reached"),
            Error::DegenerateStep => f.write_str("BFGS step is numerically zero"),
            Error::NoDecrease => f.write_str("line search found no merit decrease"),
            Error::BracketFailure => f.write_str("could not bracket the equality multiplier"),
            Error::TooLargeInstance { devices } => {
                write!(f, "grid search limited to 4 devices, got {devices}")
            }
            Error::NotPositiveDefinite => f.write_str("matrix is not positive definite"),
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
