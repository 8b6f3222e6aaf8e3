use std::fmt;

use thiserror::Error;

use crate::metric::{MetricViolation, PointId};
use crate::rational::Rational;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Coarse classification used for CLI exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Parse,
    Validation,
    Mathematical,
    Internal,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Parse => 1,
            ErrorClass::Validation => 2,
            ErrorClass::Mathematical => 3,
            ErrorClass::Internal => 4,
        }
    }
}

/// Which half of the Katětov condition failed for a pair of points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum KatetovViolation {
    /// `|f(x) - f(y)| > d(x, y)`
    Lipschitz {
        x: PointId,
        y: PointId,
    },
    /// `d(x, y) > f(x) + f(y)`
    LowerBound {
        x: PointId,
        y: PointId,
    },
    NegativeValue {
        x: PointId,
    },
}

impl fmt::Display for KatetovViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KatetovViolation::Lipschitz { x, y } => {
                write!(f, "|f({x}) - f({y})| exceeds d({x}, {y})")
            }
            KatetovViolation::LowerBound { x, y } => {
                write!(f, "d({x}, {y}) exceeds f({x}) + f({y})")
            }
            KatetovViolation::NegativeValue { x } => write!(f, "f({x}) is negative"),
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("invalid metric: {}", join_violations(.0))]
    InvalidMetric(Vec<MetricViolation>),

    #[error("empty subset")]
    EmptySubset,

    #[error("point {0} is not in the space")]
    PointNotInSpace(PointId),

    #[error("operands live on different spaces")]
    SpaceMismatch,

    #[error("index mapping does not embed isometrically: d({a}, {b}) is not preserved")]
    BadEmbedding { a: PointId, b: PointId },

    #[error("not a Katětov map: {0}")]
    InvalidKatetovMap(KatetovViolation),

    #[error("map realizes the existing point {existing}")]
    DuplicatePoint { existing: PointId },

    #[error("map value {value} at {point} exceeds the level cap {cap}")]
    CapExceeded {
        point: PointId,
        value: Rational,
        cap: Rational,
    },

    #[error("support of size {size} is too large for level {level}")]
    SupportTooLargeForLevel { level: usize, size: usize },

    #[error("sequence is not Cauchy at index {index}: {reason}")]
    NotCauchy { index: usize, reason: String },

    #[error("term {index} has minimal support {cardinality} > {bound}")]
    SupportTooLarge {
        index: usize,
        cardinality: usize,
        bound: usize,
    },

    #[error("isometry image of provenance record {record} (point {point}) was not adjoined")]
    OrbitNotRealized { record: usize, point: PointId },

    #[error("not an isometry: d({a}, {b}) is not preserved")]
    NotAnIsometry { a: PointId, b: PointId },

    #[error("tower diameter {reached} cannot reach {needed} within {max_levels} levels")]
    TowerGrowthFailed {
        needed: Rational,
        reached: Rational,
        max_levels: usize,
    },

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("witness plan has no index i with k_i = {k} and j_i >= {j}")]
    WitnessPlanInsufficient { k: usize, j: usize },

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("internal invariant broken: {0}")]
    Internal(String),
}

fn join_violations(v: &[MetricViolation]) -> String {
    v.iter()
        .map(|x| x.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

impl Error {
    pub fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Parse { .. } | Error::Io { .. } => ErrorClass::Parse,
            Error::InvalidMetric(_)
            | Error::EmptySubset
            | Error::PointNotInSpace(_)
            | Error::SpaceMismatch
            | Error::PreconditionViolated(_)
            | Error::SupportTooLarge { .. }
            | Error::SupportTooLargeForLevel { .. }
            | Error::NotAnIsometry { .. }
            | Error::BadEmbedding { .. } => ErrorClass::Validation,
            Error::InvalidKatetovMap(_)
            | Error::DuplicatePoint { .. }
            | Error::CapExceeded { .. }
            | Error::NotCauchy { .. }
            | Error::OrbitNotRealized { .. }
            | Error::TowerGrowthFailed { .. }
            | Error::WitnessPlanInsufficient { .. } => ErrorClass::Mathematical,
            Error::Internal(_) => ErrorClass::Internal,
        }
    }
}
