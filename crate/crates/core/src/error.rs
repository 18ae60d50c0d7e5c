use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::params::{Field, ModelId};

/// One violated parameter constraint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub field: String,
    pub value: f64,
    pub constraint: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}={} violates {}", self.field, self.value, self.constraint)
    }
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("out of domain: {}", join_violations(.0))]
    OutOfDomain(Vec<Violation>),

    #[error("missing parameter `{0}`")]
    MissingParam(String),

    #[error("singular: alpha={alpha} lies within {guard:e} of the {what} pole at alpha={pole_label} (distance {distance:e})")]
    Singularity {
        what: String,
        pole_label: String,
        alpha: f64,
        distance: f64,
        guard: f64,
    },

    #[error("{0} is not a decision variable of model {1}")]
    NoSuchField(Field, ModelId),

    #[error("decision set is for model {found}, expected {expected}")]
    ModelMismatch { expected: ModelId, found: ModelId },

    #[error("follower objective is not concave along {coordinate} (second derivative {curvature:e})")]
    NonConcave { coordinate: String, curvature: f64 },

    #[error("leader optimum for {variable} sits on the search box boundary ({value}); widen the box")]
    BoxBoundary { variable: Field, value: f64 },

    #[error("leader search did not converge after {rounds} rounds (half-width {half_width:e})")]
    NotConverged { rounds: usize, half_width: f64 },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
