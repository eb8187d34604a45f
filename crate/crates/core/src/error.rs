use thiserror::Error;

use crate::model::ParamPoint;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("point {0} lies on a nodal line of the eigenstate")]
    SingularPoint(ParamPoint),

    #[error("point {0} is an energy degeneracy")]
    DegeneratePoint(ParamPoint),

    #[error("loop touches string near {0}")]
    LoopTouchesString(ParamPoint),

    #[error("phase step of {step:.3} rad exceeds the limit; refine {what}")]
    Refine { what: &'static str, step: f64 },

    #[error("energy gap closes along the sweep (gap {gap:.3e} at {at})")]
    GapClosure { gap: f64, at: ParamPoint },

    #[error("empty grid: {0}")]
    EmptyGrid(String),

    #[error("quadrature node hit a nodal point after {0} axis tilts")]
    QuadratureOnString(usize),

    #[error("selected eigenvector component vanishes on the loop near {0}")]
    ComponentVanishes(ParamPoint),
}

impl Error {
    /// Stable machine-readable identifier.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidModel(_) => "invalid_model",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Unsupported(_) => "unsupported",
            Error::SingularPoint(_) => "on_string",
            Error::DegeneratePoint(_) => "degenerate_point",
            Error::LoopTouchesString(_) => "loop_touches_string",
            Error::Refine { .. } => "refine_discretization",
            Error::GapClosure { .. } => "gap_closure",
            Error::EmptyGrid(_) => "empty_grid",
            Error::QuadratureOnString(_) => "quadrature_on_string",
            Error::ComponentVanishes(_) => "component_vanishes",
        }
    }

    /// True for errors caused by the numerical domain (strings, degeneracies,
    /// resolution) rather than by malformed input.
    pub fn is_domain(&self) -> bool {
        !matches!(
            self,
            Error::InvalidModel(_) | Error::InvalidArgument(_) | Error::Unsupported(_)
        )
    }
}
