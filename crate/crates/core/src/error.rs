use thiserror::Error;

/// Failures surfaced by the simulation pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("degenerate coupling: Rabi frequency is zero, use the free solution")]
    DegenerateCoupling,

    #[error("matching system is singular at k = {k:e} 1/m (condition estimate {condition:e})")]
    SingularMatching { k: f64, condition: f64 },

    #[error("wavenumber grid reaches k = {k_min:e} 1/m; every node must be positive")]
    NonPositiveGrid { k_min: f64 },

    #[error("quadrature did not reach tolerance {tolerance:e}: achieved {achieved:e}")]
    QuadratureTolerance { tolerance: f64, achieved: f64 },

    #[error("density {density:e} below floor at x = {x:e} m, t = {t:e} s")]
    NearNode { x: f64, t: f64, density: f64 },

    #[error("step size underflow at x = {x:e} m, t = {t:e} s")]
    StepUnderflow { x: f64, t: f64 },

    #[error("no bifurcation: transmission probability {transmission} leaves {outcome} as the only outcome")]
    NoBifurcation { transmission: f64, outcome: Outcome },

    #[error("presence probabilities not converged at t_end = {t_end:e} s: Q(0) = {q0}, Q(l) = {ql}, |T|^2 = {transmission}")]
    NotConverged { t_end: f64, q0: f64, ql: f64, transmission: f64 },

    #[error("transmission-time integrand negative ({value:e}) at t = {t:e} s")]
    InconsistentPresence { t: f64, value: f64 },

    #[error("no arrivals: current integrates to zero")]
    NoArrivals,

    #[error("time step {dt:e} s too coarse: phase per step {phase} exceeds {limit}")]
    TimeStepTooLarge { dt: f64, phase: f64, limit: f64 },

    #[error("grid domain [{x_min:e}, {x_max:e}] m does not contain the required interval [{need_min:e}, {need_max:e}] m")]
    DomainTooSmall { x_min: f64, x_max: f64, need_min: f64, need_max: f64 },
}

/// The single surviving outcome when no bifurcation exists.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Transmission,
    Reflection,
}

impl std::fmt::Display for Outcome {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Outcome::Transmission => f.write_str("transmission"),
            Outcome::Reflection => f.write_str("reflection"),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
