use thiserror::Error;

/// Errors produced by the analytical models, the searches and the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid threshold policy: {0}")]
    InvalidPolicy(String),

    #[error("invalid parameter `{name}`: {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("region index {region} out of range for a policy with {regions} regions")]
    InvalidRegion { region: usize, regions: usize },

    #[error("policy has {expected} regions but {found} entries were supplied")]
    RegionMismatch { expected: usize, found: usize },

    #[error("stationary solve failed: {reason} (condition estimate {condition:.3e})")]
    IllConditioned { condition: f64, reason: String },

    #[error("degenerate inter-departure decomposition: idle probability p0 = {0}")]
    DegenerateDecomposition(f64),

    #[error("singular moment system for the empty-arrival density (determinant {0:e})")]
    SingularMomentSystem(f64),

    #[error("unstable channel: arrival rate {arrival_rate} >= per-queue service rate {service_rate}")]
    Unstable { arrival_rate: f64, service_rate: f64 },

    #[error("fixed point did not converge after {0} iterations")]
    NonConvergence(usize),

    #[error("sigma must lie in [0, 1), got {0}")]
    InvalidSigma(f64),

    #[error("quadrature did not reach tolerance {tolerance:e} (estimated error {estimate:e})")]
    Quadrature { tolerance: f64, estimate: f64 },

    #[error("invalid simulation config: {0}")]
    InvalidSimConfig(String),

    #[error("empty sample set")]
    EmptySamples,
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn positive(name: &'static str, value: f64) -> Result<f64> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(Error::InvalidParameter { name, value })
    }
}
