use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("energy conservation violated: relative residual {relative:.3e} exceeds {tolerance:.0e}")]
    EnergyConservation { relative: f64, tolerance: f64 },

    #[error("invalid defect map: {0}")]
    InvalidDefectMap(String),

    #[error("integration failed to converge after {refinements} refinements (last endpoints {previous:?} -> {last:?})")]
    IntegrationFailure {
        refinements: usize,
        previous: [f64; 3],
        last: [f64; 3],
    },

    #[error("quadrature did not converge: partial estimate {estimate:e} with error bound {error_bound:e}")]
    QuadratureFailure { estimate: f64, error_bound: f64 },

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("normal equations are rank deficient (parameter `{parameter}`)")]
    RankDeficient { parameter: String },

    #[error("insufficient fringes: found {maxima} maxima and {minima} minima")]
    InsufficientFringes { maxima: usize, minima: usize },

    #[error("contrast exceeds facet-reflection limit (would give alpha = {alpha_per_cm:.6} cm^-1)")]
    ContrastExceedsFacetLimit { alpha_per_cm: f64 },

    #[error("pump wavelength {lambda_nm} nm maps to {temperature_c} °C, outside the noise profile [{lo_c}, {hi_c}] °C")]
    OutOfRange {
        lambda_nm: f64,
        temperature_c: f64,
        lo_c: f64,
        hi_c: f64,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    /// Numerical non-convergence, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::IntegrationFailure { .. } | Error::QuadratureFailure { .. }
        )
    }
}
