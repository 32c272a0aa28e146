use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },
    #[error("zeta = {zeta} must exceed -mu_c^2/(2a) = {bound}")]
    ZetaOutOfRange { zeta: f64, bound: f64 },
    #[error("Gamma function argument {0} is not positive")]
    GammaPole(f64),
    #[error("d(beta) is negative at every tested beta")]
    NoPositiveRegion,
    #[error("cumulative weight {rho_bar} is below every classified regime for kappa = {kappa}")]
    Unclassified { kappa: f64, rho_bar: f64 },
    #[error("dt = {0} exceeds the largest allowed step 1e-2")]
    StepTooLarge(f64),
    #[error("force points {0} and {1} coincide")]
    ForcePointCollision(f64, f64),
    #[error("point is swallowed: g - w = {0}")]
    Swallowed(f64),
    #[error("trace pull-back left the upper half-plane (Im = {0})")]
    BranchFailure(f64),
    #[error("time {t} is past the swallowing time {swallow}")]
    SwallowedPoint { t: f64, swallow: f64 },
    #[error("threshold s = {0} is not reached on this path")]
    NotReached(f64),
    #[error("spectral expansion truncated too early: last term bound {last:e} vs sum {sum:e}")]
    TruncationWarning { last: f64, sum: f64 },
    #[error("Jacobi exponent out of range: delta_plus = {0}, delta_minus = {1}")]
    ParameterOutOfRange(f64, f64),
    #[error("only {got} of the required {need} paths reached radial time s")]
    InsufficientSurvivors { got: usize, need: usize },
    #[error("degenerate least-squares fit")]
    DegenerateFit,
    #[error("resolution exceeded: grid spacing {spacing:e} below 10*sqrt(dt_min) = {limit:e}")]
    ResolutionExceeded { spacing: f64, limit: f64 },
}

impl Error {
    /// True for errors caused by bad inputs rather than numerical guards.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidParameter { .. }
                | Error::ZetaOutOfRange { .. }
                | Error::GammaPole(_)
                | Error::StepTooLarge(_)
                | Error::ForcePointCollision(..)
                | Error::ParameterOutOfRange(..)
                | Error::Unclassified { .. }
        )
    }
}

pub(crate) fn check(cond: bool, field: &'static str, reason: impl Into<String>) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            field,
            reason: reason.into(),
        })
    }
}
