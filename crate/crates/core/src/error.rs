use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singular kernel: {0}")]
    SingularKernel(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("quadrature did not converge on [{a}, {b}]: estimated error {err:e} after {evals} evaluations")]
    Quadrature { a: f64, b: f64, err: f64, evals: usize },
    #[error("integrator instability at tau = {tau}: {detail}")]
    Instability { tau: f64, detail: String },
    #[error("step size error: {0}")]
    StepSize(String),
    #[error("search error: {0}")]
    Search(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("calibration error: {0}")]
    Calibration(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn ensure_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("{name} must be finite, got {x}")))
    }
}
