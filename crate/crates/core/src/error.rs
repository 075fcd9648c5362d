use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("infeasible stream design: {0}")]
    Infeasible(String),
    #[error("effective signal of IRS {0} is numerically zero")]
    ZeroSignal(usize),
    #[error("singular Fisher information, null direction ({:.6}, {:.6})", .null_direction[0], .null_direction[1])]
    SingularFim { null_direction: [f64; 2] },
    #[error("every trial produced a singular Fisher information matrix")]
    AllSingular,
    #[error("delay peak at search window boundary (lag {0})")]
    WindowBoundary(usize),
    #[error("ill-conditioned pseudo-inverse (condition number {0:.3e})")]
    IllConditioned(f64),
    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("singular linear system: {0}")]
    Singular(String),
    #[error("unknown scenario preset `{0}`")]
    UnknownPreset(String),
    #[error("parse error: {0}")]
    Parse(String),
}
