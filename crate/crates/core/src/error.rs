use thiserror::Error;

/// Errors produced by the market model, the pricing policies and the harness.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("price {0} is outside [0, 1]")]
    PriceOutOfRange(f64),

    #[error("supplier {supplier} needs a context but none was supplied")]
    MissingContext { supplier: usize },

    #[error("context has dimension {got}, cost parameters expect {expected}")]
    ContextDimension { expected: usize, got: usize },

    #[error("invalid cost parameters: {0}")]
    InvalidCost(String),

    #[error("demand {demand} cannot be met at price 1 (maximum production {max_production})")]
    Infeasible { demand: f64, max_production: f64 },

    #[error("supplier {supplier} has a cost that is not strongly convex")]
    NotStronglyConvex { supplier: usize },

    #[error("equilibrium bisection did not converge after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("demand {demand} is outside [{lo}, {hi}]")]
    DemandOutOfRange { demand: f64, lo: f64, hi: f64 },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("policy {policy} is incompatible with this instance: {reason}")]
    Incompatible { policy: String, reason: String },

    #[error("scaling fit is degenerate: {0}")]
    DegenerateFit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Short stable identifier, used in the CLI's machine-readable error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::PriceOutOfRange(_) => "price_out_of_range",
            Error::MissingContext { .. } => "missing_context",
            Error::ContextDimension { .. } => "context_dimension",
            Error::InvalidCost(_) => "invalid_cost",
            Error::Infeasible { .. } => "infeasible",
            Error::NotStronglyConvex { .. } => "not_strongly_convex",
            Error::NoConvergence { .. } => "no_convergence",
            Error::DemandOutOfRange { .. } => "demand_out_of_range",
            Error::InvalidInstance(_) => "invalid_instance",
            Error::InvalidParameter(_) => "invalid_parameter",
            Error::Incompatible { .. } => "incompatible",
            Error::DegenerateFit(_) => "degenerate_fit",
            Error::Config(_) => "config",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
