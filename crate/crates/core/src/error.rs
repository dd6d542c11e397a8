use alloc::string::String;

/// Errors raised by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("{what} = {value} lies outside its domain {domain}")]
    Domain {
        what: &'static str,
        value: f64,
        domain: &'static str,
    },

    #[error("shape mismatch: expected {expected} samples, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("resolvent is near-singular at r = {re} + {im}i (|Phi| = {modulus:e})")]
    NearSingular { re: f64, im: f64, modulus: f64 },

    #[error("distance fell below the noise floor before the fit window")]
    ConvergedBeforeWindow,

    #[error("fit window [{start}, {end}] holds fewer than two usable samples")]
    InsufficientData { start: f64, end: f64 },

    #[error("density vanishes at x = {x}; feedback quotient undefined")]
    UndefinedQuotient { x: f64 },

    #[error("feedback rate mu{mode} = {value:e} at x = {x} is negative (gains below bound)")]
    GainViolation { mode: u8, x: f64, value: f64 },

    #[error("cannot construct desired state: {0}")]
    Construction(String),

    #[error("inconclusive: {0}")]
    Inconclusive(String),
}

pub type Result<T> = core::result::Result<T, Error>;
