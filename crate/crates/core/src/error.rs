use thiserror::Error;

/// Errors raised anywhere in the simulator.
#[derive(Debug, Error)]
pub enum Error {
    #[error("magnetic quantum number m={m} does not exist in the {manifold} manifold")]
    InvalidSublevel { manifold: &'static str, m: i32 },

    #[error("invalid momentum grid: {0}")]
    InvalidGrid(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("dark state undefined: both Rabi frequencies vanish")]
    NoLight,

    #[error("time step dt={dt} exceeds the stability limit {limit}")]
    StepTooLarge { dt: f64, limit: f64 },

    #[error("integration failed at Γt={gamma_t}: diagonal entry {value:e} below tolerance")]
    NegativePopulation { gamma_t: f64, value: f64 },

    #[error("oracle subspace of dimension {dim} exceeds the budget of {budget}")]
    OracleTooLarge { dim: usize, budget: usize },

    #[error("peak fit: {0}")]
    Fit(String),

    #[error("lifetime estimate: {0}")]
    Lifetime(String),

    #[error("config key `{key}`: {reason}")]
    Config { key: String, reason: String },

    #[error("malformed config document: {0}")]
    ConfigSyntax(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("stage {stage} (Γt={gamma_t}): {source}")]
    Stage {
        stage: usize,
        gamma_t: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed distribution file: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Short machine-readable tag, used by the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidSublevel { .. } => "invalid_sublevel",
            Error::InvalidGrid(_) => "invalid_grid",
            Error::InvalidParameter { .. } => "invalid_parameter",
            Error::NoLight => "no_light",
            Error::StepTooLarge { .. } => "step_too_large",
            Error::NegativePopulation { .. } => "negative_population",
            Error::OracleTooLarge { .. } => "oracle_too_large",
            Error::Fit(_) => "fit",
            Error::Lifetime(_) => "lifetime",
            Error::Config { .. } => "config",
            Error::ConfigSyntax(_) => "config_syntax",
            Error::UnknownPreset(_) => "unknown_preset",
            Error::Stage { .. } => "stage",
            Error::Parse(_) => "parse",
            Error::Io(_) => "io",
        }
    }
}
