use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("belief dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    /// The posterior covariance produced a variance below the clamp tolerance.
    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("invalid episode: {0}")]
    InvalidEpisode(String),

    #[error("no actions available")]
    NoActions,

    #[error("unknown slot `{0}`")]
    UnknownSlot(String),

    #[error("unknown action `{0}`")]
    UnknownAction(String),

    #[error("database: {0}")]
    Database(String),

    #[error("goal sampling gave up after {0} draws")]
    GoalSampling(usize),

    #[error("option: {0}")]
    Option(String),

    #[error("policy transfer: {0}")]
    Transfer(String),

    #[error("config: {0}")]
    Config(String),

    #[error("parse: {0}")]
    Parse(String),

    #[error("format version mismatch in {what}: expected {expected}, found {found}")]
    Version {
        what: &'static str,
        expected: u32,
        found: u32,
    },

    #[error("missing policy for domain `{0}`")]
    MissingPolicy(crate::acts::DomainId),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    TomlDe(#[from] toml::de::Error),

    #[error(transparent)]
    TomlSer(#[from] toml::ser::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
