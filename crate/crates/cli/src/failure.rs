use hierdoc_core::config::ConfigError;
use hierdoc_core::corpus::CorpusError;
use hierdoc_core::model::ModelError;
use hierdoc_core::nncore::NnError;
use hierdoc_core::trainer::TrainError;

pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_CORPUS: u8 = 2;
pub const EXIT_CONFIG: u8 = 3;
pub const EXIT_DATA: u8 = 4;
pub const EXIT_GRADCHECK: u8 = 5;

/// An error plus the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

impl Failure {
    pub fn new(code: u8, error: impl Into<anyhow::Error>) -> Self {
        Self { code, error: error.into() }
    }

    pub fn msg(code: u8, message: impl std::fmt::Display) -> Self {
        Self { code, error: anyhow::anyhow!("{message}") }
    }
}

fn model_code(e: &ModelError) -> u8 {
    match e {
        ModelError::Config(_) => EXIT_CONFIG,
        ModelError::InputMismatch(_) => EXIT_DATA,
        ModelError::Nn(n) => nn_code(n),
        ModelError::Distribution(_) => EXIT_FAILURE,
    }
}

fn nn_code(e: &NnError) -> u8 {
    match e {
        NnError::Checkpoint(_) | NnError::ShapeMismatch { .. } => EXIT_DATA,
        NnError::Io { .. } => EXIT_DATA,
        _ => EXIT_FAILURE,
    }
}

impl From<TrainError> for Failure {
    fn from(e: TrainError) -> Self {
        let code = match &e {
            TrainError::Corpus(CorpusError::Io { .. }) => EXIT_CORPUS,
            TrainError::Corpus(_) => EXIT_CORPUS,
            TrainError::Config(_) => EXIT_CONFIG,
            TrainError::Model(m) => model_code(m),
            TrainError::Embedding(_) | TrainError::EmptySplit { .. } | TrainError::EmptySet(_) => EXIT_DATA,
            TrainError::Nn(n) => nn_code(n),
            TrainError::Csv { .. } => EXIT_FAILURE,
        };
        Failure::new(code, e)
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::new(EXIT_CONFIG, e)
    }
}

impl From<CorpusError> for Failure {
    fn from(e: CorpusError) -> Self {
        Failure::new(EXIT_CORPUS, e)
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        Failure::new(model_code(&e), e)
    }
}

impl From<NnError> for Failure {
    fn from(e: NnError) -> Self {
        Failure::new(nn_code(&e), e)
    }
}

impl From<hierdoc_core::embedding::EmbeddingError> for Failure {
    fn from(e: hierdoc_core::embedding::EmbeddingError) -> Self {
        Failure::new(EXIT_DATA, e)
    }
}

/// Generic I/O and serialization failures.
pub trait OrFail<T> {
    fn or_fail(self, context: impl std::fmt::Display) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> OrFail<T> for Result<T, E> {
    fn or_fail(self, context: impl std::fmt::Display) -> Result<T, Failure> {
        self.map_err(|e| Failure::new(EXIT_FAILURE, e.into().context(context.to_string())))
    }
}
