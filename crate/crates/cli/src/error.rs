use pumptrace_core::gnn::GnnError;

type Source = Box<dyn std::error::Error + Send + Sync>;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),
    #[error("stage `{stage}` needs {path}; run `{producer}` first")]
    MissingArtifact { stage: &'static str, path: String, producer: &'static str },
    #[error("{path}: {message}")]
    Io { path: String, message: String },
    #[error("{0}")]
    Data(Source),
    #[error("numerical failure: {0}")]
    Numerical(Source),
}

impl PipelineError {
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) => 2,
            Self::Numerical(_) => 4,
            _ => 3,
        }
    }

    pub fn data(e: impl Into<Source>) -> Self {
        Self::Data(e.into())
    }

    pub fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        Self::Io { path: path.display().to_string(), message: e.to_string() }
    }
}

impl From<GnnError> for PipelineError {
    fn from(e: GnnError) -> Self {
        match e {
            GnnError::NonFinite { .. } | GnnError::NonFiniteGradient { .. } => Self::Numerical(Box::new(e)),
            GnnError::Config(list) => Self::Config(list.into_iter().map(|p| format!("model.{p}")).collect()),
            other => Self::Data(Box::new(other)),
        }
    }
}

macro_rules! data_error {
    ($($t:ty),*) => {$(
        impl From<$t> for PipelineError {
            fn from(e: $t) -> Self {
                Self::Data(Box::new(e))
            }
        }
    )*};
}

data_error!(
    pumptrace_core::ingest::IngestError,
    pumptrace_core::events::EventError,
    pumptrace_core::market::MarketError,
    pumptrace_core::diffusion::DiffusionError,
    pumptrace_core::features::FeatureError,
    pumptrace_core::eval::SplitError,
    pumptrace_core::eval::EvalError,
    pumptrace_core::synth::SynthError
);
