use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),

    #[error(transparent)]
    Core(#[from] rvtdcnn::Error),
}

impl CliError {
    /// 2 for bad input, 1 for a failing pipeline stage.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Core(e) if is_config(e) => 2,
            CliError::Core(_) => 1,
        }
    }

    /// `[stage] message`, with `cli` for errors raised before any stage ran.
    pub fn tagged(&self) -> String {
        match self {
            CliError::Usage(m) => format!("[usage] {m}"),
            CliError::Core(rvtdcnn::Error::Stage { stage, source }) => format!("[{stage}] {source}"),
            CliError::Core(e) => format!("[cli] {e}"),
        }
    }
}

fn is_config(e: &rvtdcnn::Error) -> bool {
    match e {
        rvtdcnn::Error::Config(_) | rvtdcnn::Error::Json { .. } => true,
        rvtdcnn::Error::Stage { source, .. } => is_config(source),
        _ => false,
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
