use std::path::{Path, PathBuf};

use thiserror::Error;

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration, arguments or input data. Exit code 2.
    #[error("{0}")]
    Validation(String),

    /// A figure needs a series that no loaded bundle provides. Exit code 2.
    #[error("missing series `{series}` for {figure}: run `{step}` first")]
    MissingSeries { figure: String, series: String, step: String },

    /// Filesystem failure. Exit code 3.
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] omckit::Error),
}

impl CliError {
    pub fn validation(msg: impl Into<String>) -> Self {
        CliError::Validation(msg.into())
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } | CliError::Core(omckit::Error::Io(_)) => 3,
            _ => 2,
        }
    }

    /// Attaches the offending file to a core error.
    pub fn in_file(path: &Path) -> impl FnOnce(omckit::Error) -> CliError + '_ {
        move |e| match e {
            omckit::Error::Io(source) => CliError::io(path, source),
            other => CliError::Validation(format!("{}: {other}", path.display())),
        }
    }
}

pub fn read_to_string(path: &Path) -> CliResult<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))
}

pub fn write(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    }
    std::fs::write(path, contents).map_err(|e| CliError::io(path, e))
}
