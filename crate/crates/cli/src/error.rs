use std::path::PathBuf;

use fcd_core::Error as CoreError;

/// Exit-code categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Usage,
    Input,
    NotFound,
    InsufficientData,
    Internal,
}

impl Category {
    pub fn exit_code(self) -> i32 {
        match self {
            Category::Usage => 1,
            Category::Input | Category::NotFound => 2,
            Category::InsufficientData => 3,
            Category::Internal => 4,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Category::Usage => "usage",
            Category::Input => "input",
            Category::NotFound => "not found",
            Category::InsufficientData => "insufficient data",
            Category::Internal => "internal",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{}: no such file", .0.display())]
    NotFound(PathBuf),
    #[error("{0}")]
    Input(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] CoreError),
}

impl CliError {
    pub fn category(&self) -> Category {
        match self {
            CliError::Usage(_) => Category::Usage,
            CliError::NotFound(_) => Category::NotFound,
            CliError::Input(_) => Category::Input,
            CliError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => Category::NotFound,
            CliError::Io { .. } => Category::Internal,
            CliError::Core(e) => match e {
                CoreError::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => Category::NotFound,
                CoreError::Io { .. }
                | CoreError::Parse { .. }
                | CoreError::InvalidRecord { .. }
                | CoreError::InvalidScenario(_)
                | CoreError::UnknownLink(_)
                | CoreError::UnknownRoute(_) => Category::Input,
                CoreError::InvalidParameter(_) | CoreError::GridTooLarge { .. } => Category::Usage,
                CoreError::NoData(_) | CoreError::InsufficientHistory { .. } => Category::InsufficientData,
                _ => Category::Internal,
            },
        }
    }

    pub fn exit_code(&self) -> i32 {
        self.category().exit_code()
    }

    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        CliError::Io {
            context: context.into(),
            source,
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
