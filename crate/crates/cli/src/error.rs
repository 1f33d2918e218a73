use std::fmt;
use std::path::Path;

/// A failure reported as `error[<category>]: <message>` on one line.
#[derive(Debug)]
pub struct CliError {
    pub category: Category,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Usage,
    MissingInput,
    InvalidInput,
    InvalidConfig,
    Io,
    Numeric,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Usage => "usage",
            Category::MissingInput => "missing-input",
            Category::InvalidInput => "invalid-input",
            Category::InvalidConfig => "invalid-config",
            Category::Io => "io",
            Category::Numeric => "numeric",
        }
    }

    pub fn exit_code(self) -> i32 {
        match self {
            Category::Usage => 2,
            _ => 1,
        }
    }
}

impl CliError {
    pub fn new(category: Category, message: impl Into<String>) -> CliError {
        CliError {
            category,
            message: message.into(),
        }
    }

    pub fn usage(message: impl Into<String>) -> CliError {
        CliError::new(Category::Usage, message)
    }

    pub fn config(message: impl Into<String>) -> CliError {
        CliError::new(Category::InvalidConfig, message)
    }

    pub fn input(message: impl fmt::Display) -> CliError {
        CliError::new(Category::InvalidInput, message.to_string())
    }

    /// A read failure: missing files are their own category.
    pub fn read(path: &Path, e: std::io::Error) -> CliError {
        if e.kind() == std::io::ErrorKind::NotFound {
            CliError::new(Category::MissingInput, format!("{} not found", path.display()))
        } else {
            CliError::new(Category::Io, format!("{}: {e}", path.display()))
        }
    }

    pub fn write(path: &Path, e: impl fmt::Display) -> CliError {
        CliError::new(Category::Io, format!("{}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // keep it on one line whatever the message contains
        let msg = self.message.replace('\n', " ");
        write!(f, "error[{}]: {}", self.category.as_str(), msg)
    }
}

/// Require `path` to exist before doing any work.
pub fn require(path: &Path) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::new(Category::MissingInput, format!("{} not found", path.display())))
    }
}
