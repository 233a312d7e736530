use std::fmt;

use thiserror::Error;

/// Candidate family names used in generation errors without pulling in the
/// pseudo-expert module.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FamilyName(pub &'static str);

impl fmt::Display for FamilyName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.0)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("scene `{scene_id}`: field `{field}`: {message}")]
    Scene {
        scene_id: String,
        field: String,
        message: String,
    },

    #[error("candidate family {family}: {message}")]
    Generation { family: FamilyName, message: String },

    #[error("{path}: {source}")]
    File {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn scene(scene_id: &str, field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Scene {
            scene_id: scene_id.to_string(),
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
