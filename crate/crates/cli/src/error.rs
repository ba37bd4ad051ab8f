use phosphor_core::dataset::DatasetError;
use phosphor_core::netpbm::NetpbmError;
use phosphor_core::psych::PsychError;
use phosphor_core::render::RenderError;
use phosphor_core::scene::SceneError;
use serde_json::json;
use std::path::Path;
use thiserror::Error;

/// Failures of a command, split by who has to fix them.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration, arguments or input files. Exit code 1.
    #[error("{kind}: {message}")]
    Input { kind: &'static str, message: String },
    /// Anything else, for example an unwritable output directory. Exit code 2.
    #[error("{kind}: {message}")]
    Internal { kind: &'static str, message: String },
}

impl CliError {
    pub fn input(kind: &'static str, message: impl Into<String>) -> Self {
        CliError::Input { kind, message: message.into() }
    }

    pub fn internal(kind: &'static str, message: impl Into<String>) -> Self {
        CliError::Internal { kind, message: message.into() }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Input { kind, .. } | CliError::Internal { kind, .. } => kind,
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input { .. } => 1,
            CliError::Internal { .. } => 2,
        }
    }

    /// The single-line JSON document printed on stderr.
    pub fn to_json(&self) -> serde_json::Value {
        let (class, message) = match self {
            CliError::Input { message, .. } => ("input", message),
            CliError::Internal { message, .. } => ("internal", message),
        };
        json!({
            "schema_version": phosphor_core::psych::SCHEMA_VERSION,
            "error": self.kind(),
            "class": class,
            "message": message,
            "exit_code": self.exit_code(),
        })
    }

    /// Wraps a failed write below `path`.
    pub fn write(path: &Path, e: impl std::fmt::Display) -> Self {
        CliError::internal("WriteFailed", format!("{}: {e}", path.display()))
    }
}

impl From<SceneError> for CliError {
    fn from(e: SceneError) -> Self {
        let kind = match e {
            SceneError::MissingAuxMap(_) => "MissingAuxMap",
            SceneError::ShapeMismatch { .. } => "ShapeMismatch",
            SceneError::InvalidAuxMap { .. } => "InvalidAuxMap",
            SceneError::FrameTooSmall { .. } => "FrameTooSmall",
            SceneError::InvalidParams(_) => "InvalidParams",
        };
        CliError::input(kind, e.to_string())
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        let kind = match &e {
            DatasetError::Frame { source, .. } => return CliError::from(source.clone()),
            DatasetError::Io { .. } => "InputUnreadable",
            DatasetError::ManifestParse { .. } => "ManifestParse",
            DatasetError::CategoryImbalance(_) => "UnbalancedCatalog",
            DatasetError::MissingFrames { .. } => "MissingFrames",
            DatasetError::InvalidClip { .. } => "InvalidClip",
            DatasetError::Netpbm(_) => "InvalidImage",
        };
        CliError::input(kind, e.to_string())
    }
}

impl From<NetpbmError> for CliError {
    fn from(e: NetpbmError) -> Self {
        CliError::input("InvalidImage", e.to_string())
    }
}

impl From<RenderError> for CliError {
    fn from(e: RenderError) -> Self {
        CliError::input("InvalidRenderParams", e.to_string())
    }
}

impl From<PsychError> for CliError {
    fn from(e: PsychError) -> Self {
        let kind = match e {
            PsychError::UnbalancedCatalog(_) => "UnbalancedCatalog",
            PsychError::NoTrials => "NoTrials",
            PsychError::InvalidResponse(_) => "InvalidResponse",
            _ => "AnalysisFailed",
        };
        CliError::input(kind, e.to_string())
    }
}
