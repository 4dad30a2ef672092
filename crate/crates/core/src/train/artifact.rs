use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::mlp::FittedMlp;
use super::qml::FittedQml;

/// A trained model as stored on disk: one JSON record tagged by `model`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelArtifact {
    Qml(FittedQml),
    Mlp(FittedMlp),
}

#[derive(Debug, Error)]
pub enum ArtifactError {
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("malformed model artifact: {0}")]
    Parse(#[from] serde_json::Error),
}

pub fn save_artifact(path: &Path, artifact: &ModelArtifact) -> Result<(), ArtifactError> {
    let mut text = serde_json::to_string(artifact)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

pub fn load_artifact(path: &Path) -> Result<ModelArtifact, ArtifactError> {
    Ok(serde_json::from_str(fs::read_to_string(path)?.trim_end())?)
}
