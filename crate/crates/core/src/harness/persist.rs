use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::forest::Forest;
use crate::nn::{Model, ModelConfig, Param};
use crate::text::Vocabulary;
use crate::{Error, Result};

pub const FORMAT_NAME: &str = "aggro-model";
pub const FORMAT_VERSION: u32 = 1;

/// A file the forest pipeline depends on, pinned by content hash.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PinnedFile {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestArtifact {
    pub forest: Forest,
    pub embeddings: PinnedFile,
    pub lexicon: PinnedFile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CnnArtifact {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub tag_vocab: Vocabulary,
    pub params: Vec<Param<f32>>,
    /// Whether untagged input goes through the built-in tagger.
    pub tagger: bool,
    pub tagger_lexicon: Option<PinnedFile>,
}

impl CnnArtifact {
    pub fn from_model(
        model: &Model<f32>,
        tagger: bool,
        tagger_lexicon: Option<PinnedFile>,
    ) -> Self {
        CnnArtifact {
            config: model.config.clone(),
            vocab: model.vocab.clone(),
            tag_vocab: model.tag_vocab.clone(),
            params: model.params.clone(),
            tagger,
            tagger_lexicon,
        }
    }

    pub fn model(&self) -> Result<Model<f32>> {
        Model::from_parts(
            self.config.clone(),
            self.vocab.clone(),
            self.tag_vocab.clone(),
            self.params.clone(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Artifact {
    Forest(ForestArtifact),
    Cnn(CnnArtifact),
}

impl Artifact {
    pub fn kind(&self) -> &'static str {
        match self {
            Artifact::Forest(_) => "forest",
            Artifact::Cnn(_) => "cnn",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub format: String,
    pub version: u32,
    pub fingerprint: String,
    pub artifact: Artifact,
}

#[derive(Deserialize)]
struct Header {
    format: String,
    version: u32,
}

#[derive(Deserialize)]
struct KindOnly {
    artifact: KindTag,
}

#[derive(Deserialize)]
struct KindTag {
    kind: String,
}

fn json_error(path: &Path, e: serde_json::Error) -> Error {
    Error::Model {
        path: path.to_path_buf(),
        message: format!("line {} column {}: {e}", e.line(), e.column()),
    }
}

pub fn save_model(path: &Path, fingerprint: &str, artifact: &Artifact) -> Result<()> {
    let file = ModelFile {
        format: FORMAT_NAME.into(),
        version: FORMAT_VERSION,
        fingerprint: fingerprint.into(),
        artifact: artifact.clone(),
    };
    let mut text = serde_json::to_string(&file).map_err(|e| Error::Model {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Loads a model file. With `expect_kind` set, a file of another kind is
/// rejected.
pub fn load_model(path: &Path, expect_kind: Option<&str>) -> Result<ModelFile> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let header: Header = serde_json::from_str(&text).map_err(|e| json_error(path, e))?;
    if header.format != FORMAT_NAME {
        return Err(Error::Model {
            path: path.to_path_buf(),
            message: format!("not a model file (format '{}')", header.format),
        });
    }
    if header.version != FORMAT_VERSION {
        return Err(Error::Model {
            path: path.to_path_buf(),
            message: format!(
                "unsupported version {} (this build reads version {FORMAT_VERSION})",
                header.version
            ),
        });
    }
    if let Some(want) = expect_kind {
        let tag: KindOnly = serde_json::from_str(&text).map_err(|e| json_error(path, e))?;
        if tag.artifact.kind != want {
            return Err(Error::Model {
                path: path.to_path_buf(),
                message: format!("holds a {} model, expected {want}", tag.artifact.kind),
            });
        }
    }
    serde_json::from_str(&text).map_err(|e| json_error(path, e))
}
