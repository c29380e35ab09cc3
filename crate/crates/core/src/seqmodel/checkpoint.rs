use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::model::SeqModel;
use super::SeqError;

const FORMAT: &str = "semshift-seq2seq";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

/// On-disk form of a model: config plus every weight array by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub config: ModelConfig,
    pub tensors: Vec<NamedTensor>,
}

impl Checkpoint {
    pub fn from_model(model: &SeqModel) -> Self {
        let params = model.params();
        let tensors = model
            .tensors()
            .into_iter()
            .map(|t| NamedTensor {
                values: params[t.offset..t.offset + t.len()].to_vec(),
                name: t.name,
                shape: t.shape,
            })
            .collect();
        Self {
            format: FORMAT.into(),
            version: VERSION,
            config: model.config().clone(),
            tensors,
        }
    }

    pub fn into_model(self) -> Result<SeqModel, String> {
        if self.format != FORMAT || self.version != VERSION {
            return Err(format!(
                "unsupported checkpoint format {} v{}",
                self.format, self.version
            ));
        }
        let skeleton = SeqModel::new(self.config.clone()).map_err(|e| e.to_string())?;
        let expected = skeleton.tensors();
        if expected.len() != self.tensors.len() {
            return Err(format!(
                "config implies {} tensors, file has {}",
                expected.len(),
                self.tensors.len()
            ));
        }
        let mut params = vec![0.0; skeleton.num_params()];
        for (spec, t) in expected.iter().zip(&self.tensors) {
            if spec.name != t.name || spec.shape != t.shape || t.values.len() != spec.len() {
                return Err(format!(
                    "tensor {} {:?} does not match expected {} {:?}",
                    t.name, t.shape, spec.name, spec.shape
                ));
            }
            params[spec.offset..spec.offset + spec.len()].copy_from_slice(&t.values);
        }
        skeleton.with_params(params).map_err(|e| e.to_string())
    }
}

pub fn save_checkpoint(model: &SeqModel, path: &Path) -> Result<(), SeqError> {
    let io = |source| SeqError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    serde_json::to_writer(&mut w, &Checkpoint::from_model(model)).map_err(|e| {
        SeqError::Checkpoint {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    })?;
    w.flush().map_err(io)
}

pub fn load_checkpoint(path: &Path) -> Result<SeqModel, SeqError> {
    let fail = |message: String| SeqError::Checkpoint {
        path: path.to_path_buf(),
        message,
    };
    let file = File::open(path).map_err(|source| SeqError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let ck: Checkpoint =
        serde_json::from_reader(BufReader::new(file)).map_err(|e| fail(e.to_string()))?;
    ck.into_model().map_err(fail)
}
