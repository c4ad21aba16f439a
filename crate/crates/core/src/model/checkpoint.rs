//! Checkpoint container: config, vocabulary, named parameter tensors with
//! shapes, and (optionally) the training state needed to resume with an
//! identical continuation.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::ECodeConfig;
use super::params::ECodeParams;
use crate::data::Vocabulary;
use crate::scalar::Scalar;
use crate::seeding::rng_from;
use crate::tensor::Tensor;

pub const CKPT_FORMAT: &str = "epcforge-ckpt-v1";

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("checkpoint is not valid json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("unknown checkpoint format {found:?}, expected {CKPT_FORMAT:?}")]
    Format { found: String },
    #[error("parameter {name}: stored shape {got:?} does not match config shape {want:?}")]
    Shape {
        name: String,
        want: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("parameter list mismatch: expected {want} tensors, found {got}")]
    Count { want: usize, got: usize },
    #[error("parameter {index} should be {want}, found {got}")]
    Name {
        index: usize,
        want: String,
        got: String,
    },
    #[error("bad configuration: {0}")]
    Config(String),
}

#[derive(Debug, Serialize, Deserialize)]
struct NamedTensor {
    name: String,
    shape: Vec<usize>,
    values: Vec<f64>,
}

/// Optimizer and schedule state carried alongside the parameters so
/// training resumes bit-identically.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrainState {
    /// Epochs already completed.
    pub epoch: u64,
    /// Optimizer steps already taken.
    pub step: u64,
    /// Root seed of the run (epoch shuffles derive from it).
    pub seed: u64,
    /// First-moment buffers, registry order.
    pub adam_m: Vec<Vec<f64>>,
    /// Second-moment buffers, registry order.
    pub adam_v: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    config: ECodeConfig,
    vocab: Vec<String>,
    params: Vec<NamedTensor>,
    train_state: Option<TrainState>,
}

pub fn save_checkpoint<F: Scalar>(
    path: &Path,
    params: &ECodeParams<F>,
    vocab: &Vocabulary,
    train_state: Option<&TrainState>,
) -> Result<(), CheckpointError> {
    let file = CheckpointFile {
        format: CKPT_FORMAT.to_string(),
        config: params.config.clone(),
        vocab: vocab.symbols().to_vec(),
        params: params
            .named_tensors()
            .into_iter()
            .map(|(name, t)| NamedTensor {
                name,
                shape: t.shape().to_vec(),
                values: t.data().iter().map(|v| v.as_f64()).collect(),
            })
            .collect(),
        train_state: train_state.cloned(),
    };
    let json = serde_json::to_string(&file)?;
    fs::write(path, json).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Loads a checkpoint, validating every tensor's name and shape against the
/// stored config.
pub fn load_checkpoint<F: Scalar>(
    path: &Path,
) -> Result<(ECodeParams<F>, Vocabulary, Option<TrainState>), CheckpointError> {
    let text = fs::read_to_string(path).map_err(|source| CheckpointError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let file: CheckpointFile = serde_json::from_str(&text)?;
    if file.format != CKPT_FORMAT {
        return Err(CheckpointError::Format { found: file.format });
    }
    // Materialize the structure for the config, then overwrite the values.
    let mut params = ECodeParams::<F>::init(&file.config, &mut rng_from(0))
        .map_err(CheckpointError::Config)?;
    let mut slots = params.named_tensors_mut();
    if slots.len() != file.params.len() {
        return Err(CheckpointError::Count {
            want: slots.len(),
            got: file.params.len(),
        });
    }
    for (index, ((want_name, slot), stored)) in
        slots.iter_mut().zip(&file.params).enumerate()
    {
        if *want_name != stored.name {
            return Err(CheckpointError::Name {
                index,
                want: want_name.clone(),
                got: stored.name.clone(),
            });
        }
        if slot.shape() != stored.shape.as_slice() || slot.len() != stored.values.len() {
            return Err(CheckpointError::Shape {
                name: stored.name.clone(),
                want: slot.shape().to_vec(),
                got: stored.shape.clone(),
            });
        }
        **slot = Tensor::new(
            stored.shape.clone(),
            stored.values.iter().map(|&v| F::from_f64(v)).collect(),
        )
        .expect("validated shape");
    }
    drop(slots);
    let mut vocab = Vocabulary::from_symbols(file.vocab);
    vocab.reindex();
    Ok((params, vocab, file.train_state))
}
