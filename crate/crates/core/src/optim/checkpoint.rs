//! Versioned checkpoint container.
//!
//! A checkpoint is one JSON object:
//!
//! ```text
//! {
//!   "format":  "zsre-checkpoint",
//!   "version": "1",
//!   "seed":    <u64>,
//!   "train_config": { ... },
//!   "model_config": { ... },
//!   "vocab":   ["[CLS]", "[SEP]", "[UNK]", "[PAD]", ...],
//!   "classes": ["P17", ...],
//!   "tensors": [ { "name": "w0", "shape": [rows, cols], "data": [f64, ...] }, ... ]
//! }
//! ```
//!
//! `data` is row-major. Numbers are written in shortest round-trip form and
//! parsed with exact rounding, so `f64` parameters survive bit-for-bit. Vectors
//! use shape `[len, 1]`. Tensor names: `w0 b0 we be w1 b1 w_star b_star
//! embedding`, plus `mix_w mix_b` when the encoder has a mixing layer.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::train::TrainConfig;
use crate::encoding::{EncoderParams, Mixing, Vocab};
use crate::error::{io_err, Error, Result};
use crate::head::HeadParams;
use crate::model::{Model, ModelConfig};
use crate::scalar::Scalar;
use crate::tensor::Matrix;

pub const FORMAT: &str = "zsre-checkpoint";
pub const VERSION: &str = "1";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: String,
    pub seed: u64,
    pub train_config: TrainConfig,
    pub model_config: ModelConfig,
    pub vocab: Vocab,
    pub classes: Vec<String>,
    pub tensors: Vec<NamedTensor>,
}

fn mat<T: Scalar>(name: &str, m: &Matrix<T>) -> NamedTensor {
    NamedTensor {
        name: name.into(),
        shape: [m.rows(), m.cols()],
        data: m.as_slice().iter().map(|x| x.as_f64()).collect(),
    }
}

fn vector<T: Scalar>(name: &str, v: &[T]) -> NamedTensor {
    NamedTensor { name: name.into(), shape: [v.len(), 1], data: v.iter().map(|x| x.as_f64()).collect() }
}

impl Checkpoint {
    pub fn from_model<T: Scalar>(model: &Model<T>, train_config: &TrainConfig) -> Self {
        let hp = &model.head;
        let mut tensors = vec![
            mat("w0", &hp.w0),
            vector("b0", &hp.b0),
            mat("we", &hp.we),
            vector("be", &hp.be),
            mat("w1", &hp.w1),
            vector("b1", &hp.b1),
            mat("w_star", &hp.w_star),
            vector("b_star", &hp.b_star),
            mat("embedding", &model.encoder.embedding),
        ];
        if let Some(m) = &model.encoder.mixing {
            tensors.push(mat("mix_w", &m.weight));
            tensors.push(vector("mix_b", &m.bias));
        }
        Checkpoint {
            format: FORMAT.into(),
            version: VERSION.into(),
            seed: train_config.seed,
            train_config: train_config.clone(),
            model_config: model.config.clone(),
            vocab: model.vocab.clone(),
            classes: model.classes.clone(),
            tensors,
        }
    }

    fn take(&self, name: &str) -> Result<&NamedTensor> {
        let t = self
            .tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor {name}")))?;
        if t.data.len() != t.shape[0] * t.shape[1] {
            return Err(Error::Checkpoint(format!(
                "tensor {name}: shape {:?} does not match {} values",
                t.shape,
                t.data.len()
            )));
        }
        Ok(t)
    }

    fn matrix<T: Scalar>(&self, name: &str) -> Result<Matrix<T>> {
        let t = self.take(name)?;
        Matrix::from_vec(t.shape[0], t.shape[1], t.data.iter().map(|&x| T::lit(x)).collect())
    }

    fn vector<T: Scalar>(&self, name: &str) -> Result<Vec<T>> {
        let t = self.take(name)?;
        if t.shape[1] != 1 {
            return Err(Error::Checkpoint(format!("tensor {name} should be a vector, shape {:?}", t.shape)));
        }
        Ok(t.data.iter().map(|&x| T::lit(x)).collect())
    }

    pub fn to_model<T: Scalar>(&self) -> Result<Model<T>> {
        let head = HeadParams {
            w0: self.matrix("w0")?,
            b0: self.vector("b0")?,
            we: self.matrix("we")?,
            be: self.vector("be")?,
            w1: self.matrix("w1")?,
            b1: self.vector("b1")?,
            w_star: self.matrix("w_star")?,
            b_star: self.vector("b_star")?,
        };
        head.check_shapes().map_err(|e| Error::Checkpoint(e.to_string()))?;
        let mixing = if self.model_config.mixing {
            Some(Mixing { weight: self.matrix("mix_w")?, bias: self.vector("mix_b")? })
        } else {
            None
        };
        let encoder = EncoderParams { embedding: self.matrix("embedding")?, mixing };
        if encoder.embedding.rows() != self.vocab.len() || head.dims().n_classes != self.classes.len() {
            return Err(Error::Checkpoint("tensor shapes disagree with vocabulary or class list".into()));
        }
        Ok(Model { config: self.model_config.clone(), vocab: self.vocab.clone(), encoder, head, classes: self.classes.clone() })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
        serde_json::to_writer(&mut w, self)?;
        w.flush().map_err(io_err(path))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(io_err(path))?;
        let value: serde_json::Value = serde_json::from_reader(BufReader::new(f))?;
        Self::from_value(value)
    }

    pub fn from_value(value: serde_json::Value) -> Result<Self> {
        match value.get("format").and_then(|v| v.as_str()) {
            Some(FORMAT) => {}
            other => return Err(Error::Checkpoint(format!("not a checkpoint (format {other:?})"))),
        }
        match value.get("version").and_then(|v| v.as_str()) {
            Some(VERSION) => {}
            Some(v) => return Err(Error::Checkpoint(format!("unsupported version {v:?}, expected {VERSION:?}"))),
            None => return Err(Error::Checkpoint("missing version field".into())),
        }
        Ok(serde_json::from_value(value)?)
    }
}

pub fn save_checkpoint<T: Scalar>(model: &Model<T>, config: &TrainConfig, path: impl AsRef<Path>) -> Result<()> {
    Checkpoint::from_model(model, config).save(path)
}

pub fn load_checkpoint<T: Scalar>(path: impl AsRef<Path>) -> Result<(Model<T>, Checkpoint)> {
    let ck = Checkpoint::load(path)?;
    Ok((ck.to_model()?, ck))
}
