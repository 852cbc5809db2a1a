//! Mini-batch training loop.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::adam::AdamState;
use crate::dataset::{Instance, RelationTable, SplitSpec};
use crate::error::{Error, Result};
use crate::inference::DistKind;
use crate::model::{Model, ModelConfig, Resources};
use crate::rng::{derive, offsets, SeededRng};
use crate::scalar::{norm, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Preset {
    /// Hyperparameters reported for fine-tuning a large pretrained encoder.
    Paper,
    /// Small dimensions and a larger step size for the toy encoder.
    Desk,
}

impl std::str::FromStr for Preset {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(Preset::Paper),
            "desk" => Ok(Preset::Desk),
            _ => Err(Error::Config(format!("unknown preset {s:?} (expected paper or desk)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub gamma: f64,
    pub alpha: f64,
    pub epochs: usize,
    pub seed: u64,
    pub dist_kind: DistKind,
    /// Rescales the joint gradient to at most this L2 norm. Off by default.
    #[serde(default)]
    pub clip_grad_norm: Option<f64>,
}

impl TrainConfig {
    pub fn preset(p: Preset) -> Self {
        let desk = TrainConfig {
            learning_rate: 1e-3,
            batch_size: 4,
            gamma: 7.5,
            alpha: 0.4,
            epochs: 50,
            seed: 0,
            dist_kind: DistKind::NegInnerProduct,
            clip_grad_norm: None,
        };
        match p {
            Preset::Desk => desk,
            Preset::Paper => TrainConfig { learning_rate: 5e-6, ..desk },
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad(format!("learning_rate must be > 0, got {}", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.alpha) {
            return bad(format!("alpha must be in [0, 1], got {}", self.alpha));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return bad(format!("gamma must be > 0, got {}", self.gamma));
        }
        if let Some(c) = self.clip_grad_norm {
            if !(c > 0.0) {
                return bad(format!("clip_grad_norm must be > 0, got {c}"));
            }
        }
        Ok(())
    }
}

/// Per-instance mean losses for one epoch.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub margin_term: f64,
    pub ce_term: f64,
    pub total: f64,
    pub seconds: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_macro_f1: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub fn totals(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.total).collect()
    }
}

/// Trains a fresh model on `split.train_idx`.
pub fn train<T: Scalar>(
    instances: &[Instance],
    relations: &RelationTable,
    split: &SplitSpec,
    config: &TrainConfig,
    model_config: &ModelConfig,
    resources: &Resources,
) -> Result<(Model<T>, TrainHistory)> {
    train_observed(instances, relations, split, config, model_config, resources, &mut |_, _| Ok(None))
}

/// Called with the epoch index and the model after each epoch.
pub type EpochObserver<'a, T> = dyn FnMut(usize, &Model<T>) -> Result<Option<f64>> + 'a;

/// [`train`] with a hook called after every epoch; a returned score is
/// stored as that epoch's `eval_macro_f1`.
pub fn train_observed<T: Scalar>(
    instances: &[Instance],
    relations: &RelationTable,
    split: &SplitSpec,
    config: &TrainConfig,
    model_config: &ModelConfig,
    resources: &Resources,
    observer: &mut EpochObserver<'_, T>,
) -> Result<(Model<T>, TrainHistory)> {
    config.validate()?;
    split.validate(instances)?;
    let train_refs: Vec<&Instance> = split.train_idx.iter().map(|&i| &instances[i]).collect();
    let classes = split.train_classes(instances);
    let mut model = Model::<T>::init(
        model_config,
        &train_refs,
        classes,
        resources,
        derive(config.seed, offsets::INIT),
    )?;
    // attribute vectors are computed once and never updated
    let class_attrs = model.class_attributes(relations)?;
    let states = resources.hidden_states.as_ref();
    let (gamma, alpha) = (T::lit(config.gamma), T::lit(config.alpha));

    let mut adam = AdamState::<T>::default();
    let mut shuffle = SeededRng::new(derive(config.seed, offsets::SHUFFLE));
    let mut history = TrainHistory::default();
    let n_train = split.train_idx.len() as f64;
    let mut order = split.train_idx.clone();

    for epoch in 0..config.epochs {
        let started = Instant::now();
        order.copy_from_slice(&split.train_idx);
        shuffle.shuffle(&mut order);
        let (mut margin, mut ce, mut total) = (0.0, 0.0, 0.0);
        for (b, chunk) in order.chunks(config.batch_size).enumerate() {
            let items: Vec<(usize, &Instance)> = chunk.iter().map(|&i| (i, &instances[i])).collect();
            let mut grads = model.gradients(&items, &class_attrs, states, gamma, alpha)?;
            let r = &grads.report;
            if !r.total.is_finite() {
                return Err(Error::NonFinite {
                    epoch,
                    batch: b,
                    detail: format!("instances {chunk:?}: margin {} ce {}", r.margin_term, r.ce_term),
                });
            }
            margin += r.margin_term.as_f64();
            ce += r.ce_term.as_f64();
            total += r.total.as_f64();
            if let Some(max_norm) = config.clip_grad_norm {
                clip(&mut grads.tensors_mut(), T::lit(max_norm));
            }
            let g = grads.tensors();
            let g: Vec<&[T]> = g.iter().map(|(_, t)| *t).collect();
            let mut p: Vec<&mut [T]> = model.trainable_tensors_mut(states).into_iter().map(|(_, t)| t).collect();
            adam.step(&mut p, &g, config.learning_rate)?;
        }
        let eval_macro_f1 = observer(epoch, &model)?;
        let rec = EpochRecord {
            epoch,
            margin_term: margin / n_train,
            ce_term: ce / n_train,
            total: total / n_train,
            seconds: started.elapsed().as_secs_f64(),
            eval_macro_f1,
        };
        log::debug!("epoch {epoch}: total {:.6} margin {:.6} ce {:.6}", rec.total, rec.margin_term, rec.ce_term);
        history.epochs.push(rec);
    }
    Ok((model, history))
}

fn clip<T: Scalar>(tensors: &mut [(&'static str, &mut [T])], max_norm: T) {
    let sq: T = tensors.iter().map(|(_, t)| norm(t).powi(2)).sum();
    let n = sq.sqrt();
    if n > max_norm {
        let s = max_norm / n;
        tensors.iter_mut().for_each(|(_, t)| t.iter_mut().for_each(|x| *x = *x * s));
    }
}
