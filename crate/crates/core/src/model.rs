//! A trained relation-embedding model: vocabulary, toy encoder, head and the
//! seen-class label order.

use serde::{Deserialize, Serialize};

use crate::dataset::{Instance, RelationTable};
use crate::encoding::{
    backward_tokens, encode_tokens, DescriptionEncoder, DescriptionMode, EncodedSentence, EncoderParams, HiddenStates,
    TokenEmbeddings, Vocab,
};
use crate::error::{Error, Result};
use crate::head::{self, ForwardTrace, HeadDims, HeadParams};
use crate::loss::{self, Batch, LossReport};
use crate::rng::SeededRng;
use crate::scalar::Scalar;

/// Architecture settings shared by training and inference.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub hidden_size: usize,
    pub d_attr: usize,
    /// Adds the shared `tanh(W x + b)` layer to the toy encoder.
    pub mixing: bool,
    pub encoder_trainable: bool,
    pub description_mode: DescriptionMode,
    pub description_seed: u64,
}

impl ModelConfig {
    pub fn desk() -> Self {
        ModelConfig {
            hidden_size: 32,
            d_attr: 64,
            mixing: false,
            encoder_trainable: false,
            description_mode: DescriptionMode::Identity,
            description_seed: 0,
        }
    }

    pub fn paper() -> Self {
        ModelConfig {
            hidden_size: 768,
            d_attr: 1024,
            description_mode: DescriptionMode::Precomputed,
            ..Self::desk()
        }
    }

    pub fn description_encoder(&self) -> DescriptionEncoder {
        DescriptionEncoder { mode: self.description_mode, d_attr: self.d_attr, seed: self.description_seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.hidden_size == 0 || self.d_attr == 0 {
            return Err(Error::Config("hidden_size and d_attr must be >= 1".into()));
        }
        Ok(())
    }
}

/// Optional inputs that replace parts of the toy encoder.
#[derive(Clone, Debug, Default)]
pub struct Resources {
    /// Initial token embedding rows; their tokens join the vocabulary.
    pub embeddings: Option<TokenEmbeddings>,
    /// Per-instance hidden states that bypass the toy encoder entirely.
    pub hidden_states: Option<HiddenStates>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model<T> {
    pub config: ModelConfig,
    pub vocab: Vocab,
    pub encoder: EncoderParams<T>,
    pub head: HeadParams<T>,
    /// Seen-class labels in classifier order.
    pub classes: Vec<String>,
}

/// Gradient record mirroring the trainable parameters.
#[derive(Clone, Debug)]
pub struct ModelGrads<T> {
    pub head: HeadParams<T>,
    pub encoder: Option<EncoderParams<T>>,
    pub report: LossReport<T>,
}

impl<T: Scalar> ModelGrads<T> {
    pub fn tensors(&self) -> Vec<(&'static str, &[T])> {
        let mut out = self.head.tensors();
        if let Some(e) = &self.encoder {
            out.extend(e.tensors());
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [T])> {
        let mut out = self.head.tensors_mut();
        if let Some(e) = &mut self.encoder {
            out.extend(e.tensors_mut());
        }
        out
    }
}

impl<T: Scalar> Model<T> {
    /// Fresh parameters. The vocabulary comes from `embeddings` (when given)
    /// followed by every token of `train`.
    pub fn init(
        config: &ModelConfig,
        train: &[&Instance],
        classes: Vec<String>,
        resources: &Resources,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        if classes.len() < 2 {
            return Err(Error::Invalid(format!("need at least 2 training classes, got {}", classes.len())));
        }
        if train.is_empty() {
            return Err(Error::Invalid("no training instances".into()));
        }
        let pretrained = resources.embeddings.as_ref();
        if let Some(w) = pretrained.and_then(TokenEmbeddings::width) {
            if w != config.hidden_size {
                return Err(Error::Config(format!(
                    "token embeddings have width {w} but hidden_size is {}",
                    config.hidden_size
                )));
            }
        }
        if let Some(hs) = &resources.hidden_states {
            if hs.width != config.hidden_size {
                return Err(Error::Config(format!(
                    "precomputed hidden states have width {} but hidden_size is {}",
                    hs.width, config.hidden_size
                )));
            }
            if config.encoder_trainable {
                return Err(Error::Config("encoder_trainable requires the toy encoder, not precomputed states".into()));
            }
        }
        let vocab = Vocab::from_tokens(
            pretrained
                .into_iter()
                .flat_map(|e| e.rows.iter().map(|(t, _)| t.as_str()))
                .chain(train.iter().flat_map(|i| i.tokens.iter().map(String::as_str))),
        );
        let mut rng = SeededRng::new(seed);
        let mut encoder = EncoderParams::init(vocab.len(), config.hidden_size, config.mixing, &mut rng);
        if let Some(table) = pretrained {
            encoder.load_pretrained(&vocab, table)?;
        }
        let dims = HeadDims { hidden: config.hidden_size, d_attr: config.d_attr, n_classes: classes.len() };
        let head = HeadParams::init(dims, &mut rng);
        Ok(Model { config: config.clone(), vocab, encoder, head, classes })
    }

    /// Hidden states for instance `index`, from `states` when given, else the toy encoder.
    pub fn encode(&self, index: usize, instance: &Instance, states: Option<&HiddenStates>) -> Result<EncodedSentence<T>> {
        match states {
            Some(hs) => hs.encode(index, instance),
            None => encode_tokens(instance, &self.vocab, &self.encoder),
        }
    }

    pub fn forward(&self, encoded: &EncodedSentence<T>, instance: &Instance) -> Result<ForwardTrace<T>> {
        head::forward(encoded, instance.head, instance.tail, &self.head)
    }

    /// Sentence embedding `â`; the same path training uses.
    pub fn embed(&self, index: usize, instance: &Instance, states: Option<&HiddenStates>) -> Result<Vec<T>> {
        let encoded = self.encode(index, instance, states)?;
        Ok(self.forward(&encoded, instance)?.a_hat)
    }

    /// Same parameters in another scalar type.
    pub fn cast<U: Scalar>(&self) -> Model<U> {
        Model {
            config: self.config.clone(),
            vocab: self.vocab.clone(),
            encoder: self.encoder.cast(),
            head: self.head.cast(),
            classes: self.classes.clone(),
        }
    }

    pub fn class_index(&self, relation: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == relation)
    }

    /// Frozen attribute vectors of the training classes, in classifier order.
    pub fn class_attributes(&self, relations: &RelationTable) -> Result<Vec<Vec<T>>> {
        self.config.description_encoder().encode_ids(relations, &self.classes)
    }

    fn encoder_trainable(&self, states: Option<&HiddenStates>) -> bool {
        self.config.encoder_trainable && states.is_none()
    }

    /// Encodes and runs the head over `(index, instance)` pairs. `attrs` is
    /// indexed by class.
    pub fn batch(
        &self,
        items: &[(usize, &Instance)],
        class_attrs: &[Vec<T>],
        states: Option<&HiddenStates>,
    ) -> Result<(Batch<T>, Vec<EncodedSentence<T>>)> {
        let mut encoded = Vec::with_capacity(items.len());
        let mut traces = Vec::with_capacity(items.len());
        let mut labels = Vec::with_capacity(items.len());
        for &(index, inst) in items {
            let label = self
                .class_index(&inst.relation)
                .ok_or_else(|| Error::Invalid(format!("instance {index}: relation {} is not a training class", inst.relation)))?;
            let e = self.encode(index, inst, states)?;
            traces.push(self.forward(&e, inst)?);
            encoded.push(e);
            labels.push(label);
        }
        let attrs = labels.iter().map(|&y| class_attrs[y].clone()).collect();
        Ok((Batch { traces, attrs, labels }, encoded))
    }

    pub fn batch_loss(
        &self,
        items: &[(usize, &Instance)],
        class_attrs: &[Vec<T>],
        states: Option<&HiddenStates>,
        gamma: T,
        alpha: T,
    ) -> Result<(LossReport<T>, Batch<T>)> {
        let (batch, _) = self.batch(items, class_attrs, states)?;
        Ok((loss::joint_loss(&batch, gamma, alpha)?, batch))
    }

    /// Loss and its gradient with respect to every trainable tensor.
    pub fn gradients(
        &self,
        items: &[(usize, &Instance)],
        class_attrs: &[Vec<T>],
        states: Option<&HiddenStates>,
        gamma: T,
        alpha: T,
    ) -> Result<ModelGrads<T>> {
        let (batch, encoded) = self.batch(items, class_attrs, states)?;
        let g = loss::backward(&batch, &self.head, gamma, alpha)?;
        let encoder = if self.encoder_trainable(states) {
            let mut eg = self.encoder.zeros_like();
            for (e, d_hidden) in encoded.iter().zip(&g.hidden) {
                backward_tokens(e, d_hidden, &self.encoder, &mut eg);
            }
            Some(eg)
        } else {
            None
        };
        Ok(ModelGrads { head: g.head, encoder, report: g.report })
    }

    /// Trainable tensors, in the same order as [`ModelGrads::tensors`].
    pub fn trainable_tensors_mut(&mut self, states: Option<&HiddenStates>) -> Vec<(&'static str, &mut [T])> {
        let with_encoder = self.encoder_trainable(states);
        let mut out = self.head.tensors_mut();
        if with_encoder {
            out.extend(self.encoder.tensors_mut());
        }
        out
    }

    pub fn trainable_tensors(&self, states: Option<&HiddenStates>) -> Vec<(&'static str, &[T])> {
        let mut out = self.head.tensors();
        if self.encoder_trainable(states) {
            out.extend(self.encoder.tensors());
        }
        out
    }
}
