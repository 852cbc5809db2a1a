//! Declarative run configuration.
//!
//! Values resolve in three layers: preset defaults, then the JSON config file,
//! then command-line flags. Every key of [`RawConfig`] is optional; unknown
//! keys are rejected.

use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::encoding::DescriptionMode;
use crate::error::{io_err, Error, Result};
use crate::evaluation::SweepAxis;
use crate::inference::DistKind;
use crate::model::ModelConfig;
use crate::optim::{GradCheckConfig, Preset, TrainConfig};

/// One configuration layer, as written in a config file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub preset: Option<Preset>,
    pub instances: Option<PathBuf>,
    pub relations: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub hidden_states: Option<PathBuf>,
    pub split: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    /// New instances to label with `predict`.
    pub input: Option<PathBuf>,

    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub gamma: Option<f64>,
    pub alpha: Option<f64>,
    pub epochs: Option<usize>,
    pub seed: Option<u64>,
    pub dist: Option<DistKind>,
    pub clip_grad_norm: Option<f64>,

    pub hidden_size: Option<usize>,
    pub d_attr: Option<usize>,
    pub mixing: Option<bool>,
    pub encoder_trainable: Option<bool>,
    pub description_mode: Option<DescriptionMode>,
    pub description_seed: Option<u64>,

    pub m: Option<usize>,
    pub repeats: Option<usize>,
    pub fractions: Option<Vec<f64>>,
    /// Few-shot fraction for a single split (`split` and `train`); 0 is zero-shot.
    pub fraction: Option<f64>,
    pub sweep: Option<SweepAxis>,
    pub jobs: Option<usize>,
    pub eval_every: Option<usize>,

    pub gradcheck_step: Option<f64>,
    pub gradcheck_tol: Option<f64>,
    pub gradcheck_batch: Option<usize>,
}

macro_rules! overlay {
    ($dst:ident, $src:ident, $($f:ident),* $(,)?) => {
        $( if $src.$f.is_some() { $dst.$f = $src.$f.clone(); } )*
    };
}

impl RawConfig {
    pub fn from_file(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(io_err(path))?;
        serde_json::from_reader(BufReader::new(f)).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Fields set in `top` replace those in `self`.
    pub fn overlay(mut self, top: &RawConfig) -> Self {
        overlay!(
            self, top, preset, instances, relations, out, embeddings, hidden_states, split, checkpoint, input,
            learning_rate, batch_size, gamma, alpha, epochs, seed, dist, clip_grad_norm, hidden_size, d_attr,
            mixing, encoder_trainable, description_mode, description_seed, m, repeats, fractions, fraction, sweep, jobs,
            eval_every, gradcheck_step, gradcheck_tol, gradcheck_batch,
        );
        self
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Paths {
    pub instances: Option<PathBuf>,
    pub relations: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub hidden_states: Option<PathBuf>,
    pub split: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub input: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    pub m: usize,
    pub repeats: usize,
    pub fractions: Vec<f64>,
    pub fraction: f64,
    pub sweep: Option<SweepAxis>,
    pub jobs: usize,
    pub eval_every: Option<usize>,
}

/// Fully resolved configuration.
#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub preset: Preset,
    pub paths: Paths,
    pub train: TrainConfig,
    pub model: ModelConfig,
    pub protocol: ProtocolConfig,
    pub gradcheck: GradCheckConfig,
    pub gradcheck_batch: usize,
}

impl RunConfig {
    /// Applies `raw` over the defaults of its preset (desk when unset).
    pub fn resolve(raw: &RawConfig) -> Result<Self> {
        let preset = raw.preset.unwrap_or(Preset::Desk);
        let mut train = TrainConfig::preset(preset);
        let mut model = match preset {
            Preset::Desk => ModelConfig::desk(),
            Preset::Paper => ModelConfig::paper(),
        };
        let mut protocol = ProtocolConfig {
            m: 3,
            repeats: 5,
            fractions: vec![0.0, 0.05, 0.1],
            fraction: 0.0,
            sweep: None,
            jobs: 1,
            eval_every: None,
        };
        let mut gradcheck = GradCheckConfig::default();
        let mut gradcheck_batch = 4;

        macro_rules! set {
            ($dst:expr, $f:ident) => {
                if let Some(v) = raw.$f.clone() {
                    $dst = v;
                }
            };
        }
        set!(train.learning_rate, learning_rate);
        set!(train.batch_size, batch_size);
        set!(train.gamma, gamma);
        set!(train.alpha, alpha);
        set!(train.epochs, epochs);
        set!(train.seed, seed);
        set!(train.dist_kind, dist);
        if raw.clip_grad_norm.is_some() {
            train.clip_grad_norm = raw.clip_grad_norm;
        }
        set!(model.hidden_size, hidden_size);
        set!(model.d_attr, d_attr);
        set!(model.mixing, mixing);
        set!(model.encoder_trainable, encoder_trainable);
        set!(model.description_mode, description_mode);
        set!(model.description_seed, description_seed);
        set!(protocol.m, m);
        set!(protocol.repeats, repeats);
        set!(protocol.fractions, fractions);
        set!(protocol.fraction, fraction);
        set!(protocol.jobs, jobs);
        if raw.sweep.is_some() {
            protocol.sweep = raw.sweep.clone();
        }
        if raw.eval_every.is_some() {
            protocol.eval_every = raw.eval_every;
        }
        set!(gradcheck.step, gradcheck_step);
        set!(gradcheck.tol, gradcheck_tol);
        set!(gradcheck_batch, gradcheck_batch);
        gradcheck.seed = train.seed;

        let cfg = RunConfig {
            preset,
            paths: Paths {
                instances: raw.instances.clone(),
                relations: raw.relations.clone(),
                out: raw.out.clone(),
                embeddings: raw.embeddings.clone(),
                hidden_states: raw.hidden_states.clone(),
                split: raw.split.clone(),
                checkpoint: raw.checkpoint.clone(),
                input: raw.input.clone(),
            },
            train,
            model,
            protocol,
            gradcheck,
            gradcheck_batch,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Range checks only; see [`RunConfig::check_paths`] for file existence.
    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.model.validate()?;
        let p = &self.protocol;
        if p.repeats == 0 {
            return Err(Error::Config("repeats must be >= 1".into()));
        }
        if p.m == 0 {
            return Err(Error::Config("m must be >= 1".into()));
        }
        if p.jobs == 0 {
            return Err(Error::Config("jobs must be >= 1".into()));
        }
        if let Some(f) = p.fractions.iter().chain([&p.fraction]).find(|f| !(0.0..1.0).contains(*f)) {
            return Err(Error::Config(format!("fraction {f} outside [0, 1)")));
        }
        if !(self.gradcheck.step > 0.0) || !(self.gradcheck.tol > 0.0) || self.gradcheck_batch == 0 {
            return Err(Error::Config("gradcheck step, tol and batch must be > 0".into()));
        }
        Ok(())
    }

    /// Every input path that is set must exist.
    pub fn check_paths(&self) -> Result<()> {
        let p = &self.paths;
        for (name, path) in [
            ("instances", &p.instances),
            ("relations", &p.relations),
            ("embeddings", &p.embeddings),
            ("hidden_states", &p.hidden_states),
            ("split", &p.split),
            ("checkpoint", &p.checkpoint),
            ("input", &p.input),
        ] {
            if let Some(path) = path {
                if !path.exists() {
                    return Err(Error::Config(format!("{name} path {} does not exist", path.display())));
                }
            }
        }
        Ok(())
    }

    /// Every field set explicitly; loading it back yields the same config.
    pub fn to_raw(&self) -> RawConfig {
        RawConfig {
            preset: Some(self.preset),
            instances: self.paths.instances.clone(),
            relations: self.paths.relations.clone(),
            out: self.paths.out.clone(),
            embeddings: self.paths.embeddings.clone(),
            hidden_states: self.paths.hidden_states.clone(),
            split: self.paths.split.clone(),
            checkpoint: self.paths.checkpoint.clone(),
            input: self.paths.input.clone(),
            learning_rate: Some(self.train.learning_rate),
            batch_size: Some(self.train.batch_size),
            gamma: Some(self.train.gamma),
            alpha: Some(self.train.alpha),
            epochs: Some(self.train.epochs),
            seed: Some(self.train.seed),
            dist: Some(self.train.dist_kind),
            clip_grad_norm: self.train.clip_grad_norm,
            hidden_size: Some(self.model.hidden_size),
            d_attr: Some(self.model.d_attr),
            mixing: Some(self.model.mixing),
            encoder_trainable: Some(self.model.encoder_trainable),
            description_mode: Some(self.model.description_mode),
            description_seed: Some(self.model.description_seed),
            m: Some(self.protocol.m),
            repeats: Some(self.protocol.repeats),
            fractions: Some(self.protocol.fractions.clone()),
            fraction: Some(self.protocol.fraction),
            sweep: self.protocol.sweep.clone(),
            jobs: Some(self.protocol.jobs),
            eval_every: self.protocol.eval_every,
            gradcheck_step: Some(self.gradcheck.step),
            gradcheck_tol: Some(self.gradcheck.tol),
            gradcheck_batch: Some(self.gradcheck_batch),
        }
    }
}

/// Reads a config file and resolves it under `flags`.
pub fn load_config(path: Option<&Path>, flags: &RawConfig) -> Result<RunConfig> {
    let file = match path {
        Some(p) => RawConfig::from_file(p)?,
        None => RawConfig::default(),
    };
    RunConfig::resolve(&file.overlay(flags))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: &str) -> Result<RunConfig> {
        let raw: RawConfig = serde_json::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        RunConfig::resolve(&raw)
    }

    #[test]
    fn paper_preset_defaults() {
        let c = parse(r#"{"preset":"paper"}"#).unwrap();
        assert_eq!(c.train.batch_size, 4);
        assert_eq!(c.train.gamma, 7.5);
        assert_eq!(c.train.alpha, 0.4);
        assert_eq!(c.train.learning_rate, 5e-6);
        assert_eq!((c.model.hidden_size, c.model.d_attr), (768, 1024));
    }

    #[test]
    fn desk_is_default() {
        let c = parse("{}").unwrap();
        assert_eq!(c.preset, Preset::Desk);
        assert_eq!(c.train.learning_rate, 1e-3);
        assert_eq!((c.model.hidden_size, c.model.d_attr), (32, 64));
        assert_eq!(c.protocol.repeats, 5);
    }

    #[test]
    fn flags_override_file() {
        let file: RawConfig = serde_json::from_str(r#"{"gamma":7.5,"alpha":0.3}"#).unwrap();
        let flags = RawConfig { gamma: Some(2.0), ..Default::default() };
        let c = RunConfig::resolve(&file.overlay(&flags)).unwrap();
        assert_eq!(c.train.gamma, 2.0);
        assert_eq!(c.train.alpha, 0.3);
    }

    #[test]
    fn range_and_typo_errors() {
        assert!(parse(r#"{"alpha":1.5}"#).unwrap_err().to_string().contains("alpha"));
        assert!(parse(r#"{"gama":1.0}"#).is_err());
        assert!(parse(r#"{"batch_size":0}"#).is_err());
        assert!(parse(r#"{"fractions":[0.0, 1.0]}"#).is_err());
    }

    #[test]
    fn resolved_round_trip() {
        let c = parse(r#"{"preset":"paper","gamma":3.0,"sweep":{"axis":"gamma","values":[0.5,7.5]}}"#).unwrap();
        let js = serde_json::to_string(&c.to_raw()).unwrap();
        let back = RunConfig::resolve(&serde_json::from_str(&js).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
