#![allow(dead_code)]

use zsre::dataset::{generate_synthetic, SyntheticCorpus};
use zsre::evaluation::Protocol;
use zsre::{ModelConfig, Preset, Resources, SyntheticConfig, TrainConfig};

pub fn corpus(n_relations: usize, per_relation: usize, seed: u64) -> SyntheticCorpus {
    generate_synthetic(&SyntheticConfig {
        n_relations,
        instances_per_relation: per_relation,
        vocab_size: 20 * n_relations,
        seed,
        ..SyntheticConfig::default()
    })
    .unwrap()
}

pub fn resources(c: &SyntheticCorpus) -> Resources {
    Resources { embeddings: Some(c.token_embeddings.clone()), hidden_states: None }
}

pub fn desk(epochs: usize) -> TrainConfig {
    TrainConfig { epochs, ..TrainConfig::preset(Preset::Desk) }
}

pub fn protocol<'a>(c: &'a SyntheticCorpus, res: &'a Resources, train: TrainConfig) -> Protocol<'a> {
    Protocol {
        instances: &c.instances,
        relations: &c.relations,
        train,
        model: ModelConfig::desk(),
        resources: res,
        jobs: 1,
        eval_every: None,
    }
}

pub struct Fixture {
    pub corpus: SyntheticCorpus,
    pub model: zsre::Model,
}
