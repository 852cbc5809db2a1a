mod common;

use std::fs;

use zsre::dataset::make_zero_shot_split;
use zsre::inference::{predict, RelationIndex};
use zsre::optim::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use zsre::optim::train;
use zsre::{Error, ModelConfig};

fn trained() -> (zsre::dataset::SyntheticCorpus, zsre::Model, zsre::TrainConfig, zsre::SplitSpec) {
    let c = common::corpus(5, 8, 11);
    let res = common::resources(&c);
    let split = make_zero_shot_split(&c.instances, &c.relations, 2, 3).unwrap();
    let cfg = zsre::TrainConfig { seed: 77, ..common::desk(3) };
    let mc = ModelConfig { mixing: true, ..ModelConfig::desk() };
    let (model, _) = train::<f64>(&c.instances, &c.relations, &split, &cfg, &mc, &res).unwrap();
    (c, model, cfg, split)
}

#[test]
fn round_trip_is_bit_exact() {
    let (c, model, cfg, split) = trained();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck.json");
    save_checkpoint(&model, &cfg, &path).unwrap();
    let (back, ck) = load_checkpoint::<f64>(&path).unwrap();
    assert_eq!(ck.version, "1");
    assert_eq!(ck.seed, 77);
    assert_eq!(ck.train_config, cfg);
    assert_eq!(ck.model_config, model.config);
    let bits = |m: &zsre::Model| -> Vec<u64> {
        m.head.tensors().iter().chain(&m.encoder.tensors()).flat_map(|(_, t)| t.iter().map(|x| x.to_bits())).collect()
    };
    assert_eq!(bits(&back), bits(&model));
    assert_eq!(back.vocab, model.vocab);
    assert_eq!(back.classes, model.classes);

    let index =
        RelationIndex::<f64>::build(&split.unseen_ids, &c.relations, &model.config.description_encoder(), cfg.dist_kind)
            .unwrap();
    for (i, inst) in c.instances.iter().enumerate() {
        let a = model.embed(i, inst, None).unwrap();
        let b = back.embed(i, inst, None).unwrap();
        assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        assert_eq!(predict(&a, &index).unwrap(), predict(&b, &index).unwrap());
    }
}

#[test]
fn version_and_format_are_enforced() {
    let (_, model, cfg, _) = trained();
    let mut v = serde_json::to_value(Checkpoint::from_model(&model, &cfg)).unwrap();
    v["version"] = "0".into();
    let err = Checkpoint::from_value(v.clone()).unwrap_err();
    assert!(matches!(err, Error::Checkpoint(_)) && err.to_string().contains("\"0\""), "{err}");
    v["version"] = "1".into();
    v["format"] = "something-else".into();
    assert!(Checkpoint::from_value(v).is_err());

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(&path, "{\"format\": \"zsre-checkpoint\", \"version\": ").unwrap();
    assert!(matches!(load_checkpoint::<f64>(&path).unwrap_err(), Error::Json(_)));
    assert!(matches!(load_checkpoint::<f64>(dir.path().join("missing.json")).unwrap_err(), Error::Io { .. }));
}

#[test]
fn single_precision_round_trip() {
    let (_, model, cfg, _) = trained();
    let m32: zsre::Model32 = model.cast();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ck32.json");
    save_checkpoint(&m32, &cfg, &path).unwrap();
    let (back, _) = load_checkpoint::<f32>(&path).unwrap();
    assert_eq!(back, m32);
}
