mod common;

use zsre::dataset::make_zero_shot_split;
use zsre::model::Model;
use zsre::optim::{grad_check, GradCheckConfig};
use zsre::rng::SeededRng;
use zsre::{Instance, ModelConfig};

/// Model with every tensor trainable, plus a random batch of `b` training instances.
fn setup(seed: u64, b: usize) -> (common::Fixture, Vec<usize>) {
    let c = common::corpus(5, 6, seed);
    let split = make_zero_shot_split(&c.instances, &c.relations, 1, seed).unwrap();
    let cfg = ModelConfig { hidden_size: 8, d_attr: 64, mixing: true, encoder_trainable: true, ..ModelConfig::desk() };
    let train: Vec<&Instance> = split.train_idx.iter().map(|&i| &c.instances[i]).collect();
    let model = Model::<f64>::init(&cfg, &train, split.train_classes(&c.instances), &Default::default(), seed).unwrap();
    let mut rng = SeededRng::new(seed ^ 0xb);
    let items = rng.sample_indices(split.train_idx.len(), b).into_iter().map(|p| split.train_idx[p]).collect();
    (common::Fixture { corpus: c, model }, items)
}

#[test]
fn analytic_matches_finite_differences() {
    for seed in [1, 2, 3] {
        for b in [1, 2, 4] {
            let (fx, idx) = setup(seed, b);
            let items: Vec<(usize, &Instance)> = idx.iter().map(|&i| (i, &fx.corpus.instances[i])).collect();
            let attrs = fx.model.class_attributes(&fx.corpus.relations).unwrap();
            for alpha in [0.0, 0.4, 1.0] {
                for gamma in [0.5, 7.5] {
                    let cfg = GradCheckConfig { seed, ..GradCheckConfig::default() };
                    let r = grad_check(&fx.model, &items, &attrs, None, gamma, alpha, &cfg).unwrap();
                    assert_eq!(r.tensors.len(), 11);
                    assert!(
                        r.passes(),
                        "seed {seed} B {b} alpha {alpha} gamma {gamma}\n{}",
                        r.table()
                    );
                }
            }
        }
    }
}

#[test]
fn hinge_boundary_coordinates_are_skipped() {
    let (fx, _) = setup(4, 2);
    let m = &fx.model;
    let attrs = m.class_attributes(&fx.corpus.relations).unwrap();
    // two instances with different labels
    let inst = &fx.corpus.instances;
    let i = (0..inst.len()).find(|&i| m.class_index(&inst[i].relation).is_some()).unwrap();
    let j = (0..inst.len())
        .find(|&j| m.class_index(&inst[j].relation).is_some_and(|c| Some(c) != m.class_index(&inst[i].relation)))
        .unwrap();
    let items = vec![(i, &inst[i]), (j, &inst[j])];
    let (batch, _) = m.batch(&items, &attrs, None).unwrap();
    let a0 = &batch.attrs[0];
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(x, y)| x * y).sum::<f64>();
    // γ that puts instance 0 exactly on its hinge
    let gamma = dot(a0, &batch.traces[0].a_hat) - dot(a0, &batch.traces[1].a_hat);
    let r = grad_check(m, &items, &attrs, None, gamma, 0.4, &GradCheckConfig::default()).unwrap();
    let by_name = |n: &str| r.tensors.iter().find(|t| t.name == n).unwrap();
    assert!(!by_name("w1").skipped.is_empty(), "{}", r.table());
    assert!(by_name("w_star").skipped.is_empty());
    assert!(r.passes(), "{}", r.table());
}
