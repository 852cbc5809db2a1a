//! Metrics and the repeated zero-shot / few-shot experimental protocol.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{make_few_shot_split, make_zero_shot_split, write_jsonl, Instance, RelationTable, SplitSpec};
use crate::error::{Error, Result};
use crate::inference::{predict, DistKind, RelationIndex};
use crate::model::{Model, ModelConfig, Resources};
use crate::optim::{train_observed, TrainConfig, TrainHistory};
use crate::rng::{derive, offsets};
use crate::scalar::Scalar;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RelationScores {
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub support: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub per_relation: BTreeMap<String, RelationScores>,
    pub macro_p: f64,
    pub macro_r: f64,
    pub macro_f1: f64,
    pub micro_p: f64,
    pub micro_r: f64,
    pub micro_f1: f64,
    pub accuracy: f64,
    pub n: usize,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn f1(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Per-relation confusion counts and macro averages over unseen relations
/// with test support.
pub fn compute_metrics(gold: &[String], pred: &[String], unseen_ids: &[String]) -> Result<Metrics> {
    if gold.len() != pred.len() {
        return Err(Error::Invalid(format!("{} gold labels but {} predictions", gold.len(), pred.len())));
    }
    let unseen: BTreeSet<&str> = unseen_ids.iter().map(String::as_str).collect();
    if let Some(g) = gold.iter().find(|g| !unseen.contains(g.as_str())) {
        return Err(Error::Invalid(format!("gold relation {g} is not in the unseen set")));
    }
    let mut per_relation: BTreeMap<String, RelationScores> = BTreeMap::new();
    for (g, p) in gold.iter().zip(pred) {
        per_relation.entry(g.clone()).or_default().support += 1;
        if g == p {
            per_relation.entry(g.clone()).or_default().tp += 1;
        } else {
            per_relation.entry(g.clone()).or_default().fn_ += 1;
            per_relation.entry(p.clone()).or_default().fp += 1;
        }
    }
    for s in per_relation.values_mut() {
        s.precision = ratio(s.tp, s.tp + s.fp);
        s.recall = ratio(s.tp, s.tp + s.fn_);
        s.f1 = f1(s.precision, s.recall);
    }
    let supported: Vec<&RelationScores> = unseen_ids
        .iter()
        .filter_map(|id| per_relation.get(id))
        .filter(|s| s.support > 0)
        .collect();
    let mean = |f: fn(&RelationScores) -> f64| {
        if supported.is_empty() {
            0.0
        } else {
            supported.iter().map(|s| f(s)).sum::<f64>() / supported.len() as f64
        }
    };
    let tp: usize = per_relation.values().map(|s| s.tp).sum();
    let fp: usize = per_relation.values().map(|s| s.fp).sum();
    let fn_: usize = per_relation.values().map(|s| s.fn_).sum();
    let (micro_p, micro_r) = (ratio(tp, tp + fp), ratio(tp, tp + fn_));
    Ok(Metrics {
        macro_p: mean(|s| s.precision),
        macro_r: mean(|s| s.recall),
        macro_f1: mean(|s| s.f1),
        micro_p,
        micro_r,
        micro_f1: f1(micro_p, micro_r),
        accuracy: ratio(tp, gold.len()),
        n: gold.len(),
        per_relation,
    })
}

/// Everything the protocol needs besides the split parameters.
#[derive(Clone, Debug)]
pub struct Protocol<'a> {
    pub instances: &'a [Instance],
    pub relations: &'a RelationTable,
    pub train: TrainConfig,
    pub model: ModelConfig,
    pub resources: &'a Resources,
    /// Worker threads for independent repeats.
    pub jobs: usize,
    /// Evaluate on the test set every this many epochs while training.
    pub eval_every: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatResult {
    pub seed: u64,
    pub unseen_ids: Vec<String>,
    pub n_train: usize,
    pub n_test: usize,
    pub metrics: Metrics,
    pub history: TrainHistory,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    pub std: f64,
}

impl MeanStd {
    /// Mean and sample standard deviation (0 for a single value).
    pub fn of(xs: &[f64]) -> Self {
        if xs.is_empty() {
            return MeanStd::default();
        }
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let std = if xs.len() < 2 {
            0.0
        } else {
            (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        MeanStd { mean, std }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub train: TrainConfig,
    pub model: ModelConfig,
    pub m: usize,
    pub repeats: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fewshot_fraction: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: ConfigEcho,
    pub split_seeds: Vec<u64>,
    pub repeats: Vec<RepeatResult>,
    pub macro_p: MeanStd,
    pub macro_r: MeanStd,
    pub macro_f1: MeanStd,
}

impl ExperimentReport {
    fn aggregate(config: ConfigEcho, repeats: Vec<RepeatResult>) -> Self {
        let pick = |f: fn(&Metrics) -> f64| MeanStd::of(&repeats.iter().map(|r| f(&r.metrics)).collect::<Vec<_>>());
        ExperimentReport {
            config,
            split_seeds: repeats.iter().map(|r| r.seed).collect(),
            macro_p: pick(|m| m.macro_p),
            macro_r: pick(|m| m.macro_r),
            macro_f1: pick(|m| m.macro_f1),
            repeats,
        }
    }
}

/// Predicts every test instance against `index` and scores the result.
pub fn evaluate<T: Scalar>(
    model: &Model<T>,
    instances: &[Instance],
    test_idx: &[usize],
    index: &RelationIndex<T>,
    resources: &Resources,
) -> Result<Metrics> {
    let states = resources.hidden_states.as_ref();
    let mut gold = Vec::with_capacity(test_idx.len());
    let mut pred = Vec::with_capacity(test_idx.len());
    for &i in test_idx {
        let a_hat = model.embed(i, &instances[i], states)?;
        pred.push(predict(&a_hat, index)?.relation_id);
        gold.push(instances[i].relation.clone());
    }
    let ids: Vec<String> = index.entries().iter().map(|(id, _)| id.clone()).collect();
    compute_metrics(&gold, &pred, &ids)
}

/// Runs `f` for each repeat index, on up to `jobs` threads; results keep repeat order.
fn for_repeats<R: Send>(repeats: usize, jobs: usize, f: impl Fn(usize) -> Result<R> + Sync) -> Result<Vec<R>> {
    if jobs <= 1 || repeats <= 1 {
        return (0..repeats).map(f).collect();
    }
    let chunk = repeats.div_ceil(jobs);
    let f = &f;
    std::thread::scope(|s| {
        let handles: Vec<_> = (0..repeats)
            .collect::<Vec<_>>()
            .chunks(chunk)
            .map(|rs| {
                let rs = rs.to_vec();
                s.spawn(move || rs.into_iter().map(f).collect::<Result<Vec<R>>>())
            })
            .collect();
        let mut out = Vec::with_capacity(repeats);
        for h in handles {
            out.extend(h.join().expect("repeat worker panicked")?);
        }
        Ok(out)
    })
}

impl Protocol<'_> {
    pub fn repeat_seed(&self, r: usize) -> u64 {
        self.train.seed.wrapping_add(r as u64)
    }

    /// Zero-shot split for repeat `r`, then the few-shot move when `fraction > 0`.
    pub fn split(&self, r: usize, m: usize, fraction: f64) -> Result<SplitSpec> {
        let seed = self.repeat_seed(r);
        let split = make_zero_shot_split(self.instances, self.relations, m, seed)?;
        if fraction > 0.0 {
            make_few_shot_split(&split, self.instances, fraction, derive(seed, offsets::FEWSHOT))
        } else {
            Ok(split)
        }
    }

    /// Trains on `split` with `train` and scores under each distance in `dists`.
    fn train_and_score<T: Scalar>(
        &self,
        split: &SplitSpec,
        train: &TrainConfig,
        dists: &[DistKind],
    ) -> Result<Vec<RepeatResult>> {
        let index = RelationIndex::<T>::build(
            &split.unseen_ids,
            self.relations,
            &self.model.description_encoder(),
            train.dist_kind,
        )?;
        let eval_every = self.eval_every.filter(|&e| e > 0);
        let mut observer = |epoch: usize, model: &Model<T>| -> Result<Option<f64>> {
            match eval_every {
                Some(e) if (epoch + 1).is_multiple_of(e) => {
                    Ok(Some(evaluate(model, self.instances, &split.test_idx, &index, self.resources)?.macro_f1))
                }
                _ => Ok(None),
            }
        };
        let (model, history) =
            train_observed::<T>(self.instances, self.relations, split, train, &self.model, self.resources, &mut observer)?;
        dists
            .iter()
            .map(|&d| {
                let metrics = evaluate(&model, self.instances, &split.test_idx, &index.with_dist(d), self.resources)?;
                Ok(RepeatResult {
                    seed: split.seed,
                    unseen_ids: split.unseen_ids.clone(),
                    n_train: split.train_idx.len(),
                    n_test: split.test_idx.len(),
                    metrics,
                    history: history.clone(),
                })
            })
            .collect()
    }

    fn run<T: Scalar>(&self, m: usize, repeats: usize, fraction: f64, train: &TrainConfig) -> Result<ExperimentReport> {
        if repeats == 0 {
            return Err(Error::Config("repeats must be >= 1".into()));
        }
        let results = for_repeats(repeats, self.jobs, |r| {
            let split = self.split(r, m, fraction)?;
            let cfg = TrainConfig { seed: self.repeat_seed(r), ..train.clone() };
            Ok(self.train_and_score::<T>(&split, &cfg, &[train.dist_kind])?.remove(0))
        })?;
        let echo = ConfigEcho {
            train: train.clone(),
            model: self.model.clone(),
            m,
            repeats,
            fewshot_fraction: (fraction > 0.0).then_some(fraction),
        };
        Ok(ExperimentReport::aggregate(echo, results))
    }
}

/// `repeats` independent zero-shot runs with split seeds `seed + r`.
pub fn run_experiment<T: Scalar>(protocol: &Protocol, m: usize, repeats: usize) -> Result<ExperimentReport> {
    protocol.run::<T>(m, repeats, 0.0, &protocol.train)
}

/// One row of a curve or sweep table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub value: String,
    pub macro_f1: MeanStd,
    pub report: ExperimentReport,
}

pub fn curve_csv(rows: &[CurveRow]) -> String {
    let mut s = String::from("value,mean_macro_F1,std_macro_F1\n");
    for r in rows {
        s += &format!("{},{},{}\n", r.value, r.macro_f1.mean, r.macro_f1.std);
    }
    s
}

/// Mean macro F1 per few-shot fraction; `0.0` is the plain zero-shot run.
pub fn run_fewshot_curve<T: Scalar>(
    protocol: &Protocol,
    m: usize,
    repeats: usize,
    fractions: &[f64],
) -> Result<Vec<CurveRow>> {
    if fractions.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::Config("fractions must be sorted".into()));
    }
    fractions
        .iter()
        .map(|&f| {
            if !(0.0..1.0).contains(&f) {
                return Err(Error::Config(format!("fraction {f} outside [0, 1)")));
            }
            let report = protocol.run::<T>(m, repeats, f, &protocol.train)?;
            Ok(CurveRow { value: f.to_string(), macro_f1: report.macro_f1, report })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "axis", content = "values", rename_all = "lowercase")]
pub enum SweepAxis {
    Gamma(Vec<f64>),
    Alpha(Vec<f64>),
    Dist(Vec<DistKind>),
}

impl SweepAxis {
    pub fn len(&self) -> usize {
        match self {
            SweepAxis::Gamma(v) | SweepAxis::Alpha(v) => v.len(),
            SweepAxis::Dist(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Same protocol per value, varying one hyperparameter. Distance sweeps share
/// one trained model per repeat since training does not depend on the distance.
pub fn run_sweep<T: Scalar>(protocol: &Protocol, m: usize, repeats: usize, axis: &SweepAxis) -> Result<Vec<CurveRow>> {
    if axis.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let row = |value: String, report: ExperimentReport| CurveRow { value, macro_f1: report.macro_f1, report };
    match axis {
        SweepAxis::Gamma(vs) | SweepAxis::Alpha(vs) => vs
            .iter()
            .map(|&v| {
                let mut cfg = protocol.train.clone();
                if matches!(axis, SweepAxis::Gamma(_)) {
                    cfg.gamma = v;
                } else {
                    cfg.alpha = v;
                }
                Ok(row(v.to_string(), protocol.run::<T>(m, repeats, 0.0, &cfg)?))
            })
            .collect(),
        SweepAxis::Dist(kinds) => {
            if repeats == 0 {
                return Err(Error::Config("repeats must be >= 1".into()));
            }
            let per_repeat = for_repeats(repeats, protocol.jobs, |r| {
                let split = protocol.split(r, m, 0.0)?;
                let cfg = TrainConfig { seed: protocol.repeat_seed(r), ..protocol.train.clone() };
                protocol.train_and_score::<T>(&split, &cfg, kinds)
            })?;
            Ok(kinds
                .iter()
                .enumerate()
                .map(|(k, &d)| {
                    let results = per_repeat.iter().map(|rs| rs[k].clone()).collect();
                    let train = TrainConfig { dist_kind: d, ..protocol.train.clone() };
                    let echo = ConfigEcho { train, model: protocol.model.clone(), m, repeats, fewshot_fraction: None };
                    row(d.to_string(), ExperimentReport::aggregate(echo, results))
                })
                .collect())
        }
    }
}

#[derive(Serialize)]
struct EmbeddingRecord<'a> {
    index: usize,
    relation: &'a str,
    embedding: Vec<f64>,
}

/// Writes one JSONL line `{index, relation, embedding}` per instance.
pub fn dump_embeddings<T: Scalar>(
    model: &Model<T>,
    instances: &[Instance],
    resources: &Resources,
    path: impl AsRef<Path>,
) -> Result<()> {
    let states = resources.hidden_states.as_ref();
    let records = instances
        .iter()
        .enumerate()
        .map(|(i, inst)| {
            Ok(EmbeddingRecord {
                index: i,
                relation: &inst.relation,
                embedding: model.embed(i, inst, states)?.into_iter().map(Scalar::as_f64).collect(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    write_jsonl(path.as_ref(), records)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(xs: &[&str]) -> Vec<String> {
        xs.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn hand_computed_confusion() {
        // A: TP=3 FP=1 FN=1, B: TP=2 FP=1 FN=1
        let gold = ids(&["A", "A", "A", "A", "B", "B", "B"]);
        let pred = ids(&["A", "A", "A", "B", "B", "B", "A"]);
        let m = compute_metrics(&gold, &pred, &ids(&["A", "B"])).unwrap();
        let a = &m.per_relation["A"];
        assert_eq!((a.tp, a.fp, a.fn_), (3, 1, 1));
        assert!((a.f1 - 0.75).abs() < 1e-15);
        let b = &m.per_relation["B"];
        assert_eq!((b.tp, b.fp, b.fn_), (2, 1, 1));
        assert!((b.f1 - 2.0 / 3.0).abs() < 1e-15);
        assert!((m.macro_f1 - 0.708_333_333_333_333_3).abs() < 1e-12);
        assert!((m.accuracy - 5.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn perfect_predictions() {
        let g = ids(&["A", "B", "C", "A"]);
        let m = compute_metrics(&g, &g, &ids(&["A", "B", "C"])).unwrap();
        assert_eq!((m.macro_p, m.macro_r, m.macro_f1), (1.0, 1.0, 1.0));
    }

    #[test]
    fn unsupported_relation_excluded() {
        let g = ids(&["A", "A"]);
        let m = compute_metrics(&g, &g, &ids(&["A", "Z"])).unwrap();
        assert_eq!(m.macro_f1, 1.0);
        assert!(!m.per_relation.contains_key("Z"));
    }

    #[test]
    fn errors() {
        assert!(compute_metrics(&ids(&["A"]), &ids(&[]), &ids(&["A"])).is_err());
        assert!(compute_metrics(&ids(&["Q"]), &ids(&["Q"]), &ids(&["A"])).is_err());
    }

    #[test]
    fn mean_std() {
        let s = MeanStd::of(&[1.0, 2.0, 3.0]);
        assert_eq!(s.mean, 2.0);
        assert!((s.std - 1.0).abs() < 1e-15);
        assert_eq!(MeanStd::of(&[4.0]).std, 0.0);
    }

    #[test]
    fn sweep_axis_json() {
        let a: SweepAxis = serde_json::from_str(r#"{"axis":"dist","values":["nip","cosine"]}"#).unwrap();
        assert_eq!(a, SweepAxis::Dist(vec![DistKind::NegInnerProduct, DistKind::Cosine]));
    }
}
