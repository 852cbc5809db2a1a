//! Relation-labelled sentences, relation descriptions, and the seen/unseen
//! split protocol.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{io_err, Error, Result};
use crate::rng::{SeededRng, RNG_ALGORITHM};

/// Inclusive token range `[start, end]`, serialized as a two-element array.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        Span { start, end }
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end < self.start
    }

    pub fn contains(&self, t: usize) -> bool {
        self.start <= t && t <= self.end
    }
}

impl From<[usize; 2]> for Span {
    fn from([start, end]: [usize; 2]) -> Self {
        Span { start, end }
    }
}

impl From<Span> for [usize; 2] {
    fn from(s: Span) -> Self {
        [s.start, s.end]
    }
}

/// One sentence with its two entity spans and gold relation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub tokens: Vec<String>,
    pub head: Span,
    pub tail: Span,
    pub relation: String,
}

impl Instance {
    /// Checks both spans against the token count.
    pub fn validate(&self) -> std::result::Result<(), String> {
        if self.tokens.is_empty() {
            return Err("empty token list".into());
        }
        for (name, span) in [("head", self.head), ("tail", self.tail)] {
            if span.start > span.end {
                return Err(format!(
                    "{name} span start exceeds end ({} > {})",
                    span.start, span.end
                ));
            }
            if span.end >= self.tokens.len() {
                return Err(format!(
                    "{name} span out of range: end {} with {} tokens",
                    span.end,
                    self.tokens.len()
                ));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RelationMeta {
    pub id: String,
    #[serde(default)]
    pub name: String,
    pub description: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attribute: Option<Vec<f64>>,
}

impl RelationMeta {
    fn validate(&self, d_attr: Option<usize>) -> Result<()> {
        let invalid = |msg: String| Error::InvalidRelation { id: self.id.clone(), msg };
        if self.description.trim().is_empty() {
            return Err(invalid("empty description".into()));
        }
        if let Some(a) = &self.attribute {
            if a.iter().any(|x| !x.is_finite()) {
                return Err(invalid("attribute has non-finite entries".into()));
            }
            if let Some(d) = d_attr {
                if a.len() != d {
                    return Err(invalid(format!("attribute length {} != d_attr {d}", a.len())));
                }
            }
        }
        Ok(())
    }
}

/// Relation id → metadata, iterated in id order.
pub type RelationTable = BTreeMap<String, RelationMeta>;

fn read_jsonl<R, F>(path: &Path, mut each: F) -> Result<()>
where
    F: FnMut(usize, R) -> Result<()>,
    R: for<'de> Deserialize<'de>,
{
    let file = File::open(path).map_err(io_err(path))?;
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: R = serde_json::from_str(&line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: line_no,
            msg: e.to_string(),
        })?;
        each(line_no, rec)?;
    }
    Ok(())
}

pub(crate) fn write_jsonl<S: Serialize>(path: &Path, records: impl IntoIterator<Item = S>) -> Result<()> {
    let file = File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for rec in records {
        serde_json::to_writer(&mut w, &rec)?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Reads an instances JSONL file. Unknown keys are ignored; blank lines skipped.
pub fn load_instances(path: impl AsRef<Path>) -> Result<Vec<Instance>> {
    let mut out = Vec::new();
    read_jsonl(path.as_ref(), |line, inst: Instance| {
        inst.validate().map_err(|msg| Error::InvalidInstance { line, msg })?;
        out.push(inst);
        Ok(())
    })?;
    Ok(out)
}

pub fn write_instances(path: impl AsRef<Path>, instances: &[Instance]) -> Result<()> {
    write_jsonl(path.as_ref(), instances)
}

/// Reads a relations JSONL file; `d_attr`, when given, fixes the attribute length.
pub fn load_relations(path: impl AsRef<Path>, d_attr: Option<usize>) -> Result<RelationTable> {
    let mut table = RelationTable::new();
    read_jsonl(path.as_ref(), |_, rel: RelationMeta| {
        rel.validate(d_attr)?;
        if table.contains_key(&rel.id) {
            return Err(Error::DuplicateRelation(rel.id));
        }
        table.insert(rel.id.clone(), rel);
        Ok(())
    })?;
    Ok(table)
}

pub fn write_relations(path: impl AsRef<Path>, relations: &RelationTable) -> Result<()> {
    write_jsonl(path.as_ref(), relations.values())
}

/// Fails on the first instance whose relation is missing from the table.
pub fn check_relations(instances: &[Instance], relations: &RelationTable) -> Result<()> {
    match instances.iter().find(|i| !relations.contains_key(&i.relation)) {
        Some(i) => Err(Error::UnknownRelation(i.relation.clone())),
        None => Ok(()),
    }
}

/// Seen/unseen partition of relations and the matching instance partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub seed: u64,
    pub m: usize,
    pub seen_ids: Vec<String>,
    pub unseen_ids: Vec<String>,
    pub train_idx: Vec<usize>,
    pub test_idx: Vec<usize>,
    #[serde(default)]
    pub fewshot_fraction: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fewshot_seed: Option<u64>,
    pub rng: String,
}

impl SplitSpec {
    /// Labels the classifier is trained on: seen relations, then unseen relations
    /// that received few-shot training instances.
    pub fn train_classes(&self, instances: &[Instance]) -> Vec<String> {
        let in_train: BTreeSet<&str> =
            self.train_idx.iter().map(|&i| instances[i].relation.as_str()).collect();
        let mut classes = self.seen_ids.clone();
        classes.extend(self.unseen_ids.iter().filter(|id| in_train.contains(id.as_str())).cloned());
        classes
    }

    /// Checks the partition invariants against the instance list.
    pub fn validate(&self, instances: &[Instance]) -> Result<()> {
        let seen: BTreeSet<&String> = self.seen_ids.iter().collect();
        if let Some(id) = self.unseen_ids.iter().find(|id| seen.contains(id)) {
            return Err(Error::Split(format!("relation {id} is both seen and unseen")));
        }
        let train: BTreeSet<usize> = self.train_idx.iter().copied().collect();
        if let Some(i) = self.test_idx.iter().find(|i| train.contains(i)) {
            return Err(Error::Split(format!("instance {i} is in both train and test")));
        }
        if let Some(&i) = self.train_idx.iter().chain(&self.test_idx).find(|&&i| i >= instances.len()) {
            return Err(Error::Split(format!("instance index {i} out of range")));
        }
        if self.fewshot_fraction == 0.0 {
            let unseen: BTreeSet<&String> = self.unseen_ids.iter().collect();
            if let Some(&i) = self.train_idx.iter().find(|&&i| unseen.contains(&instances[i].relation)) {
                return Err(Error::Split(format!("train instance {i} carries unseen relation")));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let f = File::create(path).map_err(io_err(path))?;
        serde_json::to_writer_pretty(BufWriter::new(f), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(io_err(path))?;
        Ok(serde_json::from_reader(BufReader::new(f))?)
    }
}

fn distinct_relations(instances: &[Instance]) -> Vec<String> {
    let set: BTreeSet<&str> = instances.iter().map(|i| i.relation.as_str()).collect();
    set.into_iter().map(str::to_owned).collect()
}

/// Picks `m` unseen relations uniformly without replacement; every instance of
/// an unseen relation goes to test and every other instance to train.
pub fn make_zero_shot_split(
    instances: &[Instance],
    relations: &RelationTable,
    m: usize,
    seed: u64,
) -> Result<SplitSpec> {
    check_relations(instances, relations)?;
    let present = distinct_relations(instances);
    if m == 0 || m >= present.len() {
        return Err(Error::Split(format!(
            "m must satisfy 1 <= m < {} (relations present), got {m}",
            present.len()
        )));
    }
    let mut rng = SeededRng::new(seed);
    let picked = rng.sample_indices(present.len(), m);
    let unseen: BTreeSet<&String> = picked.iter().map(|&i| &present[i]).collect();
    let (seen_ids, unseen_ids): (Vec<String>, Vec<String>) =
        present.iter().cloned().partition(|id| !unseen.contains(id));

    let (mut train_idx, mut test_idx) = (Vec::new(), Vec::new());
    for (i, inst) in instances.iter().enumerate() {
        if unseen.contains(&inst.relation) {
            test_idx.push(i);
        } else {
            train_idx.push(i);
        }
    }
    Ok(SplitSpec {
        seed,
        m,
        seen_ids,
        unseen_ids,
        train_idx,
        test_idx,
        fewshot_fraction: 0.0,
        fewshot_seed: None,
        rng: RNG_ALGORITHM.to_owned(),
    })
}

/// Number of instances moved for a relation with `count` test instances.
pub fn fewshot_count(fraction: f64, count: usize) -> usize {
    // absorbs products such as 0.07 * 100 = 7.000000000000001
    let k = (fraction * count as f64 - 1e-9).ceil().max(0.0) as usize;
    k.min(count)
}

/// Moves `ceil(fraction × n_r)` test instances of each unseen relation `r`
/// into training.
pub fn make_few_shot_split(
    split: &SplitSpec,
    instances: &[Instance],
    fraction: f64,
    seed: u64,
) -> Result<SplitSpec> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Split(format!("few-shot fraction must be in (0,1), got {fraction}")));
    }
    split.validate(instances)?;
    let mut rng = SeededRng::new(seed);
    let mut by_relation: HashMap<&str, Vec<usize>> = HashMap::new();
    for &i in &split.test_idx {
        by_relation.entry(instances[i].relation.as_str()).or_default().push(i);
    }
    let mut moved = BTreeSet::new();
    for id in &split.unseen_ids {
        let Some(pool) = by_relation.get(id.as_str()) else { continue };
        let k = fewshot_count(fraction, pool.len());
        moved.extend(rng.sample_indices(pool.len(), k).into_iter().map(|p| pool[p]));
    }
    let mut train_idx = split.train_idx.clone();
    train_idx.extend(moved.iter().copied());
    train_idx.sort_unstable();
    let test_idx = split.test_idx.iter().copied().filter(|i| !moved.contains(i)).collect();
    Ok(SplitSpec {
        train_idx,
        test_idx,
        fewshot_fraction: fraction,
        fewshot_seed: Some(seed),
        ..split.clone()
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticConfig {
    pub n_relations: usize,
    pub instances_per_relation: usize,
    pub vocab_size: usize,
    pub d_attr: usize,
    /// Probability that a non-entity token is drawn uniformly from the whole vocabulary.
    pub noise_scale: f64,
    pub seed: u64,
    /// Width of the emitted token embedding table.
    pub embed_dim: usize,
    /// Attributes are drawn from a random subspace of this dimension.
    pub latent_dim: usize,
    pub sentence_len: usize,
    /// Per-token deviation of embedding rows from their cluster centroid.
    pub token_jitter: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            n_relations: 12,
            instances_per_relation: 50,
            vocab_size: 240,
            d_attr: 64,
            noise_scale: 0.1,
            seed: 1,
            embed_dim: 32,
            latent_dim: 8,
            sentence_len: 8,
            token_jitter: 0.1,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(format!("synthetic: {m}")));
        if self.n_relations < 1
            || self.instances_per_relation < 1
            || self.d_attr < 1
            || self.embed_dim < 1
            || self.latent_dim < 1
        {
            return bad("all counts must be >= 1");
        }
        if self.vocab_size < 2 * self.n_relations {
            return bad("vocab_size must be >= 2 * n_relations");
        }
        if self.sentence_len < 3 {
            return bad("sentence_len must be >= 3");
        }
        if !(0.0..=1.0).contains(&self.noise_scale) {
            return bad("noise_scale must be in [0, 1]");
        }
        if !(self.token_jitter >= 0.0) {
            return bad("token_jitter must be >= 0");
        }
        Ok(())
    }

    /// Token ids `[k * size, (k + 1) * size)` belong to relation `k`.
    pub fn cluster_size(&self) -> usize {
        self.vocab_size / self.n_relations
    }
}

/// Output of [`generate_synthetic`].
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticCorpus {
    pub instances: Vec<Instance>,
    pub relations: RelationTable,
    /// Stand-in for a pretrained token encoder: one row per vocabulary token,
    /// in token-id order.
    pub token_embeddings: crate::encoding::TokenEmbeddings,
}

pub fn synthetic_token(id: usize) -> String {
    format!("tok{id}")
}

pub fn synthetic_relation_id(k: usize, n: usize) -> String {
    let width = n.saturating_sub(1).to_string().len();
    format!("R{k:0width$}")
}

/// Builds a corpus whose relations are linearly recoverable from token
/// embeddings.
///
/// Relation `k` owns a disjoint cluster of token ids. Its attribute `a_k` is a
/// unit vector in a random `latent_dim`-dimensional subspace, and the mean
/// embedding of its cluster is `P a_k` for one fixed random `P`. Sentences mix
/// cluster tokens with uniform noise tokens; entity spans always sit on cluster
/// tokens.
pub fn generate_synthetic(config: &SyntheticConfig) -> Result<SyntheticCorpus> {
    config.validate()?;
    let mut rng = SeededRng::new(config.seed);
    let (d, r, h) = (config.d_attr, config.latent_dim.min(config.d_attr), config.embed_dim);

    let basis: Vec<Vec<f64>> = (0..d).map(|_| (0..r).map(|_| rng.normal()).collect()).collect();
    let attributes: Vec<Vec<f64>> = (0..config.n_relations)
        .map(|_| {
            let z: Vec<f64> = (0..r).map(|_| rng.normal()).collect();
            let a: Vec<f64> = basis.iter().map(|row| row.iter().zip(&z).map(|(q, z)| q * z).sum()).collect();
            let n = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            a.into_iter().map(|x| x / n).collect()
        })
        .collect();

    let projection: Vec<Vec<f64>> = (0..h).map(|_| (0..d).map(|_| rng.normal()).collect()).collect();
    let cluster = config.cluster_size();
    let token_embeddings = (0..config.vocab_size)
        .map(|v| {
            let owner = v / cluster;
            let row: Vec<f64> = if owner < config.n_relations {
                let a = &attributes[owner];
                projection
                    .iter()
                    .map(|p| p.iter().zip(a).map(|(p, a)| p * a).sum::<f64>() + config.token_jitter * rng.normal())
                    .collect()
            } else {
                (0..h).map(|_| rng.normal()).collect()
            };
            (synthetic_token(v), row)
        })
        .collect();

    let mut relations = RelationTable::new();
    for (k, a) in attributes.iter().enumerate() {
        let id = synthetic_relation_id(k, config.n_relations);
        relations.insert(
            id.clone(),
            RelationMeta {
                id: id.clone(),
                name: format!("relation {k}"),
                description: format!("synthetic relation {k} expressed by token cluster {k}"),
                attribute: Some(a.clone()),
            },
        );
    }

    let len = config.sentence_len;
    let mut instances = Vec::with_capacity(config.n_relations * config.instances_per_relation);
    for k in 0..config.n_relations {
        let id = synthetic_relation_id(k, config.n_relations);
        let base = k * cluster;
        for _ in 0..config.instances_per_relation {
            let mut ids: Vec<usize> = (0..len)
                .map(|_| {
                    if config.noise_scale > 0.0 && rng.unit() < config.noise_scale {
                        rng.below(config.vocab_size)
                    } else {
                        base + rng.below(cluster)
                    }
                })
                .collect();
            let head_pos = rng.below(len - 2);
            let tail_start = head_pos + 1 + rng.below(len - head_pos - 2);
            let tail_end = tail_start + 1;
            for p in [head_pos, tail_start, tail_end] {
                ids[p] = base + rng.below(cluster);
            }
            instances.push(Instance {
                tokens: ids.into_iter().map(synthetic_token).collect(),
                head: Span::new(head_pos, head_pos),
                tail: Span::new(tail_start, tail_end),
                relation: id.clone(),
            });
        }
    }
    Ok(SyntheticCorpus { instances, relations, token_embeddings: crate::encoding::TokenEmbeddings { rows: token_embeddings } })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn inst(rel: &str) -> Instance {
        Instance {
            tokens: vec!["a".into(), "b".into(), "c".into()],
            head: Span::new(0, 0),
            tail: Span::new(1, 2),
            relation: rel.into(),
        }
    }

    fn table(ids: &[&str]) -> RelationTable {
        ids.iter()
            .map(|id| {
                (
                    id.to_string(),
                    RelationMeta {
                        id: id.to_string(),
                        name: id.to_string(),
                        description: format!("desc {id}"),
                        attribute: None,
                    },
                )
            })
            .collect()
    }

    fn corpus(n_rel: usize, per: usize) -> (Vec<Instance>, RelationTable) {
        let ids: Vec<String> = (0..n_rel).map(|k| format!("P{k}")).collect();
        let refs: Vec<&str> = ids.iter().map(String::as_str).collect();
        let instances = (0..n_rel * per).map(|i| inst(&ids[i % n_rel])).collect();
        (instances, table(&refs))
    }

    #[test]
    fn span_validation() {
        let mut i = inst("P1");
        assert!(i.validate().is_ok());
        i.head = Span::new(2, 1);
        assert!(i.validate().unwrap_err().contains("start exceeds end"));
        i.head = Span::new(0, 3);
        assert!(i.validate().unwrap_err().contains("span out of range"));
    }

    #[test]
    fn span_serializes_as_pair() {
        let s = serde_json::to_string(&Span::new(2, 4)).unwrap();
        assert_eq!(s, "[2,4]");
    }

    #[test]
    fn zero_shot_split_protocol() {
        let (instances, rels) = corpus(10, 5);
        let s = make_zero_shot_split(&instances, &rels, 3, 7).unwrap();
        assert_eq!(s.unseen_ids.len(), 3);
        assert_eq!(s.seen_ids.len(), 7);
        s.validate(&instances).unwrap();
        assert!(s.train_idx.iter().all(|&i| !s.unseen_ids.contains(&instances[i].relation)));
        assert_eq!(s.train_idx.len() + s.test_idx.len(), instances.len());
        assert_eq!(s, make_zero_shot_split(&instances, &rels, 3, 7).unwrap());
        assert!(make_zero_shot_split(&instances, &rels, 10, 7).is_err());
    }

    #[test]
    fn unknown_relation_is_an_error() {
        let (mut instances, rels) = corpus(3, 2);
        instances.push(inst("NOPE"));
        assert!(matches!(
            make_zero_shot_split(&instances, &rels, 1, 0),
            Err(Error::UnknownRelation(id)) if id == "NOPE"
        ));
    }

    #[test]
    fn fewshot_ceil_arithmetic() {
        assert_eq!(fewshot_count(0.02, 100), 2);
        assert_eq!(fewshot_count(0.02, 10), 1);
        assert_eq!(fewshot_count(0.07, 100), 7);
        assert_eq!(fewshot_count(0.5, 3), 2);
    }

    #[test]
    fn few_shot_moves_ceil_fraction() {
        let ids = ["A", "B", "C"];
        let instances: Vec<Instance> = (0..300).map(|i| inst(ids[i % 3])).collect();
        let rels = table(&ids);
        let s = make_zero_shot_split(&instances, &rels, 1, 3).unwrap();
        assert_eq!(s.test_idx.len(), 100);
        let f = make_few_shot_split(&s, &instances, 0.02, 11).unwrap();
        assert_eq!(f.test_idx.len(), 98);
        assert_eq!(f.train_idx.len(), s.train_idx.len() + 2);
        assert_eq!(f.unseen_ids, s.unseen_ids);
        assert_eq!(f.train_classes(&instances).len(), 3);
        assert!(make_few_shot_split(&s, &instances, 0.0, 1).is_err());
        assert!(make_few_shot_split(&s, &instances, 1.0, 1).is_err());
    }

    #[test]
    fn synthetic_counts_and_clusters() {
        let cfg = SyntheticConfig::default();
        let c = generate_synthetic(&cfg).unwrap();
        assert_eq!(c.instances.len(), 600);
        assert_eq!(c.relations.len(), 12);
        assert_eq!(c.token_embeddings.rows.len(), cfg.vocab_size);
        for a in c.relations.values().map(|r| r.attribute.as_ref().unwrap()) {
            let n: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
        assert_eq!(c, generate_synthetic(&cfg).unwrap());
    }

    #[test]
    fn synthetic_without_noise_stays_in_cluster() {
        let cfg = SyntheticConfig { noise_scale: 0.0, ..Default::default() };
        let c = generate_synthetic(&cfg).unwrap();
        let cs = cfg.cluster_size();
        for i in &c.instances {
            let k: usize = i.relation[1..].parse().unwrap();
            for t in &i.tokens {
                let id: usize = t[3..].parse().unwrap();
                assert_eq!(id / cs, k);
            }
        }
    }

    #[test]
    fn synthetic_rejects_small_vocab() {
        let cfg = SyntheticConfig { vocab_size: 23, ..Default::default() };
        assert!(generate_synthetic(&cfg).is_err());
    }

    proptest! {
        #[test]
        fn clusters_are_disjoint(seed in 0u64..1000, n in 2usize..8, extra in 0usize..10) {
            let cfg = SyntheticConfig {
                n_relations: n,
                instances_per_relation: 5,
                vocab_size: 2 * n + extra,
                seed,
                noise_scale: 0.0,
                ..Default::default()
            };
            let c = generate_synthetic(&cfg).unwrap();
            let mut owner: HashMap<&str, &str> = HashMap::new();
            for i in &c.instances {
                for p in [i.head.start, i.tail.start, i.tail.end] {
                    let prev = owner.insert(&i.tokens[p], &i.relation);
                    prop_assert!(prev.is_none() || prev == Some(i.relation.as_str()));
                }
            }
        }

        #[test]
        fn zero_shot_and_fewshot_partitions(seed in any::<u64>(), m in 1usize..6, frac in 0.01f64..0.99) {
            let (instances, rels) = corpus(6, 7);
            prop_assume!(m < 6);
            let s = make_zero_shot_split(&instances, &rels, m, seed).unwrap();
            s.validate(&instances).unwrap();
            let f = make_few_shot_split(&s, &instances, frac, seed ^ 1).unwrap();
            f.validate(&instances).unwrap();
            prop_assert_eq!(f.train_idx.len() + f.test_idx.len(), instances.len());
            let test: BTreeSet<usize> = f.test_idx.iter().copied().collect();
            let moved: Vec<usize> = f.train_idx.iter().copied().filter(|i| !s.train_idx.contains(i)).collect();
            prop_assert!(moved.iter().all(|i| !test.contains(i)));
        }
    }
}
