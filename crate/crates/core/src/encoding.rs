//! Token-level contextual states for sentences and fixed attribute vectors for
//! relation descriptions.

use std::collections::{BTreeMap, HashMap};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::dataset::{write_jsonl, Instance, RelationMeta, RelationTable, Span};
use crate::error::{io_err, Error, Result};
use crate::rng::SeededRng;
use crate::scalar::{norm, Scalar};
use crate::tensor::{add_assign, cast_vec, Matrix};

pub const CLS: usize = 0;
pub const SEP: usize = 1;
pub const UNK: usize = 2;
pub const PAD: usize = 3;
pub const RESERVED: [&str; 4] = ["[CLS]", "[SEP]", "[UNK]", "[PAD]"];

/// Bijective token ↔ index table with four reserved entries at the front.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocab {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocab {
    /// Reserved tokens followed by `tokens` in first-occurrence order.
    pub fn from_tokens<'a>(tokens: impl IntoIterator<Item = &'a str>) -> Self {
        let mut v = Vocab { tokens: Vec::new(), index: HashMap::new() };
        for t in RESERVED.into_iter().chain(tokens) {
            v.insert(t);
        }
        v
    }

    fn insert(&mut self, t: &str) {
        if !self.index.contains_key(t) {
            self.index.insert(t.to_owned(), self.tokens.len());
            self.tokens.push(t.to_owned());
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Index of `token`, or [`UNK`] when out of vocabulary.
    pub fn id(&self, token: &str) -> usize {
        self.index.get(token).copied().unwrap_or(UNK)
    }

    pub fn token(&self, id: usize) -> Option<&str> {
        self.tokens.get(id).map(String::as_str)
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

impl TryFrom<Vec<String>> for Vocab {
    type Error = String;
    fn try_from(tokens: Vec<String>) -> std::result::Result<Self, String> {
        if tokens.len() < RESERVED.len() || tokens.iter().zip(RESERVED).any(|(a, b)| a != b) {
            return Err("vocabulary must start with the reserved tokens".into());
        }
        let v = Vocab::from_tokens(tokens[RESERVED.len()..].iter().map(String::as_str));
        if v.len() != tokens.len() {
            return Err("vocabulary contains duplicate tokens".into());
        }
        Ok(v)
    }
}

impl From<Vocab> for Vec<String> {
    fn from(v: Vocab) -> Self {
        v.tokens
    }
}

pub fn build_vocab(instances: &[Instance]) -> Result<Vocab> {
    if instances.is_empty() {
        return Err(Error::Invalid("cannot build a vocabulary from zero instances".into()));
    }
    Ok(Vocab::from_tokens(instances.iter().flat_map(|i| i.tokens.iter().map(String::as_str))))
}

/// Per-token hidden states for one sentence, framed by CLS (row 0) and SEP
/// (last row).
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedSentence<T> {
    pub hidden: Matrix<T>,
    /// 1 on head-entity rows, 2 on tail-entity rows, 0 elsewhere. Where the
    /// spans overlap the tail marker wins.
    pub marker: Vec<u8>,
    /// Vocabulary ids of the `L` tokens; empty when states were precomputed.
    pub token_ids: Vec<usize>,
}

impl<T: Scalar> EncodedSentence<T> {
    pub fn token_len(&self) -> usize {
        self.hidden.rows() - 2
    }

    pub fn cls(&self) -> &[T] {
        self.hidden.row(0)
    }

    /// Hidden row of token position `t` (0-based, before the CLS offset).
    pub fn token_row(&self, t: usize) -> &[T] {
        self.hidden.row(t + 1)
    }
}

fn entity_marker(len: usize, head: Span, tail: Span) -> Vec<u8> {
    let mut marker = vec![0u8; len + 2];
    for (span, c) in [(head, 1u8), (tail, 2u8)] {
        for t in span.start..=span.end {
            marker[t + 1] = c;
        }
    }
    marker
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mixing<T> {
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
}

/// Toy contextual encoder: embedding lookup, optionally followed by one shared
/// `tanh(W x + b)` layer applied to every position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EncoderParams<T> {
    pub embedding: Matrix<T>,
    pub mixing: Option<Mixing<T>>,
}

impl<T: Scalar> EncoderParams<T> {
    pub fn init(vocab_len: usize, hidden: usize, mixing: bool, rng: &mut SeededRng) -> Self {
        let embedding = Matrix::uniform_fan_in(vocab_len, hidden, rng.inner());
        let mixing = mixing.then(|| Mixing {
            weight: Matrix::uniform_fan_in(hidden, hidden, rng.inner()),
            bias: vec![T::zero(); hidden],
        });
        EncoderParams { embedding, mixing }
    }

    pub fn zeros_like(&self) -> Self {
        let (r, c) = self.embedding.shape();
        EncoderParams {
            embedding: Matrix::zeros(r, c),
            mixing: self.mixing.as_ref().map(|_| Mixing {
                weight: Matrix::zeros(c, c),
                bias: vec![T::zero(); c],
            }),
        }
    }

    pub fn cast<U: Scalar>(&self) -> EncoderParams<U> {
        EncoderParams {
            embedding: self.embedding.cast(),
            mixing: self.mixing.as_ref().map(|m| Mixing { weight: m.weight.cast(), bias: cast_vec(&m.bias) }),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.embedding.cols()
    }

    /// Overwrites the rows of tokens present in `table`; returns how many matched.
    pub fn load_pretrained(&mut self, vocab: &Vocab, table: &TokenEmbeddings) -> Result<usize> {
        let h = self.hidden_size();
        let mut hits = 0;
        for (token, row) in &table.rows {
            if row.len() != h {
                return Err(Error::Shape(format!(
                    "embedding for {token:?} has width {}, encoder hidden size is {h}",
                    row.len()
                )));
            }
            let id = vocab.id(token);
            if id == UNK && token != RESERVED[UNK] {
                continue;
            }
            for (dst, &src) in self.embedding.row_mut(id).iter_mut().zip(row) {
                *dst = T::lit(src);
            }
            hits += 1;
        }
        Ok(hits)
    }

    fn mix(&self, x: &[T]) -> Result<Vec<T>> {
        match &self.mixing {
            None => Ok(x.to_vec()),
            Some(m) => Ok(m.weight.affine(x, &m.bias)?.into_iter().map(|v| v.tanh()).collect()),
        }
    }

    pub fn tensors(&self) -> Vec<(&'static str, &[T])> {
        let mut out = vec![("embedding", self.embedding.as_slice())];
        if let Some(m) = &self.mixing {
            out.push(("mix_w", m.weight.as_slice()));
            out.push(("mix_b", m.bias.as_slice()));
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [T])> {
        let mut out = vec![("embedding", self.embedding.as_mut_slice())];
        if let Some(m) = &mut self.mixing {
            out.push(("mix_w", m.weight.as_mut_slice()));
            out.push(("mix_b", m.bias.as_mut_slice()));
        }
        out
    }
}

/// Runs the toy encoder over one instance. Out-of-vocabulary tokens share the
/// UNK row. Row 0 holds the mean of the token rows.
pub fn encode_tokens<T: Scalar>(
    instance: &Instance,
    vocab: &Vocab,
    params: &EncoderParams<T>,
) -> Result<EncodedSentence<T>> {
    if params.embedding.rows() != vocab.len() {
        return Err(Error::Shape(format!(
            "embedding table has {} rows, vocabulary has {} tokens",
            params.embedding.rows(),
            vocab.len()
        )));
    }
    let len = instance.tokens.len();
    let h = params.hidden_size();
    let token_ids: Vec<usize> = instance.tokens.iter().map(|t| vocab.id(t)).collect();
    let mut hidden = Matrix::zeros(len + 2, h);
    let mut mean = vec![T::zero(); h];
    for (t, &id) in token_ids.iter().enumerate() {
        let row = params.mix(params.embedding.row(id))?;
        add_assign(&mut mean, &row);
        hidden.row_mut(t + 1).copy_from_slice(&row);
    }
    let inv = T::one() / T::lit(len as f64);
    hidden.row_mut(0).iter_mut().zip(&mean).for_each(|(d, &m)| *d = m * inv);
    let sep = params.mix(params.embedding.row(SEP))?;
    hidden.row_mut(len + 1).copy_from_slice(&sep);
    Ok(EncodedSentence { hidden, marker: entity_marker(len, instance.head, instance.tail), token_ids })
}

/// Accumulates encoder gradients given `d_hidden`, the loss gradient with
/// respect to `encoded.hidden`.
pub fn backward_tokens<T: Scalar>(
    encoded: &EncodedSentence<T>,
    d_hidden: &Matrix<T>,
    params: &EncoderParams<T>,
    grads: &mut EncoderParams<T>,
) {
    let len = encoded.token_ids.len();
    let inv = T::one() / T::lit(len as f64);
    // CLS is the mean of token rows; the SEP row feeds nothing downstream.
    let d_cls = d_hidden.row(0);
    for (t, &id) in encoded.token_ids.iter().enumerate() {
        let mut d_row: Vec<T> = d_hidden.row(t + 1).iter().zip(d_cls).map(|(&d, &c)| d + c * inv).collect();
        if let (Some(m), Some(gm)) = (&params.mixing, &mut grads.mixing) {
            let out = encoded.hidden.row(t + 1);
            for (d, &o) in d_row.iter_mut().zip(out) {
                *d = *d * (T::one() - o * o);
            }
            gm.weight.add_outer(&d_row, params.embedding.row(id));
            add_assign(&mut gm.bias, &d_row);
            d_row = m.weight.matvec_t(&d_row);
        }
        add_assign(grads.embedding.row_mut(id), &d_row);
    }
}

/// Token → vector table standing in for a pretrained token encoder.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TokenEmbeddings {
    pub rows: Vec<(String, Vec<f64>)>,
}

#[derive(Serialize, Deserialize)]
struct TokenEmbeddingRecord {
    token: String,
    vector: Vec<f64>,
}

impl TokenEmbeddings {
    pub fn width(&self) -> Option<usize> {
        self.rows.first().map(|(_, v)| v.len())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let f = File::open(path).map_err(io_err(path))?;
        let mut rows = Vec::new();
        for (i, line) in BufReader::new(f).lines().enumerate() {
            let line = line.map_err(io_err(path))?;
            if line.trim().is_empty() {
                continue;
            }
            let rec: TokenEmbeddingRecord = serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: e.to_string(),
            })?;
            rows.push((rec.token, rec.vector));
        }
        Ok(TokenEmbeddings { rows })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        write_jsonl(
            path.as_ref(),
            self.rows.iter().map(|(t, v)| TokenEmbeddingRecord { token: t.clone(), vector: v.clone() }),
        )
    }
}

/// How relation descriptions become attribute vectors.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DescriptionMode {
    /// Vector produced offline by an external sentence encoder.
    Precomputed,
    /// Unit vector drawn from a seeded hash of the description text.
    Hashed,
    /// The attribute stored with the relation, for synthetic corpora.
    Identity,
}

impl std::str::FromStr for DescriptionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "precomputed" => Ok(Self::Precomputed),
            "hashed" => Ok(Self::Hashed),
            "identity" => Ok(Self::Identity),
            _ => Err(Error::Config(format!("unknown description mode {s:?}"))),
        }
    }
}

/// Frozen description encoder. Never receives gradients.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescriptionEncoder {
    pub mode: DescriptionMode,
    pub d_attr: usize,
    pub seed: u64,
}

impl DescriptionEncoder {
    pub fn encode<T: Scalar>(&self, rel: &RelationMeta) -> Result<Vec<T>> {
        encode_description(rel, self.mode, self.d_attr, self.seed)
    }

    /// Attribute rows for `ids`, in order.
    pub fn encode_ids<T: Scalar>(&self, relations: &RelationTable, ids: &[String]) -> Result<Vec<Vec<T>>> {
        ids.iter()
            .map(|id| {
                let rel = relations.get(id).ok_or_else(|| Error::UnknownRelation(id.clone()))?;
                self.encode(rel)
            })
            .collect()
    }
}

pub fn encode_description<T: Scalar>(
    rel: &RelationMeta,
    mode: DescriptionMode,
    d_attr: usize,
    seed: u64,
) -> Result<Vec<T>> {
    let stored = || {
        let a = rel.attribute.as_ref().ok_or_else(|| Error::InvalidRelation {
            id: rel.id.clone(),
            msg: format!("{mode:?} description mode needs a stored attribute vector"),
        })?;
        if a.len() != d_attr {
            return Err(Error::InvalidRelation {
                id: rel.id.clone(),
                msg: format!("attribute length {} != d_attr {d_attr}", a.len()),
            });
        }
        Ok(a.iter().map(|&x| T::lit(x)).collect())
    };
    match mode {
        DescriptionMode::Precomputed | DescriptionMode::Identity => stored(),
        DescriptionMode::Hashed => {
            let mut hasher = Sha256::new();
            hasher.update(seed.to_le_bytes());
            hasher.update(rel.description.as_bytes());
            let mut rng = SeededRng::from_bytes(hasher.finalize().into());
            let v: Vec<f64> = (0..d_attr).map(|_| rng.normal()).collect();
            let n = norm(&v);
            Ok(v.into_iter().map(|x| T::lit(x / n)).collect())
        }
    }
}

/// Hidden states computed outside this crate, keyed by instance index.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HiddenStates {
    pub width: usize,
    pub states: BTreeMap<usize, Matrix<f64>>,
}

const HIDDEN_MAGIC: &[u8; 4] = b"ZSHS";
const HIDDEN_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct HiddenRecord {
    index: usize,
    hidden: Vec<Vec<f64>>,
}

impl HiddenStates {
    pub fn insert(&mut self, index: usize, hidden: Matrix<f64>) -> Result<()> {
        if self.states.is_empty() && self.width == 0 {
            self.width = hidden.cols();
        }
        if hidden.cols() != self.width {
            return Err(Error::Shape(format!(
                "hidden state {index} has width {}, expected {}",
                hidden.cols(),
                self.width
            )));
        }
        self.states.insert(index, hidden);
        Ok(())
    }

    /// Builds the sentence for instance `index` from its stored states.
    pub fn encode<T: Scalar>(&self, index: usize, instance: &Instance) -> Result<EncodedSentence<T>> {
        let m = self
            .states
            .get(&index)
            .ok_or_else(|| Error::Invalid(format!("no precomputed hidden state for instance {index}")))?;
        let len = instance.tokens.len();
        if m.rows() != len + 2 {
            return Err(Error::Shape(format!(
                "instance {index}: hidden state has {} rows, expected {} (tokens + CLS + SEP)",
                m.rows(),
                len + 2
            )));
        }
        let data = m.as_slice().iter().map(|&x| T::lit(x)).collect();
        Ok(EncodedSentence {
            hidden: Matrix::from_vec(m.rows(), m.cols(), data)?,
            marker: entity_marker(len, instance.head, instance.tail),
            token_ids: Vec::new(),
        })
    }

    /// Reads either layout, detected by the leading magic bytes.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut bytes = Vec::new();
        File::open(path).and_then(|mut f| f.read_to_end(&mut bytes)).map_err(io_err(path))?;
        if bytes.starts_with(HIDDEN_MAGIC) {
            Self::from_binary(&bytes)
        } else {
            Self::from_jsonl(path, &bytes)
        }
    }

    fn from_jsonl(path: &Path, bytes: &[u8]) -> Result<Self> {
        let mut out = HiddenStates::default();
        for (i, line) in bytes.split(|&b| b == b'\n').enumerate() {
            if line.iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            let parse = |msg: String| Error::Parse { path: path.to_path_buf(), line: i + 1, msg };
            let rec: HiddenRecord = serde_json::from_slice(line).map_err(|e| parse(e.to_string()))?;
            let m = Matrix::from_rows(&rec.hidden).map_err(|e| parse(e.to_string()))?;
            out.insert(rec.index, m)?;
        }
        Ok(out)
    }

    fn from_binary(bytes: &[u8]) -> Result<Self> {
        let mut cur = bytes;
        let corrupt = || Error::Invalid("truncated hidden-state file".into());
        let mut take = |n: usize| -> Result<&[u8]> {
            if cur.len() < n {
                return Err(corrupt());
            }
            let (head, rest) = cur.split_at(n);
            cur = rest;
            Ok(head)
        };
        take(4)?;
        let version = u32::from_le_bytes(take(4)?.try_into().unwrap());
        if version != HIDDEN_VERSION {
            return Err(Error::Invalid(format!("unsupported hidden-state version {version}")));
        }
        let width = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
        let count = u64::from_le_bytes(take(8)?.try_into().unwrap());
        let mut out = HiddenStates { width, states: BTreeMap::new() };
        for _ in 0..count {
            let index = u64::from_le_bytes(take(8)?.try_into().unwrap()) as usize;
            let rows = u32::from_le_bytes(take(4)?.try_into().unwrap()) as usize;
            let raw = take(rows * width * 8)?;
            let data = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
            out.insert(index, Matrix::from_vec(rows, width, data)?)?;
        }
        Ok(out)
    }

    /// Binary layout, all integers and floats little-endian:
    /// `"ZSHS" | u32 version=1 | u32 width | u64 count`, then per record
    /// `u64 index | u32 rows | rows*width f64`.
    pub fn save_binary(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
        let mut buf = Vec::new();
        buf.extend_from_slice(HIDDEN_MAGIC);
        buf.extend_from_slice(&HIDDEN_VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.width as u32).to_le_bytes());
        buf.extend_from_slice(&(self.states.len() as u64).to_le_bytes());
        for (&index, m) in &self.states {
            buf.extend_from_slice(&(index as u64).to_le_bytes());
            buf.extend_from_slice(&(m.rows() as u32).to_le_bytes());
            for x in m.as_slice() {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
        w.write_all(&buf).and_then(|_| w.flush()).map_err(io_err(path))
    }

    pub fn save_jsonl(&self, path: impl AsRef<Path>) -> Result<()> {
        write_jsonl(
            path.as_ref(),
            self.states.iter().map(|(&index, m)| HiddenRecord { index, hidden: m.to_rows() }),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::Span;

    fn inst(tokens: &[&str], head: (usize, usize), tail: (usize, usize)) -> Instance {
        Instance {
            tokens: tokens.iter().map(|s| s.to_string()).collect(),
            head: Span::new(head.0, head.1),
            tail: Span::new(tail.0, tail.1),
            relation: "P1".into(),
        }
    }

    #[test]
    fn vocab_first_occurrence() {
        let v = build_vocab(&[inst(&["a", "b", "a"], (0, 0), (1, 1))]).unwrap();
        assert_eq!(v.tokens(), &["[CLS]", "[SEP]", "[UNK]", "[PAD]", "a", "b"]);
        assert_eq!(v.id("zzz"), UNK);
        assert!(build_vocab(&[]).is_err());
        let round: Vocab = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        assert_eq!(round, v);
        assert!(serde_json::from_str::<Vocab>(r#"["a","b"]"#).is_err());
    }

    #[test]
    fn zero_embedding_gives_zero_row() {
        let i = inst(&["a"], (0, 0), (0, 0));
        let v = build_vocab(std::slice::from_ref(&i)).unwrap();
        let mut p = EncoderParams::<f64>::init(v.len(), 3, false, &mut SeededRng::new(0));
        p.embedding.row_mut(v.id("a")).fill(0.0);
        let e = encode_tokens(&i, &v, &p).unwrap();
        assert_eq!(e.hidden.rows(), 3);
        assert_eq!(e.token_row(0), &[0.0, 0.0, 0.0]);
        assert!(e.hidden.is_finite());
        assert_eq!(e.marker, vec![0, 2, 0]);
    }

    #[test]
    fn cls_row_is_token_mean() {
        let i = inst(&["a", "b", "c", "a"], (0, 1), (3, 3));
        let v = build_vocab(std::slice::from_ref(&i)).unwrap();
        let p = EncoderParams::<f64>::init(v.len(), 5, false, &mut SeededRng::new(4));
        let e = encode_tokens(&i, &v, &p).unwrap();
        for c in 0..5 {
            let mut s = 0.0;
            for t in ["a", "b", "c", "a"] {
                s += p.embedding[(v.id(t), c)];
            }
            assert!((e.cls()[c] - s / 4.0).abs() < 1e-15);
        }
        assert_eq!(e.marker, vec![0, 1, 1, 0, 2, 0]);
        assert_eq!(e, encode_tokens(&i, &v, &p).unwrap());
    }

    #[test]
    fn permuting_tokens_permutes_rows() {
        let a = inst(&["x", "y", "z"], (0, 0), (2, 2));
        let b = inst(&["z", "x", "y"], (0, 0), (2, 2));
        let v = build_vocab(std::slice::from_ref(&a)).unwrap();
        let p = EncoderParams::<f64>::init(v.len(), 4, false, &mut SeededRng::new(2));
        let (ea, eb) = (encode_tokens(&a, &v, &p).unwrap(), encode_tokens(&b, &v, &p).unwrap());
        assert_eq!(ea.token_row(0), eb.token_row(1));
        assert_eq!(ea.token_row(1), eb.token_row(2));
        assert_eq!(ea.token_row(2), eb.token_row(0));
    }

    #[test]
    fn embedding_table_must_match_vocab() {
        let i = inst(&["a"], (0, 0), (0, 0));
        let v = build_vocab(std::slice::from_ref(&i)).unwrap();
        let p = EncoderParams::<f64>::init(v.len() + 1, 3, false, &mut SeededRng::new(0));
        assert!(matches!(encode_tokens(&i, &v, &p), Err(Error::Shape(_))));
    }

    fn rel(desc: &str, attr: Option<Vec<f64>>) -> RelationMeta {
        RelationMeta { id: "P1".into(), name: "n".into(), description: desc.into(), attribute: attr }
    }

    #[test]
    fn description_modes() {
        let r = rel("publisher of books", Some(vec![0.1, 0.2, 0.3]));
        let pre: Vec<f64> = encode_description(&r, DescriptionMode::Precomputed, 3, 0).unwrap();
        assert_eq!(pre, vec![0.1, 0.2, 0.3]);
        let h1: Vec<f64> = encode_description(&r, DescriptionMode::Hashed, 64, 9).unwrap();
        let h2: Vec<f64> = encode_description(&r, DescriptionMode::Hashed, 64, 9).unwrap();
        assert_eq!(h1, h2);
        assert!((norm(&h1) - 1.0).abs() < 1e-12);
        let missing = rel("x", None);
        assert!(encode_description::<f64>(&missing, DescriptionMode::Precomputed, 3, 0).is_err());
    }

    #[test]
    fn hashed_descriptions_do_not_collide() {
        let vecs: Vec<Vec<f64>> = (0..10_000)
            .map(|i| encode_description(&rel(&format!("description {i}"), None), DescriptionMode::Hashed, 64, 0).unwrap())
            .collect();
        let mut keys: Vec<Vec<u64>> = vecs.iter().map(|v| v.iter().map(|x| x.to_bits()).collect()).collect();
        keys.sort();
        keys.dedup();
        assert_eq!(keys.len(), vecs.len());
    }

    #[test]
    fn hidden_state_files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut hs = HiddenStates::default();
        hs.insert(0, Matrix::from_rows(&[vec![0.1, 0.2], vec![1.0, -1.0], vec![0.5, 0.25]]).unwrap()).unwrap();
        hs.insert(3, Matrix::from_rows(&vec![vec![f64::MIN_POSITIVE, 2.0]; 4]).unwrap()).unwrap();
        let bin = dir.path().join("h.bin");
        let jsonl = dir.path().join("h.jsonl");
        hs.save_binary(&bin).unwrap();
        hs.save_jsonl(&jsonl).unwrap();
        assert_eq!(HiddenStates::load(&bin).unwrap(), hs);
        assert_eq!(HiddenStates::load(&jsonl).unwrap(), hs);

        let i = inst(&["a"], (0, 0), (0, 0));
        let e: EncodedSentence<f64> = hs.encode(0, &i).unwrap();
        assert_eq!(e.token_row(0), &[1.0, -1.0]);
        assert!(hs.encode::<f64>(3, &i).is_err());
        assert!(hs.encode::<f64>(7, &i).is_err());
    }
}
