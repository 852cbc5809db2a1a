//! Nearest-relation prediction over unseen relation attributes.

use serde::{Deserialize, Serialize};

use crate::dataset::{Instance, RelationTable};
use crate::encoding::{DescriptionEncoder, HiddenStates};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::scalar::{dot, norm, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DistKind {
    /// `−⟨u, v⟩`
    #[serde(rename = "nip", alias = "neg_inner_product")]
    NegInnerProduct,
    /// `‖u − v‖₂`
    #[serde(rename = "euclid", alias = "euclidean")]
    Euclidean,
    /// `1 − cos(u, v)`
    #[serde(rename = "cosine")]
    Cosine,
}

impl DistKind {
    pub const ALL: [DistKind; 3] = [DistKind::NegInnerProduct, DistKind::Euclidean, DistKind::Cosine];

    pub fn name(self) -> &'static str {
        match self {
            DistKind::NegInnerProduct => "nip",
            DistKind::Euclidean => "euclid",
            DistKind::Cosine => "cosine",
        }
    }
}

impl std::fmt::Display for DistKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for DistKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "nip" | "neg_inner_product" => Ok(DistKind::NegInnerProduct),
            "euclid" | "euclidean" => Ok(DistKind::Euclidean),
            "cosine" => Ok(DistKind::Cosine),
            _ => Err(Error::Config(format!("unknown distance {s:?} (expected nip, euclid or cosine)"))),
        }
    }
}

/// Distance between two equal-length vectors. Cosine distance against a zero
/// vector is 1.
pub fn distance<T: Scalar>(u: &[T], v: &[T], kind: DistKind) -> Result<T> {
    if u.len() != v.len() {
        return Err(Error::Shape(format!("distance between lengths {} and {}", u.len(), v.len())));
    }
    Ok(match kind {
        DistKind::NegInnerProduct => -dot(u, v),
        DistKind::Euclidean => u.iter().zip(v).map(|(&a, &b)| (a - b) * (a - b)).sum::<T>().sqrt(),
        DistKind::Cosine => {
            let (nu, nv) = (norm(u), norm(v));
            if nu == T::zero() || nv == T::zero() {
                T::one()
            } else {
                T::one() - dot(u, v) / (nu * nv)
            }
        }
    })
}

/// Candidate relations for nearest-neighbour search.
#[derive(Clone, Debug, PartialEq)]
pub struct RelationIndex<T> {
    entries: Vec<(String, Vec<T>)>,
    pub dist_kind: DistKind,
}

impl<T: Scalar> RelationIndex<T> {
    pub fn new(entries: Vec<(String, Vec<T>)>, dist_kind: DistKind) -> Result<Self> {
        let mut idx = RelationIndex { entries: Vec::with_capacity(entries.len()), dist_kind };
        for (id, v) in entries {
            idx.push(id, v)?;
        }
        Ok(idx)
    }

    /// Encodes `ids` with the frozen description encoder.
    pub fn build(
        ids: &[String],
        relations: &RelationTable,
        encoder: &DescriptionEncoder,
        dist_kind: DistKind,
    ) -> Result<Self> {
        let vectors = encoder.encode_ids(relations, ids)?;
        Self::new(ids.iter().cloned().zip(vectors).collect(), dist_kind)
    }

    pub fn push(&mut self, id: String, vector: Vec<T>) -> Result<()> {
        if self.entries.iter().any(|(e, _)| *e == id) {
            return Err(Error::DuplicateRelation(id));
        }
        if let Some((_, first)) = self.entries.first() {
            if first.len() != vector.len() {
                return Err(Error::Shape(format!("relation {id}: length {} != {}", vector.len(), first.len())));
            }
        }
        self.entries.push((id, vector));
        Ok(())
    }

    pub fn entries(&self) -> &[(String, Vec<T>)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn with_dist(&self, dist_kind: DistKind) -> Self {
        RelationIndex { entries: self.entries.clone(), dist_kind }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prediction<T> {
    pub relation_id: String,
    pub score: T,
    /// Every candidate, ascending by distance; equal distances keep index order.
    pub ranking: Vec<(String, T)>,
}

/// Exhaustive scan returning the relation at minimum distance.
pub fn predict<T: Scalar>(a_hat: &[T], index: &RelationIndex<T>) -> Result<Prediction<T>> {
    if index.is_empty() {
        return Err(Error::Invalid("relation index is empty".into()));
    }
    let mut ranking = index
        .entries
        .iter()
        .map(|(id, v)| Ok((id.clone(), distance(a_hat, v, index.dist_kind)?)))
        .collect::<Result<Vec<_>>>()?;
    // stable sort keeps index order among ties
    ranking.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal));
    let (relation_id, score) = ranking[0].clone();
    Ok(Prediction { relation_id, score, ranking })
}

/// Sentence embedding of a new instance through the trained model.
pub fn embed_new_sentence<T: Scalar>(
    model: &Model<T>,
    index: usize,
    instance: &Instance,
    states: Option<&HiddenStates>,
) -> Result<Vec<T>> {
    model.embed(index, instance, states)
}
