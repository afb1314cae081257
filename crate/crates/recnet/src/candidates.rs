//! The online path: build a user representation from edited articles and
//! retrieve candidate articles from the ANN index, excluding the user's
//! own history.

use std::collections::{BTreeSet, HashMap};

use crate::annindex::AnnIndex;
use crate::corpus::ArticleId;
use crate::error::{Error, Result};
use crate::store::EmbeddingStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AggregationMode {
    Mean,
    Max,
    Merge,
}

impl AggregationMode {
    pub fn name(&self) -> &'static str {
        match self {
            AggregationMode::Mean => "mean",
            AggregationMode::Max => "max",
            AggregationMode::Merge => "merge",
        }
    }
}

impl std::str::FromStr for AggregationMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mean" => Ok(AggregationMode::Mean),
            "max" => Ok(AggregationMode::Max),
            "merge" => Ok(AggregationMode::Merge),
            other => Err(Error::InvalidArgument(format!(
                "unknown aggregation mode {other:?}; expected mean, max, or merge"
            ))),
        }
    }
}

/// A user modeled from edited articles: one pooled vector for mean/max, or
/// the per-article vectors for merge.
#[derive(Debug, Clone)]
pub enum UserRepresentation {
    Pooled(Vec<f32>),
    Merge(Vec<Vec<f32>>),
}

/// Element-wise mean or max of the article vectors, re-normalized to unit
/// L2 norm.
pub fn user_vector(article_vectors: &[&[f32]], mode: AggregationMode) -> Result<Vec<f32>> {
    if article_vectors.is_empty() {
        return Err(Error::EmptyInput("user has no edited articles to aggregate".into()));
    }
    let dim = article_vectors[0].len();
    for v in article_vectors {
        if v.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: v.len(),
            });
        }
    }
    let mut out = vec![0.0f32; dim];
    match mode {
        AggregationMode::Mean => {
            for v in article_vectors {
                for (o, &x) in out.iter_mut().zip(*v) {
                    *o += x;
                }
            }
            let scale = 1.0 / article_vectors.len() as f32;
            for o in &mut out {
                *o *= scale;
            }
        }
        AggregationMode::Max => {
            out.copy_from_slice(article_vectors[0]);
            for v in &article_vectors[1..] {
                for (o, &x) in out.iter_mut().zip(*v) {
                    *o = o.max(x);
                }
            }
        }
        AggregationMode::Merge => {
            return Err(Error::InvalidArgument(
                "merge mode keeps per-article vectors; use build_user_representation".into(),
            ))
        }
    }
    let norm_sq: f32 = out.iter().map(|v| v * v).sum();
    if norm_sq > 0.0 && (norm_sq - 1.0).abs() >= 1e-6 {
        let inv = 1.0 / norm_sq.sqrt();
        for o in &mut out {
            *o *= inv;
        }
    }
    Ok(out)
}

/// Looks up the history articles in the store and aggregates them
/// according to the mode.
pub fn build_user_representation(
    history: &[ArticleId],
    embeddings: &EmbeddingStore,
    mode: AggregationMode,
) -> Result<UserRepresentation> {
    if history.is_empty() {
        return Err(Error::EmptyInput("user has no edited articles to aggregate".into()));
    }
    let vectors: Vec<&[f32]> = history
        .iter()
        .map(|&id| embeddings.get(id).ok_or(Error::MissingEmbedding(id)))
        .collect::<Result<_>>()?;
    Ok(match mode {
        AggregationMode::Mean | AggregationMode::Max => {
            UserRepresentation::Pooled(user_vector(&vectors, mode)?)
        }
        AggregationMode::Merge => {
            UserRepresentation::Merge(vectors.into_iter().map(<[f32]>::to_vec).collect())
        }
    })
}

/// Ranked candidates with the user's own articles excluded.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    /// (article, similarity), descending, ascending-id tie-break.
    pub items: Vec<(ArticleId, f32)>,
    pub excluded: BTreeSet<ArticleId>,
}

impl CandidateSet {
    pub fn ids(&self) -> Vec<ArticleId> {
        self.items.iter().map(|&(id, _)| id).collect()
    }
}

/// Retrieves up to `n` candidates. Pooled modes run one index query
/// over-fetched by the exclusion count; merge mode queries once per
/// history article and fuses by maximum similarity.
pub fn generate_candidates(
    user: &UserRepresentation,
    index: &AnnIndex,
    n: usize,
    exclude: &BTreeSet<ArticleId>,
) -> Result<CandidateSet> {
    if n == 0 {
        return Err(Error::InvalidArgument("candidate count must be >= 1".into()));
    }
    let items = match user {
        UserRepresentation::Pooled(query) => {
            let results = index.search(query, n + exclude.len())?;
            let mut items: Vec<(ArticleId, f32)> = results
                .into_iter()
                .filter(|(id, _)| !exclude.contains(id))
                .collect();
            items.truncate(n);
            items
        }
        UserRepresentation::Merge(queries) => {
            let mut best: HashMap<ArticleId, f32> = HashMap::new();
            for query in queries {
                for (id, sim) in index.search(query, n)? {
                    if exclude.contains(&id) {
                        continue;
                    }
                    let entry = best.entry(id).or_insert(f32::NEG_INFINITY);
                    if sim > *entry {
                        *entry = sim;
                    }
                }
            }
            let mut items: Vec<(ArticleId, f32)> = best.into_iter().collect();
            items.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
            items.truncate(n);
            items
        }
    };
    Ok(CandidateSet {
        items,
        excluded: exclude.clone(),
    })
}
