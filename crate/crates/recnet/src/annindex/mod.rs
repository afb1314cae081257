//! Exact and approximate k-nearest-neighbor indexes over an embedding
//! store, with a benchmark harness that measures setup time, per-query
//! latency, and recall/MRR against the exact index.
//!
//! Similarity is cosine via inner product: vectors are unit-normalized on
//! ingest (rows already within 1e-6 of unit norm are left untouched).
//! Results are sorted by descending similarity with ties broken by
//! ascending article id.

mod exact;
mod hnsw;
mod ivf;
mod lsh;

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;
use std::time::Instant;

pub use exact::ExactIndex;
pub use hnsw::{HnswIndex, HnswParams};
pub use ivf::{IvfIndex, IvfParams};
pub use lsh::{LshIndex, LshParams};

use crate::binio;
use crate::corpus::ArticleId;
use crate::error::{Error, Result};
use crate::store::EmbeddingStore;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum IndexKind {
    Exact,
    Hnsw,
    Ivf,
    Lsh,
}

impl IndexKind {
    pub fn name(&self) -> &'static str {
        match self {
            IndexKind::Exact => "exact",
            IndexKind::Hnsw => "hnsw",
            IndexKind::Ivf => "ivf",
            IndexKind::Lsh => "lsh",
        }
    }
}

impl std::str::FromStr for IndexKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "exact" => Ok(IndexKind::Exact),
            "hnsw" => Ok(IndexKind::Hnsw),
            "ivf" => Ok(IndexKind::Ivf),
            "lsh" => Ok(IndexKind::Lsh),
            other => Err(Error::InvalidArgument(format!(
                "unknown index kind {other:?}; expected exact, hnsw, ivf, or lsh"
            ))),
        }
    }
}

/// Unit-normalized vectors in ascending-id row order; shared by every
/// index kind.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorSet {
    dim: usize,
    ids: Vec<ArticleId>,
    data: Vec<f32>,
}

impl VectorSet {
    pub fn from_store(store: &EmbeddingStore) -> Result<Self> {
        if store.is_empty() {
            return Err(Error::EmptyInput("cannot index an empty embedding store".into()));
        }
        let mut normalized = store.clone();
        normalized.normalize();
        let dim = normalized.dim();
        let mut ids = Vec::with_capacity(normalized.len());
        let mut data = Vec::with_capacity(normalized.len() * dim);
        for (id, row) in normalized.iter() {
            ids.push(id);
            data.extend_from_slice(row);
        }
        Ok(VectorSet { dim, ids, data })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn row(&self, idx: usize) -> &[f32] {
        &self.data[idx * self.dim..(idx + 1) * self.dim]
    }

    pub fn id(&self, idx: usize) -> ArticleId {
        self.ids[idx]
    }

    pub fn dot(&self, query: &[f32], idx: usize) -> f32 {
        dot(query, self.row(idx))
    }

    fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        binio::write_u32(w, self.dim as u32)?;
        binio::write_u64(w, self.ids.len() as u64)?;
        for id in &self.ids {
            binio::write_u64(w, id.0)?;
        }
        binio::write_f32_slice(w, &self.data)?;
        Ok(())
    }

    fn read<R: Read>(r: &mut R) -> Result<Self> {
        let dim = binio::read_u32(r, "dimension")? as usize;
        let count = binio::read_u64(r, "count")? as usize;
        let mut ids = Vec::with_capacity(count);
        for _ in 0..count {
            ids.push(ArticleId(binio::read_u64(r, "vector id")?));
        }
        let data = binio::read_f32_vec(r, count * dim, "vector data")?;
        Ok(VectorSet { dim, ids, data })
    }
}

pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = 0.0f32;
    for i in 0..a.len() {
        acc += a[i] * b[i];
    }
    acc
}

/// Candidate ordering used everywhere: higher similarity is better, ties
/// prefer the lower row index (rows are in ascending-id order).
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Scored {
    pub sim: f32,
    pub idx: u32,
}

impl Eq for Scored {}

impl Ord for Scored {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.sim
            .total_cmp(&other.sim)
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

impl PartialOrd for Scored {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// Turns scored row indexes into the public result shape: descending
/// similarity, ascending id on ties, truncated to k.
pub(crate) fn finish_results(
    set: &VectorSet,
    mut scored: Vec<Scored>,
    k: usize,
) -> Vec<(ArticleId, f32)> {
    scored.sort_by(|a, b| b.cmp(a));
    scored.truncate(k);
    scored
        .into_iter()
        .map(|s| (set.id(s.idx as usize), s.sim))
        .collect()
}

/// A searchable nearest-neighbor structure of one of the four kinds.
#[derive(Debug, Clone, PartialEq)]
pub enum AnnIndex {
    Exact(ExactIndex),
    Hnsw(HnswIndex),
    Ivf(IvfIndex),
    Lsh(LshIndex),
}

/// Per-kind construction parameters with the pipeline defaults.
#[derive(Debug, Clone, Default)]
pub struct IndexParams {
    pub hnsw: HnswParams,
    pub ivf: IvfParams,
    pub lsh: LshParams,
}

pub fn build_index(store: &EmbeddingStore, kind: IndexKind, params: &IndexParams) -> Result<AnnIndex> {
    let set = VectorSet::from_store(store)?;
    Ok(match kind {
        IndexKind::Exact => AnnIndex::Exact(ExactIndex::build(set)),
        IndexKind::Hnsw => AnnIndex::Hnsw(HnswIndex::build(set, params.hnsw.clone())),
        IndexKind::Ivf => AnnIndex::Ivf(IvfIndex::build(set, params.ivf.clone())?),
        IndexKind::Lsh => AnnIndex::Lsh(LshIndex::build(set, params.lsh.clone())),
    })
}

impl AnnIndex {
    pub fn kind(&self) -> IndexKind {
        match self {
            AnnIndex::Exact(_) => IndexKind::Exact,
            AnnIndex::Hnsw(_) => IndexKind::Hnsw,
            AnnIndex::Ivf(_) => IndexKind::Ivf,
            AnnIndex::Lsh(_) => IndexKind::Lsh,
        }
    }

    pub fn dim(&self) -> usize {
        self.set().dim()
    }

    pub fn len(&self) -> usize {
        self.set().len()
    }

    pub fn is_empty(&self) -> bool {
        self.set().is_empty()
    }

    fn set(&self) -> &VectorSet {
        match self {
            AnnIndex::Exact(i) => &i.set,
            AnnIndex::Hnsw(i) => &i.set,
            AnnIndex::Ivf(i) => &i.set,
            AnnIndex::Lsh(i) => &i.set,
        }
    }

    /// Top-k by cosine similarity: descending, ties broken by ascending id,
    /// never with duplicates. The exact kind returns the true top-k;
    /// approximate kinds may return fewer or different entries.
    pub fn search(&self, query: &[f32], k: usize) -> Result<Vec<(ArticleId, f32)>> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be >= 1".into()));
        }
        if query.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: query.len(),
            });
        }
        Ok(match self {
            AnnIndex::Exact(i) => i.search(query, k),
            AnnIndex::Hnsw(i) => i.search(query, k),
            AnnIndex::Ivf(i) => i.search(query, k),
            AnnIndex::Lsh(i) => i.search(query, k),
        })
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(b"ANN1")?;
        binio::write_u8(w, 1)?; // format version
        let tag = match self {
            AnnIndex::Exact(_) => 0u8,
            AnnIndex::Hnsw(_) => 1,
            AnnIndex::Ivf(_) => 2,
            AnnIndex::Lsh(_) => 3,
        };
        binio::write_u8(w, tag)?;
        self.set().write(w)?;
        match self {
            AnnIndex::Exact(_) => {}
            AnnIndex::Hnsw(i) => i.write_payload(w)?,
            AnnIndex::Ivf(i) => i.write_payload(w)?,
            AnnIndex::Lsh(i) => i.write_payload(w)?,
        }
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read(&mut r)
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self> {
        binio::expect_magic(r, b"ANN1")?;
        let version = binio::read_u8(r, "format version")?;
        if version != 1 {
            return Err(Error::Format(format!("unsupported index version {version}")));
        }
        let tag = binio::read_u8(r, "kind tag")?;
        let set = VectorSet::read(r)?;
        let index = match tag {
            0 => AnnIndex::Exact(ExactIndex { set }),
            1 => AnnIndex::Hnsw(HnswIndex::read_payload(set, r)?),
            2 => AnnIndex::Ivf(IvfIndex::read_payload(set, r)?),
            3 => AnnIndex::Lsh(LshIndex::read_payload(set, r)?),
            other => return Err(Error::Format(format!("unknown index kind tag {other}"))),
        };
        binio::expect_eof(r)?;
        Ok(index)
    }
}

/// One row of the Table-1-style benchmark.
#[derive(Debug, Clone)]
pub struct BenchReport {
    pub kind: IndexKind,
    pub setup_seconds: f64,
    pub secs_per_request: f64,
    /// Mean fraction of the exact top-k retrieved.
    pub recall_at_k: f64,
    /// Mean reciprocal rank of the exact top-1 within each result list.
    pub mrr: f64,
}

/// Builds and times each requested kind, measuring recall@k and MRR
/// against the exact index on identical queries. Queries run on a single
/// thread so latencies are comparable.
pub fn benchmark(
    store: &EmbeddingStore,
    queries: &[Vec<f32>],
    kinds: &[IndexKind],
    params: &IndexParams,
    k: usize,
) -> Result<Vec<BenchReport>> {
    if queries.is_empty() {
        return Err(Error::EmptyInput("benchmark needs at least one query".into()));
    }
    let exact = build_index(store, IndexKind::Exact, params)?;
    let truth: Vec<Vec<(ArticleId, f32)>> = queries
        .iter()
        .map(|q| exact.search(q, k))
        .collect::<Result<_>>()?;

    let mut reports = Vec::with_capacity(kinds.len());
    for &kind in kinds {
        let start = Instant::now();
        let index = build_index(store, kind, params)?;
        let setup_seconds = start.elapsed().as_secs_f64();

        let start = Instant::now();
        let mut results = Vec::with_capacity(queries.len());
        for q in queries {
            results.push(index.search(q, k)?);
        }
        let secs_per_request = start.elapsed().as_secs_f64() / queries.len() as f64;

        let mut recall_sum = 0.0;
        let mut mrr_sum = 0.0;
        for (expected, got) in truth.iter().zip(&results) {
            if expected.is_empty() {
                continue;
            }
            let expected_ids: std::collections::HashSet<ArticleId> =
                expected.iter().map(|&(id, _)| id).collect();
            let hits = got.iter().filter(|(id, _)| expected_ids.contains(id)).count();
            recall_sum += hits as f64 / expected.len() as f64;

            let top1 = expected[0].0;
            mrr_sum += got
                .iter()
                .position(|&(id, _)| id == top1)
                .map(|rank| 1.0 / (rank + 1) as f64)
                .unwrap_or(0.0);
        }
        reports.push(BenchReport {
            kind,
            setup_seconds,
            secs_per_request,
            recall_at_k: recall_sum / queries.len() as f64,
            mrr: mrr_sum / queries.len() as f64,
        });
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::stream_rng;
    use rand::Rng;

    fn id(v: u64) -> ArticleId {
        ArticleId(v)
    }

    pub(crate) fn random_store(n: usize, dim: usize, seed: u64) -> EmbeddingStore {
        let mut rng = stream_rng(seed, &[0xA11]);
        let mut store = EmbeddingStore::from_rows(
            dim,
            (0..n).map(|i| {
                let row: Vec<f32> = (0..dim).map(|_| rng.gen_range(-1.0..1.0f32)).collect();
                (id(i as u64), row)
            }),
        )
        .unwrap();
        store.normalize();
        store
    }

    /// Independent O(N*d) scan: same f32 arithmetic, full sort, same
    /// tie-break contract.
    pub(crate) fn brute_force(
        store: &EmbeddingStore,
        query: &[f32],
        k: usize,
    ) -> Vec<(ArticleId, f32)> {
        let mut normalized = store.clone();
        normalized.normalize();
        let mut scored: Vec<(ArticleId, f32)> = normalized
            .iter()
            .map(|(id, row)| {
                let mut s = 0.0f32;
                for i in 0..row.len() {
                    s += row[i] * query[i];
                }
                (id, s)
            })
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(k);
        scored
    }

    #[test]
    fn exact_self_query_scores_one() {
        let store = random_store(100, 8, 1);
        let index = build_index(&store, IndexKind::Exact, &IndexParams::default()).unwrap();
        let query = store.get(id(17)).unwrap().to_vec();
        let results = index.search(&query, 3).unwrap();
        assert_eq!(results[0].0, id(17));
        assert!((results[0].1 - 1.0).abs() < 1e-5);
    }

    #[test]
    fn exact_matches_hand_vectors() {
        let store = EmbeddingStore::from_rows(
            2,
            vec![
                (id(1), vec![1.0, 0.0]),
                (id(2), vec![0.0, 1.0]),
                (id(3), vec![0.7071, 0.7071]),
                (id(4), vec![-1.0, 0.0]),
                (id(5), vec![0.9487, 0.3162]),
            ],
        )
        .unwrap();
        let index = build_index(&store, IndexKind::Exact, &IndexParams::default()).unwrap();
        let query = vec![1.0, 0.0];
        let got = index.search(&query, 5).unwrap();
        let expected = brute_force(&store, &query, 5);
        assert_eq!(got, expected);
        assert_eq!(got[0].0, id(1));
        assert_eq!(got[1].0, id(5));
    }

    #[test]
    fn zero_k_is_error() {
        let store = random_store(10, 4, 2);
        let index = build_index(&store, IndexKind::Exact, &IndexParams::default()).unwrap();
        assert!(index.search(&[0.0; 4], 0).is_err());
    }

    #[test]
    fn dimension_mismatch_is_error() {
        let store = random_store(10, 4, 2);
        let index = build_index(&store, IndexKind::Exact, &IndexParams::default()).unwrap();
        match index.search(&[0.0; 3], 5) {
            Err(Error::DimensionMismatch { expected, got }) => {
                assert_eq!(expected, 4);
                assert_eq!(got, 3);
            }
            other => panic!("expected dimension mismatch, got {other:?}"),
        }
    }

    #[test]
    fn empty_store_is_error() {
        let store = EmbeddingStore::from_rows(4, Vec::<(ArticleId, Vec<f32>)>::new()).unwrap();
        assert!(build_index(&store, IndexKind::Exact, &IndexParams::default()).is_err());
    }

    #[test]
    fn hnsw_indexes_every_vector() {
        let store = random_store(1000, 16, 3);
        let index = build_index(&store, IndexKind::Hnsw, &IndexParams::default()).unwrap();
        assert_eq!(index.len(), 1000);
    }

    #[test]
    fn hnsw_recall_on_moderate_set() {
        let store = random_store(2000, 16, 4);
        let index = build_index(&store, IndexKind::Hnsw, &IndexParams::default()).unwrap();
        let mut rng = stream_rng(5, &[0xBEEF]);
        let mut hits = 0usize;
        let mut total = 0usize;
        for _ in 0..50 {
            let q: Vec<f32> = (0..16).map(|_| rng.gen_range(-1.0..1.0f32)).collect();
            let expected = brute_force(&store, &q, 10);
            let got = index.search(&q, 10).unwrap();
            let expected_ids: std::collections::HashSet<ArticleId> =
                expected.iter().map(|&(i, _)| i).collect();
            hits += got.iter().filter(|(i, _)| expected_ids.contains(i)).count();
            total += expected.len();
        }
        let recall = hits as f64 / total as f64;
        assert!(recall >= 0.9, "hnsw recall too low: {recall}");
    }

    #[test]
    fn hnsw_recall_nondecreasing_in_ef_search() {
        let store = random_store(3000, 16, 6);
        let mut rng = stream_rng(7, &[0xCAFE]);
        let queries: Vec<Vec<f32>> = (0..100)
            .map(|_| (0..16).map(|_| rng.gen_range(-1.0..1.0f32)).collect())
            .collect();
        let truth: Vec<Vec<ArticleId>> = queries
            .iter()
            .map(|q| brute_force(&store, q, 10).into_iter().map(|(i, _)| i).collect())
            .collect();
        let mut recalls = Vec::new();
        for ef in [4usize, 16, 64] {
            let params = IndexParams {
                hnsw: HnswParams {
                    ef_search: ef,
                    ..Default::default()
                },
                ..Default::default()
            };
            let index = build_index(&store, IndexKind::Hnsw, &params).unwrap();
            let mut hits = 0;
            let mut total = 0;
            for (q, expected) in queries.iter().zip(&truth) {
                let got = index.search(q, 10).unwrap();
                hits += got.iter().filter(|(i, _)| expected.contains(i)).count();
                total += expected.len();
            }
            recalls.push(hits as f64 / total as f64);
        }
        assert!(
            recalls[0] <= recalls[1] + 1e-9 && recalls[1] <= recalls[2] + 1e-9,
            "recalls not monotone: {recalls:?}"
        );
    }

    #[test]
    fn ivf_nlist_larger_than_count_is_error() {
        let store = random_store(10, 4, 8);
        let params = IndexParams {
            ivf: IvfParams {
                nlist: Some(20),
                ..Default::default()
            },
            ..Default::default()
        };
        match build_index(&store, IndexKind::Ivf, &params) {
            Err(Error::InvalidArgument(msg)) => assert!(msg.contains("nlist")),
            other => panic!("expected invalid-argument error, got {other:?}"),
        }
    }

    #[test]
    fn ivf_recall_on_moderate_set() {
        let store = random_store(2000, 16, 9);
        let index = build_index(&store, IndexKind::Ivf, &IndexParams::default()).unwrap();
        let mut rng = stream_rng(10, &[0xD00D]);
        let mut hits = 0usize;
        let mut total = 0usize;
        for _ in 0..50 {
            let q: Vec<f32> = (0..16).map(|_| rng.gen_range(-1.0..1.0f32)).collect();
            let expected = brute_force(&store, &q, 10);
            let got = index.search(&q, 10).unwrap();
            let expected_ids: std::collections::HashSet<ArticleId> =
                expected.iter().map(|&(i, _)| i).collect();
            hits += got.iter().filter(|(i, _)| expected_ids.contains(i)).count();
            total += expected.len();
        }
        let recall = hits as f64 / total as f64;
        assert!(recall >= 0.7, "ivf recall too low: {recall}");
    }

    #[test]
    fn lsh_recall_on_moderate_set() {
        let store = random_store(2000, 16, 11);
        let index = build_index(&store, IndexKind::Lsh, &IndexParams::default()).unwrap();
        let mut rng = stream_rng(12, &[0xF00D]);
        let mut hits = 0usize;
        let mut total = 0usize;
        for _ in 0..50 {
            let q: Vec<f32> = (0..16).map(|_| rng.gen_range(-1.0..1.0f32)).collect();
            let expected = brute_force(&store, &q, 10);
            let got = index.search(&q, 10).unwrap();
            let expected_ids: std::collections::HashSet<ArticleId> =
                expected.iter().map(|&(i, _)| i).collect();
            hits += got.iter().filter(|(i, _)| expected_ids.contains(i)).count();
            total += expected.len();
        }
        let recall = hits as f64 / total as f64;
        assert!(recall >= 0.8, "lsh recall too low: {recall}");
    }

    #[test]
    fn benchmark_exact_against_itself_is_perfect() {
        let store = random_store(300, 8, 13);
        let mut rng = stream_rng(14, &[0xABCD]);
        let queries: Vec<Vec<f32>> = (0..20)
            .map(|_| (0..8).map(|_| rng.gen_range(-1.0..1.0f32)).collect())
            .collect();
        let reports = benchmark(
            &store,
            &queries,
            &[IndexKind::Exact],
            &IndexParams::default(),
            10,
        )
        .unwrap();
        assert_eq!(reports[0].recall_at_k, 1.0);
        assert_eq!(reports[0].mrr, 1.0);
    }

    #[test]
    fn persistence_round_trip_all_kinds() {
        let store = random_store(200, 8, 15);
        for kind in [IndexKind::Exact, IndexKind::Hnsw, IndexKind::Ivf, IndexKind::Lsh] {
            let index = build_index(&store, kind, &IndexParams::default()).unwrap();
            let mut bytes1 = Vec::new();
            index.write(&mut bytes1).unwrap();
            let loaded = AnnIndex::read(&mut std::io::Cursor::new(bytes1.clone())).unwrap();
            let mut bytes2 = Vec::new();
            loaded.write(&mut bytes2).unwrap();
            assert_eq!(bytes1, bytes2, "{kind:?} round trip not byte-identical");

            // loaded index answers identically
            let q: Vec<f32> = store.get(id(5)).unwrap().to_vec();
            assert_eq!(index.search(&q, 7).unwrap(), loaded.search(&q, 7).unwrap());
        }
    }

    #[test]
    fn persistence_rejects_bad_magic() {
        let mut r = std::io::Cursor::new(b"NOPE\x01\x00".to_vec());
        assert!(AnnIndex::read(&mut r).is_err());
    }

    #[test]
    fn search_results_sorted_and_deduplicated() {
        let store = random_store(500, 8, 16);
        let mut rng = stream_rng(17, &[0xEEE]);
        for kind in [IndexKind::Exact, IndexKind::Hnsw, IndexKind::Ivf, IndexKind::Lsh] {
            let index = build_index(&store, kind, &IndexParams::default()).unwrap();
            for _ in 0..10 {
                let q: Vec<f32> = (0..8).map(|_| rng.gen_range(-1.0..1.0f32)).collect();
                let results = index.search(&q, 20).unwrap();
                assert!(results.len() <= 20);
                for w in results.windows(2) {
                    assert!(
                        w[0].1 > w[1].1 || (w[0].1 == w[1].1 && w[0].0 < w[1].0),
                        "not sorted with id tie-break: {w:?}"
                    );
                }
                let ids: std::collections::HashSet<ArticleId> =
                    results.iter().map(|&(i, _)| i).collect();
                assert_eq!(ids.len(), results.len(), "duplicate ids in results");
            }
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(32))]
        #[test]
        fn exact_equals_brute_force(
            seed in 0u64..1000,
            n in 1usize..80,
            k in 1usize..20,
        ) {
            let store = random_store(n, 6, seed);
            let index = build_index(&store, IndexKind::Exact, &IndexParams::default()).unwrap();
            let mut rng = stream_rng(seed, &[0x51]);
            let q: Vec<f32> = (0..6).map(|_| rng.gen_range(-1.0..1.0f32)).collect();
            proptest::prop_assert_eq!(index.search(&q, k).unwrap(), brute_force(&store, &q, k));
        }
    }
}
