//! Graph-aware article representations: a two-layer inductive
//! graph-convolutional encoder with fixed-size neighbor sampling, trained
//! on link prediction with a max-margin loss.
//!
//! Each layer computes `h_v = ReLU(W . concat(h_v, mean of sampled
//! neighbor h))` over the undirected view of the link graph; final rows are
//! L2-normalized. Neighbor samples are drawn from per-node RNG streams
//! keyed by (seed, layer, node id), which makes the forward pass
//! independent of batch composition and order.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView1, Axis};
use rand::seq::SliceRandom;
use rand::Rng;

use crate::binio;
use crate::corpus::{ArticleGraph, ArticleId};
use crate::error::{Error, Result};
use crate::nn::{stream_rng, xavier_init, Adam};
use crate::store::EmbeddingStore;

const STREAM_ADJACENCY: u64 = 1;
const STREAM_LAYER1: u64 = 2;
const STREAM_LAYER2: u64 = 3;
const STREAM_INIT: u64 = 4;
const STREAM_EPOCH: u64 = 5;
const NORM_FLOOR: f64 = 1e-12;

/// Fixed-capacity neighbor lists over the undirected view of the graph.
/// Nodes above `max_neighbors` degree get a seeded uniform subsample
/// without replacement.
#[derive(Debug, Clone)]
pub struct SampledAdjacency {
    neighbors: BTreeMap<ArticleId, Vec<ArticleId>>,
    max_neighbors: usize,
    seed: u64,
}

impl SampledAdjacency {
    pub fn max_neighbors(&self) -> usize {
        self.max_neighbors
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn contains(&self, node: ArticleId) -> bool {
        self.neighbors.contains_key(&node)
    }

    pub fn stored(&self, node: ArticleId) -> &[ArticleId] {
        self.neighbors.get(&node).map(Vec::as_slice).unwrap_or(&[])
    }
}

pub fn build_sampled_adjacency(
    graph: &ArticleGraph,
    max_neighbors: usize,
    seed: u64,
) -> SampledAdjacency {
    assert!(max_neighbors >= 1, "max_neighbors must be >= 1");
    let mut neighbors = BTreeMap::new();
    for (node, list) in graph.undirected_neighbors() {
        let kept = if list.len() > max_neighbors {
            let mut rng = stream_rng(seed, &[STREAM_ADJACENCY, node.0]);
            sample_without_replacement(&list, max_neighbors, &mut rng)
        } else {
            list
        };
        neighbors.insert(node, kept);
    }
    SampledAdjacency {
        neighbors,
        max_neighbors,
        seed,
    }
}

/// Uniform sample without replacement from a node's stored list; returns
/// the whole list when it holds fewer than `k` entries.
pub fn sample_neighbors(
    adj: &SampledAdjacency,
    node: ArticleId,
    k: usize,
    rng: &mut impl Rng,
) -> Vec<ArticleId> {
    let stored = adj.stored(node);
    if stored.len() <= k {
        stored.to_vec()
    } else {
        sample_without_replacement(stored, k, rng)
    }
}

fn sample_without_replacement(
    items: &[ArticleId],
    k: usize,
    rng: &mut impl Rng,
) -> Vec<ArticleId> {
    // partial Fisher-Yates over a scratch copy
    let mut scratch: Vec<ArticleId> = items.to_vec();
    let mut out = Vec::with_capacity(k);
    for i in 0..k {
        let j = rng.gen_range(i..scratch.len());
        scratch.swap(i, j);
        out.push(scratch[i]);
    }
    out
}

fn keyed_sample(
    adj: &SampledAdjacency,
    node: ArticleId,
    k: usize,
    sample_seed: u64,
    layer: u64,
) -> Vec<ArticleId> {
    let mut rng = stream_rng(sample_seed, &[layer, node.0]);
    sample_neighbors(adj, node, k, &mut rng)
}

/// Two-layer mean-aggregator encoder weights.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphSageModel {
    /// hidden_dim x 2*in_dim
    pub w1: Array2<f64>,
    /// out_dim x 2*hidden_dim
    pub w2: Array2<f64>,
    pub in_dim: usize,
    pub hidden_dim: usize,
    pub out_dim: usize,
    /// Neighbors sampled per node per layer.
    pub k: usize,
    pub max_neighbors: usize,
}

impl GraphSageModel {
    pub fn init(
        in_dim: usize,
        hidden_dim: usize,
        out_dim: usize,
        k: usize,
        max_neighbors: usize,
        seed: u64,
    ) -> Self {
        let mut rng = stream_rng(seed, &[STREAM_INIT]);
        GraphSageModel {
            w1: xavier_init(hidden_dim, 2 * in_dim, &mut rng),
            w2: xavier_init(out_dim, 2 * hidden_dim, &mut rng),
            in_dim,
            hidden_dim,
            out_dim,
            k,
            max_neighbors,
        }
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn write<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(b"GSM1")?;
        binio::write_u32(w, self.in_dim as u32)?;
        binio::write_u32(w, self.hidden_dim as u32)?;
        binio::write_u32(w, self.out_dim as u32)?;
        binio::write_u32(w, self.k as u32)?;
        binio::write_u32(w, self.max_neighbors as u32)?;
        for &v in self.w1.iter() {
            binio::write_f32(w, v as f32)?;
        }
        for &v in self.w2.iter() {
            binio::write_f32(w, v as f32)?;
        }
        Ok(())
    }

    pub fn read_from(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read(&mut r)
    }

    pub fn read<R: Read>(r: &mut R) -> Result<Self> {
        binio::expect_magic(r, b"GSM1")?;
        let in_dim = binio::read_u32(r, "in dim")? as usize;
        let hidden_dim = binio::read_u32(r, "hidden dim")? as usize;
        let out_dim = binio::read_u32(r, "out dim")? as usize;
        let k = binio::read_u32(r, "sample size")? as usize;
        let max_neighbors = binio::read_u32(r, "max neighbors")? as usize;
        let mut read_matrix = |rows: usize, cols: usize, what: &str| -> Result<Array2<f64>> {
            let flat = binio::read_f32_vec(r, rows * cols, what)?;
            Ok(Array2::from_shape_vec((rows, cols), flat.into_iter().map(f64::from).collect())
                .expect("shape matches length"))
        };
        let w1 = read_matrix(hidden_dim, 2 * in_dim, "layer 1 weights")?;
        let w2 = read_matrix(out_dim, 2 * hidden_dim, "layer 2 weights")?;
        binio::expect_eof(r)?;
        Ok(GraphSageModel {
            w1,
            w2,
            in_dim,
            hidden_dim,
            out_dim,
            k,
            max_neighbors,
        })
    }
}

/// Everything the two-hop minibatch computation needs: the deduplicated
/// layer-1 node set and the per-node neighbor samples for both hops.
struct ForwardPlan {
    out_nodes: Vec<ArticleId>,
    l1_nodes: Vec<ArticleId>,
    /// per out node: positions of its layer-2 sampled neighbors in l1_nodes
    s2: Vec<Vec<usize>>,
    /// per out node: its own position in l1_nodes
    self_pos: Vec<usize>,
    /// per l1 node: its layer-1 sampled neighbors (feature hop)
    s1: Vec<Vec<ArticleId>>,
}

struct ForwardCache {
    a1: Array2<f64>,
    pre1: Array2<f64>,
    a2: Array2<f64>,
    pre2: Array2<f64>,
    y: Array2<f64>,
    norms: Vec<f64>,
    z: Array2<f64>,
}

fn build_plan(
    nodes: &[ArticleId],
    adj: &SampledAdjacency,
    k: usize,
    sample_seed: u64,
) -> ForwardPlan {
    let mut l1_set: BTreeSet<ArticleId> = nodes.iter().copied().collect();
    let s2_samples: Vec<Vec<ArticleId>> = nodes
        .iter()
        .map(|&v| {
            let sample = keyed_sample(adj, v, k, sample_seed, STREAM_LAYER2);
            l1_set.extend(sample.iter().copied());
            sample
        })
        .collect();
    let l1_nodes: Vec<ArticleId> = l1_set.into_iter().collect();
    let l1_pos: HashMap<ArticleId, usize> = l1_nodes
        .iter()
        .enumerate()
        .map(|(i, &n)| (n, i))
        .collect();
    let s2 = s2_samples
        .iter()
        .map(|sample| sample.iter().map(|n| l1_pos[n]).collect())
        .collect();
    let self_pos = nodes.iter().map(|n| l1_pos[n]).collect();
    let s1 = l1_nodes
        .iter()
        .map(|&u| keyed_sample(adj, u, k, sample_seed, STREAM_LAYER1))
        .collect();
    ForwardPlan {
        out_nodes: nodes.to_vec(),
        l1_nodes,
        s2,
        self_pos,
        s1,
    }
}

fn gather_features(
    plan: &ForwardPlan,
    features: &EmbeddingStore,
    in_dim: usize,
) -> Result<Array2<f64>> {
    if features.dim() != in_dim {
        return Err(Error::DimensionMismatch {
            expected: in_dim,
            got: features.dim(),
        });
    }
    let n1 = plan.l1_nodes.len();
    let mut a1 = Array2::zeros((n1, 2 * in_dim));
    let fetch = |node: ArticleId| -> Result<&[f32]> {
        features.get(node).ok_or(Error::MissingEmbedding(node))
    };
    for (row, &u) in plan.l1_nodes.iter().enumerate() {
        let x = fetch(u)?;
        for (i, &v) in x.iter().enumerate() {
            a1[[row, i]] = v as f64;
        }
        let sample = &plan.s1[row];
        if !sample.is_empty() {
            let scale = 1.0 / sample.len() as f64;
            for &w in sample {
                let xw = fetch(w)?;
                for (i, &v) in xw.iter().enumerate() {
                    a1[[row, in_dim + i]] += v as f64 * scale;
                }
            }
        }
    }
    Ok(a1)
}

fn relu(m: &Array2<f64>) -> Array2<f64> {
    m.mapv(|v| v.max(0.0))
}

fn run_forward(model: &GraphSageModel, plan: &ForwardPlan, a1: Array2<f64>) -> ForwardCache {
    let pre1 = a1.dot(&model.w1.t());
    let h1 = relu(&pre1);
    let nb = plan.out_nodes.len();
    let hidden = model.hidden_dim;
    let mut a2 = Array2::zeros((nb, 2 * hidden));
    for i in 0..nb {
        let own = h1.row(plan.self_pos[i]);
        for j in 0..hidden {
            a2[[i, j]] = own[j];
        }
        let sample = &plan.s2[i];
        if !sample.is_empty() {
            let scale = 1.0 / sample.len() as f64;
            for &p in sample {
                let row = h1.row(p);
                for j in 0..hidden {
                    a2[[i, hidden + j]] += row[j] * scale;
                }
            }
        }
    }
    let pre2 = a2.dot(&model.w2.t());
    let y = relu(&pre2);
    let norms: Vec<f64> = y
        .axis_iter(Axis(0))
        .map(|row| row.dot(&row).sqrt())
        .collect();
    let mut z = y.clone();
    for (i, mut row) in z.axis_iter_mut(Axis(0)).enumerate() {
        let r = norms[i].max(NORM_FLOOR);
        row.mapv_inplace(|v| v / r);
    }
    ForwardCache {
        a1,
        pre1,
        a2,
        pre2,
        y,
        norms,
        z,
    }
}

fn run_backward(
    model: &GraphSageModel,
    plan: &ForwardPlan,
    cache: &ForwardCache,
    dz: &Array2<f64>,
) -> (Array2<f64>, Array2<f64>) {
    let nb = plan.out_nodes.len();
    let hidden = model.hidden_dim;

    // through the L2 normalization: z = y / max(|y|, floor)
    let mut dy = Array2::zeros(dz.raw_dim());
    for i in 0..nb {
        let r = cache.norms[i];
        if r > NORM_FLOOR {
            let zi = cache.z.row(i);
            let gi = dz.row(i);
            let proj = zi.dot(&gi);
            for j in 0..model.out_dim {
                dy[[i, j]] = (gi[j] - zi[j] * proj) / r;
            }
        } else {
            for j in 0..model.out_dim {
                dy[[i, j]] = dz[[i, j]] / NORM_FLOOR;
            }
        }
    }

    let dpre2 = &dy * &cache.pre2.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
    let dw2 = dpre2.t().dot(&cache.a2);
    let da2 = dpre2.dot(&model.w2);

    let mut dh1 = Array2::zeros((plan.l1_nodes.len(), hidden));
    for i in 0..nb {
        let own = plan.self_pos[i];
        for j in 0..hidden {
            dh1[[own, j]] += da2[[i, j]];
        }
        let sample = &plan.s2[i];
        if !sample.is_empty() {
            let scale = 1.0 / sample.len() as f64;
            for &p in sample {
                for j in 0..hidden {
                    dh1[[p, j]] += da2[[i, hidden + j]] * scale;
                }
            }
        }
    }

    let dpre1 = &dh1 * &cache.pre1.mapv(|v| if v > 0.0 { 1.0 } else { 0.0 });
    let dw1 = dpre1.t().dot(&cache.a1);
    (dw1, dw2)
}

/// Two-layer forward pass for `nodes`, L2-normalized rows. Neighbor
/// samples are keyed by (sample_seed, layer, node id), so permuting
/// `nodes` permutes the output rows identically.
pub fn forward(
    model: &GraphSageModel,
    nodes: &[ArticleId],
    features: &EmbeddingStore,
    adj: &SampledAdjacency,
    sample_seed: u64,
) -> Result<Array2<f64>> {
    let plan = build_plan(nodes, adj, model.k, sample_seed);
    let a1 = gather_features(&plan, features, model.in_dim)?;
    Ok(run_forward(model, &plan, a1).z)
}

/// Forward pass without the final normalization.
pub fn forward_unnormalized(
    model: &GraphSageModel,
    nodes: &[ArticleId],
    features: &EmbeddingStore,
    adj: &SampledAdjacency,
    sample_seed: u64,
) -> Result<Array2<f64>> {
    let plan = build_plan(nodes, adj, model.k, sample_seed);
    let a1 = gather_features(&plan, features, model.in_dim)?;
    Ok(run_forward(model, &plan, a1).y)
}

/// Mean over negatives of `max(0, z_u . z_neg - z_u . z_pos + margin)`.
pub fn max_margin_loss(
    z_u: ArrayView1<f64>,
    z_pos: ArrayView1<f64>,
    z_negs: &[ArrayView1<f64>],
    margin: f64,
) -> Result<f64> {
    if z_negs.is_empty() {
        return Err(Error::EmptyInput("max-margin loss needs at least one negative".into()));
    }
    let pos = z_u.dot(&z_pos);
    let sum: f64 = z_negs
        .iter()
        .map(|neg| (z_u.dot(neg) - pos + margin).max(0.0))
        .sum();
    Ok(sum / z_negs.len() as f64)
}

/// Uniform sample (with replacement) over nodes that are neither `u` nor
/// out-neighbors of `u`.
pub fn negative_sample(
    graph: &ArticleGraph,
    u: ArticleId,
    count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<ArticleId>> {
    let nodes: Vec<ArticleId> = graph.nodes().collect();
    negative_sample_from(&nodes, graph, u, count, rng)
}

fn negative_sample_from(
    nodes: &[ArticleId],
    graph: &ArticleGraph,
    u: ArticleId,
    count: usize,
    rng: &mut impl Rng,
) -> Result<Vec<ArticleId>> {
    if count == 0 {
        return Err(Error::InvalidArgument("negative sample count must be >= 1".into()));
    }
    let out = graph.out_neighbors(u);
    let valid = nodes.len().saturating_sub(1 + out.len());
    if valid == 0 {
        return Err(Error::EmptyInput(format!(
            "node {u} has no valid negatives: it links to every other node"
        )));
    }
    let mut samples = Vec::with_capacity(count);
    if out.len() * 2 >= nodes.len() {
        // dense adjacency: enumerate the complement once
        let candidates: Vec<ArticleId> = nodes
            .iter()
            .copied()
            .filter(|&n| n != u && out.binary_search(&n).is_err())
            .collect();
        for _ in 0..count {
            samples.push(candidates[rng.gen_range(0..candidates.len())]);
        }
    } else {
        while samples.len() < count {
            let candidate = nodes[rng.gen_range(0..nodes.len())];
            if candidate != u && out.binary_search(&candidate).is_err() {
                samples.push(candidate);
            }
        }
    }
    Ok(samples)
}

/// One positive link with its sampled negatives.
#[derive(Debug, Clone)]
pub struct TrainTriple {
    pub anchor: ArticleId,
    pub positive: ArticleId,
    pub negatives: Vec<ArticleId>,
}

fn triple_rows(triples: &[TrainTriple]) -> (Vec<ArticleId>, HashMap<ArticleId, usize>) {
    let mut set = BTreeSet::new();
    for t in triples {
        set.insert(t.anchor);
        set.insert(t.positive);
        set.extend(t.negatives.iter().copied());
    }
    let nodes: Vec<ArticleId> = set.into_iter().collect();
    let pos = nodes.iter().enumerate().map(|(i, &n)| (n, i)).collect();
    (nodes, pos)
}

/// Mean max-margin loss of a batch of triples under the current weights.
pub fn link_loss(
    model: &GraphSageModel,
    features: &EmbeddingStore,
    adj: &SampledAdjacency,
    triples: &[TrainTriple],
    margin: f64,
    sample_seed: u64,
) -> Result<f64> {
    let (nodes, row_of) = triple_rows(triples);
    let z = forward(model, &nodes, features, adj, sample_seed)?;
    let mut total = 0.0;
    for t in triples {
        let z_u = z.row(row_of[&t.anchor]);
        let z_pos = z.row(row_of[&t.positive]);
        let negs: Vec<ArrayView1<f64>> =
            t.negatives.iter().map(|n| z.row(row_of[n])).collect();
        total += max_margin_loss(z_u, z_pos, &negs, margin)?;
    }
    Ok(total / triples.len() as f64)
}

/// Batch loss plus analytic gradients of both weight matrices.
pub fn link_loss_grads(
    model: &GraphSageModel,
    features: &EmbeddingStore,
    adj: &SampledAdjacency,
    triples: &[TrainTriple],
    margin: f64,
    sample_seed: u64,
) -> Result<(f64, Array2<f64>, Array2<f64>)> {
    let (nodes, row_of) = triple_rows(triples);
    let plan = build_plan(&nodes, adj, model.k, sample_seed);
    let a1 = gather_features(&plan, features, model.in_dim)?;
    let cache = run_forward(model, &plan, a1);
    let z = &cache.z;

    let mut total = 0.0;
    let mut dz = Array2::zeros(z.raw_dim());
    let pair_weight = 1.0 / triples.len() as f64;
    for t in triples {
        if t.negatives.is_empty() {
            return Err(Error::EmptyInput("max-margin loss needs at least one negative".into()));
        }
        let u = row_of[&t.anchor];
        let p = row_of[&t.positive];
        let neg_weight = pair_weight / t.negatives.len() as f64;
        let pos_dot = z.row(u).dot(&z.row(p));
        for neg in &t.negatives {
            let n = row_of[neg];
            let value = z.row(u).dot(&z.row(n)) - pos_dot + margin;
            if value > 0.0 {
                total += neg_weight * value;
                for j in 0..model.out_dim {
                    dz[[u, j]] += neg_weight * (z[[n, j]] - z[[p, j]]);
                    dz[[n, j]] += neg_weight * z[[u, j]];
                    dz[[p, j]] -= neg_weight * z[[u, j]];
                }
            }
        }
    }
    let (dw1, dw2) = run_backward(model, &plan, &cache, &dz);
    Ok((total, dw1, dw2))
}

#[derive(Debug, Clone)]
pub struct GraphSageConfig {
    pub hidden_dim: usize,
    pub out_dim: usize,
    pub k: usize,
    pub max_neighbors: usize,
    pub batch: usize,
    pub margin: f64,
    pub negatives_per_edge: usize,
    pub epochs: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub seed: u64,
}

impl Default for GraphSageConfig {
    fn default() -> Self {
        GraphSageConfig {
            hidden_dim: 512,
            out_dim: 512,
            k: 25,
            max_neighbors: 128,
            batch: 512,
            margin: 0.5,
            negatives_per_edge: 5,
            epochs: 5,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            seed: 42,
        }
    }
}

#[derive(Debug)]
pub struct GraphSageTrainResult {
    pub model: GraphSageModel,
    pub adjacency: SampledAdjacency,
    /// Mean batch loss per epoch.
    pub epoch_losses: Vec<f64>,
}

/// Trains the encoder on link prediction: undirected edges are positive
/// pairs, negatives are uniform non-neighbors, and the max-margin loss is
/// minimized with Adam. Deterministic for a fixed seed.
pub fn train_graphsage(
    graph: &ArticleGraph,
    features: &EmbeddingStore,
    config: &GraphSageConfig,
) -> Result<GraphSageTrainResult> {
    for node in graph.nodes() {
        if !features.contains(node) {
            return Err(Error::MissingEmbedding(node));
        }
    }
    let undirected = graph.undirected_neighbors();
    let mut edges: Vec<(ArticleId, ArticleId)> = Vec::new();
    for (&a, neighbors) in &undirected {
        for &b in neighbors {
            if a < b {
                edges.push((a, b));
            }
        }
    }
    if edges.is_empty() {
        return Err(Error::EmptyInput("graph has no edges to train on".into()));
    }

    let adjacency = build_sampled_adjacency(graph, config.max_neighbors, config.seed);
    let mut model = GraphSageModel::init(
        features.dim(),
        config.hidden_dim,
        config.out_dim,
        config.k,
        config.max_neighbors,
        config.seed,
    );
    let mut adam1 = Adam::new(model.w1.len(), config.lr, config.beta1, config.beta2);
    let mut adam2 = Adam::new(model.w2.len(), config.lr, config.beta1, config.beta2);
    let all_nodes: Vec<ArticleId> = graph.nodes().collect();

    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut rng = stream_rng(config.seed, &[STREAM_EPOCH, epoch as u64]);
        let mut order: Vec<usize> = (0..edges.len()).collect();
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        let mut batch_count = 0usize;
        for (batch_idx, chunk) in order.chunks(config.batch.max(1)).enumerate() {
            let mut triples = Vec::with_capacity(chunk.len());
            for &edge_idx in chunk {
                let (a, b) = edges[edge_idx];
                let (anchor, positive) = if rng.gen::<bool>() { (a, b) } else { (b, a) };
                let negatives = negative_sample_from(
                    &all_nodes,
                    graph,
                    anchor,
                    config.negatives_per_edge,
                    &mut rng,
                )?;
                triples.push(TrainTriple {
                    anchor,
                    positive,
                    negatives,
                });
            }
            let sample_seed =
                config.seed ^ (epoch as u64).wrapping_mul(0x51ed_270b) ^ (batch_idx as u64) << 20;
            let (loss, dw1, dw2) = link_loss_grads(
                &model,
                features,
                &adjacency,
                &triples,
                config.margin,
                sample_seed,
            )?;
            adam1.update_matrix(&mut model.w1, &dw1);
            adam2.update_matrix(&mut model.w2, &dw2);
            loss_sum += loss;
            batch_count += 1;
        }
        epoch_losses.push(loss_sum / batch_count.max(1) as f64);
    }

    Ok(GraphSageTrainResult {
        model,
        adjacency,
        epoch_losses,
    })
}

/// Embeds every node of the graph with a fixed sampling seed. Inductive:
/// works for nodes absent from training as long as features and sampled
/// neighbors are available.
pub fn embed_all(
    model: &GraphSageModel,
    graph: &ArticleGraph,
    features: &EmbeddingStore,
    adj: &SampledAdjacency,
    seed: u64,
) -> Result<EmbeddingStore> {
    let nodes: Vec<ArticleId> = graph.nodes().collect();
    let mut rows: Vec<(ArticleId, Vec<f32>)> = Vec::with_capacity(nodes.len());
    for chunk in nodes.chunks(1024) {
        let z = forward(model, chunk, features, adj, seed)?;
        for (i, &node) in chunk.iter().enumerate() {
            rows.push((node, z.row(i).iter().map(|&v| v as f32).collect()));
        }
    }
    EmbeddingStore::from_rows(model.out_dim, rows)
}
