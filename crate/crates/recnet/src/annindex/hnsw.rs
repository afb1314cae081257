//! Hierarchical navigable small-world graph: a layered proximity graph
//! searched greedily from the top layer down, with beam search (`ef`
//! candidates) on the bottom layer.
//!
//! Construction is deterministic: insertion order is store order and
//! layer assignment comes from a seeded RNG.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};
use std::io::{Read, Write};

use rand::Rng;

use super::{finish_results, Scored, VectorSet};
use crate::binio;
use crate::corpus::ArticleId;
use crate::error::Result;
use crate::nn::stream_rng;

const MAX_LEVEL: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct HnswParams {
    /// Links per node per layer (the bottom layer allows 2m).
    pub m: usize,
    pub ef_construction: usize,
    pub ef_search: usize,
    pub seed: u64,
}

impl Default for HnswParams {
    fn default() -> Self {
        HnswParams {
            m: 16,
            ef_construction: 200,
            ef_search: 64,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HnswIndex {
    pub(crate) set: VectorSet,
    params: HnswParams,
    entry: u32,
    max_level: usize,
    /// Top layer of each node.
    levels: Vec<u8>,
    /// links[node][layer] = neighbor row indexes, layer 0..=levels[node].
    links: Vec<Vec<Vec<u32>>>,
}

impl HnswIndex {
    pub fn build(set: VectorSet, params: HnswParams) -> Self {
        let n = set.len();
        let ml = 1.0 / (params.m.max(2) as f64).ln();
        let mut rng = stream_rng(params.seed, &[0x4857]);
        let mut index = HnswIndex {
            set,
            params,
            entry: 0,
            max_level: 0,
            levels: Vec::with_capacity(n),
            links: Vec::with_capacity(n),
        };
        for node in 0..n {
            let u: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let level = ((-u.ln() * ml).floor() as usize).min(MAX_LEVEL);
            index.insert(node as u32, level);
        }
        index
    }

    fn insert(&mut self, node: u32, level: usize) {
        self.levels.push(level as u8);
        self.links.push(vec![Vec::new(); level + 1]);
        if node == 0 {
            self.entry = 0;
            self.max_level = level;
            return;
        }
        let query = self.set.row(node as usize).to_vec();
        let mut ep = self.entry;
        for layer in ((level + 1)..=self.max_level).rev() {
            ep = self.greedy_step(&query, ep, layer);
        }
        for layer in (0..=level.min(self.max_level)).rev() {
            let candidates = self.search_layer(&query, &[ep], self.params.ef_construction, layer);
            let max_links = self.max_links(layer);
            let chosen: Vec<u32> = candidates
                .iter()
                .take(self.params.m)
                .map(|s| s.idx)
                .collect();
            for &neighbor in &chosen {
                self.links[node as usize][layer].push(neighbor);
                self.links[neighbor as usize][layer].push(node);
                if self.links[neighbor as usize][layer].len() > max_links {
                    self.prune(neighbor, layer, max_links);
                }
            }
            if let Some(best) = candidates.first() {
                ep = best.idx;
            }
        }
        if level > self.max_level {
            self.entry = node;
            self.max_level = level;
        }
    }

    fn max_links(&self, layer: usize) -> usize {
        if layer == 0 {
            self.params.m * 2
        } else {
            self.params.m
        }
    }

    /// Keeps the `max_links` closest neighbors of a node on one layer.
    fn prune(&mut self, node: u32, layer: usize, max_links: usize) {
        let base = self.set.row(node as usize);
        let mut scored: Vec<Scored> = self.links[node as usize][layer]
            .iter()
            .map(|&other| Scored {
                sim: super::dot(base, self.set.row(other as usize)),
                idx: other,
            })
            .collect();
        scored.sort_by(|a, b| b.cmp(a));
        scored.truncate(max_links);
        self.links[node as usize][layer] = scored.into_iter().map(|s| s.idx).collect();
    }

    /// Greedy hill climb toward the query on one layer (ef = 1).
    fn greedy_step(&self, query: &[f32], start: u32, layer: usize) -> u32 {
        let mut best = Scored {
            sim: self.set.dot(query, start as usize),
            idx: start,
        };
        loop {
            let mut improved = false;
            for &next in &self.links[best.idx as usize][layer] {
                let cand = Scored {
                    sim: self.set.dot(query, next as usize),
                    idx: next,
                };
                if cand > best {
                    best = cand;
                    improved = true;
                }
            }
            if !improved {
                return best.idx;
            }
        }
    }

    /// Beam search with `ef` kept candidates; returns best-first.
    fn search_layer(&self, query: &[f32], entries: &[u32], ef: usize, layer: usize) -> Vec<Scored> {
        let mut visited: HashSet<u32> = HashSet::new();
        let mut frontier: BinaryHeap<Scored> = BinaryHeap::new();
        let mut results: BinaryHeap<Reverse<Scored>> = BinaryHeap::new();
        for &e in entries {
            if visited.insert(e) {
                let s = Scored {
                    sim: self.set.dot(query, e as usize),
                    idx: e,
                };
                frontier.push(s);
                results.push(Reverse(s));
            }
        }
        while let Some(current) = frontier.pop() {
            let worst = results.peek().unwrap().0;
            if results.len() >= ef && current < worst {
                break;
            }
            for &next in &self.links[current.idx as usize][layer] {
                if !visited.insert(next) {
                    continue;
                }
                let cand = Scored {
                    sim: self.set.dot(query, next as usize),
                    idx: next,
                };
                let worst = results.peek().unwrap().0;
                if results.len() < ef || cand > worst {
                    frontier.push(cand);
                    results.push(Reverse(cand));
                    if results.len() > ef {
                        results.pop();
                    }
                }
            }
        }
        let mut out: Vec<Scored> = results.into_iter().map(|Reverse(s)| s).collect();
        out.sort_by(|a, b| b.cmp(a));
        out
    }

    pub fn search(&self, query: &[f32], k: usize) -> Vec<(ArticleId, f32)> {
        let mut ep = self.entry;
        for layer in (1..=self.max_level).rev() {
            ep = self.greedy_step(query, ep, layer);
        }
        let ef = self.params.ef_search.max(k);
        let scored = self.search_layer(query, &[ep], ef, 0);
        finish_results(&self.set, scored, k)
    }

    pub(crate) fn write_payload<W: Write>(&self, w: &mut W) -> Result<()> {
        binio::write_u32(w, self.params.m as u32)?;
        binio::write_u32(w, self.params.ef_construction as u32)?;
        binio::write_u32(w, self.params.ef_search as u32)?;
        binio::write_u64(w, self.params.seed)?;
        binio::write_u32(w, self.entry)?;
        binio::write_u32(w, self.max_level as u32)?;
        for node in 0..self.set.len() {
            binio::write_u8(w, self.levels[node])?;
            for layer in 0..=self.levels[node] as usize {
                let list = &self.links[node][layer];
                binio::write_u32(w, list.len() as u32)?;
                for &neighbor in list {
                    binio::write_u32(w, neighbor)?;
                }
            }
        }
        Ok(())
    }

    pub(crate) fn read_payload<R: Read>(set: VectorSet, r: &mut R) -> Result<Self> {
        let m = binio::read_u32(r, "hnsw m")? as usize;
        let ef_construction = binio::read_u32(r, "hnsw ef_construction")? as usize;
        let ef_search = binio::read_u32(r, "hnsw ef_search")? as usize;
        let seed = binio::read_u64(r, "hnsw seed")?;
        let entry = binio::read_u32(r, "hnsw entry point")?;
        let max_level = binio::read_u32(r, "hnsw max level")? as usize;
        let mut levels = Vec::with_capacity(set.len());
        let mut links = Vec::with_capacity(set.len());
        for _ in 0..set.len() {
            let level = binio::read_u8(r, "hnsw node level")?;
            levels.push(level);
            let mut node_links = Vec::with_capacity(level as usize + 1);
            for _ in 0..=level {
                let len = binio::read_u32(r, "hnsw link count")? as usize;
                let mut list = Vec::with_capacity(len);
                for _ in 0..len {
                    list.push(binio::read_u32(r, "hnsw link")?);
                }
                node_links.push(list);
            }
            links.push(node_links);
        }
        Ok(HnswIndex {
            set,
            params: HnswParams {
                m,
                ef_construction,
                ef_search,
                seed,
            },
            entry,
            max_level,
            levels,
            links,
        })
    }
}
