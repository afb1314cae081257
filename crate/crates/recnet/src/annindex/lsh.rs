//! Random-hyperplane LSH: each vector gets an `n_bits` sign signature;
//! queries rank candidates by Hamming distance and exactly re-rank the
//! closest `rerank_factor * k`.

use std::collections::BinaryHeap;
use std::io::{Read, Write};

use rand::Rng;

use super::{finish_results, Scored, VectorSet};
use crate::binio;
use crate::corpus::ArticleId;
use crate::error::Result;
use crate::nn::stream_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct LshParams {
    pub n_bits: usize,
    /// The top rerank_factor * k Hamming candidates get exact scoring.
    pub rerank_factor: usize,
    pub seed: u64,
}

impl Default for LshParams {
    fn default() -> Self {
        LshParams {
            n_bits: 256,
            rerank_factor: 10,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LshIndex {
    pub(crate) set: VectorSet,
    n_bits: usize,
    rerank_factor: usize,
    seed: u64,
    /// n_bits x dim Gaussian directions, row-major.
    hyperplanes: Vec<f32>,
    /// Per vector: ceil(n_bits/64) packed sign words.
    signatures: Vec<u64>,
    words: usize,
}

impl LshIndex {
    pub fn build(set: VectorSet, params: LshParams) -> Self {
        let dim = set.dim();
        let n_bits = params.n_bits.max(1);
        let mut rng = stream_rng(params.seed, &[0x4C53]);
        let hyperplanes: Vec<f32> = (0..n_bits * dim).map(|_| gaussian(&mut rng) as f32).collect();
        let words = n_bits.div_ceil(64);
        let mut signatures = vec![0u64; set.len() * words];
        for i in 0..set.len() {
            sign_signature(
                set.row(i),
                &hyperplanes,
                n_bits,
                dim,
                &mut signatures[i * words..(i + 1) * words],
            );
        }
        LshIndex {
            set,
            n_bits,
            rerank_factor: params.rerank_factor.max(1),
            seed: params.seed,
            hyperplanes,
            signatures,
            words,
        }
    }

    pub fn search(&self, query: &[f32], k: usize) -> Vec<(ArticleId, f32)> {
        let dim = self.set.dim();
        let mut sig = vec![0u64; self.words];
        sign_signature(query, &self.hyperplanes, self.n_bits, dim, &mut sig);

        // smallest Hamming distance first; ties prefer lower row index
        let shortlist = self.rerank_factor.saturating_mul(k).max(k);
        let mut heap: BinaryHeap<(u32, u32)> = BinaryHeap::with_capacity(shortlist + 1);
        for i in 0..self.set.len() {
            let words = &self.signatures[i * self.words..(i + 1) * self.words];
            let mut dist = 0u32;
            for (w, &q) in words.iter().zip(&sig) {
                dist += (w ^ q).count_ones();
            }
            let entry = (dist, i as u32);
            if heap.len() < shortlist {
                heap.push(entry);
            } else if entry < *heap.peek().unwrap() {
                heap.pop();
                heap.push(entry);
            }
        }

        let scored: Vec<Scored> = heap
            .into_iter()
            .map(|(_, idx)| Scored {
                sim: self.set.dot(query, idx as usize),
                idx,
            })
            .collect();
        finish_results(&self.set, scored, k)
    }

    pub(crate) fn write_payload<W: Write>(&self, w: &mut W) -> Result<()> {
        binio::write_u32(w, self.n_bits as u32)?;
        binio::write_u32(w, self.rerank_factor as u32)?;
        binio::write_u64(w, self.seed)?;
        binio::write_f32_slice(w, &self.hyperplanes)?;
        for &word in &self.signatures {
            binio::write_u64(w, word)?;
        }
        Ok(())
    }

    pub(crate) fn read_payload<R: Read>(set: VectorSet, r: &mut R) -> Result<Self> {
        let n_bits = binio::read_u32(r, "lsh n_bits")? as usize;
        let rerank_factor = binio::read_u32(r, "lsh rerank factor")? as usize;
        let seed = binio::read_u64(r, "lsh seed")?;
        let hyperplanes = binio::read_f32_vec(r, n_bits * set.dim(), "lsh hyperplanes")?;
        let words = n_bits.div_ceil(64);
        let mut signatures = Vec::with_capacity(set.len() * words);
        for _ in 0..set.len() * words {
            signatures.push(binio::read_u64(r, "lsh signature")?);
        }
        Ok(LshIndex {
            set,
            n_bits,
            rerank_factor,
            seed,
            hyperplanes,
            signatures,
            words,
        })
    }
}

fn sign_signature(v: &[f32], hyperplanes: &[f32], n_bits: usize, dim: usize, out: &mut [u64]) {
    for word in out.iter_mut() {
        *word = 0;
    }
    for bit in 0..n_bits {
        let plane = &hyperplanes[bit * dim..(bit + 1) * dim];
        let mut acc = 0.0f32;
        for d in 0..dim {
            acc += plane[d] * v[d];
        }
        if acc >= 0.0 {
            out[bit / 64] |= 1u64 << (bit % 64);
        }
    }
}

/// Box-Muller standard normal draw.
fn gaussian(rng: &mut impl Rng) -> f64 {
    let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = rng.gen_range(0.0..1.0);
    (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
}
