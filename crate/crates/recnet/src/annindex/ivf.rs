//! Inverted-file index: seeded k-means coarse quantizer, exact
//! post-verification inside the `nprobe` closest lists.

use std::io::{Read, Write};

use rand::Rng;

use super::{finish_results, Scored, VectorSet};
use crate::binio;
use crate::corpus::ArticleId;
use crate::error::{Error, Result};
use crate::nn::stream_rng;

#[derive(Debug, Clone, PartialEq)]
pub struct IvfParams {
    /// Number of coarse centroids; defaults to ceil(sqrt(N)).
    pub nlist: Option<usize>,
    pub nprobe: usize,
    pub kmeans_iters: usize,
    pub seed: u64,
}

impl Default for IvfParams {
    fn default() -> Self {
        IvfParams {
            nlist: None,
            nprobe: 8,
            kmeans_iters: 20,
            seed: 42,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct IvfIndex {
    pub(crate) set: VectorSet,
    nlist: usize,
    nprobe: usize,
    kmeans_iters: usize,
    seed: u64,
    /// nlist x dim, row-major.
    centroids: Vec<f32>,
    lists: Vec<Vec<u32>>,
}

impl IvfIndex {
    pub fn build(set: VectorSet, params: IvfParams) -> Result<Self> {
        let n = set.len();
        let nlist = params
            .nlist
            .unwrap_or_else(|| (n as f64).sqrt().ceil() as usize)
            .max(1);
        if nlist > n {
            return Err(Error::InvalidArgument(format!(
                "nlist {nlist} exceeds the {n} stored vectors; use a smaller nlist"
            )));
        }
        let dim = set.dim();
        let mut rng = stream_rng(params.seed, &[0x4956]);

        // init: nlist distinct seeded rows
        let mut picks: Vec<usize> = (0..n).collect();
        for i in 0..nlist {
            let j = rng.gen_range(i..n);
            picks.swap(i, j);
        }
        let mut centroids = vec![0.0f32; nlist * dim];
        for (c, &row) in picks[..nlist].iter().enumerate() {
            centroids[c * dim..(c + 1) * dim].copy_from_slice(set.row(row));
        }

        let mut assignment = vec![0usize; n];
        for _ in 0..params.kmeans_iters {
            // assign to nearest centroid under L2
            for i in 0..n {
                assignment[i] = nearest_centroid(&centroids, nlist, dim, set.row(i)).0;
            }
            // recompute means
            let mut sums = vec![0.0f64; nlist * dim];
            let mut counts = vec![0usize; nlist];
            for i in 0..n {
                let c = assignment[i];
                counts[c] += 1;
                let row = set.row(i);
                for d in 0..dim {
                    sums[c * dim + d] += row[d] as f64;
                }
            }
            // an empty cluster is reseeded to the point farthest from its centroid
            for c in 0..nlist {
                if counts[c] > 0 {
                    for d in 0..dim {
                        centroids[c * dim + d] = (sums[c * dim + d] / counts[c] as f64) as f32;
                    }
                } else {
                    let far = (0..n)
                        .max_by(|&a, &b| {
                            let da = centroid_distance(&centroids, dim, assignment[a], set.row(a));
                            let db = centroid_distance(&centroids, dim, assignment[b], set.row(b));
                            da.total_cmp(&db).then(b.cmp(&a))
                        })
                        .unwrap();
                    centroids[c * dim..(c + 1) * dim].copy_from_slice(set.row(far));
                }
            }
        }

        let mut lists = vec![Vec::new(); nlist];
        for i in 0..n {
            let c = nearest_centroid(&centroids, nlist, dim, set.row(i)).0;
            lists[c].push(i as u32);
        }
        Ok(IvfIndex {
            set,
            nlist,
            nprobe: params.nprobe.max(1),
            kmeans_iters: params.kmeans_iters,
            seed: params.seed,
            centroids,
            lists,
        })
    }

    pub fn search(&self, query: &[f32], k: usize) -> Vec<(ArticleId, f32)> {
        let dim = self.set.dim();
        // rank centroids by L2 distance to the query
        let mut order: Vec<(f32, usize)> = (0..self.nlist)
            .map(|c| (centroid_distance(&self.centroids, dim, c, query), c))
            .collect();
        order.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

        let mut scored = Vec::new();
        for &(_, c) in order.iter().take(self.nprobe) {
            for &idx in &self.lists[c] {
                scored.push(Scored {
                    sim: self.set.dot(query, idx as usize),
                    idx,
                });
            }
        }
        finish_results(&self.set, scored, k)
    }

    pub(crate) fn write_payload<W: Write>(&self, w: &mut W) -> Result<()> {
        binio::write_u32(w, self.nlist as u32)?;
        binio::write_u32(w, self.nprobe as u32)?;
        binio::write_u32(w, self.kmeans_iters as u32)?;
        binio::write_u64(w, self.seed)?;
        binio::write_f32_slice(w, &self.centroids)?;
        for list in &self.lists {
            binio::write_u32(w, list.len() as u32)?;
            for &idx in list {
                binio::write_u32(w, idx)?;
            }
        }
        Ok(())
    }

    pub(crate) fn read_payload<R: Read>(set: VectorSet, r: &mut R) -> Result<Self> {
        let nlist = binio::read_u32(r, "ivf nlist")? as usize;
        let nprobe = binio::read_u32(r, "ivf nprobe")? as usize;
        let kmeans_iters = binio::read_u32(r, "ivf kmeans iters")? as usize;
        let seed = binio::read_u64(r, "ivf seed")?;
        let centroids = binio::read_f32_vec(r, nlist * set.dim(), "ivf centroids")?;
        let mut lists = Vec::with_capacity(nlist);
        for _ in 0..nlist {
            let len = binio::read_u32(r, "ivf list length")? as usize;
            let mut list = Vec::with_capacity(len);
            for _ in 0..len {
                list.push(binio::read_u32(r, "ivf list entry")?);
            }
            lists.push(list);
        }
        Ok(IvfIndex {
            set,
            nlist,
            nprobe,
            kmeans_iters,
            seed,
            centroids,
            lists,
        })
    }
}

fn centroid_distance(centroids: &[f32], dim: usize, c: usize, v: &[f32]) -> f32 {
    let centroid = &centroids[c * dim..(c + 1) * dim];
    let mut acc = 0.0f32;
    for d in 0..dim {
        let diff = centroid[d] - v[d];
        acc += diff * diff;
    }
    acc
}

fn nearest_centroid(centroids: &[f32], nlist: usize, dim: usize, v: &[f32]) -> (usize, f32) {
    let mut best = (0usize, f32::INFINITY);
    for c in 0..nlist {
        let d = centroid_distance(centroids, dim, c, v);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}
