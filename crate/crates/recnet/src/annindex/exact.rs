//! Flat-scan exact index: building is a copy of the store, search is a
//! full O(N*d) pass keeping the top-k in a bounded heap.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use super::{finish_results, Scored, VectorSet};
use crate::corpus::ArticleId;

#[derive(Debug, Clone, PartialEq)]
pub struct ExactIndex {
    pub(crate) set: VectorSet,
}

impl ExactIndex {
    pub fn build(set: VectorSet) -> Self {
        ExactIndex { set }
    }

    pub fn search(&self, query: &[f32], k: usize) -> Vec<(ArticleId, f32)> {
        let mut heap: BinaryHeap<Reverse<Scored>> = BinaryHeap::with_capacity(k + 1);
        for idx in 0..self.set.len() {
            let cand = Scored {
                sim: self.set.dot(query, idx),
                idx: idx as u32,
            };
            if heap.len() < k {
                heap.push(Reverse(cand));
            } else if cand > heap.peek().unwrap().0 {
                heap.pop();
                heap.push(Reverse(cand));
            }
        }
        let scored: Vec<Scored> = heap.into_iter().map(|Reverse(s)| s).collect();
        finish_results(&self.set, scored, k)
    }
}
