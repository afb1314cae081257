//! Content-based article representations: a PV-DBOW paragraph-vector
//! trainer with negative sampling.
//!
//! Each document owns one trainable vector. At every token position a word
//! is sampled from the `window`-wide span starting there, and the document
//! vector is trained to predict it against `negatives` draws from the
//! unigram^0.75 distribution. Word output vectors are discarded after
//! training; only document vectors are exported.

use std::collections::HashMap;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::corpus::ArticleId;
use crate::error::{Error, Result};
use crate::nn::{sigmoid, softplus, stream_rng};
use crate::store::EmbeddingStore;

/// Lowercased maximal runs of Unicode alphanumeric characters, in order.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            for lc in c.to_lowercase() {
                current.push(lc);
            }
        } else if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

/// Token table with dense indices ordered by descending frequency,
/// lexicographic tie-break.
#[derive(Debug, Clone)]
pub struct Vocabulary {
    tokens: Vec<String>,
    frequencies: Vec<u64>,
    index: HashMap<String, usize>,
    total_token_count: u64,
}

impl Vocabulary {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, idx: usize) -> &str {
        &self.tokens[idx]
    }

    pub fn frequency(&self, idx: usize) -> u64 {
        self.frequencies[idx]
    }

    /// Count of all corpus tokens, including ones below min_count.
    pub fn total_token_count(&self) -> u64 {
        self.total_token_count
    }
}

/// Counts tokens across the corpus and keeps those with frequency >=
/// `min_count`.
pub fn build_vocab<'a>(
    docs: impl IntoIterator<Item = &'a [String]>,
    min_count: usize,
) -> Vocabulary {
    let mut counts: HashMap<&str, u64> = HashMap::new();
    let mut total = 0u64;
    for doc in docs {
        for token in doc {
            *counts.entry(token.as_str()).or_insert(0) += 1;
            total += 1;
        }
    }
    let mut entries: Vec<(&str, u64)> = counts
        .into_iter()
        .filter(|&(_, c)| c >= min_count as u64)
        .collect();
    entries.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
    let mut tokens = Vec::with_capacity(entries.len());
    let mut frequencies = Vec::with_capacity(entries.len());
    let mut index = HashMap::with_capacity(entries.len());
    for (i, (token, count)) in entries.into_iter().enumerate() {
        index.insert(token.to_string(), i);
        tokens.push(token.to_string());
        frequencies.push(count);
    }
    Vocabulary {
        tokens,
        frequencies,
        index,
        total_token_count: total,
    }
}

/// Sampler over the unigram distribution raised to 0.75 and normalized.
#[derive(Debug, Clone)]
pub struct NegativeTable {
    cumulative: Vec<f64>,
}

impl NegativeTable {
    pub fn new(frequencies: &[u64]) -> Self {
        let mut cumulative = Vec::with_capacity(frequencies.len());
        let mut acc = 0.0;
        for &f in frequencies {
            acc += (f as f64).powf(0.75);
            cumulative.push(acc);
        }
        NegativeTable { cumulative }
    }

    pub fn probability(&self, idx: usize) -> f64 {
        let total = *self.cumulative.last().unwrap();
        let prev = if idx == 0 { 0.0 } else { self.cumulative[idx - 1] };
        (self.cumulative[idx] - prev) / total
    }

    pub fn sample(&self, rng: &mut impl Rng) -> usize {
        let total = *self.cumulative.last().expect("non-empty table");
        let x = rng.gen_range(0.0..total);
        self.cumulative.partition_point(|&c| c <= x)
    }
}

#[derive(Debug, Clone)]
pub struct PvDbowConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub initial_lr: f64,
    pub min_lr: f64,
    pub min_count: usize,
    pub subsample_threshold: f64,
    pub seed: u64,
}

impl Default for PvDbowConfig {
    fn default() -> Self {
        PvDbowConfig {
            dim: 300,
            window: 8,
            negatives: 5,
            epochs: 10,
            initial_lr: 0.025,
            min_lr: 1e-4,
            min_count: 5,
            subsample_threshold: 1e-4,
            seed: 42,
        }
    }
}

#[derive(Debug)]
pub struct PvDbowResult {
    pub embeddings: EmbeddingStore,
    /// Average per-pair negative-sampling log-loss per epoch.
    pub epoch_losses: Vec<f64>,
    /// Documents whose tokens were all out of vocabulary; their vectors
    /// stay at initialization.
    pub skipped_docs: usize,
}

/// Per-pair negative-sampling loss:
/// `-log sigmoid(v . u_w) - sum_n log sigmoid(-v . u_n)`.
pub fn pair_loss(doc: &[f64], target: &[f64], negatives: &[&[f64]]) -> f64 {
    let mut loss = softplus(-dot(doc, target));
    for neg in negatives {
        loss += softplus(dot(doc, neg));
    }
    loss
}

/// Loss plus analytic gradients w.r.t. the document vector, the target word
/// vector, and each negative word vector.
pub fn pair_loss_grads(
    doc: &[f64],
    target: &[f64],
    negatives: &[&[f64]],
) -> (f64, Vec<f64>, Vec<f64>, Vec<Vec<f64>>) {
    let dim = doc.len();
    let mut loss = 0.0;
    let mut grad_doc = vec![0.0; dim];
    let pos_dot = dot(doc, target);
    loss += softplus(-pos_dot);
    let pos_coeff = sigmoid(pos_dot) - 1.0;
    let grad_target: Vec<f64> = doc.iter().map(|&v| pos_coeff * v).collect();
    for i in 0..dim {
        grad_doc[i] += pos_coeff * target[i];
    }
    let mut grad_negs = Vec::with_capacity(negatives.len());
    for neg in negatives {
        let neg_dot = dot(doc, neg);
        loss += softplus(neg_dot);
        let coeff = sigmoid(neg_dot);
        grad_negs.push(doc.iter().map(|&v| coeff * v).collect());
        for i in 0..dim {
            grad_doc[i] += coeff * neg[i];
        }
    }
    (loss, grad_doc, grad_target, grad_negs)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Trains PV-DBOW document vectors over the corpus. Deterministic for a
/// fixed seed (single-threaded).
pub fn train_pvdbow(corpus: &[(ArticleId, String)], config: &PvDbowConfig) -> Result<PvDbowResult> {
    if corpus.is_empty() {
        return Err(Error::EmptyInput("corpus has no documents".into()));
    }
    if config.dim == 0 {
        return Err(Error::InvalidArgument("embedding dimension must be >= 1".into()));
    }
    if config.window == 0 {
        return Err(Error::InvalidArgument("window must be >= 1".into()));
    }

    let tokenized: Vec<Vec<String>> = corpus.iter().map(|(_, text)| tokenize(text)).collect();
    let vocab = build_vocab(tokenized.iter().map(Vec::as_slice), config.min_count);

    // keep probability per word under frequency subsampling
    let keep_prob: Vec<f64> = (0..vocab.len())
        .map(|w| {
            let freq = vocab.frequency(w) as f64 / vocab.total_token_count().max(1) as f64;
            let t = config.subsample_threshold;
            ((t / freq).sqrt() + t / freq).min(1.0)
        })
        .collect();

    let doc_tokens: Vec<Vec<usize>> = tokenized
        .iter()
        .map(|toks| toks.iter().filter_map(|t| vocab.get(t)).collect())
        .collect();
    let skipped_docs = doc_tokens.iter().filter(|t| t.is_empty()).count();
    if skipped_docs > 0 {
        log::warn!(
            "{skipped_docs} document(s) have no in-vocabulary tokens; their vectors stay at initialization"
        );
    }

    let dim = config.dim;
    let n_docs = corpus.len();
    let mut rng = stream_rng(config.seed, &[0x7064]);
    let bound = 0.5 / dim as f64;
    let mut doc_vecs: Vec<f64> = (0..n_docs * dim)
        .map(|_| rng.gen_range(-bound..bound))
        .collect();
    let mut word_vecs: Vec<f64> = vec![0.0; vocab.len() * dim];
    let table = if vocab.is_empty() {
        None
    } else {
        Some(NegativeTable::new(
            &(0..vocab.len()).map(|w| vocab.frequency(w)).collect::<Vec<_>>(),
        ))
    };

    let planned_total: u64 =
        config.epochs as u64 * doc_tokens.iter().map(|t| t.len() as u64).sum::<u64>();
    let mut processed = 0u64;
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for _epoch in 0..config.epochs {
        let mut loss_sum = 0.0;
        let mut pair_count = 0u64;
        for (d, toks) in doc_tokens.iter().enumerate() {
            if toks.is_empty() {
                continue;
            }
            let kept: Vec<usize> = toks
                .iter()
                .copied()
                .filter(|&w| keep_prob[w] >= 1.0 || rng.gen::<f64>() < keep_prob[w])
                .collect();
            let table = table.as_ref().expect("non-empty vocab when docs have tokens");
            for t in 0..kept.len() {
                let lr = if planned_total == 0 {
                    config.initial_lr
                } else {
                    let frac = processed as f64 / planned_total as f64;
                    (config.initial_lr + (config.min_lr - config.initial_lr) * frac)
                        .max(config.min_lr)
                };
                processed += 1;

                let span_end = (t + config.window).min(kept.len());
                let target = kept[rng.gen_range(t..span_end)];
                loss_sum += train_pair(
                    &mut doc_vecs[d * dim..(d + 1) * dim],
                    &mut word_vecs,
                    dim,
                    target,
                    table,
                    config.negatives,
                    lr,
                    &mut rng,
                );
                pair_count += 1;
            }
        }
        epoch_losses.push(if pair_count == 0 {
            0.0
        } else {
            loss_sum / pair_count as f64
        });
    }

    let embeddings = EmbeddingStore::from_rows(
        dim,
        corpus.iter().enumerate().map(|(d, &(id, _))| {
            let row: Vec<f32> = doc_vecs[d * dim..(d + 1) * dim]
                .iter()
                .map(|&v| v as f32)
                .collect();
            (id, row)
        }),
    )?;
    Ok(PvDbowResult {
        embeddings,
        epoch_losses,
        skipped_docs,
    })
}

/// One SGD step on a (document, target word) pair with sampled negatives.
/// Returns the pair loss before the update.
#[allow(clippy::too_many_arguments)]
fn train_pair(
    doc_vec: &mut [f64],
    word_vecs: &mut [f64],
    dim: usize,
    target: usize,
    table: &NegativeTable,
    negatives: usize,
    lr: f64,
    rng: &mut ChaCha8Rng,
) -> f64 {
    let mut loss = 0.0;
    let mut doc_delta = vec![0.0; dim];

    // positive pair
    {
        let word = &mut word_vecs[target * dim..(target + 1) * dim];
        let d = dot(doc_vec, word);
        loss += softplus(-d);
        let coeff = sigmoid(d) - 1.0;
        for i in 0..dim {
            doc_delta[i] += coeff * word[i];
            word[i] -= lr * coeff * doc_vec[i];
        }
    }
    // negatives drawn from the unigram^0.75 table, skipping the target
    for _ in 0..negatives {
        let neg = table.sample(rng);
        if neg == target {
            continue;
        }
        let word = &mut word_vecs[neg * dim..(neg + 1) * dim];
        let d = dot(doc_vec, word);
        loss += softplus(d);
        let coeff = sigmoid(d);
        for i in 0..dim {
            doc_delta[i] += coeff * word[i];
            word[i] -= lr * coeff * doc_vec[i];
        }
    }
    for i in 0..dim {
        doc_vec[i] -= lr * doc_delta[i];
    }
    loss
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenize_splits_on_punctuation() {
        assert_eq!(tokenize("Hello, World!"), vec!["hello", "world"]);
    }

    #[test]
    fn tokenize_empty() {
        assert!(tokenize("").is_empty());
    }

    #[test]
    fn tokenize_separator_rule() {
        assert_eq!(
            tokenize("GCN-based 2-layer"),
            vec!["gcn", "based", "2", "layer"]
        );
    }

    fn toks(words: &[&str]) -> Vec<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn vocab_min_count_filter() {
        let doc = toks(&["a", "a", "b"]);
        let v = build_vocab([doc.as_slice()], 2);
        assert_eq!(v.len(), 1);
        assert_eq!(v.get("a"), Some(0));
        assert_eq!(v.get("b"), None);
        assert_eq!(v.total_token_count(), 3);
    }

    #[test]
    fn vocab_min_count_one_keeps_all() {
        let doc = toks(&["a", "b"]);
        let v = build_vocab([doc.as_slice()], 1);
        assert_eq!(v.len(), 2);
    }

    #[test]
    fn vocab_ties_break_lexicographically() {
        let doc = toks(&["beta", "alpha", "gamma"]);
        let v = build_vocab([doc.as_slice()], 1);
        assert_eq!(v.token(0), "alpha");
        assert_eq!(v.token(1), "beta");
        assert_eq!(v.token(2), "gamma");
    }

    fn corpus_of(texts: &[&str]) -> Vec<(ArticleId, String)> {
        texts
            .iter()
            .enumerate()
            .map(|(i, t)| (ArticleId(i as u64), t.to_string()))
            .collect()
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let corpus = corpus_of(&["a b c d", "c d e f"]);
        let cfg = PvDbowConfig {
            dim: 8,
            epochs: 0,
            min_count: 1,
            ..Default::default()
        };
        let r1 = train_pvdbow(&corpus, &cfg).unwrap();
        let r2 = train_pvdbow(&corpus, &cfg).unwrap();
        assert_eq!(r1.embeddings, r2.embeddings);
        let bound = 0.5 / 8.0 + 1e-9;
        for (_, row) in r1.embeddings.iter() {
            assert!(row.iter().all(|&v| (v as f64).abs() <= bound));
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let corpus = corpus_of(&["a b c a b", "b c d d", "a d c b"]);
        let cfg = PvDbowConfig {
            dim: 8,
            epochs: 3,
            min_count: 1,
            ..Default::default()
        };
        let r1 = train_pvdbow(&corpus, &cfg).unwrap();
        let r2 = train_pvdbow(&corpus, &cfg).unwrap();
        assert_eq!(r1.embeddings, r2.embeddings);
        assert_eq!(r1.epoch_losses, r2.epoch_losses);
    }

    #[test]
    fn loss_decreases_over_epochs() {
        let mut rng = stream_rng(5, &[4]);
        let mut corpus = Vec::new();
        for d in 0..40u64 {
            let prefix = if d < 20 { "cat" } else { "dog" };
            let text: Vec<String> = (0..30)
                .map(|_| format!("{prefix}{}", rng.gen_range(0..12)))
                .collect();
            corpus.push((ArticleId(d), text.join(" ")));
        }
        let cfg = PvDbowConfig {
            dim: 16,
            epochs: 8,
            min_count: 1,
            subsample_threshold: 1.0,
            ..Default::default()
        };
        let r = train_pvdbow(&corpus, &cfg).unwrap();
        assert!(r.epoch_losses.last().unwrap() < r.epoch_losses.first().unwrap());
    }

    #[test]
    fn oov_docs_stay_at_initialization() {
        // "zzz" occurs once and min_count=2 filters it out
        let corpus = corpus_of(&["a b a b a b", "zzz"]);
        let cfg = PvDbowConfig {
            dim: 4,
            epochs: 2,
            min_count: 2,
            subsample_threshold: 1.0,
            ..Default::default()
        };
        let trained = train_pvdbow(&corpus, &cfg).unwrap();
        assert_eq!(trained.skipped_docs, 1);
        let init = train_pvdbow(
            &corpus,
            &PvDbowConfig {
                epochs: 0,
                ..cfg.clone()
            },
        )
        .unwrap();
        assert_eq!(
            trained.embeddings.get(ArticleId(1)),
            init.embeddings.get(ArticleId(1))
        );
        assert_ne!(
            trained.embeddings.get(ArticleId(0)),
            init.embeddings.get(ArticleId(0))
        );
    }

    fn cosine(a: &[f32], b: &[f32]) -> f64 {
        let dot: f64 = a.iter().zip(b).map(|(&x, &y)| x as f64 * y as f64).sum();
        let na: f64 = a.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|&x| (x as f64).powi(2)).sum::<f64>().sqrt();
        dot / (na * nb)
    }

    #[test]
    fn two_topic_corpus_separates() {
        // two disjoint vocabularies, 100 docs each
        let mut rng = stream_rng(7, &[1]);
        let topic_a: Vec<String> = (0..30).map(|i| format!("alpha{i}")).collect();
        let topic_b: Vec<String> = (0..30).map(|i| format!("beta{i}")).collect();
        let mut corpus = Vec::new();
        for d in 0..200 {
            let vocab = if d < 100 { &topic_a } else { &topic_b };
            let text: Vec<String> = (0..40)
                .map(|_| vocab[rng.gen_range(0..vocab.len())].clone())
                .collect();
            corpus.push((ArticleId(d as u64), text.join(" ")));
        }
        let cfg = PvDbowConfig {
            dim: 24,
            epochs: 10,
            min_count: 1,
            initial_lr: 0.05,
            subsample_threshold: 1.0,
            seed: 3,
            ..Default::default()
        };
        let r = train_pvdbow(&corpus, &cfg).unwrap();

        let rows: Vec<&[f32]> = (0..200)
            .map(|d| r.embeddings.get(ArticleId(d as u64)).unwrap())
            .collect();
        let mut intra = Vec::new();
        let mut inter = Vec::new();
        for i in 0..200 {
            for j in (i + 1)..200 {
                let c = cosine(rows[i], rows[j]);
                if (i < 100) == (j < 100) {
                    intra.push(c);
                } else {
                    inter.push(c);
                }
            }
        }
        let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
        assert!(
            mean(&intra) > mean(&inter),
            "intra {} should exceed inter {}",
            mean(&intra),
            mean(&inter)
        );
    }

    #[test]
    fn pair_loss_gradients_match_finite_differences() {
        let mut rng = stream_rng(11, &[2]);
        for _ in 0..20 {
            let dim = rng.gen_range(2..6);
            let n_negs = rng.gen_range(1..4);
            let doc: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let target: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let negs: Vec<Vec<f64>> = (0..n_negs)
                .map(|_| (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
                .collect();
            let neg_refs: Vec<&[f64]> = negs.iter().map(Vec::as_slice).collect();
            let (_, grad_doc, grad_target, grad_negs) =
                pair_loss_grads(&doc, &target, &neg_refs);

            let eps = 1e-4;
            let check = |analytic: f64, plus: f64, minus: f64| {
                let fd = (plus - minus) / (2.0 * eps);
                let denom = analytic.abs().max(fd.abs());
                assert!(
                    denom < 1e-8 || ((analytic - fd) / denom).abs() < 1e-4,
                    "grad mismatch: analytic {analytic}, fd {fd}"
                );
            };
            for i in 0..dim {
                let mut d = doc.clone();
                d[i] += eps;
                let plus = pair_loss(&d, &target, &neg_refs);
                d[i] -= 2.0 * eps;
                let minus = pair_loss(&d, &target, &neg_refs);
                check(grad_doc[i], plus, minus);

                let mut t = target.clone();
                t[i] += eps;
                let plus = pair_loss(&doc, &t, &neg_refs);
                t[i] -= 2.0 * eps;
                let minus = pair_loss(&doc, &t, &neg_refs);
                check(grad_target[i], plus, minus);
            }
            for (n, neg) in negs.iter().enumerate() {
                for i in 0..dim {
                    let mut altered = negs.clone();
                    altered[n][i] += eps;
                    let refs: Vec<&[f64]> = altered.iter().map(Vec::as_slice).collect();
                    let plus = pair_loss(&doc, &target, &refs);
                    altered[n][i] = neg[i] - eps;
                    let refs: Vec<&[f64]> = altered.iter().map(Vec::as_slice).collect();
                    let minus = pair_loss(&doc, &target, &refs);
                    check(grad_negs[n][i], plus, minus);
                }
            }
        }
    }

    #[test]
    fn negative_table_matches_unigram_power() {
        // chi-square sanity check at 1e5 draws
        let freqs: Vec<u64> = vec![500, 300, 100, 50, 20, 10, 5, 5, 5, 5];
        let table = NegativeTable::new(&freqs);
        let mut rng = stream_rng(99, &[3]);
        let draws = 100_000usize;
        let mut counts = vec![0u64; freqs.len()];
        for _ in 0..draws {
            counts[table.sample(&mut rng)] += 1;
        }
        let mut chi2 = 0.0;
        for (i, &obs) in counts.iter().enumerate() {
            let expected = table.probability(i) * draws as f64;
            chi2 += (obs as f64 - expected).powi(2) / expected;
        }
        // dof = 9; 99.9th percentile is about 27.9
        assert!(chi2 < 30.0, "chi-square too large: {chi2}");
    }

    #[test]
    fn empty_corpus_is_error() {
        assert!(train_pvdbow(&[], &PvDbowConfig::default()).is_err());
    }
}
