//! Brute-force oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use rand::seq::IndexedRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use signalmatch::data::{generate_synthetic, Dataset, SynthConfig, SyntheticCorpus};
use signalmatch::preprocess::{ngrams, normalize, tokenize_raw, TokenBag};

pub fn corpus(cfg: SynthConfig) -> SyntheticCorpus {
    generate_synthetic(&cfg).expect("valid config")
}

pub fn small_config(seed: u64) -> SynthConfig {
    SynthConfig {
        n_classes: 60,
        n_projects: 20,
        pairs_per_project: 40,
        vocab_size: 400,
        noise_rate: 0.1,
        seed,
    }
}

/// Token-vote ranking computed the slow way: every (query token, label) pair
/// is scored by rescanning all training bags. Returns labels with a positive
/// vote, best first, with their normalized probability.
pub struct TokenVoteOracle {
    bags: Vec<(TokenBag, String)>,
    labels: Vec<String>,
    max_n: usize,
}

impl TokenVoteOracle {
    pub fn new(train: &Dataset, max_n: usize) -> Self {
        let bags: Vec<(TokenBag, String)> = train
            .pairs()
            .iter()
            .map(|p| {
                (
                    ngrams(&tokenize_raw(&p.customer_signal), max_n),
                    normalize(&p.library_signal),
                )
            })
            .collect();
        let mut labels: Vec<String> = bags.iter().map(|(_, l)| l.clone()).collect();
        labels.sort();
        labels.dedup();
        TokenVoteOracle {
            bags,
            labels,
            max_n,
        }
    }

    pub fn rank(&self, query: &str) -> Vec<(String, f64)> {
        let bag = ngrams(&tokenize_raw(query), self.max_n);
        let query_tokens: Vec<(&str, u32)> = bag.iter().collect();

        // n(t) and n(t, c) for every query token, by full scans
        let token_totals: Vec<u64> = query_tokens
            .iter()
            .map(|(t, _)| self.bags.iter().map(|(b, _)| u64::from(b.count(t))).sum())
            .collect();

        let mut votes: Vec<(String, f64)> = Vec::new();
        for label in &self.labels {
            let mut vote = 0.0f64;
            for (i, (token, mult)) in query_tokens.iter().enumerate() {
                if token_totals[i] == 0 {
                    continue;
                }
                let with_label: u64 = self
                    .bags
                    .iter()
                    .filter(|(_, l)| l == label)
                    .map(|(b, _)| u64::from(b.count(token)))
                    .sum();
                if with_label > 0 {
                    vote += f64::from(*mult) * (with_label as f64 / token_totals[i] as f64);
                }
            }
            if vote > 0.0 {
                votes.push((label.clone(), vote));
            }
        }
        let total: f64 = votes.iter().map(|(_, v)| v).sum();
        votes.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        votes.into_iter().map(|(l, v)| (l, v / total)).collect()
    }
}

/// Weighted precision / recall / F1 through an explicit confusion matrix.
pub fn confusion_matrix_prf(results: &[(Option<String>, String)]) -> (f64, f64, f64) {
    let mut labels: Vec<&str> = results
        .iter()
        .flat_map(|(p, t)| p.as_deref().into_iter().chain(std::iter::once(t.as_str())))
        .collect();
    labels.sort_unstable();
    labels.dedup();
    let idx = |l: &str| labels.binary_search(&l).unwrap();
    // last column collects missing predictions
    let none = labels.len();
    let mut matrix = vec![vec![0u64; labels.len() + 1]; labels.len()];
    for (p, t) in results {
        let col = p.as_deref().map_or(none, idx);
        matrix[idx(t)][col] += 1;
    }

    let n = results.len() as f64;
    let (mut wp, mut wr, mut wf) = (0.0, 0.0, 0.0);
    for (i, row) in matrix.iter().enumerate() {
        let support: u64 = row.iter().sum();
        if support == 0 {
            continue;
        }
        let tp = row[i];
        let predicted: u64 = matrix.iter().map(|r| r[i]).sum();
        let p = if predicted == 0 {
            0.0
        } else {
            tp as f64 / predicted as f64
        };
        let r = tp as f64 / support as f64;
        let f = if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        };
        let w = support as f64;
        wp += w * p;
        wr += w * r;
        wf += w * f;
    }
    (wp / n, wr / n, wf / n)
}

/// Random customer name built from known class tokens, distractors and
/// occasionally unseen words, with random separators and casing.
pub fn random_query(rng: &mut ChaCha8Rng, corpus: &SyntheticCorpus) -> String {
    let classes: Vec<&Vec<String>> = corpus.class_tokens.values().collect();
    let mut words: Vec<String> = Vec::new();
    for _ in 0..rng.random_range(1..=3) {
        let class = classes.choose(rng).unwrap();
        words.push(class.choose(rng).unwrap().clone());
    }
    if rng.random_bool(0.3) {
        words.push(format!("unseen{}", rng.random_range(0..1000)));
    }
    if rng.random_bool(0.3) {
        words.push(rng.random_range(1..5).to_string());
    }
    let sep = *[" ", "_", ". "].choose(rng).unwrap();
    let joined = words.join(sep);
    if rng.random_bool(0.5) {
        joined.to_uppercase()
    } else {
        joined
    }
}

/// Random single-truth evaluation results over a small label alphabet.
pub fn random_results(
    rng: &mut ChaCha8Rng,
    n: usize,
    alphabet: usize,
) -> Vec<(Option<String>, String)> {
    (0..n)
        .map(|_| {
            let truth = format!("l{}", rng.random_range(0..alphabet));
            let pred = if rng.random_bool(0.1) {
                None
            } else {
                Some(format!("l{}", rng.random_range(0..alphabet + 2)))
            };
            (pred, truth)
        })
        .collect()
}
