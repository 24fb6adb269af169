//! Bagged token-vote classifier.
//!
//! Every n-gram `t` of a customer name votes for each label `c` it was seen
//! with during training, with weight `n(t, c) / n(t)`: the share of `t`'s
//! training occurrences that carried `c`. Votes of all n-grams of a query are
//! summed per label and normalized into a probability distribution.
//!
//! Because votes are added rather than multiplied, a single discriminative
//! token is enough to bring its label into the ranking even when every other
//! token of the query is unknown or points elsewhere.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{check_k, invalid, Prediction, RankedPredictions};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::preprocess::{ngrams, normalize, tokenize_raw, TokenBag};

/// Single tokens, 2-grams and 3-grams.
pub const DEFAULT_MAX_N: usize = 3;

type LabelId = u32;

#[derive(Debug, Clone, PartialEq, Eq)]
struct TokenEntry {
    /// n(t)
    total: u64,
    /// n(t, c) for every label with a nonzero count, ascending by label id.
    counts: Vec<(LabelId, u64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenVoteModel {
    max_n: usize,
    /// Sorted ascending, so label id order is lexicographic order.
    labels: Vec<String>,
    label_frequency: Vec<u64>,
    tokens: HashMap<String, TokenEntry>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TokenDocument {
    total: u64,
    counts: Vec<(LabelId, u64)>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TokenVoteDocument {
    format: String,
    max_n: usize,
    labels: Vec<String>,
    label_frequency: Vec<u64>,
    tokens: BTreeMap<String, TokenDocument>,
}

impl TokenVoteModel {
    /// Counts n-gram/label co-occurrences over a cleaned dataset.
    pub fn train(train: &Dataset, max_n: usize) -> Result<Self> {
        if max_n == 0 {
            return Err(Error::InvalidArgument("max_n must be at least 1".into()));
        }
        let mut frequency: BTreeMap<String, u64> = BTreeMap::new();
        for pair in train.pairs() {
            *frequency
                .entry(normalize(&pair.library_signal))
                .or_insert(0) += 1;
        }
        let labels: Vec<String> = frequency.keys().cloned().collect();
        let label_frequency: Vec<u64> = frequency.values().copied().collect();
        let ids: HashMap<&str, LabelId> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i as LabelId))
            .collect();

        let mut cooccurrence: HashMap<String, BTreeMap<LabelId, u64>> = HashMap::new();
        for pair in train.pairs() {
            let label = ids[normalize(&pair.library_signal).as_str()];
            let bag = ngrams(&tokenize_raw(&pair.customer_signal), max_n);
            for (token, mult) in bag.iter() {
                *cooccurrence
                    .entry(token.to_owned())
                    .or_default()
                    .entry(label)
                    .or_insert(0) += u64::from(mult);
            }
        }
        let tokens = cooccurrence
            .into_iter()
            .map(|(token, counts)| {
                let total = counts.values().sum();
                let counts = counts.into_iter().collect();
                (token, TokenEntry { total, counts })
            })
            .collect();

        Ok(TokenVoteModel {
            max_n,
            labels,
            label_frequency,
            tokens,
        })
    }

    pub fn max_n(&self) -> usize {
        self.max_n
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn n_tokens(&self) -> usize {
        self.tokens.len()
    }

    pub fn n_training_pairs(&self) -> u64 {
        self.label_frequency.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// n(t, c); zero for unknown pairs.
    pub fn count(&self, token: &str, label: &str) -> u64 {
        let Ok(id) = self.labels.binary_search_by(|l| l.as_str().cmp(label)) else {
            return 0;
        };
        self.tokens
            .get(token)
            .and_then(|e| {
                e.counts
                    .binary_search_by_key(&(id as LabelId), |(l, _)| *l)
                    .ok()
                    .map(|i| e.counts[i].1)
            })
            .unwrap_or(0)
    }

    /// n(t); zero for unknown tokens.
    pub fn token_total(&self, token: &str) -> u64 {
        self.tokens.get(token).map_or(0, |e| e.total)
    }

    /// Number of training pairs labelled `label`.
    pub fn label_frequency(&self, label: &str) -> u64 {
        self.labels
            .binary_search_by(|l| l.as_str().cmp(label))
            .map_or(0, |i| self.label_frequency[i])
    }

    pub fn known_tokens(&self) -> impl Iterator<Item = &str> {
        self.tokens.keys().map(String::as_str)
    }

    /// Vote weights `n(t, c) / n(t)` of one token. Empty for unseen tokens.
    pub fn token_vote(&self, token: &str) -> BTreeMap<String, f64> {
        let Some(entry) = self.tokens.get(token) else {
            return BTreeMap::new();
        };
        entry
            .counts
            .iter()
            .map(|&(id, n)| {
                (
                    self.labels[id as usize].clone(),
                    n as f64 / entry.total as f64,
                )
            })
            .collect()
    }

    /// Summed, unnormalized votes of a bag, ascending by label. Tokens are
    /// visited in bag order and each adds `multiplicity × n(t,c)/n(t)`.
    pub fn bag_votes(&self, bag: &TokenBag) -> Vec<(&str, f64)> {
        let mut acc = vec![0.0f64; self.labels.len()];
        let mut touched = vec![false; self.labels.len()];
        for (token, mult) in bag.iter() {
            let Some(entry) = self.tokens.get(token) else {
                continue;
            };
            let total = entry.total as f64;
            for &(id, n) in &entry.counts {
                acc[id as usize] += f64::from(mult) * (n as f64 / total);
                touched[id as usize] = true;
            }
        }
        acc.into_iter()
            .zip(touched)
            .enumerate()
            .filter(|(_, (_, t))| *t)
            .map(|(i, (v, _))| (self.labels[i].as_str(), v))
            .collect()
    }

    /// Full normalized distribution `P(c | x)` over labels with a positive vote,
    /// best first. Empty when every token of the query is unseen.
    pub fn posterior(&self, signal: &str) -> Vec<Prediction> {
        let bag = ngrams(&tokenize_raw(signal), self.max_n);
        let mut votes = self.bag_votes(&bag);
        let total: f64 = votes.iter().map(|(_, v)| v).sum();
        if total <= 0.0 {
            return Vec::new();
        }
        // rank on raw votes; dividing by the total could merge near-equal scores
        votes.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        votes
            .into_iter()
            .map(|(label, v)| Prediction::new(label, v / total))
            .collect()
    }

    pub fn predict(&self, signal: &str, k: usize) -> Result<RankedPredictions> {
        check_k(k)?;
        if self.is_empty() {
            return Err(Error::EmptyModel);
        }
        let mut entries = self.posterior(signal);
        if entries.is_empty() {
            return Ok(self.fallback(k));
        }
        entries.truncate(k);
        Ok(RankedPredictions {
            entries,
            fallback: false,
        })
    }

    /// The `k` most frequent training labels with score 0.
    fn fallback(&self, k: usize) -> RankedPredictions {
        let mut order: Vec<usize> = (0..self.labels.len()).collect();
        order.sort_by(|&a, &b| {
            self.label_frequency[b]
                .cmp(&self.label_frequency[a])
                .then(a.cmp(&b))
        });
        RankedPredictions {
            entries: order
                .into_iter()
                .take(k)
                .map(|i| Prediction::new(self.labels[i].clone(), 0.0))
                .collect(),
            fallback: true,
        }
    }

    pub(super) fn to_document(&self) -> Value {
        let tokens = self
            .tokens
            .iter()
            .map(|(t, e)| {
                (
                    t.clone(),
                    TokenDocument {
                        total: e.total,
                        counts: e.counts.clone(),
                    },
                )
            })
            .collect();
        serde_json::to_value(TokenVoteDocument {
            format: super::Method::TokenVote.format_tag().into(),
            max_n: self.max_n,
            labels: self.labels.clone(),
            label_frequency: self.label_frequency.clone(),
            tokens,
        })
        .expect("token-vote document serializes")
    }

    pub(super) fn from_document(value: Value) -> Result<Self> {
        let doc: TokenVoteDocument = serde_json::from_value(value)?;
        if doc.max_n == 0 {
            return Err(invalid("max_n must be at least 1"));
        }
        if doc.labels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(invalid("labels must be strictly ascending"));
        }
        if doc.labels.len() != doc.label_frequency.len() {
            return Err(invalid("labels and label_frequency differ in length"));
        }
        if doc.label_frequency.contains(&0) {
            return Err(invalid("label frequency of zero"));
        }
        let mut tokens = HashMap::with_capacity(doc.tokens.len());
        for (token, entry) in doc.tokens {
            if token.is_empty() || entry.counts.is_empty() {
                return Err(invalid("empty token or token without counts"));
            }
            if entry.counts.windows(2).any(|w| w[0].0 >= w[1].0)
                || entry
                    .counts
                    .iter()
                    .any(|&(id, n)| n == 0 || id as usize >= doc.labels.len())
            {
                return Err(invalid(format!("bad counts for token `{token}`")));
            }
            let sum: u64 = entry.counts.iter().map(|(_, n)| n).sum();
            if sum != entry.total {
                return Err(invalid(format!(
                    "token `{token}`: total {} differs from count sum {sum}",
                    entry.total
                )));
            }
            tokens.insert(
                token,
                TokenEntry {
                    total: entry.total,
                    counts: entry.counts,
                },
            );
        }
        Ok(TokenVoteModel {
            max_n: doc.max_n,
            labels: doc.labels,
            label_frequency: doc.label_frequency,
            tokens,
        })
    }
}
