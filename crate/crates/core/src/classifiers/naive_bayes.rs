//! Multinomial naive Bayes over unigram token counts with Laplace smoothing.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{check_k, invalid, Prediction, RankedPredictions};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::preprocess::{ngrams, normalize, tokenize_raw};

pub const DEFAULT_ALPHA: f64 = 1.0;

type LabelId = u32;

#[derive(Debug, Clone, PartialEq)]
pub struct NaiveBayesModel {
    alpha: f64,
    labels: Vec<String>,
    class_prior_counts: Vec<u64>,
    class_token_totals: Vec<u64>,
    /// token → (label id, count), ascending by label id
    token_class_counts: HashMap<String, Vec<(LabelId, u64)>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ClassDocument {
    prior_count: u64,
    token_total: u64,
    token_counts: BTreeMap<String, u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct NaiveBayesDocument {
    format: String,
    alpha: f64,
    vocabulary: Vec<String>,
    classes: BTreeMap<String, ClassDocument>,
}

impl NaiveBayesModel {
    pub fn train(train: &Dataset, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "alpha must be positive, got {alpha}"
            )));
        }
        let mut priors: BTreeMap<String, u64> = BTreeMap::new();
        for pair in train.pairs() {
            *priors.entry(normalize(&pair.library_signal)).or_insert(0) += 1;
        }
        let labels: Vec<String> = priors.keys().cloned().collect();
        let ids: HashMap<&str, LabelId> = labels
            .iter()
            .enumerate()
            .map(|(i, l)| (l.as_str(), i as LabelId))
            .collect();

        let mut class_token_totals = vec![0u64; labels.len()];
        let mut counts: HashMap<String, BTreeMap<LabelId, u64>> = HashMap::new();
        for pair in train.pairs() {
            let label = ids[normalize(&pair.library_signal).as_str()];
            for (token, mult) in ngrams(&tokenize_raw(&pair.customer_signal), 1).iter() {
                *counts
                    .entry(token.to_owned())
                    .or_default()
                    .entry(label)
                    .or_insert(0) += u64::from(mult);
                class_token_totals[label as usize] += u64::from(mult);
            }
        }

        Ok(NaiveBayesModel {
            alpha,
            class_prior_counts: priors.into_values().collect(),
            labels,
            class_token_totals,
            token_class_counts: counts
                .into_iter()
                .map(|(t, c)| (t, c.into_iter().collect()))
                .collect(),
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn vocabulary_size(&self) -> usize {
        self.token_class_counts.len()
    }

    pub fn n_training_pairs(&self) -> u64 {
        self.class_prior_counts.iter().sum()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn label_id(&self, label: &str) -> Option<usize> {
        self.labels.binary_search_by(|l| l.as_str().cmp(label)).ok()
    }

    pub fn class_prior_count(&self, label: &str) -> u64 {
        self.label_id(label)
            .map_or(0, |i| self.class_prior_counts[i])
    }

    pub fn class_token_total(&self, label: &str) -> u64 {
        self.label_id(label)
            .map_or(0, |i| self.class_token_totals[i])
    }

    pub fn token_class_count(&self, token: &str, label: &str) -> u64 {
        let (Some(id), Some(list)) = (self.label_id(label), self.token_class_counts.get(token))
        else {
            return 0;
        };
        lookup_count(list, id as LabelId)
    }

    /// Log of the unnormalized posterior for every label, ascending by label.
    pub fn log_joint(&self, signal: &str) -> Vec<f64> {
        let bag = ngrams(&tokenize_raw(signal), 1);
        let known: Vec<(&Vec<(LabelId, u64)>, f64)> = bag
            .iter()
            .filter_map(|(t, m)| self.token_class_counts.get(t).map(|c| (c, f64::from(m))))
            .collect();
        let n_pairs = self.n_training_pairs() as f64;
        let smoothing = self.alpha * self.vocabulary_size() as f64;

        (0..self.labels.len())
            .map(|c| {
                let denominator = self.class_token_totals[c] as f64 + smoothing;
                let likelihood: f64 = known
                    .iter()
                    .map(|(counts, mult)| {
                        let n = lookup_count(counts, c as LabelId) as f64;
                        mult * ((n + self.alpha) / denominator).ln()
                    })
                    .sum();
                (self.class_prior_counts[c] as f64 / n_pairs).ln() + likelihood
            })
            .collect()
    }

    pub fn predict(&self, signal: &str, k: usize) -> Result<RankedPredictions> {
        check_k(k)?;
        if self.is_empty() {
            return Err(Error::EmptyModel);
        }
        let log_joint = self.log_joint(signal);
        let max = log_joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = log_joint.iter().map(|l| (l - max).exp()).collect();
        let evidence: f64 = weights.iter().sum();

        let mut order: Vec<usize> = (0..self.labels.len()).collect();
        order.sort_by(|&a, &b| log_joint[b].total_cmp(&log_joint[a]).then(a.cmp(&b)));
        Ok(RankedPredictions {
            entries: order
                .into_iter()
                .take(k)
                .map(|c| Prediction::new(self.labels[c].clone(), weights[c] / evidence))
                .collect(),
            fallback: false,
        })
    }

    pub(super) fn to_document(&self) -> Value {
        let mut classes: BTreeMap<String, ClassDocument> = self
            .labels
            .iter()
            .enumerate()
            .map(|(i, l)| {
                (
                    l.clone(),
                    ClassDocument {
                        prior_count: self.class_prior_counts[i],
                        token_total: self.class_token_totals[i],
                        token_counts: BTreeMap::new(),
                    },
                )
            })
            .collect();
        for (token, list) in &self.token_class_counts {
            for &(id, n) in list {
                classes
                    .get_mut(&self.labels[id as usize])
                    .expect("label ids index labels")
                    .token_counts
                    .insert(token.clone(), n);
            }
        }
        let vocabulary: BTreeSet<&String> = self.token_class_counts.keys().collect();
        serde_json::to_value(NaiveBayesDocument {
            format: super::Method::NaiveBayes.format_tag().into(),
            alpha: self.alpha,
            vocabulary: vocabulary.into_iter().cloned().collect(),
            classes,
        })
        .expect("naive Bayes document serializes")
    }

    pub(super) fn from_document(value: Value) -> Result<Self> {
        let doc: NaiveBayesDocument = serde_json::from_value(value)?;
        if !(doc.alpha > 0.0 && doc.alpha.is_finite()) {
            return Err(invalid("alpha must be positive"));
        }
        let vocabulary: BTreeSet<&String> = doc.vocabulary.iter().collect();
        if vocabulary.len() != doc.vocabulary.len() {
            return Err(invalid("duplicate vocabulary entries"));
        }
        let labels: Vec<String> = doc.classes.keys().cloned().collect();
        let mut priors = Vec::with_capacity(labels.len());
        let mut totals = Vec::with_capacity(labels.len());
        let mut counts: HashMap<String, Vec<(LabelId, u64)>> = HashMap::new();
        for (id, (label, class)) in doc.classes.iter().enumerate() {
            if class.prior_count == 0 {
                return Err(invalid(format!("class `{label}` has no training pairs")));
            }
            let sum: u64 = class.token_counts.values().sum();
            if sum != class.token_total {
                return Err(invalid(format!(
                    "class `{label}`: token_total {} differs from count sum {sum}",
                    class.token_total
                )));
            }
            for (token, &n) in &class.token_counts {
                if n == 0 || !vocabulary.contains(token) {
                    return Err(invalid(format!("class `{label}`: bad count for `{token}`")));
                }
                counts
                    .entry(token.clone())
                    .or_default()
                    .push((id as LabelId, n));
            }
            priors.push(class.prior_count);
            totals.push(class.token_total);
        }
        if counts.len() != vocabulary.len() {
            return Err(invalid("vocabulary lists tokens without counts"));
        }
        Ok(NaiveBayesModel {
            alpha: doc.alpha,
            labels,
            class_prior_counts: priors,
            class_token_totals: totals,
            token_class_counts: counts,
        })
    }
}

fn lookup_count(list: &[(LabelId, u64)], id: LabelId) -> u64 {
    list.binary_search_by_key(&id, |(l, _)| *l)
        .map_or(0, |i| list[i].1)
}
