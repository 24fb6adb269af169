use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::{check_k, invalid, ranking_order, Prediction, RankedPredictions};
use crate::data::Dataset;
use crate::error::Result;
use crate::preprocess::normalize;

/// Whole-name lookup table: normalized customer name → library names seen
/// with it, most frequent first.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LookupModel {
    table: BTreeMap<String, Vec<(String, u64)>>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct LookupDocument {
    format: String,
    table: BTreeMap<String, Vec<(String, u64)>>,
}

impl LookupModel {
    pub fn train(train: &Dataset) -> Self {
        let mut counts: HashMap<String, HashMap<String, u64>> = HashMap::new();
        for pair in train.pairs() {
            *counts
                .entry(normalize(&pair.customer_signal))
                .or_default()
                .entry(normalize(&pair.library_signal))
                .or_insert(0) += 1;
        }
        let table = counts
            .into_iter()
            .map(|(key, labels)| {
                let mut list: Vec<(String, u64)> = labels.into_iter().collect();
                sort_entries(&mut list);
                (key, list)
            })
            .collect();
        LookupModel { table }
    }

    /// Stored candidates for an already normalized customer name.
    pub fn candidates(&self, key: &str) -> Option<&[(String, u64)]> {
        self.table.get(key).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn n_labels(&self) -> usize {
        let mut labels: Vec<&str> = self
            .table
            .values()
            .flatten()
            .map(|(l, _)| l.as_str())
            .collect();
        labels.sort_unstable();
        labels.dedup();
        labels.len()
    }

    pub fn n_training_pairs(&self) -> u64 {
        self.table.values().flatten().map(|(_, c)| c).sum()
    }

    /// Unknown names give an empty, non-fallback list.
    pub fn predict(&self, signal: &str, k: usize) -> Result<RankedPredictions> {
        check_k(k)?;
        let entries = self
            .table
            .get(&normalize(signal))
            .map(|list| {
                list.iter()
                    .take(k)
                    .map(|(label, count)| Prediction::new(label.clone(), *count as f64))
                    .collect()
            })
            .unwrap_or_default();
        Ok(RankedPredictions {
            entries,
            fallback: false,
        })
    }

    pub(super) fn to_document(&self) -> Value {
        serde_json::to_value(LookupDocument {
            format: super::Method::Lookup.format_tag().into(),
            table: self.table.clone(),
        })
        .expect("lookup document serializes")
    }

    pub(super) fn from_document(value: Value) -> Result<Self> {
        let doc: LookupDocument = serde_json::from_value(value)?;
        for (key, list) in &doc.table {
            if list.is_empty() {
                return Err(invalid(format!("lookup key `{key}` has no labels")));
            }
            if list.iter().any(|(_, c)| *c == 0) {
                return Err(invalid(format!("lookup key `{key}` has a zero count")));
            }
            let mut sorted = list.clone();
            sort_entries(&mut sorted);
            sorted.dedup_by(|a, b| a.0 == b.0);
            if &sorted != list {
                return Err(invalid(format!(
                    "lookup key `{key}` is not sorted or has duplicates"
                )));
            }
        }
        Ok(LookupModel { table: doc.table })
    }
}

fn sort_entries(list: &mut [(String, u64)]) {
    list.sort_by(|a, b| ranking_order((&a.0, a.1 as f64), (&b.0, b.1 as f64)));
}
