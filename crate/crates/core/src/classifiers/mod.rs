//! Classifiers mapping a customer signal name to ranked library signal names.

mod lookup;
mod naive_bayes;
mod token_vote;

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};

pub use lookup::LookupModel;
pub use naive_bayes::{NaiveBayesModel, DEFAULT_ALPHA};
pub use token_vote::{TokenVoteModel, DEFAULT_MAX_N};

/// One suggested library signal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: String,
    pub score: f64,
    /// Set by reranking when the label contains a forbidden antonym.
    #[serde(default)]
    pub penalized: bool,
    /// Set by reranking when the label shares a keyword with the query.
    #[serde(default)]
    pub rewarded: bool,
}

impl Prediction {
    pub fn new(label: impl Into<String>, score: f64) -> Self {
        Prediction {
            label: label.into(),
            score,
            penalized: false,
            rewarded: false,
        }
    }
}

/// Suggestions ordered best first. `fallback` marks a ranking by global label
/// frequency, emitted when no query token was seen during training.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RankedPredictions {
    pub entries: Vec<Prediction>,
    pub fallback: bool,
}

impl RankedPredictions {
    pub fn top(&self) -> Option<&str> {
        self.entries.first().map(|e| e.label.as_str())
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|e| e.label.as_str())
    }

    /// 0-based rank of `label`, if present.
    pub fn rank_of(&self, label: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.label == label)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Score descending, then label ascending.
pub(crate) fn ranking_order(a: (&str, f64), b: (&str, f64)) -> Ordering {
    b.1.total_cmp(&a.1).then_with(|| a.0.cmp(b.0))
}

pub(crate) fn check_k(k: usize) -> Result<()> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lookup,
    #[serde(rename = "nb")]
    NaiveBayes,
    #[serde(rename = "tokvote")]
    TokenVote,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Lookup, Method::NaiveBayes, Method::TokenVote];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Lookup => "lookup",
            Method::NaiveBayes => "nb",
            Method::TokenVote => "tokvote",
        }
    }

    pub fn format_tag(self) -> &'static str {
        match self {
            Method::Lookup => "lookup-v1",
            Method::NaiveBayes => "nb-v1",
            Method::TokenVote => "tokvote-v1",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "lookup" => Ok(Method::Lookup),
            "nb" | "naive-bayes" => Ok(Method::NaiveBayes),
            "tokvote" | "token-vote" => Ok(Method::TokenVote),
            other => Err(Error::InvalidArgument(format!(
                "unknown method `{other}` (expected lookup, nb or tokvote)"
            ))),
        }
    }
}

/// Hyper-parameters shared by [`Model::train`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    /// Longest n-gram fed to the token-vote model.
    pub max_n: usize,
    /// Laplace smoothing constant of naive Bayes.
    pub alpha: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            max_n: DEFAULT_MAX_N,
            alpha: DEFAULT_ALPHA,
        }
    }
}

/// Any trained classifier.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    Lookup(LookupModel),
    NaiveBayes(NaiveBayesModel),
    TokenVote(TokenVoteModel),
}

impl Model {
    /// Trains on a cleaned dataset.
    pub fn train(method: Method, train: &Dataset, cfg: &TrainConfig) -> Result<Model> {
        Ok(match method {
            Method::Lookup => Model::Lookup(LookupModel::train(train)),
            Method::NaiveBayes => Model::NaiveBayes(NaiveBayesModel::train(train, cfg.alpha)?),
            Method::TokenVote => Model::TokenVote(TokenVoteModel::train(train, cfg.max_n)?),
        })
    }

    pub fn method(&self) -> Method {
        match self {
            Model::Lookup(_) => Method::Lookup,
            Model::NaiveBayes(_) => Method::NaiveBayes,
            Model::TokenVote(_) => Method::TokenVote,
        }
    }

    pub fn predict(&self, signal: &str, k: usize) -> Result<RankedPredictions> {
        match self {
            Model::Lookup(m) => m.predict(signal, k),
            Model::NaiveBayes(m) => m.predict(signal, k),
            Model::TokenVote(m) => m.predict(signal, k),
        }
    }

    pub fn n_labels(&self) -> usize {
        match self {
            Model::Lookup(m) => m.n_labels(),
            Model::NaiveBayes(m) => m.labels().len(),
            Model::TokenVote(m) => m.labels().len(),
        }
    }

    pub fn n_training_pairs(&self) -> u64 {
        match self {
            Model::Lookup(m) => m.n_training_pairs(),
            Model::NaiveBayes(m) => m.n_training_pairs(),
            Model::TokenVote(m) => m.n_training_pairs(),
        }
    }

    /// Versioned JSON document with sorted keys; equal models give equal bytes.
    pub fn to_json(&self) -> String {
        let value = match self {
            Model::Lookup(m) => m.to_document(),
            Model::NaiveBayes(m) => m.to_document(),
            Model::TokenVote(m) => m.to_document(),
        };
        // serde_json::Value keeps object keys in a BTreeMap, hence sorted
        serde_json::to_string(&value).expect("model document serializes")
    }

    /// Parses and validates a model document.
    pub fn from_json(text: &str) -> Result<Model> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        let tag = value
            .get("format")
            .and_then(|f| f.as_str())
            .ok_or_else(|| Error::InvalidModel("missing `format` tag".into()))?;
        let method = Method::ALL
            .into_iter()
            .find(|m| m.format_tag() == tag)
            .ok_or_else(|| Error::InvalidModel(format!("unknown format `{tag}`")))?;
        Ok(match method {
            Method::Lookup => Model::Lookup(LookupModel::from_document(value)?),
            Method::NaiveBayes => Model::NaiveBayes(NaiveBayesModel::from_document(value)?),
            Method::TokenVote => Model::TokenVote(TokenVoteModel::from_document(value)?),
        })
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Model> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Model::from_json(&text)
    }
}

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidModel(msg.into())
}
