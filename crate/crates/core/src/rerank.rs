//! Post-processing of suggestion lists with curated domain rules.
//!
//! Suggestions whose label contains a token that is antonymous to a token of
//! the customer name are moved behind all others; suggestions sharing a
//! keyword with the customer name are then moved in front of all others.
//! Both moves are stable partitions, so the rewarded block always leads.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::{self, File};
use std::io::{BufRead, BufReader};
use std::path::Path;

use crate::classifiers::RankedPredictions;
use crate::error::{Error, Result};
use crate::preprocess::{tokenize_raw, TokenSequence};

/// Customer-side trigger token → library-side tokens that must not co-occur with it.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AntonymTable(BTreeMap<String, Vec<String>>);

impl AntonymTable {
    pub fn from_pairs<I, K, V, S>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut table: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (trigger, forbidden) in pairs {
            let trigger = trigger.into();
            check_token(&trigger)?;
            let entry = table.entry(trigger.clone()).or_default();
            for f in forbidden {
                let f = f.into();
                check_token(&f)?;
                if f == trigger {
                    return Err(Error::InvalidArgument(format!(
                        "antonym entry `{trigger}` lists itself"
                    )));
                }
                if !entry.contains(&f) {
                    entry.push(f);
                }
            }
        }
        Ok(AntonymTable(table))
    }

    /// Parses a JSON object mapping each token to an array of forbidden tokens.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: BTreeMap<String, Vec<String>> = serde_json::from_str(text)?;
        Self::from_pairs(raw)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.0).expect("string map serializes")
    }

    pub fn forbidden_for(&self, trigger: &str) -> &[String] {
        self.0.get(trigger).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Forbidden words triggered by a customer token sequence.
    pub fn forbidden_words(&self, customer: &TokenSequence) -> BTreeSet<&str> {
        customer
            .iter()
            .flat_map(|t| self.forbidden_for(t))
            .map(String::as_str)
            .collect()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct KeywordSet(BTreeSet<String>);

impl KeywordSet {
    pub fn from_tokens<I, S>(tokens: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut set = BTreeSet::new();
        for t in tokens {
            let t = t.into();
            check_token(&t)?;
            set.insert(t);
        }
        Ok(KeywordSet(set))
    }

    /// One token per line; blank lines skipped.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self> {
        let mut tokens = Vec::new();
        for line in reader.lines() {
            let line = line.map_err(|e| Error::io("<keywords>", e))?;
            let line = line.trim();
            if !line.is_empty() {
                tokens.push(line.to_owned());
            }
        }
        Self::from_tokens(tokens)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        Self::from_reader(BufReader::new(file))
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.contains(token)
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

fn check_token(token: &str) -> Result<()> {
    if token.is_empty() {
        return Err(Error::InvalidArgument("empty rule token".into()));
    }
    if token.chars().any(char::is_uppercase) {
        return Err(Error::InvalidArgument(format!(
            "rule token `{token}` must be lowercase"
        )));
    }
    Ok(())
}

/// Reorders `preds` in two stable passes: penalized entries to the back, then
/// rewarded entries to the front. Entries are never added, removed or rescored;
/// the per-entry `penalized` / `rewarded` flags are recomputed.
pub fn rerank(
    customer: &TokenSequence,
    preds: RankedPredictions,
    antonyms: &AntonymTable,
    keywords: &KeywordSet,
) -> RankedPredictions {
    let forbidden = antonyms.forbidden_words(customer);
    let matched: BTreeSet<&str> = customer.iter().filter(|t| keywords.contains(t)).collect();

    let RankedPredictions {
        mut entries,
        fallback,
    } = preds;
    for entry in &mut entries {
        let label_tokens = tokenize_raw(&entry.label);
        entry.penalized = label_tokens.iter().any(|t| forbidden.contains(t));
        entry.rewarded = label_tokens.iter().any(|t| matched.contains(t));
    }

    let (mut kept, penalized): (Vec<_>, Vec<_>) = entries.into_iter().partition(|e| !e.penalized);
    kept.extend(penalized);
    let (mut front, rest): (Vec<_>, Vec<_>) = kept.into_iter().partition(|e| e.rewarded);
    front.extend(rest);

    RankedPredictions {
        entries: front,
        fallback,
    }
}
