//! Normalization, cleaning and tokenization of signal names.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, SignalLibrary};

/// Lowercases every cased character. Nothing else changes.
pub fn normalize(raw: &str) -> String {
    raw.to_lowercase()
}

/// Ordered base tokens of one signal name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenSequence(Vec<String>);

impl TokenSequence {
    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, token: &str) -> bool {
        self.0.iter().any(|t| t == token)
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

impl From<Vec<String>> for TokenSequence {
    fn from(tokens: Vec<String>) -> Self {
        TokenSequence(tokens.into_iter().filter(|t| !t.is_empty()).collect())
    }
}

impl<'a> FromIterator<&'a str> for TokenSequence {
    fn from_iter<I: IntoIterator<Item = &'a str>>(iter: I) -> Self {
        iter.into_iter()
            .map(str::to_owned)
            .collect::<Vec<_>>()
            .into()
    }
}

impl IntoIterator for TokenSequence {
    type Item = String;
    type IntoIter = std::vec::IntoIter<String>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.into_iter()
    }
}

/// Multiset of tokens and n-grams, each with a positive count.
///
/// Backed by an ordered map so iteration order (and therefore every sum taken
/// over a bag) is deterministic.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TokenBag(BTreeMap<String, u32>);

impl TokenBag {
    pub fn insert(&mut self, token: String) {
        if !token.is_empty() {
            *self.0.entry(token).or_insert(0) += 1;
        }
    }

    pub fn count(&self, token: &str) -> u32 {
        self.0.get(token).copied().unwrap_or(0)
    }

    /// Number of entries counted with multiplicity.
    pub fn total(&self) -> usize {
        self.0.values().map(|&c| c as usize).sum()
    }

    /// Number of distinct entries.
    pub fn distinct(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u32)> {
        self.0.iter().map(|(t, &c)| (t.as_str(), c))
    }
}

fn is_number(token: &str) -> bool {
    token.chars().all(char::is_numeric)
}

fn has_alphabetic(token: &str) -> bool {
    token.chars().any(char::is_alphabetic)
}

/// Splits a normalized name on runs of non-alphanumeric characters and applies
/// the number rule: a purely numeric token directly after a token containing a
/// letter is replaced by the merged token `"<previous> <number>"`.
///
/// ```
/// use signalmatch::preprocess::tokenize;
/// let seq = tokenize("dist. zone 2 trip");
/// assert_eq!(seq.tokens(), ["dist", "zone", "zone 2", "trip"]);
/// ```
pub fn tokenize(normalized: &str) -> TokenSequence {
    let mut out: Vec<String> = Vec::new();
    let mut previous: Option<&str> = None;
    for raw in normalized
        .split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
    {
        match previous {
            Some(prev) if is_number(raw) && has_alphabetic(prev) => {
                out.push(format!("{prev} {raw}"));
            }
            _ => out.push(raw.to_owned()),
        }
        previous = Some(raw);
    }
    TokenSequence(out)
}

/// Normalizes then tokenizes.
pub fn tokenize_raw(raw: &str) -> TokenSequence {
    tokenize(&normalize(raw))
}

/// Every contiguous run of `1..=max_n` base tokens, joined by single spaces.
pub fn ngrams(seq: &TokenSequence, max_n: usize) -> TokenBag {
    let tokens = seq.tokens();
    let mut bag = TokenBag::default();
    for n in 1..=max_n.min(tokens.len()) {
        for window in tokens.windows(n) {
            bag.insert(window.join(" "));
        }
    }
    bag
}

/// How many pairs each cleaning rule removed.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleanStats {
    pub not_in_library: usize,
    pub identical_names: usize,
}

impl CleanStats {
    pub fn removed(&self) -> usize {
        self.not_in_library + self.identical_names
    }
}

/// Drops pairs whose library name is not in `lib`, then pairs whose customer
/// and library names are identical after normalization. Survivor order is kept.
pub fn clean(ds: &Dataset, lib: &SignalLibrary) -> (Dataset, CleanStats) {
    let mut stats = CleanStats::default();
    let survivors = ds
        .pairs()
        .iter()
        .filter(|pair| {
            let library = normalize(&pair.library_signal);
            if !lib.contains(&library) {
                stats.not_in_library += 1;
                return false;
            }
            if normalize(&pair.customer_signal) == library {
                stats.identical_names += 1;
                return false;
            }
            true
        })
        .cloned()
        .collect();
    (Dataset::from_pairs(survivors), stats)
}
