//! Datasets of (customer signal, library signal) pairs: CSV I/O, the signal
//! library, project-wise train/test splitting and a synthetic corpus generator.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::normalize;
use crate::rerank::{AntonymTable, KeywordSet};

pub const PAIRS_HEADER: [&str; 3] = ["project_id", "customer_signal", "library_signal"];

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignalPair {
    pub project_id: String,
    pub customer_signal: String,
    pub library_signal: String,
}

impl SignalPair {
    pub fn new(
        project_id: impl Into<String>,
        customer_signal: impl Into<String>,
        library_signal: impl Into<String>,
    ) -> Self {
        SignalPair {
            project_id: project_id.into(),
            customer_signal: customer_signal.into(),
            library_signal: library_signal.into(),
        }
    }
}

/// Ordered pairs plus the set of projects they come from.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Dataset {
    pairs: Vec<SignalPair>,
    projects: BTreeSet<String>,
}

impl Dataset {
    pub fn from_pairs(pairs: Vec<SignalPair>) -> Self {
        let projects = pairs.iter().map(|p| p.project_id.clone()).collect();
        Dataset { pairs, projects }
    }

    pub fn pairs(&self) -> &[SignalPair] {
        &self.pairs
    }

    pub fn projects(&self) -> &BTreeSet<String> {
        &self.projects
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn into_pairs(self) -> Vec<SignalPair> {
        self.pairs
    }

    /// Pairs belonging to the given projects, in original order.
    pub fn restrict_to(&self, projects: &BTreeSet<String>) -> Dataset {
        Dataset::from_pairs(
            self.pairs
                .iter()
                .filter(|p| projects.contains(&p.project_id))
                .cloned()
                .collect(),
        )
    }

    pub fn extend(&mut self, pairs: impl IntoIterator<Item = SignalPair>) {
        for pair in pairs {
            self.projects.insert(pair.project_id.clone());
            self.pairs.push(pair);
        }
    }
}

/// Reads the pairs CSV format (header `project_id,customer_signal,library_signal`).
pub fn read_pairs<R: Read>(reader: R) -> Result<Dataset> {
    let mut csv = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_reader(reader);
    let mut records = csv.records();
    let header = match records.next() {
        Some(rec) => rec?,
        None => {
            return Err(Error::MissingHeader {
                expected: PAIRS_HEADER.join(","),
                found: String::new(),
            })
        }
    };
    if header.iter().ne(PAIRS_HEADER) {
        return Err(Error::MissingHeader {
            expected: PAIRS_HEADER.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut pairs = Vec::new();
    for rec in records {
        let rec = rec?;
        let row = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != 3 {
            return Err(Error::MalformedRow {
                row,
                message: format!("expected 3 columns, found {}", rec.len()),
            });
        }
        let pair = SignalPair::new(&rec[0], &rec[1], &rec[2]);
        if pair.project_id.is_empty() {
            return Err(Error::MalformedRow {
                row,
                message: "empty project_id".into(),
            });
        }
        if normalize(&pair.customer_signal).is_empty() {
            return Err(Error::MalformedRow {
                row,
                message: "empty customer_signal".into(),
            });
        }
        pairs.push(pair);
    }
    Ok(Dataset::from_pairs(pairs))
}

pub fn load_pairs(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_pairs(BufReader::new(file)).map_err(|e| match e {
        Error::Csv(inner) => Error::InvalidArgument(format!("{}: {inner}", path.display())),
        other => other,
    })
}

pub fn write_pairs<W: Write>(ds: &Dataset, writer: W) -> Result<()> {
    let mut csv = csv::Writer::from_writer(writer);
    csv.write_record(PAIRS_HEADER)?;
    for p in ds.pairs() {
        csv.write_record([&p.project_id, &p.customer_signal, &p.library_signal])?;
    }
    csv.flush().map_err(|e| Error::io("<pairs writer>", e))?;
    Ok(())
}

pub fn save_pairs(ds: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_pairs(ds, BufWriter::new(file))
}

/// The provider's set of normalized library signal names.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SignalLibrary {
    names: BTreeSet<String>,
}

impl SignalLibrary {
    pub fn from_names<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        SignalLibrary {
            names: names
                .into_iter()
                .map(|n| normalize(n.as_ref()))
                .filter(|n| !n.is_empty())
                .collect(),
        }
    }

    /// `name` must already be normalized.
    pub fn contains(&self, name: &str) -> bool {
        self.names.contains(name)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }
}

/// One signal per line; blank lines are ignored.
pub fn read_library<R: BufRead>(reader: R) -> Result<SignalLibrary> {
    let mut names = Vec::new();
    for line in reader.lines() {
        let line = line.map_err(|e| Error::io("<library>", e))?;
        let line = line.trim();
        if !line.is_empty() {
            names.push(line.to_owned());
        }
    }
    Ok(SignalLibrary::from_names(names))
}

pub fn load_library(path: impl AsRef<Path>) -> Result<SignalLibrary> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_library(BufReader::new(file)).map_err(|e| match e {
        Error::Io { source, .. } => Error::io(path, source),
        other => other,
    })
}

pub fn write_library<W: Write>(lib: &SignalLibrary, mut writer: W) -> Result<()> {
    for name in lib.iter() {
        writeln!(writer, "{name}").map_err(|e| Error::io("<library writer>", e))?;
    }
    writer.flush().map_err(|e| Error::io("<library writer>", e))
}

pub fn save_library(lib: &SignalLibrary, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_library(lib, BufWriter::new(file))
}

/// Number of test projects for a split: round-half-up, clamped to `[1, n - 1]`.
pub fn test_project_count(n_projects: usize, test_fraction: f64) -> usize {
    let raw = (test_fraction * n_projects as f64 + 0.5).floor() as usize;
    raw.clamp(1, n_projects.saturating_sub(1).max(1))
}

/// Partitions projects into train and test sides. No project spans both.
pub fn split_by_project(ds: &Dataset, test_fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "test fraction must lie in (0, 1), got {test_fraction}"
        )));
    }
    let n = ds.projects().len();
    if n < 2 {
        return Err(Error::TooFewProjects(n));
    }
    let mut projects: Vec<&String> = ds.projects().iter().collect();
    projects.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = test_project_count(n, test_fraction);
    let test: BTreeSet<String> = projects[..n_test].iter().map(|p| (*p).clone()).collect();
    let train: BTreeSet<String> = projects[n_test..].iter().map(|p| (*p).clone()).collect();
    Ok((ds.restrict_to(&train), ds.restrict_to(&test)))
}

/// Parameters of the synthetic corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_classes: usize,
    pub n_projects: usize,
    pub pairs_per_project: usize,
    pub vocab_size: usize,
    pub noise_rate: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    /// Roughly the size of a real mapping repository: 9000 pairs over 170 projects.
    fn default() -> Self {
        SynthConfig {
            n_classes: 400,
            n_projects: 170,
            pairs_per_project: 53,
            vocab_size: 2000,
            noise_rate: 0.0,
            seed: 7,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("n_classes", self.n_classes),
            ("n_projects", self.n_projects),
            ("pairs_per_project", self.pairs_per_project),
            ("vocab_size", self.vocab_size),
        ];
        if let Some((name, _)) = counts.iter().find(|(_, v)| *v == 0) {
            return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
        }
        if !(0.0..=1.0).contains(&self.noise_rate) {
            return Err(Error::InvalidArgument(format!(
                "noise_rate must lie in [0, 1], got {}",
                self.noise_rate
            )));
        }
        Ok(())
    }
}

/// Output of [`generate_synthetic`].
#[derive(Debug, Clone)]
pub struct SyntheticCorpus {
    pub dataset: Dataset,
    pub library: SignalLibrary,
    pub antonyms: AntonymTable,
    pub keywords: KeywordSet,
    /// The label each pair was generated from, before label noise.
    pub planted_labels: Vec<String>,
    /// Indicative tokens of every class label.
    pub class_tokens: BTreeMap<String, Vec<String>>,
}

impl SyntheticCorpus {
    /// Pairs whose emitted label differs from the planted one.
    pub fn corrupted_count(&self) -> usize {
        self.dataset
            .pairs()
            .iter()
            .zip(&self.planted_labels)
            .filter(|(pair, planted)| &pair.library_signal != *planted)
            .count()
    }
}

pub const PLANTED_UNDER: &str = "underfreq";
pub const PLANTED_OVER: &str = "overfreq";
pub const PLANTED_KEYWORD: &str = "interlocked";

const CONSONANTS: &[&str] = &[
    "b", "c", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];
const SEPARATORS: &[&str] = &[" ", "_", ".", ". "];
/// Phrasings remembered per class and reused across projects.
const MAX_VARIANTS: usize = 3;
const VARIANT_REUSE: f64 = 0.6;

#[derive(Debug, Clone, Copy)]
enum Casing {
    Lower,
    Upper,
    Title,
    Random,
}

fn synth_word(rng: &mut ChaCha8Rng) -> String {
    let syllables = rng.random_range(2..=3);
    (0..syllables)
        .map(|_| {
            let c = CONSONANTS.choose(rng).unwrap();
            let v = VOWELS.choose(rng).unwrap();
            format!("{c}{v}")
        })
        .collect()
}

/// Class tokens plus 1-3 distractors (some followed by a digit), shuffled.
fn fresh_phrasing(
    signature: &[String],
    distractors: &[String],
    rng: &mut ChaCha8Rng,
) -> Vec<String> {
    let mut units: Vec<String> = signature.to_vec();
    for _ in 0..rng.random_range(1..=3) {
        let d = distractors.choose(rng).unwrap();
        if rng.random_bool(0.2) {
            units.push(format!("{d} {}", rng.random_range(1..=4)));
        } else {
            units.push(d.clone());
        }
    }
    units.shuffle(rng);
    units
}

fn apply_casing(word: &str, casing: Casing, rng: &mut ChaCha8Rng) -> String {
    match casing {
        Casing::Lower => word.to_owned(),
        Casing::Upper => word.to_uppercase(),
        Casing::Title => {
            let mut chars = word.chars();
            match chars.next() {
                Some(first) => first.to_uppercase().chain(chars).collect(),
                None => String::new(),
            }
        }
        Casing::Random => word
            .chars()
            .map(|c| {
                if rng.random_bool(0.5) {
                    c.to_ascii_uppercase()
                } else {
                    c
                }
            })
            .collect(),
    }
}

/// Builds a labelled corpus where every class owns 1-3 indicative tokens.
///
/// Customer names are the class tokens plus 1-3 tokens from a small pool of
/// common distractor words (some followed by a digit) in shuffled order,
/// joined with a per-project separator and casing style. Each class keeps a
/// few phrasings that recur across projects, so whole-name lookups sometimes
/// hit. With probability `noise_rate` a pair's label is swapped for another
/// class. `underfreq`/`overfreq` and `interlocked` are planted in the first
/// classes so antonym and keyword reranking have something to act on.
/// Raw (customer, library) pairs are unique across the corpus whenever the
/// phrasing space allows it. The corpus is a pure function of `cfg`.
pub fn generate_synthetic(cfg: &SynthConfig) -> Result<SyntheticCorpus> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let reserved: HashSet<&str> = [PLANTED_UNDER, PLANTED_OVER, PLANTED_KEYWORD].into();
    let mut seen = HashSet::new();
    let mut vocab = Vec::with_capacity(cfg.vocab_size);
    while vocab.len() < cfg.vocab_size {
        let w = synth_word(&mut rng);
        if !reserved.contains(w.as_str()) && seen.insert(w.clone()) {
            vocab.push(w);
        }
    }

    let (distractors, indicative): (Vec<String>, Vec<String>) = if cfg.vocab_size < 2 {
        (vocab.clone(), vocab)
    } else {
        let n_distract = (cfg.vocab_size / 40).max(1);
        let indicative = vocab.split_off(n_distract);
        (vocab, indicative)
    };

    // class signatures: fresh indicative tokens while they last, then reuse
    let mut pool: Vec<&String> = indicative.iter().collect();
    pool.shuffle(&mut rng);
    let mut cursor = 0;
    let mut signatures: Vec<Vec<String>> = Vec::with_capacity(cfg.n_classes);
    let mut labels_seen = HashSet::new();
    for class in 0..cfg.n_classes {
        let mut attempt = 0;
        let tokens = loop {
            let n_tokens = rng.random_range(1..=3).min(indicative.len());
            let mut tokens: Vec<String> = Vec::with_capacity(n_tokens + 1);
            while tokens.len() < n_tokens {
                if cursor >= pool.len() {
                    pool.shuffle(&mut rng);
                    cursor = 0;
                }
                let t = pool[cursor];
                cursor += 1;
                if !tokens.contains(t) {
                    tokens.push(t.clone());
                }
            }
            if class == 0 {
                tokens.push(PLANTED_UNDER.to_owned());
            }
            if class == 1 % cfg.n_classes {
                tokens.push(PLANTED_OVER.to_owned());
            }
            if class == 2 % cfg.n_classes {
                tokens.push(PLANTED_KEYWORD.to_owned());
            }
            attempt += 1;
            if labels_seen.insert(tokens.join(" ")) {
                break tokens;
            }
            if attempt >= 100 {
                tokens.push(format!("v{class}"));
                labels_seen.insert(tokens.join(" "));
                break tokens;
            }
        };
        signatures.push(tokens);
    }
    let labels: Vec<String> = signatures.iter().map(|t| t.join(" ")).collect();

    let width = cfg.n_projects.to_string().len().max(3);
    let mut variants: Vec<Vec<Vec<String>>> = vec![Vec::new(); cfg.n_classes];
    let mut pairs = Vec::with_capacity(cfg.n_projects * cfg.pairs_per_project);
    let mut planted_labels = Vec::with_capacity(pairs.capacity());
    let mut unique = HashSet::new();
    for project in 0..cfg.n_projects {
        let project_id = format!("P{:0width$}", project + 1);
        let sep = *SEPARATORS.choose(&mut rng).unwrap();
        let casing = *[Casing::Lower, Casing::Upper, Casing::Title, Casing::Random]
            .choose(&mut rng)
            .unwrap();
        for _ in 0..cfg.pairs_per_project {
            let class = rng.random_range(0..cfg.n_classes);
            let mut label = class;
            if cfg.n_classes > 1 && rng.random_bool(cfg.noise_rate) {
                label = rng.random_range(0..cfg.n_classes - 1);
                if label >= class {
                    label += 1;
                }
            }

            let mut customer = String::new();
            for _attempt in 0..50 {
                let reuse = !variants[class].is_empty() && rng.random_bool(VARIANT_REUSE);
                let units = if reuse {
                    variants[class].choose(&mut rng).unwrap().clone()
                } else {
                    let units = fresh_phrasing(&signatures[class], &distractors, &mut rng);
                    if variants[class].len() < MAX_VARIANTS {
                        variants[class].push(units.clone());
                    }
                    units
                };
                customer = units
                    .iter()
                    .map(|u| {
                        u.split(' ')
                            .map(|w| apply_casing(w, casing, &mut rng))
                            .collect::<Vec<_>>()
                            .join(sep)
                    })
                    .collect::<Vec<_>>()
                    .join(sep);
                if unique.insert((customer.clone(), label)) {
                    break;
                }
            }
            pairs.push(SignalPair::new(
                project_id.clone(),
                customer,
                labels[label].clone(),
            ));
            planted_labels.push(labels[class].clone());
        }
    }

    let antonyms = AntonymTable::from_pairs([
        (PLANTED_UNDER, vec![PLANTED_OVER]),
        (PLANTED_OVER, vec![PLANTED_UNDER]),
    ])?;
    let keywords = KeywordSet::from_tokens([PLANTED_KEYWORD])?;
    let class_tokens = labels.iter().cloned().zip(signatures).collect();

    Ok(SyntheticCorpus {
        dataset: Dataset::from_pairs(pairs),
        library: SignalLibrary::from_names(&labels),
        antonyms,
        keywords,
        planted_labels,
        class_tokens,
    })
}
