//! Metrics, end-to-end evaluation runs, learning curves and runtime benchmarks.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::classifiers::{Method, Model, RankedPredictions, TrainConfig};
use crate::data::{split_by_project, Dataset, SignalLibrary};
use crate::error::{Error, Result};
use crate::preprocess::{clean, normalize, tokenize_raw, CleanStats};
use crate::rerank::{rerank, AntonymTable, KeywordSet};

/// Fraction of queries whose truth is among the first `k` entries.
pub fn top_k_accuracy(results: &[(RankedPredictions, String)], k: usize) -> Result<f64> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    if results.is_empty() {
        return Err(Error::InvalidArgument("no evaluation results".into()));
    }
    let hits = results
        .iter()
        .filter(|(preds, truth)| preds.entries.iter().take(k).any(|e| &e.label == truth))
        .count();
    Ok(hits as f64 / results.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedPrf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Support-weighted precision, recall and F1 of top-1 predictions.
///
/// Per-label scores are one-vs-rest and averaged over the labels present in
/// the truth column, each weighted by its support. A label never predicted has
/// precision 0; a missing prediction (`None`) counts against recall only.
pub fn weighted_prf(results: &[(Option<String>, String)]) -> Result<WeightedPrf> {
    if results.is_empty() {
        return Err(Error::InvalidArgument("no evaluation results".into()));
    }
    #[derive(Default)]
    struct Tally {
        support: u64,
        predicted: u64,
        correct: u64,
    }
    let mut tallies: BTreeMap<&str, Tally> = BTreeMap::new();
    for (pred, truth) in results {
        let t = tallies.entry(truth.as_str()).or_default();
        t.support += 1;
        if pred.as_deref() == Some(truth.as_str()) {
            t.correct += 1;
        }
        if let Some(p) = pred {
            tallies.entry(p.as_str()).or_default().predicted += 1;
        }
    }

    let n = results.len() as f64;
    let (mut precision, mut recall, mut f1) = (0.0, 0.0, 0.0);
    for t in tallies.values().filter(|t| t.support > 0) {
        let (p, r, f) = label_scores(t.correct, t.predicted, t.support);
        let w = t.support as f64;
        precision += w * p;
        recall += w * r;
        f1 += w * f;
    }
    Ok(WeightedPrf {
        precision: precision / n,
        recall: recall / n,
        f1: f1 / n,
    })
}

/// One-vs-rest precision, recall and F1 from true positives, predicted count and support.
pub fn label_scores(correct: u64, predicted: u64, support: u64) -> (f64, f64, f64) {
    let p = if predicted == 0 {
        0.0
    } else {
        correct as f64 / predicted as f64
    };
    let r = if support == 0 {
        0.0
    } else {
        correct as f64 / support as f64
    };
    let f = if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    };
    (p, r, f)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalConfig {
    /// Length of every suggestion list.
    pub k: usize,
    pub test_fraction: f64,
    pub seed: u64,
    pub rerank: bool,
    pub train: TrainConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            k: 10,
            test_fraction: 0.2,
            seed: 7,
            rerank: true,
            train: TrainConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopK {
    pub k: usize,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub method: Method,
    pub seed: u64,
    pub k: usize,
    pub reranked: bool,
    pub n_train_projects: usize,
    pub n_test_projects: usize,
    pub n_train_pairs: usize,
    pub n_queries: usize,
    pub train_cleaning: CleanStats,
    pub test_cleaning: CleanStats,
    pub accuracy: f64,
    /// Ascending in `k`, from 1 up to the list length.
    pub top_k_accuracy: Vec<TopK>,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    /// Queries answered with the label-frequency fallback.
    pub fallback_queries: usize,
    /// Queries that received no suggestion at all.
    pub empty_predictions: usize,
    pub notes: Vec<String>,
}

impl EvalReport {
    pub fn top_k(&self, k: usize) -> Option<f64> {
        self.top_k_accuracy
            .iter()
            .find(|t| t.k == k)
            .map(|t| t.accuracy)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Plain-text summary table.
    pub fn render_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "method            {}", self.method);
        let _ = writeln!(
            out,
            "projects          {} train / {} test",
            self.n_train_projects, self.n_test_projects
        );
        let _ = writeln!(
            out,
            "pairs             {} train / {} test queries",
            self.n_train_pairs, self.n_queries
        );
        let _ = writeln!(out, "accuracy          {:.4}", self.accuracy);
        if let Some(top) = self.top_k_accuracy.last() {
            let _ = writeln!(out, "top-{:<2} accuracy   {:.4}", top.k, top.accuracy);
        }
        let _ = writeln!(out, "weighted F1       {:.4}", self.weighted_f1);
        let _ = writeln!(out, "weighted recall   {:.4}", self.weighted_recall);
        let _ = writeln!(out, "weighted prec.    {:.4}", self.weighted_precision);
        let _ = writeln!(out, "fallback queries  {}", self.fallback_queries);
        for note in &self.notes {
            let _ = writeln!(out, "note: {note}");
        }
        out
    }
}

/// Predicts every pair of `test` (optionally reranked) and pairs it with its
/// normalized truth label.
pub fn predict_all(
    model: &Model,
    test: &Dataset,
    antonyms: &AntonymTable,
    keywords: &KeywordSet,
    k: usize,
    apply_rerank: bool,
) -> Result<Vec<(RankedPredictions, String)>> {
    test.pairs()
        .iter()
        .map(|pair| {
            let mut preds = model.predict(&pair.customer_signal, k)?;
            if apply_rerank {
                preds = rerank(
                    &tokenize_raw(&pair.customer_signal),
                    preds,
                    antonyms,
                    keywords,
                );
            }
            Ok((preds, normalize(&pair.library_signal)))
        })
        .collect()
}

/// Project-wise split, cleaning, training, prediction and scoring.
pub fn run_eval(
    method: Method,
    ds: &Dataset,
    lib: &SignalLibrary,
    antonyms: &AntonymTable,
    keywords: &KeywordSet,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    let (train, test) = split_by_project(ds, cfg.test_fraction, cfg.seed)?;
    let (train_clean, train_stats) = clean(&train, lib);
    let (test_clean, test_stats) = clean(&test, lib);
    let model = Model::train(method, &train_clean, &cfg.train)?;
    let results = predict_all(&model, &test_clean, antonyms, keywords, cfg.k, cfg.rerank)?;
    let mut report = score(method, &results, cfg)?;
    report.n_train_projects = train.projects().len();
    report.n_test_projects = test.projects().len();
    report.n_train_pairs = train_clean.len();
    report.train_cleaning = train_stats;
    report.test_cleaning = test_stats;
    Ok(report)
}

fn score(
    method: Method,
    results: &[(RankedPredictions, String)],
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    if results.is_empty() {
        return Err(Error::InvalidArgument(
            "test split is empty after cleaning".into(),
        ));
    }
    let top_k_accuracy = (1..=cfg.k)
        .map(|k| {
            Ok(TopK {
                k,
                accuracy: top_k_accuracy(results, k)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let top1: Vec<(Option<String>, String)> = results
        .iter()
        .map(|(p, t)| (p.top().map(str::to_owned), t.clone()))
        .collect();
    let prf = weighted_prf(&top1)?;
    let fallback_queries = results.iter().filter(|(p, _)| p.fallback).count();
    let empty_predictions = results.iter().filter(|(p, _)| p.is_empty()).count();

    let mut notes = Vec::new();
    if empty_predictions == results.len() {
        notes.push("no test query received a suggestion".to_owned());
    }
    if fallback_queries > 0 {
        notes.push(format!(
            "{fallback_queries} queries had only unseen tokens and used the frequency fallback"
        ));
    }

    Ok(EvalReport {
        method,
        seed: cfg.seed,
        k: cfg.k,
        reranked: cfg.rerank,
        n_train_projects: 0,
        n_test_projects: 0,
        n_train_pairs: 0,
        n_queries: results.len(),
        train_cleaning: CleanStats::default(),
        test_cleaning: CleanStats::default(),
        accuracy: top_k_accuracy[0].accuracy,
        top_k_accuracy,
        weighted_precision: prf.precision,
        weighted_recall: prf.recall,
        weighted_f1: prf.f1,
        fallback_queries,
        empty_predictions,
        notes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub fraction: f64,
    pub n_train_projects: usize,
    pub accuracy: f64,
}

pub const DEFAULT_CURVE_FRACTIONS: [f64; 10] = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];

/// Accuracy on a fixed test split when training on growing, nested subsets of
/// the training projects.
pub fn learning_curve(
    method: Method,
    ds: &Dataset,
    lib: &SignalLibrary,
    antonyms: &AntonymTable,
    keywords: &KeywordSet,
    fractions: &[f64],
    cfg: &EvalConfig,
) -> Result<Vec<CurvePoint>> {
    if let Some(f) = fractions.iter().find(|f| !(**f > 0.0 && **f <= 1.0)) {
        return Err(Error::InvalidArgument(format!(
            "curve fraction {f} outside (0, 1]"
        )));
    }
    let (train, test) = split_by_project(ds, cfg.test_fraction, cfg.seed)?;
    let (test_clean, _) = clean(&test, lib);

    let mut order: Vec<String> = train.projects().iter().cloned().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1)));

    fractions
        .iter()
        .map(|&fraction| {
            let subset = nested_subset(&order, fraction)?;
            let (subset_train, _) = clean(&train.restrict_to(&subset), lib);
            let model = Model::train(method, &subset_train, &cfg.train)?;
            let results = predict_all(&model, &test_clean, antonyms, keywords, cfg.k, cfg.rerank)?;
            Ok(CurvePoint {
                fraction,
                n_train_projects: subset.len(),
                accuracy: top_k_accuracy(&results, 1)?,
            })
        })
        .collect()
}

/// The first `round(fraction × n)` projects of a fixed order, so smaller
/// fractions always give subsets of larger ones.
pub fn nested_subset(order: &[String], fraction: f64) -> Result<BTreeSet<String>> {
    let count = ((fraction * order.len() as f64) + 0.5).floor() as usize;
    if count == 0 {
        return Err(Error::InvalidArgument(format!(
            "fraction {fraction} of {} training projects selects none",
            order.len()
        )));
    }
    Ok(order[..count.min(order.len())].iter().cloned().collect())
}

/// `fraction,accuracy` CSV.
pub fn curve_to_csv(points: &[CurvePoint]) -> String {
    let mut out = String::from("fraction,accuracy\n");
    for p in points {
        let _ = writeln!(out, "{},{}", p.fraction, p.accuracy);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub method: Method,
    pub training_time_s: f64,
    pub mean_prediction_time_ms: f64,
    pub n_predictions: usize,
    pub model_size_bytes: usize,
}

pub const MIN_BENCH_PREDICTIONS: usize = 1000;

/// Wall-clock training time, mean single-threaded prediction latency over at
/// least [`MIN_BENCH_PREDICTIONS`] calls (cycling through `queries`) and the
/// serialized model size.
pub fn benchmark(
    method: Method,
    train: &Dataset,
    queries: &[String],
    k: usize,
    cfg: &TrainConfig,
) -> Result<BenchReport> {
    if queries.is_empty() {
        return Err(Error::InvalidArgument("no benchmark queries".into()));
    }
    let start = Instant::now();
    let model = Model::train(method, train, cfg)?;
    let training_time_s = start.elapsed().as_secs_f64();

    let n_predictions = queries.len().max(MIN_BENCH_PREDICTIONS);
    let start = Instant::now();
    for query in queries.iter().cycle().take(n_predictions) {
        std::hint::black_box(model.predict(query, k)?);
    }
    let mean_prediction_time_ms = start.elapsed().as_secs_f64() * 1e3 / n_predictions as f64;

    Ok(BenchReport {
        method,
        training_time_s,
        mean_prediction_time_ms,
        n_predictions,
        model_size_bytes: model.to_json().len(),
    })
}
