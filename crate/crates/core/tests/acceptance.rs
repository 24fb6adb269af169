//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any criterion fails.

mod common;

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use signalmatch::classifiers::{Model, NaiveBayesModel, Prediction, TokenVoteModel, TrainConfig};
use signalmatch::data::{
    generate_synthetic, split_by_project, write_library, write_pairs, Dataset, SignalPair,
    SynthConfig,
};
use signalmatch::evaluate::{
    benchmark, learning_curve, run_eval, top_k_accuracy, weighted_prf, EvalConfig,
    DEFAULT_CURVE_FRACTIONS,
};
use signalmatch::preprocess::{clean, normalize, tokenize, tokenize_raw};
use signalmatch::rerank::rerank;
use signalmatch::{AntonymTable, KeywordSet, Method, RankedPredictions};

use common::{confusion_matrix_prf, random_query, random_results, TokenVoteOracle};

const SUM_TOLERANCE: f64 = 1e-9;
const NB_TOLERANCE: f64 = 1e-4;
const NOISELESS_TOP1_MIN: f64 = 0.95;
const CURVE_GAP_EXPECTED: f64 = 0.05;
const MAX_TRAINING_S: f64 = 60.0;
const MAX_PREDICTION_MS: f64 = 15.0;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

/// 10,000 pairs.
fn ten_k_config() -> SynthConfig {
    SynthConfig {
        n_projects: 200,
        pairs_per_project: 50,
        ..SynthConfig::default()
    }
}

fn tokenizer_golden() -> Outcome {
    let start = Instant::now();
    let rows: [(&str, &[&str]); 3] = [
        ("Dist. Zone 2 Trip", &["dist", "zone", "zone 2", "trip"]),
        (
            "CR&WEI Dist. Rev Log. Blocked",
            &["cr", "wei", "dist", "rev", "log", "blocked"],
        ),
        (
            "Block (B Inhibit) automatic control",
            &["block", "b", "inhibit", "automatic", "control"],
        ),
    ];
    for (raw, expected) in rows {
        let got = tokenize(&normalize(raw));
        ensure(got.tokens() == expected, || {
            format!("{raw:?} -> {:?}, expected {expected:?}", got.tokens())
        })?;
    }
    let elapsed = start.elapsed().as_secs_f64();
    ensure(elapsed < 1.0, || format!("took {elapsed:.3}s"))?;
    Ok(format!("3/3 rows exact in {:.1} ms", elapsed * 1e3))
}

fn vote_normalization() -> Outcome {
    let corpus = common::corpus(ten_k_config());
    ensure(corpus.dataset.len() == 10_000, || {
        format!("corpus has {} pairs", corpus.dataset.len())
    })?;
    let (train, _) = clean(&corpus.dataset, &corpus.library);
    let model = TokenVoteModel::train(&train, 3).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for token in model.known_tokens() {
        let sum: f64 = model.token_vote(token).values().sum();
        worst = worst.max((sum - 1.0).abs());
    }
    ensure(worst <= SUM_TOLERANCE, || {
        format!("max |sum - 1| = {worst:e}")
    })?;
    Ok(format!(
        "{} tokens, max |sum_c v(c|t) - 1| = {worst:e}",
        model.n_tokens()
    ))
}

fn posterior_normalization() -> Outcome {
    let corpus = common::corpus(SynthConfig::default());
    let (train, _) = clean(&corpus.dataset, &corpus.library);
    let model = TokenVoteModel::train(&train, 3).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(1000);
    let (mut checked, mut worst) = (0, 0.0f64);
    while checked < 1000 {
        let query = random_query(&mut rng, &corpus);
        let preds = model
            .predict(&query, model.labels().len())
            .map_err(|e| e.to_string())?;
        if preds.fallback {
            continue;
        }
        let sum: f64 = preds.entries.iter().map(|e| e.score).sum();
        worst = worst.max((sum - 1.0).abs());
        checked += 1;
    }
    ensure(worst <= SUM_TOLERANCE, || {
        format!("max |sum - 1| = {worst:e}")
    })?;
    Ok(format!("1000 queries, max |sum_c P(c|x) - 1| = {worst:e}"))
}

fn oracle_equivalence() -> Outcome {
    let corpus = common::corpus(SynthConfig {
        n_classes: 100,
        n_projects: 40,
        pairs_per_project: 50,
        vocab_size: 600,
        noise_rate: 0.1,
        seed: 5,
    });
    let (train, _) = clean(&corpus.dataset, &corpus.library);
    let model = TokenVoteModel::train(&train, 3).map_err(|e| e.to_string())?;
    let oracle = TokenVoteOracle::new(&train, 3);
    let mut rng = ChaCha8Rng::seed_from_u64(100);
    for i in 0..100 {
        let query = random_query(&mut rng, &corpus);
        let got: Vec<(String, f64)> = model
            .posterior(&query)
            .into_iter()
            .map(|p| (p.label, p.score))
            .collect();
        let expected = oracle.rank(&query);
        ensure(got == expected, || {
            format!("query #{i} {query:?}: ranking differs from brute force")
        })?;
    }
    Ok("100/100 random queries rank identically to the brute-force loop".into())
}

fn naive_bayes_hand_check() -> Outcome {
    let pairs = [("zone trip", "A"), ("zone block", "B"), ("trip", "A")];
    let ds = Dataset::from_pairs(
        pairs
            .iter()
            .map(|(c, l)| SignalPair::new("p", *c, *l))
            .collect(),
    );
    let model = NaiveBayesModel::train(&ds, 1.0).map_err(|e| e.to_string())?;
    let preds = model.predict("zone trip", 10).map_err(|e| e.to_string())?;
    let p_a = preds
        .entries
        .iter()
        .find(|e| e.label == "a")
        .map(|e| e.score)
        .ok_or("label A missing")?;

    // brute force with whitespace tokens, alpha = 1
    let vocab = ["zone", "trip", "block"];
    let joint = |label: &str| {
        let docs: Vec<&str> = pairs.iter().filter(|p| p.1 == label).map(|p| p.0).collect();
        let prior = docs.len() as f64 / pairs.len() as f64;
        let total: usize = docs.iter().map(|d| d.split_whitespace().count()).sum();
        ["zone", "trip"].iter().fold(prior, |acc, q| {
            let n = docs
                .iter()
                .flat_map(|d| d.split_whitespace())
                .filter(|t| t == q)
                .count();
            acc * (n as f64 + 1.0) / (total as f64 + vocab.len() as f64)
        })
    };
    let oracle = joint("A") / (joint("A") + joint("B"));
    ensure((oracle - 25.0 / 31.0).abs() < 1e-12, || {
        format!("oracle gave {oracle}")
    })?;
    ensure(preds.top() == Some("a"), || "top-1 is not A".into())?;
    ensure((p_a - oracle).abs() < NB_TOLERANCE, || {
        format!("P(A|x) = {p_a:.6}, oracle {oracle:.6}")
    })?;
    Ok(format!(
        "P(A|\"zone trip\") = {p_a:.6}, brute force {oracle:.6} (25/31)"
    ))
}

fn random_ranked(rng: &mut ChaCha8Rng, words: &[&str]) -> RankedPredictions {
    let n = rng.random_range(0..8);
    let mut entries: Vec<Prediction> = Vec::new();
    for i in 0..n {
        let n_words = rng.random_range(1..=3);
        let label: Vec<&str> = (0..n_words)
            .map(|_| words[rng.random_range(0..words.len())])
            .collect();
        entries.push(Prediction::new(
            format!("{} {i}x", label.join(" ")),
            rng.random(),
        ));
    }
    RankedPredictions {
        entries,
        fallback: false,
    }
}

fn rerank_properties() -> Outcome {
    let words = [
        "underfreq",
        "overfreq",
        "interlocked",
        "open",
        "closed",
        "trip",
        "alarm",
    ];
    let antonyms =
        AntonymTable::from_pairs([("underfreq", vec!["overfreq"]), ("open", vec!["closed"])])
            .map_err(|e| e.to_string())?;
    let keywords = KeywordSet::from_tokens(["interlocked", "trip"]).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(3);

    for case in 0..1000 {
        let customer: String = (0..rng.random_range(1..4))
            .map(|_| words[rng.random_range(0..words.len())])
            .collect::<Vec<_>>()
            .join(" ");
        let tokens = tokenize_raw(&customer);
        let input = random_ranked(&mut rng, &words);
        let out = rerank(&tokens, input.clone(), &antonyms, &keywords);

        let mut a: Vec<(String, u64)> = input
            .entries
            .iter()
            .map(|e| (e.label.clone(), e.score.to_bits()))
            .collect();
        let mut b: Vec<(String, u64)> = out
            .entries
            .iter()
            .map(|e| (e.label.clone(), e.score.to_bits()))
            .collect();
        a.sort();
        b.sort();
        ensure(a == b, || format!("case {case}: not a permutation"))?;

        let twice = rerank(&tokens, out.clone(), &antonyms, &keywords);
        ensure(twice == out, || format!("case {case}: not idempotent"))?;

        for class in [(false, false), (false, true), (true, false), (true, true)] {
            let in_class: Vec<&str> = input
                .labels()
                .filter(|l| {
                    out.entries
                        .iter()
                        .any(|e| &e.label == l && (e.penalized, e.rewarded) == class)
                })
                .collect();
            let out_class: Vec<&str> = out
                .entries
                .iter()
                .filter(|e| (e.penalized, e.rewarded) == class)
                .map(|e| e.label.as_str())
                .collect();
            ensure(in_class == out_class, || {
                format!("case {case}: unstable within {class:?}")
            })?;
        }

        let identity = rerank(
            &tokens,
            input.clone(),
            &AntonymTable::default(),
            &KeywordSet::default(),
        );
        ensure(identity == input, || {
            format!("case {case}: empty tables changed the list")
        })?;
    }

    let under =
        AntonymTable::from_pairs([("underfreq", ["overfreq"])]).map_err(|e| e.to_string())?;
    let traced = rerank(
        &tokenize_raw("Underfreq Trip"),
        RankedPredictions {
            entries: vec![
                Prediction::new("overfreq trip", 0.5),
                Prediction::new("p2", 0.3),
                Prediction::new("p3", 0.2),
            ],
            fallback: false,
        },
        &under,
        &KeywordSet::default(),
    );
    ensure(traced.labels().eq(["p2", "p3", "overfreq trip"]), || {
        format!(
            "antonym trace gave {:?}",
            traced.labels().collect::<Vec<_>>()
        )
    })?;

    let kw = KeywordSet::from_tokens(["interlocked"]).map_err(|e| e.to_string())?;
    let traced = rerank(
        &tokenize_raw("CB Interlocked"),
        RankedPredictions {
            entries: vec![
                Prediction::new("p1", 0.5),
                Prediction::new("interlocked closed", 0.3),
                Prediction::new("p3", 0.2),
            ],
            fallback: false,
        },
        &AntonymTable::default(),
        &kw,
    );
    ensure(
        traced.labels().eq(["interlocked closed", "p1", "p3"]),
        || {
            format!(
                "keyword trace gave {:?}",
                traced.labels().collect::<Vec<_>>()
            )
        },
    )?;
    Ok("1000 random instances hold all four properties; both traces exact".into())
}

fn metric_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(50);
    for case in 0..200 {
        let results = random_results(&mut rng, 50, 6);
        let ranked: Vec<(RankedPredictions, String)> = results
            .iter()
            .map(|(p, t)| {
                let mut labels: Vec<String> = p.iter().cloned().collect();
                labels.extend((0..rng.random_range(0..5)).map(|i| format!("l{}", (i + 3) % 8)));
                labels.dedup();
                let entries = labels
                    .into_iter()
                    .map(|l| Prediction::new(l, 0.0))
                    .collect();
                (
                    RankedPredictions {
                        entries,
                        fallback: false,
                    },
                    t.clone(),
                )
            })
            .collect();

        let mut previous = 0.0;
        for k in 1..=10 {
            let acc = top_k_accuracy(&ranked, k).map_err(|e| e.to_string())?;
            ensure(acc >= previous, || {
                format!("case {case}: top-{k} decreased")
            })?;
            previous = acc;
        }

        let prf = weighted_prf(&results).map_err(|e| e.to_string())?;
        let top1 = results
            .iter()
            .filter(|(p, t)| p.as_ref() == Some(t))
            .count() as f64
            / 50.0;
        ensure((prf.recall - top1).abs() < 1e-12, || {
            format!("case {case}: recall {} vs accuracy {top1}", prf.recall)
        })?;

        let (p, r, f) = confusion_matrix_prf(&results);
        ensure((prf.precision, prf.recall, prf.f1) == (p, r, f), || {
            format!("case {case}: {prf:?} vs confusion matrix ({p}, {r}, {f})")
        })?;
    }
    Ok(
        "200 random 50-query instances: monotone top-k, recall = accuracy, exact oracle match"
            .into(),
    )
}

fn ranking_ordering() -> Outcome {
    let mut runs = 0;
    for noise in [0.0, 0.1, 0.2] {
        let corpus = common::corpus(SynthConfig {
            noise_rate: noise,
            ..SynthConfig::default()
        });
        for method in Method::ALL {
            let report = run_eval(
                method,
                &corpus.dataset,
                &corpus.library,
                &corpus.antonyms,
                &corpus.keywords,
                &EvalConfig::default(),
            )
            .map_err(|e| e.to_string())?;
            let top10 = report.top_k(10).ok_or("no top-10")?;
            ensure(top10 >= report.accuracy, || {
                format!(
                    "{method} noise {noise}: top-10 {top10} < top-1 {}",
                    report.accuracy
                )
            })?;
            runs += 1;
        }
    }
    let corpus = common::corpus(SynthConfig::default());
    let report = run_eval(
        Method::TokenVote,
        &corpus.dataset,
        &corpus.library,
        &corpus.antonyms,
        &corpus.keywords,
        &EvalConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    ensure(report.accuracy >= NOISELESS_TOP1_MIN, || {
        format!(
            "noiseless token-vote top-1 {:.4} < {NOISELESS_TOP1_MIN}",
            report.accuracy
        )
    })?;
    Ok(format!(
        "top-10 >= top-1 on {runs} runs; noiseless token-vote top-1 {:.4} (>= {NOISELESS_TOP1_MIN})",
        report.accuracy
    ))
}

fn learning_curve_harness() -> Outcome {
    let corpus = common::corpus(SynthConfig::default());
    let points = learning_curve(
        Method::TokenVote,
        &corpus.dataset,
        &corpus.library,
        &corpus.antonyms,
        &corpus.keywords,
        &DEFAULT_CURVE_FRACTIONS,
        &EvalConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    ensure(points.len() == 10, || format!("{} points", points.len()))?;
    let at = |f: f64| points.iter().find(|p| p.fraction == f).map(|p| p.accuracy);
    let gap = at(1.0).ok_or("no 1.0 point")? - at(0.5).ok_or("no 0.5 point")?;
    let verdict = if gap.abs() < CURVE_GAP_EXPECTED {
        "within"
    } else {
        "OUTSIDE (soft expectation, logged only)"
    };
    Ok(format!(
        "10 fractions emitted; accuracy gap 0.5 -> 1.0 = {gap:+.4}, {verdict} {CURVE_GAP_EXPECTED}"
    ))
}

fn performance() -> Outcome {
    let corpus = common::corpus(SynthConfig::default());
    let (cleaned, _) = clean(&corpus.dataset, &corpus.library);
    let (train, test) = split_by_project(&cleaned, 0.2, 7).map_err(|e| e.to_string())?;
    let queries: Vec<String> = test
        .pairs()
        .iter()
        .map(|p| p.customer_signal.clone())
        .collect();

    let full = benchmark(
        Method::TokenVote,
        &cleaned,
        &queries,
        10,
        &TrainConfig::default(),
    )
    .map_err(|e| e.to_string())?;
    ensure(full.training_time_s <= MAX_TRAINING_S, || {
        format!("training took {:.2}s", full.training_time_s)
    })?;
    ensure(full.mean_prediction_time_ms <= MAX_PREDICTION_MS, || {
        format!("mean prediction {:.3} ms", full.mean_prediction_time_ms)
    })?;

    let unigram = TrainConfig {
        max_n: 1,
        ..TrainConfig::default()
    };
    let tokvote = Model::train(Method::TokenVote, &train, &unigram).map_err(|e| e.to_string())?;
    let nb = Model::train(Method::NaiveBayes, &train, &unigram).map_err(|e| e.to_string())?;
    let (tv_size, nb_size) = (tokvote.to_json().len(), nb.to_json().len());
    ensure(tv_size < nb_size, || {
        format!("token-vote {tv_size} B >= naive Bayes {nb_size} B")
    })?;
    Ok(format!(
        "{} pairs: train {:.3}s, predict {:.4} ms/query over {} calls; unigram model size token-vote {} B < NB {} B",
        cleaned.len(),
        full.training_time_s,
        full.mean_prediction_time_ms,
        full.n_predictions,
        tv_size,
        nb_size
    ))
}

fn determinism() -> Outcome {
    let cfg = SynthConfig {
        noise_rate: 0.1,
        seed: 21,
        ..SynthConfig::default()
    };
    let dump = |cfg: &SynthConfig| -> Result<(Vec<u8>, Vec<u8>), String> {
        let corpus = generate_synthetic(cfg).map_err(|e| e.to_string())?;
        let mut pairs = Vec::new();
        let mut lib = Vec::new();
        write_pairs(&corpus.dataset, &mut pairs).map_err(|e| e.to_string())?;
        write_library(&corpus.library, &mut lib).map_err(|e| e.to_string())?;
        Ok((pairs, lib))
    };
    ensure(dump(&cfg)? == dump(&cfg)?, || {
        "synthetic corpus differs".into()
    })?;

    let corpus = generate_synthetic(&cfg).map_err(|e| e.to_string())?;
    let (train, _) = clean(&corpus.dataset, &corpus.library);
    for method in Method::ALL {
        let a = Model::train(method, &train, &TrainConfig::default()).map_err(|e| e.to_string())?;
        let b = Model::train(method, &train, &TrainConfig::default()).map_err(|e| e.to_string())?;
        ensure(a.to_json() == b.to_json(), || {
            format!("{method} model bytes differ")
        })?;

        let ec = EvalConfig {
            seed: 21,
            ..EvalConfig::default()
        };
        let report = |_| {
            run_eval(
                method,
                &corpus.dataset,
                &corpus.library,
                &corpus.antonyms,
                &corpus.keywords,
                &ec,
            )
            .map(|r| r.to_json())
            .map_err(|e| e.to_string())
        };
        ensure(report(0)? == report(1)?, || {
            format!("{method} report differs")
        })?;
    }
    Ok("synthetic data, all three model files and all three reports byte-identical".into())
}

fn main() -> ExitCode {
    let criteria: [Criterion; 11] = [
        ("tokenizer golden rows", tokenizer_golden),
        ("vote normalization per token", vote_normalization),
        ("posterior normalization per query", posterior_normalization),
        ("token-vote oracle equivalence", oracle_equivalence),
        ("naive Bayes hand check", naive_bayes_hand_check),
        ("rerank properties and traces", rerank_properties),
        ("metric properties", metric_properties),
        ("ranking ordering and noiseless accuracy", ranking_ordering),
        ("learning-curve harness", learning_curve_harness),
        ("desk-scale performance", performance),
        ("determinism", determinism),
    ];

    let mut failed = 0;
    for (name, check) in criteria {
        let outcome =
            catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".to_string()));
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {name}: {detail}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
