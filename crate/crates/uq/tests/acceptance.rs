//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any fails.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde_json::{json, Value};
use uq::backend::{CallCounter, ChatProvider, CountedChat, MockChat, MockEmbedder, MockEntailer};
use uq::pipeline::{Engine, Settings};
use uq_core::ensemble::{
    ensemble_score, evaluate_objective, roc_auc, roc_auc_counts, tune_weights, EnsembleWeights, Objective,
    SearchConfig, TuningRecord,
};
use uq_core::judge::{parse_verdict, Aggregates, JudgeVerdict, PanelResult, ScoringTemplate};
use uq_core::semantic::{semantic_cluster, semantic_entropy_confidence, SemanticClustering};
use uq_core::whitebox::{length_normalized_probability, min_probability, TokenProbSequence};
use uq_core::{BlackBoxScorer, EntailmentJudgment, ScoreVector, WhiteBoxScorer};

type Outcome = Result<(), String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {{
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    }};
}

const WORDS: [&str; 12] = [
    "Paris", "paris", "Lyon", "the", "capital", "is", "France", "Berlin", "42", "yes", "no", "maybe",
];

const ALL_BLACKBOX: [BlackBoxScorer; 5] = [
    BlackBoxScorer::ExactMatch,
    BlackBoxScorer::CosineSim,
    BlackBoxScorer::BertScore,
    BlackBoxScorer::NonContradiction,
    BlackBoxScorer::SemanticEntropy,
];

fn random_text(rng: &mut StdRng) -> String {
    let n = rng.random_range(1..=6);
    (0..n)
        .map(|_| WORDS[rng.random_range(0..WORDS.len())])
        .collect::<Vec<_>>()
        .join(" ")
}

fn fixture_entry(rng: &mut StdRng, text: &str) -> Value {
    let logprobs: Vec<Value> = text
        .split_whitespace()
        .map(|t| json!([t, -rng.random_range(0.0..5.0f64)]))
        .collect();
    json!({"text": text, "logprobs": logprobs})
}

fn mock_engine(fixtures: &Value, m: u32, counter: &Arc<CallCounter>) -> Engine {
    let mock = MockChat::from_json(&fixtures.to_string()).unwrap();
    Engine::new(Arc::new(CountedChat::new(mock, counter.clone())))
        .with_embedder(Arc::new(MockEmbedder::default()))
        .with_entailer(Arc::new(MockEntailer::new()))
        .with_settings(Settings {
            num_responses: m,
            max_in_flight: 8,
            ..Settings::default()
        })
}

fn ac1_range_and_identity() -> Outcome {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(1);
    let n = 1000;
    let mut fixtures = serde_json::Map::new();
    for i in 0..n {
        let k = rng.random_range(1..=4);
        let entries: Vec<Value> = (0..k)
            .map(|_| {
                let t = random_text(&mut rng);
                fixture_entry(&mut rng, &t)
            })
            .collect();
        fixtures.insert(format!("p{i}"), Value::Array(entries));
    }
    let fixtures = Value::Object(fixtures);
    let prompts: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
    let counter = CallCounter::new();
    let engine = mock_engine(&fixtures, 3, &counter);

    let black = engine.blackbox(&prompts, &ALL_BLACKBOX).map_err(|e| e.to_string())?;
    for (i, r) in black.iter().enumerate() {
        ensure!(r.error.is_none(), "blackbox p{i} failed: {:?}", r.error);
        for (k, v) in &r.scores {
            ensure!((0.0..=1.0).contains(v), "{k} = {v} on p{i}");
        }
        ensure!(r.scores.len() == 5, "p{i} has {} scores", r.scores.len());
    }
    let white = engine
        .whitebox(
            &prompts,
            &[
                WhiteBoxScorer::MinProbability,
                WhiteBoxScorer::LengthNormalizedProbability,
            ],
        )
        .map_err(|e| e.to_string())?;
    for (i, r) in white.iter().enumerate() {
        ensure!(r.error.is_none(), "whitebox p{i} failed: {:?}", r.error);
        for (k, v) in &r.scores {
            ensure!(*v > 0.0 && *v <= 1.0, "{k} = {v} on p{i}");
        }
    }
    for template in ScoringTemplate::ALL {
        for _ in 0..n {
            let reply: String = (0..rng.random_range(0..6))
                .map(|_| ["0", "1", "2", "5", ".", "-", " ", "x", "7", "3"][rng.random_range(0..10)])
                .collect();
            if let Ok(s) = parse_verdict(&reply, template) {
                ensure!((0.0..=1.0).contains(&s), "{template} parsed {reply:?} to {s}");
            }
        }
    }
    for _ in 0..n {
        let k = rng.random_range(1..=5);
        let raw: Vec<f64> = (0..k).map(|_| rng.random_range(0.001..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let entries = raw
            .iter()
            .enumerate()
            .map(|(i, w)| (format!("s{i}"), w / total))
            .collect();
        let w = EnsembleWeights::new(entries, None).map_err(|e| e.to_string())?;
        let sv: ScoreVector = (0..k).map(|i| (format!("s{i}"), rng.random_range(0.0..=1.0))).collect();
        let e = ensemble_score(&sv, &w).map_err(|e| e.to_string())?;
        ensure!((0.0..=1.0).contains(&e), "ensemble {e}");
    }

    // identical responses score exactly 1 under every black-box scorer
    let mut same = serde_json::Map::new();
    for i in 0..200 {
        let t = random_text(&mut rng);
        same.insert(format!("s{i}"), json!([{"text": t}]));
    }
    let engine = mock_engine(&Value::Object(same), 5, &counter);
    let prompts: Vec<String> = (0..200).map(|i| format!("s{i}")).collect();
    for (i, r) in engine
        .blackbox(&prompts, &ALL_BLACKBOX)
        .map_err(|e| e.to_string())?
        .iter()
        .enumerate()
    {
        for s in ALL_BLACKBOX {
            let v = r.scores.get(&s.to_string()).copied();
            ensure!(v == Some(1.0), "{s} = {v:?} on identical set s{i}");
        }
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(5), "took {elapsed:?}");
    Ok(())
}

/// Restricted growth strings: every set partition of `n` items once.
fn partitions(n: usize) -> Vec<Vec<usize>> {
    fn extend(prefix: &mut Vec<usize>, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        let next = prefix.iter().max().map_or(0, |m| m + 1);
        for label in 0..=next {
            prefix.push(label);
            extend(prefix, n, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    extend(&mut Vec::new(), n, &mut out);
    out
}

fn ac2_semantic_entropy_oracle() -> Outcome {
    let mut checked = 0;
    for n in 1..=6usize {
        for labels in partitions(n) {
            let k = labels.iter().max().unwrap() + 1;
            let clusters: Vec<Vec<usize>> = (0..k).map(|c| (0..n).filter(|&i| labels[i] == c).collect()).collect();
            let oracle = if n == 1 {
                1.0
            } else {
                let h: f64 = clusters
                    .iter()
                    .map(|c| {
                        let p = c.len() as f64 / n as f64;
                        -p * p.ln()
                    })
                    .sum();
                1.0 - h / (n as f64).ln()
            };
            let direct = semantic_entropy_confidence(&SemanticClustering::from_clusters(clusters.clone()).unwrap());
            ensure!((direct - oracle).abs() <= 1e-12, "{labels:?}: {direct} vs {oracle}");

            // the clustering routine recovers the partition from entailment alone
            let texts: Vec<String> = (0..n).map(|i| format!("r{i}")).collect();
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            let label_of = |t: &str| labels[t[1..].parse::<usize>().unwrap()];
            let found = semantic_cluster(&refs, |a: &str, b: &str| {
                let same = label_of(a) == label_of(b);
                EntailmentJudgment::new(if same { 1.0 } else { 0.0 }, if same { 0.0 } else { 1.0 }, 0.0)
            })
            .map_err(|e| e.to_string())?;
            ensure!(
                found.clusters() == clusters.as_slice(),
                "{labels:?} clustered as {:?}",
                found.clusters()
            );
            checked += 1;
        }
    }
    ensure!(checked == 1 + 2 + 5 + 15 + 52 + 203, "enumerated {checked} partitions");
    let two_by_two = SemanticClustering::from_clusters(vec![vec![0, 1], vec![2, 3]]).unwrap();
    let v = semantic_entropy_confidence(&two_by_two);
    ensure!((v - 0.5).abs() <= 1e-12, "two clusters of 2 gave {v}");
    Ok(())
}

fn ac3_whitebox_hand_check() -> Outcome {
    let seq = TokenProbSequence::new(vec![0.8f64.ln(), 0.9f64.ln()]).map_err(|e| e.to_string())?;
    let min = min_probability(&seq);
    let lnp = length_normalized_probability(&seq);
    ensure!((min - 0.8).abs() <= 1e-12, "min {min}");
    ensure!((lnp - (0.8f64 * 0.9).sqrt()).abs() <= 1e-12, "lnp {lnp}");
    ensure!((lnp - 0.848528).abs() <= 1e-6, "lnp {lnp}");
    let single = TokenProbSequence::new(vec![0.37f64.ln()]).unwrap();
    ensure!((min_probability(&single) - 0.37).abs() <= 1e-12, "singleton min");
    ensure!(
        (length_normalized_probability(&single) - 0.37).abs() <= 1e-12,
        "singleton lnp"
    );
    let certain = TokenProbSequence::new(vec![0.0, 0.0]).unwrap();
    ensure!(
        min_probability(&certain) == 1.0 && length_normalized_probability(&certain) == 1.0,
        "certainty"
    );

    let mut rng = StdRng::seed_from_u64(3);
    for i in 0..10_000 {
        let len = rng.random_range(1..60);
        let lps: Vec<f64> = (0..len).map(|_| -rng.random_range(0.0..10.0f64)).collect();
        let seq = TokenProbSequence::new(lps).unwrap();
        let (min, lnp) = (min_probability(&seq), length_normalized_probability(&seq));
        ensure!(
            0.0 < min && min <= lnp && lnp <= 1.0,
            "sequence {i}: min {min} lnp {lnp}"
        );
    }
    Ok(())
}

fn ac4_auc_oracle() -> Outcome {
    let mut rng = StdRng::seed_from_u64(4);
    let mut tested = 0;
    while tested < 500 {
        let n = rng.random_range(2..=50);
        // coarse scores force ties
        let coarse = rng.random_bool(0.5);
        let scores: Vec<f64> = (0..n)
            .map(|_| {
                if coarse {
                    rng.random_range(0..5) as f64 / 4.0
                } else {
                    rng.random_range(0.0..1.0)
                }
            })
            .collect();
        let labels: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
        if labels.iter().all(|&l| l) || labels.iter().all(|&l| !l) {
            ensure!(roc_auc(&scores, &labels).is_err(), "single-class input accepted");
            continue;
        }
        let (mut twice_wins, mut pairs) = (0u64, 0u64);
        for i in 0..n {
            for j in 0..n {
                if labels[i] && !labels[j] {
                    pairs += 1;
                    if scores[i] > scores[j] {
                        twice_wins += 2;
                    } else if scores[i] == scores[j] {
                        twice_wins += 1;
                    }
                }
            }
        }
        let counts = roc_auc_counts(&scores, &labels).map_err(|e| e.to_string())?;
        ensure!(
            (counts.twice_wins as u64, counts.pairs as u64) == (twice_wins, pairs),
            "counts {counts:?} vs ({twice_wins}, {pairs})"
        );
        let brute = twice_wins as f64 / (2 * pairs) as f64;
        ensure!(roc_auc(&scores, &labels).unwrap() == brute, "value mismatch");
        tested += 1;
    }
    Ok(())
}

fn random_simplex(rng: &mut StdRng, k: usize) -> Vec<f64> {
    let raw: Vec<f64> = (0..k).map(|_| -(1.0 - rng.random_range(0.0..1.0f64)).ln()).collect();
    let total: f64 = raw.iter().sum();
    raw.iter().map(|x| x / total).collect()
}

fn combined(records: &[TuningRecord], ids: &[String], w: &[f64]) -> Vec<f64> {
    records
        .iter()
        .map(|r| {
            ids.iter()
                .zip(w)
                .map(|(id, w)| w * r.scorer_scores[id])
                .sum::<f64>()
                .clamp(0.0, 1.0)
        })
        .collect()
}

fn ac5_tuner_recovery() -> Outcome {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(5);
    for (k, n) in [(2usize, 200usize), (4, 100)] {
        let ids: Vec<String> = ["A", "B", "C", "D"][..k].iter().map(|s| s.to_string()).collect();
        let records: Vec<TuningRecord> = (0..n)
            .map(|i| {
                let grade = i % 2 == 0 || rng.random_bool(0.3);
                let mut scores = ScoreVector::new();
                scores.insert("A".into(), if grade { 1.0 } else { 0.0 });
                for id in &ids[1..] {
                    scores.insert(id.clone(), rng.random_range(0.0..1.0));
                }
                TuningRecord {
                    prompt: format!("p{i}"),
                    ideal_response: String::new(),
                    scorer_scores: scores,
                    grade,
                }
            })
            .collect();
        let search = SearchConfig {
            seed: 11,
            ..SearchConfig::default()
        };
        let out = tune_weights(&records, &ids, Objective::RocAuc, &search).map_err(|e| e.to_string())?;
        let weights: Vec<f64> = ids.iter().map(|id| out.weights.weight(id).unwrap()).collect();
        let labels: Vec<bool> = records.iter().map(|r| r.grade).collect();
        let (auc, _) = evaluate_objective(&combined(&records, &ids, &weights), &labels, Objective::RocAuc).unwrap();
        ensure!(auc >= 0.99, "k={k}: tuned AUC {auc}");
        ensure!(
            auc == out.objective_value,
            "k={k}: reported {} vs recomputed {auc}",
            out.objective_value
        );
        ensure!(weights[0] >= 0.8, "k={k}: weight_A = {}", weights[0]);
        let mut best_random = f64::NEG_INFINITY;
        for _ in 0..1000 {
            let w = random_simplex(&mut rng, k);
            let (v, _) = evaluate_objective(&combined(&records, &ids, &w), &labels, Objective::RocAuc).unwrap();
            best_random = best_random.max(v);
        }
        ensure!(
            out.objective_value >= best_random,
            "k={k}: tuned {} < random {best_random}",
            out.objective_value
        );
    }
    let elapsed = started.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(())
}

fn ac6_judge_parsing() -> Outcome {
    use ScoringTemplate::*;
    let table: &[(&str, ScoringTemplate, Option<f64>)] = &[
        ("1", Binary, Some(1.0)),
        ("0", Binary, Some(0.0)),
        ("Verdict: 1", Binary, Some(1.0)),
        ("0.5", Binary, None),
        ("2", Binary, None),
        ("correct", Binary, None),
        ("0.5", Ternary, Some(0.5)),
        ("1", Ternary, Some(1.0)),
        ("0", Ternary, Some(0.0)),
        ("0.75", Ternary, None),
        ("0.37", Continuous, Some(0.37)),
        ("1", Continuous, Some(1.0)),
        ("1.3", Continuous, None),
        ("-0.1", Continuous, None),
        ("1", Likert, Some(0.0)),
        ("2", Likert, Some(0.25)),
        ("3", Likert, Some(0.5)),
        ("4", Likert, Some(0.75)),
        ("5", Likert, Some(1.0)),
        ("0", Likert, None),
        ("6", Likert, None),
        ("3.5", Likert, None),
        ("", Likert, None),
    ];
    for &(raw, t, want) in table {
        let got = parse_verdict(raw, t).ok();
        ensure!(got == want, "{raw:?} under {t}: {got:?}, expected {want:?}");
    }
    ensure!(
        matches!(
            parse_verdict("1.3", Continuous),
            Err(uq_core::Error::ParseFailure { .. })
        ),
        "1.3 under continuous is not a ParseFailure"
    );

    let mut rng = StdRng::seed_from_u64(6);
    for _ in 0..2000 {
        let k = rng.random_range(1..8);
        let verdicts: Vec<JudgeVerdict> = (0..k)
            .map(|i| {
                let t = ScoringTemplate::ALL[rng.random_range(0..4)];
                let parsed = match t.admissible_values() {
                    Some(vals) => vals[rng.random_range(0..vals.len())],
                    None => rng.random_range(0.0..=1.0),
                };
                JudgeVerdict {
                    judge_id: format!("j{i}"),
                    raw_reply: String::new(),
                    parsed_score: rng.random_bool(0.8).then_some(parsed),
                    attempts: 1,
                    error: None,
                }
            })
            .collect();
        let panel = PanelResult::from_verdicts(verdicts.clone());
        let present: Vec<f64> = verdicts.iter().filter_map(|v| v.parsed_score).collect();
        match panel.aggregates {
            None => ensure!(present.is_empty(), "aggregates missing with verdicts present"),
            Some(Aggregates { min, max, avg, median }) => {
                ensure!(min <= median && median <= max, "median {median} outside [{min}, {max}]");
                ensure!(min <= avg && avg <= max, "avg {avg} outside [{min}, {max}]");
                let oracle_min = present.iter().copied().fold(f64::INFINITY, f64::min);
                let oracle_max = present.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                ensure!(min == oracle_min && max == oracle_max, "min/max mismatch");
            }
        }
    }
    let a = Aggregates::of(&[0.0, 0.5, 1.0]).unwrap();
    ensure!((a.min, a.max, a.avg, a.median) == (0.0, 1.0, 0.5, 0.5), "{a:?}");
    Ok(())
}

fn run_uq(args: &[&str]) -> Result<std::process::Output, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_uq"))
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "uq {} exited with {:?}: {}",
            args.join(" "),
            out.status.code(),
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out)
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn ensemble_by_id(path: &Path) -> Result<BTreeMap<String, f64>, String> {
    let records = uq::harness::load_results(path).map_err(|e| e.to_string())?;
    records
        .into_iter()
        .map(|r| match r.ensemble {
            Some(e) => Ok((r.id, e)),
            None => Err(format!("{} has no ensemble score: {:?}", r.id, r.error)),
        })
        .collect()
}

fn ac7_end_to_end_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    let mut rng = StdRng::seed_from_u64(7);
    let mut fixtures = serde_json::Map::new();
    let mut dataset = String::new();
    for i in 0..20 {
        let answer = ["Paris", "Lyon", "Berlin"][i % 3];
        let k = rng.random_range(2..=4);
        let mut entries = vec![fixture_entry(&mut rng, answer)];
        for _ in 1..k {
            let t = if rng.random_bool(0.5) {
                answer.to_string()
            } else {
                random_text(&mut rng)
            };
            entries.push(fixture_entry(&mut rng, &t));
        }
        fixtures.insert(format!("question {i}"), Value::Array(entries));
        // ideal matches the seed-42 original only for some prompts
        dataset.push_str(&format!(
            "{}\n",
            json!({"id": format!("q{i:02}"), "prompt": format!("question {i}"), "ideal": if i % 4 == 0 { "Paris" } else { answer }})
        ));
    }
    std::fs::write(d.join("fixtures.json"), Value::Object(fixtures).to_string()).unwrap();
    std::fs::write(d.join("prompts.jsonl"), &dataset).unwrap();
    std::fs::write(
        d.join("run.toml"),
        r#"
mode = "blackbox"
seed = 42
num_responses = 4
scorers = ["exact_match", "cosine_sim", "bert_score", "noncontradiction", "semantic_entropy"]
max_in_flight = 6

[backend]
kind = "mock"
fixtures = "fixtures.json"
default_reply = "1"
jitter_ms = 3

[cache]
mode = "record"
path = "cache/calls.bin"

[ensemble]
components = ["exact_match", "noncontradiction", "min_probability", "self_judge"]
"#,
    )
    .unwrap();
    let config = d.join("run.toml");
    let data = d.join("prompts.jsonl");

    // populate the cache, then replay three times
    run_uq(&[
        "score",
        "--config",
        p(&config),
        "--dataset",
        p(&data),
        "--out",
        p(&d.join("recorded.jsonl")),
    ])?;
    let mut outputs = Vec::new();
    for i in 0..3 {
        let out = d.join(format!("replay{i}.jsonl"));
        let summary = d.join(format!("summary{i}.json"));
        run_uq(&[
            "score",
            "--config",
            p(&config),
            "--dataset",
            p(&data),
            "--cache-mode",
            "replay",
            "--out",
            p(&out),
            "--summary",
            p(&summary),
        ])?;
        let s: Value = serde_json::from_str(&std::fs::read_to_string(&summary).unwrap()).unwrap();
        let calls = &s["provider_calls"];
        for key in ["chat_requests", "embed_requests", "entail_requests"] {
            ensure!(calls[key] == json!(0), "replay run {i} made {key} = {}", calls[key]);
        }
        outputs.push(std::fs::read(&out).unwrap());
    }
    ensure!(
        outputs[0] == outputs[1] && outputs[1] == outputs[2],
        "replay outputs differ"
    );
    let recorded = std::fs::read(d.join("recorded.jsonl")).unwrap();
    ensure!(recorded == outputs[0], "replay differs from the recorded run");
    let lines = String::from_utf8(outputs[0].clone()).unwrap();
    ensure!(lines.lines().count() == 20, "expected 20 records");
    let ids: Vec<String> = lines
        .lines()
        .map(|l| {
            serde_json::from_str::<Value>(l).unwrap()["id"]
                .as_str()
                .unwrap()
                .to_string()
        })
        .collect();
    let expected: Vec<String> = (0..20).map(|i| format!("q{i:02}")).collect();
    ensure!(ids == expected, "output order {ids:?}");

    // tune, then score with the stored weights from the replay cache
    let weights = d.join("weights.json");
    let tuned = d.join("tuned.jsonl");
    run_uq(&[
        "tune",
        "--config",
        p(&config),
        "--dataset",
        p(&data),
        "--weights-out",
        p(&weights),
        "--out",
        p(&tuned),
    ])?;
    let ensembled = d.join("ensemble.jsonl");
    run_uq(&[
        "score",
        "--config",
        p(&config),
        "--dataset",
        p(&data),
        "--mode",
        "ensemble",
        "--weights",
        p(&weights),
        "--cache-mode",
        "replay",
        "--out",
        p(&ensembled),
    ])?;
    let a = ensemble_by_id(&tuned)?;
    let b = ensemble_by_id(&ensembled)?;
    ensure!(a.len() == 20 && a.keys().eq(b.keys()), "ensemble ids differ");
    for (id, x) in &a {
        let y = b[id];
        ensure!((x - y).abs() <= 1e-12, "{id}: tuned {x} vs rescored {y}");
    }
    let w: Value = serde_json::from_str(&std::fs::read_to_string(&weights).unwrap()).unwrap();
    ensure!(w["seed"] == json!(42), "weights seed {}", w["seed"]);
    Ok(())
}

fn ac8_call_budgets() -> Outcome {
    let mut rng = StdRng::seed_from_u64(8);
    let prompts: Vec<String> = (0..10).map(|i| format!("p{i}")).collect();
    let mut fixtures = serde_json::Map::new();
    for p in &prompts {
        let entries: Vec<Value> = (0..3)
            .map(|_| {
                let t = random_text(&mut rng);
                fixture_entry(&mut rng, &t)
            })
            .collect();
        fixtures.insert(p.clone(), Value::Array(entries));
    }
    let fixtures = Value::Object(fixtures);
    let per_prompt = |counter: &Arc<CallCounter>| {
        let c = counter.snapshot();
        (
            c.chat_generations / prompts.len() as u64,
            c.chat_requests / prompts.len() as u64,
        )
    };

    for m in [1u32, 3, 5] {
        let counter = CallCounter::new();
        let engine = mock_engine(&fixtures, m, &counter);
        engine.blackbox(&prompts, &ALL_BLACKBOX).map_err(|e| e.to_string())?;
        let (generations, _) = per_prompt(&counter);
        ensure!(
            generations == 1 + m as u64,
            "blackbox m={m}: {generations} generations per prompt"
        );
    }

    let counter = CallCounter::new();
    let engine = mock_engine(&fixtures, 5, &counter);
    engine
        .whitebox(
            &prompts,
            &[
                WhiteBoxScorer::MinProbability,
                WhiteBoxScorer::LengthNormalizedProbability,
            ],
        )
        .map_err(|e| e.to_string())?;
    ensure!(
        per_prompt(&counter) == (1, 1),
        "whitebox: {:?} per prompt",
        per_prompt(&counter)
    );

    for k in [1usize, 3] {
        let counter = CallCounter::new();
        let mut engine = mock_engine(&fixtures, 5, &counter);
        for j in 0..k {
            let judge = MockChat::from_pairs([]).with_default_reply(["1", "0.5", "4"][j]);
            let judge: Arc<dyn ChatProvider> = Arc::new(CountedChat::new(judge, counter.clone()));
            let template = [
                ScoringTemplate::Binary,
                ScoringTemplate::Ternary,
                ScoringTemplate::Likert,
            ][j];
            engine = engine.with_judge(format!("j{j}"), judge, template);
        }
        let out = engine.panel(&prompts).map_err(|e| e.to_string())?;
        ensure!(out.iter().all(|r| r.error.is_none()), "panel left items unscored");
        let expected = 1 + k as u64;
        ensure!(
            per_prompt(&counter) == (expected, expected),
            "panel k={k}: {:?} per prompt",
            per_prompt(&counter)
        );
    }
    Ok(())
}

fn main() {
    let criteria: [Criterion; 8] = [
        ("AC1 range and identity", ac1_range_and_identity),
        ("AC2 semantic entropy oracle", ac2_semantic_entropy_oracle),
        ("AC3 white-box hand check", ac3_whitebox_hand_check),
        ("AC4 AUC oracle equivalence", ac4_auc_oracle),
        ("AC5 tuner recovery", ac5_tuner_recovery),
        ("AC6 judge parsing", ac6_judge_parsing),
        ("AC7 end-to-end determinism", ac7_end_to_end_determinism),
        ("AC8 call budgets", ac8_call_budgets),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let started = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|panic| {
            let msg = panic
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Ok(()) => println!("PASS {name} ({secs:.2}s)"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name} ({secs:.2}s): {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
