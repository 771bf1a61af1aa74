//! Release acceptance gate. Each criterion runs as its own test and prints
//! exactly one line:
//!
//! ```text
//! acceptance: [PASS|FAIL|SKIP] <criterion> — <detail>
//! ```
//!
//! Run with `cargo test -p kcs --test acceptance -- --nocapture` to see the
//! lines. Everything is self-contained except the published-number checks,
//! which need the public dev files on disk; those print SKIP (and pass
//! vacuously) when the files are absent. To enable them, set `KCS_DATA_DIR`
//! to (or create `data/` at the workspace root as) a directory containing:
//!
//!   - `hotpot_dev_distractor_v1.json` (HotpotQA distractor dev)
//!   - `2wikimultihopqa_dev.json` (2WikiMultihopQA dev; a few other common
//!     file names are also recognized, see `TWO_WIKI_CANDIDATES`)

use std::path::{Path, PathBuf};

use ndarray::Array2;
use proptest::prelude::*;
use proptest::test_runner::{Config as PropConfig, TestRunner};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use kcs::baselines::random_select;
use kcs::corpus::{
    build_gold_composition, filter_answerable, load_dataset, Arrangement, ContextDocument,
    DatasetFormat, Sample, SentenceRef,
};
use kcs::decoding::{greedy_decode, sample_nucleus, top_p_truncate};
use kcs::encoder::{EncoderSpec, Pooling};
use kcs::metrics::composition_prf;
use kcs::nn::{Graph, ParamSet};
use kcs::rng::derive_rng;
use kcs::selector::losses::{cls_loss_node, seq_loss_node};
use kcs::selector::{
    cls_loss_scalar, seq_loss_scalar, total_loss, train, Denominator, SelectionDistribution,
    SelectorConfig, SelectorModel, TrainConfig,
};

// ---------------------------------------------------------------------------
// Reporting helpers
// ---------------------------------------------------------------------------

fn pass(name: &str, detail: &str) {
    println!("acceptance: [PASS] {name} — {detail}");
}

fn skip(name: &str, detail: &str) {
    println!("acceptance: [SKIP] {name} — {detail}");
}

fn check(ok: bool, name: &str, detail: &str) {
    if ok {
        pass(name, detail);
    } else {
        println!("acceptance: [FAIL] {name} — {detail}");
        panic!("acceptance criterion failed: {name} — {detail}");
    }
}

// ---------------------------------------------------------------------------
// Dataset discovery (published-number checks are optional)
// ---------------------------------------------------------------------------

const HOTPOT_CANDIDATES: &[&str] = &[
    "hotpot_dev_distractor_v1.json",
    "hotpotqa/hotpot_dev_distractor_v1.json",
    "hotpot/hotpot_dev_distractor_v1.json",
];

const TWO_WIKI_CANDIDATES: &[&str] = &[
    "2wikimultihopqa_dev.json",
    "2wikimultihop_dev.json",
    "2wiki_dev.json",
    "2wiki/dev.json",
    "2wikimultihopqa/dev.json",
];

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn find_dataset(candidates: &[&str]) -> Option<PathBuf> {
    let mut roots = Vec::new();
    if let Ok(dir) = std::env::var("KCS_DATA_DIR") {
        roots.push(PathBuf::from(dir));
    }
    roots.push(workspace_root().join("data"));
    for root in roots {
        for cand in candidates {
            let path = root.join(cand);
            if path.is_file() {
                return Some(path);
            }
        }
    }
    None
}

fn run_cli(args: &[&str]) -> i32 {
    kcs::cli::run(std::iter::once("kcs").chain(args.iter().copied()))
}

fn s(path: &Path) -> String {
    path.to_str().expect("utf-8 path").to_string()
}

/// `preprocess` + `baseline --kind max --k 3` + `evaluate --k 2,3`,
/// returning the metrics map of the produced report.
fn max_oracle_metrics(raw: &Path, format: &str) -> serde_json::Map<String, serde_json::Value> {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    let traces = dir.path().join("max.jsonl");
    let report = dir.path().join("report.json");

    assert_eq!(
        run_cli(&[
            "preprocess", "--input", &s(raw), "--format", format,
            "--arrangement", "document", "--seed", "0", "--out", &s(&corpus),
        ]),
        0,
        "preprocess failed on {}",
        raw.display()
    );
    assert_eq!(
        run_cli(&[
            "baseline", "--kind", "max", "--k", "3",
            "--data", &s(&corpus), "--out", &s(&traces),
        ]),
        0,
        "max baseline failed"
    );
    assert_eq!(
        run_cli(&[
            "evaluate", "--pred", &s(&traces), "--data", &s(&corpus),
            "--k", "2,3", "--report", &s(&report),
        ]),
        0,
        "evaluate failed"
    );

    let value: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    value["metrics"].as_object().expect("metrics object").clone()
}

fn metric(metrics: &serde_json::Map<String, serde_json::Value>, key: &str) -> f64 {
    metrics[key].as_f64().unwrap_or_else(|| panic!("metric {key} missing"))
}

// ---------------------------------------------------------------------------
// Criterion: MAX-oracle selection metrics on the public HotpotQA dev split
// ---------------------------------------------------------------------------

/// Reference values for the MAX oracle on the yes/no-filtered HotpotQA
/// distractor dev split (used as the test split), in percent.
const HOTPOT_MAX: &[(&str, f64, f64)] = &[
    ("P@2", 100.00, 0.0), // exact: every MAX pick is a supporting fact
    ("R@2", 87.01, 1.0),
    ("F1@2", 91.85, 1.0),
    ("P@3", 78.00, 1.0),
    ("R@3", 97.52, 1.0),
    ("F1@3", 85.33, 1.0),
];

#[test]
fn max_oracle_matches_reference_on_hotpotqa() {
    let name = "max-oracle-hotpotqa";
    let Some(raw) = find_dataset(HOTPOT_CANDIDATES) else {
        skip(name, "HotpotQA dev file not found (set KCS_DATA_DIR)");
        return;
    };
    let metrics = max_oracle_metrics(&raw, "hotpotqa");

    let mut detail = String::new();
    let mut ok = true;
    for &(key, target, tol) in HOTPOT_MAX {
        let got = metric(&metrics, key);
        let hit = if tol == 0.0 { got == target } else { (got - target).abs() <= tol };
        ok &= hit;
        detail.push_str(&format!("{key}={got:.2} (want {target:.2}±{tol}) "));
    }
    check(ok, name, detail.trim_end());
}

// ---------------------------------------------------------------------------
// Criterion: MAX-oracle F1 on the public 2WikiMultihopQA dev split
// ---------------------------------------------------------------------------

const TWO_WIKI_MAX: &[(&str, f64, f64)] = &[("F1@2", 93.12, 1.0), ("F1@3", 81.19, 1.0)];

#[test]
fn max_oracle_matches_reference_on_2wiki() {
    let name = "max-oracle-2wiki";
    let Some(raw) = find_dataset(TWO_WIKI_CANDIDATES) else {
        skip(name, "2WikiMultihopQA dev file not found (set KCS_DATA_DIR)");
        return;
    };
    let metrics = max_oracle_metrics(&raw, "2wiki");

    let mut detail = String::new();
    let mut ok = true;
    for &(key, target, tol) in TWO_WIKI_MAX {
        let got = metric(&metrics, key);
        ok &= (got - target).abs() <= tol;
        detail.push_str(&format!("{key}={got:.2} (want {target:.2}±{tol}) "));
    }
    check(ok, name, detail.trim_end());
}

// ---------------------------------------------------------------------------
// Criterion: random-baseline mean F1@2 over 10 seeds
// ---------------------------------------------------------------------------

fn random_mean_f1_at_2(raw: &Path, format: DatasetFormat) -> (f64, usize) {
    let (samples, _) = load_dataset(raw, format).expect("dataset loads");
    let test = filter_answerable(samples);
    assert!(!test.is_empty(), "empty test split");
    let mut seed_means = Vec::with_capacity(10);
    for seed in 0..10u64 {
        let mut acc = 0.0;
        for sample in &test {
            let comp = random_select(sample, 2, seed);
            let (_, _, f1) = composition_prf(&comp.refs, &sample.supporting_facts).unwrap();
            acc += f1;
        }
        seed_means.push(100.0 * acc / test.len() as f64);
    }
    (seed_means.iter().sum::<f64>() / seed_means.len() as f64, test.len())
}

#[test]
fn random_baseline_matches_reference_means() {
    let cases: &[(&str, &[&str], DatasetFormat, f64)] = &[
        ("random-mean-hotpotqa", HOTPOT_CANDIDATES, DatasetFormat::Hotpotqa, 5.41),
        ("random-mean-2wiki", TWO_WIKI_CANDIDATES, DatasetFormat::TwoWiki, 7.50),
    ];
    for &(name, candidates, format, target) in cases {
        let Some(raw) = find_dataset(candidates) else {
            skip(name, "dev file not found (set KCS_DATA_DIR)");
            continue;
        };
        let (mean, n) = random_mean_f1_at_2(&raw, format);
        check(
            (mean - target).abs() <= 1.5,
            name,
            &format!("mean F1@2 over 10 seeds = {mean:.2} (want {target:.2}±1.5, n={n})"),
        );
    }
}

// ---------------------------------------------------------------------------
// Criterion: loss oracles (brute force vs node graph vs scalar reference)
// ---------------------------------------------------------------------------

/// Independent sequential-loss oracle: plain loops and naive exp over an
/// already temperature-scaled score matrix, masking out earlier picks.
fn brute_seq_loss(scaled: &Array2<f64>, gold: &[usize], exclude_positive: bool) -> f64 {
    let (k, m) = scaled.dim();
    let mut available = vec![true; m];
    let mut total = 0.0;
    for (step, &g) in gold.iter().enumerate().take(k) {
        let mut denom = 0.0;
        for j in (0..m).filter(|&j| available[j] && !(exclude_positive && j == g)) {
            denom += scaled[[step, j]].exp();
        }
        total += denom.ln() - scaled[[step, g]];
        available[g] = false;
    }
    total / k as f64
}

/// Independent per-sentence classification oracle: mean cross-entropy of
/// binary rows computed with explicit softmax arithmetic.
fn brute_cls_loss(logits: &Array2<f64>, labels: &[u8]) -> f64 {
    let m = logits.nrows();
    let mut total = 0.0;
    for (i, &label) in labels.iter().enumerate() {
        let denom = logits[[i, 0]].exp() + logits[[i, 1]].exp();
        total += denom.ln() - logits[[i, label as usize]];
    }
    total / m as f64
}

fn rand_matrix(rng: &mut ChaCha12Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(-3.0..3.0))
}

#[test]
fn loss_oracles_agree_with_brute_force() {
    let name = "loss-oracles";
    let mut rng = ChaCha12Rng::seed_from_u64(42);
    let params = ParamSet::new();
    let mut n_seq = 0usize;
    let mut n_cls = 0usize;
    let mut worst: f64 = 0.0;

    // Sequential loss: every (K, M, denominator, temperature) combination on
    // instances of at most five sentences, three random draws each.
    for k in 1..=3usize {
        for m in k..=5usize {
            for &denom in &[Denominator::IncludePositive, Denominator::ExcludePositive] {
                // An exclude-positive denominator needs a non-gold candidate
                // left at every step.
                if denom == Denominator::ExcludePositive && m < k + 1 {
                    continue;
                }
                for &temp in &[0.5f64, 1.0, 2.3] {
                    for _ in 0..3 {
                        let mi = rand_matrix(&mut rng, k, m);
                        let mut order: Vec<usize> = (0..m).collect();
                        for i in (1..order.len()).rev() {
                            let j = rng.random_range(0..=i);
                            order.swap(i, j);
                        }
                        let gold: Vec<usize> = order[..k].to_vec();

                        let scaled = mi.mapv(|v| v / temp);
                        let brute = brute_seq_loss(
                            &scaled,
                            &gold,
                            denom == Denominator::ExcludePositive,
                        );
                        let scalar = seq_loss_scalar(&mi, &gold, temp, denom);

                        let mut g = Graph::new(&params);
                        let leaf = g.tape.leaf(scaled.clone());
                        let node = seq_loss_node(&mut g, leaf, &gold, denom).unwrap();
                        let node_val = g.tape.scalar(node);

                        worst = worst.max((scalar - brute).abs()).max((node_val - brute).abs());
                        n_seq += 1;
                    }
                }
            }
        }
    }

    // Classification loss: all M ≤ 5 with random logits and labels.
    for m in 1..=5usize {
        for _ in 0..4 {
            let logits = rand_matrix(&mut rng, m, 2);
            let labels: Vec<u8> = (0..m).map(|_| rng.random_range(0..2u8) ).collect();

            let brute = brute_cls_loss(&logits, &labels);
            let z = Array2::from_shape_fn((m, 2), |(i, j)| {
                let denom = logits[[i, 0]].exp() + logits[[i, 1]].exp();
                logits[[i, j]].exp() / denom
            });
            let scalar = cls_loss_scalar(&z, &labels);

            let mut g = Graph::new(&params);
            let leaf = g.tape.leaf(logits.clone());
            let node = cls_loss_node(&mut g, leaf, &labels);
            let node_val = g.tape.scalar(node);

            worst = worst.max((scalar - brute).abs()).max((node_val - brute).abs());
            n_cls += 1;
        }
    }

    // λ-decomposition must hold bitwise, both for the pure helper and for
    // the combined node the training loop actually backpropagates through.
    for &(cls, seq, lambda) in
        &[(0.0f64, 1.5f64, 0.0f64), (2.25, -0.5, 0.7), (0.931, 0.402, 1.0), (3.0, 2.0, 0.25)]
    {
        assert_eq!(total_loss(cls, seq, lambda), cls + lambda * seq);
    }
    let sample = tiny_sample();
    let gold = build_gold_composition(&sample, Arrangement::Document, 0).unwrap().0.refs;
    let model = tiny_model(0.6);
    let (mut g, nodes) = model.forward_train(&sample, &gold, None).unwrap();
    let cls = cls_loss_node(&mut g, nodes.cls_logits, &sample.labels);
    let seq = seq_loss_node(&mut g, nodes.logits, &nodes.gold_idx, model.config.denominator)
        .unwrap();
    let total = g.tape.add_scaled(cls, seq, model.config.lambda);
    let decomposes = g.tape.scalar(total)
        == g.tape.scalar(cls) + model.config.lambda * g.tape.scalar(seq);

    check(
        worst <= 1e-6 && decomposes,
        name,
        &format!(
            "{n_seq} sequential + {n_cls} classification instances, max |Δ| = {worst:.2e} \
             (tol 1e-6); λ-decomposition exact on the training graph"
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion: analytic gradients vs central differences on a tiny selector
// ---------------------------------------------------------------------------

/// Five context sentences across two documents, two supporting facts, and
/// the answer verbatim in both gold sentences.
fn tiny_sample() -> Sample {
    Sample::new(
        "grad-0".into(),
        "quill".into(),
        "what tool signed the charter?".into(),
        vec![
            ContextDocument {
                title: "Charter".into(),
                sentences: vec![
                    "the charter was signed with a quill of white ash.".into(),
                    "weather that spring stayed mild and dry.".into(),
                    "a courier carried the signed pages north.".into(),
                ],
            },
            ContextDocument {
                title: "Archive".into(),
                sentences: vec![
                    "the archive preserves the quill beside the wax seal.".into(),
                    "entry fees were waived on festival days.".into(),
                ],
            },
        ],
        vec![SentenceRef::new(0, 0), SentenceRef::new(1, 0)],
    )
    .unwrap()
}

fn tiny_model(lambda: f64) -> SelectorModel {
    let encoder = EncoderSpec {
        d: 16,
        pooling: Pooling::Mean,
        max_tokens: 32,
        vocab_buckets: 512,
        seed: 11,
        ..EncoderSpec::default()
    };
    let config = SelectorConfig {
        d: 16,
        n_layers: 2,
        n_heads: 2,
        lambda,
        temperature: 0.7,
        dropout: 0.0,
        max_sentences: 8,
        seed: 3,
        ..SelectorConfig::default()
    };
    SelectorModel::new(config, encoder, None).unwrap()
}

#[test]
fn analytic_gradients_match_central_differences() {
    let name = "gradient-check";
    let sample = tiny_sample();
    let gold = build_gold_composition(&sample, Arrangement::Document, 0).unwrap().0.refs;
    let mut model = tiny_model(0.6);

    let total_loss_value = |model: &SelectorModel| -> f64 {
        let (mut g, nodes) = model.forward_train(&sample, &gold, None).unwrap();
        let cls = cls_loss_node(&mut g, nodes.cls_logits, &sample.labels);
        let seq = seq_loss_node(&mut g, nodes.logits, &nodes.gold_idx, model.config.denominator)
            .unwrap();
        let total = g.tape.add_scaled(cls, seq, model.config.lambda);
        g.tape.scalar(total)
    };

    // Analytic gradient, flattened in parameter-registration order (the
    // same order `to_flat`/`load_flat` use).
    let analytic: Vec<f64> = {
        let (mut g, nodes) = model.forward_train(&sample, &gold, None).unwrap();
        let cls = cls_loss_node(&mut g, nodes.cls_logits, &sample.labels);
        let seq = seq_loss_node(&mut g, nodes.logits, &nodes.gold_idx, model.config.denominator)
            .unwrap();
        let total = g.tape.add_scaled(cls, seq, model.config.lambda);
        g.param_grads(total).iter().flat_map(|m| m.iter().copied()).collect()
    };

    let theta = model.params.to_flat();
    assert_eq!(theta.len(), analytic.len());

    // Probe the coordinates with the largest analytic gradients plus an
    // even stride across the whole vector (covers embedding rows the
    // sample never touches, whose gradient must be zero).
    let mut by_magnitude: Vec<usize> = (0..analytic.len()).collect();
    by_magnitude.sort_by(|&a, &b| analytic[b].abs().partial_cmp(&analytic[a].abs()).unwrap());
    let mut probes: Vec<usize> = by_magnitude[..160.min(analytic.len())].to_vec();
    probes.extend((0..analytic.len()).step_by((analytic.len() / 80).max(1)));
    probes.sort_unstable();
    probes.dedup();

    let mut num_sq = 0.0;
    let mut ana_sq = 0.0;
    let mut diff_sq = 0.0;
    let mut perturbed = theta.clone();
    for &i in &probes {
        let eps = 1e-5 * theta[i].abs().max(1.0);
        perturbed[i] = theta[i] + eps;
        model.params.load_flat(&perturbed).unwrap();
        let up = total_loss_value(&model);
        perturbed[i] = theta[i] - eps;
        model.params.load_flat(&perturbed).unwrap();
        let down = total_loss_value(&model);
        perturbed[i] = theta[i];

        let numeric = (up - down) / (2.0 * eps);
        num_sq += numeric * numeric;
        ana_sq += analytic[i] * analytic[i];
        let d = numeric - analytic[i];
        diff_sq += d * d;
    }
    model.params.load_flat(&theta).unwrap();

    let rel = diff_sq.sqrt() / num_sq.sqrt().max(ana_sq.sqrt()).max(1e-12);
    check(
        rel < 1e-4,
        name,
        &format!(
            "relative error {rel:.3e} over {} probed coordinates of {} (tol 1e-4; d=16, \
             2 layers, M=5)",
            probes.len(),
            theta.len()
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion: nucleus truncation properties + Monte-Carlo frequencies
// ---------------------------------------------------------------------------

#[test]
fn nucleus_decoding_properties_hold() {
    let name = "nucleus-properties";
    const CASES: u32 = 1200;

    // Mix smooth random weights with a small discrete set so ties are
    // exercised heavily.
    let weights = prop_oneof![
        prop::collection::vec(0.01f64..100.0, 1..12),
        prop::collection::vec(prop::sample::select(vec![1.0f64, 2.0, 3.0, 5.0, 10.0]), 1..12),
    ];
    let strategy = (weights, 0.05f64..1.0f64);

    let mut runner = TestRunner::new(PropConfig { cases: CASES, ..PropConfig::default() });
    let outcome = runner.run(&strategy, |(weights, p)| {
        let total: f64 = weights.iter().sum();
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let dist = SelectionDistribution { probs: probs.clone() };
        let (nucleus, rescaled) = top_p_truncate(&dist, p);

        // Coverage: the nucleus reaches the requested mass.
        let mass: f64 = nucleus.iter().map(|&i| dist.probs[i]).sum();
        prop_assert!(mass >= p - 1e-9, "nucleus mass {mass} < p {p}");

        // Minimality: every proper prefix stays below p. The running sum is
        // accumulated in nucleus order, matching the truncation arithmetic.
        let mut cum = 0.0;
        for (j, &i) in nucleus.iter().enumerate() {
            if j + 1 < nucleus.len() {
                cum += dist.probs[i];
                prop_assert!(cum < p, "prefix of {} already reaches p", j + 1);
            }
        }

        // Order: probabilities non-increasing, ties broken toward the
        // lower index.
        for w in nucleus.windows(2) {
            let (a, b) = (w[0], w[1]);
            prop_assert!(
                dist.probs[a] > dist.probs[b] || (dist.probs[a] == dist.probs[b] && a < b),
                "nucleus order violated at {a} -> {b}"
            );
        }

        // Renormalization: rescaled is a distribution over the nucleus,
        // proportional to the original and zero elsewhere.
        let sum: f64 = rescaled.probs.iter().sum();
        prop_assert!((sum - 1.0).abs() < 1e-9, "rescaled sums to {sum}");
        for i in 0..probs.len() {
            if nucleus.contains(&i) {
                prop_assert!((rescaled.probs[i] - dist.probs[i] / mass).abs() < 1e-9);
            } else {
                prop_assert_eq!(rescaled.probs[i], 0.0);
            }
        }

        // Monotonicity in p: a smaller threshold yields a prefix of the
        // same ordered nucleus, a larger one an extension.
        let (smaller, _) = top_p_truncate(&dist, p * 0.37);
        prop_assert!(smaller.len() <= nucleus.len());
        prop_assert_eq!(&nucleus[..smaller.len()], &smaller[..]);
        let (larger, _) = top_p_truncate(&dist, (p + 1.0) / 2.0);
        prop_assert!(nucleus.len() <= larger.len());
        prop_assert_eq!(&larger[..nucleus.len()], &nucleus[..]);

        // p → 0 collapses to the greedy argmax (ties toward lower index).
        let (collapsed, _) = top_p_truncate(&dist, 1e-12);
        prop_assert_eq!(collapsed.len(), 1);
        prop_assert_eq!(collapsed[0], dist.argmax());

        Ok(())
    });
    if let Err(e) = outcome {
        check(false, name, &format!("property failed: {e}"));
    }

    // Monte-Carlo: sampled frequencies track the rescaled probabilities
    // within 2% absolute at 10,000 draws (one smooth case, one with ties).
    const DRAWS: usize = 10_000;
    let mut max_diff: f64 = 0.0;
    for (case, probs, p) in
        [(0usize, vec![0.4, 0.3, 0.2, 0.1], 0.85), (1, vec![0.3, 0.3, 0.2, 0.2], 0.80)]
    {
        let dist = SelectionDistribution { probs };
        let (nucleus, rescaled) = top_p_truncate(&dist, p);
        let mut counts = vec![0usize; dist.probs.len()];
        let mut rng = derive_rng(2024, &["acceptance", "nucleus-mc", &case.to_string()]);
        for _ in 0..DRAWS {
            counts[sample_nucleus(&nucleus, &rescaled, &mut rng)] += 1;
        }
        for i in 0..counts.len() {
            let freq = counts[i] as f64 / DRAWS as f64;
            max_diff = max_diff.max((freq - rescaled.probs[i]).abs());
        }
    }
    check(
        max_diff <= 0.02,
        name,
        &format!(
            "{CASES} random distributions; Monte-Carlo max |freq − prob| = {:.2}% \
             at {DRAWS} draws (tol 2%)",
            100.0 * max_diff
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion: overfit oracle on a synthetic marker-token corpus
// ---------------------------------------------------------------------------

/// Fifty samples of three 3-sentence documents. The two supporting facts
/// share a marker token ("zzgold") plus the sample's answer token; gold
/// positions rotate across samples so position alone cannot solve it.
fn marker_corpus(n: usize) -> Vec<Sample> {
    let fillers = [
        "the ledger notes routine deliveries of timber and rope",
        "a caretaker sweeps the long hall before dusk",
        "market stalls open late during the rainy season",
        "an old map hangs beside the stairwell",
    ];
    (0..n)
        .map(|i| {
            let answer = format!("widget{i:02}");
            let g0 = i % 3;
            let g1 = (i + 1) % 3;
            let documents = (0..3)
                .map(|d| ContextDocument {
                    title: format!("Doc {i}-{d}"),
                    sentences: (0..3)
                        .map(|s| {
                            if d == 0 && s == g0 {
                                format!("the zzgold record says {answer} anchors the first fact.")
                            } else if d == 1 && s == g1 {
                                format!("another zzgold entry ties {answer} to the outcome.")
                            } else {
                                format!("{}.", fillers[(i + 2 * d + 3 * s) % fillers.len()])
                            }
                        })
                        .collect(),
                })
                .collect();
            Sample::new(
                format!("syn{i:02}"),
                answer,
                "which widget anchors the fact?".into(),
                documents,
                vec![SentenceRef::new(0, g0), SentenceRef::new(1, g1)],
            )
            .unwrap()
        })
        .collect()
}

fn overfit_model(seed: u64) -> SelectorModel {
    let encoder = EncoderSpec {
        d: 32,
        pooling: Pooling::Mean,
        max_tokens: 32,
        vocab_buckets: 2048,
        seed,
        ..EncoderSpec::default()
    };
    let config = SelectorConfig {
        d: 32,
        n_layers: 1,
        n_heads: 2,
        temperature: 0.3,
        dropout: 0.0,
        max_sentences: 16,
        seed,
        ..SelectorConfig::default()
    };
    SelectorModel::new(config, encoder, None).unwrap()
}

#[test]
fn selector_overfits_marker_corpus() {
    let name = "overfit-oracle";
    let corpus = marker_corpus(50);

    // Dev = train, so `best_dev_f1` is the training greedy F1@2.
    let mut model = overfit_model(5);
    let cfg = TrainConfig {
        epochs: 30,
        batch_size: 5,
        lr: 0.01,
        warmup_ratio: 0.1,
        weight_decay: 0.0,
        clip_norm: Some(5.0),
        seed: 5,
        arrangement: Arrangement::Document,
        eval_k: 2,
    };
    let report = train(&mut model, &corpus, &corpus, &cfg).unwrap();
    let reached = report.best_dev_f1 >= 0.95;

    // A single sample must be reproduced exactly by greedy decoding after
    // overfitting on it alone.
    // An empty dev set keeps the final weights (a non-empty one would roll
    // back to the first epoch whose set-level F1 peaked, before the step
    // order is learned).
    let one = &corpus[..1];
    let mut single = overfit_model(9);
    let single_cfg = TrainConfig { epochs: 30, batch_size: 1, lr: 0.02, ..cfg.clone() };
    train(&mut single, one, &[], &single_cfg).unwrap();
    let gold = build_gold_composition(&one[0], Arrangement::Document, 0).unwrap().0.refs;
    let trace = greedy_decode(&single, &one[0], gold.len()).unwrap();
    let exact = trace.composition.refs == gold;

    check(
        reached && exact,
        name,
        &format!(
            "training F1@2 = {:.1}% at epoch {} of 30 (need ≥ 95%); single-sample greedy \
             reproduction: {}",
            100.0 * report.best_dev_f1,
            report.best_epoch,
            if exact {
                "exact".to_string()
            } else {
                format!("mismatch (greedy {:?} vs gold {:?})", trace.composition.refs, gold)
            }
        ),
    );
}

// ---------------------------------------------------------------------------
// Criterion: byte-identical pipeline runs on the bundled fixture
// ---------------------------------------------------------------------------

fn fixture() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/hotpot_tiny.json")
}

fn fixture_config() -> PathBuf {
    workspace_root().join("configs/fixture.toml")
}

/// Primary outputs of one full pipeline run, as workspace-relative names.
const PIPELINE_ARTIFACTS: &[&str] = &[
    "corpus.jsonl",
    "ckpt/selector.json",
    "ckpt/weights.bin",
    "ckpt/train-report.json",
    "greedy.jsonl",
    "sampled.jsonl",
    "generated.jsonl",
    "augmented.jsonl",
    "report.json",
];

fn run_pipeline(dir: &Path) {
    let config = s(&fixture_config());
    let input = s(&fixture());
    let corpus = s(&dir.join("corpus.jsonl"));
    let ckpt = s(&dir.join("ckpt"));
    let greedy = s(&dir.join("greedy.jsonl"));
    let sampled = s(&dir.join("sampled.jsonl"));
    let generated = s(&dir.join("generated.jsonl"));
    let augmented = s(&dir.join("augmented.jsonl"));
    let report = s(&dir.join("report.json"));
    let steps: &[Vec<&str>] = &[
        vec![
            "preprocess", "--config", &config, "--input", &input,
            "--format", "hotpotqa", "--out", &corpus,
        ],
        vec!["train", "--config", &config, "--data", &corpus, "--out", &ckpt],
        vec![
            "select", "--config", &config, "--checkpoint", &ckpt, "--data", &corpus,
            "--k", "2", "--out", &greedy,
        ],
        vec![
            "sample", "--config", &config, "--checkpoint", &ckpt, "--data", &corpus,
            "--out", &sampled,
        ],
        vec![
            "generate", "--config", &config, "--traces", &sampled, "--data", &corpus,
            "--backend", "template-stub", "--out", &generated,
        ],
        vec![
            "augment", "--config", &config, "--checkpoint", &ckpt, "--data", &corpus,
            "--out", &augmented,
        ],
        vec![
            "evaluate", "--config", &config, "--pred", &greedy, "--data", &corpus,
            "--k", "2,3", "--report", &report,
        ],
    ];
    for step in steps {
        assert_eq!(run_cli(step), 0, "pipeline step failed: {}", step.join(" "));
    }
}

#[test]
fn pipeline_runs_are_byte_identical() {
    let name = "pipeline-determinism";
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    run_pipeline(first.path());
    run_pipeline(second.path());

    // Manifests embed the (run-specific) input paths, so the byte-equality
    // contract binds the primary outputs listed above.
    let mut identical = true;
    let mut mismatch = String::new();
    for artifact in PIPELINE_ARTIFACTS {
        let a = std::fs::read(first.path().join(artifact)).unwrap();
        let b = std::fs::read(second.path().join(artifact)).unwrap();
        if a != b {
            identical = false;
            mismatch = format!("; first divergence: {artifact}");
            break;
        }
    }
    check(
        identical,
        name,
        &format!(
            "{} artifacts byte-identical across two seeded runs (20-sample fixture, \
             template-stub generator){mismatch}",
            PIPELINE_ARTIFACTS.len()
        ),
    );
}

