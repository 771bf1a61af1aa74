//! The `kcs` command-line interface: one subcommand per pipeline stage,
//! a shared TOML config with flag overrides, and a manifest written next
//! to every primary output. Exit codes: 0 success, 1 data errors, 2
//! configuration errors.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::io::{BufWriter, Write as _};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::baselines::{BaselineKind, BaselineRunner, BaselineSpec, ClsConfig, ClsTrainConfig, PairClassifier};
use crate::config::RunConfig;
use crate::corpus::{
    build_gold_composition, filter_answerable, load_dataset, make_splits, read_jsonl,
    write_jsonl, Arrangement, CompositionFlag, DatasetFormat, Sample, DEV_SIZE,
};
use crate::decoding::{
    greedy_decode, nucleus_decode, read_traces, write_traces, DecodeConfig, DecodeStrategy,
};
use crate::error::{KcsError, Result};
use crate::manifest::RunManifest;
use crate::metrics::selection_report;
use crate::qgen::{augment_dataset, generate_records, Generator, GeneratorSpec};
use crate::selector::{load_checkpoint, save_checkpoint, SelectorModel};

#[derive(Parser)]
#[command(
    name = "kcs",
    version,
    about = "Knowledge composition sampling: train sentence selectors over multi-document \
             contexts, sample diverse compositions, and generate multi-hop questions"
)]
struct Cli {
    /// TOML run-configuration file; flags override its values.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Master seed; overrides the config's seed and controls all randomness.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a raw dataset file into the corpus interchange JSONL.
    Preprocess(PreprocessArgs),
    /// Train the conditional sentence selector.
    Train(TrainArgs),
    /// Greedy composition selection with a trained selector.
    Select(SelectArgs),
    /// Sample diverse compositions by sentence-level nucleus decoding.
    Sample(SampleArgs),
    /// Composition selection with a retrieval, random, oracle, or
    /// classifier baseline.
    Baseline(BaselineArgs),
    /// Generate questions for precomputed composition traces.
    Generate(GenerateArgs),
    /// End-to-end augmentation: sample compositions, generate questions.
    Augment(AugmentArgs),
    /// Score composition traces against supporting facts.
    Evaluate(EvaluateArgs),
}

#[derive(Args)]
struct PreprocessArgs {
    /// Raw dataset JSON (array of records).
    #[arg(long, value_name = "FILE")]
    input: PathBuf,
    /// Dataset format: hotpotqa or 2wiki.
    #[arg(long, default_value = "hotpotqa")]
    format: String,
    /// Gold-composition ordering: original, shuffle, sorted, cluster,
    /// cropping, or document.
    #[arg(long, default_value = "document")]
    arrangement: String,
    /// Output corpus JSONL.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Training corpus JSONL (default: paths.data).
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
    /// Dev corpus JSONL; when absent and the data holds more than 500
    /// samples, a 500-sample dev set is extracted per the split protocol.
    #[arg(long, value_name = "FILE")]
    dev: Option<PathBuf>,
    /// Checkpoint output directory (default: paths.checkpoint_dir).
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SelectArgs {
    /// Trained selector checkpoint (default: paths.checkpoint_dir).
    #[arg(long, value_name = "DIR")]
    checkpoint: Option<PathBuf>,
    /// Corpus JSONL (default: paths.data).
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
    /// Composition length K (default: decode.k).
    #[arg(long)]
    k: Option<usize>,
    /// Output trace JSONL.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct SampleArgs {
    /// Trained selector checkpoint (default: paths.checkpoint_dir).
    #[arg(long, value_name = "DIR")]
    checkpoint: Option<PathBuf>,
    /// Corpus JSONL (default: paths.data).
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
    /// Nucleus mass threshold (default: decode.top_p).
    #[arg(long, value_name = "P")]
    top_p: Option<f64>,
    /// Composition length K (default: decode.k).
    #[arg(long)]
    k: Option<usize>,
    /// Compositions per sample (default: decode.n_q).
    #[arg(long)]
    nq: Option<usize>,
    /// Output trace JSONL.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct BaselineArgs {
    /// random, max, cls_topk, bm25, bm25_step, graph_entity, or
    /// graph_similarity.
    #[arg(long)]
    kind: String,
    /// Composition length K (default: decode.k).
    #[arg(long)]
    k: Option<usize>,
    /// Corpus JSONL (default: paths.data).
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
    /// Output trace JSONL.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Extra baseline parameter, repeatable (e.g. --param k1=1.2).
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    /// Trained pair-classifier checkpoint for cls_topk.
    #[arg(long, value_name = "DIR")]
    classifier: Option<PathBuf>,
    /// Train the cls_topk classifier on --data before selecting.
    #[arg(long)]
    train_classifier: bool,
    /// Save a classifier trained via --train-classifier here.
    #[arg(long, value_name = "DIR")]
    save_classifier: Option<PathBuf>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Composition trace JSONL to generate questions for.
    #[arg(long, value_name = "FILE")]
    traces: PathBuf,
    /// Corpus JSONL the traces refer to (default: paths.data).
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
    /// Generator backend: template-stub or seq2seq-finetuned.
    #[arg(long)]
    backend: Option<String>,
    /// Generator command line for the seq2seq backend.
    #[arg(long, value_name = "CMD")]
    gen_cmd: Option<String>,
    /// Output augmented-record JSONL.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct AugmentArgs {
    /// Trained selector checkpoint (default: paths.checkpoint_dir).
    #[arg(long, value_name = "DIR")]
    checkpoint: Option<PathBuf>,
    /// Corpus JSONL (default: paths.data).
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
    /// Compositions (and questions) per sample (default: decode.n_q).
    #[arg(long)]
    nq: Option<usize>,
    /// Nucleus mass threshold (default: decode.top_p).
    #[arg(long, value_name = "P")]
    top_p: Option<f64>,
    /// Composition length K (default: decode.k).
    #[arg(long)]
    k: Option<usize>,
    /// Generator backend: template-stub or seq2seq-finetuned.
    #[arg(long)]
    backend: Option<String>,
    /// Generator command line for the seq2seq backend.
    #[arg(long, value_name = "CMD")]
    gen_cmd: Option<String>,
    /// Output augmented-record JSONL.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    /// Composition trace JSONL to score.
    #[arg(long, value_name = "FILE")]
    pred: PathBuf,
    /// Corpus JSONL with the gold supporting facts (default: paths.data).
    #[arg(long, value_name = "FILE")]
    data: Option<PathBuf>,
    /// Comma-separated prefix lengths, e.g. 2,3.
    #[arg(long, default_value = "2,3")]
    k: String,
    /// Report JSON output.
    #[arg(long, value_name = "FILE")]
    report: PathBuf,
}

/// Parse and dispatch; callable in-process. Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default()).try_init();
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    let config = RunConfig::resolve(cli.config.as_deref(), cli.seed)?;
    match cli.command {
        Command::Preprocess(args) => cmd_preprocess(args, &config),
        Command::Train(args) => cmd_train(args, &config),
        Command::Select(args) => cmd_select(args, &config),
        Command::Sample(args) => cmd_sample(args, &config),
        Command::Baseline(args) => cmd_baseline(args, &config),
        Command::Generate(args) => cmd_generate(args, &config),
        Command::Augment(args) => cmd_augment(args, &config),
        Command::Evaluate(args) => cmd_evaluate(args, &config),
    }
}

fn data_path(flag: Option<PathBuf>, config: &RunConfig) -> Result<PathBuf> {
    flag.or_else(|| config.paths.data.clone()).ok_or_else(|| {
        KcsError::Config("no corpus given: pass --data or set paths.data".into())
    })
}

fn checkpoint_path(flag: Option<PathBuf>, config: &RunConfig) -> Result<PathBuf> {
    flag.or_else(|| config.paths.checkpoint_dir.clone()).ok_or_else(|| {
        KcsError::Config(
            "no checkpoint given: pass --checkpoint/--out or set paths.checkpoint_dir".into(),
        )
    })
}

fn load_corpus(path: &Path) -> Result<Vec<Sample>> {
    let samples = read_jsonl(path)?;
    if samples.is_empty() {
        return Err(KcsError::Data(format!("{} holds no samples", path.display())));
    }
    Ok(samples)
}

fn generator_spec(
    config: &RunConfig,
    backend: Option<&str>,
    gen_cmd: Option<String>,
) -> Result<GeneratorSpec> {
    let mut spec = config.generator.clone();
    if let Some(backend) = backend {
        spec.backend = backend.parse()?;
    }
    if let Some(cmd) = gen_cmd {
        spec.model_id = cmd;
    }
    Ok(spec)
}

fn create_out(path: &Path) -> Result<BufWriter<std::fs::File>> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| KcsError::io(parent, e))?;
    }
    Ok(BufWriter::new(
        std::fs::File::create(path).map_err(|e| KcsError::io(path, e))?,
    ))
}

fn cmd_preprocess(args: PreprocessArgs, config: &RunConfig) -> Result<()> {
    let format: DatasetFormat = args.format.parse()?;
    let arrangement: Arrangement = args.arrangement.parse()?;
    let seed = config.seed.unwrap_or(0);

    let (samples, load_report) = load_dataset(&args.input, format)?;
    let total = samples.len() + load_report.dropped();
    let mut kept = filter_answerable(samples);
    let yes_no_dropped = total - load_report.dropped() - kept.len();
    let mut fallbacks = 0usize;
    for sample in &mut kept {
        let (gold, flag) = build_gold_composition(sample, arrangement, seed)?;
        if flag == CompositionFlag::AnswerNotFound {
            fallbacks += 1;
        }
        sample.gold_composition = Some(gold);
    }
    if let Some(parent) = args.out.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| KcsError::io(parent, e))?;
    }
    write_jsonl(&args.out, &kept)?;

    let settings = serde_json::json!({
        "format": format, "arrangement": arrangement, "seed": seed,
    });
    RunManifest::new("preprocess", &settings, config.seed)?
        .add_input(&args.input)?
        .write_beside(&args.out)?;

    println!(
        "preprocessed {} of {} records ({} unresolvable, {} duplicate-title, {} yes/no dropped; \
         {} answer-location fallbacks) -> {}",
        kept.len(),
        total,
        load_report.dropped_unresolvable,
        load_report.dropped_duplicate_title,
        yes_no_dropped,
        fallbacks,
        args.out.display()
    );
    Ok(())
}

fn cmd_train(args: TrainArgs, config: &RunConfig) -> Result<()> {
    let data = data_path(args.data, config)?;
    let out_dir = checkpoint_path(args.out, config)?;
    let samples = load_corpus(&data)?;
    let seed = config.train.seed;

    let (train_set, dev_set) = match &args.dev {
        Some(dev) => (samples, load_corpus(dev)?),
        None if samples.len() > DEV_SIZE => {
            let split = make_splits(samples, Vec::new(), seed)?;
            (split.train, split.dev)
        }
        None => {
            log::info!("corpus too small for a {DEV_SIZE}-sample dev extraction; training without dev");
            (samples, Vec::new())
        }
    };

    let cache = config.paths.cache_dir.as_deref();
    let mut model = SelectorModel::new(config.selector.clone(), config.encoder.clone(), cache)?;
    let report = crate::selector::train(&mut model, &train_set, &dev_set, &config.train)?;

    std::fs::create_dir_all(&out_dir).map_err(|e| KcsError::io(&out_dir, e))?;
    save_checkpoint(&model, &out_dir)?;
    let report_path = out_dir.join("train-report.json");
    let report_json = serde_json::to_string_pretty(&report)
        .map_err(|e| KcsError::Data(format!("serializing train report: {e}")))?;
    std::fs::write(&report_path, report_json).map_err(|e| KcsError::io(&report_path, e))?;

    let settings = serde_json::json!({
        "selector": config.selector, "encoder": config.encoder, "train": config.train,
    });
    let mut manifest = RunManifest::new("train", &settings, config.seed)?;
    manifest.add_input(&data)?;
    if let Some(dev) = &args.dev {
        manifest.add_input(dev)?;
    }
    manifest.write_beside(&out_dir)?;

    if dev_set.is_empty() {
        println!(
            "trained {} epochs ({} steps, no dev set) -> {}",
            report.epochs_run,
            report.steps,
            out_dir.display()
        );
    } else {
        println!(
            "trained {} epochs ({} steps); best dev F1@{} {:.4} at epoch {} -> {}",
            report.epochs_run,
            report.steps,
            config.train.eval_k,
            report.best_dev_f1,
            report.best_epoch,
            out_dir.display()
        );
    }
    Ok(())
}

fn cmd_select(args: SelectArgs, config: &RunConfig) -> Result<()> {
    let ckpt = checkpoint_path(args.checkpoint, config)?;
    let data = data_path(args.data, config)?;
    let k = args.k.unwrap_or(config.decode.k);
    if k == 0 {
        return Err(KcsError::Config("K must be at least 1".into()));
    }

    let model = load_checkpoint(&ckpt, config.paths.cache_dir.as_deref())?;
    let samples = load_corpus(&data)?;
    let traces = samples
        .iter()
        .map(|s| greedy_decode(&model, s, k))
        .collect::<Result<Vec<_>>>()?;
    write_traces(&args.out, &traces)?;

    let settings = serde_json::json!({"strategy": "greedy", "k": k});
    RunManifest::new("select", &settings, config.seed)?
        .add_input(&ckpt)?
        .add_input(&data)?
        .write_beside(&args.out)?;

    println!(
        "selected {} greedy compositions (K={k}) -> {}",
        traces.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_sample(args: SampleArgs, config: &RunConfig) -> Result<()> {
    let ckpt = checkpoint_path(args.checkpoint, config)?;
    let data = data_path(args.data, config)?;
    let decode = DecodeConfig {
        strategy: DecodeStrategy::Nucleus,
        top_p: args.top_p.unwrap_or(config.decode.top_p),
        k: args.k.unwrap_or(config.decode.k),
        n_q: args.nq.unwrap_or(config.decode.n_q),
        seed: config.decode.seed,
    };
    decode.validate()?;

    let model = load_checkpoint(&ckpt, config.paths.cache_dir.as_deref())?;
    let samples = load_corpus(&data)?;
    let mut traces = Vec::with_capacity(samples.len() * decode.n_q);
    for sample in &samples {
        traces.extend(nucleus_decode(&model, sample, &decode)?);
    }
    write_traces(&args.out, &traces)?;

    RunManifest::new("sample", &decode, config.seed)?
        .add_input(&ckpt)?
        .add_input(&data)?
        .write_beside(&args.out)?;

    println!(
        "sampled {} compositions ({} samples x {} draws, K={}, top-p {}) -> {}",
        traces.len(),
        samples.len(),
        decode.n_q,
        decode.k,
        decode.top_p,
        args.out.display()
    );
    Ok(())
}

fn parse_param_pairs(pairs: &[String]) -> Result<BTreeMap<String, String>> {
    let mut params = BTreeMap::new();
    for pair in pairs {
        let (key, value) = pair.split_once('=').ok_or_else(|| {
            KcsError::Config(format!("--param expects KEY=VALUE, got `{pair}`"))
        })?;
        params.insert(key.trim().to_string(), value.trim().to_string());
    }
    Ok(params)
}

fn cmd_baseline(args: BaselineArgs, config: &RunConfig) -> Result<()> {
    let kind: BaselineKind = args.kind.parse()?;
    let data = data_path(args.data, config)?;
    let k = args.k.unwrap_or(config.decode.k);
    let seed = config.seed.unwrap_or(0);

    let mut params = parse_param_pairs(&args.params)?;
    if let Some(dir) = &args.classifier {
        params.insert("classifier".into(), dir.display().to_string());
    }

    let samples = load_corpus(&data)?;
    let classifier = if args.train_classifier {
        if kind != BaselineKind::ClsTopk {
            return Err(KcsError::Config(
                "--train-classifier only applies to --kind cls_topk".into(),
            ));
        }
        let cls_config =
            ClsConfig { encoder: config.encoder.clone(), seed, ..Default::default() };
        let mut classifier = PairClassifier::new(cls_config)?;
        let train_config = ClsTrainConfig { seed, ..Default::default() };
        let report = classifier.train(&samples, &train_config)?;
        log::info!("trained pair classifier: {} steps", report.steps);
        if let Some(dir) = &args.save_classifier {
            std::fs::create_dir_all(dir).map_err(|e| KcsError::io(dir, e))?;
            classifier.save(dir)?;
        }
        Some(classifier)
    } else {
        None
    };

    let spec = BaselineSpec::new(kind, k, seed, params.clone())?;
    let runner = BaselineRunner::new(spec, &config.encoder, classifier)?;
    let traces = samples
        .iter()
        .map(|s| runner.run(s))
        .collect::<Result<Vec<_>>>()?;
    write_traces(&args.out, &traces)?;

    let settings = serde_json::json!({
        "kind": kind, "k": k, "seed": seed, "params": params,
        "trained_classifier": args.train_classifier,
    });
    let mut manifest = RunManifest::new("baseline", &settings, config.seed)?;
    manifest.add_input(&data)?;
    if let Some(dir) = &args.classifier {
        manifest.add_input(dir)?;
    }
    manifest.write_beside(&args.out)?;

    println!(
        "baseline {kind} (K={k}) over {} samples -> {}",
        traces.len(),
        args.out.display()
    );
    Ok(())
}

fn cmd_generate(args: GenerateArgs, config: &RunConfig) -> Result<()> {
    let data = data_path(args.data, config)?;
    let spec = generator_spec(config, args.backend.as_deref(), args.gen_cmd)?;
    let samples = load_corpus(&data)?;
    let traces = read_traces(&args.traces)?;

    let mut generator = Generator::new(spec.clone())?;
    let mut out = create_out(&args.out)?;
    let report = generate_records(&samples, &traces, &mut generator, &mut out)?;
    out.flush().map_err(|e| KcsError::io(&args.out, e))?;
    generator.finish()?;

    RunManifest::new("generate", &spec, config.seed)?
        .add_input(&args.traces)?
        .add_input(&data)?
        .write_beside(&args.out)?;

    println!(
        "generated {} questions from {} traces ({} failures) -> {}",
        report.n_records,
        traces.len(),
        report.n_failures,
        args.out.display()
    );
    Ok(())
}

fn cmd_augment(args: AugmentArgs, config: &RunConfig) -> Result<()> {
    let ckpt = checkpoint_path(args.checkpoint, config)?;
    let data = data_path(args.data, config)?;
    let decode = DecodeConfig {
        strategy: DecodeStrategy::Nucleus,
        top_p: args.top_p.unwrap_or(config.decode.top_p),
        k: args.k.unwrap_or(config.decode.k),
        n_q: args.nq.unwrap_or(config.decode.n_q),
        seed: config.decode.seed,
    };
    decode.validate()?;
    let spec = generator_spec(config, args.backend.as_deref(), args.gen_cmd)?;

    let model = load_checkpoint(&ckpt, config.paths.cache_dir.as_deref())?;
    let samples = load_corpus(&data)?;
    let mut generator = Generator::new(spec.clone())?;
    let mut out = create_out(&args.out)?;
    let report = augment_dataset(&samples, &model, &decode, &mut generator, &mut out)?;
    out.flush().map_err(|e| KcsError::io(&args.out, e))?;
    generator.finish()?;

    let settings = serde_json::json!({"decode": decode, "generator": spec});
    RunManifest::new("augment", &settings, config.seed)?
        .add_input(&ckpt)?
        .add_input(&data)?
        .write_beside(&args.out)?;

    println!(
        "augmented {} samples into {} records ({} failures) -> {}",
        report.n_samples,
        report.n_records,
        report.n_failures,
        args.out.display()
    );
    Ok(())
}

fn parse_ks(text: &str) -> Result<Vec<usize>> {
    let mut ks = Vec::new();
    for part in text.split(',') {
        let k: usize = part
            .trim()
            .parse()
            .map_err(|_| KcsError::Config(format!("invalid K list `{text}`")))?;
        if k == 0 {
            return Err(KcsError::Config("K values must be at least 1".into()));
        }
        if !ks.contains(&k) {
            ks.push(k);
        }
    }
    Ok(ks)
}

fn cmd_evaluate(args: EvaluateArgs, config: &RunConfig) -> Result<()> {
    let data = data_path(args.data, config)?;
    let ks = parse_ks(&args.k)?;
    let samples = load_corpus(&data)?;
    let traces = read_traces(&args.pred)?;
    if traces.is_empty() {
        return Err(KcsError::Data(format!("{} holds no traces", args.pred.display())));
    }

    let by_id: std::collections::HashMap<&str, &Sample> =
        samples.iter().map(|s| (s.id.as_str(), s)).collect();
    let mut predictions = Vec::with_capacity(traces.len());
    let mut distinct = std::collections::BTreeSet::new();
    for trace in &traces {
        let sample = by_id.get(trace.sample_id.as_str()).copied().ok_or_else(|| {
            KcsError::Data(format!(
                "trace sample id `{}` not present in {}",
                trace.sample_id,
                data.display()
            ))
        })?;
        distinct.insert(sample.id.as_str());
        predictions.push((trace.composition.refs.clone(), sample.supporting_facts.clone()));
    }

    let report = selection_report(&predictions, &ks)?;
    let mut metrics = BTreeMap::new();
    for (k, (p, r, f1)) in &report.per_k {
        metrics.insert(format!("P@{k}"), *p);
        metrics.insert(format!("R@{k}"), *r);
        metrics.insert(format!("F1@{k}"), *f1);
    }
    let report_json = serde_json::json!({
        "n_samples": distinct.len(),
        "n_traces": traces.len(),
        "metrics": metrics,
    });
    let mut out = create_out(&args.report)?;
    let text = serde_json::to_string_pretty(&report_json)
        .map_err(|e| KcsError::Data(format!("serializing report: {e}")))?;
    writeln!(out, "{text}").map_err(|e| KcsError::io(&args.report, e))?;
    out.flush().map_err(|e| KcsError::io(&args.report, e))?;

    RunManifest::new("evaluate", &serde_json::json!({"k": ks}), config.seed)?
        .add_input(&args.pred)?
        .add_input(&data)?
        .write_beside(&args.report)?;

    for k in &ks {
        let (p, r, f1) = report.per_k[k];
        println!("K={k}  P={p:.2}  R={r:.2}  F1={f1:.2}");
    }
    println!("report -> {}", args.report.display());
    Ok(())
}
