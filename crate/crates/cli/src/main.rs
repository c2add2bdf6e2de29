mod config;

use std::fs::File;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context};
use capr::backends::synth_data::{synthetic_log, synthetic_prompts, SyntheticLogConfig};
use capr::backends::{BackendKind, Backends};
use capr::capability::{GenerateAndScore, PromptScorer, QuantizerSpec};
use capr::corpus::{self, TrainingTriplet};
use capr::evaluation::{
    compare, delta_sweep, evaluate_policy, save_reports, EvalSettings, Policy, PolicyKind, StyleSuffixBaseline,
    SweepFactor,
};
use capr::log_store::{self, extract_pairs, histogram_csv, segment_sessions, session_report, LogStore, Session};
use capr::surrogate::{self, Surrogate, SurrogateModel};
use capr::tuner::{self, DeltaArtifact, DeltaVector, ObjectiveEstimator, TunerConfig};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use crate::config::RunConfig;

#[derive(Debug, Parser)]
#[command(name = "capr", version, about = "Capability-aware prompt reformulation pipeline")]
struct Cli {
    /// JSON run config. Flags override its values.
    #[arg(long, global = true, env = "CAPR_CONFIG")]
    config: Option<PathBuf>,
    /// Seed for every random choice in the run.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for backend calls.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Backend family.
    #[arg(long, global = true, value_enum)]
    backend: Option<BackendArg>,
    /// Style lexicon JSON ({"style_terms": [...], "fillers": [...]}).
    #[arg(long, global = true)]
    lexicon: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum BackendArg {
    Synthetic,
    Remote,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write a synthetic interaction log (NDJSON).
    SynthLog(SynthLogArgs),
    /// Write synthetic prompts, one per line.
    SynthPrompts(SynthPromptsArgs),
    /// Ingest an NDJSON interaction log into a store directory.
    Ingest(IngestArgs),
    /// Segment the store into sessions and extract reformulation pairs.
    Sessions(SessionArgs),
    /// Per-session initial vs final quality report (CSV).
    Report(ReportArgs),
    /// Build, split and export the conditional training corpus.
    Corpus(CorpusArgs),
    /// Fit or query the prompt-only quality surrogate.
    #[command(subcommand)]
    Surrogate(SurrogateCommand),
    /// Search the capability delta by Bayesian optimization.
    Tune(TuneArgs),
    /// Evaluate the tuned policy against baselines.
    Eval(EvalArgs),
    /// Sweep one delta component, others frozen.
    Sweep(SweepArgs),
    /// Reformulate a single prompt with the tuned delta.
    Reformulate(ReformulateArgs),
}

#[derive(Debug, Args)]
struct SynthLogArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 20)]
    users: usize,
    #[arg(long, default_value_t = 5)]
    sessions_per_user: usize,
    #[arg(long, default_value_t = 5)]
    max_steps: usize,
}

#[derive(Debug, Args)]
struct SynthPromptsArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 100)]
    count: usize,
}

#[derive(Debug, Args)]
struct IngestArgs {
    /// NDJSON input; `-` reads stdin.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    store: Option<PathBuf>,
}

#[derive(Debug, Args, Clone)]
struct SegmentFlags {
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long)]
    gap_seconds: Option<i64>,
    #[arg(long)]
    sim_threshold: Option<f64>,
}

#[derive(Debug, Args)]
struct SessionArgs {
    #[command(flatten)]
    seg: SegmentFlags,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReportArgs {
    #[command(flatten)]
    seg: SegmentFlags,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write initial/final score histograms.
    #[arg(long)]
    histogram: Option<PathBuf>,
    #[arg(long, default_value_t = 0.1)]
    bin_width: f64,
}

#[derive(Debug, Args)]
struct CorpusArgs {
    #[command(flatten)]
    seg: SegmentFlags,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    val_fraction: Option<f64>,
    #[arg(long)]
    k: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum SurrogateCommand {
    /// Fit on the scored pairs of a corpus directory.
    Fit {
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        lambda: Option<f64>,
    },
    /// Print predicted scores for a prompt.
    Predict {
        #[arg(long)]
        prompt: String,
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

#[derive(Debug, Args, Clone)]
struct ModelFlags {
    #[arg(long)]
    corpus: Option<PathBuf>,
    #[arg(long)]
    surrogate: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct TuneArgs {
    #[command(flatten)]
    model: ModelFlags,
    /// Validation prompts, one per line.
    #[arg(long)]
    prompts: Option<PathBuf>,
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    n_initial: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    model: ModelFlags,
    #[arg(long)]
    delta: Option<PathBuf>,
    /// Test prompts, one per line.
    #[arg(long)]
    prompts: Option<PathBuf>,
    #[arg(long)]
    images_per_prompt: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    model: ModelFlags,
    #[arg(long, value_parser = ["overall", "similarity", "aesthetic", "length"])]
    factor: String,
    /// Comma-separated values or an inclusive range `a..b`.
    #[arg(long, default_value = "0..9")]
    values: String,
    /// Frozen deltas `overall,similarity,aesthetic,length`.
    #[arg(long)]
    frozen: Option<String>,
    #[arg(long)]
    prompts: Option<PathBuf>,
    #[arg(long)]
    images_per_prompt: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ReformulateArgs {
    #[command(flatten)]
    model: ModelFlags,
    #[arg(long)]
    prompt: String,
    /// Tuned delta; without it the reference delta (9, 0, 9, 5) is used.
    #[arg(long)]
    delta: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            // Some library errors already print their cause inline.
            let mut msg = e.to_string();
            for cause in e.chain().skip(1).map(|c| c.to_string()) {
                if !msg.ends_with(&cause) {
                    msg = format!("{msg}: {cause}");
                }
            }
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Some(b) = cli.backend {
        cfg.backend.backend = match b {
            BackendArg::Synthetic => BackendKind::Synthetic,
            BackendArg::Remote => BackendKind::Remote,
        };
    }
    if let Some(l) = &cli.lexicon {
        cfg.backend.lexicon_path = Some(l.clone());
    }
    cfg.validate()?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build_global()
        .context("configuring worker pool")?;

    match cli.command {
        Command::SynthLog(a) => synth_log(&cfg, a),
        Command::SynthPrompts(a) => {
            let backends = Backends::from_config(&cfg.backend)?;
            write_lines(&a.out, &synthetic_prompts(a.count, cfg.seed, &backends.lexicon))
        }
        Command::Ingest(a) => ingest(&cfg, a),
        Command::Sessions(a) => sessions(&mut cfg, a),
        Command::Report(a) => report(&mut cfg, a),
        Command::Corpus(a) => build_corpus(&mut cfg, a),
        Command::Surrogate(c) => surrogate_cmd(&cfg, c),
        Command::Tune(a) => tune(&mut cfg, a),
        Command::Eval(a) => eval(&mut cfg, a),
        Command::Sweep(a) => sweep(&mut cfg, a),
        Command::Reformulate(a) => reformulate(&mut cfg, a),
    }
}

fn print_json<T: serde::Serialize>(v: &T) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn ensure_parent(path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn write_file(path: &Path, body: &str) -> anyhow::Result<()> {
    ensure_parent(path)?;
    std::fs::write(path, body).with_context(|| format!("writing {}", path.display()))
}

fn write_lines(path: &Path, lines: &[String]) -> anyhow::Result<()> {
    let mut body = lines.join("\n");
    body.push('\n');
    write_file(path, &body)
}

fn read_prompts(path: &Path) -> anyhow::Result<Vec<String>> {
    let raw = std::fs::read_to_string(path).with_context(|| format!("reading prompts {}", path.display()))?;
    let prompts: Vec<String> = raw.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect();
    if prompts.is_empty() {
        bail!("no prompts in {}", path.display());
    }
    Ok(prompts)
}

fn synth_log(cfg: &RunConfig, a: SynthLogArgs) -> anyhow::Result<()> {
    let backends = Backends::from_config(&cfg.backend)?;
    let records = synthetic_log(
        &SyntheticLogConfig {
            users: a.users,
            sessions_per_user: a.sessions_per_user,
            max_steps: a.max_steps,
            seed: cfg.seed,
            ..Default::default()
        },
        &backends.lexicon,
    );
    let mut body = String::new();
    for r in &records {
        body.push_str(&serde_json::to_string(r)?);
        body.push('\n');
    }
    write_file(&a.out, &body)?;
    info!("wrote {} records to {}", records.len(), a.out.display());
    Ok(())
}

fn ingest(cfg: &RunConfig, a: IngestArgs) -> anyhow::Result<()> {
    let store_dir = a.store.unwrap_or_else(|| cfg.paths.store.clone());
    let (store, report) = if a.input.as_os_str() == "-" {
        log_store::ingest(std::io::stdin().lock())?
    } else {
        let f = File::open(&a.input).with_context(|| format!("opening {}", a.input.display()))?;
        log_store::ingest(BufReader::new(f))?
    };
    store.save(&store_dir)?;
    print_json(&report)
}

fn apply_seg(cfg: &mut RunConfig, seg: &SegmentFlags) -> anyhow::Result<PathBuf> {
    if let Some(g) = seg.gap_seconds {
        cfg.segmentation.gap_seconds = g;
    }
    if let Some(t) = seg.sim_threshold {
        cfg.segmentation.sim_threshold = t;
    }
    cfg.segmentation.validate()?;
    Ok(seg.store.clone().unwrap_or_else(|| cfg.paths.store.clone()))
}

fn load_sessions(cfg: &RunConfig, store_dir: &Path, backends: &Backends) -> anyhow::Result<Vec<Session>> {
    let store = LogStore::load(store_dir)?;
    Ok(segment_sessions(&store, cfg.segmentation, backends.similarity.as_ref())?)
}

#[derive(serde::Serialize)]
struct SessionsOut<'a> {
    segmentation: capr::log_store::SegmentationParams,
    sessions: &'a [Session],
    pairs: &'a [capr::log_store::ReformulationPair],
}

fn sessions(cfg: &mut RunConfig, a: SessionArgs) -> anyhow::Result<()> {
    let store_dir = apply_seg(cfg, &a.seg)?;
    let backends = Backends::from_config(&cfg.backend)?;
    let sessions = load_sessions(cfg, &store_dir, &backends)?;
    let pairs = extract_pairs(&sessions);
    let out = a.out.unwrap_or_else(|| cfg.paths.sessions.clone());
    let doc = SessionsOut { segmentation: cfg.segmentation, sessions: &sessions, pairs: &pairs };
    write_file(&out, &(serde_json::to_string_pretty(&doc)? + "\n"))?;
    print_json(&serde_json::json!({
        "gap_seconds": cfg.segmentation.gap_seconds,
        "sim_threshold": cfg.segmentation.sim_threshold,
        "sessions": sessions.len(),
        "pairs": pairs.len(),
    }))
}

fn scorer_for<'a>(backends: &'a Backends, cfg: &RunConfig) -> GenerateAndScore<'a> {
    GenerateAndScore {
        generator: backends.generator.as_ref(),
        scorer: backends.scorer.as_ref(),
        images_per_prompt: cfg.corpus.images_per_prompt,
        seed: cfg.seed,
        steps: cfg.corpus.steps,
    }
}

fn report(cfg: &mut RunConfig, a: ReportArgs) -> anyhow::Result<()> {
    let store_dir = apply_seg(cfg, &a.seg)?;
    let backends = Backends::from_config(&cfg.backend)?;
    let sessions = load_sessions(cfg, &store_dir, &backends)?;
    let scorer = scorer_for(&backends, cfg);
    let rep = session_report(&sessions, Some(&scorer as &dyn PromptScorer));
    let out = a.out.unwrap_or_else(|| cfg.paths.reports.join("sessions.csv"));
    write_file(&out, &rep.to_csv()?)?;
    if let Some(h) = a.histogram {
        write_file(&h, &histogram_csv(&rep.rows, a.bin_width)?)?;
    }
    print_json(&serde_json::json!({"rows": rep.rows.len(), "skipped": rep.skipped}))
}

fn build_corpus(cfg: &mut RunConfig, a: CorpusArgs) -> anyhow::Result<()> {
    let store_dir = apply_seg(cfg, &a.seg)?;
    if let Some(k) = a.k {
        cfg.k = k;
    }
    if let Some(v) = a.val_fraction {
        cfg.corpus.val_fraction = v;
    }
    cfg.validate()?;
    let backends = Backends::from_config(&cfg.backend)?;
    let sessions = load_sessions(cfg, &store_dir, &backends)?;
    let pairs = extract_pairs(&sessions);
    let scorer = scorer_for(&backends, cfg);
    let (scored, unscorable) = corpus::resolve_pair_scores(&pairs, Some(&scorer as &dyn PromptScorer));
    if scored.is_empty() {
        return Err(capr::CaprError::EmptyCorpus.into());
    }
    let spec = QuantizerSpec::fit(&corpus::pooled_scores(&scored), cfg.k)?;
    let (triplets, mut drops) = corpus::build_triplets(&scored, &spec, None)?;
    drops.unscorable += unscorable;
    let (train, val) = corpus::split(&triplets, cfg.corpus.val_fraction, cfg.seed)?;
    let out = a.out.unwrap_or_else(|| cfg.paths.corpus.clone());
    let manifest = corpus::export(&train, &val, &spec, drops, &out)?;
    corpus::write_scored_pairs(&scored, &out.join(corpus::SCORED_PAIRS_FILE))?;
    print_json(&manifest)
}

fn surrogate_cmd(cfg: &RunConfig, c: SurrogateCommand) -> anyhow::Result<()> {
    let backends = Backends::from_config(&cfg.backend)?;
    match c {
        SurrogateCommand::Fit { corpus: dir, out, lambda } => {
            let dir = dir.unwrap_or_else(|| cfg.paths.corpus.clone());
            let pairs = corpus::load_scored_pairs(&dir.join(corpus::SCORED_PAIRS_FILE))?;
            let data = surrogate::training_data(&pairs);
            let model = SurrogateModel::fit(&data, lambda.unwrap_or(cfg.surrogate.lambda), &backends.lexicon)?;
            let out = out.unwrap_or_else(|| cfg.paths.surrogate.clone());
            ensure_parent(&out)?;
            model.save(&out)?;
            print_json(&serde_json::json!({"samples": model.samples, "lambda": model.lambda}))
        }
        SurrogateCommand::Predict { prompt, model } => {
            let path = model.unwrap_or_else(|| cfg.paths.surrogate.clone());
            let s = Surrogate::new(SurrogateModel::load(&path)?, backends.lexicon.clone())?;
            print_json(&capr::surrogate::QualityPredictor::predict(&s, &prompt)?)
        }
    }
}

struct Models {
    backends: Backends,
    quantizer: QuantizerSpec,
    surrogate: Surrogate,
    corpus_dir: PathBuf,
}

fn load_models(cfg: &RunConfig, flags: &ModelFlags) -> anyhow::Result<Models> {
    let backends = Backends::from_config(&cfg.backend)?;
    let corpus_dir = flags.corpus.clone().unwrap_or_else(|| cfg.paths.corpus.clone());
    let quantizer = QuantizerSpec::load(&corpus_dir.join(corpus::QUANTIZER_FILE))?;
    if quantizer.k != cfg.k {
        bail!("corpus quantizer has k = {} but the run config says {}", quantizer.k, cfg.k);
    }
    let sur_path = flags.surrogate.clone().unwrap_or_else(|| cfg.paths.surrogate.clone());
    let surrogate = Surrogate::new(SurrogateModel::load(&sur_path)?, backends.lexicon.clone())?;
    Ok(Models { backends, quantizer, surrogate, corpus_dir })
}

/// Prompts from a file, or the distinct initial prompts of the validation split.
fn prompt_set(explicit: Option<PathBuf>, configured: &Option<PathBuf>, corpus_dir: &Path) -> anyhow::Result<Vec<String>> {
    if let Some(p) = explicit.or_else(|| configured.clone()) {
        return read_prompts(&p);
    }
    let val: Vec<TrainingTriplet> = corpus::load_split(&corpus_dir.join(corpus::VAL_FILE))?;
    let mut seen = std::collections::BTreeSet::new();
    let prompts: Vec<String> = val
        .into_iter()
        .map(|t| t.initial_prompt)
        .filter(|p| seen.insert(p.clone()))
        .collect();
    if prompts.is_empty() {
        bail!("the corpus validation split is empty; pass --prompts");
    }
    Ok(prompts)
}

fn tune(cfg: &mut RunConfig, a: TuneArgs) -> anyhow::Result<()> {
    if let Some(b) = a.budget {
        cfg.tuner.budget = b;
    }
    if let Some(n) = a.n_initial {
        cfg.tuner.n_initial = n;
    }
    let m = load_models(cfg, &a.model)?;
    let prompts = prompt_set(a.prompts, &cfg.paths.validation_prompts, &m.corpus_dir)?;
    let est = ObjectiveEstimator {
        prompts: &prompts,
        predictor: &m.surrogate,
        quantizer: &m.quantizer,
        reformulator: m.backends.reformulator.as_ref(),
        generator: m.backends.generator.as_ref(),
        scorer: m.backends.scorer.as_ref(),
        seed: cfg.seed,
        steps: cfg.tuner.steps,
        images_per_prompt: cfg.tuner.images_per_prompt,
    };
    let tc = TunerConfig {
        budget: cfg.tuner.budget,
        n_initial: cfg.tuner.n_initial,
        seed: cfg.seed,
        hyper: cfg.tuner.hyper,
        xi: cfg.tuner.xi,
    };
    let result = tuner::tune(&cfg.search_space(), &tc, |d| est.evaluate(d))?;
    let artifact = DeltaArtifact::new(&result, cfg.k, cfg.seed, cfg.tuner.budget);
    let out = a.out.unwrap_or_else(|| cfg.paths.delta.clone());
    ensure_parent(&out)?;
    artifact.save(&out)?;
    print_json(&serde_json::json!({
        "best_delta": result.best_delta,
        "best_value": result.best_value,
        "calls_used": result.calls_used,
    }))
}

fn load_delta(path: Option<PathBuf>, cfg: &RunConfig, required: bool) -> anyhow::Result<Option<DeltaVector>> {
    let explicit = path.is_some();
    let path = path.unwrap_or_else(|| cfg.paths.delta.clone());
    if !explicit && !required && !path.exists() {
        return Ok(None);
    }
    Ok(Some(DeltaArtifact::load(&path)?.best_delta))
}

fn eval(cfg: &mut RunConfig, a: EvalArgs) -> anyhow::Result<()> {
    if let Some(n) = a.images_per_prompt {
        cfg.eval.images_per_prompt = n;
    }
    let m = load_models(cfg, &a.model)?;
    let delta = load_delta(a.delta, cfg, true)?.ok_or_else(|| anyhow!("no tuned delta"))?;
    let prompts = prompt_set(a.prompts, &cfg.paths.test_prompts, &m.corpus_dir)?;
    let settings = EvalSettings { images_per_prompt: cfg.eval.images_per_prompt, seed: cfg.seed, steps: cfg.eval.steps };
    let suffix = StyleSuffixBaseline::new(m.backends.lexicon.clone());
    let policies = [
        Policy::conditioned("tuned", m.backends.reformulator.as_ref(), &m.surrogate, &m.quantizer, delta),
        Policy::identity(),
        Policy { name: "style-suffix".into(), kind: PolicyKind::Unconditional(&suffix) },
    ];
    let runs = policies
        .iter()
        .map(|p| evaluate_policy(p, &prompts, &settings, m.backends.generator.as_ref(), m.backends.scorer.as_ref()))
        .collect::<capr::Result<Vec<_>>>()?;
    let backend = match cfg.backend.backend {
        BackendKind::Synthetic => "synthetic",
        BackendKind::Remote => "remote",
    };
    let reports = compare(&runs, &["identity", "style-suffix"], backend)?;
    let out = a.out.unwrap_or_else(|| cfg.paths.reports.join("report.json"));
    ensure_parent(&out)?;
    save_reports(&reports, &out)?;
    let mut stdout = std::io::stdout().lock();
    for r in &reports {
        write!(stdout, "{:<14} overall {:.4}", r.policy, r.aggregate.overall)?;
        for (base, c) in &r.comparisons {
            write!(stdout, "  vs {base}: diff {:+.4} p {:.3e}{}", c.mean_diff, c.p, r.marker(base))?;
        }
        writeln!(stdout)?;
    }
    Ok(())
}

fn parse_values(spec: &str) -> anyhow::Result<Vec<i64>> {
    if let Some((lo, hi)) = spec.split_once("..") {
        let (lo, hi): (i64, i64) = (lo.trim().parse()?, hi.trim().parse()?);
        if hi < lo {
            bail!("empty range {spec}");
        }
        return Ok((lo..=hi).collect());
    }
    spec.split(',')
        .map(|v| v.trim().parse::<i64>().map_err(|e| anyhow!("bad sweep value {v:?}: {e}")))
        .collect()
}

fn parse_frozen(spec: &str) -> anyhow::Result<DeltaVector> {
    let v = parse_values(spec)?;
    match v[..] {
        [o, s, a, l] if !spec.contains("..") => Ok(DeltaVector::new(o, s, a, l)),
        _ => bail!("--frozen takes four comma-separated integers"),
    }
}

fn sweep(cfg: &mut RunConfig, a: SweepArgs) -> anyhow::Result<()> {
    if let Some(n) = a.images_per_prompt {
        cfg.eval.images_per_prompt = n;
    }
    let m = load_models(cfg, &a.model)?;
    let factor: SweepFactor = a.factor.parse()?;
    let values = parse_values(&a.values)?;
    let frozen = match &a.frozen {
        Some(f) => parse_frozen(f)?,
        None => SweepFactor::default_frozen(),
    };
    let prompts = prompt_set(a.prompts, &cfg.paths.test_prompts, &m.corpus_dir)?;
    let settings = EvalSettings { images_per_prompt: cfg.eval.images_per_prompt, seed: cfg.seed, steps: cfg.eval.steps };
    let table = delta_sweep(
        factor,
        &values,
        frozen,
        &prompts,
        &settings,
        m.backends.reformulator.as_ref(),
        &m.surrogate,
        &m.quantizer,
        m.backends.generator.as_ref(),
        m.backends.scorer.as_ref(),
    )?;
    let out = a.out.unwrap_or_else(|| cfg.paths.reports.join("sweep.csv"));
    ensure_parent(&out)?;
    table.save(&out)?;
    print!("{}", table.to_csv());
    Ok(())
}

fn reformulate(cfg: &mut RunConfig, a: ReformulateArgs) -> anyhow::Result<()> {
    let m = load_models(cfg, &a.model)?;
    let delta = load_delta(a.delta, cfg, false)?.unwrap_or(DeltaVector::REFERENCE);
    let predicted = capr::surrogate::QualityPredictor::predict(&m.surrogate, &a.prompt)?;
    let condition = tuner::target_condition(m.quantizer.bins(&predicted), &a.prompt, &delta, m.quantizer.k);
    println!("{}", m.backends.reformulator.reformulate(&a.prompt, &condition)?);
    Ok(())
}
