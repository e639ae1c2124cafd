use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use weavecheck::corpus::read_pgm_file;
use weavecheck::corpus::{read_corpus, stream_source, write_corpus, CorpusManifest};
use weavecheck::pipeline::{corpus_samples, features_csv_header, features_csv_row, view_density, StreamOptions};
use weavecheck::preproc::BinarizeMethod;
use weavecheck::synthgen::FramePair;
use weavecheck::{
    benchmark, detect, load_model, make_corpus, run_stream, save_model, train, EvalReport, MlpModel, PipelineConfig,
    SynthSpec, TrainConfig,
};

const EXIT_DEFECT: u8 = 2;

#[derive(Parser)]
#[command(
    name = "weavecheck",
    version,
    about = "Jacquard fabric defect detection from paired camera frames",
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic labeled corpus directory
    Generate(GenerateArgs),
    /// Train a model on a corpus directory
    Train(TrainArgs),
    /// Classify one frame pair
    Detect(DetectArgs),
    /// Classify a corpus in order, stopping at the first defect
    Stream(StreamArgs),
    /// Confusion counts and rates over a labeled corpus
    Eval(EvalArgs),
    /// Per-pair latency statistics
    Bench(BenchArgs),
}

/// Pipeline configuration: a JSON file plus per-key overrides.
#[derive(Args)]
struct ConfigArgs {
    /// JSON file with pipeline settings; flags below take precedence
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    #[arg(long)]
    gaussian_sigma: Option<f64>,
    #[arg(long)]
    gaussian_radius: Option<usize>,
    /// otsu or fixed
    #[arg(long)]
    binarize_method: Option<BinarizeMethod>,
    #[arg(long)]
    fixed_threshold: Option<u8>,
    #[arg(long, num_args = 0..=1, default_missing_value = "true", value_name = "BOOL")]
    skip_noise_filter: Option<bool>,
    #[arg(long)]
    theta_bins: Option<usize>,
    #[arg(long)]
    decision_threshold: Option<f64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut cfg = match &self.config {
            Some(path) => {
                PipelineConfig::from_json(&read(path)?).with_context(|| format!("config {}", path.display()))?
            }
            None => PipelineConfig::default(),
        };
        let p = &mut cfg.preproc;
        if let Some(v) = self.gaussian_sigma {
            p.gaussian_sigma = v;
        }
        if let Some(v) = self.gaussian_radius {
            p.gaussian_radius = v;
        }
        if let Some(v) = self.binarize_method {
            p.binarize_method = v;
        }
        if let Some(v) = self.fixed_threshold {
            p.fixed_threshold = v;
        }
        if let Some(v) = self.skip_noise_filter {
            p.skip_noise_filter = v;
        }
        if let Some(v) = self.theta_bins {
            cfg.theta_bins = v;
        }
        if let Some(v) = self.decision_threshold {
            cfg.decision_threshold = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct ModelArgs {
    /// Model file written by `train` (falls back to model_path in --config)
    #[arg(long, visible_alias = "model-path", value_name = "FILE")]
    model: Option<PathBuf>,
}

impl ModelArgs {
    fn load(&self, cfg: &mut PipelineConfig) -> Result<MlpModel> {
        if let Some(path) = &self.model {
            cfg.model_path = Some(path.clone());
        }
        let Some(path) = &cfg.model_path else {
            bail!("no model given; pass --model or set model_path in --config");
        };
        load_model(&read(path)?).with_context(|| format!("model {}", path.display()))
    }
}

#[derive(Args)]
struct GenerateArgs {
    /// JSON synthesis spec; omitted fields take their defaults
    #[arg(long, value_name = "FILE")]
    spec: Option<PathBuf>,
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0.5)]
    defect_fraction: f64,
    /// Corpus seed; defaults to the seed in --spec
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, value_name = "DIR")]
    corpus: PathBuf,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    #[arg(long, default_value_t = TrainConfig::default().hidden_dim)]
    hidden: usize,
    #[arg(long, default_value_t = TrainConfig::default().epochs)]
    epochs: usize,
    #[arg(long, default_value_t = TrainConfig::default().seed)]
    seed: u64,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    learning_rate: f64,
    #[arg(long, default_value_t = TrainConfig::default().momentum)]
    momentum: f64,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct DetectArgs {
    /// First camera's frame (binary PGM)
    #[arg(long, value_name = "PGM")]
    a: PathBuf,
    /// Second camera's frame, same size
    #[arg(long, value_name = "PGM")]
    b: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// Write both views' direction density as CSV
    #[arg(long, value_name = "FILE")]
    dump_density: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct StreamArgs {
    #[arg(long, value_name = "DIR")]
    corpus: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// Keep going after a defect instead of halting
    #[arg(long)]
    no_stop: bool,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long, value_name = "DIR")]
    corpus: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    /// Write every pair's feature vector and label as CSV
    #[arg(long, value_name = "FILE")]
    dump_features: Option<PathBuf>,
    #[command(flatten)]
    config: ConfigArgs,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, value_name = "DIR")]
    corpus: PathBuf,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 1)]
    reps: usize,
    #[command(flatten)]
    config: ConfigArgs,
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("cannot read {}", path.display()))
}

fn write(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("cannot write {}", path.display()))
}

fn print_json(value: &impl serde::Serialize) -> Result<()> {
    println!("{}", serde_json::to_string(value)?);
    Ok(())
}

fn generate(args: GenerateArgs) -> Result<ExitCode> {
    let base: SynthSpec = match &args.spec {
        Some(path) => serde_json::from_slice(&read(path)?).with_context(|| format!("spec {}", path.display()))?,
        None => SynthSpec::default(),
    };
    let seed = args.seed.unwrap_or(base.seed);
    let items = make_corpus(&base, args.n, args.defect_fraction, seed)?;
    let manifest = CorpusManifest {
        base,
        n: args.n,
        defect_fraction: args.defect_fraction,
        seed,
    };
    write_corpus(&args.out, &items, &manifest)?;
    let defective = items.iter().filter(|c| c.label.is_defect()).count();
    print_json(&serde_json::json!({ "out": args.out, "n": items.len(), "defective": defective }))?;
    Ok(ExitCode::SUCCESS)
}

fn load_corpus(dir: &Path) -> Result<Vec<(FramePair, weavecheck::Label)>> {
    let items = read_corpus(dir)?;
    if items.is_empty() {
        bail!("corpus {} has no labeled pairs", dir.display());
    }
    Ok(items)
}

fn train_cmd(args: TrainArgs) -> Result<ExitCode> {
    let cfg = args.config.resolve()?;
    let items = load_corpus(&args.corpus)?;
    let samples = corpus_samples(items.iter().map(|(p, l)| (p, *l)), &cfg)?;
    let tc = TrainConfig {
        learning_rate: args.learning_rate,
        momentum: args.momentum,
        epochs: args.epochs,
        hidden_dim: args.hidden,
        seed: args.seed,
    };
    let out = train(&samples, &tc)?;
    write(&args.out, save_model(&out.model))?;
    print_json(&serde_json::json!({
        "model": args.out,
        "samples": samples.len(),
        "epochs": tc.epochs,
        "initial_loss": out.loss_history.first(),
        "final_loss": out.loss_history.last(),
    }))?;
    Ok(ExitCode::SUCCESS)
}

fn detect_cmd(args: DetectArgs) -> Result<ExitCode> {
    let mut cfg = args.config.resolve()?;
    let model = args.model.load(&mut cfg)?;
    let pair = FramePair {
        a: read_pgm_file(&args.a)?,
        b: read_pgm_file(&args.b)?,
    };
    let decision = detect(&pair, &model, &cfg)?;
    if let Some(path) = &args.dump_density {
        let da = view_density(&pair.a, &cfg)?;
        let db = view_density(&pair.b, &cfg)?;
        let n = da.len();
        let mut csv = String::from("theta_deg,view_a,view_b\n");
        for (j, (a, b)) in da.values().iter().zip(db.values()).enumerate() {
            csv.push_str(&format!("{},{a},{b}\n", j as f64 * 180.0 / n as f64));
        }
        write(path, csv)?;
    }
    println!("{}", decision.to_json_line());
    Ok(if decision.is_defect {
        ExitCode::from(EXIT_DEFECT)
    } else {
        ExitCode::SUCCESS
    })
}

fn stream_cmd(args: StreamArgs) -> Result<ExitCode> {
    let mut cfg = args.config.resolve()?;
    let model = args.model.load(&mut cfg)?;
    let source = stream_source(&args.corpus)?;
    let opts = StreamOptions {
        stop_on_defect: !args.no_stop,
    };
    let stdout = io::stdout();
    let summary = run_stream(source, &model, &cfg, opts, |event| {
        let mut out = stdout.lock();
        writeln!(out, "{}", event.to_json_line())?;
        out.flush()
    })?;
    Ok(if summary.defects > 0 {
        ExitCode::from(EXIT_DEFECT)
    } else {
        ExitCode::SUCCESS
    })
}

fn eval_cmd(args: EvalArgs) -> Result<ExitCode> {
    let mut cfg = args.config.resolve()?;
    let model = args.model.load(&mut cfg)?;
    let items = load_corpus(&args.corpus)?;
    let mut outcomes = Vec::with_capacity(items.len());
    let mut latencies = Vec::with_capacity(items.len());
    let mut csv = features_csv_header() + "\n";
    for (pair, label) in &items {
        let d = detect(pair, &model, &cfg)?;
        outcomes.push((d.is_defect, *label));
        latencies.push(d.latency_micros);
        csv.push_str(&features_csv_row(&d.features, *label));
        csv.push('\n');
    }
    if let Some(path) = &args.dump_features {
        write(path, csv)?;
    }
    print_json(&EvalReport::from_outcomes(&outcomes, &latencies)?)?;
    Ok(ExitCode::SUCCESS)
}

fn bench_cmd(args: BenchArgs) -> Result<ExitCode> {
    let mut cfg = args.config.resolve()?;
    let model = args.model.load(&mut cfg)?;
    let pairs: Vec<FramePair> = load_corpus(&args.corpus)?.into_iter().map(|(p, _)| p).collect();
    print_json(&benchmark(&pairs, &model, &cfg, args.reps)?)?;
    Ok(ExitCode::SUCCESS)
}

/// Joins the error chain, skipping causes already spelled out by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut text = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !text.contains(&msg) {
            if !text.is_empty() {
                text.push_str(": ");
            }
            text.push_str(&msg);
        }
    }
    text
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::FAILURE,
            };
            let _ = e.print();
            return code;
        }
    };
    let result = match cli.command {
        Command::Generate(a) => generate(a),
        Command::Train(a) => train_cmd(a),
        Command::Detect(a) => detect_cmd(a),
        Command::Stream(a) => stream_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Bench(a) => bench_cmd(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("weavecheck: error: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}
