//! `magicnet`: synthesize corpora, train, run inference, evaluate and benchmark.
//!
//! Exit codes: 0 on success, 1 on a runtime failure, 2 on a usage error.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use magicnet::audio::{read_labels, read_manifest, read_wav, synth_corpus, write_corpus, MixSpec, SnrSpec};
use magicnet::eval::{evaluate, load_manifest, measure_rtf, train_manifests, ThresholdPolicy, TrainConfig};
use magicnet::features::{fbank40, FbankStream, FeatureConfig};
use magicnet::model::{load_weights, save_weights, step_time_s, ModelWeights, StreamState, TensorKind};
use magicnet::Real;

#[derive(Parser)]
#[command(name = "magicnet", version, about = "Lightweight causal voice activity detection")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Synthesize a labeled noisy corpus and its manifest.
    Synth(SynthArgs),
    /// Train a model from a training and a validation manifest.
    Train(TrainArgs),
    /// Write per-step speech probabilities for one WAV file.
    Infer(InferArgs),
    /// Score a labeled corpus and write a key=value report.
    Eval(EvalArgs),
    /// Measure the single-threaded streaming real-time factor.
    Bench(BenchArgs),
    /// Print every tensor of a weight file with its shape and size.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output directory for WAVs, label files and manifest.tsv.
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    clips: u64,
    /// Fixed SNR for every clip, in dB.
    #[arg(long, conflicts_with = "snr_range")]
    snr_db: Option<f64>,
    /// Uniform SNR range `LOW:HIGH` in dB [default: 5:30].
    #[arg(long, value_parser = parse_range)]
    snr_range: Option<(f64, f64)>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Clip length in seconds.
    #[arg(long, default_value_t = 20.0)]
    segment_s: f64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Precision {
    F32,
    F64,
}

#[derive(Args)]
struct TrainArgs {
    /// Training manifest.
    #[arg(long)]
    corpus: PathBuf,
    /// Validation manifest, used for early stopping.
    #[arg(long)]
    val: PathBuf,
    /// Output weight file.
    #[arg(long)]
    out: PathBuf,
    /// Optional CSV of per-epoch training and validation loss.
    #[arg(long)]
    loss_csv: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    epochs: usize,
    #[arg(long, default_value_t = 50)]
    patience: usize,
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    /// Segments per mini-batch.
    #[arg(long, default_value_t = 8)]
    batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Arithmetic used while training; weights are always stored as 32-bit floats.
    #[arg(long, value_enum, default_value_t = Precision::F32)]
    precision: Precision,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct InferArgs {
    #[arg(long)]
    weights: PathBuf,
    #[arg(long)]
    wav: PathBuf,
    /// Output CSV `step_index,time_s,probability`.
    #[arg(long)]
    out: PathBuf,
    /// Run frame-by-frame streaming inference instead of batch inference.
    #[arg(long)]
    stream: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    weights: PathBuf,
    /// Manifest of the labeled evaluation corpus.
    #[arg(long)]
    corpus: PathBuf,
    /// Output report in key=value form.
    #[arg(long)]
    report: PathBuf,
    /// Optional per-condition breakdown as CSV.
    #[arg(long)]
    conditions_csv: Option<PathBuf>,
    /// Fixed decision threshold. Without it the threshold is picked on a
    /// leading dev share of the clips (see --dev-fraction).
    #[arg(long, conflicts_with_all = ["dev_fraction", "oracle_threshold"])]
    threshold: Option<f64>,
    #[arg(long, default_value_t = 0.25)]
    dev_fraction: f64,
    /// Pick the best-F1 threshold on the evaluated clips themselves.
    #[arg(long, conflicts_with = "dev_fraction")]
    oracle_threshold: bool,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    threads: u64,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    weights: PathBuf,
    /// Length of the synthetic benchmark clip, ignored with --wav.
    #[arg(long, default_value_t = 30.0)]
    seconds: f64,
    /// Benchmark on this WAV instead of a synthetic clip.
    #[arg(long)]
    wav: Option<PathBuf>,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(3..))]
    repetitions: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct InspectArgs {
    #[arg(long)]
    weights: PathBuf,
}

fn parse_range(s: &str) -> Result<(f64, f64), String> {
    let (a, b) = s.split_once(':').ok_or_else(|| format!("expected LOW:HIGH, got '{s}'"))?;
    let lo: f64 = a.trim().parse().map_err(|_| format!("'{a}' is not a number"))?;
    let hi: f64 = b.trim().parse().map_err(|_| format!("'{b}' is not a number"))?;
    if !(lo <= hi) {
        return Err(format!("range {lo}:{hi} is empty"));
    }
    Ok((lo, hi))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
    Ok(BufWriter::new(f))
}

fn synth(a: SynthArgs) -> Result<()> {
    let snr = match (a.snr_db, a.snr_range) {
        (Some(v), _) => SnrSpec::Fixed(v),
        (None, Some((low, high))) => SnrSpec::Uniform { low, high },
        (None, None) => SnrSpec::Uniform { low: 5.0, high: 30.0 },
    };
    let spec = MixSpec {
        snr,
        segment_len_s: a.segment_s,
        seed: a.seed,
        ..MixSpec::default()
    };
    let clips = synth_corpus(&spec, a.clips as usize)?;
    let manifest = write_corpus(&a.out, &clips).with_context(|| format!("writing corpus to {}", a.out.display()))?;

    let mut samples = 0usize;
    let mut speech = 0usize;
    for entry in read_manifest(&manifest)? {
        let labels = read_labels(&entry.labels)?;
        samples += labels.len();
        speech += labels.iter().filter(|&&l| l).count();
    }
    let clipped: usize = clips.iter().map(|c| c.clipped).sum();
    println!("manifest={}", manifest.display());
    println!("clips={}", clips.len());
    println!("hours={:.4}", samples as f64 / magicnet::SAMPLE_RATE_HZ as f64 / 3600.0);
    println!("speech_fraction={:.4}", speech as f64 / samples.max(1) as f64);
    println!("clipped_samples={clipped}");
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let config = TrainConfig {
        lr: a.lr,
        batch_segments: a.batch,
        max_epochs: a.epochs,
        patience_epochs: a.patience,
        seed: a.seed,
        ..TrainConfig::default()
    };
    match a.precision {
        Precision::F32 => train_with::<f32>(&config, &a),
        Precision::F64 => train_with::<f64>(&config, &a),
    }
}

fn train_with<T: Real>(config: &TrainConfig, a: &TrainArgs) -> Result<()> {
    let quiet = a.quiet;
    let outcome = train_manifests::<T>(config, &a.corpus, &a.val, |r| {
        if !quiet {
            eprintln!("epoch {:4}  train {:.6}  val {:.6}", r.epoch, r.train_loss, r.val_loss);
        }
    })?;
    save_weights(&outcome.weights, &a.out)?;
    if let Some(path) = &a.loss_csv {
        let mut w = create(path)?;
        outcome.write_history_csv(&mut w)?;
        w.flush()?;
    }
    let best = outcome.history.iter().find(|r| r.epoch == outcome.best_epoch);
    println!("weights={}", a.out.display());
    println!("epochs={}", outcome.history.len());
    println!("best_epoch={}", outcome.best_epoch);
    if let Some(r) = best {
        println!("best_val_loss={:.6}", r.val_loss);
    }
    Ok(())
}

fn infer(a: InferArgs) -> Result<()> {
    let weights: ModelWeights<f32> = load_weights(&a.weights)?;
    let clip = read_wav(&a.wav)?;
    let features = FeatureConfig::default();
    let probs: Vec<f32> = if a.stream {
        let mut fbank = FbankStream::<f32>::new(features.clone())?;
        let mut state = StreamState::new(&weights);
        let mut out = Vec::new();
        let mut frames: Vec<Vec<f32>> = Vec::new();
        for chunk in clip.samples().chunks(features.hop()) {
            frames.clear();
            fbank.push(chunk, |f| frames.push(f.to_vec()));
            for f in &mut frames {
                weights.norm.apply_frame(f);
                if let Some(p) = weights.stream_push(&mut state, f)? {
                    out.push(p);
                }
            }
        }
        out
    } else {
        weights.predict(&fbank40(&clip, &features)?)?
    };

    let factor = weights.config.downsample();
    let hop_s = features.hop() as f64 / features.sample_rate_hz as f64;
    let mut w = create(&a.out)?;
    writeln!(w, "step_index,time_s,probability")?;
    for (j, p) in probs.iter().enumerate() {
        writeln!(w, "{j},{:.3},{:.8}", step_time_s(j, factor, hop_s), p)?;
    }
    w.flush()?;
    println!("steps={}", probs.len());
    Ok(())
}

fn eval(a: EvalArgs) -> Result<()> {
    let weights: ModelWeights<f32> = load_weights(&a.weights)?;
    let clips = load_manifest(&a.corpus)?;
    let policy = match (a.threshold, a.oracle_threshold) {
        (Some(t), _) => ThresholdPolicy::Fixed(t),
        (None, true) => ThresholdPolicy::Sweep,
        (None, false) => ThresholdPolicy::DevSweep { dev_fraction: a.dev_fraction },
    };
    let report = evaluate(&weights, &clips, &FeatureConfig::default(), policy, a.threads as usize)?;
    let kv = report.to_kv();
    fs::write(&a.report, &kv).with_context(|| format!("cannot write {}", a.report.display()))?;
    if let Some(path) = &a.conditions_csv {
        fs::write(path, report.conditions_csv()).with_context(|| format!("cannot write {}", path.display()))?;
    }
    print!("{kv}");
    Ok(())
}

fn bench(a: BenchArgs) -> Result<()> {
    let weights: ModelWeights<f32> = load_weights(&a.weights)?;
    let clip = match &a.wav {
        Some(path) => read_wav(path)?,
        None => {
            if !(a.seconds >= 10.0 && a.seconds.is_finite()) {
                bail!("--seconds must be at least 10, got {}", a.seconds);
            }
            let spec = MixSpec {
                segment_len_s: a.seconds,
                seed: a.seed,
                ..MixSpec::default()
            };
            synth_corpus(&spec, 1)?.remove(0).clip
        }
    };
    let report = measure_rtf(&weights, &clip, &FeatureConfig::default(), a.repetitions as usize)?;
    print!("{}", report.to_kv());
    let runs: Vec<String> = report.runs_s.iter().map(|r| format!("{r:.6}")).collect();
    println!("runs_s={}", runs.join(","));
    Ok(())
}

fn inspect(a: InspectArgs) -> Result<()> {
    let weights: ModelWeights<f32> = load_weights(&a.weights)?;
    let layout = weights.layout();
    let kind = |k: TensorKind| match k {
        TensorKind::Trainable => "trainable",
        TensorKind::RunningStat => "running",
        TensorKind::FeatureStat => "feature",
    };
    let width = layout.iter().map(|t| t.name.len()).max().unwrap_or(0).max(6);
    println!("{:<width$}  {:<10}  {:<9}  {:>6}", "tensor", "shape", "kind", "params");
    for t in &layout {
        let shape: Vec<String> = t.dims.iter().map(|d| d.to_string()).collect();
        let n: usize = t.dims.iter().product();
        println!("{:<width$}  {:<10}  {:<9}  {:>6}", t.name, shape.join("x"), kind(t.kind), n);
    }
    let report = weights.param_count();
    println!();
    println!("{:<16} {:>9} {:>8}", "layer", "trainable", "running");
    for l in &report.layers {
        println!("{:<16} {:>9} {:>8}", l.layer, l.trainable, l.running);
    }
    println!("{:<16} {:>9} {:>8}", "total", report.trainable, report.running);
    println!("feature_stats {}", report.feature_stats);
    println!("receptive_field {}", weights.config.receptive_field()?);
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let result = match cli.command {
        Command::Synth(a) => synth(a),
        Command::Train(a) => train(a),
        Command::Infer(a) => infer(a),
        Command::Eval(a) => eval(a),
        Command::Bench(a) => bench(a),
        Command::Inspect(a) => inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
