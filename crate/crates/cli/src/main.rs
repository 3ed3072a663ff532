//! `mvga`: render, train, predict, evaluate and synthesize.
//!
//! Exit codes: 0 success, 1 input error, 2 internal error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mvga_core::data::{
    load_manifest, synth_dataset, AugmentConfig, BinningScheme, Split, SynthConfig,
};
use mvga_core::eval::{evaluate, predict_records, read_predictions, write_predictions};
use mvga_core::geometry::{attach_features, read_features_csv, read_obj};
use mvga_core::model::{Checkpoint, EncoderConfig};
use mvga_core::render::render_views;
use mvga_core::train::{fit, AdamConfig, FitConfig, TrainConfig};
use mvga_core::{Error, RenderConfig, SubdivisionLevel};

#[derive(Parser)]
#[command(
    name = "mvga",
    version,
    about = "Multi-view gestational-age regression on sphere meshes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Render a mesh with per-vertex features into a `.mvr` view stack.
    Render(RenderArgs),
    /// Train on a manifest's train split, early-stopping on validation.
    Train(TrainArgs),
    /// Predict GA for every record of one split.
    Predict(PredictArgs),
    /// Join predictions to labels and write error reports.
    Evaluate(EvaluateArgs),
    /// Write a synthetic dataset with GA encoded in feature channel 0.
    Synth(SynthArgs),
}

#[derive(Args)]
struct RenderOpts {
    #[arg(long, default_value_t = 224)]
    resolution: usize,
    /// Vertical field of view, degrees.
    #[arg(long, default_value_t = 60.0)]
    fov: f64,
    /// Camera distance as a multiple of the sphere radius.
    #[arg(long, default_value_t = 2.5)]
    distance: f64,
}

impl RenderOpts {
    fn config(&self) -> RenderConfig {
        RenderConfig {
            resolution: self.resolution,
            fov_y_deg: self.fov,
            distance: self.distance,
        }
    }
}

#[derive(Args)]
struct RenderArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long)]
    features: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    render: RenderOpts,
    /// Also write min-max normalized PNGs next to the output.
    #[arg(long)]
    png: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    run_dir: PathBuf,
    #[arg(long, default_value_t = 18)]
    batch_size: usize,
    #[arg(long, default_value_t = 1e-4)]
    lr: f64,
    #[arg(long, default_value_t = 0.9)]
    beta1: f64,
    #[arg(long, default_value_t = 0.999)]
    beta2: f64,
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
    #[arg(long, default_value_t = 400)]
    max_epochs: usize,
    #[arg(long, default_value_t = 30)]
    patience: usize,
    #[arg(long, default_value_t = 0.0)]
    min_delta: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 0.2)]
    input_dropout: f64,
    #[arg(long, default_value_t = 0.01)]
    noise_sigma: f64,
    #[arg(long, default_value_t = 1.0)]
    ce_lambda: f64,
    /// Encoder stage widths, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "16,32,64,128")]
    stages: Vec<usize>,
    /// Dropout on pooled encoder features.
    #[arg(long, default_value_t = 0.0)]
    internal_dropout: f64,
    /// GA bin edges in weeks, comma separated.
    #[arg(long, value_delimiter = ',', default_value = "23,27,32,36,40,44")]
    bin_edges: Vec<f64>,
    /// Start the regression bias at 0 instead of the mean training GA.
    #[arg(long)]
    zero_ga_bias: bool,
    /// Re-render every subject each epoch instead of caching stacks.
    #[arg(long)]
    no_cache: bool,
    #[command(flatten)]
    render: RenderOpts,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value = "validation")]
    split: Split,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    predictions: PathBuf,
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "23,27,32,36,40,44")]
    bin_edges: Vec<f64>,
    /// Also write scatter and per-bin box plots as SVG.
    #[arg(long)]
    svg: bool,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 3)]
    level: u32,
    #[arg(long)]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn cmd_render(a: &RenderArgs) -> Result<(), Error> {
    let mesh = read_obj(&a.mesh)?;
    let features = read_features_csv(&a.features)?;
    let mesh = attach_features(mesh, features)?;
    let stack = render_views(&mesh, &a.render.config().rig()?)?;
    stack.write_mvr(&a.out)?;
    if a.png {
        let dir = a.out.parent().unwrap_or(Path::new("."));
        let stem = a
            .out
            .file_stem()
            .and_then(|s| s.to_str())
            .unwrap_or("render");
        stack.write_pngs(dir, stem)?;
    }
    println!(
        "wrote {} ({}x{}x{}x{})",
        a.out.display(),
        stack.views(),
        stack.channels(),
        stack.size(),
        stack.size()
    );
    Ok(())
}

fn cmd_train(a: &TrainArgs) -> Result<(), Error> {
    let scheme = BinningScheme::new(a.bin_edges.clone())?;
    let manifest = load_manifest(&a.manifest, &scheme)?;
    let augment = AugmentConfig {
        input_dropout_p: a.input_dropout,
        noise_sigma: a.noise_sigma,
        seed: a.seed,
    };
    let cfg = FitConfig {
        train: TrainConfig {
            batch_size: a.batch_size,
            adam: AdamConfig {
                learning_rate: a.lr,
                beta1: a.beta1,
                beta2: a.beta2,
                epsilon: a.eps,
            },
            max_epochs: a.max_epochs,
            early_stop_patience: a.patience,
            early_stop_min_delta: a.min_delta,
            seed: a.seed,
            augment,
            ce_lambda: a.ce_lambda,
            init_ga_bias_from_labels: !a.zero_ga_bias,
            no_cache: a.no_cache,
        },
        encoder: EncoderConfig {
            stage_channels: a.stages.clone(),
            internal_dropout_p: a.internal_dropout,
            ..EncoderConfig::default()
        },
        render: a.render.config(),
        scheme,
        run_dir: a.run_dir.clone(),
    };
    let report = fit(&manifest, &cfg, |e| {
        eprintln!(
            "epoch {:>4}  train_loss {:.6}  val_mse {:.6}  val_mae {:.6}",
            e.epoch, e.train_loss, e.val_mse, e.val_mae
        )
    })?;
    println!(
        "best epoch {} val_mse {} -> {}",
        report.best_epoch,
        report.best_val_mse,
        report.best_checkpoint.display()
    );
    Ok(())
}

fn cmd_predict(a: &PredictArgs) -> Result<(), Error> {
    let ck = Checkpoint::load(&a.checkpoint)?;
    let edges: Vec<f64> = match ck.get("bin_edges") {
        Some(s) => s
            .split(',')
            .map(|v| {
                v.parse()
                    .map_err(|_| Error::Config(format!("bad bin edge {v:?} in checkpoint")))
            })
            .collect::<Result<_, _>>()?,
        None => BinningScheme::default().edges().to_vec(),
    };
    let manifest = load_manifest(&a.manifest, &BinningScheme::new(edges)?)?;
    let records = manifest.split(a.split);
    if records.is_empty() {
        return Err(Error::Config(format!(
            "manifest has no {} records",
            a.split
        )));
    }
    let preds = predict_records(&ck, &records)?;
    write_predictions(&a.out, &preds)?;
    println!("wrote {} predictions to {}", preds.len(), a.out.display());
    Ok(())
}

fn cmd_evaluate(a: &EvaluateArgs) -> Result<(), Error> {
    let scheme = BinningScheme::new(a.bin_edges.clone())?;
    let manifest = load_manifest(&a.manifest, &scheme)?;
    let preds = read_predictions(&a.predictions)?;
    let report = evaluate(&preds, &manifest, &scheme)?;
    report.write_all(&a.out_dir, a.svg)?;
    println!(
        "n {}  MAE {:.4}  STDEV {:.4}",
        report.overall.count, report.overall.mae, report.overall.stdev
    );
    for (space, s) in &report.per_space {
        println!(
            "{space}: n {}  MAE {:.4}  STDEV {:.4}",
            s.count, s.mae, s.stdev
        );
    }
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> Result<(), Error> {
    let cfg = SynthConfig {
        n_subjects: a.n,
        level: SubdivisionLevel::new(a.level)?,
        seed: a.seed,
    };
    let path = synth_dataset(&a.out_dir, &cfg)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Render(a) => cmd_render(a),
        Command::Train(a) => cmd_train(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Evaluate(a) => cmd_evaluate(a),
        Command::Synth(a) => cmd_synth(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_internal() { 2 } else { 1 })
        }
    }
}
