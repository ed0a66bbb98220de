//! `vcal`: perturb images, build confidence datasets, evaluate SFT/SimPO
//! losses and score prediction logs.
//!
//! Exit codes: 0 success, 2 input or validation error, 3 internal error. On
//! failure stderr carries a single JSON object `{"error": ..., "message": ...}`.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use vcal_core::config::RunConfig;
use vcal_core::dataset::{build_dataset, BuildOptions, ConfidenceGrid, QARecord};
use vcal_core::eval::{evaluate, score_records, PredictionRecord};
use vcal_core::jsonl::read_jsonl;
use vcal_core::losses::{
    evaluate_pairs, sft_loss, PreferencePairInput, SequenceLogProb, SimPOParams,
};
use vcal_core::mask::{load_mask, MaskManifestEntry};
use vcal_core::metrics::export_curves;
use vcal_core::perturb::perturb;
use vcal_core::{BinaryMask, ConfidenceLabel, Error, ImageTensor, PerturbationMode, Result};

#[derive(Parser)]
#[command(
    name = "vcal",
    version,
    about = "Verbalized-confidence calibration tooling"
)]
struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker threads for batch stages (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Default)]
struct PerturbFlags {
    /// Run seed; all noise and label draws derive from it.
    #[arg(long)]
    seed: Option<u64>,
    /// Diffusion steps at confidence 0.
    #[arg(long)]
    t_max: Option<u32>,
    /// Per-step noise variance, in (0, 1).
    #[arg(long)]
    gamma: Option<f64>,
    /// `masked` or `global`.
    #[arg(long)]
    mode: Option<PerturbationMode>,
}

#[derive(Subcommand)]
enum Command {
    /// Perturb one image at a confidence level.
    Perturb {
        #[arg(long)]
        image: PathBuf,
        /// Object mask (PNG, >= 128 is set). Not needed with `--mode global`.
        #[arg(long)]
        mask: Option<PathBuf>,
        /// Confidence label in [0, 100].
        #[arg(long, short = 'c')]
        confidence: i64,
        #[arg(long, short = 'o')]
        out: PathBuf,
        #[command(flatten)]
        flags: PerturbFlags,
    },
    /// Build sft.jsonl, simpo.jsonl and report.json from QA records and masks.
    BuildDataset {
        /// QA records (JSONL).
        #[arg(long)]
        records: PathBuf,
        /// Mask manifest (JSONL).
        #[arg(long)]
        masks: Option<PathBuf>,
        /// Output directory (also receives images/).
        #[arg(long, short = 'o')]
        out: PathBuf,
        /// Base directory for paths inside the manifests.
        #[arg(long, env = "VCAL_DATASET_ROOT")]
        dataset_root: Option<PathBuf>,
        /// Comma-separated confidence labels, e.g. "0,25,50,75,100".
        #[arg(long)]
        grid: Option<String>,
        /// Perturbed variants per record.
        #[arg(long)]
        variants: Option<u32>,
        #[command(flatten)]
        flags: PerturbFlags,
    },
    /// Evaluate the SimPO (or SFT) objective on log-probability records.
    Losses {
        /// JSONL of {logprob_w, len_w, logprob_l, len_l}, or {logprob, length} with --objective sft.
        #[arg(long)]
        input: PathBuf,
        #[arg(long, value_parser = ["simpo", "sft"], default_value = "simpo")]
        objective: String,
        #[arg(long, default_value_t = 2.0)]
        beta: f64,
        /// Target reward margin (a.k.a. gamma_simpo).
        #[arg(long, default_value_t = 1.0)]
        lambda: f64,
    },
    /// Score a prediction log: report.json, roc.csv and reliability.csv.
    Eval {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, short = 'o')]
        out: PathBuf,
        /// ECE bin count.
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Write only the ROC and reliability CSVs for a prediction log.
    Curves {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long, short = 'o')]
        out: PathBuf,
        #[arg(long)]
        bins: Option<usize>,
    },
    /// Write a synthetic fixture (images, rectangle masks, manifests).
    MakeFixture {
        #[arg(long, short = 'o')]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        records: usize,
        /// Leave this record index out of the mask manifest.
        #[arg(long)]
        drop_mask: Option<usize>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", json!({ "error": e.kind(), "message": e.to_string() }));
            ExitCode::from(if e.is_input_error() { 2 } else { 3 })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .map_err(|e| Error::Internal(e.to_string()))?;
    }
    let mut config = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    match cli.command {
        Command::Perturb {
            image,
            mask,
            confidence,
            out,
            flags,
        } => {
            apply_flags(&mut config, &flags);
            config.validate()?;
            cmd_perturb(&image, mask.as_deref(), confidence, &out, &config)
        }
        Command::BuildDataset {
            records,
            masks,
            out,
            dataset_root,
            grid,
            variants,
            flags,
        } => {
            apply_flags(&mut config, &flags);
            if let Some(root) = dataset_root {
                config.dataset_root = root;
            }
            if let Some(g) = grid {
                config.confidence_grid = ConfidenceGrid::parse(&g)?;
            }
            if let Some(v) = variants {
                config.variants = v;
            }
            config.validate()?;
            cmd_build_dataset(&records, masks.as_deref(), &out, &config)
        }
        Command::Losses {
            input,
            objective,
            beta,
            lambda,
        } => cmd_losses(&input, &objective, SimPOParams::new(beta, lambda)?),
        Command::Eval {
            predictions,
            out,
            bins,
        } => {
            if let Some(b) = bins {
                config.ece_bins = b;
            }
            config.validate()?;
            cmd_eval(&predictions, &out, config.ece_bins)
        }
        Command::Curves {
            predictions,
            out,
            bins,
        } => {
            if let Some(b) = bins {
                config.ece_bins = b;
            }
            config.validate()?;
            cmd_curves(&predictions, &out, config.ece_bins)
        }
        Command::MakeFixture {
            out,
            records,
            drop_mask,
        } => vcal_core::synthetic::write_fixture(out, records, drop_mask),
    }
}

fn apply_flags(config: &mut RunConfig, flags: &PerturbFlags) {
    if let Some(s) = flags.seed {
        config.seed = s;
    }
    if let Some(t) = flags.t_max {
        config.perturbation.t_max = t;
    }
    if let Some(g) = flags.gamma {
        config.perturbation.gamma = g;
    }
    if let Some(m) = flags.mode {
        config.perturbation.mode = m;
    }
}

fn cmd_perturb(
    image: &Path,
    mask: Option<&Path>,
    confidence: i64,
    out: &Path,
    config: &RunConfig,
) -> Result<()> {
    let label = ConfidenceLabel::new(confidence)?;
    let v0 = ImageTensor::load_png(image)?;
    let pcfg = config.perturbation_config();
    let mask = match (mask, pcfg.mode) {
        (Some(p), _) => load_mask(p, v0.dims())?,
        (None, PerturbationMode::Global) => BinaryMask::full(v0.height(), v0.width()),
        (None, PerturbationMode::Masked) => {
            return Err(Error::InvalidConfig(
                "--mask is required in masked mode".into(),
            ))
        }
    };
    perturb(&v0, &mask, label, &pcfg)?.save_png(out)
}

fn cmd_build_dataset(
    records: &Path,
    masks: Option<&Path>,
    out: &Path,
    config: &RunConfig,
) -> Result<()> {
    let records: Vec<QARecord> = read_jsonl(records)?;
    let masks: Vec<MaskManifestEntry> = match masks {
        Some(p) => read_jsonl(p)?,
        None => Vec::new(),
    };
    let opts = BuildOptions {
        input_root: config.dataset_root.clone(),
        output_dir: out.to_path_buf(),
        perturbation: config.perturbation_config(),
        grid: config.confidence_grid.clone(),
        variants: config.variants,
    };
    let built = build_dataset(&records, &masks, &opts)?;
    built.write(out)?;
    let r = &built.report;
    log::info!(
        "kept {} of {} records ({} sft samples, {} simpo pairs)",
        r.kept,
        r.total_records,
        r.sft_samples,
        r.simpo_pairs
    );
    Ok(())
}

fn print_json(value: &serde_json::Value) {
    println!("{value}");
}

fn cmd_losses(input: &Path, objective: &str, params: SimPOParams) -> Result<()> {
    if objective == "sft" {
        #[derive(serde::Deserialize)]
        struct Line {
            logprob: f64,
            length: u32,
        }
        let lines: Vec<Line> = read_jsonl(input)?;
        let samples = lines
            .iter()
            .map(|l| SequenceLogProb::new(l.logprob, l.length))
            .collect::<Result<Vec<_>>>()?;
        let loss = sft_loss(&samples)?;
        print_json(&json!({ "sft_loss": loss, "samples": samples.len() }));
        return Ok(());
    }
    let pairs: Vec<PreferencePairInput> = read_jsonl(input)?;
    let (rows, mean) = evaluate_pairs(&pairs, &params)?;
    for row in &rows {
        print_json(&serde_json::to_value(row).map_err(|e| Error::Internal(e.to_string()))?);
    }
    print_json(&json!({
        "mean_loss": mean,
        "pairs": rows.len(),
        "beta": params.beta,
        "lambda": params.lambda,
    }));
    Ok(())
}

fn load_predictions(path: &Path) -> Result<Vec<PredictionRecord>> {
    let mut records: Vec<PredictionRecord> = read_jsonl(path)?;
    records.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(records)
}

fn cmd_eval(predictions: &Path, out: &Path, bins: usize) -> Result<()> {
    let records = load_predictions(predictions)?;
    let report = evaluate(&records, bins)?;
    std::fs::create_dir_all(out).map_err(|e| Error::UnwritableFile {
        path: out.to_path_buf(),
        reason: e.to_string(),
    })?;
    let path = out.join("report.json");
    let mut text =
        serde_json::to_string_pretty(&report).map_err(|e| Error::Internal(e.to_string()))?;
    text.push('\n');
    std::fs::write(&path, text).map_err(|e| Error::UnwritableFile {
        path: path.clone(),
        reason: e.to_string(),
    })?;
    export_curves(out, &score_records(&records).outcomes, bins)?;
    Ok(())
}

fn cmd_curves(predictions: &Path, out: &Path, bins: usize) -> Result<()> {
    let records = load_predictions(predictions)?;
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let log = score_records(&records);
    if log.outcomes.is_empty() {
        return Err(Error::EmptyAfterFiltering {
            failures: log.n_parse_failures,
        });
    }
    export_curves(out, &log.outcomes, bins)?;
    Ok(())
}
