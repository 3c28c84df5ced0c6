//! Command-line front end; all logic lives in the `sitewatch` library.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use sitewatch::error::{Error, Result};
use sitewatch::pipeline::{
    self, AssessArgs, EvaluateArgs, PseudoLabelArgs,
};

#[derive(Parser)]
#[command(
    name = "sitewatch",
    version,
    about = "Deterministic satellite construction-monitoring pipeline"
)]
struct Cli {
    /// Pipeline configuration file (JSON, unknown keys rejected).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for components that opt into randomness (the scripted mock model).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output format; only "json" is defined.
    #[arg(long, global = true, default_value = "json")]
    format: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Load a dataset manifest, validate it, and print per-stage label counts.
    Validate {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Assess one scene from saved model outputs into a site report.
    Assess {
        /// Scene PNG; its `<name>.meta.json` sidecar is required.
        #[arg(long)]
        image: PathBuf,
        /// Model outputs JSON (boxes, probability PNGs, site, footprint).
        #[arg(long)]
        outputs: PathBuf,
        /// Write the report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Render boxes and masks over the scene to this PNG.
        #[arg(long)]
        overlay: Option<PathBuf>,
        /// Fail when height cannot be estimated.
        #[arg(long)]
        height: bool,
        /// Degrade the scene to this ground resolution (m/px) first.
        #[arg(long)]
        target_resolution: Option<f64>,
    },
    /// Score predictions against ground truth, one row per stage.
    Evaluate {
        #[arg(long)]
        predictions: PathBuf,
        #[arg(long)]
        ground_truth: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Pool mask IoU over scenes instead of averaging per image.
        #[arg(long)]
        pooled_iou: bool,
    },
    /// Fit the log-linear learning curve to an `n_samples,metric` CSV.
    LearningCurve {
        #[arg(long)]
        points: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write two-column plot data (log10 n, metric) here.
        #[arg(long)]
        plot: Option<PathBuf>,
        /// Growth below this no longer counts as improvement.
        #[arg(long, default_value_t = 0.005)]
        plateau_epsilon: f64,
    },
    /// Run the pseudo-labeling loop with a scripted mock model.
    Pseudolabel {
        #[arg(long)]
        labeled: PathBuf,
        #[arg(long)]
        unlabeled: PathBuf,
        #[arg(long)]
        holdout: PathBuf,
        /// Mock-model script JSON: {"initial_iou": .., "round_gains": [..]}.
        #[arg(long)]
        model_script: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: &Cli) -> Result<()> {
    if cli.format != "json" {
        return Err(Error::config(format!(
            "unsupported output format {:?}, expected \"json\"",
            cli.format
        )));
    }
    let config = pipeline::load_config(cli.config.as_deref())?;
    match &cli.command {
        Command::Validate { manifest } => {
            let summary = pipeline::cmd_validate(manifest)?;
            print!("{}", summary.table());
        }
        Command::Assess {
            image,
            outputs,
            out,
            overlay,
            height,
            target_resolution,
        } => {
            let report = pipeline::cmd_assess(
                &AssessArgs {
                    image,
                    outputs,
                    out: out.as_deref(),
                    overlay: overlay.as_deref(),
                    require_height: *height,
                    target_resolution: *target_resolution,
                },
                &config,
            )?;
            if out.is_none() {
                println!("{}", to_json(&report)?);
            }
        }
        Command::Evaluate {
            predictions,
            ground_truth,
            out,
            pooled_iou,
        } => {
            let report = pipeline::cmd_evaluate(
                &EvaluateArgs {
                    predictions,
                    ground_truth,
                    pooled_iou: *pooled_iou,
                },
                &config,
            )?;
            match out {
                Some(path) => pipeline::write_json(path, &report)?,
                None => println!("{}", to_json(&report)?),
            }
        }
        Command::LearningCurve {
            points,
            out,
            plot,
            plateau_epsilon,
        } => {
            let output = pipeline::cmd_learning_curve(points, *plateau_epsilon)?;
            if let Some(path) = plot {
                pipeline::write_plot_data(path, &output)?;
            }
            match out {
                Some(path) => pipeline::write_json(path, &output.fit)?,
                None => println!("{}", to_json(&output.fit)?),
            }
        }
        Command::Pseudolabel {
            labeled,
            unlabeled,
            holdout,
            model_script,
            out,
        } => {
            let history = pipeline::cmd_pseudolabel(
                &PseudoLabelArgs {
                    labeled,
                    unlabeled,
                    holdout,
                    model_script,
                    seed: cli.seed,
                },
                &config,
            )?;
            for r in &history.rounds {
                println!(
                    "round {}: holdout IoU {:.4}, pseudo-labeled images added {}",
                    r.round, r.holdout_iou, r.pseudo_added
                );
            }
            if history.early_stopped {
                println!("early stop: holdout IoU regressed beyond tolerance");
            }
            if let Some(w) = &history.warning {
                println!("warning: {w}");
            }
            match out {
                Some(path) => pipeline::write_json(path, &history)?,
                None => println!("{}", to_json(&history)?),
            }
        }
    }
    Ok(())
}

fn to_json<T: serde::Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map_err(|e| Error::parse(e.to_string()))
}
