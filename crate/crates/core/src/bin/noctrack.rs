use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use noctrack::config::{Ablation, ExperimentConfig};
use noctrack::eval::{mota, sequence_average, GtDump, MotaBreakdown};
use noctrack::experiment::{generate_dataset, run_experiment, run_sweep};
use noctrack::track::TrackDump;
use noctrack::{Error, Result};

#[derive(Parser)]
#[command(name = "noctrack", version, about = "Canonical-correspondence 3D multi-object tracking experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (JSON); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated ablation flags: no_completion, no_correspondence_matching.
    #[arg(long)]
    ablation: Option<String>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Write scene scripts, ground truth and canonical object grids.
    Generate(Common),
    /// Run detection, completion and tracking; write dumps and metrics.
    Track(Common),
    /// Score tracklet dumps against ground truth (files or directories).
    Eval {
        #[arg(long)]
        tracks: PathBuf,
        #[arg(long)]
        gt: PathBuf,
        /// Center-distance gate, meters.
        #[arg(long, default_value_t = 0.25)]
        gate: f64,
        #[arg(long)]
        class_gated: bool,
    },
    /// Run the completion-fraction sweep.
    Sweep(Common),
}

fn load(c: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &c.config {
        Some(p) => ExperimentConfig::read(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(s) = c.seed {
        cfg.seed = s;
    }
    if let Some(a) = &c.ablation {
        cfg.ablation = Ablation::parse(a)?;
    }
    if let Some(o) = &c.out {
        cfg.output_dir = o.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Serialize)]
struct EvalSequence {
    sequence: String,
    #[serde(flatten)]
    mota: MotaBreakdown,
}

#[derive(Serialize)]
struct EvalSummary {
    mean_mota: f64,
    pooled_mota: f64,
    sequences: Vec<EvalSequence>,
}

fn json_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| Error::io(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    Ok(files)
}

fn eval(tracks: &Path, gt: &Path, params: &noctrack::eval::MotaParams) -> Result<EvalSummary> {
    let pairs: Vec<(PathBuf, PathBuf)> = if tracks.is_dir() {
        json_files(tracks)?
            .into_iter()
            .map(|t| {
                let g = gt.join(t.file_name().expect("listed file"));
                (t, g)
            })
            .collect()
    } else {
        vec![(tracks.to_path_buf(), gt.to_path_buf())]
    };
    let mut sequences = Vec::with_capacity(pairs.len());
    for (t, g) in pairs {
        let pred = TrackDump::read(&t)?;
        let truth = GtDump::read(&g)?;
        sequences.push(EvalSequence {
            sequence: truth.sequence.clone(),
            mota: mota(&pred, &truth, params)?,
        });
    }
    let parts: Vec<MotaBreakdown> = sequences.iter().map(|s| s.mota.clone()).collect();
    Ok(EvalSummary {
        mean_mota: sequence_average(&parts),
        pooled_mota: MotaBreakdown::pooled(&parts).mota,
        sequences,
    })
}

#[derive(Serialize)]
struct Summary<'a> {
    output_dir: &'a Path,
    variants: Vec<VariantLine<'a>>,
}

#[derive(Serialize)]
struct VariantLine<'a> {
    name: &'a str,
    mean_mota: f64,
    mean_completion_iou: Option<f64>,
    median_rotation_deg: Option<f64>,
}

fn summary<'a>(dir: &'a Path, r: &'a noctrack::experiment::ExperimentReport) -> Summary<'a> {
    Summary {
        output_dir: dir,
        variants: r
            .variants
            .iter()
            .map(|v| VariantLine {
                name: &v.name,
                mean_mota: v.mean_mota,
                mean_completion_iou: v.mean_completion_iou,
                median_rotation_deg: v.median_rotation_deg,
            })
            .collect(),
    }
}

fn run(cli: Cli) -> Result<String> {
    match cli.command {
        Command::Generate(c) => {
            let cfg = load(&c)?;
            let files = generate_dataset(&cfg, &cfg.output_dir)?;
            Ok(serde_json::to_string_pretty(&serde_json::json!({
                "output_dir": cfg.output_dir,
                "files": files.len(),
            }))?)
        }
        Command::Track(c) => {
            let cfg = load(&c)?;
            let report = run_experiment(&cfg)?;
            Ok(serde_json::to_string_pretty(&summary(&cfg.output_dir, &report))?)
        }
        Command::Sweep(c) => {
            let cfg = load(&c)?;
            let report = run_sweep(&cfg)?;
            let mut v = serde_json::to_value(summary(&cfg.output_dir, &report))?;
            v["completion_mota_spearman"] = serde_json::json!(report.completion_mota_spearman);
            Ok(serde_json::to_string_pretty(&v)?)
        }
        Command::Eval {
            tracks,
            gt,
            gate,
            class_gated,
        } => {
            let params = noctrack::eval::MotaParams { gate, class_gated };
            Ok(serde_json::to_string_pretty(&eval(&tracks, &gt, &params)?)?)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(out) => {
            println!("{out}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            let err = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{err}");
            ExitCode::FAILURE
        }
    }
}
