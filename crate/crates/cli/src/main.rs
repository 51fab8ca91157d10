use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use mmrecon::imaging::write_gray_pgm;
use mmrecon::metrics::{LossType, ModelVariant};
use mmrecon::pipeline::{
    compare_sar_modes, corruption_study, eval_experiment, gen_dataset, load_refiner, plan_dataset, reference_scene, run_variant, scene_instance, sense,
    train_on_dataset, ExperimentConfig,
};
use mmrecon::pointcloud::{read_ply, read_xyz, write_ply, write_xyz, PlyEncoding};
use mmrecon::radar::{max_projection, read_heatmap, ProjectionAxis};
use mmrecon::{seed, Error, Result};

/// Synthetic mmWave SAR scanning and multi-object point cloud reconstruction.
#[derive(Debug, Parser)]
#[command(name = "mmrecon", version)]
struct Cli {
    /// Master seed; overrides the config file's `seed`.
    #[arg(long, global = true, env = "MMRECON_SEED")]
    seed: Option<u64>,
    /// Log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Variant {
    Model1,
    Model2,
}

impl From<Variant> for ModelVariant {
    fn from(v: Variant) -> Self {
        match v {
            Variant::Model1 => ModelVariant::Model1,
            Variant::Model2 => ModelVariant::Model2,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Loss {
    Cd,
    Emd,
}

impl From<Loss> for LossType {
    fn from(l: Loss) -> Self {
        match l {
            Loss::Cd => LossType::Cd,
            Loss::Emd => LossType::Emd,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Axis {
    Range,
    Azimuth,
    Elevation,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one scene through every configured setting and write all artifacts.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Scene type; defaults to the config's first scene.
        #[arg(long)]
        scene: Option<String>,
        /// Use a seeded random layout instead of the reference layout.
        #[arg(long)]
        random_layout: bool,
    },
    /// Generate a dataset, or only print its plan.
    Dataset {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        count: usize,
        #[arg(long, required_unless_present = "plan_only")]
        out: Option<PathBuf>,
        #[arg(long)]
        plan_only: bool,
    },
    /// Train a refiner on a dataset's train split.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_enum)]
        variant: Variant,
        #[arg(long, value_enum, default_value = "cd")]
        loss: Loss,
        /// Checkpoint file (model1) or directory (model2).
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate every configured setting on a dataset's test split.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        data: PathBuf,
        /// Directory for report.json, report.csv and table.txt.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Compare normal and vibrating SAR heatmaps of the reference scene.
    CompareSar {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Sweep mask corruption on the smallest (or configured) object.
    CorruptionStudy {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.25, 0.5, 0.75, 1.0])]
        p: Vec<f64>,
        #[arg(long, default_value_t = 5)]
        seeds: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Convert point clouds (.ply/.xyz) or project heatmaps (.bin) to PGM.
    Export {
        input: PathBuf,
        output: PathBuf,
        /// Axis collapsed when projecting a heatmap.
        #[arg(long, value_enum, default_value = "elevation")]
        axis: Axis,
        /// Write ASCII instead of binary PLY.
        #[arg(long)]
        ascii: bool,
    },
}

fn load_config(path: &Path, seed: Option<u64>) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, serde_json::to_string_pretty(value).expect("serializable"))?;
    Ok(())
}

fn extension(path: &Path) -> String {
    path.extension().and_then(|e| e.to_str()).unwrap_or_default().to_ascii_lowercase()
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate { config, out, scene, random_layout } => {
            let cfg = load_config(&config, cli.seed)?;
            cfg.require_checkpoints()?;
            let scene_type = scene.unwrap_or_else(|| cfg.scenes[0].clone());
            let scene_seed = seed::derive(cfg.seed, "simulate", 0);
            let scene = if random_layout { scene_instance(&scene_type, scene_seed)? } else { reference_scene(&scene_type)? };
            let sensed = sense(&scene, &cfg, scene_seed).map_err(|e| e.in_stage("sensing"))?;
            fs::create_dir_all(&out)?;
            fs::write(out.join("config.toml"), cfg.to_toml())?;
            for (i, setting) in cfg.settings.iter().enumerate() {
                let refiner = load_refiner(&setting.refiner, setting.variant)?;
                let dir = out.join(format!("setting{i}"));
                let mut result = run_variant(setting.variant, &sensed, &cfg, refiner.as_ref(), Some(&dir))?;
                result.record.scene_id = scene_type.clone();
                write_json(&dir.join("record.json"), &result.record)?;
                for label in &result.record.lost_objects {
                    println!("setting {i}: object {label} LOST");
                }
                println!("setting {i} ({} {}): {} points -> {}", setting.variant, setting.loss, result.cloud.len(), dir.join("refined.ply").display());
            }
        }
        Command::Dataset { config, count, out, plan_only } => {
            let cfg = load_config(&config, cli.seed)?;
            let manifest = match (plan_only, out) {
                (true, out) => {
                    let m = plan_dataset(&cfg, count)?;
                    if let Some(dir) = out {
                        m.save(&dir)?;
                    }
                    m
                }
                (false, Some(dir)) => gen_dataset(&cfg, count, &dir)?,
                (false, None) => unreachable!("clap requires --out"),
            };
            println!("{} instances, {} views, {} image pairs", manifest.count, manifest.views, manifest.image_pairs);
        }
        Command::Train { config, data, variant, loss, out } => {
            let cfg = load_config(&config, cli.seed)?;
            let logs = train_on_dataset(&cfg, &data, variant.into(), loss.into(), &out).map_err(|e| e.in_stage("training"))?;
            for (label, log) in logs {
                println!(
                    "label {label}: loss {:.6} -> {:.6} over {} epochs",
                    log.first_loss().unwrap_or(f64::NAN),
                    log.last_loss().unwrap_or(f64::NAN),
                    log.epochs.len()
                );
            }
        }
        Command::Eval { config, data, out } => {
            let cfg = load_config(&config, cli.seed)?;
            let report = eval_experiment(&cfg, &data)?;
            let table = report.render_table();
            print!("{table}");
            if let Some(dir) = out {
                write_json(&dir.join("report.json"), &report)?;
                fs::write(dir.join("report.csv"), report.to_csv())?;
                fs::write(dir.join("table.txt"), table)?;
            }
        }
        Command::CompareSar { config, seeds, out } => {
            let cfg = load_config(&config, cli.seed)?;
            let cmp = compare_sar_modes(&cfg, seeds, out.as_deref())?;
            println!("normal peak/background {:.6e}", cmp.normal_ratio);
            println!("vibrating peak/background mean {:.6e} over {} seeds", cmp.vibrating_mean, cmp.vibrating_ratios.len());
            if let Some(dir) = out {
                write_json(&dir.join("comparison.json"), &cmp)?;
            }
        }
        Command::CorruptionStudy { config, p, seeds, out } => {
            let cfg = load_config(&config, cli.seed)?;
            let study = corruption_study(&cfg, &p, seeds)?;
            print!("{}", study.to_csv());
            for r in study.rows.iter().filter(|r| r.lost > 0) {
                println!("p={}: target object {} LOST on {}/{} seeds", r.p, study.target, r.lost, r.off_surface.len());
            }
            if let Some(dir) = out {
                write_json(&dir.join("corruption.json"), &study)?;
                fs::write(dir.join("corruption.csv"), study.to_csv())?;
            }
        }
        Command::Export { input, output, axis, ascii } => export(&input, &output, axis, ascii)?,
    }
    Ok(())
}

fn export(input: &Path, output: &Path, axis: Axis, ascii: bool) -> Result<()> {
    match (extension(input).as_str(), extension(output).as_str()) {
        ("bin", "pgm") => {
            let h = read_heatmap(input)?;
            let axis = match axis {
                Axis::Range => ProjectionAxis::Range,
                Axis::Azimuth => ProjectionAxis::Azimuth,
                Axis::Elevation => ProjectionAxis::Elevation,
            };
            let (w, ht, values) = max_projection(&h, axis);
            write_gray_pgm(w, ht, &values, output)
        }
        (src @ ("ply" | "xyz"), dst @ ("ply" | "xyz")) => {
            let pc = if src == "ply" { read_ply(input)? } else { read_xyz(input)? };
            if dst == "ply" {
                write_ply(&pc, output, if ascii { PlyEncoding::Ascii } else { PlyEncoding::BinaryLittleEndian })
            } else {
                write_xyz(&pc, output)
            }
        }
        (src, dst) => Err(Error::Invalid(format!("cannot export .{src} to .{dst}; supported: ply/xyz <-> ply/xyz, heatmap .bin -> .pgm"))),
    }
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
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
