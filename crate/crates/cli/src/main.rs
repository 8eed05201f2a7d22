use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use msihar::data::DatasetManifest;
use msihar::experiment::{
    compute_msi, run_calibrate, run_eval, run_sweep, write_eval, write_sweep, ExperimentConfig,
};
use msihar::moments::{aggregate_moments, write_moment_csv, MomentParams};
use msihar::msi::write_msi_csv;
use msihar::synth::{generate, write_dataset, SynthConfig};
use msihar::Error;

const EXIT_CONFIG: u8 = 2;
const EXIT_DATA: u8 = 3;

#[derive(Parser)]
#[command(name = "msihar", version, about = "Motion subtlety index and virtual IMU evaluation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Per-window MSI for every video in a manifest.
    Msi {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Experiment config supplying window and MSI parameters.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Calibrate all virtual IMU series against the pooled real data.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validated evaluation on real data, optionally augmented.
    Eval {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        augmented: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cluster positive windows (CSV `t_start,t_end,positive`) into moments.
    Moments {
        #[arg(long)]
        windows: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = MomentParams::default().eps)]
        eps: f64,
        #[arg(long, default_value_t = MomentParams::default().min_pts)]
        min_pts: usize,
    },
    /// MSI cut-off sweep of the F1 change from adding virtual data.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write the synthetic fixture (videos, IMU, manifest and configs).
    Synth {
        #[arg(long)]
        out: PathBuf,
        /// Synth parameters as JSON; defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

struct Failure {
    error: Error,
    code: u8,
}

impl From<Error> for Failure {
    fn from(error: Error) -> Self {
        let code = if error.is_config_error() { EXIT_CONFIG } else { EXIT_DATA };
        Failure { error, code }
    }
}

fn config_failure(error: Error) -> Failure {
    Failure { error, code: EXIT_CONFIG }
}

fn load_config(path: &Path) -> Result<ExperimentConfig, Failure> {
    let cfg = ExperimentConfig::load(path).map_err(config_failure)?;
    cfg.validate().map_err(config_failure)?;
    Ok(cfg)
}

fn print_path(path: &Path) {
    println!("{}", path.display());
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Msi { manifest, out, config } => {
            let cfg = match config {
                Some(p) => load_config(&p)?,
                None => ExperimentConfig::new(&manifest),
            };
            let m = DatasetManifest::load(&manifest)?;
            let (windows, summary) = compute_msi(&m, &cfg.window_spec(), &cfg.msi)?;
            write_msi_csv(&windows, &out)?;
            if summary.skipped > 0 {
                eprintln!("skipped {} windows with too few valid frames", summary.skipped);
            }
            print_path(&out);
        }
        Command::Calibrate { config, out } => {
            let cfg = load_config(&config)?;
            let dir = out.unwrap_or_else(|| cfg.output_dir());
            run_calibrate(&cfg, &dir)?;
            print_path(&dir.join("calibration.json"));
        }
        Command::Eval { config, augmented, out } => {
            let cfg = load_config(&config)?;
            let report = run_eval(&cfg, augmented || cfg.augmented)?;
            let dir = out.unwrap_or_else(|| cfg.output_dir());
            print_path(&write_eval(&report, &dir)?);
        }
        Command::Moments { windows, out, eps, min_pts } => {
            let p = MomentParams { eps, min_pts };
            p.validate().map_err(config_failure)?;
            let (spans, positive) = read_window_predictions(&windows)?;
            let (_, found) = aggregate_moments(&spans, &positive, &p)?;
            write_moment_csv(&found, &out)?;
            print_path(&out);
        }
        Command::Sweep { config, out } => {
            let cfg = load_config(&config)?;
            let (report, windows) = run_sweep(&cfg)?;
            let dir = out.unwrap_or_else(|| cfg.output_dir());
            print_path(&write_sweep(&report, &windows, &dir)?);
        }
        Command::Synth { out, config, seed } => {
            let mut sc = match config {
                Some(p) => {
                    let text = std::fs::read_to_string(&p)
                        .map_err(|e| config_failure(Error::Io { path: p.clone(), source: e }))?;
                    serde_json::from_str(&text).map_err(|e| config_failure(e.into()))?
                }
                None => SynthConfig::default(),
            };
            if let Some(s) = seed {
                sc.seed = s;
            }
            sc.validate().map_err(config_failure)?;
            let data = generate(&sc)?;
            let paths = write_dataset(&data, &out)?;
            print_path(&paths.manifest);
        }
    }
    Ok(())
}

fn read_window_predictions(path: &Path) -> msihar::Result<(Vec<(f64, f64)>, Vec<bool>)> {
    let mut r = csv::Reader::from_path(path)?;
    let headers = r.headers()?.clone();
    let col = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| Error::MalformedHeader(format!("missing column {name}")))
    };
    let (cs, ce, cp) = (col("t_start")?, col("t_end")?, col("positive")?);
    let mut spans = Vec::new();
    let mut positive = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let num = |c: usize| -> msihar::Result<f64> {
            let v: f64 = rec[c].trim().parse().map_err(|_| Error::MalformedRow {
                line,
                reason: format!("not a number: {:?}", &rec[c]),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFiniteValue(format!("row {line}")));
            }
            Ok(v)
        };
        spans.push((num(cs)?, num(ce)?));
        positive.push(match rec[cp].trim() {
            "1" | "true" => true,
            "0" | "false" => false,
            other => {
                return Err(Error::MalformedRow { line, reason: format!("positive must be 0/1, got {other:?}") })
            }
        });
    }
    Ok((spans, positive))
}

#[cfg(feature = "parallel")]
fn configure_pool() -> Result<(), Failure> {
    let Ok(v) = std::env::var("MSIHAR_THREADS") else { return Ok(()) };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| config_failure(Error::ConfigInvalid(format!("MSIHAR_THREADS must be a positive integer, got {v:?}"))))?;
    // Fails only if a global pool already exists, which cannot happen this early.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn configure_pool() -> Result<(), Failure> {
    Ok(())
}

fn report(f: &Failure) {
    let body = serde_json::json!({
        "error": f.error.kind(),
        "message": f.error.to_string(),
        "exit_code": f.code,
    });
    eprintln!("{body}");
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match configure_pool().and_then(|_| run(cli.command)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            report(&f);
            ExitCode::from(f.code)
        }
    }
}
