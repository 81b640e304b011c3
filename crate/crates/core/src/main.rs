//! Command-line front end.
//!
//! Exit codes: 0 success, 1 configuration error, 2 runtime or grid-point
//! failure. Every command prints its report as JSON on stdout; `--record`
//! additionally writes the full result record (config + output + timing).

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use sparsecert::error::Error;
use sparsecert::geometry::GeometryConstants;
use sparsecert::harness::{
    self, CertifyConfig, CommandOutput, ExperimentConfig, GeometryConfig, ResultRecord,
    SweepConfig, WeakSimConfig,
};

#[derive(Parser)]
#[command(
    name = "sparsecert",
    version,
    about = "Certify the sparse-recovery power of sensing matrices"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonOut {
    /// Write the full result record (config + output + timing) to this file.
    #[arg(long)]
    record: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a seeded random matrix file (gaussian:m,n or rademacher:m,n).
    Gen {
        /// Generator spec, e.g. gaussian:4,8
        spec: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output matrix file.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: CommonOut,
    },
    /// Bound the nullspace ratio of a matrix and report certified recovery.
    Certify {
        /// Matrix file, or a generator spec like gaussian:m,n.
        #[arg(long)]
        matrix: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also compute the exact ratio by vertex enumeration (n <= 14, m <= 7).
        #[arg(long)]
        exact: bool,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 1e-5)]
        sdp_tol: f64,
        #[arg(long, default_value_t = 100_000)]
        sdp_max_iters: usize,
        /// Skip the (quadratically sized) linear relaxation.
        #[arg(long)]
        skip_lp: bool,
        /// Write the SDP residual trace to a CSV file.
        #[arg(long)]
        diagnostics_csv: Option<PathBuf>,
        #[command(flatten)]
        common: CommonOut,
    },
    /// l1-decode a signal file against a matrix.
    Decode {
        #[arg(long)]
        matrix: String,
        /// Signal file (n x 1 matrix format); measurements are A * signal.
        #[arg(long)]
        signal: PathBuf,
        /// Constrain the decoder to the unit box.
        #[arg(long = "box")]
        boxed: bool,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[command(flatten)]
        common: CommonOut,
    },
    /// Weak-recovery bounds plus a Monte-Carlo failure-rate estimate.
    WeakSim {
        #[arg(long)]
        matrix: String,
        /// Expected signal cardinality.
        #[arg(long)]
        k: f64,
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, default_value_t = 1.5)]
        beta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 1e-5)]
        sdp_tol: f64,
        #[arg(long, default_value_t = 100_000)]
        sdp_max_iters: usize,
        #[command(flatten)]
        common: CommonOut,
    },
    /// Geometric estimators for the nullspace normed space.
    Geometry {
        #[arg(long)]
        matrix: String,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// Samples for the dual-mean estimate (one LP each).
        #[arg(long)]
        mstar_samples: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Codimension for the diameter bound (default: half the nullspace
        /// dimension).
        #[arg(long)]
        codim: Option<usize>,
        /// Absolute constants, e.g. c=1,c1=1,c2=1,c3=1.
        #[arg(long)]
        constants: Option<String>,
        #[arg(long, default_value_t = 1e-7)]
        tol: f64,
        #[command(flatten)]
        common: CommonOut,
    },
    /// Certify a grid of random matrices; one CSV row per grid point.
    Sweep {
        /// Row counts, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        m: Vec<usize>,
        /// Column counts, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        n: Vec<usize>,
        /// Expected cardinalities for weak-recovery rows (optional).
        #[arg(long, value_delimiter = ',')]
        k: Vec<f64>,
        /// Monte-Carlo trials per weak-recovery row (0 disables).
        #[arg(long, default_value_t = 0)]
        trials: usize,
        #[arg(long, default_value_t = 1.5)]
        beta: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Matrix ensemble: gaussian or rademacher.
        #[arg(long, default_value = "gaussian")]
        ensemble: String,
        /// Also compute the exact ratio where the instance is small enough.
        #[arg(long)]
        exact: bool,
        /// Also compute the linear relaxation per point.
        #[arg(long)]
        lp: bool,
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        #[arg(long, default_value_t = 1e-5)]
        sdp_tol: f64,
        #[arg(long, default_value_t = 100_000)]
        sdp_max_iters: usize,
        #[arg(long)]
        out_csv: PathBuf,
        #[arg(long)]
        out_json: Option<PathBuf>,
        /// Concurrent grid points (default: SPARSECERT_WORKERS or all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Field for the x column of an extra plot CSV (with --plot-y/--plot-out).
        #[arg(long)]
        plot_x: Option<String>,
        /// Field for the y column, e.g. certificate.sdp.
        #[arg(long)]
        plot_y: Option<String>,
        #[arg(long)]
        plot_out: Option<PathBuf>,
        #[command(flatten)]
        common: CommonOut,
    },
}

fn parse_constants(spec: &Option<String>) -> Result<GeometryConstants, Error> {
    let mut constants = GeometryConstants::default();
    let Some(spec) = spec else {
        return Ok(constants);
    };
    for pair in spec.split(',') {
        let (key, value) = pair
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("constant {pair:?} must look like c=1.0")))?;
        let value: f64 = value
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad constant value in {pair:?}")))?;
        match key.trim() {
            "c" => constants.c = value,
            "c1" => constants.c1 = value,
            "c2" => constants.c2 = value,
            "c3" => constants.c3 = value,
            other => return Err(Error::Config(format!("unknown constant {other:?}"))),
        }
    }
    Ok(constants)
}

fn to_config(command: &Command) -> Result<(ExperimentConfig, Option<PathBuf>), Error> {
    let path_str = |p: &PathBuf| p.to_string_lossy().into_owned();
    Ok(match command {
        Command::Gen {
            spec,
            seed,
            out,
            common,
        } => (
            ExperimentConfig::Gen {
                spec: spec.clone(),
                seed: *seed,
                out: path_str(out),
            },
            common.record.clone(),
        ),
        Command::Certify {
            matrix,
            seed,
            exact,
            tol,
            sdp_tol,
            sdp_max_iters,
            skip_lp,
            diagnostics_csv,
            common,
        } => (
            ExperimentConfig::Certify(CertifyConfig {
                matrix: matrix.clone(),
                seed: *seed,
                exact: *exact,
                tol: *tol,
                sdp_tol: *sdp_tol,
                sdp_max_iters: *sdp_max_iters,
                skip_lp: *skip_lp,
                diagnostics_csv: diagnostics_csv.as_ref().map(|p| path_str(p)),
            }),
            common.record.clone(),
        ),
        Command::Decode {
            matrix,
            signal,
            boxed,
            tol,
            common,
        } => (
            ExperimentConfig::Decode {
                matrix: matrix.clone(),
                signal: path_str(signal),
                boxed: *boxed,
                tol: *tol,
            },
            common.record.clone(),
        ),
        Command::WeakSim {
            matrix,
            k,
            trials,
            beta,
            seed,
            tol,
            sdp_tol,
            sdp_max_iters,
            common,
        } => (
            ExperimentConfig::WeakSim(WeakSimConfig {
                matrix: matrix.clone(),
                k: *k,
                trials: *trials,
                beta: *beta,
                seed: *seed,
                tol: *tol,
                sdp_tol: *sdp_tol,
                sdp_max_iters: *sdp_max_iters,
            }),
            common.record.clone(),
        ),
        Command::Geometry {
            matrix,
            samples,
            mstar_samples,
            seed,
            codim,
            constants,
            tol,
            common,
        } => (
            ExperimentConfig::Geometry(GeometryConfig {
                matrix: matrix.clone(),
                samples: *samples,
                mstar_samples: *mstar_samples,
                seed: *seed,
                codim: *codim,
                constants: parse_constants(constants)?,
                tol: *tol,
            }),
            common.record.clone(),
        ),
        Command::Sweep {
            m,
            n,
            k,
            trials,
            beta,
            seed,
            ensemble,
            exact,
            lp,
            tol,
            sdp_tol,
            sdp_max_iters,
            out_csv,
            out_json,
            workers,
            common,
            ..
        } => {
            let workers = workers.or_else(|| {
                std::env::var("SPARSECERT_WORKERS")
                    .ok()
                    .and_then(|v| v.parse().ok())
            });
            (
                ExperimentConfig::Sweep(SweepConfig {
                    m: m.clone(),
                    n: n.clone(),
                    k: k.clone(),
                    trials: *trials,
                    beta: *beta,
                    seed: *seed,
                    ensemble: ensemble.clone(),
                    exact: *exact,
                    with_lp: *lp,
                    tol: *tol,
                    sdp_tol: *sdp_tol,
                    sdp_max_iters: *sdp_max_iters,
                    out_csv: path_str(out_csv),
                    out_json: out_json.as_ref().map(|p| path_str(p)),
                    workers,
                }),
                common.record.clone(),
            )
        }
    })
}

fn emit(record: &ResultRecord, record_path: Option<&PathBuf>) -> Result<(), Error> {
    println!("{}", serde_json::to_string_pretty(&record.output)?);
    if let Some(path) = record_path {
        std::fs::write(path, serde_json::to_string_pretty(record)?)?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (config, record_path) = match to_config(&cli.command) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Err(e) = config.validate() {
        eprintln!("error: {e}");
        return ExitCode::from(1);
    }
    let record = match harness::run(&config) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let (
        Command::Sweep {
            plot_x: Some(x),
            plot_y: Some(y),
            plot_out: Some(out),
            ..
        },
        CommandOutput::Sweep(sweep),
    ) = (&cli.command, &record.output)
    {
        match harness::sweep_plot_csv(&sweep.rows, x, y) {
            Ok(csv) => {
                if let Err(e) = std::fs::write(out, csv) {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            }
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(2);
            }
        }
    }
    let had_point_failures = matches!(
        &record.output,
        CommandOutput::Sweep(s) if s.failures > 0
    );
    if let Err(e) = emit(&record, record_path.as_ref()) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    if had_point_failures {
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
