//! Experiment harness behind the command-line interface: matrix generation,
//! certification, decoding, weak-recovery simulation, geometry reports and
//! grid sweeps, all seeded and reproducible.
//!
//! Every command produces a JSON-serializable output value; a
//! [`ResultRecord`] wraps it together with the configuration snapshot so a
//! run can be reproduced bit for bit (wall-clock time is the only field that
//! changes between identical runs).

use std::path::Path;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::certify::{certificate, CertificateReport, CertifyOptions, SensingMatrix};
use crate::error::{Error, Result};
use crate::geometry::{geometry_report, GeometryConstants, GeometryOptions, GeometryReport};
use crate::io;
use crate::linalg::{gaussian_matrix, rademacher_matrix};
use crate::recover::{decode_signal, DecodeResult, SparseSignal};
use crate::rng::{streams, RngStream};
use crate::weak::{
    monte_carlo_membership_rate, weak_report, MonteCarloRate, SignalModel, WeakBoundReport,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Where a matrix comes from: a file, or a seeded generator.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MatrixSource {
    File { path: String },
    Gaussian { m: usize, n: usize },
    Rademacher { m: usize, n: usize },
}

impl MatrixSource {
    /// Parse `gaussian:m,n`, `rademacher:m,n`, or a file path.
    pub fn parse(spec: &str) -> Result<Self> {
        for (prefix, gaussian) in [("gaussian:", true), ("rademacher:", false)] {
            if let Some(rest) = spec.strip_prefix(prefix) {
                let parts: Vec<&str> = rest.split(',').collect();
                if parts.len() != 2 {
                    return Err(Error::Config(format!(
                        "generator spec {spec:?} must be {prefix}m,n"
                    )));
                }
                let m: usize = parts[0].trim().parse().map_err(|_| {
                    Error::Config(format!("bad row count in generator spec {spec:?}"))
                })?;
                let n: usize = parts[1].trim().parse().map_err(|_| {
                    Error::Config(format!("bad column count in generator spec {spec:?}"))
                })?;
                if m == 0 || n == 0 {
                    return Err(Error::Config("generator dimensions must be positive".into()));
                }
                return Ok(if gaussian {
                    MatrixSource::Gaussian { m, n }
                } else {
                    MatrixSource::Rademacher { m, n }
                });
            }
        }
        Ok(MatrixSource::File { path: spec.into() })
    }

    pub fn load(&self, seed: u64) -> Result<DMatrix<f64>> {
        match self {
            MatrixSource::File { path } => io::read_matrix_file(Path::new(path)),
            MatrixSource::Gaussian { m, n } => {
                gaussian_matrix(*m, *n, &RngStream::new(seed, streams::MATRIX_GEN))
            }
            MatrixSource::Rademacher { m, n } => {
                rademacher_matrix(*m, *n, &RngStream::new(seed, streams::MATRIX_GEN))
            }
        }
    }

    fn validate(&self) -> Result<()> {
        if let MatrixSource::File { path } = self {
            if !Path::new(path).exists() {
                return Err(Error::Config(format!("matrix file {path:?} does not exist")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CertifyConfig {
    pub matrix: String,
    pub seed: u64,
    pub exact: bool,
    pub tol: f64,
    pub sdp_tol: f64,
    pub sdp_max_iters: usize,
    pub skip_lp: bool,
    pub diagnostics_csv: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeakSimConfig {
    pub matrix: String,
    pub k: f64,
    pub trials: usize,
    pub beta: f64,
    pub seed: u64,
    pub tol: f64,
    pub sdp_tol: f64,
    pub sdp_max_iters: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GeometryConfig {
    pub matrix: String,
    pub samples: usize,
    pub mstar_samples: Option<usize>,
    pub seed: u64,
    pub codim: Option<usize>,
    pub constants: GeometryConstants,
    pub tol: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepConfig {
    pub m: Vec<usize>,
    pub n: Vec<usize>,
    pub k: Vec<f64>,
    pub trials: usize,
    pub beta: f64,
    pub seed: u64,
    pub ensemble: String,
    pub exact: bool,
    pub with_lp: bool,
    pub tol: f64,
    pub sdp_tol: f64,
    pub sdp_max_iters: usize,
    pub out_csv: String,
    pub out_json: Option<String>,
    pub workers: Option<usize>,
}

/// One validated command.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "command", rename_all = "kebab-case")]
pub enum ExperimentConfig {
    Gen {
        spec: String,
        seed: u64,
        out: String,
    },
    Certify(CertifyConfig),
    Decode {
        matrix: String,
        signal: String,
        boxed: bool,
        tol: f64,
    },
    WeakSim(WeakSimConfig),
    Geometry(GeometryConfig),
    Sweep(SweepConfig),
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        match self {
            ExperimentConfig::Gen { spec, .. } => {
                match MatrixSource::parse(spec)? {
                    MatrixSource::File { path } => Err(Error::Config(format!(
                        "gen needs a generator spec like gaussian:m,n, got {path:?}"
                    ))),
                    _ => Ok(()),
                }
            }
            ExperimentConfig::Certify(c) => MatrixSource::parse(&c.matrix)?.validate(),
            ExperimentConfig::Decode { matrix, signal, .. } => {
                MatrixSource::parse(matrix)?.validate()?;
                if !Path::new(signal).exists() {
                    return Err(Error::Config(format!(
                        "signal file {signal:?} does not exist"
                    )));
                }
                Ok(())
            }
            ExperimentConfig::WeakSim(c) => {
                if c.trials == 0 {
                    return Err(Error::Config("trials must be at least 1".into()));
                }
                MatrixSource::parse(&c.matrix)?.validate()
            }
            ExperimentConfig::Geometry(c) => {
                if c.samples < 2 {
                    return Err(Error::Config("samples must be at least 2".into()));
                }
                MatrixSource::parse(&c.matrix)?.validate()
            }
            ExperimentConfig::Sweep(c) => {
                if c.m.is_empty() || c.n.is_empty() {
                    return Err(Error::Config("sweep grids need at least one m and one n".into()));
                }
                if !matches!(c.ensemble.as_str(), "gaussian" | "rademacher") {
                    return Err(Error::Config(format!(
                        "unknown ensemble {:?} (gaussian or rademacher)",
                        c.ensemble
                    )));
                }
                Ok(())
            }
        }
    }
}

/// Output payload per command.
#[derive(Debug, Clone, Serialize)]
#[serde(untagged)]
pub enum CommandOutput {
    Gen(GenOutput),
    Certificate(CertificateReport),
    Decode(DecodeResult),
    Weak(WeakSimOutput),
    Geometry(GeometryReport),
    Sweep(SweepOutput),
}

#[derive(Debug, Clone, Serialize)]
pub struct GenOutput {
    pub written: String,
    pub rows: usize,
    pub cols: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct WeakSimOutput {
    pub bounds: WeakBoundReport,
    pub empirical: MonteCarloRate,
    pub s_upper_diag: CertificateReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub index: usize,
    pub m: usize,
    pub n: usize,
    pub k: Option<f64>,
    pub certificate: Option<CertificateReport>,
    pub weak: Option<WeakBoundReport>,
    pub empirical: Option<MonteCarloRate>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub failures: usize,
    pub csv_path: String,
}

/// Configuration snapshot plus outputs; identical config and seed reproduce
/// every field except `wall_clock_ms`.
#[derive(Debug, Clone, Serialize)]
pub struct ResultRecord {
    pub config: ExperimentConfig,
    pub output: CommandOutput,
    pub wall_clock_ms: f64,
    pub version: String,
}

/// Validate and execute one command.
pub fn run(config: &ExperimentConfig) -> Result<ResultRecord> {
    config.validate()?;
    let start = Instant::now();
    let output = match config {
        ExperimentConfig::Gen { spec, seed, out } => run_gen(spec, *seed, out)?,
        ExperimentConfig::Certify(c) => run_certify(c)?,
        ExperimentConfig::Decode {
            matrix,
            signal,
            boxed,
            tol,
        } => run_decode(matrix, signal, *boxed, *tol)?,
        ExperimentConfig::WeakSim(c) => run_weak_sim(c)?,
        ExperimentConfig::Geometry(c) => run_geometry(c)?,
        ExperimentConfig::Sweep(c) => run_sweep(c)?,
    };
    Ok(ResultRecord {
        config: config.clone(),
        output,
        wall_clock_ms: start.elapsed().as_secs_f64() * 1e3,
        version: VERSION.to_string(),
    })
}

fn run_gen(spec: &str, seed: u64, out: &str) -> Result<CommandOutput> {
    let source = MatrixSource::parse(spec)?;
    let matrix = source.load(seed)?;
    io::write_matrix_file(Path::new(out), &matrix)?;
    Ok(CommandOutput::Gen(GenOutput {
        written: out.to_string(),
        rows: matrix.nrows(),
        cols: matrix.ncols(),
    }))
}

fn certify_opts(tol: f64, sdp_tol: f64, sdp_max_iters: usize, exact: bool, lp: bool) -> CertifyOptions {
    CertifyOptions {
        tol,
        sdp_tol,
        sdp_max_iters,
        exact,
        lp,
        trace_every: 0,
    }
}

fn run_certify(c: &CertifyConfig) -> Result<CommandOutput> {
    let a = SensingMatrix::new(MatrixSource::parse(&c.matrix)?.load(c.seed)?)?;
    let mut opts = certify_opts(c.tol, c.sdp_tol, c.sdp_max_iters, c.exact, !c.skip_lp);
    if c.diagnostics_csv.is_some() {
        opts.trace_every = 100;
    }
    let report = certificate(&a, &opts)?;
    if let Some(path) = &c.diagnostics_csv {
        let (_, trace) = crate::certify::sdp_bound_with(&a, &opts)?;
        let mut csv = String::from("iteration,primal_residual,dual_residual,objective\n");
        for row in trace {
            csv.push_str(&format!(
                "{},{:e},{:e},{:e}\n",
                row.iteration, row.primal_residual, row.dual_residual, row.objective
            ));
        }
        std::fs::write(path, csv)?;
    }
    Ok(CommandOutput::Certificate(report))
}

fn run_decode(matrix: &str, signal: &str, boxed: bool, tol: f64) -> Result<CommandOutput> {
    let a = SensingMatrix::new(MatrixSource::parse(matrix)?.load(0)?)?;
    let u = SparseSignal::new(io::read_vector_file(Path::new(signal))?);
    if u.len() != a.cols() {
        return Err(Error::Dimension(format!(
            "signal has {} entries for {} columns",
            u.len(),
            a.cols()
        )));
    }
    let result = decode_signal(&a, &u, boxed, tol)?;
    Ok(CommandOutput::Decode(result))
}

fn run_weak_sim(c: &WeakSimConfig) -> Result<CommandOutput> {
    let a = SensingMatrix::new(MatrixSource::parse(&c.matrix)?.load(c.seed)?)?;
    let report = certificate(
        &a,
        &certify_opts(c.tol.min(1e-8), c.sdp_tol, c.sdp_max_iters, false, false),
    )?;
    let model = SignalModel::new(a.cols(), c.k)?;
    let bounds = weak_report(report.s_upper, &model, c.beta)?;
    let empirical = monte_carlo_membership_rate(
        &a,
        &model,
        c.trials,
        &RngStream::new(c.seed, streams::TRIALS),
        c.tol,
    )?;
    Ok(CommandOutput::Weak(WeakSimOutput {
        bounds,
        empirical,
        s_upper_diag: report,
    }))
}

fn run_geometry(c: &GeometryConfig) -> Result<CommandOutput> {
    let a = SensingMatrix::new(MatrixSource::parse(&c.matrix)?.load(c.seed)?)?;
    let report = geometry_report(
        &a,
        &GeometryOptions {
            samples: c.samples,
            mstar_samples: c.mstar_samples,
            stream: RngStream::new(c.seed, streams::SPHERE),
            codim: c.codim,
            constants: c.constants,
            tol: c.tol,
        },
    )?;
    Ok(CommandOutput::Geometry(report))
}

fn run_sweep(c: &SweepConfig) -> Result<CommandOutput> {
    let mut grid: Vec<(usize, usize, Option<f64>)> = Vec::new();
    for &m in &c.m {
        for &n in &c.n {
            if c.k.is_empty() {
                grid.push((m, n, None));
            } else {
                for &k in &c.k {
                    grid.push((m, n, Some(k)));
                }
            }
        }
    }

    let run_point = |(index, &(m, n, k)): (usize, &(usize, usize, Option<f64>))| -> SweepRow {
        let mut row = SweepRow {
            index,
            m,
            n,
            k,
            certificate: None,
            weak: None,
            empirical: None,
            error: None,
        };
        let outcome = (|| -> Result<()> {
            let seed = c.seed.wrapping_add(index as u64);
            let stream = RngStream::new(seed, streams::MATRIX_GEN);
            let matrix = match c.ensemble.as_str() {
                "rademacher" => rademacher_matrix(m, n, &stream)?,
                _ => gaussian_matrix(m, n, &stream)?,
            };
            let a = SensingMatrix::new(matrix)?;
            let exact = c.exact && n <= 14 && m <= 7;
            let report = certificate(
                &a,
                &certify_opts(c.tol, c.sdp_tol, c.sdp_max_iters, exact, c.with_lp),
            )?;
            if let Some(k) = k {
                let model = SignalModel::new(n, k)?;
                row.weak = Some(weak_report(report.s_upper, &model, c.beta)?);
                if c.trials > 0 {
                    row.empirical = Some(monte_carlo_membership_rate(
                        &a,
                        &model,
                        c.trials,
                        &RngStream::new(seed, streams::TRIALS),
                        c.tol,
                    )?);
                }
            }
            row.certificate = Some(report);
            Ok(())
        })();
        if let Err(e) = outcome {
            row.error = Some(e.to_string());
        }
        row
    };

    let rows: Vec<SweepRow> = if let Some(workers) = c.workers {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers.max(1))
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))?;
        pool.install(|| grid.par_iter().enumerate().map(run_point).collect())
    } else {
        grid.par_iter().enumerate().map(run_point).collect()
    };

    let failures = rows.iter().filter(|r| r.error.is_some()).count();
    let csv = sweep_csv(&rows);
    std::fs::write(&c.out_csv, csv)?;
    let output = SweepOutput {
        rows,
        failures,
        csv_path: c.out_csv.clone(),
    };
    if let Some(path) = &c.out_json {
        std::fs::write(path, serde_json::to_string_pretty(&output.rows)?)?;
    }
    Ok(CommandOutput::Sweep(output))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x:e}"))
}

/// Flat CSV, one row per grid point, stable column set.
pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(
        "index,m,n,k,alpha1,sdp,lp,s_lower,s_upper,s_exact,recovery_S,certified_cardinality,\
         tail_probability,condition_holds,empirical_rate,wilson_halfwidth,error\n",
    );
    for row in rows {
        let cert = row.certificate.as_ref();
        let fields = [
            row.index.to_string(),
            row.m.to_string(),
            row.n.to_string(),
            fmt_opt(row.k),
            fmt_opt(cert.map(|c| c.alpha1)),
            fmt_opt(cert.map(|c| c.sdp)),
            fmt_opt(cert.and_then(|c| c.lp)),
            fmt_opt(cert.map(|c| c.s_lower)),
            fmt_opt(cert.map(|c| c.s_upper)),
            fmt_opt(cert.and_then(|c| c.s_exact)),
            fmt_opt(cert.and_then(|c| c.recovery_s)),
            cert.map_or(String::new(), |c| c.certified_cardinality.to_string()),
            fmt_opt(row.weak.as_ref().map(|w| w.tail_probability)),
            row.weak
                .as_ref()
                .map_or(String::new(), |w| w.condition_holds.to_string()),
            fmt_opt(row.empirical.as_ref().map(|e| e.rate)),
            fmt_opt(row.empirical.as_ref().map(|e| e.wilson_halfwidth)),
            row.error.clone().unwrap_or_default().replace(',', ";"),
        ];
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

/// Two-column CSV of one numeric field against another, rows sorted by the
/// x value (ties keep record order). Fields are looked up in the serialized
/// record, first in the output object, then at the top level.
pub fn emit_plot_data(records: &[ResultRecord], x: &str, y: &str) -> Result<String> {
    let mut points = Vec::with_capacity(records.len());
    for record in records {
        let value = serde_json::to_value(record)?;
        let xv = lookup_numeric(&value, x)
            .ok_or_else(|| Error::FieldMissing(x.to_string()))?;
        let yv = lookup_numeric(&value, y)
            .ok_or_else(|| Error::FieldMissing(y.to_string()))?;
        points.push((xv, yv));
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = format!("{x},{y}\n");
    for (xv, yv) in points {
        out.push_str(&format!("{xv:e},{yv:e}\n"));
    }
    Ok(out)
}

/// Plot CSV over sweep rows; field paths are dotted, e.g. `n` or
/// `certificate.sdp`.
pub fn sweep_plot_csv(rows: &[SweepRow], x: &str, y: &str) -> Result<String> {
    let mut points = Vec::with_capacity(rows.len());
    for row in rows {
        let value = serde_json::to_value(row)?;
        let xv = lookup_numeric(&value, x).ok_or_else(|| Error::FieldMissing(x.to_string()))?;
        let yv = lookup_numeric(&value, y).ok_or_else(|| Error::FieldMissing(y.to_string()))?;
        points.push((xv, yv));
    }
    points.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = format!("{x},{y}\n");
    for (xv, yv) in points {
        out.push_str(&format!("{xv:e},{yv:e}\n"));
    }
    Ok(out)
}

fn lookup_numeric(value: &serde_json::Value, field: &str) -> Option<f64> {
    // dotted paths descend; bare names search the output first
    let root = value.get("output").unwrap_or(value);
    let mut current = root;
    for part in field.split('.') {
        current = current.get(part)?;
    }
    current
        .as_f64()
        .or_else(|| current.as_u64().map(|v| v as f64))
        .or_else(|| current.as_bool().map(|b| if b { 1.0 } else { 0.0 }))
        .or_else(|| {
            // retry from the record root for top-level fields
            let mut current = value;
            for part in field.split('.') {
                current = current.get(part)?;
            }
            current.as_f64()
        })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_source_parsing() {
        assert!(matches!(
            MatrixSource::parse("gaussian:2,4").unwrap(),
            MatrixSource::Gaussian { m: 2, n: 4 }
        ));
        assert!(matches!(
            MatrixSource::parse("rademacher:3,5").unwrap(),
            MatrixSource::Rademacher { m: 3, n: 5 }
        ));
        assert!(matches!(
            MatrixSource::parse("some/file.txt").unwrap(),
            MatrixSource::File { .. }
        ));
        assert!(MatrixSource::parse("gaussian:2").is_err());
        assert!(MatrixSource::parse("gaussian:0,4").is_err());
    }

    #[test]
    fn gen_is_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let out1 = dir.path().join("a1.txt");
        let out2 = dir.path().join("a2.txt");
        for out in [&out1, &out2] {
            run(&ExperimentConfig::Gen {
                spec: "gaussian:2,4".into(),
                seed: 7,
                out: out.to_string_lossy().into_owned(),
            })
            .unwrap();
        }
        assert_eq!(
            std::fs::read(&out1).unwrap(),
            std::fs::read(&out2).unwrap()
        );
    }

    #[test]
    fn plot_data_sorted_by_x() {
        let dir = tempfile::tempdir().unwrap();
        let mut records = Vec::new();
        for (i, seed) in [(0u64, 3u64), (1, 1)] {
            let out = dir.path().join(format!("m{i}.txt"));
            records.push(
                run(&ExperimentConfig::Gen {
                    spec: format!("gaussian:{},4", seed + 1),
                    seed,
                    out: out.to_string_lossy().into_owned(),
                })
                .unwrap(),
            );
        }
        let csv = emit_plot_data(&records, "rows", "cols").unwrap();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "rows,cols");
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("2e0"));

        assert!(matches!(
            emit_plot_data(&records, "rows", "nope"),
            Err(Error::FieldMissing(_))
        ));

        assert_eq!(emit_plot_data(&[], "a", "b").unwrap(), "a,b\n");
    }

    #[test]
    fn config_validation_rejects_missing_files() {
        let config = ExperimentConfig::Decode {
            matrix: "/definitely/not/here.txt".into(),
            signal: "/nor/this.txt".into(),
            boxed: false,
            tol: 1e-8,
        };
        assert!(matches!(config.validate(), Err(Error::Config(_))));
    }
}
