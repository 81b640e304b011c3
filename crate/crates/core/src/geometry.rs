//! Geometric estimators for the normed space `(R^d, ||Fy||_1)` attached to a
//! nullspace basis `F` (d = n - m columns).
//!
//! The section `{Ax = 0, ||x||_1 <= 1}` of the l1 ball is, up to isometry,
//! the unit ball `K` of `||Fy||_1`. How close `K` is to a Euclidean ball is
//! captured by the spherical mean `M(K)`, the maximum `b(K)` of the norm on
//! the sphere, the induced Dvoretzky dimension, and the dual mean `M(K*)`.
//! The dual mean feeds a high-probability bound on the diameter of random
//! sections of `K`, which converts back into a recovery threshold.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::conic::{solve_lp, solve_split_sdp_with, LinearProgram, SdpOptions, SplitSdp};
use crate::error::{Error, Result};
use crate::linalg::gaussian_vector;
use crate::rng::RngStream;

/// `E||g||_2` for a standard Gaussian in dimension `n`:
/// `sqrt(2) * Gamma((n+1)/2) / Gamma(n/2)`, the constant converting Gaussian
/// averages of homogeneous functions into spherical ones.
pub fn lambda_n(n: usize) -> f64 {
    let nf = n as f64;
    let ln = statrs::function::gamma::ln_gamma((nf + 1.0) / 2.0)
        - statrs::function::gamma::ln_gamma(nf / 2.0);
    2.0f64.sqrt() * ln.exp()
}

/// Closed-form spherical mean of `||Fy||_1`:
/// `sqrt(2/pi) * sum_i ||row_i(F)||_2 / lambda_d`.
pub fn m_l1_closed_form(f: &DMatrix<f64>) -> f64 {
    let d = f.ncols();
    let row_norm_sum: f64 = (0..f.nrows()).map(|i| f.row(i).norm()).sum();
    (2.0 / std::f64::consts::PI).sqrt() * row_norm_sum / lambda_n(d)
}

/// Monte-Carlo spherical mean of `||Fy||_1` over uniform sphere points
/// (normalized Gaussians). Returns (mean, standard error).
pub fn m_k_monte_carlo(f: &DMatrix<f64>, samples: usize, stream: &RngStream) -> Result<(f64, f64)> {
    if samples < 2 {
        return Err(Error::Domain("need at least two samples".into()));
    }
    let d = f.ncols();
    const CHUNK: usize = 1024;
    let chunks = samples.div_ceil(CHUNK);
    let stats: Vec<(f64, f64, usize)> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = stream.substream(chunk as u64).rng();
            let count = CHUNK.min(samples - chunk * CHUNK);
            let mut sum = 0.0;
            let mut sumsq = 0.0;
            for _ in 0..count {
                let g = gaussian_vector(d, &mut rng);
                let y = g.unscale(g.norm());
                let v: f64 = (f * y).iter().map(|x| x.abs()).sum();
                sum += v;
                sumsq += v * v;
            }
            (sum, sumsq, count)
        })
        .collect();
    let (sum, sumsq) = stats
        .iter()
        .fold((0.0, 0.0), |(s, q), &(cs, cq, _)| (s + cs, q + cq));
    let nf = samples as f64;
    let mean = sum / nf;
    let var = ((sumsq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    Ok((mean, (var / nf).sqrt()))
}

/// MAXCUT-type bounds on `b(K) = max {||Fx||_1 : ||x||_2 <= 1}`.
#[derive(Debug, Clone, Serialize)]
pub struct MaxcutBounds {
    /// `sqrt(2/pi * SDP(F))`, a lower bound on `b(K)`.
    pub lower: f64,
    /// `sqrt(SDP(F))`, an upper bound on `b(K)`.
    pub upper: f64,
    /// Relaxation value `SDP(F)`.
    pub sdp_value: f64,
    pub rounded_value: f64,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
}

/// Solve `max Tr(X F F^T)` over `diag(X) = 1, X >= 0` and convert the value
/// into two-sided bounds on the sphere maximum of `||Fx||_1`.
pub fn b_maxcut(f: &DMatrix<f64>, tol: f64) -> Result<MaxcutBounds> {
    let n = f.nrows();
    if n > 128 {
        return Err(Error::TooLarge(format!(
            "maxcut relaxation limited to 128 rows, got {n}"
        )));
    }
    let problem = SplitSdp {
        objective: f * f.transpose(),
        affine: vec![],
        l1_radius: None,
        psd: true,
        diag_one: true,
    };
    let sol = solve_split_sdp_with(
        &problem,
        &SdpOptions {
            tol,
            max_iters: 200_000,
            ..SdpOptions::default()
        },
    )?;
    let sdp_value = sol.objective;
    Ok(MaxcutBounds {
        lower: (2.0 / std::f64::consts::PI * sdp_value).max(0.0).sqrt(),
        upper: sdp_value.max(0.0).sqrt(),
        sdp_value,
        rounded_value: sol.rounded_objective.unwrap_or(sdp_value),
        iterations: sol.iterations,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
    })
}

/// Exact `b(K)` by enumerating sign vectors: `max_{u in {-1,1}^n} ||F^T u||_2`
/// (the norm maximum over the sphere equals the maximum over sign vectors by
/// convexity). Limited to n <= 14.
pub fn b_exact_bruteforce(f: &DMatrix<f64>) -> Result<f64> {
    let n = f.nrows();
    if n > 14 {
        return Err(Error::TooLarge(format!(
            "sign enumeration limited to 14 rows, got {n}"
        )));
    }
    let ft = f.transpose();
    let mut best = 0.0f64;
    let mut u = DVector::from_element(n, 1.0);
    // fix u[0] = +1: the objective is sign-symmetric
    for mask in 0..(1u64 << (n - 1)) {
        for i in 1..n {
            u[i] = if mask >> (i - 1) & 1 == 1 { -1.0 } else { 1.0 };
        }
        best = best.max((&ft * &u).norm());
    }
    Ok(best)
}

/// Dvoretzky dimension `c * n * (M / b)^2` of a normed space with spherical
/// mean `M` and sphere maximum `b` in ambient dimension `n`.
pub fn dvoretzky_dimension(m_k: f64, b_k: f64, n_ambient: usize, c: f64) -> Result<f64> {
    if !(b_k > 0.0) {
        return Err(Error::Domain(format!("b(K) must be positive, got {b_k}")));
    }
    if !(c > 0.0) {
        return Err(Error::Domain(format!("constant must be positive, got {c}")));
    }
    Ok(c * n_ambient as f64 * (m_k / b_k).powi(2))
}

/// Monte-Carlo estimate of the dual spherical mean `M(K*)` for
/// `K = {y : ||Fy||_1 <= 1}`: per Gaussian sample `g`, solve the Chebyshev
/// program `min ||Fg + x||_inf` over `F^T x = 0` and divide the Gaussian
/// average by `lambda_d`. Requires orthonormal columns. Returns
/// (mean, standard error).
pub fn mstar_estimate(
    f: &DMatrix<f64>,
    samples: usize,
    stream: &RngStream,
    tol: f64,
) -> Result<(f64, f64)> {
    if samples < 2 {
        return Err(Error::Domain("need at least two samples".into()));
    }
    let d = f.ncols();
    let gram_err = (f.transpose() * f - DMatrix::identity(d, d)).norm();
    if gram_err > 1e-8 {
        return Err(Error::Domain(format!(
            "dual mean estimate needs orthonormal columns: ||F^T F - I|| = {gram_err:.3e}"
        )));
    }

    let values: Vec<Result<f64>> = (0..samples)
        .into_par_iter()
        .map(|s| {
            let mut rng = stream.substream(s as u64).rng();
            let g = gaussian_vector(d, &mut rng);
            let fg = f * g;
            chebyshev_distance_to_nullspace(f, &fg, tol)
        })
        .collect();
    let mut sum = 0.0;
    let mut sumsq = 0.0;
    for v in values {
        let v = v?;
        sum += v;
        sumsq += v * v;
    }
    let nf = samples as f64;
    let mean = sum / nf;
    let var = ((sumsq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    // convert the Gaussian average to the spherical mean
    let lam = lambda_n(d);
    Ok((mean / lam, (var / nf).sqrt() / lam))
}

/// `min ||w + x||_inf` over `F^T x = 0`: variables (x, t) with
/// `-t <= w + x <= t`.
fn chebyshev_distance_to_nullspace(f: &DMatrix<f64>, w: &DVector<f64>, tol: f64) -> Result<f64> {
    let (n, d) = f.shape();
    // variables: x (free, n), t (nonneg, 1)
    let mut c = DVector::zeros(n + 1);
    c[n] = 1.0;
    let mut eq = DMatrix::zeros(d, n + 1);
    eq.view_mut((0, 0), (d, n)).copy_from(&f.transpose());
    let f_rhs = DVector::zeros(d);
    // w + x <= t  and  -(w + x) <= t
    let mut g = DMatrix::zeros(2 * n, n + 1);
    let mut h = DVector::zeros(2 * n);
    for i in 0..n {
        g[(i, i)] = 1.0;
        g[(i, n)] = -1.0;
        h[i] = -w[i];
        g[(n + i, i)] = -1.0;
        g[(n + i, n)] = -1.0;
        h[n + i] = w[i];
    }
    let mut nonneg = vec![false; n + 1];
    nonneg[n] = true;
    let p = LinearProgram::new(c)
        .with_eq(eq, f_rhs)
        .with_ineq(g, h)
        .with_nonneg(nonneg);
    let sol = solve_lp(&p, tol)?.require_optimal()?;
    Ok(sol.objective)
}

/// Sample count `ceil(c log(2/beta) / delta^2 + 1)` for estimating a
/// spherical mean to relative error `delta` with failure probability `beta`.
pub fn required_samples(delta: f64, beta: f64, c: f64) -> Result<u64> {
    if !(0.0 < delta && delta < 1.0) || !(0.0 < beta && beta < 1.0) {
        return Err(Error::Domain(format!(
            "delta and beta must lie in (0, 1), got {delta}, {beta}"
        )));
    }
    if !(c > 0.0) {
        return Err(Error::Domain("constant must be positive".into()));
    }
    Ok((c * (2.0 / beta).ln() / (delta * delta) + 1.0).ceil() as u64)
}

/// Diameter bound `c * sqrt(n/k) * M(K*)` for a random section of
/// codimension `k` in ambient dimension `n`.
pub fn low_mstar_diameter(n_ambient: usize, codim_k: usize, m_star: f64, c: f64) -> Result<f64> {
    if codim_k == 0 || codim_k > n_ambient {
        return Err(Error::Domain(format!(
            "codimension {codim_k} outside 1..={n_ambient}"
        )));
    }
    if !(c > 0.0) || m_star < 0.0 {
        return Err(Error::Domain("bad constant or dual mean".into()));
    }
    Ok(c * (n_ambient as f64 / codim_k as f64).sqrt() * m_star)
}

/// Diameter bound `c1 * sqrt(1 - lambda) / (M - sqrt(lambda))` for sections
/// of proportional codimension `lambda * n`, with the probability exponent
/// parameter `delta = (M^2 - lambda) / (1 - M^2)`. `M` is the normalized
/// mean `M(K) / b(K)`.
pub fn low_m_diameter(m_normalized: f64, lambda: f64, c1: f64) -> Result<(f64, f64)> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::Domain(format!("lambda {lambda} outside [0, 1)")));
    }
    if m_normalized <= lambda.sqrt() + 1e-9 {
        return Err(Error::Domain(format!(
            "normalized mean {m_normalized} must exceed sqrt(lambda) = {}",
            lambda.sqrt()
        )));
    }
    if m_normalized >= 1.0 {
        return Err(Error::Domain(format!(
            "normalized mean {m_normalized} must be below 1"
        )));
    }
    if !(c1 > 0.0) {
        return Err(Error::Domain("constant must be positive".into()));
    }
    let diam = c1 * (1.0 - lambda).sqrt() / (m_normalized - lambda.sqrt());
    let delta = (m_normalized * m_normalized - lambda) / (1.0 - m_normalized * m_normalized);
    Ok((diam, delta))
}

/// Recovery threshold from a diameter bound: `S >= 1 / diam^2`.
pub fn s_from_diameter(diam: f64) -> Result<f64> {
    if !(diam > 0.0) {
        return Err(Error::Domain(format!(
            "diameter must be positive, got {diam}"
        )));
    }
    Ok(1.0 / (diam * diam))
}

/// Unknown absolute constants, all defaulting to one and echoed in reports.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct GeometryConstants {
    pub c: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl Default for GeometryConstants {
    fn default() -> Self {
        Self {
            c: 1.0,
            c1: 1.0,
            c2: 1.0,
            c3: 1.0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GeometryOptions {
    pub samples: usize,
    /// Samples for the dual mean (one LP each); defaults to
    /// `min(samples, 2000)`.
    pub mstar_samples: Option<usize>,
    pub stream: RngStream,
    /// Codimension for the dual-mean diameter bound; defaults to half the
    /// nullspace dimension.
    pub codim: Option<usize>,
    pub constants: GeometryConstants,
    pub tol: f64,
}

/// Estimates for the normed space attached to a nullspace basis.
#[derive(Debug, Clone, Serialize)]
pub struct GeometryReport {
    #[serde(rename = "M_K")]
    pub m_k: f64,
    #[serde(rename = "M_K_monte_carlo")]
    pub m_k_mc: f64,
    #[serde(rename = "M_K_stderr")]
    pub m_k_stderr: f64,
    #[serde(rename = "b_K_sdp")]
    pub b_k_sdp: f64,
    #[serde(rename = "b_K_lower")]
    pub b_k_lower: f64,
    pub dvoretzky_k: f64,
    #[serde(rename = "M_star")]
    pub m_star: f64,
    #[serde(rename = "M_star_stderr")]
    pub m_star_stderr: f64,
    /// Codimension at which the diameter bound is evaluated.
    pub codim_k: usize,
    pub diameter_bound: f64,
    #[serde(rename = "S_from_diameter")]
    pub s_from_diameter: f64,
    pub constants_used: GeometryConstants,
}

/// Run every estimator against the nullspace basis of a sensing matrix.
pub fn geometry_report(
    a: &crate::certify::SensingMatrix,
    opts: &GeometryOptions,
) -> Result<GeometryReport> {
    let basis = a.nullspace().ok_or_else(|| {
        Error::Domain("geometry report needs a nontrivial nullspace".into())
    })?;
    let f = &basis.f;
    let d = basis.dim();

    let m_k = m_l1_closed_form(f);
    let (m_k_mc, m_k_stderr) = m_k_monte_carlo(f, opts.samples, &opts.stream)?;
    let maxcut = b_maxcut(f, opts.tol.max(1e-7))?;
    let dvoretzky_k = dvoretzky_dimension(m_k, maxcut.upper, d, opts.constants.c)?;
    let mstar_samples = opts.mstar_samples.unwrap_or(opts.samples.min(2000)).max(2);
    let (m_star, m_star_stderr) = mstar_estimate(
        f,
        mstar_samples,
        &opts.stream.substream(u64::MAX),
        1e-8,
    )?;
    let codim_k = opts.codim.unwrap_or_else(|| d.div_ceil(2)).clamp(1, d);
    let diameter_bound = low_mstar_diameter(d, codim_k, m_star, opts.constants.c)?;
    let s_bound = s_from_diameter(diameter_bound)?;

    Ok(GeometryReport {
        m_k,
        m_k_mc,
        m_k_stderr,
        b_k_sdp: maxcut.upper,
        b_k_lower: maxcut.lower,
        dvoretzky_k,
        m_star,
        m_star_stderr,
        codim_k,
        diameter_bound,
        s_from_diameter: s_bound,
        constants_used: opts.constants,
    })
}
