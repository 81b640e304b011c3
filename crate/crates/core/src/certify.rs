//! Bounds on the nullspace norm ratio `S(A) = max {||x||_2 / ||x||_1 : Ax = 0}`
//! and the recovery cardinalities they certify.
//!
//! `S(A)` is the radius of the section of the l1 ball cut by the nullspace.
//! Three tractable bounds sandwich it:
//!
//! * `alpha1(A) = max ||x||_inf / ||x||_1` over the nullspace — a lower bound
//!   computed exactly by 2n small LPs;
//! * `SDP(A)` — a semidefinite relaxation with `S(A)^2 <= SDP(A) <= alpha1(A)`;
//! * `LP(A)` — the linear relaxation of `SDP(A)` obtained by dropping the PSD
//!   cone.
//!
//! For tiny instances the exact value comes from enumerating the vertices of
//! the section polytope. A certificate never overstates: the recovery side
//! uses the SDP estimate padded by its residuals, intersected with `alpha1`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::conic::{
    solve_lp, solve_split_sdp_with, LinearProgram, SdpOptions, SolveStatus, SplitSdp,
};
use crate::error::{Error, Result};
use crate::linalg::{self, NullspaceBasis};

/// A sensing matrix with its numerical rank and nullspace basis cached.
#[derive(Debug, Clone)]
pub struct SensingMatrix {
    a: DMatrix<f64>,
    rank: usize,
    nullspace: Option<NullspaceBasis>,
}

impl SensingMatrix {
    /// Requires full rank: `rank = min(m, n)`. A square or tall full-rank
    /// matrix is accepted and carries a trivial nullspace.
    pub fn new(a: DMatrix<f64>) -> Result<Self> {
        if !linalg::is_finite_matrix(&a) {
            return Err(Error::NonFinite("sensing matrix"));
        }
        let (m, n) = a.shape();
        let rank = linalg::numerical_rank(&a)?;
        if rank < m.min(n) {
            return Err(Error::RankDeficient {
                rank,
                expected: m.min(n),
            });
        }
        let nullspace = if m < n {
            Some(linalg::nullspace_basis(&a)?)
        } else {
            None
        };
        Ok(Self { a, rank, nullspace })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    /// Nullspace basis, absent when the nullspace is `{0}`.
    pub fn nullspace(&self) -> Option<&NullspaceBasis> {
        self.nullspace.as_ref()
    }

    pub fn has_trivial_nullspace(&self) -> bool {
        self.nullspace.is_none()
    }
}

/// `max ||x||_inf / ||x||_1` over the nullspace: the maximum over
/// `i = 1..n` and both signs of `x_i` subject to `Ax = 0, ||x||_1 <= 1`,
/// each a split-variable LP. Zero for a trivial nullspace.
pub fn alpha1(a: &SensingMatrix, tol: f64) -> Result<f64> {
    if a.has_trivial_nullspace() {
        return Ok(0.0);
    }
    let (m, n) = a.matrix().shape();

    // shared constraint blocks: A(p - q) = 0, sum(p + q) <= 1, p,q >= 0
    let mut eq = DMatrix::zeros(m, 2 * n);
    eq.view_mut((0, 0), (m, n)).copy_from(a.matrix());
    eq.view_mut((0, n), (m, n)).copy_from(&(-a.matrix()));
    let f = DVector::zeros(m);
    let g = DMatrix::from_element(1, 2 * n, 1.0);
    let h = DVector::from_element(1, 1.0);

    let objectives: Vec<(usize, f64)> = (0..n).flat_map(|i| [(i, 1.0), (i, -1.0)]).collect();
    let values: Vec<Result<f64>> = objectives
        .par_iter()
        .map(|&(i, sign)| {
            let mut c = DVector::zeros(2 * n);
            c[i] = -sign;
            c[n + i] = sign;
            let p = LinearProgram::new(c)
                .with_eq(eq.clone(), f.clone())
                .with_ineq(g.clone(), h.clone())
                .all_nonneg();
            let sol = solve_lp(&p, tol)?.require_optimal()?;
            Ok(-sol.objective)
        })
        .collect();

    let mut best = 0.0f64;
    for v in values {
        best = best.max(v?);
    }
    Ok(best)
}

/// Outcome of the semidefinite relaxation solve.
#[derive(Debug, Clone, Serialize)]
pub struct SdpBound {
    /// Relaxation value at the (near-feasible) final iterate.
    pub estimate: f64,
    /// Objective after rounding the iterate into the feasible set; a lower
    /// bound direction for the relaxation value.
    pub rounded: f64,
    /// Estimate padded by residual slack; safe to use where an upper bound
    /// on the relaxation value is required.
    pub upper_guard: f64,
    pub status: SolveStatus,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
}

impl SdpBound {
    fn trivial() -> Self {
        Self {
            estimate: 0.0,
            rounded: 0.0,
            upper_guard: 0.0,
            status: SolveStatus::Optimal,
            primal_residual: 0.0,
            dual_residual: 0.0,
            iterations: 0,
        }
    }
}

/// Options controlling the relaxation solves inside [`certificate`].
#[derive(Debug, Clone)]
pub struct CertifyOptions {
    /// LP feasibility/optimality tolerance.
    pub tol: f64,
    /// Splitting-solver residual tolerance.
    pub sdp_tol: f64,
    pub sdp_max_iters: usize,
    /// Also run the exact vertex enumeration (small instances only).
    pub exact: bool,
    /// Compute the linear relaxation as well (quadratic in n; skipped above
    /// n = 64 regardless).
    pub lp: bool,
    /// Record the SDP residual trace every this many iterations.
    pub trace_every: usize,
}

impl Default for CertifyOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            sdp_tol: 1e-5,
            sdp_max_iters: 100_000,
            exact: false,
            lp: true,
            trace_every: 0,
        }
    }
}

/// Semidefinite relaxation of `S(A)^2`: maximize `Tr X` over
/// `Tr(A^T A X) = 0`, `||X||_1 <= 1`, `X >= 0` (PSD).
pub fn sdp_bound(a: &SensingMatrix, tol: f64) -> Result<SdpBound> {
    sdp_bound_with(
        a,
        &CertifyOptions {
            sdp_tol: tol,
            ..CertifyOptions::default()
        },
    )
    .map(|(bound, _)| bound)
}

pub fn sdp_bound_with(
    a: &SensingMatrix,
    opts: &CertifyOptions,
) -> Result<(SdpBound, Vec<crate::conic::TraceRow>)> {
    if a.has_trivial_nullspace() {
        return Ok((SdpBound::trivial(), Vec::new()));
    }
    let n = a.cols();
    let gram = a.matrix().transpose() * a.matrix();
    let scale = gram.norm().max(1.0);
    let problem = SplitSdp {
        objective: DMatrix::identity(n, n),
        affine: vec![(gram.unscale(scale), 0.0)],
        l1_radius: Some(1.0),
        psd: true,
        diag_one: false,
    };
    let sol = solve_split_sdp_with(
        &problem,
        &SdpOptions {
            tol: opts.sdp_tol,
            max_iters: opts.sdp_max_iters,
            trace_every: opts.trace_every,
            ..SdpOptions::default()
        },
    )?;
    let rounded = sol.rounded_objective.unwrap_or(sol.objective);
    let slack = 10.0 * (sol.primal_residual + sol.dual_residual) * sol.objective.abs().max(1.0);
    let bound = SdpBound {
        estimate: sol.objective,
        rounded,
        upper_guard: sol.objective.max(rounded) + slack + opts.sdp_tol,
        status: sol.status,
        primal_residual: sol.primal_residual,
        dual_residual: sol.dual_residual,
        iterations: sol.iterations,
    };
    Ok((bound, sol.trace))
}

/// Linear relaxation of the SDP: maximize `Tr X` over `A X = 0`,
/// `||X||_1 <= 1` with `X = P - Q`, `P, Q >= 0` entrywise.
pub fn lp_bound(a: &SensingMatrix, tol: f64) -> Result<f64> {
    if a.has_trivial_nullspace() {
        return Ok(0.0);
    }
    let (m, n) = a.matrix().shape();
    if n > 64 {
        return Err(Error::TooLarge(format!(
            "lp relaxation has {} variables for n = {n}; limit is n <= 64",
            2 * n * n
        )));
    }
    // variables vec(P), vec(Q) stacked column-major
    let nn = n * n;
    let mut c = DVector::zeros(2 * nn);
    for j in 0..n {
        c[j * n + j] = -1.0;
        c[nn + j * n + j] = 1.0;
    }
    let mut eq = DMatrix::zeros(m * n, 2 * nn);
    for col in 0..n {
        for r in 0..m {
            for i in 0..n {
                let v = a.matrix()[(r, i)];
                eq[(col * m + r, col * n + i)] = v;
                eq[(col * m + r, nn + col * n + i)] = -v;
            }
        }
    }
    let f = DVector::zeros(m * n);
    let g = DMatrix::from_element(1, 2 * nn, 1.0);
    let h = DVector::from_element(1, 1.0);
    let p = LinearProgram::new(c)
        .with_eq(eq, f)
        .with_ineq(g, h)
        .all_nonneg();
    let sol = solve_lp(&p, tol)?.require_optimal()?;
    Ok(-sol.objective)
}

/// Exact `S(A)` by enumerating the vertices of `{Ax = 0, ||x||_1 <= 1}`.
///
/// A vertex is supported on a column set `T` whose submatrix has a
/// one-dimensional nullspace; the maximum of the convex function `||x||_2`
/// over the polytope is attained at one of them. All supports of size up to
/// `m + 1` are enumerated, which also covers matrices in non-generic
/// position.
pub fn s_exact_bruteforce(a: &SensingMatrix) -> Result<f64> {
    let (m, n) = a.matrix().shape();
    if n > 14 || m > 7 {
        return Err(Error::TooLarge(format!(
            "vertex enumeration limited to n <= 14, m <= 7 (got {m}x{n})"
        )));
    }
    if a.has_trivial_nullspace() {
        return Ok(0.0);
    }
    let max_support = (m + 1).min(n);
    let mut best = 0.0f64;
    let mut support = Vec::with_capacity(max_support);
    enumerate_supports(n, max_support, 0, &mut support, &mut |t: &[usize]| {
        if let Some(ratio) = vertex_ratio(a.matrix(), t) {
            best = best.max(ratio);
        }
    });
    Ok(best)
}

fn enumerate_supports(
    n: usize,
    max_size: usize,
    start: usize,
    current: &mut Vec<usize>,
    visit: &mut impl FnMut(&[usize]),
) {
    if !current.is_empty() {
        visit(current);
    }
    if current.len() == max_size {
        return;
    }
    for i in start..n {
        current.push(i);
        enumerate_supports(n, max_size, i + 1, current, visit);
        current.pop();
    }
}

/// `||x||_2 / ||x||_1` for the vertex supported on `t`, when the column
/// submatrix has a one-dimensional nullspace.
fn vertex_ratio(a: &DMatrix<f64>, t: &[usize]) -> Option<f64> {
    let k = t.len();
    let sub = a.select_columns(t.iter());
    let gram = sub.transpose() * &sub;
    let eig = nalgebra::SymmetricEigen::new(gram);
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |mx, &l| mx.max(l));
    if lmax == 0.0 {
        // all-zero columns: a vertex only if the support is a single column
        return (k == 1).then_some(1.0);
    }
    let tol = 1e-12 * lmax;
    let null_idx: Vec<usize> = (0..k).filter(|&i| eig.eigenvalues[i] <= tol).collect();
    if null_idx.len() != 1 {
        // dimension >= 2: any vertex inside this face has a smaller support
        // that is enumerated separately
        return None;
    }
    let v = eig.eigenvectors.column(null_idx[0]);
    let l2 = v.norm();
    let l1: f64 = v.iter().map(|x| x.abs()).sum();
    Some(l2 / l1)
}

/// Largest cardinality certified for exact l1 recovery by an upper bound
/// `s_upper` on `S(A)`: `floor((1 / s_upper^2) / 4)`.
pub fn certified_cardinality(s_upper: f64) -> u64 {
    if !(s_upper > 0.0) {
        return 0;
    }
    let quarter = 1.0 / (s_upper * s_upper) / 4.0;
    // absorb representation noise when the quarter lands on an integer
    let nearest = quarter.round();
    let value = if (quarter - nearest).abs() <= 1e-9 * nearest.max(1.0) {
        nearest
    } else {
        quarter.floor()
    };
    value.min(u64::MAX as f64) as u64
}

/// Upper bound `2 / ((1 - delta) sqrt(k*))` on `S(A)`, valid when `A` has
/// the restricted isometry property of order `3 k*` with constant <= `delta`.
/// The RIP constant itself is the caller's responsibility.
pub fn rip_ratio_bound(delta: f64, k_star: usize) -> Result<f64> {
    if !(0.0..1.0).contains(&delta) {
        return Err(Error::Domain(format!(
            "rip constant must lie in [0, 1), got {delta}"
        )));
    }
    if k_star == 0 {
        return Err(Error::Domain("rip order must be at least 1".into()));
    }
    Ok(2.0 / ((1.0 - delta) * (k_star as f64).sqrt()))
}

/// Solver diagnostics attached to a certificate.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateDiagnostics {
    pub trivial_nullspace: bool,
    pub lp_tol: f64,
    pub sdp: Option<SdpBound>,
    /// Why the LP relaxation value is absent, when it is.
    pub lp_skipped: Option<String>,
    pub s_upper_source: String,
}

/// All bounds on `S(A)` plus the certified recovery quantities.
#[derive(Debug, Clone, Serialize)]
pub struct CertificateReport {
    pub alpha1: f64,
    /// Semidefinite relaxation estimate of `S(A)^2`.
    pub sdp: f64,
    /// Linear relaxation value (absent above the size limit).
    pub lp: Option<f64>,
    pub s_lower: f64,
    pub s_upper: f64,
    pub s_exact: Option<f64>,
    /// Recovery threshold `1 / s_upper^2` (absent for a trivial nullspace).
    #[serde(rename = "recovery_S")]
    pub recovery_s: Option<f64>,
    pub certified_cardinality: u64,
    pub diagnostics: CertificateDiagnostics,
}

/// Sandwich consistency: `alpha1 <= sqrt(sdp) + tol`, `sqrt(sdp) <=
/// sqrt(alpha1) + tol`, and the exact value (when present) between the two.
pub fn sandwich_check(report: &CertificateReport, tol: f64) -> bool {
    let root_sdp = report.sdp.max(0.0).sqrt();
    let root_alpha = report.alpha1.max(0.0).sqrt();
    let mut ok = report.alpha1 <= root_sdp + tol && root_sdp <= root_alpha + tol;
    if let Some(s) = report.s_exact {
        ok = ok && report.alpha1 - tol <= s && s <= root_sdp + tol;
    }
    ok
}

/// Compute every bound and assemble the certificate.
pub fn certificate(a: &SensingMatrix, opts: &CertifyOptions) -> Result<CertificateReport> {
    if a.has_trivial_nullspace() {
        return Ok(CertificateReport {
            alpha1: 0.0,
            sdp: 0.0,
            lp: Some(0.0),
            s_lower: 0.0,
            s_upper: 0.0,
            s_exact: opts.exact.then_some(0.0),
            recovery_s: None,
            certified_cardinality: 0,
            diagnostics: CertificateDiagnostics {
                trivial_nullspace: true,
                lp_tol: opts.tol,
                sdp: None,
                lp_skipped: None,
                s_upper_source: "trivial nullspace".into(),
            },
        });
    }

    let alpha = alpha1(a, opts.tol)?;
    let (sdp, _) = sdp_bound_with(a, opts)?;
    let lp = if opts.lp {
        match lp_bound(a, opts.tol) {
            Ok(v) => (Some(v), None),
            Err(Error::TooLarge(msg)) => (None, Some(msg)),
            Err(e) => return Err(e),
        }
    } else {
        (None, Some("disabled".to_string()))
    };
    let s_exact = if opts.exact {
        Some(s_exact_bruteforce(a)?)
    } else {
        None
    };

    // Both sdp and alpha1 upper-bound S(A)^2; take the safer (guarded) sdp
    // value so an under-converged solve cannot inflate the certificate.
    let alpha_guard = alpha + 10.0 * opts.tol;
    let (squared_upper, source) = if sdp.upper_guard <= alpha_guard {
        (sdp.upper_guard, "sdp".to_string())
    } else {
        (alpha_guard, "alpha1".to_string())
    };
    let s_upper = squared_upper.max(0.0).sqrt();
    let recovery_s = if s_upper > 0.0 {
        Some(1.0 / (s_upper * s_upper))
    } else {
        None
    };

    Ok(CertificateReport {
        alpha1: alpha,
        sdp: sdp.estimate,
        lp: lp.0,
        s_lower: alpha,
        s_upper,
        s_exact,
        recovery_s,
        certified_cardinality: certified_cardinality(s_upper),
        diagnostics: CertificateDiagnostics {
            trivial_nullspace: false,
            lp_tol: opts.tol,
            sdp: Some(sdp),
            lp_skipped: lp.1,
            s_upper_source: source,
        },
    })
}
