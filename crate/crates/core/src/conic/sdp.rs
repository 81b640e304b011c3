//! Splitting solver for `max Tr(C X)` over an intersection of simple sets:
//! an affine subspace `Tr(A_i X) = b_i`, the PSD cone, the entrywise l1 ball
//! `||X||_1 <= r` and the unit-diagonal slice `diag(X) = 1`.
//!
//! The intersection has no standard conic form because of the entrywise l1
//! ball, so the solver runs consensus ADMM: one copy of the variable per set,
//! each update a Euclidean projection, plus a linear objective term in the
//! consensus step. All projections preserve symmetry exactly; the l1 ball is
//! handled by sorted soft-thresholding on the upper triangle with
//! off-diagonal entries weighted twice.

use nalgebra::DMatrix;

use crate::conic::{ConicSolution, PrimalPoint, SolveStatus, TraceRow};
use crate::error::{Error, Result};
use crate::linalg::{entrywise_l1, is_finite_matrix, project_psd};

/// Problem data. `objective` is symmetrized on entry; the solver maximizes.
#[derive(Debug, Clone)]
pub struct SplitSdp {
    pub objective: DMatrix<f64>,
    pub affine: Vec<(DMatrix<f64>, f64)>,
    pub l1_radius: Option<f64>,
    pub psd: bool,
    pub diag_one: bool,
}

impl SplitSdp {
    fn validate(&self) -> Result<usize> {
        let n = self.objective.nrows();
        if !self.objective.is_square() {
            return Err(Error::Dimension("objective must be square".into()));
        }
        if !is_finite_matrix(&self.objective) {
            return Err(Error::NonFinite("sdp objective"));
        }
        for (a, b) in &self.affine {
            if a.shape() != (n, n) {
                return Err(Error::Dimension(format!(
                    "affine constraint is {}x{}, expected {n}x{n}",
                    a.nrows(),
                    a.ncols()
                )));
            }
            if !is_finite_matrix(a) || !b.is_finite() {
                return Err(Error::NonFinite("sdp affine data"));
            }
        }
        if let Some(r) = self.l1_radius {
            if !(r > 0.0) {
                return Err(Error::Domain(format!("l1 radius must be positive, got {r}")));
            }
        }
        if !(self.psd || self.l1_radius.is_some() || self.diag_one || !self.affine.is_empty()) {
            return Err(Error::Domain("no constraint set active".into()));
        }
        if n > 128 {
            return Err(Error::TooLarge(format!(
                "sdp variable dimension {n} exceeds 128"
            )));
        }
        Ok(n)
    }
}

#[derive(Debug, Clone)]
pub struct SdpOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub rho: f64,
    /// Over-relaxation factor in [1, 2); 1.7 is a reliable default.
    pub over_relax: f64,
    /// Record a trace row every this many iterations (0 = no trace).
    pub trace_every: usize,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iters: 100_000,
            rho: 1.0,
            over_relax: 1.7,
            trace_every: 0,
        }
    }
}

pub fn solve_split_sdp(p: &SplitSdp, tol: f64, max_iters: usize) -> Result<ConicSolution> {
    solve_split_sdp_with(
        p,
        &SdpOptions {
            tol,
            max_iters,
            ..SdpOptions::default()
        },
    )
}

/// Projection onto the weighted l1 ball for the stacked upper triangle:
/// diagonal entries weigh 1, off-diagonal pairs weigh 2. Soft-thresholds in
/// place, preserving symmetry by construction.
fn project_l1_ball_sym(x: &DMatrix<f64>, radius: f64) -> DMatrix<f64> {
    let n = x.nrows();
    let mut entries: Vec<(f64, f64)> = Vec::with_capacity(n * (n + 1) / 2);
    let mut total = 0.0;
    for i in 0..n {
        for j in i..n {
            let w = if i == j { 1.0 } else { 2.0 };
            let v = 0.5 * (x[(i, j)] + x[(j, i)]);
            entries.push((v.abs(), w));
            total += w * v.abs();
        }
    }
    if total <= radius {
        return (x + x.transpose()).scale(0.5);
    }
    // Water-filling threshold t: sum_k w_k * max(|v_k| - t, 0) = radius.
    entries.sort_unstable_by(|a, b| b.0.total_cmp(&a.0));
    let mut cum_w = 0.0;
    let mut cum_wv = 0.0;
    let mut theta = 0.0;
    for (k, &(v, w)) in entries.iter().enumerate() {
        cum_w += w;
        cum_wv += w * v;
        let candidate = (cum_wv - radius) / cum_w;
        let next = entries.get(k + 1).map_or(0.0, |e| e.0);
        if candidate >= next {
            theta = candidate;
            break;
        }
    }
    let mut out = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = 0.5 * (x[(i, j)] + x[(j, i)]);
            let shrunk = v.signum() * (v.abs() - theta).max(0.0);
            out[(i, j)] = shrunk;
            out[(j, i)] = shrunk;
        }
    }
    out
}

/// Precomputed least-squares step onto `{X : Tr(A_i X) = b_i}`.
struct AffineProjector {
    constraints: Vec<(DMatrix<f64>, f64)>,
    gram_inv: DMatrix<f64>,
}

impl AffineProjector {
    fn new(affine: &[(DMatrix<f64>, f64)]) -> Result<Self> {
        let constraints: Vec<(DMatrix<f64>, f64)> = affine
            .iter()
            .map(|(a, b)| ((a + a.transpose()).scale(0.5), *b))
            .collect();
        let p = constraints.len();
        let mut gram = DMatrix::zeros(p, p);
        for i in 0..p {
            for j in 0..p {
                gram[(i, j)] = constraints[i].0.dot(&constraints[j].0);
            }
        }
        // pseudo-inverse tolerates redundant constraints
        let svd = gram.clone().svd(true, true);
        let gram_inv = svd
            .pseudo_inverse(1e-12)
            .map_err(|e| Error::Numerical(format!("affine gram inversion failed: {e}")))?;
        Ok(Self {
            constraints,
            gram_inv,
        })
    }

    fn project(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let p = self.constraints.len();
        let mut violation = nalgebra::DVector::zeros(p);
        for (i, (a, b)) in self.constraints.iter().enumerate() {
            violation[i] = a.dot(x) - b;
        }
        let lambda = &self.gram_inv * violation;
        let mut out = x.clone();
        for (i, (a, _)) in self.constraints.iter().enumerate() {
            out -= a.scale(lambda[i]);
        }
        out
    }
}

enum SetKind {
    L1(f64),
    Psd,
}

impl SetKind {
    fn project(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        match self {
            SetKind::L1(r) => Ok(project_l1_ball_sym(x, *r)),
            SetKind::Psd => project_psd(x),
        }
    }
}

/// The affine slice enforced exactly at every consensus step: the diag-one
/// rows (when active) and the user's trace constraints share one
/// least-squares projection, specialized for the common single cases.
enum AffineSlice {
    None,
    DiagOnly,
    General(AffineProjector),
}

impl AffineSlice {
    fn build(p: &SplitSdp, n: usize) -> Result<Self> {
        if p.affine.is_empty() && !p.diag_one {
            return Ok(AffineSlice::None);
        }
        if p.affine.is_empty() && p.diag_one {
            return Ok(AffineSlice::DiagOnly);
        }
        let mut constraints = p.affine.clone();
        if p.diag_one {
            for i in 0..n {
                let mut e = DMatrix::zeros(n, n);
                e[(i, i)] = 1.0;
                constraints.push((e, 1.0));
            }
        }
        Ok(AffineSlice::General(AffineProjector::new(&constraints)?))
    }

    fn project(&self, x: DMatrix<f64>) -> DMatrix<f64> {
        match self {
            AffineSlice::None => x,
            AffineSlice::DiagOnly => {
                let mut out = x;
                for i in 0..out.nrows() {
                    out[(i, i)] = 1.0;
                }
                out
            }
            AffineSlice::General(p) => p.project(&x),
        }
    }
}

pub fn solve_split_sdp_with(p: &SplitSdp, opts: &SdpOptions) -> Result<ConicSolution> {
    let n = p.validate()?;
    if !(opts.tol > 0.0) {
        return Err(Error::Domain("tolerance must be positive".into()));
    }
    let c_sym = (&p.objective + p.objective.transpose()).scale(0.5);

    let affine = AffineSlice::build(p, n)?;
    let mut sets: Vec<SetKind> = Vec::new();
    if let Some(r) = p.l1_radius {
        sets.push(SetKind::L1(r));
    }
    if p.psd {
        sets.push(SetKind::Psd);
    }
    if sets.is_empty() {
        return Err(Error::Domain(
            "splitting solver needs the PSD cone or an l1 ball active".into(),
        ));
    }
    let n_sets = sets.len();

    let x0 = if p.diag_one {
        DMatrix::identity(n, n)
    } else {
        DMatrix::zeros(n, n)
    };
    let mut x = x0.clone();
    let mut z: Vec<DMatrix<f64>> = vec![x0; n_sets];
    let mut u: Vec<DMatrix<f64>> = vec![DMatrix::zeros(n, n); n_sets];
    let mut rho = opts.rho;
    let alpha = opts.over_relax.clamp(1.0, 1.99);

    let mut trace = Vec::new();
    let mut status = SolveStatus::MaxIters;
    let mut primal_res = f64::INFINITY;
    let mut dual_res = f64::INFINITY;
    let mut iterations = 0usize;

    for k in 1..=opts.max_iters {
        iterations = k;
        // consensus step: average of (z_i - u_i) plus the objective pull,
        // then the exact affine correction
        x.fill(0.0);
        for i in 0..n_sets {
            x += &z[i];
            x -= &u[i];
        }
        x.unscale_mut(n_sets as f64);
        x += c_sym.scale(1.0 / (rho * n_sets as f64));
        x = affine.project(x);

        let mut primal_sq = 0.0;
        let mut dual_sq = 0.0;
        for i in 0..n_sets {
            // over-relaxed consensus point
            let x_hat = x.scale(alpha) + z[i].scale(1.0 - alpha);
            let target = &x_hat + &u[i];
            let z_new = sets[i].project(&target)?;
            dual_sq += (&z_new - &z[i]).norm_squared();
            u[i] += &x_hat - &z_new;
            primal_sq += (&x - &z_new).norm_squared();
            z[i] = z_new;
        }
        let scale = x.norm().max(1.0);
        primal_res = (primal_sq / n_sets as f64).sqrt() / scale;
        dual_res = rho * (dual_sq / n_sets as f64).sqrt() / scale;

        if !primal_res.is_finite() || !x.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("splitting iterate"));
        }
        if opts.trace_every > 0 && k % opts.trace_every == 0 {
            trace.push(TraceRow {
                iteration: k,
                primal_residual: primal_res,
                dual_residual: dual_res,
                objective: c_sym.dot(&x),
            });
        }
        if primal_res <= opts.tol && dual_res <= opts.tol {
            status = SolveStatus::Optimal;
            break;
        }
        // residual balancing keeps the two rates comparable
        if k % 50 == 0 {
            if primal_res > 5.0 * dual_res && rho < 1e6 {
                rho *= 2.0;
                for ui in &mut u {
                    ui.unscale_mut(2.0);
                }
            } else if dual_res > 5.0 * primal_res && rho > 1e-6 {
                rho /= 2.0;
                for ui in &mut u {
                    ui.scale_mut(2.0);
                }
            }
        }
    }

    let objective = c_sym.dot(&x);
    let rounded_objective = Some(round_to_feasible(p, &c_sym, &x)?);

    Ok(ConicSolution {
        status,
        objective,
        dual_objective: None,
        point: PrimalPoint::Matrix(x),
        primal_residual: primal_res,
        dual_residual: dual_res,
        rounded_objective,
        iterations,
        trace,
    })
}

/// Push the final iterate into the feasible set and evaluate the objective
/// there. For an l1 ball the iterate is rescaled into the ball and
/// re-projected onto the PSD cone once; for a unit diagonal the PSD-projected
/// iterate is symmetrically rescaled so its diagonal is exactly one.
fn round_to_feasible(p: &SplitSdp, c_sym: &DMatrix<f64>, x: &DMatrix<f64>) -> Result<f64> {
    let mut xr = (x + x.transpose()).scale(0.5);
    if let Some(r) = p.l1_radius {
        let norm = entrywise_l1(&xr);
        if norm > r {
            xr.scale_mut(r / norm);
        }
        if p.psd {
            xr = project_psd(&xr)?;
        }
        return Ok(c_sym.dot(&xr));
    }
    if p.diag_one {
        if p.psd {
            xr = project_psd(&xr)?;
        }
        let n = xr.nrows();
        let mut scale = nalgebra::DVector::zeros(n);
        for i in 0..n {
            scale[i] = 1.0 / xr[(i, i)].max(1e-12).sqrt();
        }
        for i in 0..n {
            for j in 0..n {
                xr[(i, j)] *= scale[i] * scale[j];
            }
        }
        return Ok(c_sym.dot(&xr));
    }
    if p.psd {
        xr = project_psd(&xr)?;
    }
    Ok(c_sym.dot(&xr))
}
