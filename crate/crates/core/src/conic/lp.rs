//! Dense linear programming by a homogeneous self-dual interior point method
//! (Mehrotra predictor-corrector on the HSD embedding).
//!
//! The embedding detects infeasibility and unboundedness through the tau /
//! kappa variables instead of requiring a feasible start. Problems are stated
//! over free or sign-constrained variables with equality and inequality
//! blocks and converted to standard form internally; the objective is
//! normalized by its max-abs entry so rescaling the objective rescales the
//! reported optimum without perturbing the iterate path.

use nalgebra::{DMatrix, DVector};

use crate::conic::{ConicSolution, PrimalPoint, SolveStatus};
use crate::error::{Error, Result};

/// A linear program `min c^T x` subject to `E x = f`, `G x <= h`.
///
/// Variables marked in `nonneg` carry an `x_i >= 0` bound; all others are
/// free. An empty `nonneg` means every variable is free.
#[derive(Debug, Clone)]
pub struct LinearProgram {
    pub c: DVector<f64>,
    pub eq: Option<(DMatrix<f64>, DVector<f64>)>,
    pub ineq: Option<(DMatrix<f64>, DVector<f64>)>,
    pub nonneg: Vec<bool>,
}

impl LinearProgram {
    pub fn new(c: DVector<f64>) -> Self {
        Self {
            c,
            eq: None,
            ineq: None,
            nonneg: Vec::new(),
        }
    }

    pub fn with_eq(mut self, e: DMatrix<f64>, f: DVector<f64>) -> Self {
        self.eq = Some((e, f));
        self
    }

    pub fn with_ineq(mut self, g: DMatrix<f64>, h: DVector<f64>) -> Self {
        self.ineq = Some((g, h));
        self
    }

    pub fn with_nonneg(mut self, nonneg: Vec<bool>) -> Self {
        self.nonneg = nonneg;
        self
    }

    pub fn all_nonneg(mut self) -> Self {
        self.nonneg = vec![true; self.c.len()];
        self
    }

    fn validate(&self) -> Result<()> {
        let n = self.c.len();
        if !self.c.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("objective"));
        }
        if !self.nonneg.is_empty() && self.nonneg.len() != n {
            return Err(Error::Dimension(format!(
                "nonneg mask has {} entries for {} variables",
                self.nonneg.len(),
                n
            )));
        }
        for (name, block) in [("equality", &self.eq), ("inequality", &self.ineq)] {
            if let Some((mat, rhs)) = block {
                if mat.ncols() != n || mat.nrows() != rhs.len() {
                    return Err(Error::Dimension(format!(
                        "{name} block is {}x{} with rhs of length {}",
                        mat.nrows(),
                        mat.ncols(),
                        rhs.len()
                    )));
                }
                if !mat.iter().all(|x| x.is_finite()) || !rhs.iter().all(|x| x.is_finite()) {
                    return Err(Error::NonFinite("constraint data"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct LpOptions {
    pub tol: f64,
    pub max_iters: usize,
    pub step_scale: f64,
}

impl Default for LpOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 50_000,
            step_scale: 0.99995,
        }
    }
}

/// Solve with the given feasibility/optimality tolerance and default limits.
pub fn solve_lp(problem: &LinearProgram, tol: f64) -> Result<ConicSolution> {
    solve_lp_with(
        problem,
        &LpOptions {
            tol,
            ..LpOptions::default()
        },
    )
}

/// Standard-form data `min c^T x, A x = b, x >= 0` plus the recipe to map the
/// solution back to the caller's variables.
struct StandardForm {
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
    /// for each original variable: column of its positive part, and column of
    /// its negative part when the variable is free
    var_map: Vec<(usize, Option<usize>)>,
}

fn to_standard(p: &LinearProgram) -> StandardForm {
    let n = p.c.len();
    let me = p.eq.as_ref().map_or(0, |(e, _)| e.nrows());
    let mi = p.ineq.as_ref().map_or(0, |(g, _)| g.nrows());
    let nonneg = |i: usize| !p.nonneg.is_empty() && p.nonneg[i];

    let mut var_map = Vec::with_capacity(n);
    let mut col = 0usize;
    for i in 0..n {
        if nonneg(i) {
            var_map.push((col, None));
            col += 1;
        } else {
            var_map.push((col, Some(col + 1)));
            col += 2;
        }
    }
    let n_std = col + mi;

    let mut a = DMatrix::zeros(me + mi, n_std);
    let mut b = DVector::zeros(me + mi);
    let mut c = DVector::zeros(n_std);
    for i in 0..n {
        let (pos, neg) = var_map[i];
        c[pos] = p.c[i];
        if let Some(negc) = neg {
            c[negc] = -p.c[i];
        }
    }
    if let Some((e, f)) = &p.eq {
        for r in 0..me {
            for i in 0..n {
                let v = e[(r, i)];
                if v != 0.0 {
                    let (pos, neg) = var_map[i];
                    a[(r, pos)] = v;
                    if let Some(negc) = neg {
                        a[(r, negc)] = -v;
                    }
                }
            }
            b[r] = f[r];
        }
    }
    if let Some((g, h)) = &p.ineq {
        for r in 0..mi {
            for i in 0..n {
                let v = g[(r, i)];
                if v != 0.0 {
                    let (pos, neg) = var_map[i];
                    a[(me + r, pos)] = v;
                    if let Some(negc) = neg {
                        a[(me + r, negc)] = -v;
                    }
                }
            }
            a[(me + r, col + r)] = 1.0; // slack
            b[me + r] = h[r];
        }
    }
    StandardForm { a, b, c, var_map }
}

pub fn solve_lp_with(problem: &LinearProgram, opts: &LpOptions) -> Result<ConicSolution> {
    problem.validate()?;
    let std_form = to_standard(problem);

    // Normalize the objective so its scale does not steer the path.
    let c_scale = std_form
        .c
        .iter()
        .fold(0.0f64, |m, &v| m.max(v.abs()))
        .max(f64::MIN_POSITIVE);
    let c_scale = if c_scale > f64::MIN_POSITIVE { c_scale } else { 1.0 };
    let c_hat = std_form.c.unscale(c_scale);

    let raw = hsd_solve(&std_form.a, &std_form.b, &c_hat, opts)?;

    // Map back to the caller's variables.
    let n = problem.c.len();
    let mut x = DVector::zeros(n);
    for i in 0..n {
        let (pos, neg) = std_form.var_map[i];
        x[i] = raw.x[pos] - neg.map_or(0.0, |j| raw.x[j]);
    }
    let objective = problem.c.dot(&x);
    let primal_residual = {
        let mut worst = 0.0f64;
        if let Some((e, f)) = &problem.eq {
            let r = e * &x - f;
            worst = worst.max(r.amax() / (1.0 + f.amax()));
        }
        if let Some((g, h)) = &problem.ineq {
            let r = g * &x - h;
            let viol = r.iter().fold(0.0f64, |m, &v| m.max(v));
            worst = worst.max(viol / (1.0 + h.amax()));
        }
        worst
    };

    Ok(ConicSolution {
        status: raw.status,
        objective,
        dual_objective: Some(raw.dual_objective * c_scale),
        point: PrimalPoint::Vector(x),
        primal_residual,
        dual_residual: raw.dual_residual,
        rounded_objective: None,
        iterations: raw.iterations,
        trace: Vec::new(),
    })
}

struct HsdOutcome {
    status: SolveStatus,
    x: DVector<f64>,
    dual_objective: f64,
    dual_residual: f64,
    iterations: usize,
}

/// Mehrotra predictor-corrector on the homogeneous self-dual embedding of
/// `min c^T x, A x = b, x >= 0`.
fn hsd_solve(
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    c: &DVector<f64>,
    opts: &LpOptions,
) -> Result<HsdOutcome> {
    let (m, n) = a.shape();
    let mut x = DVector::from_element(n, 1.0);
    let mut y = DVector::zeros(m);
    let mut z = DVector::from_element(n, 1.0);
    let mut tau = 1.0f64;
    let mut kappa = 1.0f64;

    let resid = |x: &DVector<f64>, y: &DVector<f64>, z: &DVector<f64>, tau: f64, kappa: f64| {
        let r_p = b.scale(tau) - a * x;
        let r_d = c.scale(tau) - a.transpose() * y - z;
        let r_g = kappa + c.dot(x) - b.dot(y);
        let mu = (x.dot(z) + tau * kappa) / (n as f64 + 1.0);
        (r_p, r_d, r_g, mu)
    };

    let (r_p0, r_d0, r_g0, mu0) = resid(&x, &y, &z, tau, kappa);
    let norm_p0 = r_p0.norm().max(1.0);
    let norm_d0 = r_d0.norm().max(1.0);
    let norm_g0 = r_g0.abs().max(1.0);

    let mut iterations = 0usize;
    let tol = opts.tol;
    while iterations < opts.max_iters {
        iterations += 1;

        let (r_p, r_d, r_g, mu) = resid(&x, &y, &z, tau, kappa);

        // Normal-equation matrix M = A D A^T with D = diag(x / z).
        let d_inv: DVector<f64> = x.component_div(&z);
        let ad = {
            let mut ad = a.clone();
            for j in 0..n {
                let mut col = ad.column_mut(j);
                col *= d_inv[j];
            }
            ad
        };
        let m_mat = &ad * a.transpose();
        let chol = factor_with_ridge(&m_mat)?;

        // Shared solve helper: given r1 (length n) and r2 (length m), return
        // (u, v) with M v = r2 + A D r1, u = D (A^T v - r1).
        let sym_solve = |r1: &DVector<f64>, r2: &DVector<f64>| -> Result<(DVector<f64>, DVector<f64>)> {
            let rhs = r2 + a * r1.component_mul(&d_inv);
            let v = chol
                .solve(&rhs)
                .ok_or_else(|| Error::Numerical("normal equation solve failed".into()))?;
            let u = (a.transpose() * &v - r1).component_mul(&d_inv);
            Ok((u, v))
        };

        let solve_direction = |eta: f64,
                               rhat_xs: &DVector<f64>,
                               rhat_tk: f64|
         -> Result<(DVector<f64>, DVector<f64>, DVector<f64>, f64, f64)> {
            let (p, q) = sym_solve(c, b)?;
            let r1 = r_d.scale(eta) - rhat_xs.component_div(&x);
            let r2 = r_p.scale(eta);
            let (u, v) = sym_solve(&r1, &r2)?;
            let denom = kappa / tau + (-c.dot(&p) + b.dot(&q));
            let num = r_g * eta + rhat_tk / tau - (-c.dot(&u) + b.dot(&v));
            let d_tau = num / denom;
            let d_x = &u + p.scale(d_tau);
            let d_y = &v + q.scale(d_tau);
            let d_z = (rhat_xs - z.component_mul(&d_x)).component_div(&x);
            let d_kappa = (rhat_tk - kappa * d_tau) / tau;
            Ok((d_x, d_y, d_z, d_tau, d_kappa))
        };

        // Predictor (affine scaling) step.
        let rhat_xs_aff = -x.component_mul(&z);
        let rhat_tk_aff = -tau * kappa;
        let (dx_a, _dy_a, dz_a, dtau_a, dkappa_a) =
            solve_direction(1.0, &rhat_xs_aff, rhat_tk_aff)?;
        let alpha_aff = step_length(&x, &dx_a, &z, &dz_a, tau, dtau_a, kappa, dkappa_a, 1.0);

        // Centering parameter from the predictor progress.
        let gamma = {
            let g = (1.0 - alpha_aff).powi(2) * (1.0 - alpha_aff).min(0.1);
            g.clamp(0.0, 1.0)
        };
        let eta = 1.0 - gamma;

        // Corrector step.
        let rhat_xs = x
            .component_mul(&z)
            .map(|v| -v)
            .add_scalar(gamma * mu)
            - dx_a.component_mul(&dz_a);
        let rhat_tk = gamma * mu - tau * kappa - dtau_a * dkappa_a;
        let (d_x, d_y, d_z, d_tau, d_kappa) = solve_direction(eta, &rhat_xs, rhat_tk)?;

        let alpha = step_length(
            &x,
            &d_x,
            &z,
            &d_z,
            tau,
            d_tau,
            kappa,
            d_kappa,
            opts.step_scale,
        );
        x += d_x.scale(alpha);
        y += d_y.scale(alpha);
        z += d_z.scale(alpha);
        tau += alpha * d_tau;
        kappa += alpha * d_kappa;

        if !(x.iter().all(|v| v.is_finite()) && tau.is_finite() && kappa.is_finite()) {
            return Err(Error::NonFinite("interior point iterate"));
        }

        // Convergence / infeasibility indicators.
        let (r_p, r_d, r_g, mu) = resid(&x, &y, &z, tau, kappa);
        let rho_p = r_p.norm() / norm_p0;
        let rho_d = r_d.norm() / norm_d0;
        let rho_g = r_g.abs() / norm_g0;
        let rho_mu = mu / mu0;
        let bty = b.dot(&y);
        let rho_a = (c.dot(&x) - bty).abs() / (tau + bty.abs());

        if rho_p < tol && rho_d < tol && rho_a < tol {
            let xs = x.unscale(tau);
            let dual_obj = bty / tau;
            let dual_res = (c - a.transpose() * y.unscale(tau) - z.unscale(tau))
                .amax()
                / (1.0 + c.amax());
            return Ok(HsdOutcome {
                status: SolveStatus::Optimal,
                x: xs,
                dual_objective: dual_obj,
                dual_residual: dual_res,
                iterations,
            });
        }
        let tau_small = tau < tol * kappa.max(1.0);
        let inf1 = rho_p < tol && rho_d < tol && rho_g < tol && tau_small;
        let inf2 = rho_mu < tol && tau < tol * kappa.min(1.0);
        if inf1 || inf2 {
            let status = if bty > tol {
                SolveStatus::Infeasible
            } else {
                SolveStatus::Unbounded
            };
            return Ok(HsdOutcome {
                status,
                x: DVector::zeros(n),
                dual_objective: 0.0,
                dual_residual: f64::INFINITY,
                iterations,
            });
        }
    }

    let xs = x.unscale(tau.max(f64::MIN_POSITIVE));
    Ok(HsdOutcome {
        status: SolveStatus::MaxIters,
        x: xs,
        dual_objective: b.dot(&y) / tau.max(f64::MIN_POSITIVE),
        dual_residual: f64::INFINITY,
        iterations,
    })
}

/// Largest step in (0, 1] keeping all barrier variables positive, scaled.
#[allow(clippy::too_many_arguments)]
fn step_length(
    x: &DVector<f64>,
    dx: &DVector<f64>,
    z: &DVector<f64>,
    dz: &DVector<f64>,
    tau: f64,
    dtau: f64,
    kappa: f64,
    dkappa: f64,
    scale: f64,
) -> f64 {
    let mut alpha = 1.0f64;
    let limit = |alpha: f64, v: f64, dv: f64| {
        if dv < 0.0 {
            alpha.min(-v / dv)
        } else {
            alpha
        }
    };
    for i in 0..x.len() {
        alpha = limit(alpha, x[i], dx[i]);
        alpha = limit(alpha, z[i], dz[i]);
    }
    alpha = limit(alpha, tau, dtau);
    alpha = limit(alpha, kappa, dkappa);
    (alpha * scale).min(1.0)
}

enum Factor {
    Chol(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    Lu(nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>),
}

impl Factor {
    fn solve(&self, rhs: &DVector<f64>) -> Option<DVector<f64>> {
        match self {
            Factor::Chol(c) => Some(c.solve(rhs)),
            Factor::Lu(lu) => lu.solve(rhs),
        }
    }
}

/// Cholesky with an escalating diagonal ridge; falls back to LU.
fn factor_with_ridge(m: &DMatrix<f64>) -> Result<Factor> {
    let scale = m.diagonal().amax().max(1.0);
    let mut ridge = 0.0f64;
    for _ in 0..7 {
        let candidate = if ridge == 0.0 {
            m.clone()
        } else {
            let mut shifted = m.clone();
            for i in 0..m.nrows() {
                shifted[(i, i)] += ridge * scale;
            }
            shifted
        };
        if let Some(chol) = nalgebra::Cholesky::new(candidate) {
            return Ok(Factor::Chol(chol));
        }
        ridge = if ridge == 0.0 { 1e-14 } else { ridge * 100.0 };
    }
    let lu = nalgebra::LU::new(m.clone());
    if lu.is_invertible() {
        return Ok(Factor::Lu(lu));
    }
    Err(Error::Numerical(
        "normal equations could not be factorized".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn one_active_constraint() {
        // min x s.t. x >= 1  <=>  -x <= -1
        let p = LinearProgram::new(DVector::from_column_slice(&[1.0]))
            .with_ineq(
                DMatrix::from_row_slice(1, 1, &[-1.0]),
                DVector::from_column_slice(&[-1.0]),
            );
        let sol = solve_lp(&p, 1e-8).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(sol.objective, 1.0, epsilon = 1e-6);
        match &sol.point {
            PrimalPoint::Vector(x) => assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-6),
            _ => panic!("expected vector point"),
        }
    }

    #[test]
    fn l1_minimization_by_splitting() {
        // min ||x||_1 s.t. x1 + x3 = 1, x2 + x3 = 0, via x = p - q.
        let n = 3;
        let mut c = DVector::zeros(2 * n);
        c.fill(1.0);
        let mut e = DMatrix::zeros(2, 2 * n);
        // x1 + x3 = 1
        e[(0, 0)] = 1.0;
        e[(0, 2)] = 1.0;
        e[(0, 3)] = -1.0;
        e[(0, 5)] = -1.0;
        // x2 + x3 = 0
        e[(1, 1)] = 1.0;
        e[(1, 2)] = 1.0;
        e[(1, 4)] = -1.0;
        e[(1, 5)] = -1.0;
        let f = DVector::from_column_slice(&[1.0, 0.0]);
        let p = LinearProgram::new(c).with_eq(e, f).all_nonneg();
        let sol = solve_lp(&p, 1e-8).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(sol.objective, 1.0, epsilon = 1e-6);
        let x = match &sol.point {
            PrimalPoint::Vector(x) => x.clone(),
            _ => panic!(),
        };
        assert_abs_diff_eq!(x[0] - x[3], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(x[1] - x[4], 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(x[2] - x[5], 0.0, epsilon = 1e-6);
    }

    #[test]
    fn contradictory_equalities_are_infeasible() {
        let p = LinearProgram::new(DVector::zeros(1)).with_eq(
            DMatrix::from_row_slice(2, 1, &[1.0, 1.0]),
            DVector::from_column_slice(&[1.0, 2.0]),
        );
        let sol = solve_lp(&p, 1e-8).unwrap();
        assert_eq!(sol.status, SolveStatus::Infeasible);
    }

    #[test]
    fn mixed_constraints_nonneg() {
        // min -x1 + 4 x2 s.t. x1 + x2 = 1, -3x1 + x2 <= 6, x1 + 2x2 <= 4, x >= 0
        let p = LinearProgram::new(DVector::from_column_slice(&[-1.0, 4.0]))
            .with_eq(
                DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
                DVector::from_column_slice(&[1.0]),
            )
            .with_ineq(
                DMatrix::from_row_slice(2, 2, &[-3.0, 1.0, 1.0, 2.0]),
                DVector::from_column_slice(&[6.0, 4.0]),
            )
            .all_nonneg();
        let sol = solve_lp(&p, 1e-8).unwrap();
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert_abs_diff_eq!(sol.objective, -1.0, epsilon = 1e-6);
        let x = sol.point.as_vector().unwrap();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(x[1], 0.0, epsilon = 1e-6);
    }

    #[test]
    fn unbounded_is_detected() {
        // min -x over x free with only a lower bound: unbounded above
        let p = LinearProgram::new(DVector::from_column_slice(&[-1.0])).with_ineq(
            DMatrix::from_row_slice(1, 1, &[-1.0]),
            DVector::from_column_slice(&[0.0]),
        );
        let sol = solve_lp(&p, 1e-8).unwrap();
        assert_eq!(sol.status, SolveStatus::Unbounded);
    }

    #[test]
    fn duality_gap_on_random_feasible_lps() {
        use crate::linalg::gaussian_matrix;
        use crate::rng::RngStream;
        let stream = RngStream::new(3, 30);
        for trial in 0..20 {
            let sub = stream.substream(trial);
            let m = 3 + (trial as usize % 4);
            let n = 8 + (trial as usize % 23);
            let a = gaussian_matrix(m, n, &sub).unwrap();
            let x0 = gaussian_matrix(n, 1, &sub.substream(1)).unwrap().abs();
            let b = &a * DVector::from_column_slice(x0.as_slice());
            let c = gaussian_matrix(n, 1, &sub.substream(2)).unwrap();
            // box 0 <= x <= 10 keeps it bounded; x0 entries are |N(0,1)| < 10 a.s.
            let g = DMatrix::identity(n, n);
            let h = DVector::from_element(n, 10.0);
            let p = LinearProgram::new(DVector::from_column_slice(c.as_slice()))
                .with_eq(a, b)
                .with_ineq(g, h)
                .all_nonneg();
            let sol = solve_lp(&p, 1e-9).unwrap();
            assert_eq!(sol.status, SolveStatus::Optimal, "trial {trial}");
            let gap = (sol.objective - sol.dual_objective.unwrap()).abs();
            assert!(
                gap <= 1e-6 * (1.0 + sol.objective.abs()),
                "trial {trial}: gap {gap}"
            );
        }
    }

    #[test]
    fn objective_scaling_covariance() {
        // scaling c by a power of two scales the reported objective exactly
        let base = LinearProgram::new(DVector::from_column_slice(&[3.0, 1.0]))
            .with_eq(
                DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
                DVector::from_column_slice(&[1.0]),
            )
            .all_nonneg();
        let sol1 = solve_lp(&base, 1e-8).unwrap();
        for s in [4.0f64, 0.25, 1024.0] {
            let scaled = LinearProgram::new(base.c.scale(s))
                .with_eq(base.eq.clone().unwrap().0, base.eq.clone().unwrap().1)
                .all_nonneg();
            let sol_s = solve_lp(&scaled, 1e-8).unwrap();
            assert_eq!(sol_s.objective, s * sol1.objective, "s = {s}");
            assert_eq!(sol_s.iterations, sol1.iterations);
        }
    }
}
