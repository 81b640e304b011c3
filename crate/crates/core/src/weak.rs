//! Probabilistic recovery for random ternary signals.
//!
//! Signals are i.i.d. with `P(u_i = -1) = P(u_i = +1) = k/2n`, zero
//! otherwise, so `k` is the expected cardinality. An upper bound `S_A` on
//! the nullspace ratio yields an expectation bound `M(A) <= (1 + xi) S_A
//! E||u||_2`, a Gaussian-type tail bound on the recovery condition at level
//! `xi`, and a sufficient condition on `S_A` under which non-recovery has
//! probability at most `4 exp(-beta^2)`. Monte-Carlo decoding validates the
//! bounds empirically.

use rayon::prelude::*;
use serde::Serialize;

use crate::certify::SensingMatrix;
use crate::error::{Error, Result};
use crate::recover::{decode_l1, check_signature, SparseSignal};
use crate::rng::RngStream;

/// Ternary signal distribution with expected cardinality `k` out of `n`.
#[derive(Debug, Clone, Copy)]
pub struct SignalModel {
    pub n: usize,
    pub k: f64,
}

impl SignalModel {
    pub fn new(n: usize, k: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("signal length must be positive".into()));
        }
        if !(0.0..=n as f64).contains(&k) {
            return Err(Error::Domain(format!(
                "expected cardinality {k} outside [0, {n}]"
            )));
        }
        Ok(Self { n, k })
    }

    fn p_nonzero(&self) -> f64 {
        self.k / self.n as f64
    }
}

/// Draw one signal from the model.
pub fn sample_signal(model: &SignalModel, stream: &RngStream) -> SparseSignal {
    use rand::Rng;
    let mut rng = stream.rng();
    let half_p = 0.5 * model.p_nonzero();
    let values = nalgebra::DVector::from_iterator(
        model.n,
        (0..model.n).map(|_| {
            let r: f64 = rng.random();
            if r < half_p {
                -1.0
            } else if r < 2.0 * half_p {
                1.0
            } else {
                0.0
            }
        }),
    );
    SparseSignal::new(values)
}

fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

/// Exact `E||u||_2 = sum_j sqrt(j) P(Card = j)` with `Card ~ Bin(n, k/n)`,
/// evaluated through log binomial weights for stability.
pub fn expected_norm(model: &SignalModel) -> f64 {
    let n = model.n;
    let p = model.p_nonzero();
    if p == 0.0 {
        return 0.0;
    }
    if p == 1.0 {
        return (n as f64).sqrt();
    }
    let ln_p = p.ln();
    let ln_q = (1.0 - p).ln();
    let ln_fact_n = ln_gamma(n as f64 + 1.0);
    (1..=n)
        .map(|j| {
            let jf = j as f64;
            let ln_pmf = ln_fact_n - ln_gamma(jf + 1.0) - ln_gamma((n - j) as f64 + 1.0)
                + jf * ln_p
                + (n - j) as f64 * ln_q;
            jf.sqrt() * ln_pmf.exp()
        })
        .sum()
}

/// Expectation bound `(1 + xi) * S_A * E||u||_2`.
pub fn m_bound(s_a: f64, xi: f64, e_norm: f64) -> Result<f64> {
    if !(0.0 < xi && xi < 1.0) {
        return Err(Error::Domain(format!("xi must lie in (0, 1), got {xi}")));
    }
    if s_a < 0.0 || e_norm < 0.0 {
        return Err(Error::Domain("S_A and E||u||_2 must be nonnegative".into()));
    }
    Ok((1.0 + xi) * s_a * e_norm)
}

/// Tail bound `4 exp(-(xi - M_A)^2 / (4 (1 + xi)^2 S_A^2))`, clamped to
/// `[0, 4]`. Requires `M_A <= xi`.
pub fn tail_bound(s_a: f64, xi: f64, m_a: f64) -> Result<f64> {
    if m_a > xi {
        return Err(Error::Domain(format!(
            "tail bound needs M_A <= xi ({m_a} > {xi})"
        )));
    }
    if s_a <= 0.0 {
        return Ok(0.0);
    }
    let gap = xi - m_a;
    let denom = 4.0 * (1.0 + xi).powi(2) * s_a * s_a;
    Ok((4.0 * (-gap * gap / denom).exp()).clamp(0.0, 4.0))
}

/// Recovery condition `S_A < 1 / (E||u||_2 + 2 beta + 4 sqrt(pi))` and the
/// associated failure probability `4 exp(-beta^2)` (reported verbatim even
/// when vacuous).
pub fn recovery_condition(s_a: f64, e_norm: f64, beta: f64) -> (bool, f64) {
    let threshold = 1.0 / (e_norm + 2.0 * beta + 4.0 * std::f64::consts::PI.sqrt());
    let failure_probability = 4.0 * (-beta * beta).exp();
    (s_a < threshold, failure_probability)
}

/// Expectation/tail bounds for one matrix-model pair.
#[derive(Debug, Clone, Serialize)]
pub struct WeakBoundReport {
    #[serde(rename = "S_A")]
    pub s_a: f64,
    #[serde(rename = "E_norm")]
    pub e_norm: f64,
    /// Tail level minimizing the bound over the grid 0.01..0.99.
    pub xi: f64,
    #[serde(rename = "M_A_bound")]
    pub m_a_bound: f64,
    pub tail_probability: f64,
    pub condition_holds: bool,
    pub beta: f64,
    pub failure_probability: f64,
    /// True when no tail level below one exists (bound carries no content).
    pub vacuous: bool,
}

/// Evaluate the bounds at the best tail level on a 0.01-spaced grid,
/// keeping only levels with `M_A <= xi`.
pub fn weak_report(s_a: f64, model: &SignalModel, beta: f64) -> Result<WeakBoundReport> {
    if !(beta > 0.0) {
        return Err(Error::Domain(format!("beta must be positive, got {beta}")));
    }
    let e_norm = expected_norm(model);
    let mut best: Option<(f64, f64, f64)> = None; // (tail, xi, m)
    for i in 1..=99 {
        let xi = i as f64 / 100.0;
        let m = m_bound(s_a, xi, e_norm)?;
        if m <= xi {
            let tail = tail_bound(s_a, xi, m)?;
            if best.map_or(true, |(t, _, _)| tail < t) {
                best = Some((tail, xi, m));
            }
        }
    }
    let (tail_probability, xi, m_a_bound) = best.unwrap_or_else(|| {
        let xi = 0.99;
        (4.0, xi, (1.0 + xi) * s_a * e_norm)
    });
    let (condition_holds, failure_probability) = recovery_condition(s_a, e_norm, beta);
    Ok(WeakBoundReport {
        s_a,
        e_norm,
        xi,
        m_a_bound,
        tail_probability,
        condition_holds,
        beta,
        failure_probability,
        vacuous: tail_probability >= 1.0,
    })
}

/// Empirical failure rate with its 95% Wilson interval.
#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloRate {
    pub trials: usize,
    pub failures: usize,
    pub rate: f64,
    pub wilson_low: f64,
    pub wilson_high: f64,
    pub wilson_halfwidth: f64,
}

/// 95% Wilson score interval for a binomial proportion.
pub fn wilson_interval(failures: usize, trials: usize) -> (f64, f64, f64) {
    let z = 1.959963984540054_f64;
    let n = trials as f64;
    let p = failures as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0), (center + half).min(1.0), half)
}

/// Sample `trials` signals, decode each, and count signature violations.
/// Trials run on independent substreams so the result does not depend on
/// scheduling order.
pub fn monte_carlo_membership_rate(
    a: &SensingMatrix,
    model: &SignalModel,
    trials: usize,
    stream: &RngStream,
    tol: f64,
) -> Result<MonteCarloRate> {
    if trials == 0 {
        return Err(Error::Domain("at least one trial is required".into()));
    }
    if model.n != a.cols() {
        return Err(Error::Dimension(format!(
            "model length {} does not match {} columns",
            model.n,
            a.cols()
        )));
    }
    let outcomes: Vec<Result<bool>> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let u = sample_signal(model, &stream.substream(t as u64));
            if u.cardinality() == 0 {
                return Ok(false);
            }
            let b = a.matrix() * &u.values;
            let decoded = decode_l1(a, &b, tol)?;
            Ok(!check_signature(&decoded.vector(), &u))
        })
        .collect();
    let mut failures = 0usize;
    for o in outcomes {
        if o? {
            failures += 1;
        }
    }
    let rate = failures as f64 / trials as f64;
    let (wilson_low, wilson_high, wilson_halfwidth) = wilson_interval(failures, trials);
    Ok(MonteCarloRate {
        trials,
        failures,
        rate,
        wilson_low,
        wilson_high,
        wilson_halfwidth,
    })
}
