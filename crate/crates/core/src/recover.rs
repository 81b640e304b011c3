//! l1 decoding and recovery verification.
//!
//! Decoding solves `min ||x||_1 s.t. Ax = b` (optionally within the unit
//! box) as a split-variable LP. A decoded signal is judged by its signature:
//! the decode is sound for a ternary signal `u` when every decoded nonzero
//! sits inside the support of `u` with matching sign. The membership test
//! gives a sufficient condition for that in terms of an upper bound on the
//! nullspace ratio `S(A)`.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::certify::SensingMatrix;
use crate::conic::{solve_lp, LinearProgram, SolveStatus};
use crate::error::{Error, Result};
use crate::linalg::{l1_norm, linf_norm};

/// A signal with explicit support and sign pattern.
#[derive(Debug, Clone)]
pub struct SparseSignal {
    pub values: DVector<f64>,
    pub support: Vec<usize>,
    /// Signs on the support, aligned with `support`.
    pub signature: Vec<i8>,
}

impl SparseSignal {
    /// Entries within `1e-9 * max(1, ||u||_inf)` of zero are treated as zero.
    pub fn new(values: DVector<f64>) -> Self {
        let zero_tol = 1e-9 * linf_norm(&values).max(1.0);
        let support: Vec<usize> = (0..values.len())
            .filter(|&i| values[i].abs() > zero_tol)
            .collect();
        let signature = support
            .iter()
            .map(|&i| if values[i] > 0.0 { 1 } else { -1 })
            .collect();
        Self {
            values,
            support,
            signature,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.len() == 0
    }

    pub fn cardinality(&self) -> usize {
        self.support.len()
    }

    /// True when every entry is -1, 0 or +1 (exactly, up to 1e-12).
    pub fn is_ternary(&self) -> bool {
        self.values
            .iter()
            .all(|&v| (v - v.round()).abs() <= 1e-12 && v.round().abs() <= 1.0)
    }
}

/// Result of an l1 decode, with optional comparison against a known truth.
#[derive(Debug, Clone, Serialize)]
pub struct DecodeResult {
    pub x: Vec<f64>,
    /// l1 norm of the decoded signal (the LP objective).
    pub objective: f64,
    /// Whether the decoded signature is a subset of the truth's (when known).
    pub signature_subset_of_u: Option<bool>,
    /// Whether `||x - u||_inf <= 1e-6` (when the truth is known).
    pub exact_match: Option<bool>,
}

impl DecodeResult {
    fn new(x: DVector<f64>) -> Self {
        let objective = l1_norm(&x);
        Self {
            x: x.as_slice().to_vec(),
            objective,
            signature_subset_of_u: None,
            exact_match: None,
        }
    }

    pub fn vector(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.x)
    }

    /// Fill the truth-comparison fields.
    pub fn against_truth(mut self, u: &SparseSignal) -> Self {
        let x = self.vector();
        self.signature_subset_of_u = Some(check_signature(&x, u));
        self.exact_match = Some(linf_norm(&(&x - &u.values)) <= 1e-6);
        self
    }
}

fn check_measurement_consistency(a: &SensingMatrix, b: &DVector<f64>) -> Result<()> {
    if b.len() != a.rows() {
        return Err(Error::Dimension(format!(
            "measurement has {} entries for {} rows",
            b.len(),
            a.rows()
        )));
    }
    // least-squares residual tells whether b is in the range of A
    let norm_b = b.norm();
    if norm_b == 0.0 {
        return Ok(());
    }
    let svd = a.matrix().clone().svd(true, true);
    let x = svd
        .solve(b, 1e-12)
        .map_err(|e| Error::Numerical(format!("least squares failed: {e}")))?;
    let residual = (a.matrix() * x - b).norm();
    if residual > 1e-8 * norm_b {
        return Err(Error::Infeasible);
    }
    Ok(())
}

fn decode_lp(
    a: &SensingMatrix,
    b: &DVector<f64>,
    boxed: bool,
    tol: f64,
) -> Result<DecodeResult> {
    check_measurement_consistency(a, b)?;
    let n = a.cols();
    if b.norm() == 0.0 && !boxed {
        return Ok(DecodeResult::new(DVector::zeros(n)));
    }

    // x = p - q with p, q >= 0; box adds p <= 1, q <= 1
    let c = DVector::from_element(2 * n, 1.0);
    let mut eq = DMatrix::zeros(a.rows(), 2 * n);
    eq.view_mut((0, 0), (a.rows(), n)).copy_from(a.matrix());
    eq.view_mut((0, n), (a.rows(), n))
        .copy_from(&(-a.matrix()));
    let mut problem = LinearProgram::new(c).with_eq(eq, b.clone()).all_nonneg();
    if boxed {
        let g = DMatrix::identity(2 * n, 2 * n);
        let h = DVector::from_element(2 * n, 1.0);
        problem = problem.with_ineq(g, h);
    }
    let sol = solve_lp(&problem, tol)?;
    match sol.status {
        SolveStatus::Optimal => {}
        SolveStatus::Infeasible => return Err(Error::Infeasible),
        SolveStatus::MaxIters => return Err(Error::MaxIters(sol.iterations)),
        SolveStatus::Unbounded => {
            return Err(Error::Numerical("decode LP reported unbounded".into()))
        }
    }
    let split = sol.point.as_vector().expect("lp returns vector");
    let x = DVector::from_fn(n, |i, _| split[i] - split[n + i]);
    Ok(DecodeResult::new(x))
}

/// `min ||x||_1 s.t. Ax = b`. Fails with `Infeasible` when `b` is not in the
/// range of `A` (least-squares residual above `1e-8 ||b||`).
pub fn decode_l1(a: &SensingMatrix, b: &DVector<f64>, tol: f64) -> Result<DecodeResult> {
    decode_lp(a, b, false, tol)
}

/// `min ||x||_1 s.t. Ax = b, ||x||_inf <= 1`. Fails with `Infeasible` when
/// the box excludes every solution of `Ax = b`.
pub fn decode_l1_box(a: &SensingMatrix, b: &DVector<f64>, tol: f64) -> Result<DecodeResult> {
    decode_lp(a, b, true, tol)
}

/// Decode `A u` and compare against the truth `u`.
pub fn decode_signal(
    a: &SensingMatrix,
    u: &SparseSignal,
    boxed: bool,
    tol: f64,
) -> Result<DecodeResult> {
    let b = a.matrix() * &u.values;
    let result = if boxed {
        decode_l1_box(a, &b, tol)?
    } else {
        decode_l1(a, &b, tol)?
    };
    Ok(result.against_truth(u))
}

/// Signature-subset test: `u_i z_i >= |z_i| - 1e-9` for all `i`; in
/// particular `z` must vanish wherever `u` does.
pub fn check_signature(z: &DVector<f64>, u: &SparseSignal) -> bool {
    if z.len() != u.len() {
        return false;
    }
    (0..z.len()).all(|i| u.values[i] * z[i] >= z[i].abs() - 1e-9)
}

/// Which reading of the membership condition to apply.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MembershipMode {
    /// Strict inequality against 1, as displayed.
    PaperLiteral,
    /// Strict inequality against 1/2, the constant the argument needs.
    ProofSafe,
}

/// Sufficient condition for a ternary signal to be l1-recoverable given an
/// upper bound `s_upper >= S(A)`: `s_upper * ||u||_2` below the mode's
/// threshold. The zero signal is vacuously recoverable.
pub fn membership_u_sufficient(
    a: &SensingMatrix,
    u: &SparseSignal,
    s_upper: f64,
    mode: MembershipMode,
) -> Result<bool> {
    if u.len() != a.cols() {
        return Err(Error::Dimension(format!(
            "signal has {} entries for {} columns",
            u.len(),
            a.cols()
        )));
    }
    if !u.is_ternary() {
        return Err(Error::Domain(
            "membership test requires entries in {-1, 0, 1}".into(),
        ));
    }
    let norm2 = u.values.norm();
    if norm2 == 0.0 {
        return Ok(true);
    }
    let threshold = match mode {
        MembershipMode::PaperLiteral => 1.0,
        MembershipMode::ProofSafe => 0.5,
    };
    Ok(s_upper * norm2 < threshold)
}

/// l1 error of the best approximation of `u` by a vector with at most `s`
/// nonzeros: the sum of the `n - s` smallest magnitudes. Ties keep the lower
/// index.
pub fn best_k_term_error(u: &DVector<f64>, s: usize) -> f64 {
    let n = u.len();
    if s >= n {
        return 0.0;
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| u[j].abs().total_cmp(&u[i].abs()).then(i.cmp(&j)));
    order[s..].iter().map(|&i| u[i].abs()).sum()
}

/// Check the recovery guarantees implied by a threshold `S` with
/// `S(A) <= 1/sqrt(S)`: exact recovery when `Card(u) <= S/4`, and the
/// factor-4 bound against the best `floor(S/16)`-term approximation always.
pub fn verify_error_bound(a: &SensingMatrix, u: &DVector<f64>, s_threshold: f64) -> Result<bool> {
    let b = a.matrix() * u;
    let decoded = decode_l1(a, &b, 1e-8)?;
    let x = decoded.vector();
    let card = SparseSignal::new(u.clone()).cardinality();

    let exact_ok = if (card as f64) <= s_threshold / 4.0 {
        linf_norm(&(&x - u)) <= 1e-6
    } else {
        true
    };
    let k = (s_threshold / 16.0).floor().max(0.0) as usize;
    let bound_ok = l1_norm(&(u - &x)) <= 4.0 * best_k_term_error(u, k) + 1e-6;
    Ok(exact_ok && bound_ok)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn two_by_three() -> SensingMatrix {
        SensingMatrix::new(DMatrix::from_row_slice(
            2,
            3,
            &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0],
        ))
        .unwrap()
    }

    #[test]
    fn decode_recovers_unique_minimizer() {
        let a = two_by_three();
        let b = DVector::from_column_slice(&[1.0, 0.0]);
        let r = decode_l1(&a, &b, 1e-8).unwrap();
        assert_abs_diff_eq!(r.objective, 1.0, epsilon = 1e-6);
        let x = r.vector();
        assert_abs_diff_eq!(x[0], 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(x[1], 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(x[2], 0.0, epsilon = 1e-6);
    }

    #[test]
    fn decode_zero_measurement() {
        let a = two_by_three();
        let r = decode_l1(&a, &DVector::zeros(2), 1e-8).unwrap();
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn decode_degenerate_optimum_is_deterministic() {
        let a = SensingMatrix::new(DMatrix::from_row_slice(1, 2, &[1.0, 1.0])).unwrap();
        let b = DVector::from_column_slice(&[1.0]);
        let r1 = decode_l1(&a, &b, 1e-8).unwrap();
        let r2 = decode_l1(&a, &b, 1e-8).unwrap();
        assert_abs_diff_eq!(r1.objective, 1.0, epsilon = 1e-6);
        assert_eq!(r1.x, r2.x);
    }

    #[test]
    fn decode_rejects_out_of_range_measurement() {
        // rank-deficient measurements cannot happen with SensingMatrix, so
        // test with b outside the range of a full-rank tall matrix
        let a = SensingMatrix::new(DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 0.0, 0.0]))
            .unwrap();
        let b = DVector::from_column_slice(&[0.0, 0.0, 1.0]);
        assert!(matches!(decode_l1(&a, &b, 1e-8), Err(Error::Infeasible)));
    }

    #[test]
    fn box_decode_recovers_ternary_signal() {
        let a = two_by_three();
        let u = SparseSignal::new(DVector::from_column_slice(&[1.0, -1.0, 0.0]));
        let r = decode_signal(&a, &u, true, 1e-8).unwrap();
        assert_eq!(r.exact_match, Some(true));
        assert_eq!(r.signature_subset_of_u, Some(true));
    }

    #[test]
    fn box_decode_detects_infeasibility() {
        let a = two_by_three();
        // b = 3 * A e1: every solution x = (3,0,0) + t(1,1,-1) leaves the box
        let b = DVector::from_column_slice(&[3.0, 0.0]);
        assert!(matches!(decode_l1_box(&a, &b, 1e-8), Err(Error::Infeasible)));
    }

    #[test]
    fn box_decode_zero() {
        let a = two_by_three();
        let r = decode_l1_box(&a, &DVector::zeros(2), 1e-8).unwrap();
        assert!(r.objective <= 1e-7);
    }

    #[test]
    fn signature_examples() {
        let u = SparseSignal::new(DVector::from_column_slice(&[1.0, 0.0, 0.0]));
        let ok = DVector::from_column_slice(&[0.5, 0.0, 0.0]);
        let off_support = DVector::from_column_slice(&[0.5, 0.1, 0.0]);
        let wrong_sign = DVector::from_column_slice(&[-0.3, 0.0, 0.0]);
        assert!(check_signature(&ok, &u));
        assert!(!check_signature(&off_support, &u));
        assert!(!check_signature(&wrong_sign, &u));
    }

    #[test]
    fn membership_modes_differ() {
        let a = two_by_three();
        // S(A) = 1/sqrt(3) for this matrix
        let s_upper = 1.0 / 3.0f64.sqrt();
        let e1 = SparseSignal::new(DVector::from_column_slice(&[1.0, 0.0, 0.0]));
        assert!(membership_u_sufficient(&a, &e1, s_upper, MembershipMode::PaperLiteral).unwrap());
        assert!(!membership_u_sufficient(&a, &e1, s_upper, MembershipMode::ProofSafe).unwrap());

        let zero = SparseSignal::new(DVector::zeros(3));
        assert!(membership_u_sufficient(&a, &zero, s_upper, MembershipMode::PaperLiteral).unwrap());
        assert!(membership_u_sufficient(&a, &zero, s_upper, MembershipMode::ProofSafe).unwrap());

        let dense = SparseSignal::new(DVector::from_column_slice(&[1.0, 1.0, -1.0]));
        // s_upper * ||u||_2 = 2 fails both modes
        assert!(
            !membership_u_sufficient(&a, &dense, 2.0 / 3.0f64.sqrt(), MembershipMode::PaperLiteral)
                .unwrap()
        );

        let bad = SparseSignal::new(DVector::from_column_slice(&[0.5, 0.0, 0.0]));
        assert!(membership_u_sufficient(&a, &bad, 1.0, MembershipMode::PaperLiteral).is_err());
    }

    #[test]
    fn k_term_error_examples() {
        let u = DVector::from_column_slice(&[3.0, 1.0, -2.0]);
        assert_eq!(best_k_term_error(&u, 1), 3.0);
        assert_eq!(best_k_term_error(&u, 3), 0.0);
        let ones = DVector::from_column_slice(&[1.0, 1.0, 1.0, 1.0]);
        assert_eq!(best_k_term_error(&ones, 2), 2.0);
        assert_eq!(best_k_term_error(&ones, 0), 4.0);
    }

    #[test]
    fn k_term_error_monotone() {
        let u = DVector::from_column_slice(&[0.3, -2.0, 1.5, 0.0, 4.0]);
        let mut prev = f64::INFINITY;
        for s in 0..=5 {
            let e = best_k_term_error(&u, s);
            assert!(e <= prev);
            prev = e;
        }
        assert_eq!(best_k_term_error(&u, 0), l1_norm(&u));
    }

    #[test]
    fn error_bound_zero_signal() {
        let a = two_by_three();
        assert!(verify_error_bound(&a, &DVector::zeros(3), 1.0).unwrap());
    }
}
