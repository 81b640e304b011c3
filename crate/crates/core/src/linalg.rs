//! Dense real linear algebra substrate: nullspace bases, PSD projection,
//! symmetric eigendecompositions and seeded random matrices.
//!
//! Matrices are `nalgebra::DMatrix<f64>` throughout; this module only adds
//! the contracts the rest of the crate relies on (rank tolerances, sign
//! normalization, reproducible sampling).

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::rng::RngStream;

/// Relative singular-value threshold used for numerical rank decisions.
pub const RANK_TOL: f64 = 1e-10;

pub fn is_finite_matrix(a: &DMatrix<f64>) -> bool {
    a.iter().all(|x| x.is_finite())
}

/// Sum of absolute entries (the entrywise l1 norm of a matrix).
pub fn entrywise_l1(a: &DMatrix<f64>) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

pub fn l1_norm(v: &DVector<f64>) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub fn linf_norm(v: &DVector<f64>) -> f64 {
    v.iter().fold(0.0, |acc, x| acc.max(x.abs()))
}

/// Eigendecomposition of the symmetrized input, pairs sorted by descending
/// eigenvalue.
pub fn sym_eigen(a: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    if !a.is_square() {
        return Err(Error::Dimension(format!(
            "symmetric eigendecomposition needs a square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    if !is_finite_matrix(a) {
        return Err(Error::NonFinite("symmetric eigendecomposition input"));
    }
    let sym = (a + a.transpose()).scale(0.5);
    let eig = nalgebra::SymmetricEigen::new(sym);
    let n = eig.eigenvalues.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

/// Nearest (Frobenius) positive semidefinite matrix: negative eigenvalues of
/// the symmetrized input are clipped to zero.
pub fn project_psd(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let (values, vectors) = sym_eigen(a)?;
    let clipped = DVector::from_iterator(values.len(), values.iter().map(|&l| l.max(0.0)));
    let out = &vectors * DMatrix::from_diagonal(&clipped) * vectors.transpose();
    Ok((&out + out.transpose()).scale(0.5))
}

/// Numerical rank with threshold `RANK_TOL * sigma_max`.
pub fn numerical_rank(a: &DMatrix<f64>) -> Result<usize> {
    if !is_finite_matrix(a) {
        return Err(Error::NonFinite("rank input"));
    }
    let svd = a.clone().svd(false, false);
    let sigma_max = svd.singular_values.iter().fold(0.0f64, |m, &s| m.max(s));
    if sigma_max == 0.0 {
        return Ok(0);
    }
    Ok(svd
        .singular_values
        .iter()
        .filter(|&&s| s > RANK_TOL * sigma_max)
        .count())
}

/// Orthonormal basis of the nullspace of a full-row-rank wide matrix.
#[derive(Debug, Clone)]
pub struct NullspaceBasis {
    /// (rows, cols) of the parent matrix.
    pub parent_dims: (usize, usize),
    /// n x (n - m) matrix with orthonormal columns spanning the nullspace.
    pub f: DMatrix<f64>,
}

impl NullspaceBasis {
    /// Dimension of the nullspace.
    pub fn dim(&self) -> usize {
        self.f.ncols()
    }

    /// Ambient dimension n.
    pub fn ambient(&self) -> usize {
        self.f.nrows()
    }

    /// Wrap an explicitly orthonormal matrix (used for reference bodies such
    /// as the identity). Fails unless `f^T f = I` within `1e-10`.
    pub fn from_orthonormal(f: DMatrix<f64>) -> Result<Self> {
        let d = f.ncols();
        let gram_err = (f.transpose() * &f - DMatrix::identity(d, d)).norm();
        if gram_err > 1e-10 {
            return Err(Error::Domain(format!(
                "columns are not orthonormal: ||F^T F - I|| = {gram_err:.3e}"
            )));
        }
        let parent_dims = (f.nrows() - d, f.nrows());
        Ok(Self { parent_dims, f })
    }
}

/// Orthonormal nullspace basis of `a`, columns sign-normalized so the first
/// entry above `1e-9` in magnitude is nonnegative.
///
/// Rank is decided from the singular values of `a`; the basis itself comes
/// from the eigenvectors of the projector `I - V_r V_r^T` onto the orthogonal
/// complement of the row space, which keeps the columns orthonormal to
/// machine precision.
pub fn nullspace_basis(a: &DMatrix<f64>) -> Result<NullspaceBasis> {
    let (m, n) = a.shape();
    if !is_finite_matrix(a) {
        return Err(Error::NonFinite("nullspace input"));
    }
    if m >= n {
        return Err(Error::NotUnderdetermined { rows: m, cols: n });
    }
    let svd = a.clone().svd(false, true);
    let v_t = svd.v_t.as_ref().expect("svd requested v_t");
    let sigma_max = svd.singular_values.iter().fold(0.0f64, |mx, &s| mx.max(s));
    let rank = if sigma_max == 0.0 {
        0
    } else {
        svd.singular_values
            .iter()
            .filter(|&&s| s > RANK_TOL * sigma_max)
            .count()
    };
    if rank < m {
        return Err(Error::RankDeficient { rank, expected: m });
    }

    // Projector onto the orthogonal complement of the row space.
    let rows = v_t.rows(0, rank);
    let projector = DMatrix::identity(n, n) - rows.transpose() * rows;
    let (values, vectors) = sym_eigen(&projector)?;
    let dim = n - rank;
    let mut f = DMatrix::zeros(n, dim);
    for j in 0..dim {
        // eigenvalues are sorted descending: the leading `dim` are ~1
        debug_assert!(values[j] > 0.5);
        f.set_column(j, &vectors.column(j));
    }
    for j in 0..dim {
        if let Some(i) = (0..n).find(|&i| f[(i, j)].abs() > 1e-9) {
            if f[(i, j)] < 0.0 {
                for i in 0..n {
                    f[(i, j)] = -f[(i, j)];
                }
            }
        }
    }

    let basis = NullspaceBasis {
        parent_dims: (m, n),
        f,
    };
    let residual = (a * &basis.f).norm();
    let gram_err = (basis.f.transpose() * &basis.f - DMatrix::identity(dim, dim)).norm();
    if residual > RANK_TOL * a.norm().max(1.0) || gram_err > 1e-10 {
        return Err(Error::Numerical(format!(
            "nullspace basis out of tolerance: ||AF|| = {residual:.3e}, ||F^T F - I|| = {gram_err:.3e}"
        )));
    }
    Ok(basis)
}

/// m x n matrix with i.i.d. standard normal entries, filled row by row.
pub fn gaussian_matrix(m: usize, n: usize, stream: &RngStream) -> Result<DMatrix<f64>> {
    if m == 0 || n == 0 {
        return Err(Error::Domain(format!(
            "matrix dimensions must be positive, got {m}x{n}"
        )));
    }
    let mut rng = stream.rng();
    Ok(DMatrix::from_row_iterator(
        m,
        n,
        std::iter::repeat_with(|| rng.sample::<f64, _>(StandardNormal)).take(m * n),
    ))
}

/// m x n matrix with i.i.d. +-1 entries (p = 1/2), filled row by row.
pub fn rademacher_matrix(m: usize, n: usize, stream: &RngStream) -> Result<DMatrix<f64>> {
    if m == 0 || n == 0 {
        return Err(Error::Domain(format!(
            "matrix dimensions must be positive, got {m}x{n}"
        )));
    }
    let mut rng = stream.rng();
    Ok(DMatrix::from_row_iterator(
        m,
        n,
        std::iter::repeat_with(|| if rng.random::<bool>() { 1.0 } else { -1.0 }).take(m * n),
    ))
}

/// Standard normal vector of length n.
pub fn gaussian_vector(n: usize, rng: &mut rand_chacha::ChaCha8Rng) -> DVector<f64> {
    DVector::from_iterator(
        n,
        std::iter::repeat_with(|| rng.sample::<f64, _>(StandardNormal)).take(n),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn nullspace_of_row_of_ones() {
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let basis = nullspace_basis(&a).unwrap();
        let s = 1.0 / 2.0f64.sqrt();
        assert_abs_diff_eq!(basis.f[(0, 0)], s, epsilon = 1e-12);
        assert_abs_diff_eq!(basis.f[(1, 0)], -s, epsilon = 1e-12);
    }

    #[test]
    fn nullspace_of_identity_errors() {
        let a = DMatrix::<f64>::identity(2, 2);
        assert!(matches!(
            nullspace_basis(&a),
            Err(Error::NotUnderdetermined { .. })
        ));
    }

    #[test]
    fn nullspace_two_by_three() {
        let a = DMatrix::from_row_slice(2, 3, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0]);
        let basis = nullspace_basis(&a).unwrap();
        let s = 1.0 / 3.0f64.sqrt();
        let expected = [s, s, -s];
        for i in 0..3 {
            assert_abs_diff_eq!(basis.f[(i, 0)], expected[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn nullspace_rejects_rank_deficient() {
        let a = DMatrix::from_row_slice(2, 4, &[1.0, 2.0, 3.0, 4.0, 2.0, 4.0, 6.0, 8.0]);
        assert!(matches!(
            nullspace_basis(&a),
            Err(Error::RankDeficient { rank: 1, .. })
        ));
    }

    #[test]
    fn random_nullspace_invariants() {
        for seed in 0..10 {
            let a = gaussian_matrix(4, 9, &RngStream::new(seed, 0)).unwrap();
            let basis = nullspace_basis(&a).unwrap();
            assert_eq!(basis.dim(), 5);
            assert!((&a * &basis.f).norm() <= 1e-10 * a.norm());
            let d = basis.dim();
            let gram = basis.f.transpose() * &basis.f;
            assert!((gram - DMatrix::identity(d, d)).norm() <= 1e-10);
        }
    }

    #[test]
    fn psd_projection_examples() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]);
        let p = project_psd(&a).unwrap();
        for (i, j, want) in [(0, 0, 0.5), (0, 1, 0.5), (1, 0, 0.5), (1, 1, 0.5)] {
            assert_abs_diff_eq!(p[(i, j)], want, epsilon = 1e-12);
        }

        let id = DMatrix::<f64>::identity(2, 2);
        assert!((project_psd(&id).unwrap() - &id).norm() < 1e-12);

        let neg = -DMatrix::<f64>::identity(2, 2);
        assert!(project_psd(&neg).unwrap().norm() < 1e-12);
    }

    #[test]
    fn psd_projection_idempotent_and_optimal() {
        let stream = RngStream::new(11, 1);
        for trial in 0..100 {
            let raw = gaussian_matrix(5, 5, &stream.substream(trial)).unwrap();
            let sym = (&raw + raw.transpose()).scale(0.5);
            let proj = project_psd(&sym).unwrap();
            let twice = project_psd(&proj).unwrap();
            assert!((&twice - &proj).norm() <= 1e-10);

            // any other PSD matrix is at least as far away
            let q = gaussian_matrix(5, 5, &stream.substream(1000 + trial)).unwrap();
            let psd = &q * q.transpose();
            assert!((&sym - &proj).norm() <= (&sym - &psd).norm() + 1e-9);
        }
    }

    #[test]
    fn eigen_reconstructs() {
        for (seed, n) in [(0u64, 5usize), (1, 16), (2, 64)] {
            let raw = gaussian_matrix(n, n, &RngStream::new(seed, 2)).unwrap();
            let sym = (&raw + raw.transpose()).scale(0.5);
            let (values, vectors) = sym_eigen(&sym).unwrap();
            let rebuilt = &vectors * DMatrix::from_diagonal(&values) * vectors.transpose();
            assert!((&rebuilt - &sym).norm() <= 1e-9 * sym.norm());
        }
    }

    #[test]
    fn gaussian_matrix_is_deterministic_and_centered() {
        let s = RngStream::new(42, 7);
        let a = gaussian_matrix(2, 4, &s).unwrap();
        let b = gaussian_matrix(2, 4, &s).unwrap();
        assert_eq!(a, b);

        let wide = gaussian_matrix(1, 10_000, &s).unwrap();
        let mean = wide.iter().sum::<f64>() / 10_000.0;
        assert!(mean.abs() < 0.05, "sample mean {mean} drifted");

        assert!(gaussian_matrix(0, 3, &s).is_err());
    }

    #[test]
    fn rademacher_entries_are_signs() {
        let a = rademacher_matrix(3, 5, &RngStream::new(1, 1)).unwrap();
        assert!(a.iter().all(|&x| x == 1.0 || x == -1.0));
    }
}
