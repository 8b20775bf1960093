//! Dense complex matrices and a Hermitian eigensolver sized for the small
//! Hilbert spaces used here (9x9 for two three-level modes).
//!
//! Storage is row-major `Complex64`. The eigensolver is a cyclic Jacobi
//! iteration with complex rotations; for matrices this small it is both
//! fast and unconditionally stable, and the eigenvector matrix it returns
//! is unitary to machine precision.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Square dense complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        ComplexMatrix {
            dim,
            entries: vec![Complex64::ZERO; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.entries[i * dim + i] = Complex64::ONE;
        }
        m
    }

    /// Build from a row-major entry list. Length must be `dim * dim`.
    pub fn from_entries(dim: usize, entries: Vec<Complex64>) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::DimensionMismatch {
                expected: dim * dim,
                got: entries.len(),
                context: "ComplexMatrix::from_entries",
            });
        }
        Ok(ComplexMatrix { dim, entries })
    }

    /// Build from rows of real numbers (convenience for tests and gates).
    pub fn from_real_rows(rows: &[&[f64]]) -> Self {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), dim, "ragged row in from_real_rows");
            for (j, &v) in row.iter().enumerate() {
                m.entries[i * dim + j] = Complex64::new(v, 0.0);
            }
        }
        m
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.entries[i * self.dim + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.entries[i * self.dim + j] = v;
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.entries[j * n + i] = self.entries[i * n + j].conj();
            }
        }
        out
    }

    pub fn scale(&self, factor: Complex64) -> Self {
        ComplexMatrix {
            dim: self.dim,
            entries: self.entries.iter().map(|e| e * factor).collect(),
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        ComplexMatrix {
            dim: self.dim,
            entries: self
                .entries
                .iter()
                .zip(&other.entries)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }

    /// self += factor * other, entrywise.
    pub fn add_scaled(&mut self, factor: f64, other: &Self) {
        debug_assert_eq!(self.dim, other.dim);
        for (a, b) in self.entries.iter_mut().zip(&other.entries) {
            a.re += factor * b.re;
            a.im += factor * b.im;
        }
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let n = self.dim;
        let mut out = Self::zeros(n);
        matmul_into(&self.entries, &other.entries, &mut out.entries, n);
        out
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self.entries[i * self.dim + i]).sum()
    }

    /// Kronecker product; `self` is the left (slow-index) factor.
    pub fn kron(&self, other: &Self) -> Self {
        let (a, b) = (self.dim, other.dim);
        let n = a * b;
        let mut out = Self::zeros(n);
        for i1 in 0..a {
            for j1 in 0..a {
                let f = self.entries[i1 * a + j1];
                if f == Complex64::ZERO {
                    continue;
                }
                for i2 in 0..b {
                    for j2 in 0..b {
                        out.entries[(i1 * b + i2) * n + (j1 * b + j2)] =
                            f * other.entries[i2 * b + j2];
                    }
                }
            }
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim);
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// max |(M - M†)_ij|; zero for a Hermitian matrix.
    pub fn hermiticity_deviation(&self) -> f64 {
        let n = self.dim;
        let mut max = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.entries[i * n + j] - self.entries[j * n + i].conj()).norm();
                max = max.max(d);
            }
        }
        max
    }

    /// max |(M†M - I)_ij|; zero for a unitary matrix.
    pub fn unitarity_deviation(&self) -> f64 {
        let prod = self.adjoint().matmul(self);
        prod.max_abs_diff(&Self::identity(self.dim))
    }

    pub fn is_finite(&self) -> bool {
        self.entries.iter().all(|e| e.re.is_finite() && e.im.is_finite())
    }
}

/// out = a·b on flat row-major n x n buffers; out must not alias a or b.
#[inline]
pub(crate) fn matmul_into(a: &[Complex64], b: &[Complex64], out: &mut [Complex64], n: usize) {
    out.fill(Complex64::ZERO);
    for i in 0..n {
        let arow = &a[i * n..(i + 1) * n];
        let orow = &mut out[i * n..(i + 1) * n];
        for (k, &aik) in arow.iter().enumerate() {
            let brow = &b[k * n..(k + 1) * n];
            for (o, &bkj) in orow.iter_mut().zip(brow) {
                *o += aik * bkj;
            }
        }
    }
}

/// Eigendecomposition of a Hermitian matrix: real eigenvalues plus the
/// unitary matrix whose columns are the corresponding eigenvectors, so that
/// `H = V diag(values) V†`.
#[derive(Debug, Clone)]
pub struct HermitianEigen {
    pub values: Vec<f64>,
    pub vectors: ComplexMatrix,
}

/// Relative off-diagonal norm below which the Jacobi sweep stops.
const JACOBI_TOL: f64 = 1e-15;
const JACOBI_MAX_SWEEPS: usize = 40;

/// Diagonalize a Hermitian matrix by cyclic Jacobi rotations.
///
/// The input is validated against `hermitian_tol`; symmetrization is then
/// applied so the iteration always works on an exactly Hermitian matrix.
pub fn hermitian_eigen(h: &ComplexMatrix, hermitian_tol: f64) -> Result<HermitianEigen> {
    let dev = h.hermiticity_deviation();
    if !dev.is_finite() || dev > hermitian_tol {
        return Err(Error::NotHermitian { deviation: dev });
    }
    let n = h.dim();
    let mut a = h.clone();
    // Work on (H + H†)/2 so roundoff in the caller cannot leak in.
    for i in 0..n {
        for j in 0..n {
            let sym = 0.5 * (a.entries[i * n + j] + a.entries[j * n + i].conj());
            a.entries[i * n + j] = sym;
        }
    }
    let mut v = ComplexMatrix::identity(n);
    jacobi_in_place(&mut a.entries, &mut v.entries, n);
    let values = (0..n).map(|i| a.entries[i * n + i].re).collect();
    Ok(HermitianEigen { values, vectors: v })
}

fn frobenius_sq(a: &[Complex64]) -> f64 {
    a.iter().map(|e| e.norm_sqr()).sum()
}

fn off_diag_sq(a: &[Complex64], n: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            s += 2.0 * a[i * n + j].norm_sqr();
        }
    }
    s
}

/// Cyclic Jacobi for a Hermitian matrix stored in `a` (overwritten with a
/// diagonal matrix); rotations accumulate into `v` so that on return the
/// original matrix equals `v diag(a) v†`.
fn jacobi_in_place(a: &mut [Complex64], v: &mut [Complex64], n: usize) {
    let norm_sq = frobenius_sq(a);
    if norm_sq == 0.0 {
        return;
    }
    let stop = JACOBI_TOL * JACOBI_TOL * norm_sq;
    for _sweep in 0..JACOBI_MAX_SWEEPS {
        if off_diag_sq(a, n) <= stop {
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                let beta = apq.norm();
                if beta == 0.0 {
                    continue;
                }
                let app = a[p * n + p].re;
                let aqq = a[q * n + q].re;
                // Phase of the off-diagonal entry and the Jacobi angle that
                // annihilates it.
                let phase = apq / beta;
                let tau = (app - aqq) / (2.0 * beta);
                let t = if tau >= 0.0 {
                    1.0 / (tau + (1.0 + tau * tau).sqrt())
                } else {
                    -1.0 / (-tau + (1.0 + tau * tau).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                // Column rotation coefficients: J[p][p]=c, J[p][q]=-s*phase,
                // J[q][p]=s*conj(phase), J[q][q]=c. A <- J† A J, V <- V J.
                let sp = s * phase; // s e^{i phi}
                let spc = sp.conj();

                // Rows p and q (columns handled through Hermitian symmetry).
                for j in 0..n {
                    if j == p || j == q {
                        continue;
                    }
                    let apj = a[p * n + j];
                    let aqj = a[q * n + j];
                    let new_pj = c * apj + sp * aqj;
                    let new_qj = -spc * apj + c * aqj;
                    a[p * n + j] = new_pj;
                    a[q * n + j] = new_qj;
                    a[j * n + p] = new_pj.conj();
                    a[j * n + q] = new_qj.conj();
                }
                // 2x2 block: new diagonals, zeroed off-diagonal.
                let new_pp = c * c * app + 2.0 * c * s * beta + s * s * aqq;
                let new_qq = app + aqq - new_pp;
                a[p * n + p] = Complex64::new(new_pp, 0.0);
                a[q * n + q] = Complex64::new(new_qq, 0.0);
                a[p * n + q] = Complex64::ZERO;
                a[q * n + p] = Complex64::ZERO;

                // Accumulate eigenvectors: V <- V J (columns p, q change).
                for i in 0..n {
                    let vip = v[i * n + p];
                    let viq = v[i * n + q];
                    v[i * n + p] = c * vip + spc * viq;
                    v[i * n + q] = -sp * vip + c * viq;
                }
            }
        }
    }
}

/// exp(-i * scale * H) for Hermitian `H`, via eigendecomposition.
///
/// Writes into `out`; `eig_buf` and `vec_buf` are scratch reused across
/// calls. `hermitian_tol` bounds the accepted deviation from Hermiticity.
pub(crate) fn expi_hermitian_into(
    h: &ComplexMatrix,
    scale: f64,
    hermitian_tol: f64,
    out: &mut ComplexMatrix,
) -> Result<()> {
    let eig = hermitian_eigen(h, hermitian_tol)?;
    let n = h.dim();
    debug_assert_eq!(out.dim, n);
    let v = &eig.vectors.entries;
    // W = V * diag(exp(-i*scale*lambda)); out = W * V†.
    let mut w = vec![Complex64::ZERO; n * n];
    for k in 0..n {
        let ph = Complex64::from_polar(1.0, -scale * eig.values[k]);
        for i in 0..n {
            w[i * n + k] = v[i * n + k] * ph;
        }
    }
    for i in 0..n {
        for j in 0..n {
            let mut acc = Complex64::ZERO;
            for k in 0..n {
                acc += w[i * n + k] * v[j * n + k].conj();
            }
            out.entries[i * n + j] = acc;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_hermitian(n: usize, rng: &mut ChaCha8Rng) -> ComplexMatrix {
        let mut m = ComplexMatrix::zeros(n);
        for i in 0..n {
            m.set(i, i, Complex64::new(rng.random_range(-2.0..2.0), 0.0));
            for j in (i + 1)..n {
                let v = Complex64::new(rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0));
                m.set(i, j, v);
                m.set(j, i, v.conj());
            }
        }
        m
    }

    #[test]
    fn identity_and_matmul() {
        let i4 = ComplexMatrix::identity(4);
        let m = ComplexMatrix::from_real_rows(&[
            &[1.0, 2.0, 0.0, 0.0],
            &[0.0, 1.0, 0.0, 0.0],
            &[0.0, 0.0, 3.0, 0.0],
            &[0.0, 0.0, 0.0, 1.0],
        ]);
        assert_eq!(m.matmul(&i4), m);
        assert_eq!(i4.matmul(&m), m);
    }

    #[test]
    fn kron_ordering_left_factor_is_slow_index() {
        // (A kron B)[i1*b+i2, j1*b+j2] = A[i1,j1] * B[i2,j2]
        let a = ComplexMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]);
        let id = ComplexMatrix::identity(2);
        let k = a.kron(&id);
        assert_eq!(k.get(0, 2), Complex64::ONE);
        assert_eq!(k.get(1, 3), Complex64::ONE);
        assert_eq!(k.get(0, 1), Complex64::ZERO);
    }

    #[test]
    fn eigen_reconstructs_random_hermitian() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for n in [2usize, 4, 9, 12] {
            for _ in 0..20 {
                let h = random_hermitian(n, &mut rng);
                let eig = hermitian_eigen(&h, 1e-9).unwrap();
                // V unitary
                assert!(eig.vectors.unitarity_deviation() < 1e-12);
                // V diag V† == H
                let mut rebuilt = ComplexMatrix::zeros(n);
                for i in 0..n {
                    for j in 0..n {
                        let mut acc = Complex64::ZERO;
                        for k in 0..n {
                            acc += eig.vectors.get(i, k)
                                * eig.values[k]
                                * eig.vectors.get(j, k).conj();
                        }
                        rebuilt.set(i, j, acc);
                    }
                }
                assert!(rebuilt.max_abs_diff(&h) < 1e-12, "n={n}");
            }
        }
    }

    #[test]
    fn eigen_rejects_non_hermitian() {
        let mut m = ComplexMatrix::zeros(2);
        m.set(0, 1, Complex64::new(1.0, 0.0));
        assert!(matches!(
            hermitian_eigen(&m, 1e-9),
            Err(Error::NotHermitian { .. })
        ));
    }

    #[test]
    fn expi_zero_matrix_is_identity() {
        let h = ComplexMatrix::zeros(3);
        let mut out = ComplexMatrix::zeros(3);
        expi_hermitian_into(&h, 1.7, 1e-9, &mut out).unwrap();
        assert!(out.max_abs_diff(&ComplexMatrix::identity(3)) < 1e-15);
    }

    #[test]
    fn expi_diagonal_phases() {
        let mut h = ComplexMatrix::zeros(2);
        h.set(0, 0, Complex64::new(0.4, 0.0));
        h.set(1, 1, Complex64::new(-1.3, 0.0));
        let s = 0.77;
        let mut out = ComplexMatrix::zeros(2);
        expi_hermitian_into(&h, s, 1e-9, &mut out).unwrap();
        let expect0 = Complex64::from_polar(1.0, -s * 0.4);
        let expect1 = Complex64::from_polar(1.0, -s * -1.3);
        assert!((out.get(0, 0) - expect0).norm() < 1e-14);
        assert!((out.get(1, 1) - expect1).norm() < 1e-14);
        assert!(out.get(0, 1).norm() < 1e-14);
    }

    #[test]
    fn expi_is_unitary_on_random_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let h = random_hermitian(9, &mut rng);
            let mut out = ComplexMatrix::zeros(9);
            expi_hermitian_into(&h, 0.04, 1e-9, &mut out).unwrap();
            assert!(out.unitarity_deviation() < 1e-12);
        }
    }
}
