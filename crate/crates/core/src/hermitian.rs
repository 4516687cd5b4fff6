//! Dense complex matrices and the Hermitian operations the rest of the
//! crate is built on.
//!
//! Everything here is small (at most 8×8 in practice), so the storage is a
//! plain dense matrix and no attempt is made at blocking or sparsity.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

/// Entrywise tolerance for accepting a matrix as Hermitian.
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Default tolerance for positive semidefiniteness.
pub const PSD_TOL: f64 = 1e-9;

/// Dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix(DMatrix<C64>);

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self(DMatrix::zeros(rows, cols))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    /// Builds a matrix from entries listed in row-major order.
    pub fn from_row_slice(rows: usize, cols: usize, entries: &[C64]) -> Result<Self> {
        if rows == 0 || cols == 0 || entries.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                entries.len()
            )));
        }
        if entries.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self(DMatrix::from_row_slice(rows, cols, entries)))
    }

    pub fn from_real_rows(rows: usize, cols: usize, entries: &[f64]) -> Result<Self> {
        let c: Vec<C64> = entries.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::from_row_slice(rows, cols, &c)
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        let mut m = DMatrix::zeros(n, n);
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = C64::new(v, 0.0);
        }
        Self(m)
    }

    /// Outer product |u⟩⟨v|.
    pub fn outer(u: &[C64], v: &[C64]) -> Self {
        Self(DMatrix::from_fn(u.len(), v.len(), |i, j| u[i] * v[j].conj()))
    }

    pub fn from_nalgebra(m: DMatrix<C64>) -> Self {
        Self(m)
    }

    pub fn as_nalgebra(&self) -> &DMatrix<C64> {
        &self.0
    }

    pub fn into_nalgebra(self) -> DMatrix<C64> {
        self.0
    }

    pub fn rows(&self) -> usize {
        self.0.nrows()
    }

    pub fn cols(&self) -> usize {
        self.0.ncols()
    }

    pub fn is_square(&self) -> bool {
        self.rows() == self.cols()
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0[(i, j)]
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        self.0[(i, j)] = v;
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    pub fn trace(&self) -> C64 {
        self.0.trace()
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.map(|z| z * s))
    }

    pub fn scale_complex(&self, s: C64) -> Self {
        Self(&self.0 * s)
    }

    /// Largest entrywise modulus.
    pub fn max_abs(&self) -> f64 {
        self.0.iter().fold(0.0, |acc, z| acc.max(z.norm()))
    }

    /// Largest entrywise deviation from the conjugate transpose.
    pub fn hermitian_deviation(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows();
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in i..n {
                dev = dev.max((self.0[(i, j)] - self.0[(j, i)].conj()).norm());
            }
        }
        dev
    }

    /// Re tr(A·B), i.e. the real Hilbert–Schmidt pairing tr(A B) for Hermitian inputs.
    pub fn trace_product(&self, other: &CMatrix) -> C64 {
        let n = self.rows();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for k in 0..self.cols() {
                acc += self.0[(i, k)] * other.0[(k, i)];
            }
        }
        acc
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        CMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        CMatrix(&self.0 - &rhs.0)
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        CMatrix(&self.0 * &rhs.0)
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        CMatrix(-&self.0)
    }
}

/// A square complex matrix equal to its conjugate transpose.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix(CMatrix);

impl HermitianMatrix {
    /// Validates Hermiticity within [`HERMITIAN_TOL`]; the stored matrix is
    /// exactly symmetrised.
    pub fn new(m: CMatrix) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::Dimension(format!(
                "Hermitian matrix must be square, got {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        if m.0.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite);
        }
        let dev = m.hermitian_deviation();
        if dev > HERMITIAN_TOL {
            return Err(Error::NotHermitian(dev));
        }
        Ok(Self::symmetrize(&m))
    }

    /// (M + M†)/2 for a computed matrix that is Hermitian up to rounding.
    pub fn symmetrize(m: &CMatrix) -> Self {
        let h = (&m.0 + m.0.adjoint()) * C64::new(0.5, 0.0);
        Self(CMatrix(h))
    }

    pub fn zeros(n: usize) -> Self {
        Self(CMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(CMatrix::identity(n))
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        Self(CMatrix::from_diagonal(diag))
    }

    /// Rank-one projector onto the normalised direction of `v`.
    pub fn projector(v: &[C64]) -> Self {
        let norm2: f64 = v.iter().map(|z| z.norm_sqr()).sum();
        let u: Vec<C64> = v.iter().map(|z| z / norm2.sqrt()).collect();
        Self::symmetrize(&CMatrix::outer(&u, &u))
    }

    pub fn dim(&self) -> usize {
        self.0.rows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn into_matrix(self) -> CMatrix {
        self.0
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.0.get(i, j)
    }

    pub fn trace(&self) -> f64 {
        self.0.trace().re
    }

    /// tr(A·B), real for Hermitian A and B.
    pub fn inner(&self, other: &HermitianMatrix) -> f64 {
        self.0.trace_product(&other.0).re
    }

    pub fn scale(&self, s: f64) -> Self {
        Self(self.0.scale(s))
    }

    pub fn add(&self, other: &HermitianMatrix) -> Self {
        Self(&self.0 + &other.0)
    }

    pub fn sub(&self, other: &HermitianMatrix) -> Self {
        Self(&self.0 - &other.0)
    }

    /// self + s·other
    pub fn add_scaled(&self, s: f64, other: &HermitianMatrix) -> Self {
        Self(&self.0 + &other.0.scale(s))
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.transpose())
    }

    /// Hermitian product A·B·A.
    pub fn sandwich(&self, inner: &HermitianMatrix) -> Self {
        Self::symmetrize(&(&(&self.0 * &inner.0) * &self.0))
    }

    pub fn kron(&self, other: &HermitianMatrix) -> Self {
        Self(kron(&self.0, &other.0))
    }

    pub fn max_abs_diff(&self, other: &HermitianMatrix) -> f64 {
        (&self.0 - &other.0).max_abs()
    }

    /// Applies `f` to the eigenvalues.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Self {
        let (vals, vecs) = eig_herm(self);
        let n = self.dim();
        let mut out = DMatrix::<C64>::zeros(n, n);
        for (k, &lam) in vals.iter().enumerate() {
            let col = vecs.0.column(k);
            out += col * col.adjoint() * C64::new(f(lam), 0.0);
        }
        Self::symmetrize(&CMatrix(out))
    }
}

/// Kronecker product A ⊗ B.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    CMatrix(a.0.kronecker(&b.0))
}

/// Traces out every factor not listed in `keep`.
///
/// `dims` lists the subsystem dimensions in tensor order; the kept factors
/// appear in the output in their original order.
pub fn partial_trace(m: &CMatrix, dims: &[usize], keep: &[usize]) -> Result<CMatrix> {
    let total: usize = dims.iter().product();
    if dims.is_empty() || dims.contains(&0) || total != m.rows() || !m.is_square() {
        return Err(Error::Dimension(format!(
            "subsystem dims {dims:?} do not match a {}x{} matrix",
            m.rows(),
            m.cols()
        )));
    }
    if let Some(&bad) = keep.iter().find(|&&k| k >= dims.len()) {
        return Err(Error::OutOfRange(format!(
            "subsystem {bad} of {}",
            dims.len()
        )));
    }
    let kept: Vec<usize> = (0..dims.len()).filter(|i| keep.contains(i)).collect();
    let traced: Vec<usize> = (0..dims.len()).filter(|i| !keep.contains(i)).collect();
    let kept_dims: Vec<usize> = kept.iter().map(|&i| dims[i]).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&i| dims[i]).collect();
    let out_dim: usize = kept_dims.iter().product();
    let sum_dim: usize = traced_dims.iter().product();

    let mut strides = vec![1usize; dims.len()];
    for i in (0..dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * dims[i + 1];
    }
    let flat = |kept_digits: &[usize], traced_digits: &[usize]| -> usize {
        let mut idx = 0;
        for (p, &sub) in kept.iter().enumerate() {
            idx += kept_digits[p] * strides[sub];
        }
        for (p, &sub) in traced.iter().enumerate() {
            idx += traced_digits[p] * strides[sub];
        }
        idx
    };

    let kept_index: Vec<Vec<usize>> = (0..out_dim).map(|i| digits(i, &kept_dims)).collect();
    let traced_index: Vec<Vec<usize>> = (0..sum_dim).map(|t| digits(t, &traced_dims)).collect();

    let mut out = DMatrix::<C64>::zeros(out_dim, out_dim);
    for i in 0..out_dim {
        for j in 0..out_dim {
            let mut acc = C64::new(0.0, 0.0);
            for t in &traced_index {
                acc += m.0[(flat(&kept_index[i], t), flat(&kept_index[j], t))];
            }
            out[(i, j)] = acc;
        }
    }
    Ok(CMatrix(out))
}

/// Mixed-radix digits of `n`, most significant first.
fn digits(mut n: usize, radices: &[usize]) -> Vec<usize> {
    let mut out = vec![0; radices.len()];
    for (slot, &r) in out.iter_mut().zip(radices).rev() {
        *slot = n % r;
        n /= r;
    }
    out
}

/// Eigen-decomposition of a Hermitian matrix: eigenvalues in descending
/// order and the matching eigenvectors as columns.
pub fn eig_herm(m: &HermitianMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.dim();
    let eig = m.0 .0.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, CMatrix(vecs))
}

/// Checked variant of [`eig_herm`] for raw matrices.
pub fn eig_checked(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let h = HermitianMatrix::new(m.clone())?;
    Ok(eig_herm(&h))
}

/// Operator (spectral) norm: largest absolute eigenvalue.
pub fn opnorm(m: &HermitianMatrix) -> f64 {
    let (vals, _) = eig_herm(m);
    vals.iter().fold(0.0, |acc, v| acc.max(v.abs()))
}

pub fn max_eigenvalue(m: &HermitianMatrix) -> f64 {
    eig_herm(m).0[0]
}

pub fn min_eigenvalue(m: &HermitianMatrix) -> f64 {
    *eig_herm(m).0.last().expect("non-empty matrix")
}

pub fn is_psd(m: &HermitianMatrix, tol: f64) -> bool {
    min_eigenvalue(m) >= -tol
}

/// Standard Pauli matrices.
pub mod pauli {
    use super::{CMatrix, HermitianMatrix, C64};

    pub fn x() -> HermitianMatrix {
        HermitianMatrix::new(CMatrix::from_real_rows(2, 2, &[0.0, 1.0, 1.0, 0.0]).unwrap()).unwrap()
    }

    pub fn y() -> HermitianMatrix {
        let i = C64::new(0.0, 1.0);
        let z = C64::new(0.0, 0.0);
        HermitianMatrix::new(CMatrix::from_row_slice(2, 2, &[z, -i, i, z]).unwrap()).unwrap()
    }

    pub fn z() -> HermitianMatrix {
        HermitianMatrix::from_real_diagonal(&[1.0, -1.0])
    }

    pub fn identity() -> HermitianMatrix {
        HermitianMatrix::identity(2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn ket(v: &[f64]) -> Vec<C64> {
        v.iter().map(|&x| c(x)).collect()
    }

    fn bell_projector() -> CMatrix {
        let s = 1.0 / 2f64.sqrt();
        let v = ket(&[s, 0.0, 0.0, s]);
        CMatrix::outer(&v, &v)
    }

    #[test]
    fn kron_identities() {
        let out = kron(&CMatrix::identity(2), &CMatrix::identity(2));
        assert_eq!(out, CMatrix::identity(4));
    }

    #[test]
    fn kron_basis_projectors() {
        let p0 = CMatrix::from_diagonal(&[1.0, 0.0]);
        let p1 = CMatrix::from_diagonal(&[0.0, 1.0]);
        let out = kron(&p0, &p1);
        for i in 0..4 {
            for j in 0..4 {
                let expect = if (i, j) == (1, 1) { 1.0 } else { 0.0 };
                assert_eq!(out.get(i, j), c(expect));
            }
        }
    }

    #[test]
    fn kron_z_z() {
        let out = kron(pauli::z().matrix(), pauli::z().matrix());
        assert_eq!(out, CMatrix::from_diagonal(&[1.0, -1.0, -1.0, 1.0]));
    }

    #[test]
    fn partial_trace_bell_marginal() {
        let out = partial_trace(&bell_projector(), &[2, 2], &[1]).unwrap();
        assert!((&out - &CMatrix::identity(2).scale(0.5)).max_abs() < 1e-15);
    }

    #[test]
    fn partial_trace_product_state() {
        let rho = CMatrix::from_real_rows(2, 2, &[0.7, 0.2, 0.2, 0.3]).unwrap();
        let tau = CMatrix::from_real_rows(2, 2, &[0.5, 0.1, 0.1, 0.1]).unwrap();
        let out = partial_trace(&kron(&rho, &tau), &[2, 2], &[0]).unwrap();
        assert!((&out - &rho.scale(0.6)).max_abs() < 1e-15);
    }

    #[test]
    fn partial_trace_steered_z() {
        let zt = kron(&pauli::z().matrix().transpose(), &CMatrix::identity(2));
        let out = partial_trace(&(&zt * &bell_projector()), &[2, 2], &[1]).unwrap();
        assert!((&out - &pauli::z().matrix().scale(0.5)).max_abs() < 1e-15);
    }

    #[test]
    fn partial_trace_rejects_bad_dims() {
        assert!(partial_trace(&CMatrix::identity(4), &[2, 3], &[0]).is_err());
        assert!(partial_trace(&CMatrix::identity(4), &[2, 2], &[2]).is_err());
    }

    #[test]
    fn partial_trace_middle_factor() {
        let a = CMatrix::from_diagonal(&[0.25, 0.75]);
        let b = CMatrix::from_real_rows(3, 3, &[0.2, 0.1, 0.0, 0.1, 0.5, 0.0, 0.0, 0.0, 0.3]).unwrap();
        let cc = CMatrix::from_diagonal(&[0.4, 0.6]);
        let full = kron(&kron(&a, &b), &cc);
        let out = partial_trace(&full, &[2, 3, 2], &[1]).unwrap();
        assert!((&out - &b).max_abs() < 1e-15);
        let ac = partial_trace(&full, &[2, 3, 2], &[0, 2]).unwrap();
        assert!((&ac - &kron(&a, &cc)).max_abs() < 1e-15);
    }

    #[test]
    fn eig_diag() {
        let (vals, _) = eig_herm(&HermitianMatrix::from_real_diagonal(&[1.0, 3.0]));
        assert_eq!(vals, vec![3.0, 1.0]);
    }

    #[test]
    fn eig_pauli_x() {
        let (vals, vecs) = eig_herm(&pauli::x());
        assert!((vals[0] - 1.0).abs() < 1e-14 && (vals[1] + 1.0).abs() < 1e-14);
        // |+⟩ up to phase
        let v = [vecs.get(0, 0), vecs.get(1, 0)];
        assert!(((v[0] * v[1].conj()).re - 0.5).abs() < 1e-14);
    }

    #[test]
    fn eig_projector_sum() {
        let p0 = HermitianMatrix::projector(&ket(&[1.0, 0.0]));
        let plus = HermitianMatrix::projector(&ket(&[1.0, 1.0]));
        let sum = p0.add(&plus);
        assert!((max_eigenvalue(&sum) - (1.0 + 1.0 / 2f64.sqrt())).abs() < 1e-12);
        assert!((opnorm(&sum) - 1.707_106_781_186_547_5).abs() < 1e-12);
    }

    #[test]
    fn opnorm_simple() {
        assert!((opnorm(&HermitianMatrix::identity(3)) - 1.0).abs() < 1e-15);
        assert!((opnorm(&HermitianMatrix::identity(2).scale(-2.0)) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn psd_tolerance_band() {
        assert!(is_psd(&HermitianMatrix::identity(2), 1e-9));
        assert!(!is_psd(&HermitianMatrix::from_real_diagonal(&[1.0, -1e-6]), 1e-9));
        assert!(is_psd(&HermitianMatrix::from_real_diagonal(&[1.0, -1e-12]), 1e-9));
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = CMatrix::from_real_rows(2, 2, &[1.0, 2.0, 0.0, 1.0]).unwrap();
        assert!(matches!(HermitianMatrix::new(m.clone()), Err(Error::NotHermitian(_))));
        assert!(eig_checked(&m).is_err());
        let rect = CMatrix::zeros(2, 3);
        assert!(HermitianMatrix::new(rect).is_err());
    }

    #[test]
    fn rejects_non_finite() {
        assert_eq!(
            CMatrix::from_real_rows(1, 1, &[f64::NAN]).unwrap_err(),
            Error::NonFinite
        );
    }

    fn cmatrix(n: usize) -> impl Strategy<Value = CMatrix> {
        proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), n * n).prop_map(move |v| {
            let e: Vec<C64> = v.into_iter().map(|(a, b)| C64::new(a, b)).collect();
            CMatrix::from_row_slice(n, n, &e).unwrap()
        })
    }

    fn hermitian(n: usize) -> impl Strategy<Value = HermitianMatrix> {
        cmatrix(n).prop_map(|m| HermitianMatrix::symmetrize(&m))
    }

    proptest! {
        #[test]
        fn kron_associative(a in cmatrix(2), b in cmatrix(2), cm in cmatrix(2)) {
            let left = kron(&kron(&a, &b), &cm);
            let right = kron(&a, &kron(&b, &cm));
            prop_assert!((&left - &right).max_abs() <= 1e-12);
        }

        #[test]
        fn kron_bilinear(a in cmatrix(2), a2 in cmatrix(2), b in cmatrix(3), s in -2.0f64..2.0) {
            let lhs = kron(&(&a + &a2.scale(s)), &b);
            let rhs = &kron(&a, &b) + &kron(&a2, &b).scale(s);
            prop_assert!((&lhs - &rhs).max_abs() <= 1e-12);
        }

        #[test]
        fn partial_trace_preserves_trace(m in cmatrix(6), keep in 0usize..2) {
            let out = partial_trace(&m, &[2, 3], &[keep]).unwrap();
            prop_assert!((out.trace() - m.trace()).norm() <= 1e-12);
        }

        #[test]
        fn eigenpairs_have_small_residual(h in hermitian(4)) {
            let (vals, vecs) = eig_herm(&h);
            for (k, lam) in vals.iter().enumerate() {
                let v = vecs.as_nalgebra().column(k).into_owned();
                let r = h.matrix().as_nalgebra() * &v - &v * C64::new(*lam, 0.0);
                prop_assert!(r.iter().all(|z| z.norm() <= 1e-10));
            }
            // reconstruction
            let recon = h.map_spectrum(|x| x);
            prop_assert!(recon.max_abs_diff(&h) <= 1e-10);
        }

        #[test]
        fn opnorm_triangle(a in hermitian(3), b in hermitian(3)) {
            prop_assert!(opnorm(&a.add(&b)) <= opnorm(&a) + opnorm(&b) + 1e-12);
        }
    }
}
