//! Real embedding of complex Hermitian matrices.
//!
//! H = A + iB maps to the real symmetric matrix [[A, −B], [B, A]]. The map
//! preserves positive semidefiniteness in both directions, doubles every
//! eigenvalue's multiplicity and hence doubles traces.

use nalgebra::DMatrix;

use crate::error::Result;
use crate::hermitian::{CMatrix, HermitianMatrix, C64};

/// Embeds a Hermitian matrix, validating Hermiticity first.
pub fn embed_hermitian(h: &CMatrix) -> Result<DMatrix<f64>> {
    let h = HermitianMatrix::new(h.clone())?;
    Ok(embed(&h))
}

pub fn embed(h: &HermitianMatrix) -> DMatrix<f64> {
    let n = h.dim();
    let mut out = DMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let z = h.get(i, j);
            out[(i, j)] = z.re;
            out[(i + n, j + n)] = z.re;
            out[(i, j + n)] = -z.im;
            out[(i + n, j)] = z.im;
        }
    }
    out
}

/// Inverse of [`embed`] on structured inputs; arbitrary symmetric inputs
/// are projected onto the embedded subspace first.
pub fn extract(x: &DMatrix<f64>) -> HermitianMatrix {
    let n = x.nrows() / 2;
    let mut m = CMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let re = 0.5 * (x[(i, j)] + x[(i + n, j + n)]);
            let im = 0.5 * (x[(i + n, j)] - x[(i, j + n)]);
            m.set(i, j, C64::new(re, im));
        }
    }
    HermitianMatrix::symmetrize(&m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::{eig_herm, pauli};
    use proptest::prelude::*;

    fn sym_eigs(m: &DMatrix<f64>) -> Vec<f64> {
        let mut v: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        v.sort_by(|a, b| b.total_cmp(a));
        v
    }

    #[test]
    fn identity_maps_to_identity() {
        let out = embed_hermitian(&CMatrix::identity(2)).unwrap();
        assert_eq!(out, DMatrix::identity(4, 4));
    }

    #[test]
    fn pauli_y_spectrum() {
        let out = embed(&pauli::y());
        let eigs = sym_eigs(&out);
        let expect = [1.0, 1.0, -1.0, -1.0];
        for (a, b) in eigs.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn projector_doubles_rank_and_trace() {
        let plus = HermitianMatrix::projector(&[C64::new(1.0, 0.0), C64::new(1.0, 0.0)]);
        let out = embed(&plus);
        assert!((out.trace() - 2.0).abs() < 1e-14);
        let eigs = sym_eigs(&out);
        assert!((eigs[0] - 1.0).abs() < 1e-14 && (eigs[1] - 1.0).abs() < 1e-14);
        assert!(eigs[2].abs() < 1e-14 && eigs[3].abs() < 1e-14);
    }

    #[test]
    fn rejects_non_hermitian() {
        let m = CMatrix::from_real_rows(2, 2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(embed_hermitian(&m).is_err());
    }

    proptest! {
        #[test]
        fn psd_sign_agreement(v in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 9)) {
            let e: Vec<C64> = v.into_iter().map(|(a, b)| C64::new(a, b)).collect();
            let h = HermitianMatrix::symmetrize(&CMatrix::from_row_slice(3, 3, &e).unwrap());
            let (complex_eigs, _) = eig_herm(&h);
            let real_eigs = sym_eigs(&embed(&h));
            // every complex eigenvalue appears twice
            for (k, lam) in complex_eigs.iter().enumerate() {
                prop_assert!((real_eigs[2 * k] - lam).abs() < 1e-10);
                prop_assert!((real_eigs[2 * k + 1] - lam).abs() < 1e-10);
            }
            prop_assert!(extract(&embed(&h)).max_abs_diff(&h) < 1e-15);
        }
    }
}
