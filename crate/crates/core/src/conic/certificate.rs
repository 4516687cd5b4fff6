use nalgebra::DMatrix;

use super::{BlockKind, BlockValue, Coefficient, ConicProgram, ConicSolution, Sense};
use crate::hermitian::{min_eigenvalue, HermitianMatrix};

/// Residuals recomputed from the user-facing program and a returned
/// solution. Norms are ∞-norms, relative to `1 + ‖rhs‖∞` (primal) and
/// `1 + max |objective coefficient|` (dual).
#[derive(Clone, Debug, PartialEq)]
pub struct CertificateReport {
    pub primal_residual: f64,
    /// Most negative eigenvalue (or scalar) over primal cone blocks, clipped at 0.
    pub primal_cone_violation: f64,
    /// Residual of the free-variable dual equalities.
    pub dual_residual: f64,
    /// Most negative eigenvalue of the recomputed dual slacks, clipped at 0.
    pub dual_cone_violation: f64,
    /// |primal objective − dual objective|.
    pub gap: f64,
    /// Σ_k ⟨X_k, S_k⟩ with recomputed slacks.
    pub complementarity: f64,
    /// Difference between the recomputed and the reported primal value.
    pub value_mismatch: f64,
}

impl CertificateReport {
    pub fn passes(&self, residual_tol: f64, gap_tol: f64) -> bool {
        self.primal_residual <= residual_tol
            && self.primal_cone_violation <= residual_tol
            && self.dual_residual <= residual_tol
            && self.dual_cone_violation <= residual_tol
            && self.gap <= gap_tol
            && self.value_mismatch <= gap_tol
    }
}

enum Acc {
    Sym(DMatrix<f64>),
    Herm(HermitianMatrix),
    Scalar(f64),
}

fn pair(c: &Coefficient, v: &BlockValue) -> f64 {
    match (c, v) {
        (Coefficient::Symmetric(a), BlockValue::Symmetric(x)) => a.dot(x),
        (Coefficient::Hermitian(a), BlockValue::Hermitian(x)) => a.inner(x),
        (Coefficient::Scalar(a), BlockValue::Scalar(x)) => a * x,
        _ => f64::NAN,
    }
}

fn accumulate(acc: &mut Acc, c: &Coefficient, s: f64) {
    match (acc, c) {
        (Acc::Sym(m), Coefficient::Symmetric(a)) => *m += a * s,
        (Acc::Herm(m), Coefficient::Hermitian(a)) => *m = m.add_scaled(s, a),
        (Acc::Scalar(m), Coefficient::Scalar(a)) => *m += a * s,
        _ => {}
    }
}

/// Recomputes primal residuals, dual slack positivity and the duality gap
/// for `sol`, using only the program data and the reported block values
/// and multipliers.
pub fn verify_certificate(p: &ConicProgram, sol: &ConicSolution) -> CertificateReport {
    let rhs_norm = p.equalities.iter().fold(0.0f64, |a, e| a.max(e.rhs.abs()));
    let coef_norm = p
        .objective
        .terms
        .iter()
        .map(|(_, c)| match c {
            Coefficient::Symmetric(a) => a.amax(),
            Coefficient::Hermitian(h) => h.matrix().max_abs(),
            Coefficient::Scalar(v) => v.abs(),
        })
        .fold(0.0f64, f64::max);

    let mut primal_residual = 0.0f64;
    for e in &p.equalities {
        let lhs: f64 = e.form.terms.iter().map(|(b, c)| pair(c, &sol.primal[b.0])).sum();
        primal_residual = primal_residual.max((lhs - e.rhs).abs());
    }
    primal_residual /= 1.0 + rhs_norm;

    let primal_obj: f64 = p
        .objective
        .terms
        .iter()
        .map(|(b, c)| pair(c, &sol.primal[b.0]))
        .sum::<f64>()
        + p.objective_offset;
    let dual_obj: f64 = p
        .equalities
        .iter()
        .zip(&sol.dual)
        .map(|(e, y)| e.rhs * y)
        .sum::<f64>()
        + p.objective_offset;

    // S = Σ y_i A_i − C (maximisation) or C − Σ y_i A_i (minimisation).
    let sign = match p.sense {
        Sense::Maximize => 1.0,
        Sense::Minimize => -1.0,
    };
    let mut slacks: Vec<Acc> = p
        .blocks
        .iter()
        .map(|k| match *k {
            BlockKind::Psd(n) => Acc::Sym(DMatrix::zeros(n, n)),
            BlockKind::Hermitian(n) => Acc::Herm(HermitianMatrix::zeros(n)),
            BlockKind::Nonneg | BlockKind::Free => Acc::Scalar(0.0),
        })
        .collect();
    for (e, y) in p.equalities.iter().zip(&sol.dual) {
        for (b, c) in &e.form.terms {
            accumulate(&mut slacks[b.0], c, sign * y);
        }
    }
    for (b, c) in &p.objective.terms {
        accumulate(&mut slacks[b.0], c, -sign);
    }

    let mut primal_cone = 0.0f64;
    let mut dual_cone = 0.0f64;
    let mut dual_residual = 0.0f64;
    let mut complementarity = 0.0;
    for ((kind, s), x) in p.blocks.iter().zip(&slacks).zip(&sol.primal) {
        match (kind, s, x) {
            (BlockKind::Psd(_), Acc::Sym(s), BlockValue::Symmetric(x)) => {
                let sx = s.clone().symmetric_eigen().eigenvalues.min();
                let xx = x.clone().symmetric_eigen().eigenvalues.min();
                dual_cone = dual_cone.max(-sx);
                primal_cone = primal_cone.max(-xx);
                complementarity += s.dot(x);
            }
            (BlockKind::Hermitian(_), Acc::Herm(s), BlockValue::Hermitian(x)) => {
                dual_cone = dual_cone.max(-min_eigenvalue(s));
                primal_cone = primal_cone.max(-min_eigenvalue(x));
                complementarity += s.inner(x);
            }
            (BlockKind::Nonneg, Acc::Scalar(s), BlockValue::Scalar(x)) => {
                dual_cone = dual_cone.max(-s);
                primal_cone = primal_cone.max(-x);
                complementarity += s * x;
            }
            (BlockKind::Free, Acc::Scalar(s), BlockValue::Scalar(_)) => {
                dual_residual = dual_residual.max(s.abs());
            }
            _ => {
                primal_cone = f64::INFINITY;
            }
        }
    }
    let scale = 1.0 + coef_norm;
    CertificateReport {
        primal_residual,
        primal_cone_violation: primal_cone.max(0.0),
        dual_residual: dual_residual / scale,
        dual_cone_violation: dual_cone.max(0.0) / scale,
        gap: (primal_obj - dual_obj).abs(),
        complementarity,
        value_mismatch: (primal_obj - sol.value).abs(),
    }
}
