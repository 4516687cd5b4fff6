//! Small equality-constrained conic programs over products of PSD cones,
//! nonnegative scalars and free scalars.
//!
//! A [`ConicProgram`] is assembled block by block. Complex Hermitian blocks
//! are handled by real embedding (see [`embed`]); coefficients on those
//! blocks are halved internally so that every reported value matches the
//! complex formulation.

mod certificate;
pub mod embed;
mod ipm;
pub mod simplex;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hermitian::HermitianMatrix;

pub use certificate::{verify_certificate, CertificateReport};
pub use embed::embed_hermitian;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Sense {
    Maximize,
    Minimize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockKind {
    /// Real symmetric n×n matrix constrained PSD.
    Psd(usize),
    /// Complex Hermitian n×n matrix constrained PSD.
    Hermitian(usize),
    /// Scalar constrained nonnegative.
    Nonneg,
    /// Unconstrained scalar.
    Free,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BlockId(pub usize);

#[derive(Clone, Debug, PartialEq)]
pub enum Coefficient {
    Symmetric(DMatrix<f64>),
    Hermitian(HermitianMatrix),
    Scalar(f64),
}

/// A linear functional Σ_k ⟨C_k, X_k⟩ over program blocks.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LinearForm {
    pub terms: Vec<(BlockId, Coefficient)>,
}

impl LinearForm {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, block: BlockId, c: Coefficient) -> Self {
        self.terms.push((block, c));
        self
    }

    pub fn push(&mut self, block: BlockId, c: Coefficient) {
        self.terms.push((block, c));
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Equality {
    pub form: LinearForm,
    pub rhs: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConicProgram {
    pub sense: Sense,
    pub blocks: Vec<BlockKind>,
    pub objective: LinearForm,
    /// Constant added to the objective value.
    pub objective_offset: f64,
    pub equalities: Vec<Equality>,
}

impl ConicProgram {
    pub fn new(sense: Sense) -> Self {
        Self {
            sense,
            blocks: Vec::new(),
            objective: LinearForm::new(),
            objective_offset: 0.0,
            equalities: Vec::new(),
        }
    }

    pub fn add_block(&mut self, kind: BlockKind) -> BlockId {
        self.blocks.push(kind);
        BlockId(self.blocks.len() - 1)
    }

    pub fn add_objective(&mut self, block: BlockId, c: Coefficient) {
        self.objective.push(block, c);
    }

    pub fn add_equality(&mut self, form: LinearForm, rhs: f64) {
        self.equalities.push(Equality { form, rhs });
    }

    /// Adds d² real equalities forcing Σ_k tr-weighted terms to equal a
    /// Hermitian target: for each element E of a Hermitian basis,
    /// Σ_k ⟨E, coeff_k · X_k⟩ = ⟨E, target⟩.
    pub fn add_hermitian_equality(&mut self, lhs: &[(BlockId, f64)], target: &HermitianMatrix) {
        for e in hermitian_basis(target.dim()) {
            let mut form = LinearForm::new();
            for &(b, s) in lhs {
                form.push(b, Coefficient::Hermitian(e.scale(s)));
            }
            self.add_equality(form, e.inner(target));
        }
    }

    /// Checks that every term references a declared block with a
    /// coefficient of matching shape.
    pub fn validate(&self) -> Result<()> {
        if self.blocks.is_empty() {
            return Err(Error::Program("program has no blocks".into()));
        }
        for (k, b) in self.blocks.iter().enumerate() {
            if let BlockKind::Psd(0) | BlockKind::Hermitian(0) = b {
                return Err(Error::Program(format!("block {k} has size zero")));
            }
        }
        let forms = std::iter::once(&self.objective).chain(self.equalities.iter().map(|e| &e.form));
        for form in forms {
            for (id, c) in &form.terms {
                let kind = self
                    .blocks
                    .get(id.0)
                    .ok_or_else(|| Error::Program(format!("undeclared block {}", id.0)))?;
                check_coefficient(*kind, c)?;
            }
        }
        if self.equalities.iter().any(|e| !e.rhs.is_finite()) {
            return Err(Error::Program("non-finite right-hand side".into()));
        }
        Ok(())
    }

    pub fn solve(&self, opts: &SolveOptions) -> Result<ConicSolution> {
        self.validate()?;
        ipm::solve(self, opts)
    }
}

fn check_coefficient(kind: BlockKind, c: &Coefficient) -> Result<()> {
    let ok = match (kind, c) {
        (BlockKind::Psd(n), Coefficient::Symmetric(m)) => {
            m.nrows() == n
                && m.ncols() == n
                && (m - m.transpose()).amax() <= 1e-12 * (1.0 + m.amax())
                && m.iter().all(|v| v.is_finite())
        }
        (BlockKind::Hermitian(n), Coefficient::Hermitian(h)) => h.dim() == n,
        (BlockKind::Nonneg | BlockKind::Free, Coefficient::Scalar(v)) => v.is_finite(),
        _ => false,
    };
    if ok {
        Ok(())
    } else {
        Err(Error::Program(format!(
            "coefficient does not match block kind {kind:?}"
        )))
    }
}

/// Orthonormal basis of d×d Hermitian matrices under tr(AB).
pub fn hermitian_basis(d: usize) -> Vec<HermitianMatrix> {
    use crate::hermitian::{CMatrix, C64};
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut out = Vec::with_capacity(d * d);
    for i in 0..d {
        let mut m = CMatrix::zeros(d, d);
        m.set(i, i, C64::new(1.0, 0.0));
        out.push(HermitianMatrix::symmetrize(&m));
    }
    for i in 0..d {
        for j in (i + 1)..d {
            let mut re = CMatrix::zeros(d, d);
            re.set(i, j, C64::new(s, 0.0));
            re.set(j, i, C64::new(s, 0.0));
            out.push(HermitianMatrix::symmetrize(&re));
            let mut im = CMatrix::zeros(d, d);
            im.set(i, j, C64::new(0.0, -s));
            im.set(j, i, C64::new(0.0, s));
            out.push(HermitianMatrix::symmetrize(&im));
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    pub tol: f64,
    pub max_iters: usize,
    /// Normalised ray threshold for declaring infeasibility or unboundedness.
    pub infeasibility_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iters: 200,
            infeasibility_tol: 1e-8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Status {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIterations,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Optimal => "optimal",
            Status::Infeasible => "infeasible",
            Status::Unbounded => "unbounded",
            Status::MaxIterations => "max-iterations",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum BlockValue {
    Symmetric(DMatrix<f64>),
    Hermitian(HermitianMatrix),
    Scalar(f64),
}

impl BlockValue {
    pub fn as_hermitian(&self) -> Option<&HermitianMatrix> {
        match self {
            BlockValue::Hermitian(h) => Some(h),
            _ => None,
        }
    }

    pub fn as_scalar(&self) -> Option<f64> {
        match self {
            BlockValue::Scalar(v) => Some(*v),
            _ => None,
        }
    }

    /// Trace for matrix blocks, the value itself for scalars.
    pub fn trace(&self) -> f64 {
        match self {
            BlockValue::Symmetric(m) => m.trace(),
            BlockValue::Hermitian(h) => h.trace(),
            BlockValue::Scalar(v) => *v,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConicSolution {
    pub status: Status,
    /// Primal objective value, including the offset.
    pub value: f64,
    /// Dual objective value, including the offset.
    pub dual_value: f64,
    pub primal: Vec<BlockValue>,
    /// Equality multipliers, signed so that `dual_value = offset + Σ rhs_i·dual_i`.
    pub dual: Vec<f64>,
    /// Dual slack per block (PSD/nonneg at optimality, zero for free blocks).
    pub slack: Vec<BlockValue>,
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
    /// Normalised Farkas ray for infeasible/unbounded outcomes.
    pub ray: Option<DVector<f64>>,
}

impl ConicSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == Status::Optimal
    }
}
