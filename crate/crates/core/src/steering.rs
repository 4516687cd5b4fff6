//! Bipartite steering: assemblages, functionals, ideal and post-selected
//! local-hidden-state bounds, and the dual program.
//!
//! Members and operators are indexed `[x][a]` with `x` 0-based and `a` the
//! outcome label (`0` no-click, `1..=outcomes` conclusive).

use log::warn;

use crate::conic::{
    hermitian_basis, BlockId, BlockKind, Coefficient, ConicProgram, ConicSolution, LinearForm,
    Sense, SolveOptions, Status,
};
use crate::error::{Error, Result};
use crate::hermitian::{is_psd, max_eigenvalue, HermitianMatrix, PSD_TOL};
use crate::strategy::{enumerate, DeterministicStrategy, NO_CLICK};

/// Efficiencies below this trigger a conditioning warning.
pub const SMALL_ETA: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq)]
pub struct Assemblage {
    d: usize,
    outcomes: usize,
    includes_no_click: bool,
    /// `members[x][a]`, `a ∈ 0..=outcomes`; slot 0 is zero when no-clicks
    /// are not part of the assemblage.
    members: Vec<Vec<HermitianMatrix>>,
}

impl Assemblage {
    /// `members[x]` has length `outcomes + 1` when `includes_no_click`,
    /// otherwise `outcomes` (conclusive outcomes only).
    pub fn new(members: Vec<Vec<HermitianMatrix>>, includes_no_click: bool) -> Result<Self> {
        let first = members
            .first()
            .and_then(|row| row.first())
            .ok_or_else(|| Error::Invalid("empty assemblage".into()))?;
        let d = first.dim();
        let width = members[0].len();
        let outcomes = if includes_no_click { width - 1 } else { width };
        if outcomes == 0 {
            return Err(Error::Invalid("assemblage needs a conclusive outcome".into()));
        }
        let mut rows = Vec::with_capacity(members.len());
        for (x, row) in members.into_iter().enumerate() {
            if row.len() != width {
                return Err(Error::Dimension(format!("setting {x} has {} members, expected {width}", row.len())));
            }
            for (k, s) in row.iter().enumerate() {
                if s.dim() != d {
                    return Err(Error::Dimension(format!("member ({k},{x}) is {}x{0}, expected {d}", s.dim())));
                }
                if !is_psd(s, PSD_TOL) {
                    return Err(Error::Invalid(format!("member ({k},{x}) is not PSD")));
                }
            }
            let row = if includes_no_click {
                row
            } else {
                std::iter::once(HermitianMatrix::zeros(d)).chain(row).collect()
            };
            rows.push(row);
        }
        Ok(Self { d, outcomes, includes_no_click, members: rows })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn settings(&self) -> usize {
        self.members.len()
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    pub fn includes_no_click(&self) -> bool {
        self.includes_no_click
    }

    pub fn member(&self, a: usize, x: usize) -> &HermitianMatrix {
        &self.members[x][a]
    }

    pub fn members(&self) -> &[Vec<HermitianMatrix>] {
        &self.members
    }

    /// Σ_a σ_{a|x} over all outcomes (including no-click).
    pub fn total(&self, x: usize) -> HermitianMatrix {
        self.members[x]
            .iter()
            .fold(HermitianMatrix::zeros(self.d), |acc, s| acc.add(s))
    }

    /// tr Σ_{a≠0} σ_{a|x}.
    pub fn conclusive_trace(&self, x: usize) -> f64 {
        self.members[x][1..].iter().map(HermitianMatrix::trace).sum()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SteeringFunctional {
    d: usize,
    outcomes: usize,
    /// `operators[x][a - 1]` for conclusive outcomes.
    operators: Vec<Vec<HermitianMatrix>>,
    pub offset: f64,
}

impl SteeringFunctional {
    pub fn new(operators: Vec<Vec<HermitianMatrix>>, offset: f64) -> Result<Self> {
        let first = operators
            .first()
            .and_then(|row| row.first())
            .ok_or_else(|| Error::Invalid("empty functional".into()))?;
        let d = first.dim();
        let outcomes = operators[0].len();
        for row in &operators {
            if row.len() != outcomes || row.iter().any(|f| f.dim() != d) {
                return Err(Error::Dimension("ragged functional".into()));
            }
        }
        if !offset.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(Self { d, outcomes, operators, offset })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn settings(&self) -> usize {
        self.operators.len()
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    /// F_{a|x} for `a ∈ 1..=outcomes`.
    pub fn operator(&self, a: usize, x: usize) -> &HermitianMatrix {
        &self.operators[x][a - 1]
    }

    /// Σ_{x: λ(x)≠0} F_{λ(x)|x} · w_x.
    fn strategy_operator(&self, s: &DeterministicStrategy, weights: &[f64]) -> HermitianMatrix {
        let mut g = HermitianMatrix::zeros(self.d);
        for (x, &a) in s.outcomes().iter().enumerate() {
            if a != NO_CLICK {
                g = g.add_scaled(weights[x], self.operator(a, x));
            }
        }
        g
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EfficiencyProfile {
    etas: Vec<f64>,
}

impl EfficiencyProfile {
    pub fn new(etas: Vec<f64>) -> Result<Self> {
        if etas.is_empty() {
            return Err(Error::Efficiency("empty profile".into()));
        }
        if let Some(e) = etas.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return Err(Error::Efficiency(format!("{e} outside [0, 1]")));
        }
        Ok(Self { etas })
    }

    pub fn uniform(m: usize, eta: f64) -> Result<Self> {
        Self::new(vec![eta; m])
    }

    pub fn etas(&self) -> &[f64] {
        &self.etas
    }

    pub fn mean(&self) -> f64 {
        self.etas.iter().sum::<f64>() / self.etas.len() as f64
    }

    /// Rejects zero efficiencies, for which post-selection is undefined.
    pub fn check_post_selectable(&self) -> Result<()> {
        for (x, &e) in self.etas.iter().enumerate() {
            if e <= 0.0 {
                return Err(Error::Efficiency(format!("eta_{x} = 0, post-selection undefined")));
            }
            if e < SMALL_ETA {
                warn!("eta_{x} = {e:e} is tiny; the program is badly conditioned");
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DualCertificate {
    pub mu: f64,
    pub nus: Vec<f64>,
    pub value: f64,
}

impl DualCertificate {
    /// min over a-priori strategies λ of the smallest eigenvalue of
    /// μ𝟙 + Σ_x ν_x D⁰_λ(0|x)𝟙 − Σ_{x: λ(x)≠0} F_{λ(x)|x}/η_x.
    pub fn min_slack(&self, f: &SteeringFunctional, eta: &EfficiencyProfile) -> Result<f64> {
        let inv: Vec<f64> = eta.etas().iter().map(|e| 1.0 / e).collect();
        let mut worst = f64::INFINITY;
        for s in enumerate(f.settings(), f.outcomes(), true)? {
            let shift = self.mu
                + (0..f.settings())
                    .filter(|&x| !s.clicks(x))
                    .map(|x| self.nus[x])
                    .sum::<f64>();
            let g = f.strategy_operator(&s, &inv);
            worst = worst.min(shift - max_eigenvalue(&g));
        }
        Ok(worst)
    }

    /// μ + Σ_x ν_x (1 − η_x).
    pub fn objective(&self, eta: &EfficiencyProfile) -> f64 {
        self.mu + self.nus.iter().zip(eta.etas()).map(|(n, e)| n * (1.0 - e)).sum::<f64>()
    }
}

fn check_compatible(f: &SteeringFunctional, a: &Assemblage) -> Result<()> {
    if f.dim() != a.dim() || f.settings() != a.settings() || f.outcomes() != a.outcomes() {
        return Err(Error::Dimension(format!(
            "functional (d={}, m={}, k={}) vs assemblage (d={}, m={}, k={})",
            f.dim(),
            f.settings(),
            f.outcomes(),
            a.dim(),
            a.settings(),
            a.outcomes()
        )));
    }
    Ok(())
}

/// offset + Σ_{a≠0,x} tr F_{a|x} σ_{a|x}.
pub fn evaluate(f: &SteeringFunctional, a: &Assemblage) -> Result<f64> {
    check_compatible(f, a)?;
    let mut v = f.offset;
    for x in 0..f.settings() {
        for k in 1..=f.outcomes() {
            v += f.operator(k, x).inner(a.member(k, x));
        }
    }
    Ok(v)
}

fn require_optimal(sol: ConicSolution) -> Result<ConicSolution> {
    match sol.status {
        Status::Optimal => Ok(sol),
        s => Err(Error::Solver(format!("steering program ended with status {}", s.as_str()))),
    }
}

/// Ideal LHS bound: one d×d PSD block per deterministic strategy, in
/// enumeration order, with unit total trace. Returns the value and the
/// optimal hidden states.
pub fn lhs_bound(f: &SteeringFunctional, opts: &SolveOptions) -> Result<(f64, Vec<HermitianMatrix>)> {
    let strategies = enumerate(f.settings(), f.outcomes(), false)?;
    let ones = vec![1.0; f.settings()];
    let mut p = ConicProgram::new(Sense::Maximize);
    p.objective_offset = f.offset;
    let mut total = LinearForm::new();
    for s in &strategies {
        let b = p.add_block(BlockKind::Hermitian(f.dim()));
        p.add_objective(b, Coefficient::Hermitian(f.strategy_operator(s, &ones)));
        total.push(b, Coefficient::Hermitian(HermitianMatrix::identity(f.dim())));
    }
    p.add_equality(total, 1.0);
    let sol = require_optimal(p.solve(opts)?)?;
    let states = sol
        .primal
        .iter()
        .map(|v| v.as_hermitian().cloned().unwrap_or_else(|| HermitianMatrix::zeros(f.dim())))
        .collect();
    Ok((sol.value, states))
}

/// Ideal LHS bound by enumeration: max_λ λ_max(Σ_x F_{λ(x)|x}) + offset.
pub fn lhs_bound_enumerated(f: &SteeringFunctional) -> Result<f64> {
    let ones = vec![1.0; f.settings()];
    let best = enumerate(f.settings(), f.outcomes(), false)?
        .iter()
        .map(|s| max_eigenvalue(&f.strategy_operator(s, &ones)))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(best + f.offset)
}

fn check_profile(f: &SteeringFunctional, eta: &EfficiencyProfile) -> Result<()> {
    if eta.etas().len() != f.settings() {
        return Err(Error::Dimension(format!(
            "{} efficiencies for {} settings",
            eta.etas().len(),
            f.settings()
        )));
    }
    eta.check_post_selectable()
}

/// Builds the post-selected LHS program. Blocks follow the a-priori
/// strategy enumeration order.
pub fn ps_lhs_program(f: &SteeringFunctional, eta: &EfficiencyProfile) -> Result<(ConicProgram, Vec<DeterministicStrategy>)> {
    check_profile(f, eta)?;
    let m = f.settings();
    let d = f.dim();
    let strategies = enumerate(m, f.outcomes(), true)?;
    let inv: Vec<f64> = eta.etas().iter().map(|e| 1.0 / e).collect();
    let id = HermitianMatrix::identity(d);
    let mut p = ConicProgram::new(Sense::Maximize);
    p.objective_offset = f.offset;
    let mut total = LinearForm::new();
    let mut no_click: Vec<LinearForm> = vec![LinearForm::new(); m];
    for s in &strategies {
        let b = p.add_block(BlockKind::Hermitian(d));
        let g = f.strategy_operator(s, &inv);
        if g.matrix().max_abs() > 0.0 {
            p.add_objective(b, Coefficient::Hermitian(g));
        }
        total.push(b, Coefficient::Hermitian(id.clone()));
        for (x, form) in no_click.iter_mut().enumerate() {
            if !s.clicks(x) {
                form.push(b, Coefficient::Hermitian(id.clone()));
            }
        }
    }
    p.add_equality(total, 1.0);
    for (x, form) in no_click.into_iter().enumerate() {
        p.add_equality(form, 1.0 - eta.etas()[x]);
    }
    Ok((p, strategies))
}

/// Post-selected LHS bound β_ps(F, η).
pub fn ps_lhs_bound(f: &SteeringFunctional, eta: &EfficiencyProfile, opts: &SolveOptions) -> Result<(f64, ConicSolution)> {
    let (p, _) = ps_lhs_program(f, eta)?;
    let sol = p.solve(opts)?;
    if sol.status == Status::Infeasible {
        return Err(Error::Solver("post-selected steering program reported infeasible".into()));
    }
    let sol = require_optimal(sol)?;
    Ok((sol.value, sol))
}

/// Explicit dual: minimise μ + Σ_x ν_x(1−η_x) subject to
/// μ𝟙 + Σ_x ν_x D⁰_λ(0|x)𝟙 − Σ_{x} F_{λ(x)|x}/η_x ⪰ 0 for every a-priori λ,
/// with μ and ν free. The slack R_λ is a Hermitian block tied to the
/// constraint entrywise.
pub fn ps_lhs_dual_program(f: &SteeringFunctional, eta: &EfficiencyProfile) -> Result<ConicProgram> {
    check_profile(f, eta)?;
    let m = f.settings();
    let d = f.dim();
    let inv: Vec<f64> = eta.etas().iter().map(|e| 1.0 / e).collect();
    let mut p = ConicProgram::new(Sense::Minimize);
    p.objective_offset = f.offset;
    let mu = p.add_block(BlockKind::Free);
    p.add_objective(mu, Coefficient::Scalar(1.0));
    let nus: Vec<BlockId> = (0..m).map(|_| p.add_block(BlockKind::Free)).collect();
    for (x, &nu) in nus.iter().enumerate() {
        let c = 1.0 - eta.etas()[x];
        if c != 0.0 {
            p.add_objective(nu, Coefficient::Scalar(c));
        }
    }
    let basis = hermitian_basis(d);
    for s in enumerate(m, f.outcomes(), true)? {
        let r = p.add_block(BlockKind::Hermitian(d));
        let g = f.strategy_operator(&s, &inv);
        // R_λ − μ𝟙 − Σ ν_x D(0|x)𝟙 = −G_λ, one row per basis element
        for e in &basis {
            let tr_e = e.trace();
            let mut form = LinearForm::new().with(r, Coefficient::Hermitian(e.clone()));
            if tr_e != 0.0 {
                form.push(mu, Coefficient::Scalar(-tr_e));
                for (x, &nu) in nus.iter().enumerate() {
                    if !s.clicks(x) {
                        form.push(nu, Coefficient::Scalar(-tr_e));
                    }
                }
            }
            p.add_equality(form, -e.inner(&g));
        }
    }
    Ok(p)
}

pub fn ps_lhs_bound_dual(
    f: &SteeringFunctional,
    eta: &EfficiencyProfile,
    opts: &SolveOptions,
) -> Result<(f64, DualCertificate)> {
    let p = ps_lhs_dual_program(f, eta)?;
    let sol = require_optimal(p.solve(opts)?)?;
    let scalar = |k: usize| sol.primal[k].as_scalar().unwrap_or(0.0);
    let cert = DualCertificate {
        mu: scalar(0),
        nus: (1..=f.settings()).map(scalar).collect(),
        value: sol.value,
    };
    Ok((sol.value, cert))
}

/// Feasibility of a post-selected assemblage with respect to the
/// post-selected LHS set at efficiencies `eta`: searches for σ⁰_λ ⪰ 0 with
/// Σ_λ D⁰_λ(a|x)σ⁰_λ = η_x σ^ps_{a|x} for a ≠ 0 and unit total trace.
pub fn ps_lhs_membership(ps: &Assemblage, eta: &EfficiencyProfile, opts: &SolveOptions) -> Result<ConicSolution> {
    let m = ps.settings();
    if eta.etas().len() != m {
        return Err(Error::Dimension("efficiency profile length".into()));
    }
    eta.check_post_selectable()?;
    let d = ps.dim();
    let strategies = enumerate(m, ps.outcomes(), true)?;
    let mut p = ConicProgram::new(Sense::Maximize);
    let blocks: Vec<BlockId> = strategies.iter().map(|_| p.add_block(BlockKind::Hermitian(d))).collect();
    let mut total = LinearForm::new();
    for &b in &blocks {
        total.push(b, Coefficient::Hermitian(HermitianMatrix::identity(d)));
    }
    p.add_equality(total, 1.0);
    for x in 0..m {
        for a in 1..=ps.outcomes() {
            let lhs: Vec<(BlockId, f64)> = strategies
                .iter()
                .zip(&blocks)
                .filter(|(s, _)| s.outcomes()[x] == a)
                .map(|(_, &b)| (b, 1.0))
                .collect();
            p.add_hermitian_equality(&lhs, &ps.member(a, x).scale(eta.etas()[x]));
        }
    }
    p.solve(opts)
}

/// F_{a|x} = η_x Π_{a|x}, `projectors[x][a - 1]`.
pub fn projective_functional(projectors: &[Vec<HermitianMatrix>], eta: &EfficiencyProfile) -> Result<SteeringFunctional> {
    check_projectors(projectors)?;
    if eta.etas().len() != projectors.len() {
        return Err(Error::Dimension("efficiency profile length".into()));
    }
    let ops = projectors
        .iter()
        .zip(eta.etas())
        .map(|(row, &e)| row.iter().map(|p| p.scale(e)).collect())
        .collect();
    SteeringFunctional::new(ops, 0.0)
}

fn check_projectors(projectors: &[Vec<HermitianMatrix>]) -> Result<()> {
    for (x, row) in projectors.iter().enumerate() {
        for (k, p) in row.iter().enumerate() {
            let sq = p.matrix() * p.matrix();
            if (&sq - p.matrix()).max_abs() > 1e-9 || (p.trace() - 1.0).abs() > 1e-9 {
                return Err(Error::Projector(format!("element {} of setting {x} is not a rank-1 projector", k + 1)));
            }
        }
    }
    for x in 0..projectors.len() {
        for y in (x + 1)..projectors.len() {
            for p in &projectors[x] {
                for q in &projectors[y] {
                    if p.inner(q) > 1.0 - 1e-9 {
                        return Err(Error::Projector(format!("settings {x} and {y} share a projector")));
                    }
                }
            }
        }
    }
    Ok(())
}

/// max over pairs from distinct measurements of √tr[Π Π′].
pub fn cos_theta(projectors: &[Vec<HermitianMatrix>]) -> Result<f64> {
    if projectors.len() < 2 {
        return Err(Error::Invalid("cos theta needs at least two measurements".into()));
    }
    let mut best = 0.0f64;
    for x in 0..projectors.len() {
        for y in (x + 1)..projectors.len() {
            for p in &projectors[x] {
                for q in &projectors[y] {
                    best = best.max(p.inner(q).max(0.0).sqrt());
                }
            }
        }
    }
    Ok(best)
}

/// (1 − cosθ) + m⟨η⟩cosθ.
pub fn analytic_upper_bound(m: usize, cos_theta: f64, mean_eta: f64) -> f64 {
    (1.0 - cos_theta) + m as f64 * mean_eta * cos_theta
}

/// Smallest mean efficiency at which the isotropic-state assemblage can
/// violate the projective inequality: (1/m)(1−cosθ)/(w+(1−w)/d−cosθ).
pub fn critical_mean_eta(m: usize, cos_theta: f64, w: f64, d: usize) -> Result<f64> {
    let denom = w + (1.0 - w) / d as f64 - cos_theta;
    if denom <= 0.0 {
        return Err(Error::NoViolationRegime(denom));
    }
    Ok((1.0 - cos_theta) / denom / m as f64)
}
