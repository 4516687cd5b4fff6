//! Bell scenarios: local and post-selected local bounds as linear programs,
//! tilted CHSH functionals and their quantum values.

use log::warn;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::conic::simplex::{maximize, LpOutcome};
use crate::conic::{BlockKind, Coefficient, ConicProgram, ConicSolution, LinearForm, Sense, SolveOptions, Status};
use crate::error::{Error, Result};
use crate::hermitian::kron;
use crate::multipartite::{sign, EfficiencyProfile2, TermSpec};
use crate::scenario::{two_qubit_pure, MeasurementSet, QuantumState};
use crate::strategy::{enumerate_products, ProductStrategy};

/// P(ab|xy) with outcomes `0..=outcomes` (0 is the no-click, zero for
/// ideal behaviours).
#[derive(Clone, Debug, PartialEq)]
pub struct Behaviour {
    m: usize,
    outcomes: usize,
    p: Vec<f64>,
}

impl Behaviour {
    fn index(&self, a: usize, b: usize, x: usize, y: usize) -> usize {
        let k = self.outcomes + 1;
        ((x * self.m + y) * k + a) * k + b
    }

    pub fn from_fn(m: usize, outcomes: usize, mut f: impl FnMut(usize, usize, usize, usize) -> f64) -> Result<Self> {
        let k = outcomes + 1;
        let mut p = vec![0.0; m * m * k * k];
        let mut out = Self { m, outcomes, p: Vec::new() };
        for x in 0..m {
            for y in 0..m {
                for a in 0..k {
                    for b in 0..k {
                        let v = f(a, b, x, y);
                        if !v.is_finite() || v < -1e-12 {
                            return Err(Error::Invalid(format!("P({a}{b}|{x}{y}) = {v}")));
                        }
                        p[((x * m + y) * k + a) * k + b] = v.max(0.0);
                    }
                }
            }
        }
        out.p = p;
        Ok(out)
    }

    pub fn settings(&self) -> usize {
        self.m
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    pub fn prob(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.p[self.index(a, b, x, y)]
    }

    /// Σ_{a≠0, b≠0} P(ab|xy).
    pub fn conclusive(&self, x: usize, y: usize) -> f64 {
        let mut s = 0.0;
        for a in 1..=self.outcomes {
            for b in 1..=self.outcomes {
                s += self.prob(a, b, x, y);
            }
        }
        s
    }
}

/// Coefficients I_{abxy} on conclusive outcomes plus a constant.
#[derive(Clone, Debug, PartialEq)]
pub struct BellFunctional {
    m: usize,
    outcomes: usize,
    coeffs: Vec<f64>,
    pub offset: f64,
}

impl BellFunctional {
    pub fn zeros(m: usize, outcomes: usize, offset: f64) -> Self {
        Self { m, outcomes, coeffs: vec![0.0; m * m * outcomes * outcomes], offset }
    }

    fn index(&self, a: usize, b: usize, x: usize, y: usize) -> usize {
        ((x * self.m + y) * self.outcomes + (a - 1)) * self.outcomes + (b - 1)
    }

    pub fn settings(&self) -> usize {
        self.m
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    pub fn coefficient(&self, a: usize, b: usize, x: usize, y: usize) -> f64 {
        self.coeffs[self.index(a, b, x, y)]
    }

    pub fn set(&mut self, a: usize, b: usize, x: usize, y: usize, v: f64) -> Result<()> {
        if !v.is_finite() {
            return Err(Error::NonFinite);
        }
        let i = self.index(a, b, x, y);
        self.coeffs[i] = v;
        Ok(())
    }

    /// Σ_{x,y: both click} I_{λA(x)λB(y)xy} · w_{xy}.
    fn strategy_value(&self, s: &ProductStrategy, w: &[Vec<f64>]) -> f64 {
        let mut v = 0.0;
        for x in 0..self.m {
            let a = s.alice.outcomes()[x];
            if a == 0 {
                continue;
            }
            for y in 0..self.m {
                let b = s.bob.outcomes()[y];
                if b != 0 {
                    v += w[x][y] * self.coefficient(a, b, x, y);
                }
            }
        }
        v
    }
}

/// Two-outcome correlator terms; an absent party is averaged over its
/// settings, a term with no party is the constant.
pub fn compile_bell_terms(terms: &[TermSpec], m: usize) -> Result<BellFunctional> {
    let mut f = BellFunctional::zeros(m, 2, 0.0);
    for t in terms {
        if t.charlie.as_deref().is_some_and(|c| c != "I") {
            return Err(Error::Invalid("Bell terms cannot carry a third-party operator".into()));
        }
        if t.alice.is_some_and(|x| x >= m) || t.bob.is_some_and(|y| y >= m) {
            return Err(Error::OutOfRange(format!("setting in term {t:?} exceeds {m}")));
        }
        if t.alice.is_none() && t.bob.is_none() {
            f.offset += t.coefficient;
            continue;
        }
        let xs: Vec<usize> = t.alice.map_or_else(|| (0..m).collect(), |x| vec![x]);
        let ys: Vec<usize> = t.bob.map_or_else(|| (0..m).collect(), |y| vec![y]);
        let spread = (xs.len() * ys.len()) as f64;
        for &x in &xs {
            for &y in &ys {
                for a in 1..=2 {
                    for b in 1..=2 {
                        let sa = if t.alice.is_some() { sign(a) } else { 1.0 };
                        let sb = if t.bob.is_some() { sign(b) } else { 1.0 };
                        let i = f.index(a, b, x, y);
                        f.coeffs[i] += t.coefficient * sa * sb / spread;
                    }
                }
            }
        }
    }
    Ok(f)
}

/// I_α = α⟨A₁B₁ + A₂B₁⟩ + ⟨A₁B₂ − A₂B₂⟩ with settings 0 and 1 standing for
/// the first and second measurement of each party.
pub fn tilted_chsh(alpha: f64) -> BellFunctional {
    if !(1.0..=1.5).contains(&alpha) {
        warn!("tilted CHSH with alpha = {alpha} outside [1, 1.5]");
    }
    let c = [[alpha, 1.0], [alpha, -1.0]];
    let mut f = BellFunctional::zeros(2, 2, 0.0);
    for x in 0..2 {
        for y in 0..2 {
            for a in 1..=2 {
                for b in 1..=2 {
                    let i = f.index(a, b, x, y);
                    f.coeffs[i] = c[x][y] * sign(a) * sign(b);
                }
            }
        }
    }
    f
}

/// offset + Σ I_{abxy} P(ab|xy) over conclusive outcomes.
pub fn evaluate(f: &BellFunctional, p: &Behaviour) -> Result<f64> {
    if f.settings() != p.settings() || f.outcomes() != p.outcomes() {
        return Err(Error::Dimension("functional and behaviour shapes differ".into()));
    }
    let mut v = f.offset;
    for x in 0..f.m {
        for y in 0..f.m {
            for a in 1..=f.outcomes {
                for b in 1..=f.outcomes {
                    v += f.coefficient(a, b, x, y) * p.prob(a, b, x, y);
                }
            }
        }
    }
    Ok(v)
}

/// Local bound by enumeration of deterministic product strategies.
pub fn lhv_bound(f: &BellFunctional) -> Result<f64> {
    let ones = vec![vec![1.0; f.m]; f.m];
    let best = enumerate_products(f.m, f.outcomes, false)?
        .iter()
        .map(|s| f.strategy_value(s, &ones))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(best + f.offset)
}

/// The same bound as a scalar conic program over strategy weights.
pub fn lhv_bound_conic(f: &BellFunctional, opts: &SolveOptions) -> Result<f64> {
    let ones = vec![vec![1.0; f.m]; f.m];
    let mut p = ConicProgram::new(Sense::Maximize);
    p.objective_offset = f.offset;
    let mut total = LinearForm::new();
    for s in enumerate_products(f.m, f.outcomes, false)? {
        let q = p.add_block(BlockKind::Nonneg);
        p.add_objective(q, Coefficient::Scalar(f.strategy_value(&s, &ones)));
        total.push(q, Coefficient::Scalar(1.0));
    }
    p.add_equality(total, 1.0);
    let sol = p.solve(opts)?;
    if sol.status != Status::Optimal {
        return Err(Error::Solver(format!("local LP ended with status {}", sol.status.as_str())));
    }
    Ok(sol.value)
}

/// Constraint data of the post-selected local polytope: rows are the
/// normalisation, the m² joint efficiencies, then Alice's and Bob's
/// marginal efficiencies; columns follow the a-priori product-strategy
/// order.
#[derive(Clone, Debug)]
pub struct PsLhvData {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub c: DVector<f64>,
    pub strategies: Vec<ProductStrategy>,
}

pub fn ps_lhv_data(f: &BellFunctional, eta: &EfficiencyProfile2) -> Result<PsLhvData> {
    let m = f.m;
    if eta.settings() != m {
        return Err(Error::Dimension("efficiency profile size".into()));
    }
    if eta.eta_ab.iter().flatten().any(|&e| e <= 0.0) {
        return Err(Error::Efficiency("joint efficiency 0, post-selection undefined".into()));
    }
    let strategies = enumerate_products(m, f.outcomes, true)?;
    let n = strategies.len();
    let rows = 1 + m * m + 2 * m;
    let inv: Vec<Vec<f64>> = eta.eta_ab.iter().map(|r| r.iter().map(|e| 1.0 / e).collect()).collect();
    let mut a = DMatrix::zeros(rows, n);
    let mut c = DVector::zeros(n);
    for (j, s) in strategies.iter().enumerate() {
        a[(0, j)] = 1.0;
        for x in 0..m {
            for y in 0..m {
                if s.alice.clicks(x) && s.bob.clicks(y) {
                    a[(1 + x * m + y, j)] = 1.0;
                }
            }
            if s.alice.clicks(x) {
                a[(1 + m * m + x, j)] = 1.0;
            }
            if s.bob.clicks(x) {
                a[(1 + m * m + m + x, j)] = 1.0;
            }
        }
        c[j] = f.strategy_value(s, &inv);
    }
    let mut b = DVector::zeros(rows);
    b[0] = 1.0;
    for x in 0..m {
        for y in 0..m {
            b[1 + x * m + y] = eta.eta_ab[x][y];
        }
        b[1 + m * m + x] = eta.eta_a[x];
        b[1 + m * m + m + x] = eta.eta_b[x];
    }
    Ok(PsLhvData { a, b, c, strategies })
}

#[derive(Clone, Debug)]
pub struct PsLhvResult {
    /// Value from the interior-point solve.
    pub value: f64,
    /// Value from the exact simplex solve.
    pub simplex_value: f64,
    pub solution: ConicSolution,
}

/// Post-selected local bound, solved by the conic machinery and
/// cross-checked by simplex. Inconsistent efficiency triples yield
/// [`Error::InconsistentEfficiencies`].
pub fn ps_lhv_bound(f: &BellFunctional, eta: &EfficiencyProfile2, opts: &SolveOptions) -> Result<PsLhvResult> {
    let data = ps_lhv_data(f, eta)?;
    let simplex_value = match maximize(&data.a, &data.b, &data.c) {
        LpOutcome::Optimal { value, .. } => value + f.offset,
        LpOutcome::Infeasible => return Err(Error::InconsistentEfficiencies),
        LpOutcome::Unbounded => return Err(Error::Solver("post-selected LP unbounded".into())),
    };
    let mut p = ConicProgram::new(Sense::Maximize);
    p.objective_offset = f.offset;
    let blocks: Vec<_> = (0..data.c.len()).map(|_| p.add_block(BlockKind::Nonneg)).collect();
    for (j, &q) in blocks.iter().enumerate() {
        if data.c[j] != 0.0 {
            p.add_objective(q, Coefficient::Scalar(data.c[j]));
        }
    }
    for i in 0..data.a.nrows() {
        let mut form = LinearForm::new();
        for (j, &q) in blocks.iter().enumerate() {
            if data.a[(i, j)] != 0.0 {
                form.push(q, Coefficient::Scalar(data.a[(i, j)]));
            }
        }
        p.add_equality(form, data.b[i]);
    }
    let solution = p.solve(opts)?;
    match solution.status {
        Status::Optimal => Ok(PsLhvResult { value: solution.value, simplex_value, solution }),
        Status::Infeasible => Err(Error::InconsistentEfficiencies),
        s => Err(Error::Solver(format!("post-selected LP ended with status {}", s.as_str()))),
    }
}

/// P(ab|xy) = tr[(M_{a|x} ⊗ M_{b|y})ρ].
pub fn behaviour_from_state(state: &QuantumState, ma: &MeasurementSet, mb: &MeasurementSet) -> Result<Behaviour> {
    let dims = state.dims();
    if dims.len() != 2 || dims[0] != ma.dim() || dims[1] != mb.dim() {
        return Err(Error::Dimension(format!("state dims {dims:?} vs measurement dimensions")));
    }
    if ma.settings() != mb.settings() || ma.outcomes() != mb.outcomes() {
        return Err(Error::Dimension("Alice and Bob need matching measurement sets".into()));
    }
    Behaviour::from_fn(ma.settings(), ma.outcomes(), |a, b, x, y| {
        if a == 0 || b == 0 {
            return 0.0;
        }
        let op = kron(ma.element(a, x).matrix(), mb.element(b, y).matrix());
        op.trace_product(state.rho().matrix()).re
    })
}

/// Projective qubit measurements along directions at angles θ in the
/// X–Z plane: outcome 1 is the +1 eigenvector of cosθ Z + sinθ X.
pub fn xz_measurements(angles: &[f64]) -> MeasurementSet {
    use crate::hermitian::C64;
    let bases: Vec<Vec<Vec<C64>>> = angles
        .iter()
        .map(|&t| {
            let (s, c) = (t / 2.0).sin_cos();
            vec![
                vec![C64::new(c, 0.0), C64::new(s, 0.0)],
                vec![C64::new(-s, 0.0), C64::new(c, 0.0)],
            ]
        })
        .collect();
    MeasurementSet::from_bases(&bases).expect("valid by construction")
}

/// Result of the quantum search for a tilted CHSH functional.
#[derive(Clone, Debug, PartialEq)]
pub struct QuantumOptimum {
    pub value: f64,
    /// State cosφ|00⟩ + sinφ|11⟩.
    pub phi: f64,
    /// Alice's two angles then Bob's two, in the X–Z plane.
    pub angles: [f64; 4],
    pub seed: u64,
    pub evaluations: usize,
}

/// ⟨A B⟩ for X–Z plane observables on cosφ|00⟩ + sinφ|11⟩.
fn correlator(phi: f64, a: f64, b: f64) -> f64 {
    a.cos() * b.cos() + (2.0 * phi).sin() * a.sin() * b.sin()
}

fn tilted_value(alpha: f64, p: &[f64; 5]) -> f64 {
    let [phi, a0, a1, b0, b1] = *p;
    alpha * (correlator(phi, a0, b0) + correlator(phi, a1, b0)) + correlator(phi, a0, b1) - correlator(phi, a1, b1)
}

/// Maximises I_α over two-qubit pure states cosφ|00⟩ + sinφ|11⟩ and
/// projective measurements in the X–Z plane: a coarse grid, seeded random
/// restarts and a shrinking pattern search. With `product_only` the state
/// is fixed to |00⟩. The reported value is recomputed from the state.
pub fn quantum_max_tilted(alpha: f64, seed: u64, product_only: bool) -> Result<QuantumOptimum> {
    use std::f64::consts::{FRAC_PI_4, PI};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut evaluations = 0;
    let mut starts: Vec<[f64; 5]> = Vec::new();
    let grid = 6;
    let phis: Vec<f64> = if product_only { vec![0.0] } else { (0..=3).map(|i| i as f64 * FRAC_PI_4 / 3.0).collect() };
    for &phi in &phis {
        for i in 0..grid {
            for j in 0..grid {
                let a1 = 2.0 * PI * i as f64 / grid as f64;
                let b1 = 2.0 * PI * j as f64 / grid as f64;
                starts.push([phi, 0.0, a1, 0.0, b1]);
            }
        }
    }
    for _ in 0..16 {
        let phi = if product_only { 0.0 } else { rng.random_range(0.0..FRAC_PI_4) };
        starts.push([phi, rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..2.0 * PI)]);
    }
    let mut scored: Vec<(f64, [f64; 5])> = starts
        .into_iter()
        .map(|p| {
            evaluations += 1;
            (tilted_value(alpha, &p), p)
        })
        .collect();
    scored.sort_by(|a, b| b.0.total_cmp(&a.0));
    let mut best = scored[0];
    for &(v0, p0) in scored.iter().take(8) {
        let (mut v, mut p) = (v0, p0);
        let mut step = 0.3;
        while step > 1e-10 {
            let mut improved = false;
            for k in 0..5 {
                if k == 0 && product_only {
                    continue;
                }
                for dir in [1.0, -1.0] {
                    let mut q = p;
                    q[k] += dir * step;
                    if k == 0 {
                        q[0] = q[0].clamp(0.0, FRAC_PI_4);
                    }
                    evaluations += 1;
                    let vq = tilted_value(alpha, &q);
                    if vq > v {
                        v = vq;
                        p = q;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        if v > best.0 {
            best = (v, p);
        }
    }
    let [phi, a0, a1, b0, b1] = best.1;
    let state = two_qubit_pure(phi);
    let beh = behaviour_from_state(&state, &xz_measurements(&[a0, a1]), &xz_measurements(&[b0, b1]))?;
    let value = evaluate(&tilted_chsh_quiet(alpha), &beh)?;
    Ok(QuantumOptimum { value, phi, angles: [a0, a1, b0, b1], seed, evaluations })
}

fn tilted_chsh_quiet(alpha: f64) -> BellFunctional {
    let c = [[alpha, 1.0], [alpha, -1.0]];
    let mut f = BellFunctional::zeros(2, 2, 0.0);
    for x in 0..2 {
        for y in 0..2 {
            for a in 1..=2 {
                for b in 1..=2 {
                    let i = f.index(a, b, x, y);
                    f.coeffs[i] = c[x][y] * sign(a) * sign(b);
                }
            }
        }
    }
    f
}

/// Named loss models for two lossy parties.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossPreset {
    /// η_x = η_y = η, η_{xy} = η².
    Uncorrelated,
    /// η_x = 1, η_y = η, η_{xy} = η.
    OneSided,
    /// Every efficiency equals η.
    PerfectlyCorrelated,
}

impl LossPreset {
    pub fn profile(self, m: usize, eta: f64) -> Result<EfficiencyProfile2> {
        match self {
            LossPreset::Uncorrelated => EfficiencyProfile2::uncorrelated(m, eta),
            LossPreset::OneSided => EfficiencyProfile2::one_sided(m, eta),
            LossPreset::PerfectlyCorrelated => EfficiencyProfile2::perfectly_correlated(m, eta),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LossPreset::Uncorrelated => "uncorrelated-isotropic",
            LossPreset::OneSided => "one-sided",
            LossPreset::PerfectlyCorrelated => "perfectly-correlated",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "uncorrelated-isotropic" | "uncorrelated" => Ok(LossPreset::Uncorrelated),
            "one-sided" => Ok(LossPreset::OneSided),
            "perfectly-correlated" => Ok(LossPreset::PerfectlyCorrelated),
            other => Err(Error::Invalid(format!("unknown loss preset {other:?}"))),
        }
    }
}

/// Margin by which a quantum value must exceed a bound to count as a
/// violation.
pub const VIOLATION_MARGIN: f64 = 1e-7;

/// Smallest η in `[lo, hi]` at which `quantum > bound(η) + margin`,
/// located by bisection to `tol`, assuming the bound is non-increasing in
/// η. `None` when even `hi` shows no violation.
pub fn critical_efficiency(
    quantum: f64,
    lo: f64,
    hi: f64,
    tol: f64,
    mut bound: impl FnMut(f64) -> Result<f64>,
) -> Result<Option<f64>> {
    let violated = |v: f64| quantum > v + VIOLATION_MARGIN;
    if !violated(bound(hi)?) {
        return Ok(None);
    }
    if violated(bound(lo)?) {
        return Ok(Some(lo));
    }
    let (mut l, mut h) = (lo, hi);
    while h - l > tol {
        let mid = 0.5 * (l + h);
        if violated(bound(mid)?) {
            h = mid;
        } else {
            l = mid;
        }
    }
    Ok(Some(h))
}

/// Critical efficiency of I_α under a loss preset, with the quantum value
/// from [`quantum_max_tilted`]. Under the presets the post-selected quantum
/// behaviour equals the lossless one, so the ideal quantum value is used.
pub fn tilted_critical_efficiency(alpha: f64, preset: LossPreset, seed: u64, opts: &SolveOptions) -> Result<Option<f64>> {
    let q = quantum_max_tilted(alpha, seed, false)?.value;
    let f = tilted_chsh(alpha);
    critical_efficiency(q, 0.01, 1.0, 1e-4, |eta| Ok(ps_lhv_bound(&f, &preset.profile(2, eta)?, opts)?.simplex_value))
}

/// Σ_{x,y} max_{a,b} I_{abxy} + offset, the largest value any
/// post-selected behaviour can reach.
pub fn algebraic_max(f: &BellFunctional) -> f64 {
    let mut v = f.offset;
    for x in 0..f.m {
        for y in 0..f.m {
            let mut best = f64::NEG_INFINITY;
            for a in 1..=f.outcomes {
                for b in 1..=f.outcomes {
                    best = best.max(f.coefficient(a, b, x, y));
                }
            }
            v += best;
        }
    }
    v
}

/// Smallest η at which the post-selected local bound drops below the
/// algebraic maximum; below it no behaviour whatsoever shows a violation.
pub fn saturation_threshold(f: &BellFunctional, preset: LossPreset, opts: &SolveOptions) -> Result<Option<f64>> {
    critical_efficiency(algebraic_max(f), 0.01, 1.0, 1e-4, |eta| {
        Ok(ps_lhv_bound(f, &preset.profile(f.m, eta)?, opts)?.simplex_value)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{max_entangled, product};
    use crate::hermitian::HermitianMatrix;

    fn deterministic_plus() -> Behaviour {
        Behaviour::from_fn(2, 2, |a, b, _, _| if a == 1 && b == 1 { 1.0 } else { 0.0 }).unwrap()
    }

    #[test]
    fn lhv_examples() {
        assert!((lhv_bound(&tilted_chsh(1.0)).unwrap() - 2.0).abs() < 1e-12);
        for alpha in [1.0, 1.2, 1.5] {
            assert!((lhv_bound(&tilted_chsh(alpha)).unwrap() - 2.0 * alpha).abs() < 1e-12);
        }
        let zero = BellFunctional::zeros(2, 2, 0.7);
        assert_eq!(lhv_bound(&zero).unwrap(), 0.7);
        assert!((lhv_bound_conic(&tilted_chsh(1.3), &SolveOptions::default()).unwrap() - 2.6).abs() < 1e-7);
    }

    #[test]
    fn tilted_on_deterministic() {
        assert!((evaluate(&tilted_chsh(1.0), &deterministic_plus()).unwrap() - 2.0).abs() < 1e-15);
        assert!((evaluate(&tilted_chsh(1.5), &deterministic_plus()).unwrap() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn chsh_quantum_value() {
        use std::f64::consts::FRAC_PI_2;
        let ma = xz_measurements(&[0.0, FRAC_PI_2]);
        let mb = xz_measurements(&[FRAC_PI_2 / 2.0, -FRAC_PI_2 / 2.0]);
        let beh = behaviour_from_state(&max_entangled(2), &ma, &mb).unwrap();
        assert!((evaluate(&tilted_chsh(1.0), &beh).unwrap() - 2.0 * 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn product_behaviour_factorizes() {
        let ra = QuantumState::new(vec![2], HermitianMatrix::from_real_diagonal(&[0.9, 0.1])).unwrap();
        let rb = QuantumState::new(vec![2], HermitianMatrix::from_real_diagonal(&[0.4, 0.6])).unwrap();
        let st = product(&[&ra, &rb]).unwrap();
        let ma = xz_measurements(&[0.3, 1.1]);
        let mb = xz_measurements(&[-0.4, 2.0]);
        let beh = behaviour_from_state(&st, &ma, &mb).unwrap();
        for x in 0..2 {
            for y in 0..2 {
                for a in 1..=2 {
                    for b in 1..=2 {
                        let pa = ma.element(a, x).inner(ra.rho());
                        let pb = mb.element(b, y).inner(rb.rho());
                        assert!((beh.prob(a, b, x, y) - pa * pb).abs() < 1e-14);
                    }
                }
            }
        }
    }

    #[test]
    fn quantum_search_examples() {
        for alpha in [1.0, 1.5] {
            let q = quantum_max_tilted(alpha, 7, false).unwrap();
            let closed = 2.0 * (1.0 + alpha * alpha).sqrt();
            assert!((q.value - closed).abs() < 1e-3, "{alpha}: {}", q.value);
            assert!((q.value - tilted_value(alpha, &[q.phi, q.angles[0], q.angles[1], q.angles[2], q.angles[3]])).abs() < 1e-12);
        }
        let q = quantum_max_tilted(1.2, 7, true).unwrap();
        assert!((q.value - lhv_bound(&tilted_chsh(1.2)).unwrap()).abs() < 1e-6);
        assert_eq!(quantum_max_tilted(1.2, 3, false).unwrap(), quantum_max_tilted(1.2, 3, false).unwrap());
    }

    #[test]
    fn ps_bound_examples() {
        let opts = SolveOptions::default();
        let f = tilted_chsh(1.0);
        for eta in [0.1, 0.5, 1.0] {
            let r = ps_lhv_bound(&f, &EfficiencyProfile2::perfectly_correlated(2, eta).unwrap(), &opts).unwrap();
            assert!((r.simplex_value - 2.0).abs() < 1e-9, "{eta}: {}", r.simplex_value);
            assert!((r.value - r.simplex_value).abs() < 1e-6);
        }
        let r = ps_lhv_bound(&f, &EfficiencyProfile2::uncorrelated(2, 1.0).unwrap(), &opts).unwrap();
        assert!((r.value - 2.0).abs() < 1e-6);
    }

    #[test]
    fn ps_bound_dominates_ideal() {
        let opts = SolveOptions::default();
        for alpha in [1.0, 1.25, 1.5] {
            let f = tilted_chsh(alpha);
            let ideal = lhv_bound(&f).unwrap();
            for eta in [0.3, 0.6, 0.9] {
                for preset in [LossPreset::Uncorrelated, LossPreset::OneSided] {
                    let r = ps_lhv_bound(&f, &preset.profile(2, eta).unwrap(), &opts).unwrap();
                    assert!(r.simplex_value >= ideal - 1e-8);
                    assert!((r.value - r.simplex_value).abs() < 1e-6, "{alpha} {eta} {preset:?}");
                }
            }
        }
    }

    #[test]
    fn inconsistent_triple() {
        let p = EfficiencyProfile2::new(vec![vec![0.9; 2]; 2], vec![0.5; 2], vec![0.5; 2]).unwrap();
        assert!(matches!(ps_lhv_bound(&tilted_chsh(1.0), &p, &SolveOptions::default()), Err(Error::InconsistentEfficiencies)));
    }

    #[test]
    fn saturation_thresholds() {
        let opts = SolveOptions::default();
        let f = tilted_chsh(1.0);
        assert_eq!(algebraic_max(&f), 4.0);
        let u = saturation_threshold(&f, LossPreset::Uncorrelated, &opts).unwrap().unwrap();
        assert!((u - 2.0 / 3.0).abs() < 2e-4, "{u}");
        let o = saturation_threshold(&f, LossPreset::OneSided, &opts).unwrap().unwrap();
        assert!((o - 0.5).abs() < 2e-4, "{o}");
    }

    #[test]
    fn one_sided_bound_closed_form() {
        // Bob alone loses: the local model answers each setting with its own
        // strategy on the single-click rounds, giving 2/η above η = 1/2.
        let opts = SolveOptions::default();
        for eta in [0.55, 0.7, 0.85] {
            let r = ps_lhv_bound(&tilted_chsh(1.0), &LossPreset::OneSided.profile(2, eta).unwrap(), &opts).unwrap();
            assert!((r.simplex_value - 2.0 / eta).abs() < 1e-9);
        }
    }

    #[test]
    fn bisection_on_monotone_bound() {
        let c = critical_efficiency(1.0, 0.0, 1.0, 1e-6, |e| Ok(2.0 - 2.0 * e)).unwrap().unwrap();
        assert!((c - 0.5).abs() < 1e-5);
        assert_eq!(critical_efficiency(1.0, 0.0, 1.0, 1e-6, |_| Ok(5.0)).unwrap(), None);
    }

    #[test]
    fn term_compilation_matches_preset() {
        let spec = |c: f64, a: usize, b: usize| TermSpec { coefficient: c, alice: Some(a), bob: Some(b), charlie: None };
        let terms = [spec(1.2, 0, 0), spec(1.2, 1, 0), spec(1.0, 0, 1), spec(-1.0, 1, 1)];
        assert_eq!(compile_bell_terms(&terms, 2).unwrap(), tilted_chsh(1.2));
    }
}
