//! Two uncharacterised parties (Alice, Bob) steering a characterised third
//! (Charlie), with possibly correlated losses.

use log::warn;
use serde::{Deserialize, Serialize};

use crate::conic::{BlockKind, Coefficient, ConicProgram, ConicSolution, LinearForm, Sense, SolveOptions, Status};
use crate::error::{Error, Result};
use crate::hermitian::{is_psd, kron, max_eigenvalue, partial_trace, pauli, HermitianMatrix, PSD_TOL};
use crate::scenario::{MeasurementSet, QuantumState};
use crate::strategy::{enumerate_products, ProductStrategy};

/// σ_{ab|xy} on Charlie's space. Outcomes `0..=outcomes`, slot 0 being the
/// no-click (zero for ideal assemblages).
#[derive(Clone, Debug, PartialEq)]
pub struct BipartiteAssemblage3 {
    m: usize,
    outcomes: usize,
    d: usize,
    includes_no_click: bool,
    members: Vec<HermitianMatrix>,
}

impl BipartiteAssemblage3 {
    fn index(&self, a: usize, b: usize, x: usize, y: usize) -> usize {
        let k = self.outcomes + 1;
        ((x * self.m + y) * k + a) * k + b
    }

    /// Builds from a closure giving σ_{ab|xy} for all labels
    /// (`a, b ∈ 0..=outcomes`).
    pub fn from_fn(
        m: usize,
        outcomes: usize,
        d: usize,
        includes_no_click: bool,
        mut f: impl FnMut(usize, usize, usize, usize) -> HermitianMatrix,
    ) -> Result<Self> {
        let k = outcomes + 1;
        let mut members = Vec::with_capacity(m * m * k * k);
        for x in 0..m {
            for y in 0..m {
                for a in 0..k {
                    for b in 0..k {
                        let s = if !includes_no_click && (a == 0 || b == 0) {
                            HermitianMatrix::zeros(d)
                        } else {
                            f(a, b, x, y)
                        };
                        if s.dim() != d {
                            return Err(Error::Dimension("member dimension".into()));
                        }
                        if !is_psd(&s, PSD_TOL) {
                            return Err(Error::Invalid(format!("member ({a},{b}|{x},{y}) is not PSD")));
                        }
                        members.push(s);
                    }
                }
            }
        }
        Ok(Self { m, outcomes, d, includes_no_click, members })
    }

    pub fn settings(&self) -> usize {
        self.m
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn includes_no_click(&self) -> bool {
        self.includes_no_click
    }

    pub fn member(&self, a: usize, b: usize, x: usize, y: usize) -> &HermitianMatrix {
        &self.members[self.index(a, b, x, y)]
    }
}

/// Joint efficiencies η_{xy} with the local marginals η_x^A and η_y^B.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyProfile2 {
    pub eta_ab: Vec<Vec<f64>>,
    pub eta_a: Vec<f64>,
    pub eta_b: Vec<f64>,
}

impl EfficiencyProfile2 {
    /// Validates ranges and shapes; Fréchet inconsistencies are only
    /// logged, since the solver decides feasibility.
    pub fn new(eta_ab: Vec<Vec<f64>>, eta_a: Vec<f64>, eta_b: Vec<f64>) -> Result<Self> {
        let m = eta_a.len();
        if m == 0 || eta_b.len() != m || eta_ab.len() != m || eta_ab.iter().any(|r| r.len() != m) {
            return Err(Error::Efficiency("profile shapes do not match".into()));
        }
        let all = eta_ab.iter().flatten().chain(&eta_a).chain(&eta_b);
        if let Some(e) = all.into_iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return Err(Error::Efficiency(format!("{e} outside [0, 1]")));
        }
        let p = Self { eta_ab, eta_a, eta_b };
        for w in p.frechet_violations() {
            warn!("{w}");
        }
        Ok(p)
    }

    /// η_x = η_y = η, η_{xy} = η².
    pub fn uncorrelated(m: usize, eta: f64) -> Result<Self> {
        Self::new(vec![vec![eta * eta; m]; m], vec![eta; m], vec![eta; m])
    }

    /// Alice lossless: η_x = 1, η_y = η, η_{xy} = η.
    pub fn one_sided(m: usize, eta: f64) -> Result<Self> {
        Self::new(vec![vec![eta; m]; m], vec![1.0; m], vec![eta; m])
    }

    /// Losses at the source: every efficiency equals η.
    pub fn perfectly_correlated(m: usize, eta: f64) -> Result<Self> {
        Self::new(vec![vec![eta; m]; m], vec![eta; m], vec![eta; m])
    }

    pub fn settings(&self) -> usize {
        self.eta_a.len()
    }

    /// Entries violating η_x + η_y − 1 ≤ η_{xy} ≤ min(η_x, η_y).
    pub fn frechet_violations(&self) -> Vec<String> {
        let mut out = Vec::new();
        for (x, row) in self.eta_ab.iter().enumerate() {
            for (y, &j) in row.iter().enumerate() {
                let lo = self.eta_a[x] + self.eta_b[y] - 1.0;
                let hi = self.eta_a[x].min(self.eta_b[y]);
                if j < lo - 1e-12 || j > hi + 1e-12 {
                    out.push(format!("eta_{x}{y} = {j} outside the Frechet range [{lo}, {hi}]"));
                }
            }
        }
        out
    }

    fn check_post_selectable(&self) -> Result<()> {
        if self.eta_ab.iter().flatten().any(|&e| e <= 0.0) {
            return Err(Error::Efficiency("joint efficiency 0, post-selection undefined".into()));
        }
        Ok(())
    }
}

/// One correlator ⟨A_x B_y O⟩ with optional parties.
#[derive(Clone, Debug, PartialEq)]
pub struct CorrelatorTerm {
    pub coefficient: f64,
    pub alice: Option<usize>,
    pub bob: Option<usize>,
    pub charlie: HermitianMatrix,
}

impl CorrelatorTerm {
    pub fn new(coefficient: f64, alice: Option<usize>, bob: Option<usize>, charlie: HermitianMatrix) -> Self {
        Self { coefficient, alice, bob, charlie }
    }
}

/// Serialised correlator: Charlie's operator is named (`I`, `X`, `Y`, `Z`)
/// and defaults to the identity.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TermSpec {
    pub coefficient: f64,
    #[serde(default)]
    pub alice: Option<usize>,
    #[serde(default)]
    pub bob: Option<usize>,
    #[serde(default)]
    pub charlie: Option<String>,
}

impl TermSpec {
    pub fn to_term(&self) -> Result<CorrelatorTerm> {
        let op = match self.charlie.as_deref().unwrap_or("I") {
            "I" => pauli::identity(),
            "X" => pauli::x(),
            "Y" => pauli::y(),
            "Z" => pauli::z(),
            other => return Err(Error::Invalid(format!("unknown operator {other:?}"))),
        };
        Ok(CorrelatorTerm::new(self.coefficient, self.alice, self.bob, op))
    }
}

/// F_{ab|xy} over conclusive outcomes, plus a constant.
#[derive(Clone, Debug, PartialEq)]
pub struct TriFunctional {
    m: usize,
    outcomes: usize,
    d: usize,
    operators: Vec<HermitianMatrix>,
    pub offset: f64,
}

impl TriFunctional {
    pub fn zeros(m: usize, outcomes: usize, d: usize, offset: f64) -> Self {
        Self {
            m,
            outcomes,
            d,
            operators: vec![HermitianMatrix::zeros(d); m * m * outcomes * outcomes],
            offset,
        }
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

    pub fn dim(&self) -> usize {
        self.d
    }

    /// F_{ab|xy} for conclusive `a, b`.
    pub fn operator(&self, a: usize, b: usize, x: usize, y: usize) -> &HermitianMatrix {
        &self.operators[self.index(a, b, x, y)]
    }

    pub fn add_to(&mut self, a: usize, b: usize, x: usize, y: usize, s: f64, op: &HermitianMatrix) {
        let i = self.index(a, b, x, y);
        self.operators[i] = self.operators[i].add_scaled(s, op);
    }

    /// Σ_{x,y: both click} F_{λA(x)λB(y)|xy} / η_{xy}.
    fn strategy_operator(&self, s: &ProductStrategy, inv: &[Vec<f64>]) -> HermitianMatrix {
        let mut g = HermitianMatrix::zeros(self.d);
        for x in 0..self.m {
            let a = s.alice.outcomes()[x];
            if a == 0 {
                continue;
            }
            for y in 0..self.m {
                let b = s.bob.outcomes()[y];
                if b != 0 {
                    g = g.add_scaled(inv[x][y], self.operator(a, b, x, y));
                }
            }
        }
        g
    }
}

/// (−1)^(a−1) for a conclusive ±1 outcome label.
pub fn sign(a: usize) -> f64 {
    if a % 2 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Expands correlators into F_{ab|xy} on two-outcome settings. A party
/// absent from a term contributes 1 and the term is spread evenly over its
/// settings (a factor 1/m per absent party). A term with neither party and
/// Charlie's identity is a constant and goes to the offset.
pub fn compile_correlators(terms: &[CorrelatorTerm], m: usize, d: usize) -> Result<TriFunctional> {
    let mut f = TriFunctional::zeros(m, 2, d, 0.0);
    let id = HermitianMatrix::identity(d);
    for t in terms {
        if t.charlie.dim() != d {
            return Err(Error::Dimension(format!("Charlie operator is {0}x{0}, expected {d}", t.charlie.dim())));
        }
        if t.alice.is_some_and(|x| x >= m) || t.bob.is_some_and(|y| y >= m) {
            return Err(Error::OutOfRange(format!("setting in term {t:?} exceeds {m}")));
        }
        if t.alice.is_none() && t.bob.is_none() && t.charlie.max_abs_diff(&id) == 0.0 {
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
                        f.add_to(a, b, x, y, t.coefficient * sa * sb / spread, &t.charlie);
                    }
                }
            }
        }
    }
    Ok(f)
}

fn term(c: f64, a: Option<usize>, b: Option<usize>, op: HermitianMatrix) -> CorrelatorTerm {
    CorrelatorTerm::new(c, a, b, op)
}

/// Steering inequality for the GHZ state with Pauli settings
/// (A₀, A₁, A₂) = (X, Y, Z), written as "≤ 0".
pub fn ghz_inequality() -> Vec<CorrelatorTerm> {
    let (i, x, y, z) = (pauli::identity(), pauli::x(), pauli::y(), pauli::z());
    vec![
        term(-3.0730, None, None, i.clone()),
        term(0.6219, Some(2), None, z.clone()),
        term(0.6219, None, Some(2), z),
        term(0.2919, Some(2), Some(2), i),
        term(1.2437, Some(0), Some(0), x.clone()),
        term(-1.2437, Some(0), Some(1), y.clone()),
        term(-1.2437, Some(1), Some(0), y),
        term(-1.2437, Some(1), Some(1), x),
    ]
}

/// Steering inequality for the W state, coefficients as printed.
pub fn w_inequality() -> Vec<CorrelatorTerm> {
    let (i, x, y, z) = (pauli::identity(), pauli::x(), pauli::y(), pauli::z());
    vec![
        term(-2.9797, None, None, i.clone()),
        term(0.0454, Some(2), None, i.clone()),
        term(0.0454, None, Some(2), i.clone()),
        term(0.8105, None, None, z.clone()),
        term(-0.1324, Some(0), Some(0), i.clone()),
        term(-0.1324, Some(1), Some(1), i.clone()),
        term(0.4703, Some(0), None, x.clone()),
        term(0.4703, Some(1), None, y.clone()),
        term(0.4703, None, Some(0), x.clone()),
        term(0.4703, None, Some(1), y.clone()),
        term(-1.1772, Some(2), None, z.clone()),
        term(-1.1772, None, Some(2), z.clone()),
        term(-0.5046, Some(2), Some(2), i),
        term(0.5401, Some(0), Some(0), z.clone()),
        term(0.5401, Some(1), Some(1), z.clone()),
        term(0.7771, Some(0), Some(2), x),
        term(0.7771, Some(1), Some(2), y.clone()),
        term(0.7771, Some(2), Some(2), y.clone()),
        term(0.7771, Some(2), Some(1), y),
        term(-2.0185, Some(2), Some(2), z),
    ]
}

/// σ_{ab|xy} = tr_AB[(M_{a|x} ⊗ M_{b|y} ⊗ 𝟙)ρ].
pub fn tri_assemblage(state: &QuantumState, ma: &MeasurementSet, mb: &MeasurementSet) -> Result<BipartiteAssemblage3> {
    let dims = state.dims().to_vec();
    if dims.len() != 3 || dims[0] != ma.dim() || dims[1] != mb.dim() {
        return Err(Error::Dimension(format!("state dims {dims:?} vs measurement dimensions")));
    }
    if ma.settings() != mb.settings() || ma.outcomes() != mb.outcomes() {
        return Err(Error::Dimension("Alice and Bob need matching measurement sets".into()));
    }
    let id_c = HermitianMatrix::identity(dims[2]);
    let mut err = None;
    let out = BipartiteAssemblage3::from_fn(ma.settings(), ma.outcomes(), dims[2], false, |a, b, x, y| {
        let op = kron(&kron(ma.element(a, x).matrix(), mb.element(b, y).matrix()), id_c.matrix());
        match partial_trace(&(&op * state.rho().matrix()), &dims, &[2]) {
            Ok(m) => HermitianMatrix::symmetrize(&m),
            Err(e) => {
                err = Some(e);
                HermitianMatrix::zeros(dims[2])
            }
        }
    })?;
    match err {
        Some(e) => Err(e),
        None => Ok(out),
    }
}

fn check_compatible(f: &TriFunctional, a: &BipartiteAssemblage3) -> Result<()> {
    if f.settings() != a.settings() || f.outcomes() != a.outcomes() || f.dim() != a.dim() {
        return Err(Error::Dimension("functional and assemblage shapes differ".into()));
    }
    Ok(())
}

/// offset + Σ tr F_{ab|xy} σ_{ab|xy} over conclusive outcomes.
pub fn tri_evaluate(f: &TriFunctional, a: &BipartiteAssemblage3) -> Result<f64> {
    check_compatible(f, a)?;
    let mut v = f.offset;
    for x in 0..f.settings() {
        for y in 0..f.settings() {
            for i in 1..=f.outcomes() {
                for j in 1..=f.outcomes() {
                    v += f.operator(i, j, x, y).inner(a.member(i, j, x, y));
                }
            }
        }
    }
    Ok(v)
}

/// Ideal tripartite LHS bound by enumeration of product strategies.
pub fn tri_lhs_bound(f: &TriFunctional) -> Result<f64> {
    let ones = vec![vec![1.0; f.settings()]; f.settings()];
    let best = enumerate_products(f.settings(), f.outcomes(), false)?
        .iter()
        .map(|s| max_eigenvalue(&f.strategy_operator(s, &ones)))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(best + f.offset)
}

/// Post-selected tripartite program; blocks follow the product-strategy
/// enumeration order (Alice slower).
pub fn tri_ps_program(f: &TriFunctional, eta: &EfficiencyProfile2) -> Result<(ConicProgram, Vec<ProductStrategy>)> {
    let m = f.settings();
    if eta.settings() != m {
        return Err(Error::Dimension("efficiency profile size".into()));
    }
    eta.check_post_selectable()?;
    let d = f.dim();
    let strategies = enumerate_products(m, f.outcomes(), true)?;
    let inv: Vec<Vec<f64>> = eta.eta_ab.iter().map(|r| r.iter().map(|e| 1.0 / e).collect()).collect();
    let id = Coefficient::Hermitian(HermitianMatrix::identity(d));
    let mut p = ConicProgram::new(Sense::Maximize);
    p.objective_offset = f.offset;
    let mut total = LinearForm::new();
    let mut joint = vec![LinearForm::new(); m * m];
    let mut alice = vec![LinearForm::new(); m];
    let mut bob = vec![LinearForm::new(); m];
    for s in &strategies {
        let blk = p.add_block(BlockKind::Hermitian(d));
        let g = f.strategy_operator(s, &inv);
        if g.matrix().max_abs() > 0.0 {
            p.add_objective(blk, Coefficient::Hermitian(g));
        }
        total.push(blk, id.clone());
        for x in 0..m {
            if s.alice.clicks(x) {
                alice[x].push(blk, id.clone());
                for y in 0..m {
                    if s.bob.clicks(y) {
                        joint[x * m + y].push(blk, id.clone());
                    }
                }
            }
            if s.bob.clicks(x) {
                bob[x].push(blk, id.clone());
            }
        }
    }
    p.add_equality(total, 1.0);
    for (k, form) in joint.into_iter().enumerate() {
        p.add_equality(form, eta.eta_ab[k / m][k % m]);
    }
    for (x, form) in alice.into_iter().enumerate() {
        p.add_equality(form, eta.eta_a[x]);
    }
    for (y, form) in bob.into_iter().enumerate() {
        p.add_equality(form, eta.eta_b[y]);
    }
    Ok((p, strategies))
}

/// Post-selected tripartite LHS bound. An efficiency triple admitting no
/// a-priori classical model yields [`Error::InconsistentEfficiencies`].
pub fn tri_ps_lhs_bound(f: &TriFunctional, eta: &EfficiencyProfile2, opts: &SolveOptions) -> Result<(f64, ConicSolution)> {
    let (p, _) = tri_ps_program(f, eta)?;
    let sol = p.solve(opts)?;
    match sol.status {
        Status::Optimal => Ok((sol.value, sol)),
        Status::Infeasible => Err(Error::InconsistentEfficiencies),
        s => Err(Error::Solver(format!("tripartite program ended with status {}", s.as_str()))),
    }
}
