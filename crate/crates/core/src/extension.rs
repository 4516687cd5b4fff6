//! Explicit classical hidden-state models for lossy assemblages, and the
//! check that post-selection with perfect detectors changes nothing.
//!
//! The loss model gives each of m copies of the measuring party the chance
//! to hold the real share of the state; the others hold a flag that only
//! the no-click element detects. Answering `a_x` on input `x` then
//! reproduces the lossy assemblage whenever Σ_x η_x ≤ 1.

use crate::conic::SolveOptions;
use crate::error::{Error, Result};
use crate::hermitian::{is_psd, kron, partial_trace, CMatrix, HermitianMatrix, C64};
use crate::scenario::{MeasurementSet, QuantumState};
use crate::steering::{lhs_bound_enumerated, ps_lhs_program, Assemblage, EfficiencyProfile, SteeringFunctional};
use crate::strategy::enumerate;

const MODEL_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
pub struct HiddenState {
    /// `labels[x]` is the answer to setting `x`, 0 for a no-click.
    pub labels: Vec<usize>,
    pub probability: f64,
    /// Normalised state, trace one.
    pub rho: HermitianMatrix,
}

/// Finite mixture of hidden states with deterministic answers.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtensionModel {
    dim: usize,
    settings: usize,
    outcomes: usize,
    states: Vec<HiddenState>,
}

impl ExtensionModel {
    /// Zero-probability entries are dropped.
    pub fn new(settings: usize, outcomes: usize, states: Vec<HiddenState>) -> Result<Self> {
        let dim = states
            .first()
            .map(|s| s.rho.dim())
            .ok_or_else(|| Error::Invalid("model without hidden states".into()))?;
        let mut total = 0.0;
        let mut kept = Vec::with_capacity(states.len());
        for s in states {
            if s.labels.len() != settings || s.labels.iter().any(|&a| a > outcomes) {
                return Err(Error::OutOfRange(format!("labels {:?}", s.labels)));
            }
            if !(s.probability >= -MODEL_TOL) || !s.probability.is_finite() {
                return Err(Error::Invalid(format!("probability {}", s.probability)));
            }
            if s.rho.dim() != dim {
                return Err(Error::Dimension("hidden states differ in dimension".into()));
            }
            total += s.probability;
            if s.probability <= 0.0 {
                continue;
            }
            if !is_psd(&s.rho, MODEL_TOL) || (s.rho.trace() - 1.0).abs() > MODEL_TOL {
                return Err(Error::Invalid(format!("hidden state for {:?} is not a density matrix", s.labels)));
            }
            kept.push(s);
        }
        if (total - 1.0).abs() > MODEL_TOL {
            return Err(Error::Invalid(format!("probabilities sum to {total}")));
        }
        Ok(Self { dim, settings, outcomes, states: kept })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn settings(&self) -> usize {
        self.settings
    }

    pub fn outcomes(&self) -> usize {
        self.outcomes
    }

    pub fn hidden_states(&self) -> &[HiddenState] {
        &self.states
    }

    pub fn probability(&self, labels: &[usize]) -> f64 {
        self.states.iter().filter(|s| s.labels == labels).map(|s| s.probability).sum()
    }
}

/// M ⊕ 0 on the conclusive outcomes and 0 ⊕ |f⟩⟨f| on the no-click, with
/// the flag |f⟩ as the extra last basis vector.
fn flagged_element(m: &MeasurementSet, a: usize, x: usize) -> CMatrix {
    let d = m.dim();
    let mut out = CMatrix::zeros(d + 1, d + 1);
    if a == 0 {
        out.set(d, d, C64::new(1.0, 0.0));
    } else {
        let e = m.element(a, x);
        for i in 0..d {
            for j in 0..d {
                out.set(i, j, e.get(i, j));
            }
        }
    }
    out
}

/// Builds the flagged model. Each hidden state is assembled from the m
/// branches "copy x holds the real share" plus the all-flag branch, without
/// forming the (m+1)-party extension.
pub fn build_extension_model(rho: &QuantumState, m: &MeasurementSet, eta: &EfficiencyProfile) -> Result<ExtensionModel> {
    let dims = rho.dims();
    if dims.len() != 2 || dims[0] != m.dim() {
        return Err(Error::Dimension(format!("state dims {dims:?} vs measurement dimension {}", m.dim())));
    }
    let settings = m.settings();
    if eta.etas().len() != settings {
        return Err(Error::Dimension("efficiency profile length".into()));
    }
    let sum: f64 = eta.etas().iter().sum();
    if sum > 1.0 + 1e-12 {
        return Err(Error::Efficiency(format!(
            "mean efficiency {} exceeds 1/{settings}; no such model exists",
            sum / settings as f64
        )));
    }
    let (da, db) = (dims[0], dims[1]);
    let rho_b = HermitianMatrix::new(partial_trace(rho.rho().matrix(), dims, &[1])?)?;

    // ρ on (A ⊕ flag) ⊗ B, supported away from the flag.
    let mut embed = CMatrix::zeros(da + 1, da);
    for i in 0..da {
        embed.set(i, i, C64::new(1.0, 0.0));
    }
    let lift = kron(&embed, &CMatrix::identity(db));
    let rho_ext = &(&lift * rho.rho().matrix()) * &lift.adjoint();
    let flag = da;
    let ext_dims = [da + 1, db];

    let mut states = Vec::new();
    for labels in enumerate(settings, m.outcomes(), true)? {
        let labels = labels.outcomes().to_vec();
        let flag_weight = |skip: Option<usize>| -> f64 {
            (0..settings)
                .filter(|&i| Some(i) != skip)
                .map(|i| flagged_element(m, labels[i], i).get(flag, flag).re)
                .product()
        };
        let mut sigma = rho_b.scale((1.0 - sum).max(0.0) * flag_weight(None));
        for (x, &e) in eta.etas().iter().enumerate() {
            let w = e * flag_weight(Some(x));
            if w == 0.0 {
                continue;
            }
            let op = &kron(&flagged_element(m, labels[x], x), &CMatrix::identity(db)) * &rho_ext;
            let branch = HermitianMatrix::symmetrize(&partial_trace(&op, &ext_dims, &[1])?);
            sigma = sigma.add_scaled(w, &branch);
        }
        let p = sigma.trace();
        if p > 1e-15 {
            states.push(HiddenState { labels, probability: p, rho: sigma.scale(1.0 / p) });
        }
    }
    let total: f64 = states.iter().map(|s| s.probability).sum();
    for s in &mut states {
        s.probability /= total;
    }
    ExtensionModel::new(settings, m.outcomes(), states)
}

/// σ⁰_{a|x} = Σ_{𝐚: a_x = a} p(𝐚) ρ_𝐚, no-clicks included.
pub fn induced_assemblage(model: &ExtensionModel) -> Result<Assemblage> {
    let mut members = vec![vec![HermitianMatrix::zeros(model.dim); model.outcomes + 1]; model.settings];
    for s in &model.states {
        for (x, &a) in s.labels.iter().enumerate() {
            members[x][a] = members[x][a].add_scaled(s.probability, &s.rho);
        }
    }
    Assemblage::new(members, true)
}

/// Comparison of the post-selected bound at η ≡ 1 with the ideal bound.
#[derive(Clone, Debug, PartialEq)]
pub struct ReductionReport {
    pub ps_bound: f64,
    pub ideal_bound: f64,
    pub difference: f64,
    /// Largest trace carried by any strategy with a no-click.
    pub max_no_click_trace: f64,
    pub within_tolerance: bool,
}

pub fn ideal_reduction_check(f: &SteeringFunctional, opts: &SolveOptions) -> Result<ReductionReport> {
    let eta = EfficiencyProfile::uniform(f.settings(), 1.0)?;
    let (p, strategies) = ps_lhs_program(f, &eta)?;
    let sol = p.solve(opts)?;
    if !sol.is_optimal() {
        return Err(Error::Solver(format!("post-selected program ended with status {}", sol.status.as_str())));
    }
    let ideal_bound = lhs_bound_enumerated(f)?;
    let max_no_click_trace = strategies
        .iter()
        .zip(&sol.primal)
        .filter(|(s, _)| s.no_click_count() > 0)
        .map(|(_, v)| v.trace())
        .fold(0.0, f64::max);
    let difference = sol.value - ideal_bound;
    Ok(ReductionReport {
        ps_bound: sol.value,
        ideal_bound,
        difference,
        max_no_click_trace,
        within_tolerance: difference.abs() <= 1e-6 && max_no_click_trace <= 1e-7,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::{apply_loss, assemblage_from_state, max_entangled, mub_measurements, pauli_measurements, post_select, projectors};
    use crate::steering::{evaluate, projective_functional, ps_lhs_bound};

    fn max_dev(a: &Assemblage, b: &Assemblage) -> f64 {
        let mut worst = 0.0f64;
        for x in 0..a.settings() {
            for k in 0..=a.outcomes() {
                worst = worst.max(a.member(k, x).sub(b.member(k, x)).matrix().max_abs());
            }
        }
        worst
    }

    fn reproduces(etas: &[f64]) -> f64 {
        let st = max_entangled(2);
        let m = mub_measurements(2, etas.len()).unwrap();
        let eta = EfficiencyProfile::new(etas.to_vec()).unwrap();
        let model = build_extension_model(&st, &m, &eta).unwrap();
        let target = apply_loss(&assemblage_from_state(&st, &m).unwrap(), &eta).unwrap();
        max_dev(&induced_assemblage(&model).unwrap(), &target)
    }

    #[test]
    fn reproduces_lossy_assemblage() {
        assert!(reproduces(&[0.5, 0.5]) <= 1e-12);
        assert!(reproduces(&[0.6, 0.4]) <= 1e-12);
        assert!(reproduces(&[0.3, 0.3]) <= 1e-12);
        assert!(reproduces(&[0.2, 0.3, 0.1]) <= 1e-12);
    }

    #[test]
    fn all_flag_weight() {
        let st = max_entangled(2);
        let m = mub_measurements(2, 2).unwrap();
        let model = build_extension_model(&st, &m, &EfficiencyProfile::uniform(2, 0.3).unwrap()).unwrap();
        assert!((model.probability(&[0, 0]) - 0.4).abs() < 1e-12);
        assert!((model.probability(&[1, 0]) - 0.15).abs() < 1e-12);
        assert_eq!(model.probability(&[1, 1]), 0.0);
    }

    #[test]
    fn rejects_high_efficiency() {
        let st = max_entangled(2);
        let m = mub_measurements(2, 2).unwrap();
        let eta = EfficiencyProfile::uniform(2, 0.51).unwrap();
        assert!(matches!(build_extension_model(&st, &m, &eta), Err(Error::Efficiency(_))));
        let m3 = pauli_measurements();
        assert!(matches!(
            build_extension_model(&st, &m3, &EfficiencyProfile::uniform(2, 0.3).unwrap()),
            Err(Error::Dimension(_))
        ));
    }

    #[test]
    fn uniform_and_deterministic_models() {
        let rho = HermitianMatrix::from_real_diagonal(&[0.25, 0.75]);
        let mut states = Vec::new();
        for labels in enumerate(2, 2, true).unwrap() {
            states.push(HiddenState { labels: labels.outcomes().to_vec(), probability: 1.0 / 9.0, rho: rho.clone() });
        }
        let a = induced_assemblage(&ExtensionModel::new(2, 2, states).unwrap()).unwrap();
        for x in 0..2 {
            for k in 0..=2 {
                assert!(a.member(k, x).sub(&rho.scale(1.0 / 3.0)).matrix().max_abs() < 1e-15);
            }
        }
        let det = ExtensionModel::new(2, 2, vec![HiddenState { labels: vec![2, 0], probability: 1.0, rho: rho.clone() }]).unwrap();
        let a = induced_assemblage(&det).unwrap();
        assert_eq!(a.member(2, 0), &rho);
        assert_eq!(a.member(0, 1), &rho);
        assert_eq!(a.member(1, 0).trace(), 0.0);
    }

    #[test]
    fn model_saturates_bound_at_threshold() {
        let st = max_entangled(2);
        let m = pauli_measurements();
        let eta = EfficiencyProfile::uniform(3, 1.0 / 3.0).unwrap();
        let f = projective_functional(&projectors(&m.transposed()), &eta).unwrap();
        let model = build_extension_model(&st, &m, &eta).unwrap();
        let (ps, eta_ps) = post_select(&induced_assemblage(&model).unwrap()).unwrap();
        for (a, b) in eta_ps.etas().iter().zip(eta.etas()) {
            assert!((a - b).abs() < 1e-12);
        }
        let value = evaluate(&f, &ps).unwrap();
        let (bound, _) = ps_lhs_bound(&f, &eta, &SolveOptions::default()).unwrap();
        assert!((value - 1.0).abs() < 1e-9, "{value}");
        assert!((bound - value).abs() < 1e-6, "{bound} vs {value}");
    }

    #[test]
    fn reduction_on_mub_functional() {
        let m = mub_measurements(2, 2).unwrap();
        let f = projective_functional(&projectors(&m), &EfficiencyProfile::uniform(2, 1.0).unwrap()).unwrap();
        let r = ideal_reduction_check(&f, &SolveOptions::default()).unwrap();
        assert!(r.within_tolerance, "{r:?}");
        assert!((r.ideal_bound - (1.0 + 0.5f64.sqrt())).abs() < 1e-12);
    }
}
