//! States, measurements and the assemblages they prepare, plus the loss
//! and post-selection maps.

use log::warn;

use crate::error::{Error, Result};
use crate::hermitian::{eig_herm, is_psd, kron, partial_trace, CMatrix, HermitianMatrix, C64, PSD_TOL};
use crate::steering::{Assemblage, EfficiencyProfile};

#[derive(Clone, Debug, PartialEq)]
pub struct QuantumState {
    dims: Vec<usize>,
    rho: HermitianMatrix,
}

impl QuantumState {
    pub fn new(dims: Vec<usize>, rho: HermitianMatrix) -> Result<Self> {
        let n: usize = dims.iter().product();
        if dims.is_empty() || n != rho.dim() {
            return Err(Error::Dimension(format!("dims {dims:?} vs matrix of size {}", rho.dim())));
        }
        if !is_psd(&rho, PSD_TOL) {
            return Err(Error::Invalid("density operator is not PSD".into()));
        }
        if (rho.trace() - 1.0).abs() > 1e-10 {
            return Err(Error::Invalid(format!("density operator has trace {}", rho.trace())));
        }
        Ok(Self { dims, rho })
    }

    /// |ψ⟩⟨ψ| for a normalised (or normalisable) vector.
    pub fn pure(dims: Vec<usize>, psi: &[C64]) -> Result<Self> {
        if psi.iter().all(|z| z.norm_sqr() == 0.0) {
            return Err(Error::Invalid("zero state vector".into()));
        }
        Self::new(dims, HermitianMatrix::projector(psi))
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn rho(&self) -> &HermitianMatrix {
        &self.rho
    }

    /// Reduced state on the listed subsystems.
    pub fn marginal(&self, keep: &[usize]) -> Result<HermitianMatrix> {
        let m = partial_trace(self.rho.matrix(), &self.dims, keep)?;
        Ok(HermitianMatrix::symmetrize(&m))
    }

    /// A state vector if the state is pure (rank one within 1e-9).
    pub fn state_vector(&self) -> Option<Vec<C64>> {
        let (vals, vecs) = eig_herm(&self.rho);
        if (vals[0] - 1.0).abs() > 1e-9 {
            return None;
        }
        Some((0..self.rho.dim()).map(|i| vecs.get(i, 0)).collect())
    }
}

fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

/// (1/√d) Σ_i |i⟩|i⟩.
pub fn max_entangled(d: usize) -> QuantumState {
    let mut psi = vec![c(0.0); d * d];
    for i in 0..d {
        psi[i * d + i] = c(1.0);
    }
    QuantumState::pure(vec![d, d], &psi).expect("valid by construction")
}

/// w|Φ⁺⟩⟨Φ⁺| + (1−w)𝟙/d².
pub fn isotropic(d: usize, w: f64) -> Result<QuantumState> {
    if !(0.0..=1.0).contains(&w) {
        return Err(Error::Invalid(format!("visibility {w} outside [0, 1]")));
    }
    let phi = max_entangled(d);
    let noise = HermitianMatrix::identity(d * d).scale((1.0 - w) / (d * d) as f64);
    QuantumState::new(vec![d, d], phi.rho.scale(w).add(&noise))
}

/// cosφ|00⟩ + sinφ|11⟩.
pub fn two_qubit_pure(phi: f64) -> QuantumState {
    let psi = [c(phi.cos()), c(0.0), c(0.0), c(phi.sin())];
    QuantumState::pure(vec![2, 2], &psi).expect("valid by construction")
}

/// (|000⟩ + |111⟩)/√2.
pub fn ghz() -> QuantumState {
    let mut psi = vec![c(0.0); 8];
    psi[0] = c(1.0);
    psi[7] = c(1.0);
    QuantumState::pure(vec![2, 2, 2], &psi).expect("valid by construction")
}

/// (|001⟩ + |010⟩ + |100⟩)/√3.
pub fn w_state() -> QuantumState {
    let mut psi = vec![c(0.0); 8];
    psi[1] = c(1.0);
    psi[2] = c(1.0);
    psi[4] = c(1.0);
    QuantumState::pure(vec![2, 2, 2], &psi).expect("valid by construction")
}

pub fn product(states: &[&QuantumState]) -> Result<QuantumState> {
    let (first, rest) = states
        .split_first()
        .ok_or_else(|| Error::Invalid("empty product".into()))?;
    let mut rho = first.rho.clone();
    let mut dims = first.dims.clone();
    for s in rest {
        rho = rho.kron(&s.rho);
        dims.extend_from_slice(&s.dims);
    }
    QuantumState::new(dims, rho)
}

#[derive(Clone, Debug, PartialEq)]
pub struct MeasurementSet {
    /// `elements[x][a - 1]`.
    elements: Vec<Vec<HermitianMatrix>>,
}

impl MeasurementSet {
    pub fn new(elements: Vec<Vec<HermitianMatrix>>) -> Result<Self> {
        let first = elements
            .first()
            .and_then(|r| r.first())
            .ok_or_else(|| Error::Invalid("empty measurement set".into()))?;
        let d = first.dim();
        let k = elements[0].len();
        for (x, row) in elements.iter().enumerate() {
            if row.len() != k || row.iter().any(|e| e.dim() != d) {
                return Err(Error::Dimension(format!("measurement {x} is ragged")));
            }
            if row.iter().any(|e| !is_psd(e, PSD_TOL)) {
                return Err(Error::Invalid(format!("measurement {x} has a non-PSD element")));
            }
            let sum = row.iter().fold(HermitianMatrix::zeros(d), |acc, e| acc.add(e));
            if sum.max_abs_diff(&HermitianMatrix::identity(d)) > 1e-10 {
                return Err(Error::Invalid(format!("measurement {x} does not sum to the identity")));
            }
        }
        Ok(Self { elements })
    }

    /// Projective measurements from orthonormal bases: `bases[x][a]` is the
    /// vector for outcome `a + 1`.
    pub fn from_bases(bases: &[Vec<Vec<C64>>]) -> Result<Self> {
        Self::new(
            bases
                .iter()
                .map(|b| b.iter().map(|v| HermitianMatrix::projector(v)).collect())
                .collect(),
        )
    }

    pub fn dim(&self) -> usize {
        self.elements[0][0].dim()
    }

    pub fn settings(&self) -> usize {
        self.elements.len()
    }

    pub fn outcomes(&self) -> usize {
        self.elements[0].len()
    }

    /// M_{a|x}, `a ∈ 1..=outcomes`.
    pub fn element(&self, a: usize, x: usize) -> &HermitianMatrix {
        &self.elements[x][a - 1]
    }

    pub fn elements(&self) -> &[Vec<HermitianMatrix>] {
        &self.elements
    }

    /// Elementwise transpose in the computational basis.
    pub fn transposed(&self) -> Self {
        Self {
            elements: self
                .elements
                .iter()
                .map(|r| r.iter().map(HermitianMatrix::transpose).collect())
                .collect(),
        }
    }
}

/// Eigenbases of X, Y and Z in that order; outcome 1 is the +1 eigenvalue.
pub fn pauli_measurements() -> MeasurementSet {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let i = C64::new(0.0, s);
    MeasurementSet::from_bases(&[
        vec![vec![c(s), c(s)], vec![c(s), c(-s)]],
        vec![vec![c(s), i], vec![c(s), -i]],
        vec![vec![c(1.0), c(0.0)], vec![c(0.0), c(1.0)]],
    ])
    .expect("valid by construction")
}

/// Mutually unbiased bases for prime `d`: the computational basis followed
/// by up to `d` Fourier-type bases. For `d = 2` the order is Z, X, Y.
pub fn mub_measurements(d: usize, m: usize) -> Result<MeasurementSet> {
    if d < 2 || (2..d).any(|p| d % p == 0) {
        return Err(Error::Unsupported(format!("MUB construction needs prime d, got {d}")));
    }
    if m == 0 || m > d + 1 {
        return Err(Error::Invalid(format!("at most {} MUBs in dimension {d}", d + 1)));
    }
    let mut bases = Vec::with_capacity(m);
    bases.push(
        (0..d)
            .map(|j| (0..d).map(|n| c(f64::from(u8::from(n == j)))).collect())
            .collect::<Vec<Vec<C64>>>(),
    );
    let norm = 1.0 / (d as f64).sqrt();
    let tau = 2.0 * std::f64::consts::PI / d as f64;
    for k in 0..(m - 1) {
        let basis = (0..d)
            .map(|j| {
                (0..d)
                    .map(|n| {
                        let phase = if d == 2 {
                            // X then Y: |±⟩ and |±i⟩
                            (j * n) as f64 * std::f64::consts::PI + (k * n) as f64 * std::f64::consts::FRAC_PI_2
                        } else {
                            tau * ((k * n * n + j * n) % d) as f64
                        };
                        C64::from_polar(norm, phase)
                    })
                    .collect()
            })
            .collect();
        bases.push(basis);
    }
    MeasurementSet::from_bases(&bases)
}

/// Rank-1 projectors of a measurement set, `[x][a - 1]`.
pub fn projectors(m: &MeasurementSet) -> Vec<Vec<HermitianMatrix>> {
    m.elements.clone()
}

/// σ_{a|x} = tr_A[(M_{a|x} ⊗ 𝟙)ρ] for a bipartite state.
pub fn assemblage_from_state(state: &QuantumState, m: &MeasurementSet) -> Result<Assemblage> {
    let dims = state.dims();
    if dims.len() != 2 || dims[0] != m.dim() {
        return Err(Error::Dimension(format!(
            "state dims {dims:?} vs measurement dimension {}",
            m.dim()
        )));
    }
    let id_b = CMatrix::identity(dims[1]);
    let mut members = Vec::with_capacity(m.settings());
    for row in m.elements() {
        let mut r = Vec::with_capacity(row.len());
        for e in row {
            let op = &kron(e.matrix(), &id_b) * state.rho().matrix();
            r.push(HermitianMatrix::symmetrize(&partial_trace(&op, dims, &[1])?));
        }
        members.push(r);
    }
    Assemblage::new(members, false)
}

/// A-priori assemblage: σ⁰_{a|x} = η_x σ_{a|x} and
/// σ⁰_{0|x} = (1 − η_x) Σ_a σ_{a|x}.
pub fn apply_loss(a: &Assemblage, eta: &EfficiencyProfile) -> Result<Assemblage> {
    if a.includes_no_click() {
        return Err(Error::Invalid("loss is applied to ideal assemblages only".into()));
    }
    if eta.etas().len() != a.settings() {
        return Err(Error::Dimension("efficiency profile length".into()));
    }
    let members = (0..a.settings())
        .map(|x| {
            let e = eta.etas()[x];
            let mut row = vec![a.total(x).scale(1.0 - e)];
            row.extend((1..=a.outcomes()).map(|k| a.member(k, x).scale(e)));
            row
        })
        .collect();
    Assemblage::new(members, true)
}

/// Discards no-clicks and renormalises: σ^ps_{a|x} = σ⁰_{a|x}/η_x with
/// η_x = tr Σ_{a≠0} σ⁰_{a|x}.
pub fn post_select(a0: &Assemblage) -> Result<(Assemblage, EfficiencyProfile)> {
    let mut etas = Vec::with_capacity(a0.settings());
    let mut members = Vec::with_capacity(a0.settings());
    for x in 0..a0.settings() {
        let e = a0.conclusive_trace(x);
        if e <= 0.0 {
            return Err(Error::Efficiency(format!("setting {x} never clicks")));
        }
        etas.push(e.min(1.0));
        members.push((1..=a0.outcomes()).map(|k| a0.member(k, x).scale(1.0 / e)).collect());
    }
    Ok((Assemblage::new(members, false)?, EfficiencyProfile::new(etas)?))
}

/// Projectors steered on Bob's side of a pure state when Alice measures
/// Π^⊺: Π′ = √ρ_B Π √ρ_B / tr[ρ_B Π] with P(a|x) = tr[ρ_B Π].
///
/// Rank-deficient marginals are handled on their support with a warning.
/// An outcome of zero probability keeps its original projector.
pub fn steered_projectors_for_pure_state(
    psi: &QuantumState,
    projectors: &[Vec<HermitianMatrix>],
) -> Result<(Vec<Vec<HermitianMatrix>>, Vec<Vec<f64>>)> {
    if psi.dims().len() != 2 || psi.state_vector().is_none() {
        return Err(Error::Invalid("expected a pure bipartite state".into()));
    }
    let rho_b = psi.marginal(&[1])?;
    let (vals, _) = eig_herm(&rho_b);
    if vals.iter().any(|&v| v < 1e-12) {
        warn!("marginal is rank deficient; restricting to its support");
    }
    let root = rho_b.map_spectrum(|v| v.max(0.0).sqrt());
    let mut primes = Vec::with_capacity(projectors.len());
    let mut probs = Vec::with_capacity(projectors.len());
    for row in projectors {
        let mut pr = Vec::with_capacity(row.len());
        let mut pp = Vec::with_capacity(row.len());
        for p in row {
            if p.dim() != rho_b.dim() {
                return Err(Error::Dimension("projector dimension".into()));
            }
            let prob = rho_b.inner(p);
            if prob <= 1e-14 {
                warn!("outcome has zero probability on this state");
                pr.push(p.clone());
            } else {
                pr.push(HermitianMatrix::symmetrize(&(&(root.matrix() * p.matrix()) * root.matrix())).scale(1.0 / prob));
            }
            pp.push(prob.max(0.0));
        }
        primes.push(pr);
        probs.push(pp);
    }
    Ok((primes, probs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hermitian::pauli;
    use proptest::prelude::*;

    fn zx() -> MeasurementSet {
        mub_measurements(2, 2).unwrap()
    }

    #[test]
    fn max_entangled_marginals() {
        for d in [2, 3] {
            let s = max_entangled(d);
            let m = s.marginal(&[0]).unwrap();
            assert!(m.max_abs_diff(&HermitianMatrix::identity(d).scale(1.0 / d as f64)) < 1e-14);
        }
        let s = 0.5f64.sqrt();
        let bell = [c(s), c(0.0), c(0.0), c(s)];
        let fid = HermitianMatrix::projector(&bell).inner(max_entangled(2).rho());
        assert!((fid - 1.0).abs() < 1e-14);
    }

    #[test]
    fn isotropic_examples() {
        assert!(isotropic(2, 1.0).unwrap().rho().max_abs_diff(max_entangled(2).rho()) < 1e-15);
        assert!(isotropic(3, 0.0).unwrap().rho().max_abs_diff(&HermitianMatrix::identity(9).scale(1.0 / 9.0)) < 1e-15);
        let (vals, _) = eig_herm(isotropic(2, 0.5).unwrap().rho());
        for (v, e) in vals.iter().zip([0.625, 0.125, 0.125, 0.125]) {
            assert!((v - e).abs() < 1e-12);
        }
        assert!(isotropic(2, 1.5).is_err());
    }

    #[test]
    fn bell_state_assemblage() {
        let m = zx();
        let a = assemblage_from_state(&max_entangled(2), &m.transposed()).unwrap();
        for x in 0..2 {
            for k in 1..=2 {
                assert!(a.member(k, x).max_abs_diff(&m.element(k, x).scale(0.5)) < 1e-14);
            }
        }
    }

    #[test]
    fn product_state_is_unsteerable() {
        let rho_a = QuantumState::new(vec![2], HermitianMatrix::from_real_diagonal(&[0.8, 0.2])).unwrap();
        let rho_b = QuantumState::new(vec![2], HermitianMatrix::from_real_diagonal(&[0.3, 0.7])).unwrap();
        let st = product(&[&rho_a, &rho_b]).unwrap();
        let m = pauli_measurements();
        let a = assemblage_from_state(&st, &m).unwrap();
        for x in 0..3 {
            for k in 1..=2 {
                let p = m.element(k, x).inner(rho_a.rho());
                assert!(a.member(k, x).max_abs_diff(&rho_b.rho().scale(p)) < 1e-14);
            }
        }
    }

    #[test]
    fn isotropic_assemblage() {
        let w = 0.7;
        let m = pauli_measurements();
        let a = assemblage_from_state(&isotropic(2, w).unwrap(), &m.transposed()).unwrap();
        for x in 0..3 {
            for k in 1..=2 {
                let expect = m.element(k, x).scale(w / 2.0).add(&HermitianMatrix::identity(2).scale((1.0 - w) / 4.0));
                assert!(a.member(k, x).max_abs_diff(&expect) < 1e-14);
            }
        }
    }

    #[test]
    fn loss_examples() {
        let a = assemblage_from_state(&max_entangled(2), &zx().transposed()).unwrap();
        let l = apply_loss(&a, &EfficiencyProfile::uniform(2, 1.0).unwrap()).unwrap();
        assert!(l.member(0, 0).matrix().max_abs() == 0.0 && l.member(0, 1).matrix().max_abs() == 0.0);
        let eta = EfficiencyProfile::new(vec![0.8, 0.6]).unwrap();
        let l = apply_loss(&a, &eta).unwrap();
        for (x, e) in [0.8, 0.6].into_iter().enumerate() {
            for k in 1..=2 {
                assert!(l.member(k, x).max_abs_diff(&a.member(k, x).scale(e)) < 1e-15);
            }
            let expect = HermitianMatrix::identity(2).scale((1.0 - e) / 2.0);
            assert!(l.member(0, x).max_abs_diff(&expect) < 1e-15);
            assert!((l.total(x).trace() - 1.0).abs() < 1e-14);
        }
        let (ps, back) = post_select(&l).unwrap();
        assert!((back.etas()[0] - 0.8).abs() < 1e-15 && (back.etas()[1] - 0.6).abs() < 1e-15);
        for x in 0..2 {
            for k in 1..=2 {
                assert!(ps.member(k, x).max_abs_diff(a.member(k, x)) < 1e-12);
            }
        }
        assert!(apply_loss(&l, &eta).is_err());
    }

    #[test]
    fn post_select_rejects_dead_setting() {
        let a = assemblage_from_state(&max_entangled(2), &zx()).unwrap();
        let l = apply_loss(&a, &EfficiencyProfile::new(vec![0.0, 0.5]).unwrap()).unwrap();
        assert!(matches!(post_select(&l), Err(Error::Efficiency(_))));
    }

    #[test]
    fn steered_projectors_examples() {
        let p = projectors(&zx());
        let (pp, probs) = steered_projectors_for_pure_state(&max_entangled(2), &p).unwrap();
        for x in 0..2 {
            for k in 0..2 {
                assert!(pp[x][k].max_abs_diff(&p[x][k]) < 1e-12);
                assert!((probs[x][k] - 0.5).abs() < 1e-12);
            }
        }
        let phi = 0.4f64;
        let (pp, probs) = steered_projectors_for_pure_state(&two_qubit_pure(phi), &p[..1]).unwrap();
        assert!(pp[0][0].max_abs_diff(&p[0][0]) < 1e-12 && pp[0][1].max_abs_diff(&p[0][1]) < 1e-12);
        assert!((probs[0][0] - phi.cos().powi(2)).abs() < 1e-12);
        assert!((probs[0][1] - phi.sin().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn pauli_conventions() {
        let m = pauli_measurements();
        for (x, obs) in [pauli::x(), pauli::y(), pauli::z()].iter().enumerate() {
            let o = m.element(1, x).sub(m.element(2, x));
            assert!(o.max_abs_diff(obs) < 1e-14);
        }
        let cos = crate::steering::cos_theta(&projectors(&m)).unwrap();
        assert!((cos - 0.5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn mubs_are_unbiased() {
        for d in [2usize, 3, 5] {
            let m = mub_measurements(d, d + 1).unwrap();
            for x in 0..m.settings() {
                for y in (x + 1)..m.settings() {
                    for a in 1..=d {
                        for b in 1..=d {
                            let o = m.element(a, x).inner(m.element(b, y));
                            assert!((o - 1.0 / d as f64).abs() < 1e-12, "d={d} x={x} y={y}");
                        }
                    }
                }
            }
        }
        assert!(mub_measurements(4, 2).is_err());
        let zxy = mub_measurements(2, 3).unwrap();
        assert!(zxy.element(1, 0).sub(zxy.element(2, 0)).max_abs_diff(&pauli::z()) < 1e-14);
        assert!(zxy.element(1, 1).sub(zxy.element(2, 1)).max_abs_diff(&pauli::x()) < 1e-14);
        assert!(zxy.element(1, 2).sub(zxy.element(2, 2)).max_abs_diff(&pauli::y()) < 1e-14);
    }

    fn random_pure(v: &[(f64, f64)]) -> QuantumState {
        let psi: Vec<C64> = v.iter().map(|&(r, i)| C64::new(r, i)).collect();
        QuantumState::pure(vec![2, 2], &psi).unwrap()
    }

    proptest! {
        #[test]
        fn loss_then_post_select_is_identity(
            v in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4)
                .prop_filter("nonzero", |v| v.iter().map(|(a, b)| a * a + b * b).sum::<f64>() > 0.1),
            e0 in 0.05f64..1.0, e1 in 0.05f64..1.0, e2 in 0.05f64..1.0,
        ) {
            let st = random_pure(&v);
            let a = assemblage_from_state(&st, &pauli_measurements()).unwrap();
            let eta = EfficiencyProfile::new(vec![e0, e1, e2]).unwrap();
            let l = apply_loss(&a, &eta).unwrap();
            for x in 0..3 {
                prop_assert!((l.total(x).trace() - 1.0).abs() < 1e-12);
                prop_assert!((l.member(0, x).trace() - (1.0 - eta.etas()[x])).abs() < 1e-12);
            }
            let (ps, back) = post_select(&l).unwrap();
            for x in 0..3 {
                prop_assert!((back.etas()[x] - eta.etas()[x]).abs() < 1e-12);
                for k in 1..=2 {
                    prop_assert!(ps.member(k, x).max_abs_diff(a.member(k, x)) < 1e-12);
                }
            }
        }

        #[test]
        fn steered_projectors_are_rank_one(
            v in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 4)
                .prop_filter("entangled enough", |v| {
                    let n: f64 = v.iter().map(|(a, b)| a * a + b * b).sum();
                    let det = (C64::new(v[0].0, v[0].1) * C64::new(v[3].0, v[3].1)
                        - C64::new(v[1].0, v[1].1) * C64::new(v[2].0, v[2].1)).norm();
                    n > 0.1 && det / n > 0.05
                }),
        ) {
            let st = random_pure(&v);
            let (pp, probs) = steered_projectors_for_pure_state(&st, &projectors(&pauli_measurements())).unwrap();
            for (row, pr) in pp.iter().zip(&probs) {
                prop_assert!((pr.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                for p in row {
                    prop_assert!((p.trace() - 1.0).abs() < 1e-9);
                    prop_assert!((p.inner(p) - 1.0).abs() < 1e-9);
                }
            }
        }
    }
}
