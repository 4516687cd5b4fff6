use nalgebra::DMatrix;
use postsel::bell::{lhv_bound, ps_lhv_bound, tilted_chsh, LossPreset};
use postsel::conic::{SolveOptions, Status};
use postsel::extension::{build_extension_model, induced_assemblage};
use postsel::hermitian::{CMatrix, HermitianMatrix, C64};
use postsel::scenario::{apply_loss, assemblage_from_state, post_select, MeasurementSet, QuantumState};
use postsel::steering::{lhs_bound, ps_lhs_bound, ps_lhs_membership, EfficiencyProfile, SteeringFunctional};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn c(rng: &mut ChaCha8Rng) -> C64 {
    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
}

fn random_hermitian(rng: &mut ChaCha8Rng, d: usize) -> HermitianMatrix {
    let m = CMatrix::from_nalgebra(DMatrix::from_fn(d, d, |_, _| c(rng)));
    HermitianMatrix::symmetrize(&m)
}

fn random_projective(rng: &mut ChaCha8Rng, d: usize, m: usize) -> MeasurementSet {
    let bases: Vec<Vec<Vec<C64>>> = (0..m)
        .map(|_| {
            let u = DMatrix::from_fn(d, d, |_, _| c(rng)).qr().q();
            (0..d).map(|k| u.column(k).iter().copied().collect()).collect()
        })
        .collect();
    MeasurementSet::from_bases(&bases).unwrap()
}

fn random_state(rng: &mut ChaCha8Rng, d: usize) -> QuantumState {
    let g = CMatrix::from_nalgebra(DMatrix::from_fn(d * d, d * d, |_, _| c(rng)));
    let rho = HermitianMatrix::symmetrize(&(&g * &g.adjoint()));
    let t = rho.trace();
    QuantumState::new(vec![d, d], rho.scale(1.0 / t)).unwrap()
}

/// Efficiencies with Σ η_x ≤ 1.
fn sub_normalised(weights: &[f64], total: f64) -> EfficiencyProfile {
    let s: f64 = weights.iter().sum();
    EfficiencyProfile::new(weights.iter().map(|w| w / s * total).collect()).unwrap()
}

fn opts() -> SolveOptions {
    SolveOptions::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn extension_model_reproduces_lossy_assemblage(
        seed in any::<u64>(),
        weights in proptest::collection::vec(0.05f64..1.0, 2..=3),
        total in 0.2f64..=1.0,
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_state(&mut rng, 2);
        let ms = random_projective(&mut rng, 2, weights.len());
        let eta = sub_normalised(&weights, total);
        let model = build_extension_model(&rho, &ms, &eta).unwrap();
        let induced = induced_assemblage(&model).unwrap();
        let expected = apply_loss(&assemblage_from_state(&rho, &ms).unwrap(), &eta).unwrap();
        for x in 0..ms.settings() {
            prop_assert!((induced.conclusive_trace(x) - eta.etas()[x]).abs() < 1e-12);
            for a in 0..=ms.outcomes() {
                let dev = induced.member(a, x).sub(expected.member(a, x)).matrix().max_abs();
                prop_assert!(dev < 1e-12, "setting {x} outcome {a}: {dev}");
            }
        }
        let p: f64 = model.hidden_states().iter().map(|h| h.probability).sum();
        prop_assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn induced_assemblage_is_post_selected_local(
        seed in any::<u64>(),
        weights in proptest::collection::vec(0.05f64..1.0, 2),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rho = random_state(&mut rng, 2);
        let ms = random_projective(&mut rng, 2, 2);
        let eta = sub_normalised(&weights, 1.0);
        let induced = induced_assemblage(&build_extension_model(&rho, &ms, &eta).unwrap()).unwrap();
        let (ps, measured) = post_select(&induced).unwrap();
        let sol = ps_lhs_membership(&ps, &measured, &opts()).unwrap();
        prop_assert_eq!(sol.status, Status::Optimal);
    }

    #[test]
    fn post_selection_never_lowers_the_bound(
        seed in any::<u64>(),
        etas in proptest::collection::vec(0.05f64..=1.0, 2),
    ) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ops: Vec<Vec<HermitianMatrix>> =
            (0..2).map(|_| (0..2).map(|_| random_hermitian(&mut rng, 2)).collect()).collect();
        let f = SteeringFunctional::new(ops, 0.0).unwrap();
        let eta = EfficiencyProfile::new(etas).unwrap();
        let (ideal, _) = lhs_bound(&f, &opts()).unwrap();
        let (ps, sol) = ps_lhs_bound(&f, &eta, &opts()).unwrap();
        prop_assert_eq!(sol.status, Status::Optimal);
        prop_assert!(ps >= ideal - 1e-6, "{ps} < {ideal}");
        prop_assert!(sol.gap <= 1e-7);
    }

    #[test]
    fn bell_post_selection_never_lowers_the_bound(alpha in 1.0f64..=1.5, eta in 0.05f64..=1.0) {
        let f = tilted_chsh(alpha);
        let ideal = lhv_bound(&f).unwrap();
        for preset in [LossPreset::Uncorrelated, LossPreset::OneSided, LossPreset::PerfectlyCorrelated] {
            let r = ps_lhv_bound(&f, &preset.profile(2, eta).unwrap(), &opts()).unwrap();
            prop_assert!(r.simplex_value >= ideal - 1e-9);
            prop_assert!((r.value - r.simplex_value).abs() <= 1e-7);
            prop_assert!(r.simplex_value <= 2.0 * alpha + 2.0 + 1e-9);
        }
    }
}

#[test]
fn efficiencies_above_one_in_total_are_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let rho = random_state(&mut rng, 2);
    let ms = random_projective(&mut rng, 2, 2);
    let eta = EfficiencyProfile::new(vec![0.6, 0.6]).unwrap();
    assert!(build_extension_model(&rho, &ms, &eta).is_err());
}
