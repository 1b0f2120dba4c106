//! Heralded two-ion states are physical density matrices and agree with
//! the closed-form Bell-state overlap.

use faer::{Mat, Side};
use num_complex::Complex64;
use proptest::prelude::*;
use tfln_bsa::bellstate::{
    expectation, fidelity_closed_form, heralded_state_closed_form, oracle_coincidence, projector, singlet, trace, DensityMatrix, DetectionModel,
    InputWeights,
};
use tfln_bsa::coupler::TransferCoefficients;

fn eigenvalues(rho: &DensityMatrix) -> Vec<f64> {
    let m = Mat::<Complex64>::from_fn(4, 4, |i, j| rho[i][j]);
    m.self_adjoint_eigenvalues(Side::Lower).expect("hermitian eigenvalues")
}

fn assert_physical(rho: &DensityMatrix) {
    assert!((trace(rho) - 1.0).abs() < 1e-12);
    for i in 0..4 {
        for j in 0..4 {
            assert!((rho[i][j] - rho[j][i].conj()).norm() < 1e-12);
        }
    }
    for ev in eigenvalues(rho) {
        assert!(ev > -1e-12, "negative eigenvalue {ev}");
    }
}

fn angle() -> impl Strategy<Value = f64> {
    0.05..(std::f64::consts::FRAC_PI_2 - 0.05)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn resolving_state_is_physical_and_rank_two(a in angle(), b in angle()) {
        let t = TransferCoefficients::from_angles(a, b);
        let r = oracle_coincidence(&t, &InputWeights::default(), DetectionModel::OppositePolarizationResolving).unwrap();
        assert_physical(&r.heralded_state);
        // the two heralds give mirror-image pure states with equal weight;
        // the closed form is the (c_V, d_H) one
        let ev = eigenvalues(&r.heralded_state);
        prop_assert!(ev[0].abs() < 1e-12 && ev[1].abs() < 1e-12, "{ev:?}");
        let psi = heralded_state_closed_form(&t).unwrap();
        let mut swapped = psi;
        swapped.swap(1, 2);
        let (p, q) = (projector(&psi), projector(&swapped));
        for i in 0..4 {
            for j in 0..4 {
                prop_assert!((r.heralded_state[i][j] - 0.5 * (p[i][j] + q[i][j])).norm() < 1e-12);
            }
        }
        prop_assert!((expectation(&r.heralded_state, &singlet()) - r.fidelity).abs() < 1e-12);
        let closed = fidelity_closed_form(&t).unwrap();
        prop_assert!((closed.fidelity - r.fidelity).abs() < 1e-12);
    }

    #[test]
    fn bucket_state_is_physical_mixture(a in angle(), b in angle(), h in 0.1..1.0f64, v in 0.1..1.0f64) {
        let t = TransferCoefficients::from_angles(a, b);
        let r = oracle_coincidence(&t, &InputWeights::uniform(h, v), DetectionModel::BucketCoincidence).unwrap();
        assert_physical(&r.heralded_state);
        prop_assert!(r.coincidence_probability > 0.0 && r.coincidence_probability <= 1.0);
    }
}

#[test]
fn balanced_splitter_heralds_the_singlet() {
    let t = TransferCoefficients::from_angles(std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_4);
    let r = oracle_coincidence(&t, &InputWeights::default(), DetectionModel::OppositePolarizationResolving).unwrap();
    assert!((r.fidelity - 1.0).abs() < 1e-12);
    let ev = eigenvalues(&r.heralded_state);
    assert!(ev[..3].iter().all(|e| e.abs() < 1e-12));
}
