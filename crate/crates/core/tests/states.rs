use qent_core::linalg::{haar_unitary, CMatrix};
use qent_core::rng::stream;
use qent_core::states::{haar_pure, hs_mixed, named_state, nmr_mixture, separable_pure, NamedState, PureState};

use proptest::prelude::*;

fn mean_and_stderr(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

#[test]
fn haar_overlap_with_basis_vector_averages_one_over_dimension() {
    let xs: Vec<f64> = (0..10_000)
        .map(|i| haar_pure(&[3, 3], &mut stream(11, i)).unwrap().amps()[0].norm_sqr())
        .collect();
    let (mean, se) = mean_and_stderr(&xs);
    assert!((mean - 1.0 / 9.0).abs() < 3.0 * se, "mean {mean}, se {se}");
}

#[test]
fn hilbert_schmidt_mean_purity() {
    let xs: Vec<f64> = (0..10_000)
        .map(|i| hs_mixed(&[3, 3], 9, &mut stream(12, i)).unwrap().purity())
        .collect();
    let (mean, se) = mean_and_stderr(&xs);
    let expect = 18.0 / 82.0;
    assert!((mean - expect).abs() < 3.0 * se, "mean {mean}, se {se}");
}

#[test]
fn max_entangled_three() {
    let me = named_state(NamedState::MaxEntangled(3)).unwrap();
    let s = 1.0 / 3f64.sqrt();
    for i in [0, 4, 8] {
        assert!((me.amps()[i].re - s).abs() < 1e-15);
    }
    assert!((me.amps().norm() - 1.0).abs() < 1e-12);
}

#[test]
fn separable_states_have_unit_schmidt_coefficient() {
    let mut rng = stream(13, 0);
    for _ in 0..20 {
        let psi = separable_pure(&[3, 3], &mut rng).unwrap();
        let top = qent_core::measures::max_schmidt_coefficient(&psi).unwrap();
        assert!((top - 1.0).abs() < 1e-10);
    }
}

proptest! {
    #[test]
    fn samplers_are_deterministic(seed in any::<u64>(), idx in 0u64..1000, rank in 1usize..=9) {
        let a = hs_mixed(&[3, 3], rank, &mut stream(seed, idx)).unwrap();
        let b = hs_mixed(&[3, 3], rank, &mut stream(seed, idx)).unwrap();
        prop_assert_eq!(a, b);
        let p = separable_pure(&[2, 2, 2], &mut stream(seed, idx)).unwrap();
        let q = separable_pure(&[2, 2, 2], &mut stream(seed, idx)).unwrap();
        prop_assert_eq!(p, q);
    }

    #[test]
    fn sampled_states_satisfy_invariants(seed in any::<u64>(), rank in 1usize..=9, eps in 0.0f64..=1.0) {
        let rho = hs_mixed(&[3, 3], rank, &mut stream(seed, 0)).unwrap();
        rho.validate().unwrap();
        nmr_mixture(eps, &rho).unwrap().validate().unwrap();
        let psi = haar_pure(&[3, 3], &mut stream(seed, 1)).unwrap();
        prop_assert!((psi.amps().norm() - 1.0).abs() < 1e-12);
        PureState::new(psi.amps().clone(), vec![3, 3]).unwrap();
    }

    #[test]
    fn local_unitaries_keep_states_valid(seed in any::<u64>()) {
        let mut rng = stream(seed, 0);
        let psi = haar_pure(&[2, 2, 2], &mut rng).unwrap();
        let us: Vec<CMatrix> = (0..3).map(|_| haar_unitary(2, &mut rng)).collect();
        let out = psi.apply_local(&us).unwrap();
        prop_assert!((out.amps().norm() - 1.0).abs() < 1e-12);
    }
}
