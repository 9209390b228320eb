use std::f64::consts::PI;

use num_complex::Complex64;
use proptest::prelude::*;

use qent_core::measurement::*;
use qent_core::rng::stream;
use qent_core::states::{haar_pure, hs_mixed, named_state, nmr_mixture, DensityMatrix, NamedState, PureState};

const CGLMP_PSI3_MV: f64 = 2.9148538552424643;
const CGLMP_ME3: f64 = 2.8729340511723374;
const OPTIMAL_GAMMA: f64 = 0.6168940249625937;

#[test]
fn cglmp_basis_vectors() {
    let a = cglmp_basis(3, 0, 0).unwrap();
    let s = 1.0 / 3f64.sqrt();
    for k in 0..3 {
        assert!((a.vectors[0][k] - Complex64::from(s)).norm() < 1e-15);
    }
    let b = cglmp_basis(3, 1, 0).unwrap();
    let expect = Complex64::from_polar(s, 2.0 * PI * 0.25 / 3.0);
    assert!((b.vectors[0][1] - expect).norm() < 1e-15);
    for d in 2..=10 {
        for party in 0..2 {
            for setting in 0..2 {
                assert!(cglmp_basis(d, party, setting).unwrap().orthonormality_error() < 1e-12);
            }
        }
    }
}

#[test]
fn maximally_mixed_table_is_uniform() {
    let rho = DensityMatrix::maximally_mixed(vec![3, 3]).unwrap();
    let table = outcome_distribution(&rho, &cglmp_settings(3).unwrap()).unwrap();
    assert!(table.probs().iter().all(|p| (p - 1.0 / 9.0).abs() < 1e-15));
    let flat = features_bipartite(&table, Layout::Flat).unwrap();
    assert_eq!(flat.len(), 36);
    assert!(cglmp_value(&table, 3).unwrap().abs() < 1e-14);
}

#[test]
fn product_state_under_sigma_x() {
    let rho = PureState::basis(vec![2, 2], 0).unwrap().projector();
    let xx = vec![vec![pauli_basis(PauliAxis::X)], vec![pauli_basis(PauliAxis::X)]];
    let table = outcome_distribution(&rho, &xx).unwrap();
    assert!(table.probs().iter().all(|p| (p - 0.25).abs() < 1e-15));
}

#[test]
fn cglmp_values_of_named_states() {
    let mv = named_state(NamedState::psi3_mv()).unwrap();
    let table = outcome_distribution(&mv.projector(), &cglmp_settings(3).unwrap()).unwrap();
    let v = cglmp_value(&table, 3).unwrap();
    assert!((v - CGLMP_PSI3_MV).abs() < 1e-10, "{v}");
    assert!(v > 2.9);
    let me = named_state(NamedState::MaxEntangled(3)).unwrap();
    let w = cglmp_of_pure(&me).unwrap();
    assert!((w - CGLMP_ME3).abs() < 1e-10, "{w}");
    assert!(w < v);
}

#[test]
fn phi_gamma_violations() {
    for (g, expect) in [
        (0.6, 2.8345571281370012),
        (0.617, 2.780804621325156),
        (0.65, 2.5903308520880572),
        (std::f64::consts::FRAC_1_SQRT_2, 1.154700538379252),
    ] {
        let v = cglmp_of_pure(&named_state(NamedState::PhiGamma(g)).unwrap()).unwrap();
        assert!((v - expect).abs() < 1e-10, "gamma {g}: {v}");
    }
}

#[test]
fn optimal_gamma_matches_closed_form() {
    let g = optimal_psi3_gamma();
    assert!((g - OPTIMAL_GAMMA).abs() < 1e-7, "{g}");
    let v = cglmp_of_pure(&named_state(NamedState::Psi3Mv { gamma: g }).unwrap()).unwrap();
    assert!(v >= CGLMP_PSI3_MV);
}

#[test]
fn mixing_with_white_noise_scales_the_violation() {
    let mv = named_state(NamedState::psi3_mv()).unwrap().projector();
    let settings = cglmp_settings(3).unwrap();
    let full = cglmp_value(&outcome_distribution(&mv, &settings).unwrap(), 3).unwrap();
    for k in 0..=10 {
        let eps = k as f64 / 10.0;
        let rho = nmr_mixture(eps, &mv).unwrap();
        let v = cglmp_value(&outcome_distribution(&rho, &settings).unwrap(), 3).unwrap();
        assert!((v - eps * full).abs() < 1e-10);
    }
}

#[test]
fn grid_for_qudit_five() {
    let rho = hs_mixed(&[5, 5], 25, &mut stream(3, 0)).unwrap();
    let table = outcome_distribution(&rho, &cglmp_settings(5).unwrap()).unwrap();
    let grid = features_bipartite(&table, Layout::Grid).unwrap();
    assert_eq!(grid.len(), 100);
    for bx in 0..2 {
        for by in 0..2 {
            let s: f64 = (0..5)
                .flat_map(|r| (0..5).map(move |c| (bx * 5 + r) * 10 + by * 5 + c))
                .map(|i| grid[i])
                .sum();
            assert!((s - 1.0).abs() < 1e-10);
        }
    }
}

#[test]
fn three_qubit_features() {
    let zero = PureState::basis(vec![2, 2, 2], 0).unwrap();
    let table = outcome_distribution_pure(&zero, &pauli_settings(3)).unwrap();
    let f = features_threequbit(&table).unwrap();
    assert_eq!(f.len(), 64);
    assert!((f[0] - 0.125).abs() < 1e-15);
    let ghz = features_threequbit(&outcome_distribution_pure(&named_state(NamedState::Ghz).unwrap(), &pauli_settings(3)).unwrap()).unwrap();
    let w = features_threequbit(&outcome_distribution_pure(&named_state(NamedState::W).unwrap(), &pauli_settings(3)).unwrap()).unwrap();
    let diff = ghz.iter().zip(&w).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff > 0.01);
    for block in ghz.chunks(8) {
        assert!((block.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }
}

fn random_table(seed: u64) -> ProbTable {
    let rho = hs_mixed(&[3, 3], 9, &mut stream(seed, 0)).unwrap();
    outcome_distribution(&rho, &cglmp_settings(3).unwrap()).unwrap()
}

proptest! {
    #[test]
    fn tables_are_valid_probabilities(seed in any::<u64>(), d in 2usize..=6) {
        let rho = hs_mixed(&[d, d], d * d, &mut stream(seed, 0)).unwrap();
        let table = outcome_distribution(&rho, &cglmp_settings(d).unwrap()).unwrap();
        table.validate().unwrap();
        let psi = haar_pure(&[d, d], &mut stream(seed, 1)).unwrap();
        let a = outcome_distribution_pure(&psi, &cglmp_settings(d).unwrap()).unwrap();
        let b = outcome_distribution(&psi.projector(), &cglmp_settings(d).unwrap()).unwrap();
        for (x, y) in a.probs().iter().zip(b.probs()) {
            prop_assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn cglmp_is_linear(s1 in any::<u64>(), s2 in any::<u64>(), lambda in 0.0f64..=1.0) {
        let (t1, t2) = (random_table(s1), random_table(s2));
        let mixed: Vec<f64> = t1.probs().iter().zip(t2.probs()).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
        let t = ProbTable::new(mixed, vec![2, 2], vec![3, 3]).unwrap();
        let lhs = cglmp_value(&t, 3).unwrap();
        let rhs = lambda * cglmp_value(&t1, 3).unwrap() + (1.0 - lambda) * cglmp_value(&t2, 3).unwrap();
        prop_assert!((lhs - rhs).abs() < 1e-10);
    }

    #[test]
    fn layouts_round_trip(seed in any::<u64>(), d in 2usize..=6) {
        let rho = hs_mixed(&[d, d], d * d, &mut stream(seed, 0)).unwrap();
        let table = outcome_distribution(&rho, &cglmp_settings(d).unwrap()).unwrap();
        for layout in [Layout::Flat, Layout::Grid] {
            let f = features_bipartite(&table, layout).unwrap();
            prop_assert_eq!(&table_from_bipartite(&f, d, layout).unwrap(), &table);
        }
        let psi = haar_pure(&[2, 2, 2], &mut stream(seed, 2)).unwrap();
        let t3 = outcome_distribution_pure(&psi, &pauli_settings(3)).unwrap();
        prop_assert_eq!(&table_from_threequbit(&features_threequbit(&t3).unwrap()).unwrap(), &t3);
    }
}
