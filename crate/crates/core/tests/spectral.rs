mod common;

use common::{c, dense_levels};
use proptest::prelude::*;
use syklab::spectral::{
    distinct_levels, dos_histogram, excess_kurtosis, full_spectrum, full_spectrum_with_limit, ground_state_resolved, ground_state_with,
    lanczos_lowest, select_eigenstate, select_index, spectral_gap, stripped_levels, LanczosOptions, StateKind,
    DEGENERACY_TOL,
};
use syklab::syk::{assemble_sparse, Realization, SparseHamiltonian};
use syklab::{Complex64, Error};

fn syk(n: usize, seed: u64, g: f64) -> SparseHamiltonian {
    Realization::sample(n, seed).unwrap().hamiltonian(g).unwrap()
}

fn oracle_degeneracy(levels: &[f64]) -> usize {
    levels.iter().take_while(|&&e| e - levels[0] <= DEGENERACY_TOL).count()
}

#[test]
fn block_spectrum_matches_dense_oracle() {
    for (n, g) in [(8, 0.0), (10, 0.4), (12, 0.0), (12, 1.0)] {
        let h = syk(n, 11, g);
        let s = full_spectrum(&h, true).unwrap();
        let want = dense_levels(&h.to_dense());
        assert_eq!(s.len(), want.len());
        for (a, b) in s.eigenvalues.iter().zip(&want) {
            assert!((a - b).abs() < 1e-10, "N={n} g={g}: {a} vs {b}");
        }
        assert!(s.max_residual(&h).unwrap() < 1e-10);
        assert!(s.eigenvalues.windows(2).all(|w| w[0] <= w[1]));
    }
}

#[test]
fn eigenvectors_have_definite_parity() {
    let h = syk(10, 2, 0.3);
    let s = full_spectrum(&h, true).unwrap();
    let parity = s.parity.clone().unwrap();
    let v = s.eigenvectors.as_ref().unwrap();
    for (k, &p) in parity.iter().enumerate() {
        for b in 0..h.dim {
            if (b.count_ones() % 2) as u8 != p {
                assert!(v[(b, k)].norm() < 1e-14);
            }
        }
    }
    let sectors = s.sectors();
    assert_eq!(sectors.len(), 2);
    assert_eq!(sectors[0].len() + sectors[1].len(), h.dim);
}

#[test]
fn dense_limit_is_reported() {
    let h = syk(12, 0, 0.5);
    match full_spectrum_with_limit(&h, false, 32) {
        Err(Error::OverDenseLimit { dim, limit }) => assert_eq!((dim, limit), (64, 32)),
        other => panic!("expected OverDenseLimit, got {:?}", other.map(|s| s.len())),
    }
}

#[test]
fn ground_state_dense_and_iterative_agree() {
    // N mod 8: 0 non-degenerate, 2 and 6 paired across parity, 4 paired within one sector
    for (n, deg) in [(8, 1), (10, 2), (12, 2), (14, 2), (16, 1)] {
        let h = syk(n, 4, 0.0);
        let want = dense_levels(&h.to_dense());
        assert_eq!(oracle_degeneracy(&want), deg, "oracle N={n}");
        for iterative_above in [usize::MAX, 0] {
            let gs = ground_state_with(&h, 1, iterative_above).unwrap();
            assert!((gs.energy - want[0]).abs() < 1e-9, "N={n}");
            assert_eq!(gs.degeneracy, deg, "N={n} iter={}", iterative_above == 0);
            let next = gs.next_level.unwrap();
            assert!((next - want[deg]).abs() < 1e-8, "N={n}: {next} vs {}", want[deg]);
            let mut y = vec![c(0.0, 0.0); h.dim];
            h.matvec(&gs.state.amplitudes, &mut y);
            let r: f64 = y.iter().zip(&gs.state.amplitudes).map(|(a, b)| (a - b * gs.energy).norm_sqr()).sum();
            assert!(r.sqrt() < 1e-7, "N={n} residual {}", r.sqrt());
            assert!((gs.state.norm() - 1.0).abs() < 1e-12);
        }
    }
}

#[test]
fn degenerate_ground_state_is_seeded() {
    let h = syk(10, 4, 0.0);
    let a = ground_state_with(&h, 1, usize::MAX).unwrap().state;
    let b = ground_state_with(&h, 1, usize::MAX).unwrap().state;
    let other = ground_state_with(&h, 2, usize::MAX).unwrap().state;
    assert_eq!(a, b);
    assert!(a.inner(&other).norm() < 1.0 - 1e-6);

    // the pick is basis-free: dense and Lanczos return the same ray
    for n in [10, 12] {
        let h = syk(n, 4, 0.0);
        let dense = ground_state_with(&h, 7, usize::MAX).unwrap();
        let iter = ground_state_with(&h, 7, 0).unwrap();
        assert_eq!(dense.degeneracy, 2);
        assert_eq!(iter.degeneracy, 2);
        assert!(1.0 - dense.state.inner(&iter.state).norm() < 1e-9, "N={n}");
    }
}

#[test]
fn resolved_ground_state_is_the_right_limit() {
    for n in [10, 12, 14] {
        let r = Realization::sample(n, 5).unwrap();
        let h = r.hamiltonian(0.0).unwrap();
        let v = assemble_sparse(&r.h2.linear_combination(1.0, &r.h4, -1.0).unwrap()).unwrap();
        // oracle: plain ground state of h + εv, which is no longer degenerate
        let eps = 1e-7;
        let tilted = assemble_sparse(&r.h4.linear_combination(1.0 - eps, &r.h2, eps).unwrap()).unwrap();
        let want = ground_state_with(&tilted, 0, usize::MAX).unwrap();
        assert_eq!(want.degeneracy, 1, "N={n}");
        for it in [usize::MAX, 0] {
            let got = ground_state_resolved(&h, 3, it, || Ok(v.clone())).unwrap();
            assert_eq!(got.degeneracy, 2);
            assert!(1.0 - got.state.inner(&want.state).norm() < 1e-6, "N={n} it={it}");
        }
    }
    // a non-degenerate ground state never builds the perturbation
    let h = syk(8, 5, 0.0);
    let gs = ground_state_resolved(&h, 3, usize::MAX, || panic!("not needed")).unwrap();
    assert_eq!(gs.state, ground_state_with(&h, 3, usize::MAX).unwrap().state);
}

#[test]
fn middle_state_is_closest_to_zero() {
    let h = syk(10, 6, 0.5);
    let s = full_spectrum(&h, true).unwrap();
    let k = select_index(&s, StateKind::Middle).unwrap();
    let best = s.eigenvalues.iter().map(|e| e.abs()).fold(f64::INFINITY, f64::min);
    assert_eq!(s.eigenvalues[k].abs(), best);
    assert_eq!(select_index(&s, StateKind::Ground).unwrap(), 0);
    let psi = select_eigenstate(&s, StateKind::Middle).unwrap();
    assert!((psi.norm() - 1.0).abs() < 1e-12);
    let bare = full_spectrum(&h, false).unwrap();
    assert!(select_eigenstate(&bare, StateKind::Middle).is_err());
}

#[test]
fn level_helpers() {
    assert_eq!(distinct_levels(&[0.0, 1e-12, 1.0, 1.0 + 1e-11, 2.0], 1e-9), vec![0.0, 1.0, 2.0]);
    let h = syk(10, 4, 0.0);
    let s = full_spectrum(&h, false).unwrap();
    let d = distinct_levels(&s.eigenvalues, DEGENERACY_TOL);
    assert!((spectral_gap(&s).unwrap() - (d[1] - d[0])).abs() < 1e-15);
    assert_eq!(stripped_levels(std::slice::from_ref(&s)).len(), h.dim / 2);
}

#[test]
fn dos_histogram_is_normalized() {
    let spectra: Vec<_> = (0..3).map(|m| full_spectrum(&syk(10, m, 0.2), false).unwrap()).collect();
    let hist = dos_histogram(&spectra, 40).unwrap();
    let total: f64 = hist.masses().iter().sum();
    assert!((total - 1.0).abs() < 1e-12);
    assert_eq!(hist.n_samples, 3 * 16);
    assert!(dos_histogram(&[], 10).is_err());
}

#[test]
fn kurtosis_of_known_samples() {
    // two-point distribution: excess kurtosis -2
    assert!((excess_kurtosis(&[-1.0, 1.0, -1.0, 1.0]) + 2.0).abs() < 1e-15);
    // uniform grid approaches -6/5
    let u: Vec<f64> = (0..100_000).map(|k| k as f64).collect();
    assert!((excess_kurtosis(&u) + 1.2).abs() < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn lanczos_finds_the_bottom(seed in any::<u64>(), g in 0.0f64..=1.0) {
        let h = syk(10, seed, g);
        let want = dense_levels(&h.to_dense());
        let start: Vec<Complex64> = (0..h.dim).map(|k| c(1.0 + k as f64 * 1e-3, 0.5)).collect();
        let (e, v) = lanczos_lowest(&h, start, &[], LanczosOptions::default()).unwrap();
        prop_assert!((e - want[0]).abs() < 1e-8);
        let n: f64 = v.iter().map(|a| a.norm_sqr()).sum();
        prop_assert!((n - 1.0).abs() < 1e-10);
        // deflating the found vector gives the next level
        let start: Vec<Complex64> = (0..h.dim).map(|k| c((k as f64).cos(), 0.1)).collect();
        let (e1, _) = lanczos_lowest(&h, start, &[v], LanczosOptions::default()).unwrap();
        prop_assert!((e1 - want[1]).abs() < 1e-8);
    }

    #[test]
    fn level_sum_equals_trace(seed in any::<u64>()) {
        let h = syk(8, seed, 0.5);
        let s = full_spectrum(&h, false).unwrap();
        let sum: f64 = s.eigenvalues.iter().sum();
        prop_assert!((sum - h.trace()).abs() < 1e-10);
    }
}
