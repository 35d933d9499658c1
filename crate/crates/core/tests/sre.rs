mod common;

use common::c;
use proptest::prelude::*;
use syklab::haar::sample_haar_state;
use syklab::pauli::{PauliString, StateVector};
use syklab::sre::*;
use syklab::Error;

fn brute_spectrum(psi: &StateVector) -> Vec<f64> {
    let n = psi.n_qubits;
    let d = 1u64 << n;
    let mut out = Vec::new();
    for x in 0..d {
        for z in 0..d {
            out.push(PauliString::new(n, x, z, 0).unwrap().expectation(psi).unwrap());
        }
    }
    out
}

fn brute_m(psi: &StateVector, alpha: f64) -> f64 {
    let d = psi.dim() as f64;
    let s: f64 = brute_spectrum(psi).iter().map(|e| e.abs().powf(2.0 * alpha)).sum();
    (s / d).log2() / (1.0 - alpha)
}

#[test]
fn spectrum_matches_string_by_string() {
    let psi = sample_haar_state(3, 5).unwrap();
    let fast = pauli_spectrum(&psi);
    let slow = brute_spectrum(&psi);
    for (a, b) in fast.iter().zip(&slow) {
        assert!((a - b).abs() < 1e-13);
    }
}

#[test]
fn stabilizer_states_have_zero_magic() {
    let zero = StateVector::basis(4, 0);
    let h = 0.5f64.sqrt();
    let mut ghz = vec![c(0.0, 0.0); 16];
    ghz[0] = c(h, 0.0);
    ghz[15] = c(h, 0.0);
    let ghz = StateVector::new(4, ghz).unwrap();
    // |+i⟩^⊗3
    let one = StateVector::new(1, vec![c(h, 0.0), c(0.0, h)]).unwrap();
    let yplus = one.tensor(&one).tensor(&one);
    for psi in [zero, ghz, yplus] {
        for a in [0.5, 2.0, 3.0] {
            assert!(exact_sre(&psi, a).unwrap().value.abs() < 1e-12);
        }
    }
}

#[test]
fn golden_state_value() {
    for n in 1..=6 {
        let g = golden_state(n);
        assert!((g.norm() - 1.0).abs() < 1e-14);
        // Bloch vector (1,1,1)/√3
        let x = PauliString::single(n, 1, 'X').unwrap().expectation(&g).unwrap();
        let y = PauliString::single(n, 1, 'Y').unwrap().expectation(&g).unwrap();
        let z = PauliString::single(n, 1, 'Z').unwrap().expectation(&g).unwrap();
        for v in [x, y, z] {
            assert!((v - 1.0 / 3f64.sqrt()).abs() < 1e-14);
        }
        let m2 = exact_sre(&g, 2.0).unwrap().value;
        assert!((m2 - sre_reference(SreReference::Golden, n)).abs() < 1e-12);
    }
}

#[test]
fn exact_errors() {
    let psi = sample_haar_state(4, 0).unwrap();
    assert!(matches!(exact_sre_with_limit(&psi, 2.0, 3), Err(Error::OverExactLimit { n: 4, limit: 3 })));
    assert!(exact_sre(&psi, 1.0).is_err());
    assert!(exact_sre(&psi, 0.0).is_err());
    assert_eq!(exact_sre(&psi, 2.0).unwrap().method, SreMethod::Exact);
}

#[test]
fn haar_magic_approaches_finite_d_value() {
    let n = 7;
    let vals: Vec<f64> = (0..10).map(|s| exact_sre(&sample_haar_state(n, s).unwrap(), 2.0).unwrap().value).collect();
    let mean = vals.iter().sum::<f64>() / vals.len() as f64;
    assert!((mean - haar_sre2_finite(n)).abs() < 0.05, "{mean} vs {}", haar_sre2_finite(n));
    assert!((haar_sre2_finite(20) - sre_reference(SreReference::Haar, 20)).abs() < 1e-5);
}

#[test]
fn mps_reconstructs_the_state() {
    let psi = sample_haar_state(8, 1).unwrap();
    let mps = mps_compress(&psi, 16, 0.0).unwrap();
    assert!(mps.right_canonical);
    assert_eq!(mps.bond_dims.len(), 9);
    assert_eq!(mps.max_bond(), 16);
    assert!((mps.norm_sqr() - 1.0).abs() < 1e-12);
    assert!((mps.fidelity - 1.0).abs() < 1e-12);
    let back = mps.to_state();
    let ov: syklab::Complex64 = back.iter().zip(&psi.amplitudes).map(|(a, b)| a.conj() * b).sum();
    assert!((ov.norm() - 1.0).abs() < 1e-12);
    // a product state needs bond 1
    let g = mps_compress(&golden_state(6), 1, 1e-12).unwrap();
    assert_eq!(g.max_bond(), 1);
    assert!((g.fidelity - 1.0).abs() < 1e-12);
    assert!(mps_compress(&psi, 0, 0.0).is_err());
}

#[test]
fn truncation_lowers_fidelity() {
    let psi = sample_haar_state(8, 2).unwrap();
    let mps = mps_compress(&psi, 4, 0.0).unwrap();
    assert!(mps.max_bond() <= 4);
    assert!(mps.fidelity < 0.99);
    assert!((mps.norm_sqr() - 1.0).abs() < 1e-10);
}

#[test]
fn samples_carry_exact_expectations() {
    let psi = sample_haar_state(5, 3).unwrap();
    let mps = mps_compress(&psi, 32, 0.0).unwrap();
    let d = psi.dim() as f64;
    for s in perfect_pauli_sample(&mps, 200, 9).unwrap() {
        let e = s.string.expectation(&psi).unwrap();
        // overall phase of the MPS is free, ⟨P⟩ is not
        assert!((s.expectation - e).abs() < 1e-10);
        assert!((s.probability - e * e / d).abs() < 1e-10);
    }
}

#[test]
fn sampling_frequencies_follow_xi() {
    let psi = sample_haar_state(2, 4).unwrap();
    let mps = mps_compress(&psi, 4, 0.0).unwrap();
    let n = 40_000;
    let mut counts = std::collections::HashMap::new();
    for s in perfect_pauli_sample(&mps, n, 1).unwrap() {
        *counts.entry((s.string.x_mask, s.string.z_mask)).or_insert(0usize) += 1;
    }
    for x in 0..4u64 {
        for z in 0..4u64 {
            let e = PauliString::new(2, x, z, 0).unwrap().expectation(&psi).unwrap();
            let p = e * e / 4.0;
            let f = *counts.get(&(x, z)).unwrap_or(&0) as f64 / n as f64;
            assert!((f - p).abs() < 5.0 * (p * (1.0 - p) / n as f64).sqrt() + 1e-9, "({x},{z}): {f} vs {p}");
        }
    }
}

#[test]
fn sampled_estimate_agrees_with_exact() {
    for (n, seed) in [(6, 0), (8, 1)] {
        let psi = sample_haar_state(n, seed).unwrap();
        let exact = exact_sre(&psi, 2.0).unwrap().value;
        let mps = mps_compress(&psi, 1 << (n / 2), 0.0).unwrap();
        let est = sampled_sre2(&mps, 4000, 17).unwrap();
        assert_eq!(est.method, SreMethod::Sampled);
        assert!(!est.flagged);
        assert!((est.value - exact).abs() < 4.0 * est.std_error, "n={n}: {} ± {} vs {exact}", est.value, est.std_error);
    }
    let stab = mps_compress(&StateVector::basis(4, 0), 1, 0.0).unwrap();
    assert_eq!(sampled_sre2(&stab, 50, 0).unwrap().value, 0.0);
    assert!(estimate_from_samples(&[]).flagged);
}

#[test]
fn reference_lines() {
    assert_eq!(sre_reference(SreReference::Haar, 10), 8.0);
    assert!((sre_reference(SreReference::GsFit, 10) - 7.1).abs() < 1e-12);
    assert!((sre_reference(SreReference::MsFit, 10) - 7.0).abs() < 1e-12);
    assert_eq!("gs_fit".parse::<SreReference>().unwrap(), SreReference::GsFit);
    assert!("clifford".parse::<SreReference>().is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn magic_invariants(seed in any::<u64>(), alpha in prop::sample::select(vec![0.5, 2.0, 3.0])) {
        let psi = sample_haar_state(4, seed).unwrap();
        let spec = pauli_spectrum(&psi);
        // purity: Σ⟨P⟩² = d
        prop_assert!((spec.iter().map(|e| e * e).sum::<f64>() - 16.0).abs() < 1e-10);
        prop_assert!((spec[0] - 1.0).abs() < 1e-12);
        let m = exact_sre(&psi, alpha).unwrap().value;
        prop_assert!((m - brute_m(&psi, alpha)).abs() < 1e-10);
        prop_assert!(m >= 0.0);
        // global phase does not matter
        let ph = syklab::Complex64::from_polar(1.0, 0.7);
        let rot = StateVector::new(4, psi.amplitudes.iter().map(|a| a * ph).collect()).unwrap();
        prop_assert!((exact_sre(&rot, alpha).unwrap().value - m).abs() < 1e-12);
    }

    #[test]
    fn magic_is_additive(s1 in any::<u64>(), s2 in any::<u64>()) {
        let a = sample_haar_state(2, s1).unwrap();
        let b = sample_haar_state(3, s2).unwrap();
        let ab = a.tensor(&b);
        let sum = exact_sre(&a, 2.0).unwrap().value + exact_sre(&b, 2.0).unwrap().value;
        prop_assert!((exact_sre(&ab, 2.0).unwrap().value - sum).abs() < 1e-10);
    }
}
