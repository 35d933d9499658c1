mod common;

use common::{c, kron_letters, max_abs_diff};
use nalgebra::DMatrix;
use proptest::prelude::*;
use syklab::pauli::{PauliString, PauliSum};
use syklab::syk::{
    assemble_sparse, assemble_sparse_with_cap, build_interpolated, build_syk, coupling_value, index_tuples,
    jordan_wigner, read_dump, sample_couplings, write_dump, DisorderSpec, DumpHeader, Realization,
};
use syklab::{Complex64, Error};

/// χ_{2k-1} = Z^{k-1} X_k, χ_{2k} = Z^{k-1} Y_k, written out letter by letter.
fn majorana_dense(i: usize, n: usize) -> DMatrix<Complex64> {
    let k = (i + 1) / 2;
    let mut s = String::new();
    for q in 1..=n / 2 {
        s.push(if q < k {
            'Z'
        } else if q == k {
            if i % 2 == 1 {
                'X'
            } else {
                'Y'
            }
        } else {
            'I'
        });
    }
    kron_letters(&s)
}

/// Dense SYK built from Majorana matrices and the library's coupling draws.
fn syk_dense(n: usize, q: usize, seed: u64) -> DMatrix<Complex64> {
    let spec = DisorderSpec::new(n, q, 1.0, seed).unwrap();
    let var = spec.variance();
    let chis: Vec<_> = (1..=n).map(|i| majorana_dense(i, n)).collect();
    let d = 1 << (n / 2);
    let mut h = DMatrix::zeros(d, d);
    for t in index_tuples(n, q) {
        let j = coupling_value(seed, q, &t, var);
        let mut p = chis[t[0] - 1].clone();
        for &i in &t[1..] {
            p *= &chis[i - 1];
        }
        let pre = if q == 2 { c(0.0, j) } else { c(-j, 0.0) };
        h += p * pre;
    }
    h
}

#[test]
fn majoranas_match_dense_oracle() {
    let n = 8;
    for i in 1..=n {
        let p = jordan_wigner(i, n).unwrap();
        let rows = p.to_dense();
        let m = DMatrix::from_fn(rows.len(), rows.len(), |r, col| rows[r][col]);
        assert!(max_abs_diff(&m, &majorana_dense(i, n)) < 1e-15, "chi_{i}");
    }
}

#[test]
fn clifford_algebra() {
    let n = 10;
    let id = DMatrix::<Complex64>::identity(1 << (n / 2), 1 << (n / 2));
    for i in 1..=n {
        for j in 1..=n {
            let a = majorana_dense(i, n);
            let b = majorana_dense(j, n);
            let anti = &a * &b + &b * &a;
            let want = if i == j { &id * c(2.0, 0.0) } else { &id * c(0.0, 0.0) };
            assert!(max_abs_diff(&anti, &want) < 1e-14, "{{chi_{i}, chi_{j}}}");
        }
    }
}

#[test]
fn jordan_wigner_rejects_bad_indices() {
    assert!(jordan_wigner(0, 8).is_err());
    assert!(jordan_wigner(9, 8).is_err());
    assert!(jordan_wigner(1, 7).is_err());
}

#[test]
fn tuple_enumeration() {
    let t = index_tuples(6, 4);
    assert_eq!(t.len(), 15);
    assert_eq!(t[0], vec![1, 2, 3, 4]);
    assert_eq!(t[14], vec![3, 4, 5, 6]);
    assert!(t.windows(2).all(|w| w[0] < w[1]));
    assert_eq!(index_tuples(20, 4).len(), 4845);
    assert!(index_tuples(3, 4).is_empty());
}

#[test]
fn spec_validation() {
    assert!(DisorderSpec::new(7, 4, 1.0, 0).is_err());
    assert!(matches!(DisorderSpec::new(8, 3, 1.0, 0), Err(Error::Unsupported(_))));
    assert!(DisorderSpec::new(8, 4, 0.0, 0).is_err());
    assert!(DisorderSpec::new(2, 4, 1.0, 0).is_err());
    let s = DisorderSpec::new(10, 4, 1.0, 0).unwrap();
    assert!((s.variance() - 6.0 / 1000.0).abs() < 1e-18);
    let s = DisorderSpec::new(10, 2, 2.0, 0).unwrap();
    assert!((s.variance() - 0.2).abs() < 1e-16);
}

#[test]
fn coupling_moments() {
    // pooled over seeds; the standardized draws should be N(0, 1)
    let spec = DisorderSpec::new(16, 4, 1.0, 0).unwrap();
    let var = spec.variance();
    let mut xs = Vec::new();
    for seed in 0..10u64 {
        let t = sample_couplings(&DisorderSpec { seed, ..spec }).unwrap();
        xs.extend(t.values.iter().map(|(_, v)| v / var.sqrt()));
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    assert!(mean.abs() < 4.0 / n.sqrt(), "mean {mean}");
    assert!((m2 - 1.0).abs() < 4.0 * (2.0 / n).sqrt(), "var {m2}");
}

#[test]
fn couplings_do_not_depend_on_enumeration() {
    let spec = DisorderSpec::new(12, 4, 1.0, 77).unwrap();
    let t = sample_couplings(&spec).unwrap();
    let (tuple, v) = &t.values[123];
    assert_eq!(coupling_value(77, 4, tuple, spec.variance()), *v);
    let again = sample_couplings(&spec).unwrap();
    assert_eq!(t, again);
    let other = sample_couplings(&DisorderSpec { seed: 78, ..spec }).unwrap();
    assert_ne!(t.values[0].1, other.values[0].1);
}

#[test]
fn sparse_matches_dense_oracle() {
    for (n, q) in [(8, 4), (10, 4), (8, 2), (10, 2)] {
        let spec = DisorderSpec::new(n, q, 1.0, 5).unwrap();
        let ps = build_syk(&sample_couplings(&spec).unwrap()).unwrap();
        let h = assemble_sparse(&ps).unwrap();
        let diff = max_abs_diff(&h.to_dense(), &syk_dense(n, q, 5));
        assert!(diff < 1e-13, "N={n} q={q}: {diff}");
        assert!(h.is_hermitian());
        assert!(h.conserves_parity());
        assert!(ps.conserves_parity());
        assert!(h.trace().abs() < 1e-12);
    }
}

#[test]
fn interpolation_endpoints_and_midpoint() {
    let r = Realization::sample(8, 3).unwrap();
    let d4 = syk_dense(8, 4, 3);
    let d2 = syk_dense(8, 2, 3);
    assert!(max_abs_diff(&r.hamiltonian(0.0).unwrap().to_dense(), &d4) < 1e-13);
    assert!(max_abs_diff(&r.hamiltonian(1.0).unwrap().to_dense(), &d2) < 1e-13);
    let mid = &d4 * c(0.7, 0.0) + &d2 * c(0.3, 0.0);
    assert!(max_abs_diff(&r.hamiltonian(0.3).unwrap().to_dense(), &mid) < 1e-13);
    assert!(build_interpolated(&r.h4, &r.h2, 1.5).is_err());
    assert!(build_interpolated(&r.h4, &r.h2, -0.1).is_err());
}

#[test]
fn memory_cap_is_enforced() {
    let r = Realization::sample(12, 0).unwrap();
    match assemble_sparse_with_cap(&r.h4, 1024) {
        Err(Error::Resource { required_bytes, cap_bytes }) => {
            assert_eq!(cap_bytes, 1024);
            assert!(required_bytes > 1024);
        }
        other => panic!("expected a resource error, got {other:?}"),
    }
}

#[test]
fn non_hermitian_terms_are_refused() {
    let p = PauliString { phase_exp: 1, ..PauliString::single(2, 1, 'X').unwrap() };
    let sum = PauliSum { n_qubits: 2, terms: vec![(1.0, p)] };
    assert!(assemble_sparse(&sum).is_err());
}

#[test]
fn dump_round_trip() {
    let r = Realization::sample(10, 9).unwrap();
    let h = r.hamiltonian(0.25).unwrap();
    let header = DumpHeader { seed: 9, n_majorana: 10, q: 0, g: 0.25 };
    let mut buf = Vec::new();
    write_dump(&mut buf, &header, &h).unwrap();
    assert_eq!(&buf[..8], b"SYKHAM01");
    assert_eq!(buf.len(), 48 + 32 * h.nnz());
    let (h2, back) = read_dump(buf.as_slice()).unwrap();
    assert_eq!(h2, header);
    assert_eq!(back, h);
    assert!(read_dump(&b"NOTADUMP"[..]).is_err());
    assert!(read_dump(&buf[..60]).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn interpolated_hamiltonian_invariants(seed in any::<u64>(), g in 0.0f64..=1.0) {
        let r = Realization::sample(8, seed).unwrap();
        let h = r.hamiltonian(g).unwrap();
        prop_assert!(h.is_hermitian());
        prop_assert!(h.conserves_parity());
        prop_assert!(h.trace().abs() < 1e-10);
        let x: Vec<Complex64> = (0..h.dim).map(|k| c((k as f64).sin(), (k as f64).cos())).collect();
        let mut y = vec![c(0.0, 0.0); h.dim];
        h.matvec(&x, &mut y);
        let want = h.to_dense() * nalgebra::DVector::from_vec(x);
        for k in 0..h.dim {
            prop_assert!((y[k] - want[k]).norm() < 1e-12);
        }
    }

    #[test]
    fn coupling_is_a_pure_function(seed in any::<u64>(), a in 1usize..5, b in 6usize..9) {
        let t = [a, 5, b, 12];
        prop_assert_eq!(coupling_value(seed, 4, &t, 1.0), coupling_value(seed, 4, &t, 1.0));
        prop_assert_eq!(coupling_value(seed, 4, &t, 4.0), 2.0 * coupling_value(seed, 4, &t, 1.0));
    }
}
