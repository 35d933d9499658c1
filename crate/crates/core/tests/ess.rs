use proptest::prelude::*;
use syklab::ess::*;
use syklab::haar::{sample_rmt_spectrum, EnsembleKind};

/// ∫₀^∞ f(r) dr with r = t/(1−t), composite Simpson on t ∈ [0, 1).
fn integrate_half_line(f: impl Fn(f64) -> f64) -> f64 {
    let n = 20_000;
    let h = 1.0 / n as f64;
    let g = |t: f64| {
        let t = t.min(1.0 - 1e-12);
        let r = t / (1.0 - t);
        f(r) / ((1.0 - t) * (1.0 - t))
    };
    let mut s = g(0.0) + g(1.0);
    for k in 1..n {
        s += if k % 2 == 1 { 4.0 } else { 2.0 } * g(k as f64 * h);
    }
    s * h / 3.0
}

#[test]
fn reference_pdfs_are_normalized() {
    for k in ReferenceKind::ALL {
        let total = integrate_half_line(|r| reference_pdf(k, r).unwrap());
        assert!((total - 1.0).abs() < 1e-6, "{}: {total}", k.name());
    }
    assert!(reference_pdf(ReferenceKind::WdGoe, -0.1).is_err());
}

#[test]
fn mean_ratios_match_quadrature() {
    for k in ReferenceKind::ALL {
        let m = integrate_half_line(|r| r.min(1.0 / r) * reference_pdf(k, r).unwrap());
        assert!((m - k.mean_ratio()).abs() < 1e-6, "{}: {m} vs {}", k.name(), k.mean_ratio());
    }
    assert!((ReferenceKind::Poisson.mean_ratio() - 0.38629).abs() < 1e-5);
    assert!((ReferenceKind::WdGoe.mean_ratio() - 0.53590).abs() < 1e-5);
    assert!((ReferenceKind::WdGue.mean_ratio() - 0.60266).abs() < 1e-5);
    assert!((ReferenceKind::WdGse.mean_ratio() - 0.67617).abs() < 1e-5);
}

#[test]
fn reference_names_round_trip() {
    for k in ReferenceKind::ALL {
        assert_eq!(k.name().parse::<ReferenceKind>().unwrap(), k);
    }
    assert_eq!("GUE".parse::<ReferenceKind>().unwrap(), ReferenceKind::WdGue);
    assert!("wigner".parse::<ReferenceKind>().is_err());
    assert_eq!(ReferenceKind::WdGse.beta(), Some(4));
    assert_eq!(ReferenceKind::Poisson.beta(), None);
}

#[test]
fn ratios_by_hand() {
    let ev = [0.0, 1.0, 3.0, 3.5, 6.5];
    assert_eq!(gap_ratios(&ev).unwrap(), vec![2.0, 0.25, 6.0]);
    assert_eq!(folded_ratios(&ev).unwrap(), vec![0.5, 0.25, 1.0 / 6.0]);
    // a degenerate pair drops its zero spacing
    assert_eq!(gap_ratios(&[0.0, 1.0, 1.0, 3.0]).unwrap(), vec![2.0]);
    assert!(gap_ratios(&[0.0, 1.0]).is_err());
    let avg = average_ratio(&[vec![0.0, 1.0, 3.0], vec![0.0, 1.0, 2.0]]).unwrap();
    assert!((avg - 0.75).abs() < 1e-15);
    assert!(average_ratio::<Vec<f64>>(&[]).is_err());
}

#[test]
fn sampled_ensembles_hit_their_mean_ratio() {
    for (e, k) in [
        (EnsembleKind::PoissonLevels, ReferenceKind::Poisson),
        (EnsembleKind::Goe, ReferenceKind::WdGoe),
        (EnsembleKind::Gue, ReferenceKind::WdGue),
        (EnsembleKind::Gse, ReferenceKind::WdGse),
    ] {
        let spectra: Vec<Vec<f64>> = (0..6).map(|s| sample_rmt_spectrum(e, 200, s).unwrap()).collect();
        // central half of each spectrum, away from the edges
        let bulk: Vec<Vec<f64>> = spectra.iter().map(|s| s[50..150].to_vec()).collect();
        let r = average_ratio(&bulk).unwrap();
        assert!((r - k.mean_ratio()).abs() < 0.03, "{}: {r}", k.name());
        let ratios: Vec<f64> = bulk.iter().flat_map(|s| gap_ratios(s).unwrap()).collect();
        let hist = ess_histogram(&ratios, 40, 10.0).unwrap();
        assert_eq!(closest_reference(&hist).unwrap().0, k);
    }
}

#[test]
fn histogram_bookkeeping() {
    let h = ess_histogram(&[0.5, 1.5, 2.5, 12.0, f64::NAN], 10, 10.0).unwrap();
    assert_eq!(h.n_samples, 3);
    assert_eq!(h.excluded, 2);
    assert!((h.masses().iter().sum::<f64>() - 1.0).abs() < 1e-15);
    assert_eq!(h.support(), (0.0, 10.0));
    assert!(ess_histogram(&[20.0], 10, 10.0).is_err());
    assert!(ess_histogram(&[1.0], 1, 10.0).is_err());
}

#[test]
fn reference_masses_sum_to_one() {
    let edges: Vec<f64> = (0..=RATIO_BINS).map(|k| k as f64 * RATIO_CUTOFF / RATIO_BINS as f64).collect();
    for k in ReferenceKind::ALL {
        let m = reference_masses(k, &edges);
        assert!((m.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(m.iter().all(|&v| v >= 0.0));
    }
}

#[test]
fn kl_values() {
    assert_eq!(kl_masses(&[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
    let d = kl_masses(&[0.75, 0.25], &[0.5, 0.5]).unwrap();
    let want = 0.75 * (1.5f64).ln() + 0.25 * (0.5f64).ln();
    assert!((d - want).abs() < 1e-15);
    assert!(kl_masses(&[1.0], &[0.5, 0.5]).is_err());
    // a zero reference bin is floored, not infinite
    assert!(kl_masses(&[0.5, 0.5], &[1.0, 0.0]).unwrap().is_finite());
}

#[test]
fn fidelity_scan_pairs_neighbours() {
    let curves = vec![
        (0.0, vec![1.0, 1.0]),
        (0.1, vec![3.0, 1.0]),
        (0.2, vec![3.0, 1.0]),
    ];
    let scan = kl_fidelity_scan(&curves, 0.1).unwrap();
    assert_eq!(scan.len(), 2);
    assert!((scan[0].1 - kl_masses(&[0.5, 0.5], &[0.75, 0.25]).unwrap()).abs() < 1e-15);
    assert_eq!(scan[1].1, 0.0);
    assert!(kl_fidelity_scan(&curves, 0.15).is_err());
    assert!(kl_fidelity_scan(&curves, 0.5).is_err());
    assert!(kl_fidelity_scan(&curves, 0.0).is_err());
    let r = rescale_by_max(&[(0.0, 1.0), (1.0, 4.0)]);
    assert_eq!(r, vec![(0.0, 0.25), (1.0, 1.0)]);
}

#[test]
fn transition_of_a_known_peak() {
    let curve: Vec<(f64, f64)> = (0..=40).map(|k| {
        let g = k as f64 / 40.0;
        (g, 1.0 - (g - 0.37).powi(2) - 3.0 * (g - 0.37).powi(4))
    }).collect();
    let t = transition_point(&curve, 10).unwrap();
    assert!((t.g_c - 0.37).abs() < 1e-8, "{}", t.g_c);
    assert!(!t.boundary);
    let rising: Vec<(f64, f64)> = (0..=20).map(|k| (k as f64 / 20.0, k as f64)).collect();
    assert!(transition_point(&rising, 3).unwrap().boundary);
    assert!(transition_point(&curve[..5], 10).is_err());
}

proptest! {
    #[test]
    fn ratio_pdf_inversion_symmetry(r in 0.01f64..20.0) {
        // P(r) = P(1/r)/r² for every class
        for k in ReferenceKind::ALL {
            let a = reference_pdf(k, r).unwrap();
            let b = reference_pdf(k, 1.0 / r).unwrap() / (r * r);
            prop_assert!((a - b).abs() < 1e-12 * a.max(1.0));
        }
    }

    #[test]
    fn ratios_are_scale_and_shift_invariant(
        levels in prop::collection::vec(-10.0f64..10.0, 3..40),
        a in 0.1f64..10.0,
        b in -5.0f64..5.0,
    ) {
        let mut ev = levels;
        ev.sort_by(f64::total_cmp);
        let moved: Vec<f64> = ev.iter().map(|e| a * e + b).collect();
        let r1 = folded_ratios(&ev).unwrap();
        let r2 = folded_ratios(&moved).unwrap();
        prop_assume!(r1.len() == r2.len());
        for (x, y) in r1.iter().zip(&r2) {
            prop_assert!((x - y).abs() < 1e-6);
            prop_assert!((0.0..=1.0).contains(x));
        }
    }

    #[test]
    fn kl_is_nonnegative(p in prop::collection::vec(0.0f64..1.0, 5), q in prop::collection::vec(0.01f64..1.0, 5)) {
        let sp: f64 = p.iter().sum();
        prop_assume!(sp > 0.0);
        let sq: f64 = q.iter().sum();
        let p: Vec<f64> = p.iter().map(|v| v / sp).collect();
        let q: Vec<f64> = q.iter().map(|v| v / sq).collect();
        prop_assert!(kl_masses(&p, &q).unwrap() >= 0.0);
        prop_assert!(kl_masses(&p, &p).unwrap() < 1e-14);
    }
}
