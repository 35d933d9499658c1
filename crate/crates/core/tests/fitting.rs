use proptest::prelude::*;
use syklab::fitting::*;
use syklab::Error;

/// Tiny deterministic noise in [-1, 1].
fn wobble(k: usize) -> f64 {
    ((k as f64 * 12.9898).sin() * 43758.5453).fract() * 2.0 - 1.0
}

#[test]
fn linear_matches_closed_form() {
    let xs: Vec<f64> = (0..12).map(|k| k as f64 * 0.5).collect();
    let ys: Vec<f64> = xs.iter().enumerate().map(|(k, x)| 1.5 - 0.7 * x + 0.05 * wobble(k)).collect();
    let f = linear_fit(&xs, &ys).unwrap();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = sxy / sxx;
    let a = my - b * mx;
    let ssr: f64 = xs.iter().zip(&ys).map(|(x, y)| (y - a - b * x).powi(2)).sum();
    let s2 = ssr / (n - 2.0);
    assert!((f.param("a") - a).abs() < 1e-12);
    assert!((f.param("b") - b).abs() < 1e-12);
    assert!((f.std_error("b") - (s2 / sxx).sqrt()).abs() < 1e-12);
    assert!((f.std_error("a") - (s2 * (1.0 / n + mx * mx / sxx)).sqrt()).abs() < 1e-12);
    assert!((f.residual_norm - ssr.sqrt()).abs() < 1e-12);
    assert!(f.r_squared > 0.99 && f.r_squared <= 1.0);
    assert!((f.predict(2.0) - (a + 2.0 * b)).abs() < 1e-12);
}

#[test]
fn input_validation() {
    assert!(matches!(linear_fit(&[1.0, 2.0], &[1.0]), Err(Error::Dimension(_))));
    assert!(linear_fit(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    assert!(linear_fit(&[1.0, 2.0, f64::NAN], &[1.0, 2.0, 3.0]).is_err());
    assert!(matches!(linear_fit(&[2.0, 2.0, 2.0], &[1.0, 2.0, 3.0]), Err(Error::Rank(_))));
    assert!(power_law_fit(&[1.0, -2.0], &[1.0, 2.0]).is_err());
    assert!(saturating_exponential_fit(&[1.0; 5], &[0.5; 5], FitModel::Linear).is_err());
    assert!(polynomial_peak(&[1.0, 1.0, 1.0, 1.0], &[0.0, 1.0, 2.0, 3.0], 2).is_err());
}

#[test]
fn power_law_recovers_exponent() {
    let xs = [14.0, 16.0, 18.0, 20.0, 22.0];
    let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.2 * x.powf(-0.78)).collect();
    let f = power_law_fit(&xs, &ys).unwrap();
    assert!((f.param("p") + 0.78).abs() < 1e-12);
    assert!((f.param("c") - 3.2).abs() < 1e-11);
    assert!((f.predict(30.0) - 3.2 * 30f64.powf(-0.78)).abs() < 1e-12);
    assert!(f.std_error("p") < 1e-10);
    // two points: exact, no spread
    let f2 = power_law_fit(&xs[..2], &ys[..2]).unwrap();
    assert!((f2.param("p") + 0.78).abs() < 1e-12);
}

#[test]
fn saturating_exponentials_recover_parameters() {
    let xs: Vec<f64> = (1..=12).map(|k| k as f64 * 2.0).collect();
    for (model, a, b) in [(FitModel::OneMinusAExp, 0.8, 0.15), (FitModel::ATimesOneMinusExp, 2.5, 0.3)] {
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| match model {
                FitModel::OneMinusAExp => 1.0 - a * (-b * x).exp(),
                _ => a * (1.0 - (-b * x).exp()),
            })
            .collect();
        let f = saturating_exponential_fit(&xs, &ys, model).unwrap();
        assert!(f.converged, "{}", model.name());
        assert!((f.param("a") - a).abs() < 1e-7, "{}: a = {}", model.name(), f.param("a"));
        assert!((f.param("b") - b).abs() < 1e-7, "{}: b = {}", model.name(), f.param("b"));
        assert!(f.residual_norm < 1e-8);
    }
}

#[test]
fn noisy_saturating_fit_is_close() {
    let xs: Vec<f64> = (1..=15).map(|k| k as f64).collect();
    let ys: Vec<f64> = xs.iter().enumerate().map(|(k, x)| 1.0 - 0.6 * (-0.4 * x).exp() + 0.002 * wobble(k)).collect();
    let f = saturating_exponential_fit(&xs, &ys, FitModel::OneMinusAExp).unwrap();
    assert!((f.param("a") - 0.6).abs() < 0.02);
    assert!((f.param("b") - 0.4).abs() < 0.02);
    assert!(f.std_error("b") > 0.0 && f.std_error("b") < 0.05);
}

#[test]
fn polynomial_peak_of_exact_polynomial() {
    let xs: Vec<f64> = (0..=30).map(|k| k as f64 / 30.0).collect();
    let ys: Vec<f64> = xs.iter().map(|x| -(x - 0.4123) * (x - 0.4123) + 0.2 * (x - 0.4123).powi(4) + 3.0).collect();
    let p = polynomial_peak(&xs, &ys, 6).unwrap();
    assert!((p.location - 0.4123).abs() < 1e-10, "{}", p.location);
    assert!((p.value - 3.0).abs() < 1e-12);
    assert!(!p.boundary);
    for &x in &xs {
        assert!((p.evaluate(x) - (-(x - 0.4123) * (x - 0.4123) + 0.2 * (x - 0.4123).powi(4) + 3.0)).abs() < 1e-12);
    }
    assert_eq!(p.fit.model, FitModel::Polynomial);
    assert!(p.fit.predict(0.3).is_nan());
}

#[test]
fn monotone_data_peaks_on_the_edge() {
    let xs: Vec<f64> = (0..=20).map(|k| k as f64 / 20.0).collect();
    let ys: Vec<f64> = xs.iter().map(|x| x.exp()).collect();
    let p = polynomial_peak(&xs, &ys, 4).unwrap();
    assert!(p.boundary);
    assert!(p.fit.has_flag("boundary"));
    assert!((p.location - 1.0).abs() < 1e-12);
}

#[test]
fn bootstrap_spread_tracks_analytic_error() {
    let xs: Vec<f64> = (0..40).map(|k| k as f64 / 4.0).collect();
    let ys: Vec<f64> = xs.iter().enumerate().map(|(k, x)| 0.3 + 1.1 * x + 0.2 * wobble(k)).collect();
    let f = linear_fit(&xs, &ys).unwrap();
    let boot = bootstrap_std_errors(&xs, &ys, 400, 3, linear_fit).unwrap();
    let ratio = boot["b"] / f.std_error("b");
    assert!((0.6..1.6).contains(&ratio), "{ratio}");
    assert_eq!(boot, bootstrap_std_errors(&xs, &ys, 400, 3, linear_fit).unwrap());
}

#[test]
fn results_serialize() {
    let f = linear_fit(&[0.0, 1.0, 2.0], &[1.0, 3.0, 5.0]).unwrap();
    let v: serde_json::Value = serde_json::from_str(&f.to_json()).unwrap();
    assert_eq!(v["model"], "linear");
    assert!((v["parameters"]["b"].as_f64().unwrap() - 2.0).abs() < 1e-12);
    assert!(v.get("flags").is_none());
}

proptest! {
    #[test]
    fn exact_lines_are_recovered(a in -10.0f64..10.0, b in -10.0f64..10.0, n in 3usize..30) {
        let xs: Vec<f64> = (0..n).map(|k| k as f64 * 0.3 - 2.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| a + b * x).collect();
        let f = linear_fit(&xs, &ys).unwrap();
        prop_assert!((f.param("a") - a).abs() < 1e-9);
        prop_assert!((f.param("b") - b).abs() < 1e-9);
    }

    #[test]
    fn exact_power_laws_are_recovered(c in 0.01f64..100.0, p in -3.0f64..3.0) {
        let xs = [2.0, 3.0, 5.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| c * x.powf(p)).collect();
        let f = power_law_fit(&xs, &ys).unwrap();
        prop_assert!((f.param("p") - p).abs() < 1e-9);
        prop_assert!((f.param("c") / c - 1.0).abs() < 1e-9);
    }

    #[test]
    fn parabola_vertices(v in 0.05f64..0.95, curv in 0.1f64..10.0) {
        let xs: Vec<f64> = (0..=25).map(|k| k as f64 / 25.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 - curv * (x - v).powi(2)).collect();
        let pk = polynomial_peak(&xs, &ys, 4).unwrap();
        prop_assert!((pk.location - v).abs() < 1e-9);
        prop_assert!(!pk.boundary);
    }
}
