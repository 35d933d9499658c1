//! Least-squares fits used across the analysis: linear, power law,
//! saturating exponentials and polynomial peak location.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitModel {
    /// `y = a + b x`
    Linear,
    /// `y = c x^p`
    PowerLaw,
    /// `y = 1 - a e^(-b x)`
    OneMinusAExp,
    /// `y = a (1 - e^(-b x))`
    ATimesOneMinusExp,
    /// Chebyshev series on the rescaled domain.
    Polynomial,
}

impl FitModel {
    pub fn name(self) -> &'static str {
        match self {
            FitModel::Linear => "linear",
            FitModel::PowerLaw => "power_law",
            FitModel::OneMinusAExp => "one_minus_a_exp",
            FitModel::ATimesOneMinusExp => "a_times_one_minus_exp",
            FitModel::Polynomial => "polynomial",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub model: FitModel,
    pub parameters: BTreeMap<String, f64>,
    pub std_errors: BTreeMap<String, f64>,
    pub residual_norm: f64,
    pub r_squared: f64,
    pub converged: bool,
    /// Diagnostics such as `degenerate` or `boundary`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

impl FitResult {
    pub fn param(&self, name: &str) -> f64 {
        self.parameters.get(name).copied().unwrap_or(f64::NAN)
    }

    pub fn std_error(&self, name: &str) -> f64 {
        self.std_errors.get(name).copied().unwrap_or(f64::NAN)
    }

    pub fn has_flag(&self, flag: &str) -> bool {
        self.flags.iter().any(|f| f == flag)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit results serialize")
    }

    /// Model value at `x` (not available for polynomial fits, which need their domain).
    pub fn predict(&self, x: f64) -> f64 {
        let p = |k: &str| self.param(k);
        match self.model {
            FitModel::Linear => p("a") + p("b") * x,
            FitModel::PowerLaw => p("c") * x.powf(p("p")),
            FitModel::OneMinusAExp => 1.0 - p("a") * (-p("b") * x).exp(),
            FitModel::ATimesOneMinusExp => p("a") * (1.0 - (-p("b") * x).exp()),
            FitModel::Polynomial => f64::NAN,
        }
    }
}

fn check_xy(xs: &[f64], ys: &[f64], min: usize) -> Result<()> {
    if xs.len() != ys.len() {
        return Err(Error::Dimension(format!("{} x values, {} y values", xs.len(), ys.len())));
    }
    if xs.len() < min {
        return Err(Error::Argument(format!("need at least {min} points, got {}", xs.len())));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::Argument("non-finite data".into()));
    }
    Ok(())
}

fn r_squared(ys: &[f64], ssr: f64) -> f64 {
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let sst: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    if sst > 0.0 {
        1.0 - ssr / sst
    } else if ssr == 0.0 {
        1.0
    } else {
        0.0
    }
}

fn named(names: &[&str], vals: &[f64]) -> BTreeMap<String, f64> {
    names.iter().zip(vals).map(|(n, v)| (n.to_string(), *v)).collect()
}

/// Least squares through SVD. Returns coefficients and `(AᵀA)⁻¹`.
fn lstsq(a: &DMatrix<f64>, y: &DVector<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let tol = smax * 1e-12 * a.nrows().max(a.ncols()) as f64;
    if smax == 0.0 || svd.singular_values.iter().any(|&s| s <= tol) {
        return Err(Error::Rank(format!("design matrix {}x{} is rank deficient", a.nrows(), a.ncols())));
    }
    let coef = svd.solve(y, tol).map_err(|e| Error::Rank(e.to_string()))?;
    let v = svd.v_t.as_ref().unwrap().transpose();
    let inv_s2 = DMatrix::from_diagonal(&svd.singular_values.map(|s| 1.0 / (s * s)));
    Ok((coef, &v * inv_s2 * v.transpose()))
}

/// Least-squares `y = a + b x` with residual-variance standard errors.
pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    check_xy(xs, ys, 3)?;
    let a = DMatrix::from_fn(xs.len(), 2, |i, j| if j == 0 { 1.0 } else { xs[i] });
    let y = DVector::from_column_slice(ys);
    let (coef, cov) = lstsq(&a, &y)?;
    let res = &y - &a * &coef;
    let ssr = res.norm_squared();
    let s2 = ssr / (xs.len() - 2) as f64;
    let errs = [(s2 * cov[(0, 0)]).sqrt(), (s2 * cov[(1, 1)]).sqrt()];
    Ok(FitResult {
        model: FitModel::Linear,
        parameters: named(&["a", "b"], &[coef[0], coef[1]]),
        std_errors: named(&["a", "b"], &errs),
        residual_norm: ssr.sqrt(),
        r_squared: r_squared(ys, ssr),
        converged: true,
        flags: vec![],
    })
}

/// `y = c x^p` by regression of `ln y` on `ln x`.
pub fn power_law_fit(xs: &[f64], ys: &[f64]) -> Result<FitResult> {
    check_xy(xs, ys, 2)?;
    if xs.iter().chain(ys).any(|&v| v <= 0.0) {
        return Err(Error::Argument("power-law fit needs positive data".into()));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let a = DMatrix::from_fn(xs.len(), 2, |i, j| if j == 0 { 1.0 } else { lx[i] });
    let y = DVector::from_column_slice(&ly);
    let (coef, cov) = lstsq(&a, &y)?;
    let ssr_log = (&y - &a * &coef).norm_squared();
    let dof = xs.len().saturating_sub(2);
    let s2 = if dof > 0 { ssr_log / dof as f64 } else { 0.0 };
    let c = coef[0].exp();
    let p = coef[1];
    let ssr: f64 = xs.iter().zip(ys).map(|(x, y)| (y - c * x.powf(p)).powi(2)).sum();
    Ok(FitResult {
        model: FitModel::PowerLaw,
        parameters: named(&["c", "p"], &[c, p]),
        std_errors: named(&["c", "p"], &[c * (s2 * cov[(0, 0)]).sqrt(), (s2 * cov[(1, 1)]).sqrt()]),
        residual_norm: ssr.sqrt(),
        r_squared: r_squared(&ly, ssr_log),
        converged: true,
        flags: vec![],
    })
}

fn sat_model(model: FitModel, a: f64, b: f64, x: f64) -> f64 {
    match model {
        FitModel::OneMinusAExp => 1.0 - a * (-b * x).exp(),
        FitModel::ATimesOneMinusExp => a * (1.0 - (-b * x).exp()),
        _ => unreachable!(),
    }
}

fn ssr_of(model: FitModel, xs: &[f64], ys: &[f64], a: f64, b: f64) -> f64 {
    xs.iter().zip(ys).map(|(&x, &y)| (y - sat_model(model, a, b, x)).powi(2)).sum()
}

/// Best `a` for a fixed `b`; both models are linear in `a`.
fn profile_a(model: FitModel, xs: &[f64], ys: &[f64], b: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (&x, &y) in xs.iter().zip(ys) {
        let (basis, target) = match model {
            FitModel::OneMinusAExp => (-(-b * x).exp(), y - 1.0),
            _ => (1.0 - (-b * x).exp(), y),
        };
        num += basis * target;
        den += basis * basis;
    }
    if den > 0.0 {
        num / den
    } else {
        0.0
    }
}

/// Nelder–Mead on two parameters.
fn nelder_mead(f: impl Fn([f64; 2]) -> f64, start: [f64; 2], scale: [f64; 2], tol: f64) -> ([f64; 2], bool) {
    let mut s = [start, [start[0] + scale[0], start[1]], [start[0], start[1] + scale[1]]];
    let mut v = s.map(&f);
    for _ in 0..20_000 {
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        s = idx.map(|i| s[i]);
        v = idx.map(|i| v[i]);
        let size = (1..3)
            .map(|k| ((s[k][0] - s[0][0]).abs()).max((s[k][1] - s[0][1]).abs()))
            .fold(0.0, f64::max);
        if size < tol {
            return (s[0], true);
        }
        let c = [(s[0][0] + s[1][0]) / 2.0, (s[0][1] + s[1][1]) / 2.0];
        let pt = |t: f64| [c[0] + t * (s[2][0] - c[0]), c[1] + t * (s[2][1] - c[1])];
        let xr = pt(-1.0);
        let fr = f(xr);
        if fr < v[0] {
            let xe = pt(-2.0);
            let fe = f(xe);
            if fe < fr {
                s[2] = xe;
                v[2] = fe;
            } else {
                s[2] = xr;
                v[2] = fr;
            }
        } else if fr < v[1] {
            s[2] = xr;
            v[2] = fr;
        } else {
            let (xc, fc) = if fr < v[2] {
                let x = pt(-0.5);
                (x, f(x))
            } else {
                let x = pt(0.5);
                (x, f(x))
            };
            if fc < v[2].min(fr) {
                s[2] = xc;
                v[2] = fc;
            } else {
                for k in 1..3 {
                    s[k] = [(s[0][0] + s[k][0]) / 2.0, (s[0][1] + s[k][1]) / 2.0];
                    v[k] = f(s[k]);
                }
            }
        }
    }
    (s[0], false)
}

fn fd_jacobian(model: FitModel, xs: &[f64], p: [f64; 2]) -> DMatrix<f64> {
    DMatrix::from_fn(xs.len(), 2, |i, j| {
        let h = 1e-6 * p[j].abs().max(1e-8);
        let mut hi = p;
        let mut lo = p;
        hi[j] += h;
        lo[j] -= h;
        (sat_model(model, hi[0], hi[1], xs[i]) - sat_model(model, lo[0], lo[1], xs[i])) / (2.0 * h)
    })
}

fn analytic_jacobian(model: FitModel, xs: &[f64], p: [f64; 2]) -> DMatrix<f64> {
    let [a, b] = p;
    DMatrix::from_fn(xs.len(), 2, |i, j| {
        let x = xs[i];
        let e = (-b * x).exp();
        match (model, j) {
            (FitModel::OneMinusAExp, 0) => -e,
            (FitModel::OneMinusAExp, _) => a * x * e,
            (_, 0) => 1.0 - e,
            (_, _) => a * x * e,
        }
    })
}

/// Nonlinear fit of a saturating exponential: 32×32 grid (log-spaced in `b`,
/// linear in `a`), Nelder–Mead refinement, then Gauss–Newton polishing.
pub fn saturating_exponential_fit(xs: &[f64], ys: &[f64], model: FitModel) -> Result<FitResult> {
    if !matches!(model, FitModel::OneMinusAExp | FitModel::ATimesOneMinusExp) {
        return Err(Error::Argument(format!("{} is not a saturating exponential", model.name())));
    }
    check_xy(xs, ys, 4)?;
    let xmax = xs.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if xmax == 0.0 {
        return Err(Error::Rank("all x are zero".into()));
    }
    let f = |p: [f64; 2]| ssr_of(model, xs, ys, p[0], p[1]);

    const G: usize = 32;
    let (lb, ub) = ((1e-3 / xmax).ln(), (30.0 / xmax).ln());
    let mut grid: Vec<(f64, [f64; 2])> = Vec::with_capacity(G * G);
    for i in 0..G {
        let b = (lb + (ub - lb) * i as f64 / (G - 1) as f64).exp();
        let a0 = profile_a(model, xs, ys, b);
        let span = a0.abs().max(1e-3);
        for j in 0..G {
            let a = a0 - span + 2.0 * span * j as f64 / (G - 1) as f64;
            grid.push((f([a, b]), [a, b]));
        }
    }
    grid.sort_by(|x, y| x.0.total_cmp(&y.0));

    let mut best = (f64::INFINITY, grid[0].1, false);
    for &(_, p0) in grid.iter().take(3) {
        let (p, ok) = nelder_mead(f, p0, [0.05 * p0[0].abs().max(1e-3), 0.1 * p0[1]], 1e-10);
        let v = f(p);
        if v < best.0 {
            best = (v, p, ok);
        }
    }
    let (_, mut p, converged) = best;

    // Gauss–Newton from the simplex optimum.
    for _ in 0..50 {
        let j = analytic_jacobian(model, xs, p);
        let r = DVector::from_iterator(xs.len(), xs.iter().zip(ys).map(|(&x, &y)| y - sat_model(model, p[0], p[1], x)));
        let jtj = j.transpose() * &j;
        let Some(inv) = jtj.try_inverse() else { break };
        let step = inv * j.transpose() * r;
        let cand = [p[0] + step[0], p[1] + step[1]];
        if f(cand) <= f(p) {
            p = cand;
        } else {
            break;
        }
        if step.amax() < 1e-15 * (1.0 + p[0].abs().max(p[1].abs())) {
            break;
        }
    }

    let ssr = f(p);
    let dof = xs.len() - 2;
    let s2 = ssr / dof as f64;
    let jac = fd_jacobian(model, xs, p);
    let cov = (jac.transpose() * &jac).try_inverse();
    let mut flags = Vec::new();
    let yscale = ys.iter().map(|y| y.abs()).fold(0.0, f64::max).max(1e-300);
    let degenerate = p[0].abs() < 1e-8 * yscale.max(1.0) || cov.is_none();
    if degenerate {
        flags.push("degenerate".to_string());
    }
    if !converged {
        flags.push("not_converged".to_string());
    }
    let errs = match &cov {
        Some(c) if !degenerate => [(s2 * c[(0, 0)]).max(0.0).sqrt(), (s2 * c[(1, 1)]).max(0.0).sqrt()],
        _ => [f64::NAN, f64::NAN],
    };
    Ok(FitResult {
        model,
        parameters: named(&["a", "b"], &p),
        std_errors: named(&["a", "b"], &errs),
        residual_norm: ssr.sqrt(),
        r_squared: r_squared(ys, ssr),
        converged: converged && !degenerate,
        flags,
    })
}

/// Chebyshev `T_0..T_degree` at `t ∈ [-1, 1]`.
fn chebyshev_row(t: f64, degree: usize) -> Vec<f64> {
    let mut row = Vec::with_capacity(degree + 1);
    row.push(1.0);
    if degree >= 1 {
        row.push(t);
    }
    for k in 2..=degree {
        let v = 2.0 * t * row[k - 1] - row[k - 2];
        row.push(v);
    }
    row
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PolynomialPeak {
    pub location: f64,
    pub value: f64,
    /// Maximum sits on the edge of the data interval.
    pub boundary: bool,
    pub x_min: f64,
    pub x_max: f64,
    pub coefficients: Vec<f64>,
    pub fit: FitResult,
}

impl PolynomialPeak {
    pub fn evaluate(&self, x: f64) -> f64 {
        let t = to_unit(x, self.x_min, self.x_max);
        chebyshev_row(t, self.coefficients.len() - 1).iter().zip(&self.coefficients).map(|(a, b)| a * b).sum()
    }
}

/// Coefficients of the derivative of a Chebyshev series.
fn chebyshev_derivative(c: &[f64]) -> Vec<f64> {
    let n = c.len();
    if n <= 1 {
        return vec![0.0];
    }
    let mut d = vec![0.0; n + 1];
    for k in (1..n).rev() {
        d[k - 1] = d[k + 1] + 2.0 * k as f64 * c[k];
    }
    d[0] /= 2.0;
    d.truncate(n - 1);
    d
}

fn to_unit(x: f64, lo: f64, hi: f64) -> f64 {
    (2.0 * x - lo - hi) / (hi - lo)
}

/// Least-squares polynomial in the Chebyshev basis on `x` rescaled to
/// `[-1, 1]`, and the location of its maximum on the data interval.
pub fn polynomial_peak(xs: &[f64], ys: &[f64], degree: usize) -> Result<PolynomialPeak> {
    check_xy(xs, ys, degree + 2)?;
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return Err(Error::Rank("all x values coincide".into()));
    }
    let a = DMatrix::from_fn(xs.len(), degree + 1, |i, j| chebyshev_row(to_unit(xs[i], lo, hi), degree)[j]);
    let y = DVector::from_column_slice(ys);
    let (coef, cov) = lstsq(&a, &y)?;
    let ssr = (&y - &a * &coef).norm_squared();
    let dof = xs.len() - degree - 1;
    let s2 = if dof > 0 { ssr / dof as f64 } else { 0.0 };
    let coefficients: Vec<f64> = coef.iter().copied().collect();
    let eval = |t: f64| chebyshev_row(t, degree).iter().zip(&coefficients).map(|(a, b)| a * b).sum::<f64>();

    const SCAN: usize = 20_000;
    let mut bi = 0;
    let mut bv = f64::NEG_INFINITY;
    for i in 0..=SCAN {
        let v = eval(-1.0 + 2.0 * i as f64 / SCAN as f64);
        if v > bv {
            bv = v;
            bi = i;
        }
    }
    let boundary = bi == 0 || bi == SCAN;
    let mut t = -1.0 + 2.0 * bi as f64 / SCAN as f64;
    if !boundary {
        // Golden-section refinement inside the bracketing cells.
        let h = 2.0 / SCAN as f64;
        let (mut l, mut r) = (t - h, t + h);
        let phi = (5f64.sqrt() - 1.0) / 2.0;
        let mut c = r - phi * (r - l);
        let mut d = l + phi * (r - l);
        while r - l > 1e-15 {
            if eval(c) > eval(d) {
                r = d;
            } else {
                l = c;
            }
            c = r - phi * (r - l);
            d = l + phi * (r - l);
            if !(c < d) {
                break;
            }
        }
        t = (l + r) / 2.0;
        // Newton on p'(t) = 0 for the last digits.
        let d1 = chebyshev_derivative(&coefficients);
        let d2 = chebyshev_derivative(&d1);
        let ev = |c: &[f64], t: f64| chebyshev_row(t, c.len() - 1).iter().zip(c).map(|(a, b)| a * b).sum::<f64>();
        let (bl, br) = (t - h, t + h);
        for _ in 0..20 {
            let (g1, g2) = (ev(&d1, t), ev(&d2, t));
            if !(g2 < 0.0) {
                break;
            }
            let next = t - g1 / g2;
            if !(bl..=br).contains(&next) || eval(next) < eval(t) - 1e-15 * eval(t).abs() {
                break;
            }
            let done = (next - t).abs() < 1e-16;
            t = next;
            if done {
                break;
            }
        }
    }
    let location = lo + (t + 1.0) * (hi - lo) / 2.0;
    let names: Vec<String> = (0..=degree).map(|k| format!("c{k}")).collect();
    let name_refs: Vec<&str> = names.iter().map(String::as_str).collect();
    let errs: Vec<f64> = (0..=degree).map(|k| (s2 * cov[(k, k)]).max(0.0).sqrt()).collect();
    let mut flags = Vec::new();
    if boundary {
        flags.push("boundary".to_string());
    }
    let fit = FitResult {
        model: FitModel::Polynomial,
        parameters: named(&name_refs, &coefficients),
        std_errors: named(&name_refs, &errs),
        residual_norm: ssr.sqrt(),
        r_squared: r_squared(ys, ssr),
        converged: true,
        flags,
    };
    Ok(PolynomialPeak { location, value: eval(t), boundary, x_min: lo, x_max: hi, coefficients, fit })
}

/// Bootstrap standard errors: refit on `n_boot` resamples drawn with replacement.
pub fn bootstrap_std_errors(
    xs: &[f64],
    ys: &[f64],
    n_boot: usize,
    seed: u64,
    fit: impl Fn(&[f64], &[f64]) -> Result<FitResult>,
) -> Result<BTreeMap<String, f64>> {
    check_xy(xs, ys, 2)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut samples: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    for _ in 0..n_boot {
        let idx: Vec<usize> = (0..xs.len()).map(|_| rng.random_range(0..xs.len())).collect();
        let bx: Vec<f64> = idx.iter().map(|&i| xs[i]).collect();
        let by: Vec<f64> = idx.iter().map(|&i| ys[i]).collect();
        if let Ok(r) = fit(&bx, &by) {
            for (k, v) in r.parameters {
                samples.entry(k).or_default().push(v);
            }
        }
    }
    Ok(samples
        .into_iter()
        .map(|(k, v)| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len().max(2) - 1) as f64;
            (k, var.sqrt())
        })
        .collect())
}
