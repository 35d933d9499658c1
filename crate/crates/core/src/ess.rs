//! Spacing-ratio statistics, reference distributions, KL divergence and the
//! KL-fidelity transition probe.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::{polynomial_peak, FitResult};

/// Spacings at or below this are treated as exact degeneracies.
pub const DEGENERATE_SPACING: f64 = 1e-12;
/// Default histogram cutoff for spacing ratios.
pub const RATIO_CUTOFF: f64 = 10.0;
pub const RATIO_BINS: usize = 100;
/// Floor for empty reference bins.
pub const KL_FLOOR: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HistogramPDF {
    pub bin_edges: Vec<f64>,
    pub densities: Vec<f64>,
    pub n_samples: usize,
    pub excluded: usize,
}

impl HistogramPDF {
    /// Normalized histogram of `samples` on `[lo, hi]`; samples outside are
    /// counted in `excluded`.
    pub fn from_samples(samples: &[f64], bins: usize, lo: f64, hi: f64) -> Result<Self> {
        if bins < 2 {
            return Err(Error::Argument(format!("need at least 2 bins, got {bins}")));
        }
        if !(hi > lo) {
            return Err(Error::Argument(format!("empty range [{lo}, {hi}]")));
        }
        let w = (hi - lo) / bins as f64;
        let edges: Vec<f64> = (0..=bins).map(|k| lo + k as f64 * w).collect();
        let mut counts = vec![0usize; bins];
        let mut excluded = 0;
        for &s in samples {
            if !(lo..=hi).contains(&s) || !s.is_finite() {
                excluded += 1;
                continue;
            }
            let k = (((s - lo) / w) as usize).min(bins - 1);
            counts[k] += 1;
        }
        let kept = samples.len() - excluded;
        if kept == 0 {
            return Err(Error::DegenerateData("every sample fell outside the histogram range".into()));
        }
        let densities = counts.iter().map(|&c| c as f64 / (kept as f64 * w)).collect();
        Ok(Self { bin_edges: edges, densities, n_samples: kept, excluded })
    }

    pub fn bins(&self) -> usize {
        self.densities.len()
    }

    pub fn widths(&self) -> impl Iterator<Item = f64> + '_ {
        self.bin_edges.windows(2).map(|e| e[1] - e[0])
    }

    /// Probability per bin.
    pub fn masses(&self) -> Vec<f64> {
        self.densities.iter().zip(self.widths()).map(|(d, w)| d * w).collect()
    }

    pub fn support(&self) -> (f64, f64) {
        (self.bin_edges[0], *self.bin_edges.last().unwrap())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceKind {
    Poisson,
    WdGoe,
    WdGue,
    WdGse,
}

impl ReferenceKind {
    pub const ALL: [ReferenceKind; 4] =
        [ReferenceKind::Poisson, ReferenceKind::WdGoe, ReferenceKind::WdGue, ReferenceKind::WdGse];

    pub fn beta(self) -> Option<u32> {
        match self {
            ReferenceKind::Poisson => None,
            ReferenceKind::WdGoe => Some(1),
            ReferenceKind::WdGue => Some(2),
            ReferenceKind::WdGse => Some(4),
        }
    }

    /// Mean of `min(r, 1/r)`.
    pub fn mean_ratio(self) -> f64 {
        let s3 = 3f64.sqrt();
        match self {
            ReferenceKind::Poisson => 2.0 * 2f64.ln() - 1.0,
            ReferenceKind::WdGoe => 4.0 - 2.0 * s3,
            ReferenceKind::WdGue => 2.0 * s3 / PI - 0.5,
            ReferenceKind::WdGse => 32.0 / 15.0 * s3 / PI - 0.5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ReferenceKind::Poisson => "poisson",
            ReferenceKind::WdGoe => "wd_goe",
            ReferenceKind::WdGue => "wd_gue",
            ReferenceKind::WdGse => "wd_gse",
        }
    }
}

impl std::str::FromStr for ReferenceKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "poisson" => Ok(ReferenceKind::Poisson),
            "wd_goe" | "goe" => Ok(ReferenceKind::WdGoe),
            "wd_gue" | "gue" => Ok(ReferenceKind::WdGue),
            "wd_gse" | "gse" => Ok(ReferenceKind::WdGse),
            _ => Err(Error::Argument(format!("unknown reference distribution {s:?}"))),
        }
    }
}

/// `P(r)`: `1/(1+r)²` or `Z_β⁻¹ (r+r²)^β / (1+r+r²)^(1+3β/2)`.
pub fn reference_pdf(kind: ReferenceKind, r: f64) -> Result<f64> {
    if !(r >= 0.0) {
        return Err(Error::Argument(format!("r = {r} must be nonnegative")));
    }
    Ok(reference_pdf_unchecked(kind, r))
}

fn reference_pdf_unchecked(kind: ReferenceKind, r: f64) -> f64 {
    let s3 = 3f64.sqrt();
    let (beta, z) = match kind {
        ReferenceKind::Poisson => return 1.0 / ((1.0 + r) * (1.0 + r)),
        ReferenceKind::WdGoe => (1.0, 8.0 / 27.0),
        ReferenceKind::WdGue => (2.0, 4.0 / 81.0 * PI / s3),
        ReferenceKind::WdGse => (4.0, 4.0 / 729.0 * PI / s3),
    };
    (r + r * r).powf(beta) / (1.0 + r + r * r).powf(1.0 + 1.5 * beta) / z
}

/// Reference probability per bin of `edges`, midpoint rule with 16
/// sub-samples, renormalized over the covered range.
pub fn reference_masses(kind: ReferenceKind, edges: &[f64]) -> Vec<f64> {
    const SUB: usize = 16;
    let mut m: Vec<f64> = edges
        .windows(2)
        .map(|e| {
            let h = (e[1] - e[0]) / SUB as f64;
            (0..SUB).map(|j| reference_pdf_unchecked(kind, e[0] + (j as f64 + 0.5) * h)).sum::<f64>() * h
        })
        .collect();
    let total: f64 = m.iter().sum();
    if total > 0.0 {
        m.iter_mut().for_each(|v| *v /= total);
    }
    m
}

/// `r_k = s_{k+1} / s_k` over consecutive spacings, degenerate spacings dropped.
pub fn gap_ratios(eigenvalues: &[f64]) -> Result<Vec<f64>> {
    if eigenvalues.len() < 3 {
        return Err(Error::Argument(format!("need at least 3 levels, got {}", eigenvalues.len())));
    }
    let spacings: Vec<f64> = eigenvalues
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|s| s.abs() > DEGENERATE_SPACING)
        .collect();
    Ok(spacings.windows(2).map(|s| (s[1] / s[0]).abs()).collect())
}

/// Gap ratios folded into `[0, 1]`.
pub fn folded_ratios(eigenvalues: &[f64]) -> Result<Vec<f64>> {
    Ok(gap_ratios(eigenvalues)?.into_iter().map(|r| if r > 1.0 { 1.0 / r } else { r }).collect())
}

/// `r̄` pooled over all levels of all spectra.
pub fn average_ratio<S: AsRef<[f64]>>(spectra: &[S]) -> Result<f64> {
    if spectra.is_empty() {
        return Err(Error::Argument("no spectra".into()));
    }
    let mut sum = 0.0;
    let mut n = 0usize;
    for s in spectra {
        for r in folded_ratios(s.as_ref())? {
            sum += r;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::DegenerateData("no nondegenerate spacing pairs".into()));
    }
    Ok(sum / n as f64)
}

/// Histogram of ratios on `[0, cutoff]`; larger ratios count as excluded.
pub fn ess_histogram(ratios: &[f64], bins: usize, cutoff: f64) -> Result<HistogramPDF> {
    HistogramPDF::from_samples(ratios, bins, 0.0, cutoff)
}

/// `Σ p_i ln(p_i / q_i)` over probability vectors; zero `p_i` contribute
/// nothing, zero `q_i` are floored at [`KL_FLOOR`].
pub fn kl_masses(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Dimension(format!("{} vs {} bins", p.len(), q.len())));
    }
    Ok(p.iter()
        .zip(q)
        .filter(|(pi, _)| **pi > 0.0)
        .map(|(pi, qi)| pi * (pi.ln() - qi.max(KL_FLOOR).ln()))
        .sum::<f64>()
        .max(0.0))
}

/// KL divergence of a histogram from per-bin reference masses.
pub fn kl_divergence(p: &HistogramPDF, q: &[f64]) -> Result<f64> {
    kl_masses(&p.masses(), q)
}

pub fn kl_to_reference(p: &HistogramPDF, kind: ReferenceKind) -> Result<f64> {
    kl_divergence(p, &reference_masses(kind, &p.bin_edges))
}

/// Reference with the smallest KL divergence from `p`.
pub fn closest_reference(p: &HistogramPDF) -> Result<(ReferenceKind, f64)> {
    let mut best = (ReferenceKind::Poisson, f64::INFINITY);
    for k in ReferenceKind::ALL {
        let d = kl_to_reference(p, k)?;
        if d < best.1 {
            best = (k, d);
        }
    }
    Ok(best)
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

/// `(g, D_KL(η_g ‖ η_{g+ε}))` for every grid point whose partner is present.
/// Each curve is a realization-averaged spectrum; it is renormalized first.
pub fn kl_fidelity_scan(curves: &[(f64, Vec<f64>)], epsilon: f64) -> Result<Vec<(f64, f64)>> {
    if !(epsilon > 0.0) {
        return Err(Error::Argument(format!("epsilon = {epsilon} must be positive")));
    }
    let tol = 1e-9;
    let mut sorted: Vec<&(f64, Vec<f64>)> = curves.iter().collect();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    if sorted.len() >= 2 {
        let step = sorted[1].0 - sorted[0].0;
        let ratio = epsilon / step;
        if step <= 0.0 || (ratio - ratio.round()).abs() > 1e-6 || ratio.round() < 1.0 {
            return Err(Error::Argument(format!("epsilon {epsilon} is not a multiple of grid step {step}")));
        }
    }
    let mut out = Vec::new();
    for (g, eta) in &sorted {
        let Some((_, next)) = sorted.iter().find(|(h, _)| (h - g - epsilon).abs() < tol) else {
            continue;
        };
        if next.len() != eta.len() {
            return Err(Error::Dimension(format!("curve lengths {} and {}", eta.len(), next.len())));
        }
        out.push((*g, kl_masses(&normalized(eta), &normalized(next))?));
    }
    if out.is_empty() {
        return Err(Error::Argument("no grid point has a partner at g + epsilon".into()));
    }
    Ok(out)
}

/// Divides a curve by its maximum.
pub fn rescale_by_max(curve: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let m = curve.iter().map(|c| c.1).fold(f64::NEG_INFINITY, f64::max);
    if m > 0.0 {
        curve.iter().map(|&(g, v)| (g, v / m)).collect()
    } else {
        curve.to_vec()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TransitionPoint {
    pub g_c: f64,
    /// The fitted maximum sits on the edge of the scanned interval.
    pub boundary: bool,
    pub fit: FitResult,
}

/// Peak of a degree-`poly_degree` polynomial fit to a fidelity curve.
pub fn transition_point(curve: &[(f64, f64)], poly_degree: usize) -> Result<TransitionPoint> {
    if curve.len() < poly_degree + 2 {
        return Err(Error::Argument(format!(
            "{} points cannot support a degree-{poly_degree} peak fit",
            curve.len()
        )));
    }
    let xs: Vec<f64> = curve.iter().map(|c| c.0).collect();
    let ys: Vec<f64> = curve.iter().map(|c| c.1).collect();
    let peak = polynomial_peak(&xs, &ys, poly_degree)?;
    Ok(TransitionPoint { g_c: peak.location, boundary: peak.boundary, fit: peak.fit })
}
