//! Bipartitions, reduced density matrices and the entropy family, with the
//! Haar and free-fermion reference values they are compared against.

use std::collections::HashSet;
use std::f64::consts::{LN_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::StateVector;
use crate::spectral::hermitian_eigen;

/// Eigenvalues below this are left out of logarithms.
pub const LOG_FLOOR: f64 = 1e-14;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Bipartition {
    pub n_qubits: usize,
    /// Sorted, 1-based.
    pub subsystem: Vec<usize>,
}

impl Bipartition {
    pub fn new(n_qubits: usize, mut subsystem: Vec<usize>) -> Result<Self> {
        subsystem.sort_unstable();
        subsystem.dedup();
        if subsystem.is_empty() || subsystem.len() >= n_qubits {
            return Err(Error::Argument(format!(
                "subsystem size {} must be in 1..{n_qubits}",
                subsystem.len()
            )));
        }
        if subsystem.iter().any(|&k| k == 0 || k > n_qubits) {
            return Err(Error::Argument(format!("subsystem {subsystem:?} outside 1..={n_qubits}")));
        }
        Ok(Self { n_qubits, subsystem })
    }

    /// Qubits `1..=r`.
    pub fn prefix(n_qubits: usize, r: usize) -> Result<Self> {
        Self::new(n_qubits, (1..=r).collect())
    }

    pub fn size(&self) -> usize {
        self.subsystem.len()
    }

    pub fn mask(&self) -> u64 {
        self.subsystem.iter().fold(0, |m, &k| m | 1 << (k - 1))
    }

    pub fn complement(&self) -> Bipartition {
        let s: HashSet<usize> = self.subsystem.iter().copied().collect();
        Bipartition { n_qubits: self.n_qubits, subsystem: (1..=self.n_qubits).filter(|k| !s.contains(k)).collect() }
    }

    /// Compact label such as `1-2-5`.
    pub fn label(&self) -> String {
        self.subsystem.iter().map(|k| k.to_string()).collect::<Vec<_>>().join("-")
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Size of the subsystem for ratio `f`; `f·n` must be an integer, except
/// that `f = 1/2` on an odd count rounds down.
pub fn subsystem_size(n_qubits: usize, f: f64) -> Result<usize> {
    let r = f * n_qubits as f64;
    let r = if (f - 0.5).abs() < 1e-12 && n_qubits % 2 == 1 { r.floor() } else { r };
    if (r - r.round()).abs() > 1e-9 || r.round() < 1.0 || r.round() >= n_qubits as f64 {
        return Err(Error::Argument(format!("f = {f} gives non-integral or trivial subsystem on {n_qubits} qubits")));
    }
    Ok(r.round() as usize)
}

/// `count` distinct uniformly drawn subsets of size `f·n`. When `count`
/// equals the number of subsets, all of them are returned in lexicographic order.
pub fn sample_bipartitions(n_qubits: usize, f: f64, count: usize, seed: u64) -> Result<Vec<Bipartition>> {
    let r = subsystem_size(n_qubits, f)?;
    let total = binomial(n_qubits, r);
    if count as u128 > total {
        return Err(Error::Argument(format!("{count} bipartitions requested, only {total} exist")));
    }
    if count as u128 == total {
        return Ok(crate::syk::index_tuples(n_qubits, r)
            .into_iter()
            .map(|s| Bipartition { n_qubits, subsystem: s })
            .collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let mut s: Vec<usize> = sample(&mut rng, n_qubits, r).into_iter().map(|k| k + 1).collect();
        s.sort_unstable();
        if seen.insert(s.clone()) {
            out.push(Bipartition { n_qubits, subsystem: s });
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntanglementSpectrum {
    /// Descending, nonnegative, unit sum; length `2^R`.
    pub eigenvalues: Vec<f64>,
    pub subsystem_size: usize,
    pub total_qubits: usize,
}

impl EntanglementSpectrum {
    /// Clamps, sorts descending and renormalizes.
    pub fn from_eigenvalues(mut eigenvalues: Vec<f64>, subsystem_size: usize, total_qubits: usize) -> Result<Self> {
        if eigenvalues.iter().any(|&l| !(l >= -1e-12) || !l.is_finite()) {
            return Err(Error::Contract("negative or non-finite RDM eigenvalue".into()));
        }
        eigenvalues.iter_mut().for_each(|l| *l = l.max(0.0));
        eigenvalues.sort_by(|a, b| b.total_cmp(a));
        let s: f64 = eigenvalues.iter().sum();
        if s <= 0.0 {
            return Err(Error::Contract("RDM has zero trace".into()));
        }
        eigenvalues.iter_mut().for_each(|l| *l /= s);
        Ok(Self { eigenvalues, subsystem_size, total_qubits })
    }

    /// `R = ⌊n/2⌋`.
    pub fn is_half(&self) -> bool {
        self.subsystem_size == self.total_qubits / 2
    }
}

fn spread_bits(value: usize, positions: &[usize]) -> usize {
    positions.iter().enumerate().fold(0, |acc, (j, &p)| acc | ((value >> j & 1) << p))
}

fn rdm_from_amplitudes(amps: &[Complex64], n: usize, sub_bits: &[usize], total_qubits: usize) -> Result<EntanglementSpectrum> {
    let r = sub_bits.len();
    let comp_bits: Vec<usize> = (0..n).filter(|b| !sub_bits.contains(b)).collect();
    let (da, db) = (1usize << r, 1usize << (n - r));
    let sub_off: Vec<usize> = (0..da).map(|a| spread_bits(a, sub_bits)).collect();
    let comp_off: Vec<usize> = (0..db).map(|c| spread_bits(c, &comp_bits)).collect();
    let m = DMatrix::from_fn(da, db, |a, c| amps[sub_off[a] | comp_off[c]]);
    let (mut w, _) = if da <= db {
        hermitian_eigen(&m * m.adjoint(), false)
    } else {
        hermitian_eigen(m.adjoint() * &m, false)
    };
    w.resize(da, 0.0);
    EntanglementSpectrum::from_eigenvalues(w, r, total_qubits)
}

/// Spectrum of `Tr_complement |ψ⟩⟨ψ|` over the qubits of `b`.
pub fn partial_trace(psi: &StateVector, b: &Bipartition) -> Result<EntanglementSpectrum> {
    if b.n_qubits != psi.n_qubits {
        return Err(Error::Dimension(format!("bipartition of {} qubits, state of {}", b.n_qubits, psi.n_qubits)));
    }
    let bits: Vec<usize> = b.subsystem.iter().map(|k| k - 1).collect();
    rdm_from_amplitudes(&psi.amplitudes, psi.n_qubits, &bits, psi.n_qubits)
}

/// Amplitudes with the fermionic exchange sign that moves the modes of `b`
/// ahead of the rest: pairs (i < j) with i outside, j inside, both occupied.
fn fermionic_signed(psi: &StateVector, b: &Bipartition) -> Vec<Complex64> {
    let sub = b.mask() as usize;
    psi.amplitudes
        .iter()
        .enumerate()
        .map(|(idx, &a)| {
            let mut crossings = 0u32;
            let mut outside_below = 0u32;
            for k in 0..psi.n_qubits {
                if idx >> k & 1 == 1 {
                    if sub >> k & 1 == 1 {
                        crossings += outside_below;
                    } else {
                        outside_below += 1;
                    }
                }
            }
            if crossings % 2 == 1 {
                -a
            } else {
                a
            }
        })
        .collect()
}

/// Reduced state of the fermionic modes in `b` (mode `k` is qubit `k` under
/// Jordan–Wigner). Modes are reordered to the front with the fermionic
/// exchange sign before the qubit trace, so non-contiguous mode sets give the
/// physical fermionic RDM rather than a qubit RDM of a nonlocal string.
pub fn fermionic_partial_trace(psi: &StateVector, b: &Bipartition) -> Result<EntanglementSpectrum> {
    if b.n_qubits != psi.n_qubits {
        return Err(Error::Dimension(format!("bipartition of {} qubits, state of {}", b.n_qubits, psi.n_qubits)));
    }
    let amps = fermionic_signed(psi, b);
    let bits: Vec<usize> = b.subsystem.iter().map(|k| k - 1).collect();
    rdm_from_amplitudes(&amps, psi.n_qubits, &bits, psi.n_qubits)
}

/// Ascending entanglement spectra per subsystem-parity block. A state of
/// definite fermion parity has a block-diagonal RDM, and levels from the two
/// blocks do not repel; otherwise the full spectrum is returned as one block.
pub fn fermionic_parity_blocks(psi: &StateVector, b: &Bipartition) -> Result<Vec<Vec<f64>>> {
    if b.n_qubits != psi.n_qubits {
        return Err(Error::Dimension(format!("bipartition of {} qubits, state of {}", b.n_qubits, psi.n_qubits)));
    }
    let amps = fermionic_signed(psi, b);
    let n = psi.n_qubits;
    let sub_bits: Vec<usize> = b.subsystem.iter().map(|k| k - 1).collect();
    let comp_bits: Vec<usize> = (0..n).filter(|k| !sub_bits.contains(k)).collect();
    let (da, db) = (1usize << sub_bits.len(), 1usize << comp_bits.len());
    let sub_off: Vec<usize> = (0..da).map(|a| spread_bits(a, &sub_bits)).collect();
    let comp_off: Vec<usize> = (0..db).map(|c| spread_bits(c, &comp_bits)).collect();
    let m = DMatrix::from_fn(da, db, |a, c| amps[sub_off[a] | comp_off[c]]);
    let rho = &m * m.adjoint();
    let parity = |a: usize| a.count_ones() % 2;
    let mut off = 0.0;
    for i in 0..da {
        for j in 0..da {
            if parity(i) != parity(j) {
                off += rho[(i, j)].norm_sqr();
            }
        }
    }
    if off.sqrt() > 1e-10 {
        return Ok(vec![hermitian_eigen(rho, false).0]);
    }
    let mut out = Vec::with_capacity(2);
    for p in 0..2 {
        let idx: Vec<usize> = (0..da).filter(|&a| parity(a) == p).collect();
        let block = DMatrix::from_fn(idx.len(), idx.len(), |i, j| rho[(idx[i], idx[j])]);
        out.push(hermitian_eigen(block, false).0);
    }
    Ok(out)
}

/// `S_α = ln(Σλ^α)/(1−α)`; `α = 1` gives `−Σ λ ln λ`.
pub fn renyi_entropy(spec: &EntanglementSpectrum, alpha: f64) -> Result<f64> {
    if !(alpha > 0.0) {
        return Err(Error::Argument(format!("alpha = {alpha} must be positive")));
    }
    let ev = spec.eigenvalues.iter().copied().filter(|&l| l > LOG_FLOOR);
    let s = if alpha == 1.0 {
        -ev.map(|l| l * l.ln()).sum::<f64>()
    } else {
        ev.map(|l| l.powf(alpha)).sum::<f64>().ln() / (1.0 - alpha)
    };
    Ok(s.max(0.0))
}

pub fn von_neumann(spec: &EntanglementSpectrum) -> f64 {
    renyi_entropy(spec, 1.0).expect("alpha = 1 is valid")
}

/// `−Var(−ln ρ) = −[Σλ ln²λ − (Σλ ln λ)²]`.
pub fn capacity_of_entanglement(spec: &EntanglementSpectrum) -> f64 {
    let (mut m1, mut m2) = (0.0, 0.0);
    for &l in spec.eigenvalues.iter().filter(|&&l| l > LOG_FLOOR) {
        let lg = l.ln();
        m1 += l * lg;
        m2 += l * lg * lg;
    }
    -(m2 - m1 * m1).max(0.0)
}

/// Modular entropy `S̃_α = α² ∂_α((α−1)/α · S_α)`.
pub fn modular_entropy(spec: &EntanglementSpectrum, alpha: f64) -> f64 {
    // With Z(α) = Σλ^α: S̃_α = ln Z − α Z'/Z.
    let (mut z, mut dz) = (0.0, 0.0);
    for &l in spec.eigenvalues.iter().filter(|&&l| l > LOG_FLOOR) {
        let p = l.powf(alpha);
        z += p;
        dz += p * l.ln();
    }
    z.ln() - alpha * dz / z
}

/// `F = 2(S₂ − S₃)`.
pub fn log_antiflatness(spec: &EntanglementSpectrum) -> f64 {
    let s2 = renyi_entropy(spec, 2.0).unwrap();
    let s3 = renyi_entropy(spec, 3.0).unwrap();
    (2.0 * (s2 - s3)).max(0.0)
}

/// Points `(x_k, η_k)` with `x_k = ½√(λ_k d)`, `η_k = k/d`, `d = 2^R`, for a
/// half-system spectrum.
pub fn normalized_rdm_curve(spec: &EntanglementSpectrum) -> Result<Vec<(f64, f64)>> {
    if !spec.is_half() {
        return Err(Error::Argument(format!(
            "curve needs a half-system bipartition, got {} of {} qubits",
            spec.subsystem_size, spec.total_qubits
        )));
    }
    let d = spec.eigenvalues.len() as f64;
    Ok(spec
        .eigenvalues
        .iter()
        .enumerate()
        .map(|(k, &l)| (0.5 * (l * d).sqrt(), (k + 1) as f64 / d))
        .collect())
}

/// `η(x) = 1 − (2/π)(x√(1−x²) + arcsin x)`, clamped outside `[0, 1]`.
pub fn mp_curve(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x >= 1.0 {
        return 0.0;
    }
    1.0 - 2.0 / PI * (x * (1.0 - x * x).sqrt() + x.asin())
}

/// KL divergence between the pooled `x_k` of normalized RDM curves and a
/// reference survival function `η_ref(x)` on `bins` equal bins of `[0, 1]`;
/// points beyond 1 fall in the last bin.
pub fn rdm_curve_kl(curves: &[Vec<(f64, f64)>], survival: impl Fn(f64) -> f64, bins: usize) -> Result<f64> {
    if bins < 2 {
        return Err(Error::Argument("need at least 2 bins".into()));
    }
    let mut p = vec![0.0; bins];
    let mut n = 0usize;
    for c in curves {
        for &(x, _) in c {
            let k = ((x * bins as f64) as usize).min(bins - 1);
            p[k] += 1.0;
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::Argument("no curve points".into()));
    }
    p.iter_mut().for_each(|v| *v /= n as f64);
    let q: Vec<f64> = (0..bins)
        .map(|k| {
            let hi = if k + 1 == bins { f64::INFINITY } else { (k + 1) as f64 / bins as f64 };
            survival(k as f64 / bins as f64) - if hi.is_finite() { survival(hi) } else { 0.0 }
        })
        .collect();
    crate::ess::kl_masses(&p, &q)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HaarReference {
    /// Rescaled `2S₁/(n ln 2)` for subsystem ratio `f` of `n` qubits: `2 min(f, 1−f)`.
    PageEntropy { f: f64 },
    /// Average `S_α` of an `r`-qubit subsystem of `n` qubits, integer `α ≥ 1`.
    RenyiPage { n_qubits: usize, r: usize, alpha: u32 },
    /// `η(x)` of the Marchenko–Pastur law.
    MpCurve { x: f64 },
    /// Half-system capacity of entanglement, `11/4 − π²/3`.
    Capacity,
    /// `ln(5/4)`.
    LogAntiflatness,
    /// `M₂ ≈ n − 2` for `n` qubits.
    SreScaling { n_qubits: usize },
}

pub fn haar_reference(r: &HaarReference) -> Result<f64> {
    match *r {
        HaarReference::PageEntropy { f } => {
            if !(0.0..=1.0).contains(&f) {
                return Err(Error::Argument(format!("f = {f} outside [0, 1]")));
            }
            Ok(2.0 * f.min(1.0 - f))
        }
        HaarReference::RenyiPage { n_qubits, r, alpha } => renyi_page(n_qubits, r, alpha),
        HaarReference::MpCurve { x } => Ok(mp_curve(x)),
        HaarReference::Capacity => Ok(HAAR_CAPACITY),
        HaarReference::LogAntiflatness => Ok(HAAR_LOG_ANTIFLATNESS),
        HaarReference::SreScaling { n_qubits } => Ok(n_qubits as f64 - 2.0),
    }
}

pub const HAAR_CAPACITY: f64 = 11.0 / 4.0 - PI * PI / 3.0;
pub const HAAR_LOG_ANTIFLATNESS: f64 = 0.22314355131420976;

fn narayana(alpha: u32, k: u32) -> f64 {
    binomial(alpha as usize, k as usize) as f64 * binomial(alpha as usize, k as usize - 1) as f64 / alpha as f64
}

/// Leading-order Haar average of `S_α` (natural log) for an `r`-qubit
/// subsystem of `n` qubits via Narayana numbers; `α = 1` uses Page's formula.
pub fn renyi_page(n_qubits: usize, r: usize, alpha: u32) -> Result<f64> {
    if r == 0 || r >= n_qubits || alpha == 0 {
        return Err(Error::Argument(format!("invalid (n={n_qubits}, r={r}, alpha={alpha})")));
    }
    let r = r.min(n_qubits - r);
    if alpha == 1 {
        return Ok(page_entropy_exact(r, n_qubits - r));
    }
    let (n, rr) = (n_qubits as f64, r as f64);
    let sum: f64 = (1..=alpha).map(|k| narayana(alpha, k) * 2f64.powf((2.0 * rr - n) * k as f64)).sum();
    let a = alpha as f64;
    Ok(((n - rr * (1.0 + a)) * LN_2 + sum.ln()) / (1.0 - a))
}

/// Page's exact mean entropy of `r_a` qubits in a Haar state of `r_a + r_b` qubits.
pub fn page_entropy_exact(r_a: usize, r_b: usize) -> f64 {
    let (m, n) = {
        let (a, b) = (1u64 << r_a, 1u64 << r_b);
        (a.min(b), a.max(b))
    };
    let mut h = 0.0;
    for k in (n + 1)..=(m * n) {
        h += 1.0 / k as f64;
    }
    h - (m as f64 - 1.0) / (2.0 * n as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Syk2Kind {
    MeanEntropy,
    LogAntiflatness,
}

/// `K(f) = 1 − (1 + f⁻¹(1−f) ln(1−f)) / ln 2`.
pub fn syk2_k(f: f64) -> f64 {
    1.0 - (1.0 + (1.0 - f) / f * (1.0 - f).ln()) / LN_2
}

/// Terminating `₂F₁(1/2, 1−n; 2; z)` for `z ∈ [0, 1]`, written as a
/// binomial average of nonnegative terms so no cancellation occurs.
pub fn hyp2f1_half(n: u32, z: f64) -> f64 {
    // ₂F₁(a, −m; c; z) = Σ_k C(m,k) z^k (1−z)^{m−k} (c−a)_k/(c)_k.
    let m = n - 1;
    let mut ratio = 1.0;
    let mut sum = KahanSum::default();
    let mut log_binom = 0.0f64;
    for k in 0..=m {
        if k > 0 {
            ratio *= (1.5 + (k - 1) as f64) / (2.0 + (k - 1) as f64);
            log_binom += ((m - k + 1) as f64).ln() - (k as f64).ln();
        }
        let w = if z == 0.0 {
            if k == 0 { 1.0 } else { 0.0 }
        } else if z == 1.0 {
            if k == m { 1.0 } else { 0.0 }
        } else {
            (log_binom + k as f64 * z.ln() + (m - k) as f64 * (1.0 - z).ln()).exp()
        };
        sum.add(w * ratio);
    }
    sum.value()
}

#[derive(Default)]
struct KahanSum {
    s: f64,
    c: f64,
}

impl KahanSum {
    fn add(&mut self, x: f64) {
        let y = x - self.c;
        let t = self.s + y;
        self.c = (t - self.s) - y;
        self.s = t;
    }
    fn value(&self) -> f64 {
        self.s
    }
}

/// Free-fermion (SYK-2) eigenstate averages for an `R`-mode subsystem at ratio `f`.
pub fn syk2_reference(kind: Syk2Kind, r: usize, f: f64) -> Result<f64> {
    if !(f > 0.0 && f < 1.0) {
        return Err(Error::Argument(format!("f = {f} outside (0, 1)")));
    }
    match kind {
        Syk2Kind::MeanEntropy => Ok(syk2_k(f) * LN_2 * r as f64),
        Syk2Kind::LogAntiflatness => {
            let z = 4.0 * f * (1.0 - f);
            let mut sum = KahanSum::default();
            for n in 1..100_000u32 {
                let nf = n as f64;
                let c = (0.5f64.powf(nf) - 0.5 * 0.75f64.powf(nf)) / nf;
                let term = c * hyp2f1_half(n, z);
                sum.add(term);
                if term.abs() < 1e-12 {
                    break;
                }
            }
            Ok(2.0 * r as f64 * (1.0 - f) * sum.value())
        }
    }
}

/// `|(s1 − reference) / reference|`.
pub fn relative_gap(s1: f64, reference: f64) -> Result<f64> {
    if reference == 0.0 {
        return Err(Error::Argument("relative gap against zero reference".into()));
    }
    Ok(((s1 - reference) / reference).abs())
}
