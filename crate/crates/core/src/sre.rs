//! Stabilizer Rényi entropy: exact Pauli enumeration, MPS compression and
//! perfect Pauli sampling.

use std::f64::consts::LN_2;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{i_pow, PauliString, StateVector};

pub const DEFAULT_EXACT_LIMIT: usize = 8;
pub const DEFAULT_CUTOFF: f64 = 1e-8;
pub const DEFAULT_SAMPLES: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SreMethod {
    Exact,
    Sampled,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SreEstimate {
    pub value: f64,
    pub std_error: f64,
    pub n_samples: usize,
    pub method: SreMethod,
    /// Set when the sample set cannot support an estimate.
    #[serde(default)]
    pub flagged: bool,
}

/// In-place Walsh–Hadamard transform: `out[z] = Σ_b v[b] (−1)^{z·b}`.
fn walsh_hadamard(v: &mut [Complex64]) {
    let mut h = 1;
    while h < v.len() {
        for i in (0..v.len()).step_by(2 * h) {
            for j in i..i + h {
                let (a, b) = (v[j], v[j + h]);
                v[j] = a + b;
                v[j + h] = a - b;
            }
        }
        h *= 2;
    }
}

/// All `4^n` expectation values, indexed by `(x_mask, z_mask)` as `x·2^n + z`.
/// For each X mask the Z masks are obtained at once by a Walsh–Hadamard transform.
pub fn pauli_spectrum(psi: &StateVector) -> Vec<f64> {
    let d = psi.dim();
    let a = &psi.amplitudes;
    let mut out = vec![0.0; d * d];
    let mut u = vec![Complex64::new(0.0, 0.0); d];
    for x in 0..d {
        for b in 0..d {
            u[b] = a[b ^ x].conj() * a[b];
        }
        walsh_hadamard(&mut u);
        for z in 0..d {
            out[x * d + z] = (i_pow((x & z).count_ones()) * u[z]).re;
        }
    }
    out
}

/// `M_α = log₂(d⁻¹ Σ_P |⟨P⟩|^{2α}) / (1 − α)`.
pub fn exact_sre(psi: &StateVector, alpha: f64) -> Result<SreEstimate> {
    exact_sre_with_limit(psi, alpha, DEFAULT_EXACT_LIMIT)
}

pub fn exact_sre_with_limit(psi: &StateVector, alpha: f64, limit: usize) -> Result<SreEstimate> {
    if psi.n_qubits > limit {
        return Err(Error::OverExactLimit { n: psi.n_qubits, limit });
    }
    if !(alpha > 0.0) || alpha == 1.0 {
        return Err(Error::Argument(format!("alpha = {alpha} must be positive and not 1")));
    }
    let d = psi.dim() as f64;
    let sum: f64 = pauli_spectrum(psi).iter().map(|e| (e * e).powf(alpha)).sum();
    let m = (sum / d).log2() / (1.0 - alpha);
    Ok(SreEstimate { value: m.max(0.0), std_error: 0.0, n_samples: 0, method: SreMethod::Exact, flagged: false })
}

/// MPS with site tensors `A[k][(l·2 + s)·χ_r + r]`, site `k` = qubit `k+1`.
#[derive(Clone, Debug)]
pub struct MpsState {
    pub n_qubits: usize,
    pub tensors: Vec<Vec<Complex64>>,
    /// `bond_dims[k]` is the left dimension of site `k`; length `n + 1`.
    pub bond_dims: Vec<usize>,
    pub truncation_cutoff: f64,
    /// All sites satisfy `Σ_s A^s A^s† = 1`.
    pub right_canonical: bool,
    /// `|⟨ψ_mps|ψ⟩|²` against the compressed input.
    pub fidelity: f64,
}

impl MpsState {
    pub fn max_bond(&self) -> usize {
        self.bond_dims.iter().copied().max().unwrap_or(1)
    }

    fn site(&self, k: usize) -> (usize, usize, &[Complex64]) {
        (self.bond_dims[k], self.bond_dims[k + 1], &self.tensors[k])
    }

    /// Dense amplitudes, qubit 1 as least significant bit.
    pub fn to_state(&self) -> Vec<Complex64> {
        // v[(b, r)] over processed sites b and right bond r.
        let mut v = vec![Complex64::new(1.0, 0.0)];
        let mut nb = 1usize;
        for k in 0..self.n_qubits {
            let (dl, dr, a) = self.site(k);
            let mut w = vec![Complex64::new(0.0, 0.0); nb * 2 * dr];
            for b in 0..nb {
                for l in 0..dl {
                    let c = v[b * dl + l];
                    if c == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    for s in 0..2 {
                        for r in 0..dr {
                            w[((s * nb) + b) * dr + r] += c * a[(l * 2 + s) * dr + r];
                        }
                    }
                }
            }
            v = w;
            nb *= 2;
        }
        v
    }

    pub fn norm_sqr(&self) -> f64 {
        let amps = self.to_state();
        amps.iter().map(|a| a.norm_sqr()).sum()
    }
}

/// Singular values kept so that the discarded weight stays within `cutoff`
/// of the total and the bond within `chi_max`.
fn kept_rank(s: &[f64], chi_max: usize, cutoff: f64) -> usize {
    let total: f64 = s.iter().map(|x| x * x).sum();
    let mut keep = s.len();
    let mut discarded = 0.0;
    while keep > 1 {
        let w = s[keep - 1] * s[keep - 1];
        if discarded + w > cutoff * total {
            break;
        }
        discarded += w;
        keep -= 1;
    }
    keep.min(chi_max.max(1))
}

/// SVD with singular values descending. Very wide or tall matrices are first
/// reduced by Householder QR; a direct SVD of a 2×2048 unfolding loses
/// small singular values to ~1e-4.
fn sorted_svd(m: DMatrix<Complex64>) -> (DMatrix<Complex64>, Vec<f64>, DMatrix<Complex64>) {
    let (r, c) = m.shape();
    let (u, vt, sv) = if c > r {
        // mᴴ = Q R, so m = Rᴴ Qᴴ.
        let qr = m.adjoint().qr();
        let (q, rr) = (qr.q(), qr.r());
        let svd = rr.adjoint().svd(true, true);
        (svd.u.unwrap(), svd.v_t.unwrap() * q.adjoint(), svd.singular_values)
    } else if r > c {
        let qr = m.qr();
        let (q, rr) = (qr.q(), qr.r());
        let svd = rr.svd(true, true);
        (q * svd.u.unwrap(), svd.v_t.unwrap(), svd.singular_values)
    } else {
        let svd = m.svd(true, true);
        (svd.u.unwrap(), svd.v_t.unwrap(), svd.singular_values)
    };
    let mut order: Vec<usize> = (0..sv.len()).collect();
    order.sort_by(|&a, &b| sv[b].total_cmp(&sv[a]));
    let s: Vec<f64> = order.iter().map(|&k| sv[k]).collect();
    let u2 = DMatrix::from_fn(u.nrows(), order.len(), |r, c| u[(r, order[c])]);
    let vt2 = DMatrix::from_fn(order.len(), vt.ncols(), |r, c| vt[(order[r], c)]);
    (u2, s, vt2)
}

/// Left-to-right SVD sweep with truncation, then a right-to-left sweep that
/// leaves every site right-canonical with the norm on site 1. A truncated
/// state is rescaled to unit norm.
pub fn mps_compress(psi: &StateVector, chi_max: usize, cutoff: f64) -> Result<MpsState> {
    if chi_max == 0 {
        return Err(Error::Argument("chi_max must be at least 1".into()));
    }
    let n = psi.n_qubits;
    let mut tensors = Vec::with_capacity(n);
    let mut bonds = vec![1usize];
    // rest[(l, b)] with b over the unprocessed qubits, lowest first.
    let mut rest = DMatrix::from_fn(1, psi.dim(), |_, b| psi.amplitudes[b]);
    for _ in 0..n - 1 {
        let dl = rest.nrows();
        let tail = rest.ncols() / 2;
        // Rows (l, s), columns remaining bits.
        let m = DMatrix::from_fn(dl * 2, tail, |row, c| rest[(row / 2, (c << 1) | (row % 2))]);
        let (u, s, vt) = sorted_svd(m);
        let keep = kept_rank(&s, chi_max, cutoff);
        let mut a = vec![Complex64::new(0.0, 0.0); dl * 2 * keep];
        for row in 0..dl * 2 {
            for r in 0..keep {
                a[row * keep + r] = u[(row, r)];
            }
        }
        tensors.push(a);
        bonds.push(keep);
        rest = DMatrix::from_fn(keep, tail, |r, c| vt[(r, c)] * s[r]);
    }
    let dl = rest.nrows();
    let mut last = vec![Complex64::new(0.0, 0.0); dl * 2];
    for l in 0..dl {
        for s in 0..2 {
            last[l * 2 + s] = rest[(l, s)];
        }
    }
    tensors.push(last);
    bonds.push(1);

    let mut mps = MpsState {
        n_qubits: n,
        tensors,
        bond_dims: bonds,
        truncation_cutoff: cutoff,
        right_canonical: false,
        fidelity: 0.0,
    };
    right_canonicalize(&mut mps);
    let nrm = mps.norm_sqr();
    if nrm > 0.0 {
        let f = 1.0 / nrm.sqrt();
        mps.tensors[0].iter_mut().for_each(|a| *a *= f);
    }
    let v = mps.to_state();
    let nv: f64 = v.iter().map(|a| a.norm_sqr()).sum();
    let ov: Complex64 = v.iter().zip(&psi.amplitudes).map(|(a, b)| a.conj() * b).sum();
    mps.fidelity = if nv > 0.0 { ov.norm_sqr() / nv } else { 0.0 };
    Ok(mps)
}

fn right_canonicalize(mps: &mut MpsState) {
    for k in (1..mps.n_qubits).rev() {
        let (dl, dr) = (mps.bond_dims[k], mps.bond_dims[k + 1]);
        let a = &mps.tensors[k];
        let m = DMatrix::from_fn(dl, 2 * dr, |l, c| a[(l * 2 + c / dr) * dr + c % dr]);
        let (u, s, vt) = sorted_svd(m);
        let keep = s.iter().filter(|&&x| x > 1e-14 * s[0].max(1e-300)).count().max(1);
        let mut b = vec![Complex64::new(0.0, 0.0); keep * 2 * dr];
        for r in 0..keep {
            for c in 0..2 * dr {
                b[(r * 2 + c / dr) * dr + c % dr] = vt[(r, c)];
            }
        }
        mps.tensors[k] = b;
        // Absorb U·S into the left neighbour.
        let us = DMatrix::from_fn(dl, keep, |l, r| u[(l, r)] * s[r]);
        let pdl = mps.bond_dims[k - 1];
        let prev = &mps.tensors[k - 1];
        let mut np = vec![Complex64::new(0.0, 0.0); pdl * 2 * keep];
        for row in 0..pdl * 2 {
            for r in 0..keep {
                let mut acc = Complex64::new(0.0, 0.0);
                for l in 0..dl {
                    acc += prev[row * dl + l] * us[(l, r)];
                }
                np[row * keep + r] = acc;
            }
        }
        mps.tensors[k - 1] = np;
        mps.bond_dims[k] = keep;
    }
    mps.right_canonical = true;
}

/// Single-qubit Paulis in (x, z) order I, X, Y, Z as 2×2 matrices `σ[s'][s]`.
fn pauli_matrices() -> [[[Complex64; 2]; 2]; 4] {
    let o = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    [[[one, o], [o, one]], [[o, one], [one, o]], [[o, -i], [i, o]], [[one, o], [o, -one]]]
}

const LETTER_MASKS: [(u64, u64); 4] = [(0, 0), (1, 0), (1, 1), (0, 1)];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PauliSample {
    pub string: PauliString,
    pub expectation: f64,
    /// `Ξ_P = ⟨P⟩² / 2^n`.
    pub probability: f64,
}

/// Draws strings from `Ξ_P = ⟨P⟩²/d` one qubit at a time. With a
/// right-canonical MPS the marginal of the next letter is the Frobenius norm
/// of the left environment after that letter.
pub fn perfect_pauli_sample(mps: &MpsState, n_samples: usize, seed: u64) -> Result<Vec<PauliSample>> {
    if !mps.right_canonical {
        return Err(Error::Contract("MPS is not right-canonical".into()));
    }
    let nrm = mps.norm_sqr();
    if (nrm - 1.0).abs() > 1e-8 {
        return Err(Error::Contract(format!("MPS norm² = {nrm}, expected 1")));
    }
    let sig = pauli_matrices();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = mps.n_qubits;
    let mut out = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let mut env = DMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        let (mut xm, mut zm) = (0u64, 0u64);
        let mut prob = 1.0;
        for k in 0..n {
            let (dl, dr, a) = mps.site(k);
            let mats: Vec<DMatrix<Complex64>> = (0..2)
                .map(|s| DMatrix::from_fn(dl, dr, |l, r| a[(l * 2 + s) * dr + r]))
                .collect();
            // T[s][s'] = A^sᵀ · env · conj(A^s').
            let mut t = Vec::with_capacity(4);
            for s in 0..2 {
                for sp in 0..2 {
                    t.push(mats[s].transpose() * &env * mats[sp].map(|c| c.conj()));
                }
            }
            let cands: Vec<DMatrix<Complex64>> = sig
                .iter()
                .map(|m| {
                    let mut acc = DMatrix::zeros(dr, dr);
                    for s in 0..2 {
                        for sp in 0..2 {
                            if m[sp][s] != Complex64::new(0.0, 0.0) {
                                acc += &t[s * 2 + sp] * m[sp][s];
                            }
                        }
                    }
                    acc
                })
                .collect();
            let w: Vec<f64> = cands.iter().map(|c| c.norm_squared()).collect();
            let total: f64 = w.iter().sum();
            let mut u = rng.random::<f64>() * total;
            let mut pick = 3;
            for (j, wj) in w.iter().enumerate() {
                if u < *wj {
                    pick = j;
                    break;
                }
                u -= wj;
            }
            while w[pick] == 0.0 && pick > 0 {
                pick -= 1;
            }
            prob *= w[pick] / total;
            let (xb, zb) = LETTER_MASKS[pick];
            xm |= xb << k;
            zm |= zb << k;
            env = cands[pick].clone();
        }
        let e = env[(0, 0)].re;
        out.push(PauliSample { string: PauliString { n_qubits: n, x_mask: xm, z_mask: zm, phase_exp: 0 }, expectation: e, probability: prob });
    }
    Ok(out)
}

/// `M₂ ≈ −log₂(mean ⟨P⟩²)` over perfect samples, with a delta-method error.
pub fn sampled_sre2(mps: &MpsState, n_samples: usize, seed: u64) -> Result<SreEstimate> {
    let samples = perfect_pauli_sample(mps, n_samples, seed)?;
    Ok(estimate_from_samples(&samples))
}

pub fn estimate_from_samples(samples: &[PauliSample]) -> SreEstimate {
    let n = samples.len();
    let vals: Vec<f64> = samples.iter().map(|s| s.expectation * s.expectation).collect();
    let mean = vals.iter().sum::<f64>() / n.max(1) as f64;
    if n < 2 || !(mean > 0.0) {
        return SreEstimate { value: f64::NAN, std_error: f64::NAN, n_samples: n, method: SreMethod::Sampled, flagged: true };
    }
    let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let se_mean = (var / n as f64).sqrt();
    let value = if (mean - 1.0).abs() < 1e-12 { 0.0 } else { -mean.log2() };
    SreEstimate { value, std_error: se_mean / (mean * LN_2), n_samples: n, method: SreMethod::Sampled, flagged: false }
}

/// `|G⟩^{⊗n}` with `|G⟩⟨G| = (I + (X+Y+Z)/√3)/2`.
pub fn golden_state(n_qubits: usize) -> StateVector {
    let c = 1.0 / 3f64.sqrt();
    // Bloch vector (c, c, c): |G⟩ = (cos θ/2, e^{iφ} sin θ/2), cos θ = c, φ = π/4.
    let theta = c.acos();
    let phi = std::f64::consts::FRAC_PI_4;
    let one = StateVector {
        n_qubits: 1,
        amplitudes: vec![
            Complex64::new((theta / 2.0).cos(), 0.0),
            Complex64::from_polar((theta / 2.0).sin(), phi),
        ],
    };
    let mut s = one.clone();
    for _ in 1..n_qubits {
        s = s.tensor(&one);
    }
    s
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SreReference {
    Haar,
    Golden,
    GsFit,
    MsFit,
}

impl std::str::FromStr for SreReference {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "haar" => Ok(SreReference::Haar),
            "golden" => Ok(SreReference::Golden),
            "gs_fit" => Ok(SreReference::GsFit),
            "ms_fit" => Ok(SreReference::MsFit),
            _ => Err(Error::Argument(format!("unknown SRE reference {s:?}"))),
        }
    }
}

/// Reference `M₂` for `n` qubits (`n = N/2`).
pub fn sre_reference(kind: SreReference, n_qubits: usize) -> f64 {
    let n = n_qubits as f64;
    match kind {
        SreReference::Haar => n - 2.0,
        SreReference::Golden => n * 1.5f64.log2(),
        SreReference::GsFit => -2.4 + 0.95 * n,
        SreReference::MsFit => -2.6 + 0.96 * n,
    }
}

/// `log₂((d+3)/4)`: the finite-`d` Haar value that tends to `n − 2`.
pub fn haar_sre2_finite(n_qubits: usize) -> f64 {
    (((1u64 << n_qubits) as f64 + 3.0) / 4.0).log2()
}
