//! Pauli strings in symplectic form and their action on state vectors.
//!
//! A string is `i^phase * s_1 ⊗ ... ⊗ s_n` where `s_k` is read from bit `k-1`
//! of the two masks: (0,0)=I, (1,0)=X, (0,1)=Z, (1,1)=Y.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest supported register; masks are `u64`.
pub const MAX_QUBITS: usize = 64;

const I_POW: [Complex64; 4] = [
    Complex64::new(1.0, 0.0),
    Complex64::new(0.0, 1.0),
    Complex64::new(-1.0, 0.0),
    Complex64::new(0.0, -1.0),
];

/// `i^k` for any integer `k`.
#[inline]
pub fn i_pow(k: u32) -> Complex64 {
    I_POW[(k & 3) as usize]
}

#[inline]
fn mask_for(n: usize) -> u64 {
    if n >= 64 {
        u64::MAX
    } else {
        (1u64 << n) - 1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct PauliString {
    pub n_qubits: usize,
    pub x_mask: u64,
    pub z_mask: u64,
    pub phase_exp: u8,
}

impl PauliString {
    pub fn new(n_qubits: usize, x_mask: u64, z_mask: u64, phase_exp: u8) -> Result<Self> {
        if n_qubits == 0 || n_qubits > MAX_QUBITS {
            return Err(Error::Argument(format!("n_qubits must be in 1..={MAX_QUBITS}, got {n_qubits}")));
        }
        let m = mask_for(n_qubits);
        if x_mask & !m != 0 || z_mask & !m != 0 {
            return Err(Error::Argument(format!("masks exceed {n_qubits} qubits")));
        }
        Ok(Self { n_qubits, x_mask, z_mask, phase_exp: phase_exp & 3 })
    }

    pub fn identity(n_qubits: usize) -> Self {
        Self { n_qubits, x_mask: 0, z_mask: 0, phase_exp: 0 }
    }

    /// Single-qubit Pauli `op` ∈ {'I','X','Y','Z'} on 1-based qubit `k`.
    pub fn single(n_qubits: usize, k: usize, op: char) -> Result<Self> {
        if k == 0 || k > n_qubits {
            return Err(Error::Argument(format!("qubit {k} outside 1..={n_qubits}")));
        }
        let bit = 1u64 << (k - 1);
        let (x, z) = match op {
            'I' => (0, 0),
            'X' => (bit, 0),
            'Y' => (bit, bit),
            'Z' => (0, bit),
            _ => return Err(Error::Argument(format!("unknown Pauli letter {op:?}"))),
        };
        Self::new(n_qubits, x, z, 0)
    }

    pub fn is_identity(&self) -> bool {
        self.x_mask == 0 && self.z_mask == 0
    }

    /// Number of Y factors, i.e. `|x AND z|`.
    #[inline]
    pub fn y_count(&self) -> u32 {
        (self.x_mask & self.z_mask).count_ones()
    }

    /// Each letter is Hermitian, so the string is Hermitian iff `i^phase` is real.
    #[inline]
    pub fn is_hermitian(&self) -> bool {
        self.phase_exp & 1 == 0
    }

    pub fn weight(&self) -> u32 {
        (self.x_mask | self.z_mask).count_ones()
    }

    /// Prefactor relative to `X^x Z^z` written in that order.
    #[inline]
    fn xz_phase(&self) -> u32 {
        self.phase_exp as u32 + self.y_count()
    }

    /// True when the two strings commute.
    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x_mask & other.z_mask).count_ones() + (self.z_mask & other.x_mask).count_ones()) % 2 == 0
    }

    /// Same operator without the scalar prefactor.
    pub fn unsigned(&self) -> Self {
        Self { phase_exp: 0, ..*self }
    }

    /// `P|b⟩ = amplitude |b XOR x⟩`.
    #[inline]
    pub fn apply_to_basis(&self, basis_index: u64) -> (u64, Complex64) {
        let sign = 2 * ((self.z_mask & basis_index).count_ones() & 1);
        (basis_index ^ self.x_mask, i_pow(self.xz_phase() + sign))
    }

    /// `⟨ψ|P|ψ⟩` for Hermitian `P`.
    pub fn expectation(&self, psi: &StateVector) -> Result<f64> {
        if psi.n_qubits != self.n_qubits {
            return Err(Error::Dimension(format!(
                "string on {} qubits, state on {}",
                self.n_qubits, psi.n_qubits
            )));
        }
        if !self.is_hermitian() {
            return Err(Error::Contract(format!("expectation of non-Hermitian string {self}")));
        }
        Ok(self.expectation_unchecked(&psi.amplitudes))
    }

    pub(crate) fn expectation_unchecked(&self, amps: &[Complex64]) -> f64 {
        let mut even = Complex64::new(0.0, 0.0);
        let mut odd = Complex64::new(0.0, 0.0);
        for (b, a) in amps.iter().enumerate() {
            let t = amps[b ^ self.x_mask as usize].conj() * a;
            if (self.z_mask & b as u64).count_ones() & 1 == 0 {
                even += t;
            } else {
                odd += t;
            }
        }
        (i_pow(self.xz_phase()) * (even - odd)).re
    }

    /// Dense `2^n × 2^n` matrix, row-major. Intended for small registers.
    pub fn to_dense(&self) -> Vec<Vec<Complex64>> {
        let d = 1usize << self.n_qubits;
        let mut m = vec![vec![Complex64::new(0.0, 0.0); d]; d];
        for (c, col) in (0..d as u64).enumerate() {
            let (r, a) = self.apply_to_basis(col);
            m[r as usize][c] = a;
        }
        m
    }
}

/// `a · b` with the accumulated phase.
pub fn multiply(a: &PauliString, b: &PauliString) -> Result<PauliString> {
    if a.n_qubits != b.n_qubits {
        return Err(Error::Dimension(format!("{} vs {} qubits", a.n_qubits, b.n_qubits)));
    }
    Ok(mul(a, b))
}

#[inline]
pub(crate) fn mul(a: &PauliString, b: &PauliString) -> PauliString {
    let x = a.x_mask ^ b.x_mask;
    let z = a.z_mask ^ b.z_mask;
    let swap = 2 * (a.z_mask & b.x_mask).count_ones();
    let ph = a.xz_phase() + b.xz_phase() + swap + 4 * 64 - (x & z).count_ones();
    PauliString { n_qubits: a.n_qubits, x_mask: x, z_mask: z, phase_exp: (ph & 3) as u8 }
}

impl fmt::Display for PauliString {
    /// `+1 XZIY`: prefactor, then letters for qubit 1, 2, ...
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pre = ["+1", "+i", "-1", "-i"][self.phase_exp as usize & 3];
        write!(f, "{pre} ")?;
        for k in 0..self.n_qubits {
            let xb = self.x_mask >> k & 1;
            let zb = self.z_mask >> k & 1;
            let c = match (xb, zb) {
                (0, 0) => 'I',
                (1, 0) => 'X',
                (0, 1) => 'Z',
                _ => 'Y',
            };
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (pre, letters) = s
            .split_once(' ')
            .ok_or_else(|| Error::Argument(format!("expected '<phase> <letters>', got {s:?}")))?;
        let phase = match pre {
            "+1" | "1" => 0,
            "+i" | "i" => 1,
            "-1" => 2,
            "-i" => 3,
            _ => return Err(Error::Argument(format!("bad phase {pre:?}"))),
        };
        let letters = letters.trim();
        let n = letters.chars().count();
        let mut x = 0u64;
        let mut z = 0u64;
        for (k, c) in letters.chars().enumerate() {
            let p = PauliString::single(n, k + 1, c)?;
            x |= p.x_mask;
            z |= p.z_mask;
        }
        PauliString::new(n, x, z, phase)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub n_qubits: usize,
    pub amplitudes: Vec<Complex64>,
}

impl StateVector {
    pub const NORM_TOL: f64 = 1e-10;

    pub fn new(n_qubits: usize, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != 1usize << n_qubits {
            return Err(Error::Dimension(format!(
                "{} amplitudes for {} qubits",
                amplitudes.len(),
                n_qubits
            )));
        }
        let nrm = norm(&amplitudes);
        if (nrm - 1.0).abs() > Self::NORM_TOL {
            return Err(Error::Contract(format!("state norm {nrm} is not 1")));
        }
        Ok(Self { n_qubits, amplitudes })
    }

    /// Normalizes the input; a zero vector is rejected.
    pub fn normalized(n_qubits: usize, mut amplitudes: Vec<Complex64>) -> Result<Self> {
        let nrm = norm(&amplitudes);
        if nrm == 0.0 || !nrm.is_finite() {
            return Err(Error::Argument("cannot normalize a zero vector".into()));
        }
        amplitudes.iter_mut().for_each(|a| *a /= nrm);
        Self::new(n_qubits, amplitudes)
    }

    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let mut a = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        a[index] = Complex64::new(1.0, 0.0);
        Self { n_qubits, amplitudes: a }
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }

    /// Tensor product `self ⊗ other` with `self` on the low qubits.
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let mut a = Vec::with_capacity(self.dim() * other.dim());
        for hi in &other.amplitudes {
            for lo in &self.amplitudes {
                a.push(lo * hi);
            }
        }
        StateVector { n_qubits: self.n_qubits + other.n_qubits, amplitudes: a }
    }

    pub fn inner(&self, other: &StateVector) -> Complex64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }
}

pub(crate) fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

/// Real-weighted sum of Hermitian Pauli strings with merged duplicates.
///
/// Each stored string has `phase_exp = 0`; signs live in the coefficient.
/// Terms are kept sorted by `(x_mask, z_mask)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PauliSum {
    pub n_qubits: usize,
    pub terms: Vec<(f64, PauliString)>,
}

impl PauliSum {
    pub fn zero(n_qubits: usize) -> Self {
        Self { n_qubits, terms: Vec::new() }
    }

    pub fn new(n_qubits: usize, terms: impl IntoIterator<Item = (f64, PauliString)>) -> Result<Self> {
        Self::from_complex_terms(n_qubits, terms.into_iter().map(|(c, p)| (Complex64::new(c, 0.0), p)))
    }

    /// Absorbs each string's phase into its coefficient. The product must be a
    /// real multiple of a Hermitian string; a residual imaginary part above
    /// `1e-12` aborts construction.
    pub fn from_complex_terms(
        n_qubits: usize,
        terms: impl IntoIterator<Item = (Complex64, PauliString)>,
    ) -> Result<Self> {
        let mut acc: BTreeMap<(u64, u64), f64> = BTreeMap::new();
        for (c, p) in terms {
            if p.n_qubits != n_qubits {
                return Err(Error::Dimension(format!("term on {} qubits in a {n_qubits}-qubit sum", p.n_qubits)));
            }
            let v = c * i_pow(p.phase_exp as u32);
            if v.im.abs() > 1e-12 {
                return Err(Error::Contract(format!(
                    "non-Hermitian term {v} · {} (imaginary residual {:e})",
                    p.unsigned(),
                    v.im
                )));
            }
            *acc.entry((p.x_mask, p.z_mask)).or_insert(0.0) += v.re;
        }
        let terms = acc
            .into_iter()
            .filter(|(_, c)| *c != 0.0)
            .map(|((x, z), c)| (c, PauliString { n_qubits, x_mask: x, z_mask: z, phase_exp: 0 }))
            .collect();
        Ok(Self { n_qubits, terms })
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// `a·self + b·other`, merging duplicate strings.
    pub fn linear_combination(&self, a: f64, other: &PauliSum, b: f64) -> Result<PauliSum> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::Dimension(format!("{} vs {} qubits", self.n_qubits, other.n_qubits)));
        }
        let it = self
            .terms
            .iter()
            .map(|(c, p)| (a * c, *p))
            .chain(other.terms.iter().map(|(c, p)| (b * c, *p)));
        PauliSum::new(self.n_qubits, it)
    }

    /// True if every term commutes with `Z⊗...⊗Z`, i.e. has even X weight.
    pub fn conserves_parity(&self) -> bool {
        self.terms.iter().all(|(_, p)| p.x_mask.count_ones() % 2 == 0)
    }
}
