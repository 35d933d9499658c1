//! Majorana operators, disorder sampling and SYK Hamiltonians.

use std::io::{Read, Write};

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::{i_pow, mul, PauliString, PauliSum};

/// `χ_i` on `N/2` qubits: `χ_{2k-1} = Z..Z X_k`, `χ_{2k} = Z..Z Y_k`, so `χ_i² = 1`.
pub fn jordan_wigner(i: usize, n_majorana: usize) -> Result<PauliString> {
    if n_majorana == 0 || n_majorana % 2 != 0 {
        return Err(Error::Argument(format!("N must be even and positive, got {n_majorana}")));
    }
    if i == 0 || i > n_majorana {
        return Err(Error::Argument(format!("Majorana index {i} outside 1..={n_majorana}")));
    }
    let k = (i + 1) / 2;
    let tail = (1u64 << (k - 1)) - 1;
    let bit = 1u64 << (k - 1);
    let z = if i % 2 == 1 { tail } else { tail | bit };
    PauliString::new(n_majorana / 2, bit, z, 0)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisorderSpec {
    pub n_majorana: usize,
    pub q: usize,
    pub coupling_scale: f64,
    pub seed: u64,
}

impl DisorderSpec {
    pub fn new(n_majorana: usize, q: usize, coupling_scale: f64, seed: u64) -> Result<Self> {
        let s = Self { n_majorana, q, coupling_scale, seed };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_majorana == 0 || self.n_majorana % 2 != 0 {
            return Err(Error::Argument(format!("N must be even and positive, got {}", self.n_majorana)));
        }
        if self.q != 2 && self.q != 4 {
            return Err(Error::Unsupported(format!("q = {} (only 2 and 4)", self.q)));
        }
        if self.n_majorana < self.q {
            return Err(Error::Argument(format!("N = {} smaller than q = {}", self.n_majorana, self.q)));
        }
        if self.n_majorana > 2 * crate::pauli::MAX_QUBITS {
            return Err(Error::Argument(format!("N = {} too large", self.n_majorana)));
        }
        if !(self.coupling_scale > 0.0 && self.coupling_scale.is_finite()) {
            return Err(Error::Argument(format!("J must be positive, got {}", self.coupling_scale)));
        }
        Ok(())
    }

    /// `(q-1)! J / N^(q-1)`.
    pub fn variance(&self) -> f64 {
        let fact: f64 = (1..self.q).map(|k| k as f64).product();
        fact * self.coupling_scale / (self.n_majorana as f64).powi(self.q as i32 - 1)
    }
}

/// Coupling of the tuple `(i_1 < ... < i_q)` (1-based), a pure function of
/// `(seed, q, tuple)`. The seed keys a ChaCha stream; the tuple picks the
/// stream id, so values do not depend on enumeration order.
pub fn coupling_value(seed: u64, q: usize, tuple: &[usize], variance: f64) -> f64 {
    let mut stream = q as u64;
    for &i in tuple {
        stream = (stream << 8) | i as u64;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let z: f64 = StandardNormal.sample(&mut rng);
    z * variance.sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CouplingTensor {
    pub spec: DisorderSpec,
    /// Strictly increasing 1-based tuples in lexicographic order.
    pub values: Vec<(Vec<usize>, f64)>,
}

/// Lexicographic `q`-subsets of `1..=n`.
pub fn index_tuples(n: usize, q: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur: Vec<usize> = (1..=q).collect();
    if q == 0 || q > n {
        return out;
    }
    loop {
        out.push(cur.clone());
        let mut k = q;
        while k > 0 && cur[k - 1] == n - q + k {
            k -= 1;
        }
        if k == 0 {
            return out;
        }
        cur[k - 1] += 1;
        for j in k..q {
            cur[j] = cur[j - 1] + 1;
        }
    }
}

pub fn sample_couplings(spec: &DisorderSpec) -> Result<CouplingTensor> {
    spec.validate()?;
    let var = spec.variance();
    let values = index_tuples(spec.n_majorana, spec.q)
        .into_par_iter()
        .map(|t| {
            let v = coupling_value(spec.seed, spec.q, &t, var);
            (t, v)
        })
        .collect();
    Ok(CouplingTensor { spec: *spec, values })
}

/// `q=2`: `i Σ J_ij χ_i χ_j`; `q=4`: `-Σ J_ijkl χ_i χ_j χ_k χ_l`.
pub fn build_syk(couplings: &CouplingTensor) -> Result<PauliSum> {
    let spec = &couplings.spec;
    spec.validate()?;
    let n = spec.n_majorana;
    let chis: Vec<PauliString> = (1..=n).map(|i| jordan_wigner(i, n)).collect::<Result<_>>()?;
    let pre = match spec.q {
        2 => i_pow(1),
        4 => i_pow(2),
        q => return Err(Error::Unsupported(format!("q = {q}"))),
    };
    let mut terms = Vec::with_capacity(couplings.values.len());
    for (t, j) in &couplings.values {
        if t.len() != spec.q {
            return Err(Error::Argument(format!("tuple {t:?} has wrong arity for q = {}", spec.q)));
        }
        let mut p = chis[t[0] - 1];
        for &i in &t[1..] {
            p = mul(&p, &chis[i - 1]);
        }
        terms.push((pre * *j, p));
    }
    PauliSum::from_complex_terms(n / 2, terms)
}

/// `(1-g)·h4 + g·h2`.
pub fn build_interpolated(h4: &PauliSum, h2: &PauliSum, g: f64) -> Result<PauliSum> {
    if !(0.0..=1.0).contains(&g) {
        return Err(Error::Argument(format!("g = {g} outside [0, 1]")));
    }
    if g == 0.0 {
        return Ok(h4.clone());
    }
    if g == 1.0 {
        return Ok(h2.clone());
    }
    h4.linear_combination(1.0 - g, h2, g)
}

/// Hermitian matrix in compressed-row form.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseHamiltonian {
    pub dim: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<Complex64>,
}

/// Default assembly cap.
pub const DEFAULT_MEMORY_CAP: u64 = 4 << 30;

/// Upper bound on the bytes taken by [`assemble_sparse`] for `h`.
pub fn estimate_sparse_bytes(h: &PauliSum) -> u64 {
    let mut xs: Vec<u64> = h.terms.iter().map(|(_, p)| p.x_mask).collect();
    xs.sort_unstable();
    xs.dedup();
    let dim = 1u64 << h.n_qubits;
    let per_entry = (std::mem::size_of::<usize>() + std::mem::size_of::<Complex64>()) as u64;
    dim * xs.len().max(1) as u64 * per_entry + (dim + 1) * std::mem::size_of::<usize>() as u64
}

pub fn assemble_sparse(h: &PauliSum) -> Result<SparseHamiltonian> {
    assemble_sparse_with_cap(h, DEFAULT_MEMORY_CAP)
}

/// Terms sharing an X mask land on the same column, so each row holds one
/// entry per distinct X mask.
pub fn assemble_sparse_with_cap(h: &PauliSum, cap_bytes: u64) -> Result<SparseHamiltonian> {
    if h.n_qubits >= usize::BITS as usize - 1 {
        return Err(Error::Resource { required_bytes: u64::MAX, cap_bytes });
    }
    let need = estimate_sparse_bytes(h);
    if need > cap_bytes {
        return Err(Error::Resource { required_bytes: need, cap_bytes });
    }
    for (_, p) in &h.terms {
        if !p.is_hermitian() {
            return Err(Error::Contract(format!("non-Hermitian term {p}")));
        }
    }
    let dim = 1usize << h.n_qubits;
    let mut groups: Vec<(u64, Vec<(u64, Complex64)>)> = Vec::new();
    let mut sorted: Vec<&(f64, PauliString)> = h.terms.iter().collect();
    sorted.sort_by_key(|(_, p)| (p.x_mask, p.z_mask));
    for (c, p) in sorted {
        let amp = *c * i_pow(p.phase_exp as u32 + p.y_count());
        match groups.last_mut() {
            Some((x, v)) if *x == p.x_mask => v.push((p.z_mask, amp)),
            _ => groups.push((p.x_mask, vec![(p.z_mask, amp)])),
        }
    }
    let rows: Vec<Vec<(usize, Complex64)>> = (0..dim)
        .into_par_iter()
        .map(|r| {
            let mut row: Vec<(usize, Complex64)> = groups
                .iter()
                .filter_map(|(x, zs)| {
                    let mut v = Complex64::new(0.0, 0.0);
                    // Row r receives P|c⟩ with c = r ^ x; the sign reads bits of c.
                    let c = r as u64 ^ x;
                    for (z, a) in zs {
                        if (z & c).count_ones() & 1 == 0 {
                            v += a;
                        } else {
                            v -= a;
                        }
                    }
                    (v != Complex64::new(0.0, 0.0)).then_some((c as usize, v))
                })
                .collect();
            row.sort_unstable_by_key(|e| e.0);
            row
        })
        .collect();
    let mut row_ptr = Vec::with_capacity(dim + 1);
    let nnz: usize = rows.iter().map(Vec::len).sum();
    let mut col_idx = Vec::with_capacity(nnz);
    let mut values = Vec::with_capacity(nnz);
    row_ptr.push(0);
    for row in rows {
        for (c, v) in row {
            col_idx.push(c);
            values.push(v);
        }
        row_ptr.push(col_idx.len());
    }
    Ok(SparseHamiltonian { dim, row_ptr, col_idx, values })
}

impl SparseHamiltonian {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn n_qubits(&self) -> usize {
        self.dim.trailing_zeros() as usize
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        self.col_idx[a..b].iter().copied().zip(self.values[a..b].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        let (a, b) = (self.row_ptr[r], self.row_ptr[r + 1]);
        match self.col_idx[a..b].binary_search(&c) {
            Ok(k) => self.values[a + k],
            Err(_) => Complex64::new(0.0, 0.0),
        }
    }

    /// `y = H x`.
    pub fn matvec(&self, x: &[Complex64], y: &mut [Complex64]) {
        let work = |(r, yr): (usize, &mut Complex64)| {
            let mut s = Complex64::new(0.0, 0.0);
            for (c, v) in self.row(r) {
                s += v * x[c];
            }
            *yr = s;
        };
        if self.dim >= 4096 {
            y.par_iter_mut().enumerate().for_each(work);
        } else {
            y.iter_mut().enumerate().for_each(work);
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|r| self.get(r, r).re).sum()
    }

    /// Largest deviation from `H = H†`.
    pub fn hermiticity_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r).conj()).norm());
            }
        }
        worst
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_error() <= 1e-12
    }

    /// Commutes with `Z⊗...⊗Z`: no entry links basis states of different popcount parity.
    pub fn conserves_parity(&self) -> bool {
        (0..self.dim).all(|r| self.row(r).all(|(c, _)| (r ^ c).count_ones() % 2 == 0))
    }

    /// Row-sum bound on the spectral norm.
    pub fn norm_bound(&self) -> f64 {
        (0..self.dim).map(|r| self.row(r).map(|(_, v)| v.norm()).sum::<f64>()).fold(0.0, f64::max)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<Complex64> {
        let mut m = nalgebra::DMatrix::zeros(self.dim, self.dim);
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                m[(r, c)] = v;
            }
        }
        m
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, Complex64)> + '_ {
        (0..self.dim).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn from_triplets(dim: usize, mut t: Vec<(usize, usize, Complex64)>) -> Result<Self> {
        if t.iter().any(|&(r, c, _)| r >= dim || c >= dim) {
            return Err(Error::Argument("triplet index out of range".into()));
        }
        t.sort_by_key(|&(r, c, _)| (r, c));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx = Vec::with_capacity(t.len());
        let mut values: Vec<Complex64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            last = Some((r, c));
            col_idx.push(c);
            values.push(v);
            row_ptr[r + 1] += 1;
        }
        for r in 0..dim {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self { dim, row_ptr, col_idx, values })
    }
}

/// Header of a Hamiltonian dump. `q = 0` marks an interpolated `H(g)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DumpHeader {
    pub seed: u64,
    pub n_majorana: u32,
    pub q: u32,
    pub g: f64,
}

pub const DUMP_MAGIC: &[u8; 8] = b"SYKHAM01";

/// Binary dump, all integers and floats little-endian:
///
/// ```text
/// offset  size  field
/// 0       8     magic "SYKHAM01"
/// 8       8     seed (u64)
/// 16      4     N, Majorana count (u32)
/// 20      4     q (u32; 0 for an interpolated Hamiltonian)
/// 24      8     g (f64)
/// 32      8     dim (u64)
/// 40      8     nnz (u64)
/// 48      32*k  triplets: row (u64), col (u64), re (f64), im (f64)
/// ```
pub fn write_dump<W: Write>(mut w: W, header: &DumpHeader, h: &SparseHamiltonian) -> std::io::Result<()> {
    w.write_all(DUMP_MAGIC)?;
    w.write_all(&header.seed.to_le_bytes())?;
    w.write_all(&header.n_majorana.to_le_bytes())?;
    w.write_all(&header.q.to_le_bytes())?;
    w.write_all(&header.g.to_le_bytes())?;
    w.write_all(&(h.dim as u64).to_le_bytes())?;
    w.write_all(&(h.nnz() as u64).to_le_bytes())?;
    for (r, c, v) in h.triplets() {
        w.write_all(&(r as u64).to_le_bytes())?;
        w.write_all(&(c as u64).to_le_bytes())?;
        w.write_all(&v.re.to_le_bytes())?;
        w.write_all(&v.im.to_le_bytes())?;
    }
    w.flush()
}

pub fn read_dump<R: Read>(mut r: R) -> Result<(DumpHeader, SparseHamiltonian)> {
    fn take<R: Read, const K: usize>(r: &mut R) -> Result<[u8; K]> {
        let mut b = [0u8; K];
        r.read_exact(&mut b).map_err(|e| Error::io("<dump>", e))?;
        Ok(b)
    }
    let magic: [u8; 8] = take(&mut r)?;
    if &magic != DUMP_MAGIC {
        return Err(Error::Argument("not a Hamiltonian dump".into()));
    }
    let seed = u64::from_le_bytes(take(&mut r)?);
    let n_majorana = u32::from_le_bytes(take(&mut r)?);
    let q = u32::from_le_bytes(take(&mut r)?);
    let g = f64::from_le_bytes(take(&mut r)?);
    let dim = u64::from_le_bytes(take(&mut r)?) as usize;
    let nnz = u64::from_le_bytes(take(&mut r)?) as usize;
    let mut t = Vec::with_capacity(nnz);
    for _ in 0..nnz {
        let row = u64::from_le_bytes(take(&mut r)?) as usize;
        let col = u64::from_le_bytes(take(&mut r)?) as usize;
        let re = f64::from_le_bytes(take(&mut r)?);
        let im = f64::from_le_bytes(take(&mut r)?);
        t.push((row, col, Complex64::new(re, im)));
    }
    let h = SparseHamiltonian::from_triplets(dim, t)?;
    Ok((DumpHeader { seed, n_majorana, q, g }, h))
}

/// The pair of disorder realizations behind one `H(g)` sweep.
#[derive(Clone, Debug)]
pub struct Realization {
    pub n_majorana: usize,
    pub seed: u64,
    pub h4: PauliSum,
    pub h2: PauliSum,
}

impl Realization {
    /// SYK-4 and SYK-2 couplings from one seed with `J = 1`.
    pub fn sample(n_majorana: usize, seed: u64) -> Result<Self> {
        let h4 = build_syk(&sample_couplings(&DisorderSpec::new(n_majorana, 4, 1.0, seed)?)?)?;
        let h2 = build_syk(&sample_couplings(&DisorderSpec::new(n_majorana, 2, 1.0, seed)?)?)?;
        Ok(Self { n_majorana, seed, h4, h2 })
    }

    pub fn hamiltonian(&self, g: f64) -> Result<SparseHamiltonian> {
        assemble_sparse(&build_interpolated(&self.h4, &self.h2, g)?)
    }
}
