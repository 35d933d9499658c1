//! Dense and Krylov eigensolvers, eigenstate selection, gaps and density of states.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ess::HistogramPDF;
use crate::pauli::{norm, StateVector};
use crate::syk::SparseHamiltonian;

/// Largest dimension accepted by the dense path.
pub const DEFAULT_DENSE_LIMIT: usize = 1 << 13;
/// Ground states above this dimension use Lanczos.
pub const DEFAULT_ITERATIVE_ABOVE: usize = 1 << 8;
/// Levels closer than this are one degenerate level.
pub const DEGENERACY_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SpectrumMeta {
    pub seed: u64,
    pub n_majorana: usize,
    pub g: f64,
}

#[derive(Clone, Debug)]
pub struct Spectrum {
    /// Ascending.
    pub eigenvalues: Vec<f64>,
    /// Column `k` belongs to `eigenvalues[k]`.
    pub eigenvectors: Option<DMatrix<Complex64>>,
    /// Fermion parity (popcount mod 2) of each eigenvector, when the solver
    /// split the matrix into parity blocks.
    pub parity: Option<Vec<u8>>,
    pub meta: SpectrumMeta,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateKind {
    Ground,
    Middle,
}

impl StateKind {
    pub fn name(self) -> &'static str {
        match self {
            StateKind::Ground => "gs",
            StateKind::Middle => "ms",
        }
    }
}

impl std::str::FromStr for StateKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gs" | "ground" => Ok(StateKind::Ground),
            "ms" | "middle" => Ok(StateKind::Middle),
            _ => Err(Error::Argument(format!("unknown state kind {s:?}"))),
        }
    }
}

/// Ascending eigenvalues (and optionally eigenvectors) of a dense Hermitian matrix.
pub fn hermitian_eigen(m: DMatrix<Complex64>, want_vectors: bool) -> (Vec<f64>, Option<DMatrix<Complex64>>) {
    let n = m.nrows();
    if n == 0 {
        return (vec![], want_vectors.then(|| DMatrix::zeros(0, 0)));
    }
    if !want_vectors {
        let mut w: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
        w.sort_by(f64::total_cmp);
        return (w, None);
    }
    let e = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| e.eigenvalues[a].total_cmp(&e.eigenvalues[b]));
    let w = order.iter().map(|&k| e.eigenvalues[k]).collect();
    let v = DMatrix::from_fn(n, n, |r, c| e.eigenvectors[(r, order[c])]);
    (w, Some(v))
}

fn parity_indices(dim: usize) -> [Vec<usize>; 2] {
    let mut out = [Vec::with_capacity(dim / 2), Vec::with_capacity(dim / 2)];
    for b in 0..dim {
        out[b.count_ones() as usize % 2].push(b);
    }
    out
}

/// Complete eigensystem. Parity-conserving matrices are solved block by block
/// and each level is tagged with its sector.
pub fn full_spectrum(h: &SparseHamiltonian, want_vectors: bool) -> Result<Spectrum> {
    full_spectrum_with_limit(h, want_vectors, DEFAULT_DENSE_LIMIT)
}

pub fn full_spectrum_with_limit(h: &SparseHamiltonian, want_vectors: bool, dense_limit: usize) -> Result<Spectrum> {
    if h.dim > dense_limit {
        return Err(Error::OverDenseLimit { dim: h.dim, limit: dense_limit });
    }
    if h.dim < 4 || !h.conserves_parity() {
        let (w, v) = hermitian_eigen(h.to_dense(), want_vectors);
        return Ok(Spectrum { eigenvalues: w, eigenvectors: v, parity: None, meta: SpectrumMeta::default() });
    }
    let blocks = parity_indices(h.dim);
    let mut levels: Vec<(f64, u8, usize, usize)> = Vec::with_capacity(h.dim);
    let mut vecs = Vec::with_capacity(2);
    for (p, idx) in blocks.iter().enumerate() {
        let (w, v) = hermitian_eigen(dense_block(h, idx), want_vectors);
        levels.extend(w.iter().enumerate().map(|(k, &e)| (e, p as u8, p, k)));
        vecs.push(v);
    }
    levels.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let eigenvectors = want_vectors.then(|| {
        let mut full = DMatrix::zeros(h.dim, h.dim);
        for (col, &(_, _, p, k)) in levels.iter().enumerate() {
            let v = vecs[p].as_ref().unwrap();
            for (i, &b) in blocks[p].iter().enumerate() {
                full[(b, col)] = v[(i, k)];
            }
        }
        full
    });
    Ok(Spectrum {
        eigenvalues: levels.iter().map(|l| l.0).collect(),
        eigenvectors,
        parity: Some(levels.iter().map(|l| l.1).collect()),
        meta: SpectrumMeta::default(),
    })
}

fn dense_block(h: &SparseHamiltonian, idx: &[usize]) -> DMatrix<Complex64> {
    let mut pos = vec![usize::MAX; h.dim];
    for (i, &b) in idx.iter().enumerate() {
        pos[b] = i;
    }
    let mut m = DMatrix::zeros(idx.len(), idx.len());
    for (i, &r) in idx.iter().enumerate() {
        for (c, v) in h.row(r) {
            let j = pos[c];
            if j != usize::MAX {
                m[(i, j)] = v;
            }
        }
    }
    m
}

impl Spectrum {
    pub fn with_meta(mut self, meta: SpectrumMeta) -> Self {
        self.meta = meta;
        self
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    pub fn state(&self, k: usize) -> Result<StateVector> {
        let v = self
            .eigenvectors
            .as_ref()
            .ok_or_else(|| Error::Contract("spectrum was computed without eigenvectors".into()))?;
        let amps: Vec<Complex64> = v.column(k).iter().copied().collect();
        StateVector::normalized(v.nrows().trailing_zeros() as usize, amps)
    }

    /// Levels split by parity sector, or the whole spectrum as one sector.
    pub fn sectors(&self) -> Vec<Vec<f64>> {
        match &self.parity {
            None => vec![self.eigenvalues.clone()],
            Some(p) => (0..2u8)
                .map(|s| self.eigenvalues.iter().zip(p).filter(|(_, &q)| q == s).map(|(e, _)| *e).collect())
                .collect(),
        }
    }

    /// Largest `‖Hv − λv‖` over the stored eigenpairs.
    pub fn max_residual(&self, h: &SparseHamiltonian) -> Result<f64> {
        let v = self.eigenvectors.as_ref().ok_or_else(|| Error::Contract("no eigenvectors".into()))?;
        let mut y = vec![Complex64::new(0.0, 0.0); h.dim];
        let mut worst = 0.0f64;
        for (k, &e) in self.eigenvalues.iter().enumerate() {
            let x: Vec<Complex64> = v.column(k).iter().copied().collect();
            h.matvec(&x, &mut y);
            let r = y.iter().zip(&x).map(|(a, b)| (a - b * e).norm_sqr()).sum::<f64>().sqrt();
            worst = worst.max(r);
        }
        Ok(worst)
    }
}

/// Index of the selected eigenstate: 0 for ground, closest energy to zero
/// (lower index on ties) for middle.
pub fn select_index(s: &Spectrum, kind: StateKind) -> Result<usize> {
    if s.is_empty() {
        return Err(Error::Contract("empty spectrum".into()));
    }
    Ok(match kind {
        StateKind::Ground => 0,
        StateKind::Middle => {
            let mut best = 0;
            for (k, e) in s.eigenvalues.iter().enumerate() {
                if e.abs() < s.eigenvalues[best].abs() {
                    best = k;
                }
            }
            best
        }
    })
}

pub fn select_eigenstate(s: &Spectrum, kind: StateKind) -> Result<StateVector> {
    if s.eigenvectors.is_none() {
        return Err(Error::Contract("spectrum was computed without eigenvectors".into()));
    }
    s.state(select_index(s, kind)?)
}

/// Merges levels closer than `tol` (chained).
pub fn distinct_levels(eigenvalues: &[f64], tol: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    let mut last = f64::NEG_INFINITY;
    for &e in eigenvalues {
        if e - last > tol {
            out.push(e);
        }
        last = e;
    }
    out
}

/// `E_1 − E_0` between distinct levels.
pub fn spectral_gap(s: &Spectrum) -> Result<f64> {
    if s.len() < 2 {
        return Err(Error::Contract(format!("gap needs 2 levels, got {}", s.len())));
    }
    let d = distinct_levels(&s.eigenvalues, DEGENERACY_TOL);
    if d.len() < 2 {
        return Ok(0.0);
    }
    Ok(d[1] - d[0])
}

/// Every second eigenvalue of each spectrum, pooled.
pub fn stripped_levels(spectra: &[Spectrum]) -> Vec<f64> {
    spectra.iter().flat_map(|s| s.eigenvalues.iter().step_by(2).copied()).collect()
}

/// Normalized histogram of the stripped levels over their full support.
pub fn dos_histogram(spectra: &[Spectrum], bins: usize) -> Result<HistogramPDF> {
    let v = stripped_levels(spectra);
    if v.is_empty() {
        return Err(Error::Argument("no spectra".into()));
    }
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        hi = lo + 1e-12_f64.max(lo.abs() * 1e-12);
    }
    HistogramPDF::from_samples(&v, bins, lo, hi)
}

pub fn excess_kurtosis(v: &[f64]) -> f64 {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let m2 = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / n;
    let m4 = v.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    m4 / (m2 * m2) - 3.0
}

fn random_vector(dim: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
    (0..dim)
        .map(|_| {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            Complex64::new(re, im)
        })
        .collect()
}

fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn axpy(alpha: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    y.iter_mut().zip(x).for_each(|(yi, xi)| *yi += alpha * xi);
}

fn project_out(v: &mut [Complex64], basis: &[Vec<Complex64>]) {
    for _ in 0..2 {
        for b in basis {
            let c = dot(b, v);
            axpy(-c, b, v);
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct LanczosOptions {
    pub tol: f64,
    pub krylov_dim: usize,
    pub max_restarts: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self { tol: 1e-10, krylov_dim: 120, max_restarts: 60 }
    }
}

/// Lowest eigenpair of `h` restricted to the complement of `deflate`
/// (orthonormal vectors), by restarted Lanczos with full reorthogonalization.
pub fn lanczos_lowest(
    h: &SparseHamiltonian,
    start: Vec<Complex64>,
    deflate: &[Vec<Complex64>],
    opts: LanczosOptions,
) -> Result<(f64, Vec<Complex64>)> {
    let dim = h.dim;
    if start.len() != dim {
        return Err(Error::Dimension(format!("start vector {} vs dim {dim}", start.len())));
    }
    let scale = h.norm_bound().max(1e-300);
    let m_max = opts.krylov_dim.min(dim.saturating_sub(deflate.len())).max(1);
    let mut v0 = start;
    let mut best = (f64::INFINITY, Vec::new());
    for _ in 0..=opts.max_restarts {
        project_out(&mut v0, deflate);
        let nv = norm(&v0);
        if nv == 0.0 {
            return Err(Error::DegenerateData("start vector lies in the deflated space".into()));
        }
        v0.iter_mut().for_each(|a| *a /= nv);
        let mut basis: Vec<Vec<Complex64>> = vec![v0.clone()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        let mut w = vec![Complex64::new(0.0, 0.0); dim];
        let mut ritz: Option<(f64, DVector<f64>)> = None;
        let mut converged = false;
        for j in 0..m_max {
            h.matvec(&basis[j], &mut w);
            project_out(&mut w, deflate);
            let a = dot(&basis[j], &w).re;
            alpha.push(a);
            for _ in 0..2 {
                for b in &basis {
                    let c = dot(b, &w);
                    axpy(-c, b, &mut w);
                }
            }
            let bnorm = norm(&w);
            let k = alpha.len();
            let check = k % 5 == 0 || k == m_max || bnorm < 1e-13 * scale;
            if check {
                let t = DMatrix::from_fn(k, k, |r, c| {
                    if r == c {
                        alpha[r]
                    } else if r + 1 == c {
                        beta[r]
                    } else if c + 1 == r {
                        beta[c]
                    } else {
                        0.0
                    }
                });
                let e = t.symmetric_eigen();
                let i0 = (0..k).min_by(|&x, &y| e.eigenvalues[x].total_cmp(&e.eigenvalues[y])).unwrap();
                let s = e.eigenvectors.column(i0).into_owned();
                let res = bnorm * s[k - 1].abs();
                ritz = Some((e.eigenvalues[i0], s));
                if res <= opts.tol * scale || bnorm < 1e-13 * scale {
                    converged = true;
                    break;
                }
            }
            if j + 1 == m_max {
                break;
            }
            beta.push(bnorm);
            basis.push(w.iter().map(|x| x / bnorm).collect());
        }
        let (theta, s) = ritz.expect("at least one Ritz check");
        let mut x = vec![Complex64::new(0.0, 0.0); dim];
        for (c, b) in s.iter().zip(&basis) {
            axpy(Complex64::new(*c, 0.0), b, &mut x);
        }
        project_out(&mut x, deflate);
        let nx = norm(&x);
        x.iter_mut().for_each(|a| *a /= nx);
        best = (theta, x);
        if converged {
            return Ok(best);
        }
        v0 = best.1.clone();
    }
    Ok(best)
}

#[derive(Clone, Debug)]
pub struct GroundState {
    pub energy: f64,
    /// Dimension of the eigenspace within [`DEGENERACY_TOL`] of the energy.
    pub degeneracy: usize,
    pub state: StateVector,
    /// Lowest level above the ground eigenspace, when one was seen.
    pub next_level: Option<f64>,
}

/// Ground state. A degenerate ground eigenspace gives the normalized
/// projection of a seeded random vector onto it.
pub fn ground_state(h: &SparseHamiltonian, seed: u64) -> Result<GroundState> {
    ground_state_with(h, seed, DEFAULT_ITERATIVE_ABOVE)
}

pub fn ground_state_with(h: &SparseHamiltonian, seed: u64, iterative_above: usize) -> Result<GroundState> {
    let (energy, space, next_level) = ground_space(h, seed, iterative_above)?;
    let psi = seeded_projection(&space, h.dim, seed);
    Ok(GroundState { energy, degeneracy: space.len(), state: StateVector::normalized(h.n_qubits(), psi)?, next_level })
}

/// Ground state with a degenerate eigenspace split by `perturbation`: the
/// lowest eigenvector of the perturbation restricted to the eigenspace, i.e.
/// the limit ε→0⁺ of the ground state of `h + ε·perturbation`. The
/// perturbation is only built when needed. If it leaves a degenerate bottom,
/// the seeded projection picks within that.
pub fn ground_state_resolved(
    h: &SparseHamiltonian,
    seed: u64,
    iterative_above: usize,
    perturbation: impl FnOnce() -> Result<SparseHamiltonian>,
) -> Result<GroundState> {
    let (energy, space, next_level) = ground_space(h, seed, iterative_above)?;
    let psi = if space.len() == 1 {
        space[0].clone()
    } else {
        let v = perturbation()?;
        if v.dim != h.dim {
            return Err(Error::Argument(format!("perturbation dim {} vs {}", v.dim, h.dim)));
        }
        let k = space.len();
        let mut tmp = vec![Complex64::new(0.0, 0.0); h.dim];
        let mut m = DMatrix::<Complex64>::zeros(k, k);
        for j in 0..k {
            v.matvec(&space[j], &mut tmp);
            for i in 0..k {
                m[(i, j)] = dot(&space[i], &tmp);
            }
        }
        let (w, vecs) = hermitian_eigen(m, true);
        let vecs = vecs.unwrap();
        let bottom: Vec<Vec<Complex64>> = (0..k)
            .take_while(|&c| w[c] - w[0] <= DEGENERACY_TOL)
            .map(|c| {
                let mut out = vec![Complex64::new(0.0, 0.0); h.dim];
                for (i, b) in space.iter().enumerate() {
                    axpy(vecs[(i, c)], b, &mut out);
                }
                out
            })
            .collect();
        seeded_projection(&bottom, h.dim, seed)
    };
    Ok(GroundState { energy, degeneracy: space.len(), state: StateVector::normalized(h.n_qubits(), psi)?, next_level })
}

/// Orthonormal basis of the ground eigenspace, its energy and the next level.
fn ground_space(
    h: &SparseHamiltonian,
    seed: u64,
    iterative_above: usize,
) -> Result<(f64, Vec<Vec<Complex64>>, Option<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    if h.dim <= iterative_above {
        let s = full_spectrum(h, true)?;
        let energy = s.eigenvalues[0];
        let v = s.eigenvectors.as_ref().unwrap();
        let space: Vec<Vec<Complex64>> = (0..s.len())
            .take_while(|&k| s.eigenvalues[k] - energy <= DEGENERACY_TOL)
            .map(|k| v.column(k).iter().copied().collect())
            .collect();
        let next_level = s.eigenvalues.get(space.len()).copied();
        return Ok((energy, space, next_level));
    }
    let opts = LanczosOptions { tol: 1e-12, ..Default::default() };
    let (e0, v) = lanczos_lowest(h, random_vector(h.dim, &mut rng), &[], opts)?;
    let mut found = vec![v];
    let mut e_min = e0;
    let mut above = None;
    while found.len() < 16 && found.len() < h.dim {
        let (e, v) = lanczos_lowest(h, random_vector(h.dim, &mut rng), &found, opts)?;
        if e < e_min - DEGENERACY_TOL {
            // The first run missed the bottom; restart the search from here.
            e_min = e;
            found = vec![v];
            continue;
        }
        if e - e_min > DEGENERACY_TOL {
            above = Some(e);
            break;
        }
        found.push(v);
    }
    Ok((e_min, found, above))
}

/// Projection of a fixed seeded vector onto the span of `space`, so the pick
/// does not depend on which basis the solver returned.
fn seeded_projection(space: &[Vec<Complex64>], dim: usize, seed: u64) -> Vec<Complex64> {
    if space.len() == 1 {
        return space[0].clone();
    }
    let r = random_vector(dim, &mut ChaCha8Rng::seed_from_u64(seed ^ 0x6752_4f55_4e44_0001));
    let mut psi = vec![Complex64::new(0.0, 0.0); dim];
    for v in space {
        axpy(dot(v, &r), v, &mut psi);
    }
    psi
}
