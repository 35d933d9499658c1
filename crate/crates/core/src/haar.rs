//! Haar-random states and Gaussian random-matrix spectra.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pauli::StateVector;
use crate::spectral::hermitian_eigen;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EnsembleKind {
    HaarState,
    Goe,
    Gue,
    Gse,
    PoissonLevels,
}

impl std::str::FromStr for EnsembleKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "haar_state" => Ok(EnsembleKind::HaarState),
            "goe" => Ok(EnsembleKind::Goe),
            "gue" => Ok(EnsembleKind::Gue),
            "gse" => Ok(EnsembleKind::Gse),
            "poisson_levels" | "poisson" => Ok(EnsembleKind::PoissonLevels),
            _ => Err(Error::Argument(format!("unknown ensemble {s:?}"))),
        }
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

fn cnormal(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(normal(rng), normal(rng))
}

/// Gaussian real and imaginary parts, normalized.
pub fn sample_haar_state(n_qubits: usize, seed: u64) -> Result<StateVector> {
    if n_qubits == 0 {
        return Err(Error::Argument("need at least one qubit".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let amps = (0..1usize << n_qubits).map(|_| cnormal(&mut rng)).collect();
    StateVector::normalized(n_qubits, amps)
}

/// Ascending eigenvalues of a `dim × dim` draw. GSE matrices are quaternion
/// self-dual of complex size `2·dim`, and their Kramers pairs are reduced to
/// one level each. Poisson levels are sorted i.i.d. uniforms.
pub fn sample_rmt_spectrum(kind: EnsembleKind, dim: usize, seed: u64) -> Result<Vec<f64>> {
    if dim < 4 {
        return Err(Error::Argument(format!("dim = {dim} must be at least 4")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = Complex64::new(0.0, 0.0);
    match kind {
        EnsembleKind::HaarState => Err(Error::Argument("haar_state is not a level ensemble".into())),
        EnsembleKind::PoissonLevels => {
            let mut v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();
            v.sort_by(f64::total_cmp);
            Ok(v)
        }
        EnsembleKind::Goe => {
            let mut m = DMatrix::<f64>::zeros(dim, dim);
            for i in 0..dim {
                m[(i, i)] = normal(&mut rng) * 2f64.sqrt();
                for j in 0..i {
                    let v = normal(&mut rng);
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            let mut w: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
            w.sort_by(f64::total_cmp);
            Ok(w)
        }
        EnsembleKind::Gue => {
            let mut m = DMatrix::<Complex64>::zeros(dim, dim);
            for i in 0..dim {
                m[(i, i)] = Complex64::new(normal(&mut rng), 0.0);
                for j in 0..i {
                    let v = cnormal(&mut rng) / 2f64.sqrt();
                    m[(i, j)] = v;
                    m[(j, i)] = v.conj();
                }
            }
            Ok(hermitian_eigen(m, false).0)
        }
        EnsembleKind::Gse => {
            // [[A, B], [−B̄, Ā]] with A Hermitian and B antisymmetric.
            let mut a = DMatrix::<Complex64>::zeros(dim, dim);
            let mut b = DMatrix::<Complex64>::zeros(dim, dim);
            for i in 0..dim {
                a[(i, i)] = Complex64::new(normal(&mut rng), 0.0);
                for j in 0..i {
                    let v = cnormal(&mut rng) / 2f64.sqrt();
                    a[(i, j)] = v;
                    a[(j, i)] = v.conj();
                    let w = cnormal(&mut rng) / 2f64.sqrt();
                    b[(i, j)] = w;
                    b[(j, i)] = -w;
                }
            }
            let n2 = 2 * dim;
            let mut h = DMatrix::<Complex64>::from_element(n2, n2, z);
            for i in 0..dim {
                for j in 0..dim {
                    h[(i, j)] = a[(i, j)];
                    h[(i, j + dim)] = b[(i, j)];
                    h[(i + dim, j)] = -b[(i, j)].conj();
                    h[(i + dim, j + dim)] = a[(i, j)].conj();
                }
            }
            let w = hermitian_eigen(h, false).0;
            Ok(w.into_iter().step_by(2).collect())
        }
    }
}
