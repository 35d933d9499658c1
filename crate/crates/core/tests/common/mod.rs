#![allow(dead_code)]

use nalgebra::DMatrix;
use syklab::Complex64;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Single-qubit matrix, built by hand.
pub fn letter(op: char) -> DMatrix<Complex64> {
    let z = c(0.0, 0.0);
    let o = c(1.0, 0.0);
    let i = c(0.0, 1.0);
    match op {
        'I' => DMatrix::from_row_slice(2, 2, &[o, z, z, o]),
        'X' => DMatrix::from_row_slice(2, 2, &[z, o, o, z]),
        'Y' => DMatrix::from_row_slice(2, 2, &[z, -i, i, z]),
        'Z' => DMatrix::from_row_slice(2, 2, &[o, z, z, -o]),
        _ => panic!("bad letter {op}"),
    }
}

/// Tensor product with qubit 1 as the least significant bit, i.e. the
/// rightmost Kronecker factor.
pub fn kron_letters(letters: &str) -> DMatrix<Complex64> {
    let mut m = DMatrix::from_element(1, 1, c(1.0, 0.0));
    for ch in letters.chars() {
        m = letter(ch).kronecker(&m);
    }
    m
}

pub fn max_abs_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
    (a - b).iter().map(|v| v.norm()).fold(0.0, f64::max)
}

/// Eigenvalues of a dense Hermitian matrix through the real symmetric
/// embedding [[A, -B], [B, A]], each level appearing twice.
pub fn dense_levels(h: &DMatrix<Complex64>) -> Vec<f64> {
    let n = h.nrows();
    let mut r = DMatrix::<f64>::zeros(2 * n, 2 * n);
    for i in 0..n {
        for j in 0..n {
            let v = h[(i, j)];
            r[(i, j)] = v.re;
            r[(i + n, j + n)] = v.re;
            r[(i, j + n)] = -v.im;
            r[(i + n, j)] = v.im;
        }
    }
    let mut w: Vec<f64> = r.symmetric_eigenvalues().iter().copied().collect();
    w.sort_by(f64::total_cmp);
    w.into_iter().step_by(2).collect()
}
