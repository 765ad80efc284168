//! Small dense complex linear-algebra helpers on top of `nalgebra`.
//!
//! Every matrix in this crate is tiny (auxiliary dimension `m`, fiber rank
//! `r`), so these routines favour clarity over blocking or reuse of buffers.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

/// `(A + A*) / 2`.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// `(A - A*) / 2i`, the operator imaginary part.
pub fn imaginary_part(a: &CMat) -> CMat {
    (a - a.adjoint()) * c(0.0, -0.5)
}

/// Hermitian eigendecomposition with eigenvalues sorted in descending order.
///
/// Each eigenvector's phase is fixed so that its largest-magnitude entry is
/// real and positive; ties are broken by the lowest index.
#[derive(Debug, Clone)]
pub struct Eigh {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

pub fn eigh(a: &CMat) -> Eigh {
    let n = a.nrows();
    if n == 0 {
        return Eigh {
            values: Vec::new(),
            vectors: CMat::zeros(0, 0),
        };
    }
    let se = hermitian_part(a).symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| se.eigenvalues[j].total_cmp(&se.eigenvalues[i]));
    let mut vectors = CMat::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        values.push(se.eigenvalues[src]);
        let mut col = se.eigenvectors.column(src).into_owned();
        fix_phase(&mut col);
        vectors.set_column(dst, &col);
    }
    Eigh { values, vectors }
}

/// Rotates `v` so its largest-magnitude entry is real positive.
pub fn fix_phase(v: &mut CVec) {
    let mut best = 0;
    let mut best_abs = -1.0;
    for (i, z) in v.iter().enumerate() {
        let a = z.norm();
        if a > best_abs * (1.0 + 1e-12) {
            best = i;
            best_abs = a;
        }
    }
    if best_abs > 0.0 {
        let phase = v[best].conj() / best_abs;
        for z in v.iter_mut() {
            *z *= phase;
        }
    }
}

/// Principal square root of a Hermitian PSD matrix; negative round-off
/// eigenvalues are clamped to zero.
pub fn psd_sqrt(a: &CMat) -> CMat {
    let n = a.nrows();
    if n == 0 {
        return CMat::zeros(0, 0);
    }
    let e = eigh(a);
    let mut out = CMat::zeros(n, n);
    for (k, &lam) in e.values.iter().enumerate() {
        let s = lam.max(0.0).sqrt();
        if s == 0.0 {
            continue;
        }
        let v = e.vectors.column(k);
        out += (v * v.adjoint()).scale(s);
    }
    hermitian_part(&out)
}

pub fn singular_values(a: &CMat) -> Vec<f64> {
    if a.nrows() == 0 || a.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Spectral (operator 2-) norm.
pub fn op_norm(a: &CMat) -> f64 {
    singular_values(a).first().copied().unwrap_or(0.0)
}

/// Trace norm: sum of singular values.
pub fn nuclear_norm(a: &CMat) -> f64 {
    singular_values(a).iter().sum()
}

/// 2-norm condition number; infinite for singular or empty input.
pub fn condition_number(a: &CMat) -> f64 {
    let s = singular_values(a);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// Moore–Penrose pseudo-inverse, discarding singular values below
/// `rtol * s_max`.
pub fn pinv(a: &CMat, rtol: f64) -> CMat {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return CMat::zeros(cols, rows);
    }
    let svd = a.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let smax = svd.singular_values.iter().fold(0.0_f64, |m, &s| m.max(s));
    let mut out = CMat::zeros(cols, rows);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > rtol * smax && s > 0.0 {
            let uk = u.column(k);
            let vk = vt.row(k).adjoint();
            out += (vk * uk.adjoint()).scale(1.0 / s);
        }
    }
    out
}

/// Unitary polar factor `U V*` of `A = U Σ V*`.
pub fn polar_unitary(a: &CMat) -> CMat {
    let (rows, cols) = a.shape();
    if rows == 0 || cols == 0 {
        return CMat::zeros(rows, cols);
    }
    let svd = a.clone().svd(true, true);
    svd.u.expect("u requested") * svd.v_t.expect("v_t requested")
}

/// `‖A − 1‖` in operator norm.
pub fn identity_defect(a: &CMat) -> f64 {
    let n = a.nrows();
    op_norm(&(a - identity(n)))
}

/// `max(‖U*U − 1‖, ‖UU* − 1‖)`.
pub fn unitarity_defect(u: &CMat) -> f64 {
    let left = identity_defect(&(u.adjoint() * u));
    let right = identity_defect(&(u * u.adjoint()));
    left.max(right)
}

/// Largest entrywise modulus.
pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0, |m, z| m.max(z.norm()))
}

/// Eigenvalues of a general square complex matrix via the Schur form.
pub fn eigenvalues(a: &CMat) -> Vec<Complex64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let t = a.clone().schur().unpack().1;
    (0..t.nrows()).map(|i| t[(i, i)]).collect()
}

/// Solves `A X = B` by LU; `None` when `A` is numerically singular.
pub fn solve(a: &CMat, b: &CMat) -> Option<CMat> {
    a.clone().lu().solve(b)
}

pub fn from_real(a: &DMatrix<f64>) -> CMat {
    a.map(|x| c(x, 0.0))
}
