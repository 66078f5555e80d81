//! Dense complex linear-algebra helpers shared by every module.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

pub use nalgebra::Complex;

pub type C64 = Complex<f64>;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

#[inline]
pub fn cis(theta: f64) -> C64 {
    C64::new(theta.cos(), theta.sin())
}

/// Matrix with i.i.d. circularly-symmetric complex Gaussian entries of the given variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize, variance: f64) -> CMat {
    let s = (variance / 2.0).sqrt();
    CMat::from_fn(rows, cols, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(s * re, s * im)
    })
}

pub fn complex_gaussian_vec<R: Rng + ?Sized>(rng: &mut R, len: usize, variance: f64) -> CVec {
    let m = complex_gaussian(rng, len, 1, variance);
    CVec::from_iterator(len, m.iter().copied())
}

/// Haar-distributed unitary matrix (QR of a Gaussian matrix with the phase of `R` removed).
pub fn random_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    let g = complex_gaussian(rng, n, n, 1.0);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { ONE };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Random unitary that is also complex symmetric (`U Uᵀ` for Haar `U`).
pub fn random_symmetric_unitary<R: Rng + ?Sized>(rng: &mut R, n: usize) -> CMat {
    let u = random_unitary(rng, n);
    let s = &u * u.transpose();
    symmetrize(&s)
}

/// `(X + Xᵀ)/2`, exactly symmetric in floating point.
pub fn symmetrize(x: &CMat) -> CMat {
    let n = x.nrows();
    CMat::from_fn(n, n, |i, j| {
        let (a, b) = if i <= j {
            (x[(i, j)], x[(j, i)])
        } else {
            (x[(j, i)], x[(i, j)])
        };
        (a + b) * 0.5
    })
}

/// Nearest unitary matrix in Frobenius norm, `U Vᴴ` from the SVD of `target`.
///
/// Returns `None` when `target` is exactly zero (every unitary is then optimal).
pub fn unitary_polar_factor(target: &CMat) -> Option<CMat> {
    if target.iter().all(|z| *z == ZERO) {
        return None;
    }
    if target.nrows() == 1 && target.ncols() == 1 {
        let z = target[(0, 0)];
        return Some(CMat::from_element(1, 1, z / z.norm()));
    }
    let svd = target.clone().svd(true, true);
    let u = svd.u.expect("svd u");
    let v_t = svd.v_t.expect("svd v_t");
    Some(u * v_t)
}

/// Largest entry modulus.
pub fn max_abs(m: &CMat) -> f64 {
    m.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

/// `‖XᴴX − I‖_F`.
pub fn unitarity_error(x: &CMat) -> f64 {
    let n = x.ncols();
    (x.adjoint() * x - CMat::identity(n, n)).norm()
}

pub fn is_finite(m: &CMat) -> bool {
    m.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// Column-major vectorization.
pub fn vec_of(m: &CMat) -> CVec {
    CVec::from_iterator(m.len(), m.iter().copied())
}

pub fn unvec(v: &CVec, rows: usize, cols: usize) -> CMat {
    CMat::from_iterator(rows, cols, v.iter().copied())
}

/// Hermitian eigendecomposition with eigenvalues clamped at zero from below.
pub fn psd_eigen(m: &CMat) -> (Vec<f64>, CMat) {
    let h = hermitian_part(m);
    let eig = SymmetricEigen::new(h);
    let vals = eig.eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    (vals, eig.eigenvectors)
}

/// `(X + Xᴴ)/2`.
pub fn hermitian_part(m: &CMat) -> CMat {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

/// Quadratic form `xᴴ M x` (real part; `M` assumed Hermitian).
pub fn quad_form(m: &CMat, x: &CVec) -> f64 {
    x.dotc(&(m * x)).re
}

/// Block-diagonal matrix from square blocks.
pub fn block_diag(blocks: &[CMat]) -> CMat {
    let n: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMat::zeros(n, n);
    let mut o = 0;
    for b in blocks {
        let s = b.nrows();
        out.view_mut((o, o), (s, s)).copy_from(b);
        o += s;
    }
    out
}

/// Trace of a product `X Y` without forming it.
pub fn trace_of_product(x: &CMat, y: &CMat) -> C64 {
    let mut acc = ZERO;
    for i in 0..x.nrows() {
        for k in 0..x.ncols() {
            acc += x[(i, k)] * y[(k, i)];
        }
    }
    acc
}
