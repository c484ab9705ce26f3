//! Dense complex linear algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{CdError, Result};

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

const C0: Complex64 = Complex64::new(0.0, 0.0);

/// Sections above this size use iterative extremal singular values.
pub const DENSE_SVD_LIMIT: usize = 400;

fn split(a: &CMat) -> (DMatrix<f64>, DMatrix<f64>) {
    (a.map(|z| z.re), a.map(|z| z.im))
}

/// Complex product routed through real gemm, which nalgebra blocks and
/// vectorizes; the complex path is a naive triple loop.
pub fn cgemm(a: &CMat, b: &CMat) -> CMat {
    assert_eq!(a.ncols(), b.nrows(), "cgemm shape mismatch");
    if a.nrows() * a.ncols() * b.ncols() < 32 * 32 * 32 {
        return a * b;
    }
    let (ar, ai) = split(a);
    let (br, bi) = split(b);
    let rr = &ar * &br - &ai * &bi;
    let ii = &ar * &bi + &ai * &br;
    CMat::from_fn(a.nrows(), b.ncols(), |i, j| Complex64::new(rr[(i, j)], ii[(i, j)]))
}

/// `a^H b`.
pub fn cgemm_ha(a: &CMat, b: &CMat) -> CMat {
    cgemm(&a.adjoint(), b)
}

pub fn identity(n: usize) -> CMat {
    CMat::identity(n, n)
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn inverse(a: &CMat) -> Result<CMat> {
    if a.nrows() != a.ncols() {
        return Err(CdError::DimensionMismatch(a.nrows(), a.ncols()));
    }
    let inv = a
        .clone()
        .lu()
        .try_inverse()
        .ok_or(CdError::Singular { condition: f64::INFINITY })?;
    if inv.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(CdError::Singular { condition: f64::INFINITY });
    }
    Ok(inv)
}

pub fn singular_values(a: &CMat) -> Vec<f64> {
    let sv = a.clone().svd(false, false).singular_values;
    let mut v: Vec<f64> = sv.iter().copied().collect();
    v.sort_by(|x, y| y.partial_cmp(x).unwrap());
    v
}

fn normalize(v: &mut CVec) -> f64 {
    let n = v.norm();
    if n > 0.0 {
        *v /= Complex64::new(n, 0.0);
    }
    n
}

fn start_vector(n: usize) -> CVec {
    // deterministic, not orthogonal to any structured subspace in practice
    CVec::from_fn(n, |i, _| {
        let t = i as f64 + 1.0;
        Complex64::new((0.7548776662 * t).fract() + 0.5, (0.5698402910 * t).fract() - 0.5)
    })
}

/// Largest singular value by power iteration on `a^H a`.
pub fn sigma_max_iter(a: &CMat, tol: f64, max_iter: usize) -> f64 {
    if a.is_empty() {
        return 0.0;
    }
    let ah = a.adjoint();
    let mut v = start_vector(a.ncols());
    normalize(&mut v);
    let mut last = 0.0;
    for _ in 0..max_iter {
        let w = a * &v;
        let mut u = &ah * &w;
        let lam = normalize(&mut u).sqrt();
        v = u;
        if (lam - last).abs() <= tol * lam {
            return lam;
        }
        last = lam;
    }
    last
}

/// Smallest and largest singular values. Exact below [`DENSE_SVD_LIMIT`],
/// power iteration on `a` and `a^{-1}` above it.
pub fn sigma_extremes(a: &CMat) -> Result<(f64, f64)> {
    let n = a.nrows().min(a.ncols());
    if n == 0 {
        return Ok((0.0, 0.0));
    }
    if n <= DENSE_SVD_LIMIT || a.nrows() != a.ncols() {
        let sv = singular_values(a);
        return Ok((*sv.last().unwrap(), sv[0]));
    }
    let smax = sigma_max_iter(a, 1e-12, 2000);
    let smin = match inverse(a) {
        Ok(inv) => 1.0 / sigma_max_iter(&inv, 1e-12, 2000),
        Err(_) => 0.0,
    };
    Ok((smin, smax))
}

pub fn condition_number(a: &CMat) -> Result<f64> {
    let (smin, smax) = sigma_extremes(a)?;
    Ok(if smin > 0.0 { smax / smin } else { f64::INFINITY })
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues ascending.
pub fn hermitian_eigen(a: &CMat) -> (Vec<f64>, CMat) {
    let herm = (a + a.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = herm.symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vecs = CMat::from_fn(a.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// `f(a)` for Hermitian `a` through its eigen-decomposition.
pub fn hermitian_function(a: &CMat, f: impl Fn(f64) -> f64) -> CMat {
    let (vals, vecs) = hermitian_eigen(a);
    let mut scaled = vecs.clone();
    for (j, &l) in vals.iter().enumerate() {
        let s = Complex64::new(f(l), 0.0);
        scaled.column_mut(j).iter_mut().for_each(|z| *z *= s);
    }
    cgemm(&scaled, &vecs.adjoint())
}

/// Conjugate gradient for Hermitian positive definite `a`.
pub fn conjugate_gradient(
    apply: impl Fn(&CVec) -> CVec,
    b: &CVec,
    tol: f64,
    max_iter: usize,
) -> Result<(CVec, f64, usize)> {
    let bn = b.norm();
    let mut x = CVec::from_element(b.len(), C0);
    if bn == 0.0 {
        return Ok((x, 0.0, 0));
    }
    let mut r = b.clone();
    let mut p = r.clone();
    let mut rr = r.norm_squared();
    for it in 0..max_iter {
        if rr.sqrt() <= tol * bn {
            return Ok((x, rr.sqrt() / bn, it));
        }
        let ap = apply(&p);
        let pap = p.dotc(&ap).re;
        if pap <= 0.0 {
            return Err(CdError::Precondition("operator is not positive definite".into()));
        }
        let alpha = Complex64::new(rr / pap, 0.0);
        x += &p * alpha;
        r -= &ap * alpha;
        let rr_new = r.norm_squared();
        p = &r + &p * Complex64::new(rr_new / rr, 0.0);
        rr = rr_new;
    }
    let res = rr.sqrt() / bn;
    if res <= tol {
        Ok((x, res, max_iter))
    } else {
        Err(CdError::Precondition(format!("conjugate gradient stalled at relative residual {res:e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn test_matrix(n: usize) -> CMat {
        CMat::from_fn(n, n, |i, j| {
            let d = (i as f64 - j as f64).abs();
            Complex64::new((-d).exp() + if i == j { 1.0 } else { 0.0 }, 0.1 * (i as f64 - j as f64).sin())
        })
    }

    #[test]
    fn cgemm_matches_naive() {
        let a = test_matrix(50);
        let b = test_matrix(50).adjoint();
        let d = cgemm(&a, &b) - &a * &b;
        assert!(frobenius(&d) < 1e-10);
    }

    #[test]
    fn extremes_agree() {
        let a = test_matrix(60);
        let sv = singular_values(&a);
        let smax = sigma_max_iter(&a, 1e-14, 5000);
        assert!((smax - sv[0]).abs() < 1e-8 * sv[0]);
        let inv = inverse(&a).unwrap();
        let smin = 1.0 / sigma_max_iter(&inv, 1e-14, 5000);
        assert!((smin - sv[59]).abs() < 1e-8);
    }

    #[test]
    fn inverse_sqrt_and_cg() {
        let a = test_matrix(30);
        let h = cgemm(&a.adjoint(), &a);
        let r = hermitian_function(&h, |l| l.powf(-0.5));
        let id = cgemm(&cgemm(&r, &h), &r);
        assert!(frobenius(&(id - identity(30))) < 1e-9);
        let b = CVec::from_fn(30, |i, _| Complex64::new(i as f64, 1.0));
        let (x, res, _) = conjugate_gradient(|v| &h * v, &b, 1e-12, 500).unwrap();
        assert!(res <= 1e-12);
        assert!((&h * x - b).norm() < 1e-9);
    }

    #[test]
    fn singular_detected() {
        let z = CMat::zeros(3, 3);
        assert!(matches!(inverse(&z), Err(CdError::Singular { .. })));
    }
}
