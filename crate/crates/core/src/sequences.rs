//! ℓ^p quasi-norms on finite sequences, `0 < p <= ∞`, and lattice convolution.

use std::collections::BTreeMap;
use std::sync::Arc;

use num_complex::Complex64;

use crate::error::{CdError, Result};
use crate::pointset::PointSet;

/// `|x|^p` through `exp(p ln|x|)`, with zero mapped to zero for every `p`.
#[inline]
pub fn pow_abs(x: f64, p: f64) -> f64 {
    let a = x.abs();
    if a == 0.0 {
        0.0
    } else if p == 1.0 {
        a
    } else {
        (p * a.ln()).exp()
    }
}

/// Conjugate exponent with the convention `q' = ∞` for `q <= 1`.
pub fn conjugate_exponent(q: f64) -> f64 {
    if q <= 1.0 {
        f64::INFINITY
    } else if q.is_infinite() {
        1.0
    } else {
        q / (q - 1.0)
    }
}

/// `1/p` with `1/∞ = 0`.
#[inline]
pub fn recip_exponent(p: f64) -> f64 {
    if p.is_infinite() {
        0.0
    } else {
        1.0 / p
    }
}

pub(crate) fn check_exponent(p: f64) -> Result<()> {
    if p > 0.0 && !p.is_nan() {
        Ok(())
    } else {
        Err(CdError::param(format!("exponent must lie in (0, inf], got {p}")))
    }
}

/// `(Σ |x_j|^p)^{1/p}`, or `max |x_j|` for `p = ∞`.
pub fn lp_norm_abs<I: IntoIterator<Item = f64>>(abs_values: I, p: f64) -> f64 {
    if p.is_infinite() {
        abs_values.into_iter().fold(0.0, |m, x| m.max(x.abs()))
    } else {
        let s: f64 = abs_values.into_iter().map(|x| pow_abs(x, p)).sum();
        if s == 0.0 {
            0.0
        } else {
            pow_abs(s, 1.0 / p)
        }
    }
}

/// `Σ |x_j|^p` (the p-th power of the quasi-norm), finite `p` only.
pub fn lp_sum_abs<I: IntoIterator<Item = f64>>(abs_values: I, p: f64) -> f64 {
    abs_values.into_iter().map(|x| pow_abs(x, p)).sum()
}

pub fn lp_norm(values: &[Complex64], p: f64) -> f64 {
    lp_norm_abs(values.iter().map(|z| z.norm()), p)
}

pub fn lp_norm_real(values: &[f64], p: f64) -> f64 {
    lp_norm_abs(values.iter().copied(), p)
}

/// A finite sequence indexed by a point set.
#[derive(Debug, Clone)]
pub struct Seq {
    index: Arc<PointSet>,
    values: Vec<Complex64>,
}

impl Seq {
    pub fn new(index: Arc<PointSet>, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != index.len() {
            return Err(CdError::IndexMismatch {
                expected: index.len(),
                got: values.len(),
            });
        }
        Ok(Self { index, values })
    }

    pub fn from_real(index: Arc<PointSet>, values: &[f64]) -> Result<Self> {
        Self::new(index, values.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn zeros(index: Arc<PointSet>) -> Self {
        let n = index.len();
        Self {
            index,
            values: vec![Complex64::new(0.0, 0.0); n],
        }
    }

    /// Kronecker delta at position `i`.
    pub fn delta(index: Arc<PointSet>, i: usize) -> Self {
        let mut s = Self::zeros(index);
        s.values[i] = Complex64::new(1.0, 0.0);
        s
    }

    pub fn index(&self) -> &Arc<PointSet> {
        &self.index
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<Complex64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn lp_quasinorm(&self, p: f64) -> Result<f64> {
        check_exponent(p)?;
        Ok(lp_norm(&self.values, p))
    }

    pub fn add(&self, other: &Seq) -> Result<Seq> {
        if !Arc::ptr_eq(&self.index, &other.index) && self.index != other.index {
            return Err(CdError::IndexMismatch {
                expected: self.len(),
                got: other.len(),
            });
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a + b).collect();
        Ok(Seq {
            index: self.index.clone(),
            values,
        })
    }

    /// Full discrete convolution of two sequences on integer-lattice sections.
    /// The result is indexed by the Minkowski sum of the supports, in
    /// lexicographic order.
    pub fn convolve(&self, other: &Seq) -> Result<Seq> {
        let (da, db) = (self.index.dim(), other.index.dim());
        if da != db {
            return Err(CdError::DimensionMismatch(da, db));
        }
        let ka = self
            .index
            .integer_coords()
            .ok_or_else(|| CdError::param("convolution needs integer-lattice indices"))?;
        let kb = other
            .index
            .integer_coords()
            .ok_or_else(|| CdError::param("convolution needs integer-lattice indices"))?;
        let mut acc: BTreeMap<Vec<i64>, Complex64> = BTreeMap::new();
        for (ia, a) in ka.iter().enumerate() {
            for (ib, b) in kb.iter().enumerate() {
                let key: Vec<i64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
                *acc.entry(key).or_default() += self.values[ia] * other.values[ib];
            }
        }
        let pts: Vec<Vec<f64>> = acc.keys().map(|k| k.iter().map(|&x| x as f64).collect()).collect();
        let index = Arc::new(PointSet::from_points(da, &pts)?.with_step(1.0)?);
        Seq::new(index, acc.into_values().collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointset::{enumerate, RectangularLattice};

    fn line(n: i64) -> Arc<PointSet> {
        let pts: Vec<Vec<f64>> = (0..n).map(|k| vec![k as f64]).collect();
        Arc::new(PointSet::from_points(1, &pts).unwrap())
    }

    #[test]
    fn quasinorm_examples() {
        let idx = line(2);
        let a = Seq::from_real(idx.clone(), &[3.0, 4.0]).unwrap();
        assert!((a.lp_quasinorm(2.0).unwrap() - 5.0).abs() < 1e-14);
        let b = Seq::from_real(idx, &[1.0, 1.0]).unwrap();
        assert!((b.lp_quasinorm(0.5).unwrap() - 4.0).abs() < 1e-13);
        let d = Seq::delta(line(5), 0);
        for p in [0.1, 0.5, 1.0, 3.0, f64::INFINITY] {
            assert!((d.lp_quasinorm(p).unwrap() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn bad_exponent() {
        let a = Seq::zeros(line(3));
        assert!(a.lp_quasinorm(0.0).is_err());
        assert!(a.lp_quasinorm(-1.0).is_err());
        assert!(a.lp_quasinorm(f64::NAN).is_err());
        assert_eq!(a.lp_quasinorm(0.3).unwrap(), 0.0);
    }

    #[test]
    fn conjugate_convention() {
        assert!(conjugate_exponent(0.5).is_infinite());
        assert!(conjugate_exponent(1.0).is_infinite());
        assert_eq!(conjugate_exponent(2.0), 2.0);
        assert_eq!(conjugate_exponent(f64::INFINITY), 1.0);
    }

    #[test]
    fn convolve_examples() {
        let idx = line(2);
        let a = Seq::from_real(idx.clone(), &[1.0, 1.0]).unwrap();
        let c = a.convolve(&a).unwrap();
        let xs: Vec<f64> = c.index().iter().map(|p| p[0]).collect();
        assert_eq!(xs, vec![0.0, 1.0, 2.0]);
        let v: Vec<f64> = c.values().iter().map(|z| z.re).collect();
        assert_eq!(v, vec![1.0, 2.0, 1.0]);

        let origin = Arc::new(enumerate(&RectangularLattice::integer(2, 0.0).unwrap()).unwrap());
        let delta = Seq::delta(origin, 0);
        let sec = Arc::new(enumerate(&RectangularLattice::integer(2, 2.0).unwrap()).unwrap());
        let vals: Vec<Complex64> = (0..sec.len()).map(|i| Complex64::new(i as f64, -(i as f64))).collect();
        let b = Seq::new(sec.clone(), vals.clone()).unwrap();
        let c = delta.convolve(&b).unwrap();
        assert_eq!(c.values(), &vals[..]);
        assert_eq!(c.index().point(4), sec.point(4));
    }

    #[test]
    fn convolve_dimension_mismatch() {
        let a = Seq::zeros(line(2));
        let b = Seq::zeros(Arc::new(enumerate(&RectangularLattice::integer(2, 1.0).unwrap()).unwrap()));
        assert!(matches!(a.convolve(&b), Err(CdError::DimensionMismatch(1, 2))));
    }
}
