//! Finite sections of convolution-dominated matrices: Schur-type norms,
//! minimal envelopes and operator-norm bounds.

use std::io::{Read, Write};
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envelopes::Envelope;
use crate::error::{CdError, Result};
use crate::linalg::{self, CMat, CVec};
use crate::pointset::PointSet;
use crate::sequences::{check_exponent, conjugate_exponent, lp_norm, lp_sum_abs, pow_abs, recip_exponent, Seq};

/// Complex matrix indexed by rows `Λ` and columns `Π`.
#[derive(Debug, Clone)]
pub struct CDMatrix {
    rows: Arc<PointSet>,
    cols: Arc<PointSet>,
    entries: CMat,
    max_col_sum: f64,
    max_row_sum: f64,
}

/// Minimal grid envelope together with the largest distance between a
/// difference `λ − ρ` and the grid node it was assigned to.
#[derive(Debug, Clone)]
pub struct MinEnvelope {
    pub envelope: Envelope,
    pub snap_error: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NormBound {
    pub bound: f64,
    pub envelope_norm: f64,
    pub c_rows: f64,
    pub c_cols: f64,
}

impl CDMatrix {
    pub fn new(rows: Arc<PointSet>, cols: Arc<PointSet>, entries: CMat) -> Result<Self> {
        if entries.nrows() != rows.len() {
            return Err(CdError::IndexMismatch {
                expected: rows.len(),
                got: entries.nrows(),
            });
        }
        if entries.ncols() != cols.len() {
            return Err(CdError::IndexMismatch {
                expected: cols.len(),
                got: entries.ncols(),
            });
        }
        if rows.dim() != cols.dim() {
            return Err(CdError::DimensionMismatch(rows.dim(), cols.dim()));
        }
        let max_col_sum = (0..entries.ncols())
            .map(|j| entries.column(j).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max);
        let max_row_sum = (0..entries.nrows())
            .map(|i| entries.row(i).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max);
        Ok(Self {
            rows,
            cols,
            entries,
            max_col_sum,
            max_row_sum,
        })
    }

    pub fn from_fn(
        rows: Arc<PointSet>,
        cols: Arc<PointSet>,
        f: impl Fn(&[f64], &[f64]) -> Complex64,
    ) -> Result<Self> {
        let m = CMat::from_fn(rows.len(), cols.len(), |i, j| f(rows.point(i), cols.point(j)));
        Self::new(rows, cols, m)
    }

    /// `a_{λρ} = h(λ − ρ)`.
    pub fn toeplitz(points: Arc<PointSet>, h: impl Fn(&[f64]) -> Complex64) -> Result<Self> {
        let dim = points.dim();
        Self::from_fn(points.clone(), points, |x, y| {
            let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
            debug_assert_eq!(d.len(), dim);
            h(&d)
        })
    }

    pub fn identity(points: Arc<PointSet>) -> Self {
        let n = points.len();
        Self::new(points.clone(), points, linalg::identity(n)).expect("square identity")
    }

    pub fn zeros(rows: Arc<PointSet>, cols: Arc<PointSet>) -> Result<Self> {
        let m = CMat::zeros(rows.len(), cols.len());
        Self::new(rows, cols, m)
    }

    pub fn rows(&self) -> &Arc<PointSet> {
        &self.rows
    }

    pub fn cols(&self) -> &Arc<PointSet> {
        &self.cols
    }

    pub fn entries(&self) -> &CMat {
        &self.entries
    }

    pub fn into_entries(self) -> CMat {
        self.entries
    }

    pub fn shape(&self) -> (usize, usize) {
        self.entries.shape()
    }

    /// Same index sets, new entries.
    pub fn with_entries(&self, entries: CMat) -> Result<Self> {
        Self::new(self.rows.clone(), self.cols.clone(), entries)
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.with_entries(&self.entries * Complex64::new(c, 0.0)).expect("same shape")
    }

    pub fn apply(&self, b: &Seq) -> Result<Seq> {
        if b.len() != self.cols.len() {
            return Err(CdError::IndexMismatch {
                expected: self.cols.len(),
                got: b.len(),
            });
        }
        let v = CVec::from_column_slice(b.values());
        let out = &self.entries * v;
        Seq::new(self.rows.clone(), out.iter().copied().collect())
    }

    /// Plain vector product, no index bookkeeping.
    pub fn apply_slice(&self, b: &[Complex64]) -> Vec<Complex64> {
        let v = CVec::from_column_slice(b);
        (&self.entries * v).iter().copied().collect()
    }

    /// `A B` with index sets `rows(A)` and `cols(B)`.
    pub fn compose(&self, other: &CDMatrix) -> Result<CDMatrix> {
        if self.cols.len() != other.rows.len() {
            return Err(CdError::IndexMismatch {
                expected: self.cols.len(),
                got: other.rows.len(),
            });
        }
        CDMatrix::new(self.rows.clone(), other.cols.clone(), linalg::cgemm(&self.entries, &other.entries))
    }

    /// `sup_ρ Σ_λ |a_{λρ}|`.
    pub fn max_col_sum(&self) -> f64 {
        self.max_col_sum
    }

    /// `sup_λ Σ_ρ |a_{λρ}|`.
    pub fn max_row_sum(&self) -> f64 {
        self.max_row_sum
    }

    pub fn schur_norm(&self) -> f64 {
        self.max_col_sum + self.max_row_sum
    }

    /// Schur-test bound `K1^{1/p'} K2^{1/p}` for `p >= 1`.
    pub fn schur_test_bound(&self, p: f64) -> f64 {
        let (k1, k2) = (self.max_row_sum, self.max_col_sum);
        let a = recip_exponent(conjugate_exponent(p));
        let b = recip_exponent(p);
        let f = |k: f64, e: f64| if e == 0.0 { 1.0 } else { pow_abs(k, e) };
        f(k1, a) * f(k2, b)
    }

    /// `sup_ρ Σ_λ |a_{λρ}|^p`, `0 < p <= 1`.
    pub fn sp_norm(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(CdError::param(format!("S-p norm needs p in (0, 1], got {p}")));
        }
        Ok((0..self.entries.ncols())
            .map(|j| lp_sum_abs(self.entries.column(j).iter().map(|z| z.norm()), p))
            .fold(0.0, f64::max))
    }

    /// Row-direction counterpart `sup_λ Σ_ρ |a_{λρ}|^p`.
    pub fn sp_norm_rows(&self, p: f64) -> Result<f64> {
        if !(p > 0.0 && p <= 1.0) {
            return Err(CdError::param(format!("S-p norm needs p in (0, 1], got {p}")));
        }
        Ok((0..self.entries.nrows())
            .map(|i| lp_sum_abs(self.entries.row(i).iter().map(|z| z.norm()), p))
            .fold(0.0, f64::max))
    }

    fn default_step(&self) -> Result<f64> {
        match (self.rows.step(), self.cols.step()) {
            (Some(a), Some(b)) => Ok(a.min(b)),
            (Some(a), None) | (None, Some(a)) => Ok(a),
            (None, None) => Err(CdError::Precondition(
                "no lattice step on either index set; pass a grid step".into(),
            )),
        }
    }

    /// Pointwise-minimal grid envelope of the entries over differences `λ − ρ`.
    pub fn min_envelope(&self) -> Result<Envelope> {
        Ok(self.min_envelope_with(None)?.envelope)
    }

    pub fn min_envelope_with(&self, step: Option<f64>) -> Result<MinEnvelope> {
        self.envelope_impl(step, None)
    }

    /// Minimal envelope over differences wrapped to the minimum image of a
    /// torus with the given periods.
    pub fn min_envelope_periodic(&self, periods: &[f64], step: Option<f64>) -> Result<MinEnvelope> {
        if periods.len() != self.rows.dim() || periods.iter().any(|&t| !(t > 0.0)) {
            return Err(CdError::param("one positive period per axis required"));
        }
        self.envelope_impl(step, Some(periods))
    }

    fn envelope_impl(&self, step: Option<f64>, periods: Option<&[f64]>) -> Result<MinEnvelope> {
        let h = match step {
            Some(h) => h,
            None => self.default_step()?,
        };
        let dim = self.rows.dim();
        let diff = |i: usize, j: usize, d: &mut [f64]| {
            for (ax, (a, b)) in self.rows.point(i).iter().zip(self.cols.point(j)).enumerate() {
                let mut x = a - b;
                if let Some(t) = periods {
                    x -= t[ax] * (x / t[ax]).round();
                }
                d[ax] = x;
            }
        };
        let mut radius = 0.0f64;
        let mut d = vec![0.0; dim];
        for i in 0..self.rows.len() {
            for j in 0..self.cols.len() {
                if self.entries[(i, j)].norm() > 0.0 {
                    diff(i, j, &mut d);
                    radius = radius.max(d.iter().map(|x| x * x).sum::<f64>().sqrt());
                }
            }
        }
        // pad so nearest nodes of the extreme differences stay inside the section
        let mut env = Envelope::zeros(dim, h, radius + h * (dim as f64).sqrt())?;
        let mut snap = 0.0f64;
        for i in 0..self.rows.len() {
            for j in 0..self.cols.len() {
                let v = self.entries[(i, j)].norm();
                if v == 0.0 {
                    continue;
                }
                diff(i, j, &mut d);
                let k = env.nearest_node(&d);
                let e: f64 = k.iter().zip(&d).map(|(&ki, x)| (ki as f64 * h - x).powi(2)).sum();
                snap = snap.max(e.sqrt());
                let ok = env.raise(&k, v);
                debug_assert!(ok);
            }
        }
        Ok(MinEnvelope {
            envelope: env,
            snap_error: snap,
        })
    }

    /// `‖min_envelope(A)‖_{W(C_b, L^{p0})}`.
    pub fn cdnorm_estimate(&self, p0: f64) -> Result<f64> {
        check_p0(p0)?;
        if self.entries.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
            return Ok(0.0);
        }
        self.min_envelope()?.amalgam_quasinorm(p0)
    }

    /// Upper bound for `‖A‖_{ℓ^q(Π) → ℓ^q(Λ)}` from the envelope quasi-norm.
    ///
    /// Sampling constant: every grid node within distance `α` of a snapped
    /// difference sees it inside its unit ball, and at most `rel` of them
    /// share a node, so `Σ_λ H(λ−ρ)^{p0} <= rel/(n_α h^D) ‖H‖^{p0}` with
    /// `n_α` the number of nodes in the closed `α`-ball.
    pub fn operator_norm_bound(&self, q: f64, p0: f64) -> Result<NormBound> {
        check_p0(p0)?;
        check_exponent(q)?;
        if q < p0 {
            return Err(CdError::param(format!("q = {q} below p0 = {p0}")));
        }
        if self.entries.iter().all(|z| *z == Complex64::new(0.0, 0.0)) {
            return Ok(NormBound {
                bound: 0.0,
                envelope_norm: 0.0,
                c_rows: 0.0,
                c_cols: 0.0,
            });
        }
        let me = self.min_envelope_with(None)?;
        let h = me.envelope.step();
        let dim = self.rows.dim();
        let alpha = 0.5f64.min(0.99 * (1.0 - me.snap_error));
        if alpha <= 0.0 {
            return Err(CdError::Precondition("grid too coarse for the sampling bound".into()));
        }
        let m = (alpha / h + 1e-9).floor() as i64;
        let mut n_alpha = 0usize;
        let mut k = vec![-m; dim];
        'odo: loop {
            let n2: f64 = k.iter().map(|&x| (x as f64 * h).powi(2)).sum();
            if n2.sqrt() <= alpha + 1e-12 {
                n_alpha += 1;
            }
            let mut ax = dim;
            loop {
                if ax == 0 {
                    break 'odo;
                }
                ax -= 1;
                if k[ax] < m {
                    k[ax] += 1;
                    break;
                }
                k[ax] = -m;
            }
        }
        let cell = n_alpha as f64 * h.powi(dim as i32);
        let c_of = |ps: &PointSet| pow_abs(ps.relsep_bracket().upper as f64 / cell, 1.0 / p0);
        let (c_rows, c_cols) = (c_of(&self.rows), c_of(&self.cols));
        let hn = me.envelope.amalgam_quasinorm(p0)?;
        let bound = if q <= 1.0 {
            c_rows * hn
        } else {
            let a = recip_exponent(conjugate_exponent(q));
            let b = recip_exponent(q);
            pow_abs(c_cols, a) * pow_abs(c_rows, b) * hn
        };
        Ok(NormBound {
            bound,
            envelope_norm: hn,
            c_rows,
            c_cols,
        })
    }

    /// Exact `‖A‖_{q→q}` for `q <= 1`, `q = 2` and `q = ∞`.
    pub fn operator_norm_exact(&self, q: f64) -> Result<Option<f64>> {
        check_exponent(q)?;
        let a = &self.entries;
        Ok(if q <= 1.0 {
            Some(
                (0..a.ncols())
                    .into_par_iter()
                    .map(|j| lp_norm(a.column(j).as_slice(), q))
                    .reduce(|| 0.0, f64::max),
            )
        } else if q == 2.0 {
            Some(linalg::sigma_extremes(a)?.1)
        } else if q.is_infinite() {
            Some(self.max_row_sum)
        } else {
            None
        })
    }

    /// Best observed `‖Ab‖_q / ‖b‖_q` over random vectors and their local
    /// refinements; a lower estimate of the operator norm.
    pub fn operator_norm_search(&self, q: f64, trials: usize, rng: &mut impl Rng) -> f64 {
        let n = self.cols.len();
        let mut best = 0.0f64;
        for _ in 0..trials {
            let b: Vec<Complex64> = (0..n)
                .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
                .collect();
            let nb = lp_norm(&b, q);
            if nb > 0.0 {
                best = best.max(lp_norm(&self.apply_slice(&b), q) / nb);
            }
        }
        best
    }

    /// Writes nonzero entries as `row,col,re,im`.
    pub fn write_csv(&self, w: impl Write) -> Result<()> {
        let mut wr = csv::Writer::from_writer(w);
        wr.write_record(["row", "col", "re", "im"])?;
        for j in 0..self.entries.ncols() {
            for i in 0..self.entries.nrows() {
                let z = self.entries[(i, j)];
                if z.re != 0.0 || z.im != 0.0 {
                    wr.write_record(&[i.to_string(), j.to_string(), format!("{:e}", z.re), format!("{:e}", z.im)])?;
                }
            }
        }
        wr.flush()?;
        Ok(())
    }

    pub fn read_csv(rows: Arc<PointSet>, cols: Arc<PointSet>, r: impl Read) -> Result<Self> {
        let mut m = CMat::zeros(rows.len(), cols.len());
        let mut rd = csv::Reader::from_reader(r);
        for rec in rd.deserialize() {
            let (i, j, re, im): (usize, usize, f64, f64) = rec?;
            if i >= rows.len() || j >= cols.len() {
                return Err(CdError::Parse(format!("entry ({i}, {j}) outside the index sets")));
            }
            m[(i, j)] = Complex64::new(re, im);
        }
        Self::new(rows, cols, m)
    }
}

fn check_p0(p0: f64) -> Result<()> {
    if p0 > 0.0 && p0 <= 1.0 {
        Ok(())
    } else {
        Err(CdError::param(format!("p0 must lie in (0, 1], got {p0}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointset::{enumerate, RectangularLattice};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zsec(n: f64) -> Arc<PointSet> {
        Arc::new(enumerate(&RectangularLattice::integer(1, n).unwrap()).unwrap())
    }

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn apply_examples() {
        let s = zsec(3.0);
        let id = CDMatrix::identity(s.clone());
        let b = Seq::new(s.clone(), (0..7).map(|i| Complex64::new(i as f64, 1.0)).collect()).unwrap();
        assert_eq!(id.apply(&b).unwrap().values(), b.values());
        let mut m = CMat::zeros(7, 7);
        m[(2, 5)] = c(2.0);
        let a = CDMatrix::new(s.clone(), s.clone(), m).unwrap();
        let out = a.apply(&Seq::delta(s.clone(), 5)).unwrap();
        assert_eq!(out.values()[2], c(2.0));
        assert_eq!(out.values().iter().filter(|z| z.norm() > 0.0).count(), 1);
        let short = Seq::zeros(zsec(1.0));
        assert!(a.apply(&short).is_err());
    }

    #[test]
    fn schur_examples() {
        let s = zsec(2.0);
        assert_eq!(CDMatrix::identity(s.clone()).schur_norm(), 2.0);
        let ones = CDMatrix::new(s.clone(), s.clone(), CMat::from_element(5, 5, c(1.0))).unwrap();
        assert_eq!(ones.schur_norm(), 10.0);
        let three = zsec(1.0);
        let mut d = CMat::zeros(3, 3);
        for i in 0..3 {
            d[(i, i)] = c(i as f64 + 1.0);
        }
        assert_eq!(CDMatrix::new(three.clone(), three, d).unwrap().schur_norm(), 6.0);
    }

    #[test]
    fn sp_examples() {
        let s = zsec(2.0);
        let id = CDMatrix::identity(s);
        for p in [0.2, 0.5, 1.0] {
            assert_eq!(id.sp_norm(p).unwrap(), 1.0);
        }
        assert!(id.sp_norm(1.5).is_err());
        let two = Arc::new(PointSet::from_points(1, &[vec![0.0], vec![1.0]]).unwrap());
        let one = Arc::new(PointSet::from_points(1, &[vec![0.0]]).unwrap());
        let col = CDMatrix::new(two, one, CMat::from_element(2, 1, c(1.0))).unwrap();
        assert!((col.sp_norm(0.5).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn envelope_examples() {
        let s = zsec(5.0);
        let e = CDMatrix::identity(s.clone()).min_envelope().unwrap();
        assert_eq!(e.get(&[0]), 1.0);
        assert_eq!(e.nonzero().count(), 1);
        let t = CDMatrix::toeplitz(s, |d| c((-d[0].abs()).exp())).unwrap();
        let e = t.min_envelope().unwrap();
        for k in -10i64..=10 {
            assert!((e.get(&[k]) - (-(k.abs() as f64)).exp()).abs() < 1e-15);
        }
    }

    #[test]
    fn cdnorm_identity_is_stable_in_n() {
        let vals: Vec<f64> = [4.0, 8.0, 16.0]
            .iter()
            .map(|&n| CDMatrix::identity(zsec(n)).cdnorm_estimate(0.5).unwrap())
            .collect();
        assert!(vals.iter().all(|v| (v - vals[0]).abs() < 1e-12));
        let z = CDMatrix::zeros(zsec(2.0), zsec(2.0)).unwrap();
        assert_eq!(z.cdnorm_estimate(0.5).unwrap(), 0.0);
    }

    #[test]
    fn bounds_dominate_exact_norms() {
        let s = zsec(20.0);
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let m = CMat::from_fn(41, 41, |i, j| {
            let d = (i as f64 - j as f64).abs();
            Complex64::from_polar(rng.gen::<f64>() * (-0.7 * d).exp(), rng.gen::<f64>() * 6.28)
        });
        let a = CDMatrix::new(s.clone(), s.clone(), m).unwrap();
        for q in [0.5, 1.0, 2.0, f64::INFINITY] {
            let exact = a.operator_norm_exact(q).unwrap().unwrap();
            let b = a.operator_norm_bound(q, 0.5).unwrap().bound;
            assert!(exact <= b * (1.0 + 1e-12), "q={q}: {exact} > {b}");
        }
        let id = CDMatrix::identity(s);
        assert!(id.operator_norm_bound(2.0, 0.5).unwrap().bound >= 1.0);
        assert!(id.operator_norm_bound(0.3, 0.5).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let s = zsec(3.0);
        let t = CDMatrix::toeplitz(s.clone(), |d| Complex64::new(d[0], -d[0] * 0.5)).unwrap();
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let back = CDMatrix::read_csv(s.clone(), s, &buf[..]).unwrap();
        assert_eq!(back.entries(), t.entries());
    }
}
