use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use crate::error::{CdError, Result};
use crate::pointset::PointSet;
use crate::sequences::{check_exponent, lp_norm, Seq};

const TABLE_INTERVALS: usize = 4096;

// Cumulative distribution of the mollifier exp(-1/(1-4t^2)) on (-1/2, 1/2),
// tabulated with its derivative for cubic Hermite interpolation.
struct MollifierCdf {
    values: Vec<f64>,
    slopes: Vec<f64>,
}

fn mollifier(t: f64) -> f64 {
    let s = 1.0 - 4.0 * t * t;
    if s <= 0.0 {
        0.0
    } else {
        (-1.0 / s).exp()
    }
}

fn cdf_table() -> &'static MollifierCdf {
    static TABLE: OnceLock<MollifierCdf> = OnceLock::new();
    TABLE.get_or_init(|| {
        // 5-point Gauss-Legendre per interval
        const X: [f64; 5] = [
            -0.906_179_845_938_664,
            -0.538_469_310_105_683,
            0.0,
            0.538_469_310_105_683,
            0.906_179_845_938_664,
        ];
        const W: [f64; 5] = [
            0.236_926_885_056_189,
            0.478_628_670_499_366,
            0.568_888_888_888_889,
            0.478_628_670_499_366,
            0.236_926_885_056_189,
        ];
        let n = TABLE_INTERVALS;
        let dt = 1.0 / n as f64;
        let mut values = vec![0.0; n + 1];
        for i in 0..n {
            let mid = -0.5 + (i as f64 + 0.5) * dt;
            let piece: f64 = X.iter().zip(&W).map(|(x, w)| w * mollifier(mid + 0.5 * dt * x)).sum();
            values[i + 1] = values[i] + 0.5 * dt * piece;
        }
        let total = values[n];
        values.iter_mut().for_each(|v| *v /= total);
        let slopes = (0..=n).map(|i| mollifier(-0.5 + i as f64 * dt) / total).collect();
        MollifierCdf { values, slopes }
    })
}

/// CDF of the normalized mollifier: 0 below `-1/2`, 1 above `1/2`.
pub fn mollifier_cdf(t: f64) -> f64 {
    if t <= -0.5 {
        return 0.0;
    }
    if t >= 0.5 {
        return 1.0;
    }
    let tab = cdf_table();
    let n = TABLE_INTERVALS;
    let dt = 1.0 / n as f64;
    let u = (t + 0.5) / dt;
    let i = (u.floor() as usize).min(n - 1);
    let s = u - i as f64;
    let (y0, y1) = (tab.values[i], tab.values[i + 1]);
    let (m0, m1) = (tab.slopes[i] * dt, tab.slopes[i + 1] * dt);
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * y0 + (s3 - 2.0 * s2 + s) * m0 + (-2.0 * s3 + 3.0 * s2) * y1 + (s3 - s2) * m1
}

/// One-dimensional bump: indicator of `[-1/2, 1/2]` convolved with the mollifier.
pub fn bump_1d(x: f64) -> f64 {
    (mollifier_cdf(x + 0.5) - mollifier_cdf(x - 0.5)).clamp(0.0, 1.0)
}

/// Radial cutoff equal to 1 on `|x| <= 4` and 0 on `|x| >= 5`.
pub fn cutoff(x: &[f64]) -> f64 {
    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    1.0 - mollifier_cdf(r - 4.5)
}

/// Partition of unity `φ^ε_k(x) = φ(εx − k)`, `k ∈ Z^D`, with `φ` the
/// tensor product of [`bump_1d`] (support `[-1, 1]^D`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PartitionOfUnity {
    dim: usize,
    eps: f64,
}

impl PartitionOfUnity {
    pub fn new(dim: usize, eps: f64) -> Result<Self> {
        if dim == 0 {
            return Err(CdError::param("dimension must be positive"));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(CdError::param(format!("eps must be positive, got {eps}")));
        }
        Ok(Self { dim, eps })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// Base bump `φ(y)`.
    pub fn phi(&self, y: &[f64]) -> f64 {
        y.iter().map(|&t| bump_1d(t)).product()
    }

    /// `φ^ε_k(x)`.
    pub fn phi_k(&self, k: &[i64], x: &[f64]) -> f64 {
        let mut v = 1.0;
        for (&ki, &xi) in k.iter().zip(x) {
            let t = self.eps * xi - ki as f64;
            if t.abs() >= 1.0 {
                return 0.0;
            }
            v *= bump_1d(t);
        }
        v
    }

    /// Indices `k` with `φ^ε_k(x) ≠ 0`.
    pub fn active_ks(&self, x: &[f64]) -> Vec<Vec<i64>> {
        let ranges: Vec<(i64, i64)> = x
            .iter()
            .map(|&xi| {
                let y = self.eps * xi;
                ((y - 1.0).floor() as i64 + 1, (y + 1.0).ceil() as i64 - 1)
            })
            .collect();
        let mut out = Vec::new();
        for_each_box(&ranges, |k| {
            if self.phi_k(k, x) > 0.0 {
                out.push(k.to_vec());
            }
        });
        out
    }

    /// All `k` whose bump meets some point of `s`, in lexicographic order.
    pub fn relevant_ks(&self, sets: &[&PointSet]) -> Vec<Vec<i64>> {
        let mut lo = vec![i64::MAX; self.dim];
        let mut hi = vec![i64::MIN; self.dim];
        for s in sets {
            for x in s.iter() {
                for ax in 0..self.dim {
                    let y = self.eps * x[ax];
                    lo[ax] = lo[ax].min((y - 1.0).floor() as i64);
                    hi[ax] = hi[ax].max((y + 1.0).ceil() as i64);
                }
            }
        }
        if lo[0] > hi[0] {
            return Vec::new();
        }
        let ranges: Vec<(i64, i64)> = lo.into_iter().zip(hi).collect();
        let mut out = Vec::new();
        for_each_box(&ranges, |k| out.push(k.to_vec()));
        out
    }

    /// `Φ^ε = Σ_k (φ^ε_k)^2` at `x`.
    pub fn big_phi(&self, x: &[f64]) -> f64 {
        self.active_ks(x).iter().map(|k| self.phi_k(k, x).powi(2)).sum()
    }

    /// `K = max_x Φ^ε(x)^{−min(1,p)}`. `Φ^ε` factorizes over axes and is
    /// periodic, so one period of the one-dimensional factor is scanned.
    pub fn k_constant(&self, p: f64) -> f64 {
        let e = p.min(1.0);
        let min_1d = (0..=10_000)
            .map(|i| {
                let y = i as f64 / 10_000.0;
                bump_1d(y).powi(2) + bump_1d(y - 1.0).powi(2)
            })
            .fold(f64::INFINITY, f64::min);
        min_1d.powf(-e * self.dim as f64)
    }

    /// Covering number `η`: most bumps that are nonzero at one point.
    pub fn covering_number(&self) -> usize {
        let per_axis = (0..=10_000)
            .map(|i| {
                let y = i as f64 / 10_000.0;
                (-2i64..=2).filter(|&k| bump_1d(y - k as f64) > 0.0).count()
            })
            .max()
            .unwrap_or(1);
        per_axis.pow(self.dim as u32)
    }

    /// `φ^ε_k c`.
    pub fn multiply_op(&self, k: &[i64], c: &Seq) -> Seq {
        let values = c
            .index()
            .iter()
            .zip(c.values())
            .map(|(x, v)| v * self.phi_k(k, x))
            .collect();
        Seq::new(c.index().clone(), values).expect("same index")
    }

    /// `k ↦ ‖φ^ε_k c‖_p` over the relevant `k`, indexed by those `k`.
    pub fn localized_norm_profile(&self, c: &Seq, p: f64) -> Result<Seq> {
        check_exponent(p)?;
        if c.index().dim() != self.dim {
            return Err(CdError::DimensionMismatch(c.index().dim(), self.dim));
        }
        let ks = self.relevant_ks(&[c.index()]);
        let mut vals = Vec::with_capacity(ks.len());
        let mut buf = vec![Complex64::new(0.0, 0.0); c.len()];
        for k in &ks {
            for ((b, x), v) in buf.iter_mut().zip(c.index().iter()).zip(c.values()) {
                *b = v * self.phi_k(k, x);
            }
            vals.push(Complex64::new(lp_norm(&buf, p), 0.0));
        }
        let pts: Vec<Vec<f64>> = ks.iter().map(|k| k.iter().map(|&x| x as f64).collect()).collect();
        let index = if pts.is_empty() {
            Arc::new(PointSet::from_points(self.dim, &[])?)
        } else {
            Arc::new(PointSet::from_points(self.dim, &pts)?.with_step(1.0)?)
        };
        Seq::new(index, vals)
    }
}

pub(crate) fn for_each_box(ranges: &[(i64, i64)], mut f: impl FnMut(&[i64])) {
    if ranges.iter().any(|(a, b)| a > b) {
        return;
    }
    let mut k: Vec<i64> = ranges.iter().map(|r| r.0).collect();
    loop {
        f(&k);
        let mut ax = k.len();
        loop {
            if ax == 0 {
                return;
            }
            ax -= 1;
            if k[ax] < ranges[ax].1 {
                k[ax] += 1;
                break;
            }
            k[ax] = ranges[ax].0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partition_of_unity_and_bounds() {
        let pou = PartitionOfUnity::new(2, 0.37).unwrap();
        for i in 0..50 {
            let x = [0.731 * i as f64 - 11.0, -0.413 * i as f64 + 3.0];
            let s: f64 = pou.active_ks(&x).iter().map(|k| pou.phi_k(k, &x)).sum();
            assert!((s - 1.0).abs() < 1e-10, "{s}");
        }
        for i in 0..=400 {
            let y = -2.0 + i as f64 / 100.0;
            let v = bump_1d(y);
            assert!((0.0..=1.0).contains(&v));
            if y.abs() >= 1.0 {
                assert_eq!(v, 0.0);
            }
        }
    }

    #[test]
    fn lipschitz_scales_with_eps() {
        // measured slope of the base bump, then check min{1, L ε |x−y|}
        let l = (0..20_000)
            .map(|i| {
                let y = -1.0 + i as f64 * 1e-4;
                (bump_1d(y + 1e-4) - bump_1d(y)).abs() / 1e-4
            })
            .fold(0.0, f64::max);
        let pou = PartitionOfUnity::new(1, 0.25).unwrap();
        for i in 0..200 {
            let x = [i as f64 * 0.05 - 5.0];
            let y = [x[0] + 0.3 * (i % 7) as f64];
            let d = (pou.phi_k(&[0], &x) - pou.phi_k(&[0], &y)).abs();
            assert!(d <= (l * 0.25 * (x[0] - y[0]).abs()).min(1.0) + 1e-12);
        }
    }

    #[test]
    fn constants() {
        let pou = PartitionOfUnity::new(1, 0.5).unwrap();
        assert!((pou.k_constant(2.0) - 2.0).abs() < 1e-6);
        assert!((pou.k_constant(0.5) - 2f64.sqrt()).abs() < 1e-6);
        assert_eq!(pou.covering_number(), 2);
        assert_eq!(PartitionOfUnity::new(2, 0.5).unwrap().covering_number(), 4);
        let c = cutoff(&[4.0]);
        assert_eq!(c, 1.0);
        assert_eq!(cutoff(&[0.0, 4.0]), 1.0);
        assert_eq!(cutoff(&[3.0, 4.0]), 0.0);
        assert_eq!(cutoff(&[5.0]), 0.0);
    }

    #[test]
    fn multiply_and_profile() {
        let pts: Vec<Vec<f64>> = (-6..=6).map(|k| vec![k as f64]).collect();
        let s = Arc::new(PointSet::from_points(1, &pts).unwrap());
        let pou = PartitionOfUnity::new(1, 0.5).unwrap();
        let c = Seq::new(s.clone(), (0..13).map(|i| Complex64::new(i as f64 - 3.0, 0.5)).collect()).unwrap();
        let mut total = Seq::zeros(s.clone());
        for k in pou.relevant_ks(&[&s]) {
            total = total.add(&pou.multiply_op(&k, &c)).unwrap();
        }
        for (a, b) in total.values().iter().zip(c.values()) {
            assert!((a - b).norm() < 1e-12);
        }
        let far = pou.multiply_op(&[40], &c);
        assert!(far.values().iter().all(|z| z.norm() == 0.0));
        let prof = pou.localized_norm_profile(&Seq::zeros(s), 0.5).unwrap();
        assert!(prof.values().iter().all(|z| z.norm() == 0.0));
    }
}
