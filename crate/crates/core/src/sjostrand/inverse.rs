use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::commutator::{sweep_eps, EpsSweep, VTable};
use super::pou::{cutoff, PartitionOfUnity};
use crate::cdmatrix::CDMatrix;
use crate::envelopes::Envelope;
use crate::error::{CdError, Result};
use crate::linalg;
use crate::sequences::pow_abs;

#[derive(Debug, Clone, Copy)]
pub struct NeumannOptions {
    pub sweep: EpsSweep,
    /// Fixed ε instead of a sweep.
    pub eps: Option<f64>,
    /// Stop summing powers once the S−1 increment drops below this.
    pub tol: f64,
    pub max_terms: usize,
}

impl Default for NeumannOptions {
    fn default() -> Self {
        Self {
            sweep: EpsSweep::default(),
            eps: None,
            tol: 1e-10,
            max_terms: 10_000,
        }
    }
}

/// Envelope for `A^{-1}` built from the Neumann series of `Ṽ^ε`.
///
/// With `W` the envelope of `I + W̃` over block differences,
/// `|b_{ρλ}|^{p0} <= H̃(ρ − λ)` where
/// `H̃(x) = C0^{-p0} c^{-1} Σ_l W(l) ψ(εx − l)`, `c = min_ρ max_k φ^ε_k(ρ)^{p0}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InverseEnvelope {
    pub dim: usize,
    pub eps: f64,
    pub p: f64,
    pub p0: f64,
    pub c0: f64,
    pub k_constant: f64,
    /// `‖Ṽ^ε‖_{S−1}`.
    pub budget: f64,
    pub terms: usize,
    /// Bound on every entry of the discarded tail of the series.
    pub tail_bound: f64,
    /// Lower bound on `max_k φ^ε_k(ρ)^{p0}` over the column set.
    pub c_min: f64,
    /// Block-difference envelope `W(l)` of `I + W̃`.
    pub w: Vec<(Vec<i64>, f64)>,
    pub eps_trace: Vec<(f64, f64)>,
}

impl InverseEnvelope {
    fn scale(&self) -> f64 {
        pow_abs(self.c0, -self.p0) / self.c_min
    }

    /// `H(x) = C0^{-p0} c^{-1} Σ_{|l − εx| < 4} W(l)`.
    pub fn h(&self, x: &[f64]) -> f64 {
        let s: f64 = self
            .w
            .iter()
            .filter(|(l, _)| dist(l, x, self.eps) < 4.0)
            .map(|(_, v)| v)
            .sum();
        s * self.scale()
    }

    /// Smoothed envelope `H̃ >= H`.
    pub fn h_tilde(&self, x: &[f64]) -> f64 {
        let mut y = vec![0.0; x.len()];
        let s: f64 = self
            .w
            .iter()
            .map(|(l, v)| {
                for ((yi, xi), li) in y.iter_mut().zip(x).zip(l) {
                    *yi = self.eps * xi - *li as f64;
                }
                let c = cutoff(&y);
                if c == 0.0 {
                    0.0
                } else {
                    v * c
                }
            })
            .sum();
        s * self.scale()
    }

    /// Entry bound `|b_{ρλ}| <= H̃(ρ − λ)^{1/p0}`.
    pub fn entry_bound(&self, x: &[f64]) -> f64 {
        pow_abs(self.h_tilde(x), 1.0 / self.p0)
    }

    /// `H̃^{1/p0}` on a grid covering its support.
    pub fn to_envelope(&self, step: f64) -> Result<Envelope> {
        let reach = self
            .w
            .iter()
            .map(|(l, _)| l.iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt())
            .fold(0.0, f64::max);
        let radius = (reach + 5.0) / self.eps;
        Envelope::from_fn(self.dim, step, radius, |x| self.entry_bound(x))
    }
}

fn dist(l: &[i64], x: &[f64], eps: f64) -> f64 {
    l.iter()
        .zip(x)
        .map(|(&li, &xi)| (li as f64 - eps * xi).powi(2))
        .sum::<f64>()
        .sqrt()
}

// Ṽ[k][j] = (K V_{j,k})^{r} with r = p0/p (p <= 1) or p0 (p > 1)
fn v_tilde(table: &VTable, k_const: f64, p: f64, p0: f64) -> Vec<f64> {
    let r = if p <= 1.0 { p0 / p } else { p0 };
    let n = table.len();
    let mut out = vec![0.0; n * n];
    for j in 0..n {
        for k in 0..n {
            out[k * n + j] = pow_abs(k_const * table.get(j, k), r);
        }
    }
    out
}

// max column sum of a row-major n×n matrix
fn s1_norm(m: &[f64], n: usize) -> f64 {
    (0..n).map(|j| (0..n).map(|k| m[k * n + j]).sum::<f64>()).fold(0.0, f64::max)
}

/// Builds the inverse envelope of `A` from a lower bound `‖Ac‖_p >= C0 ‖c‖_p`.
pub fn neumann_inverse_envelope(a: &CDMatrix, p: f64, p0: f64, c0: f64, opts: &NeumannOptions) -> Result<InverseEnvelope> {
    if !(p0 > 0.0 && p0 <= 1.0) {
        return Err(CdError::param(format!("p0 must lie in (0, 1], got {p0}")));
    }
    if !(p >= p0) {
        return Err(CdError::param(format!("p = {p} below p0 = {p0}")));
    }
    if !(c0 > 0.0 && c0.is_finite()) {
        return Err(CdError::param(format!("C0 must be positive, got {c0}")));
    }
    let dim = a.rows().dim();
    let normalized = a.scaled(1.0 / c0);
    let build = |eps: f64| -> Result<(VTable, f64, Vec<f64>, f64)> {
        let pou = PartitionOfUnity::new(dim, eps)?;
        let k = pou.k_constant(p);
        let t = VTable::compute(&normalized, &pou, p)?;
        let vt = v_tilde(&t, k, p, p0);
        let b = s1_norm(&vt, t.len());
        Ok((t, k, vt, b))
    };
    let (eps, trace) = match opts.eps {
        Some(e) => (e, Vec::new()),
        None => {
            let choice = sweep_eps(&opts.sweep, |e| Ok(build(e)?.3))?;
            (choice.eps, choice.trace)
        }
    };
    let (table, k_const, vt, budget) = build(eps)?;
    if budget > 0.5 {
        return Err(CdError::BudgetExceeded { budget });
    }
    let n = table.len();

    // W̃ = Σ_{m>=1} Ṽ^m, summed until the S−1 increment is below tol
    let mut total = vt.clone();
    let mut power = vt.clone();
    let mut terms = 1;
    let mut last_inc = s1_norm(&power, n);
    while last_inc >= opts.tol && terms < opts.max_terms {
        let mut next = vec![0.0; n * n];
        for r in 0..n {
            for m in 0..n {
                let x = power[r * n + m];
                if x == 0.0 {
                    continue;
                }
                let src = &vt[m * n..(m + 1) * n];
                let dst = &mut next[r * n..(r + 1) * n];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += x * s;
                }
            }
        }
        power = next;
        for (t, x) in total.iter_mut().zip(&power) {
            *t += x;
        }
        terms += 1;
        last_inc = s1_norm(&power, n);
    }
    // every entry of the remaining tail is at most its S−1 norm
    let tail_bound = if budget > 0.0 && last_inc > 0.0 {
        last_inc * budget / (1.0 - budget)
    } else {
        0.0
    };

    let mut w: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    for (ki, k) in table.ks.iter().enumerate() {
        for (ji, j) in table.ks.iter().enumerate() {
            let d: Vec<i64> = k.iter().zip(j).map(|(a, b)| a - b).collect();
            let mut v = total[ki * n + ji] + tail_bound;
            if ki == ji {
                v += 1.0;
            }
            let e = w.entry(d).or_insert(0.0);
            *e = e.max(v);
        }
    }
    let pou = PartitionOfUnity::new(dim, eps)?;
    let c_min = a
        .cols()
        .iter()
        .map(|x| pou.active_ks(x).iter().map(|k| pou.phi_k(k, x)).fold(0.0, f64::max))
        .fold(f64::INFINITY, f64::min);
    Ok(InverseEnvelope {
        dim,
        eps,
        p,
        p0,
        c0,
        k_constant: k_const,
        budget,
        terms,
        tail_bound,
        c_min: pow_abs(c_min, p0),
        w: w.into_iter().collect(),
        eps_trace: trace,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VerifyReport {
    pub condition: f64,
    /// Condition number too large for the entrywise check to mean anything.
    pub inconclusive: bool,
    pub interior_pairs: usize,
    pub violations: usize,
    /// Largest `|b_{ρλ}| / H̃(ρ − λ)^{1/p0}` on the interior block.
    pub max_ratio: f64,
}

/// Largest condition number for which the entrywise check is trusted.
pub const CONDITION_LIMIT: f64 = 1e8;

/// Inverts the section and checks `|b_{ρλ}| <= H̃(ρ − λ)^{1/p0}` on pairs
/// with both points in the inner half of the truncation radius.
pub fn verify_inverse_envelope(a: &CDMatrix, env: &InverseEnvelope) -> Result<VerifyReport> {
    let condition = linalg::condition_number(a.entries())?;
    let inv = linalg::inverse(a.entries()).map_err(|_| CdError::Singular { condition })?;
    let radius = |s: &crate::pointset::PointSet| (0..s.len()).map(|i| s.norm(i)).fold(0.0, f64::max);
    let (r_rows, r_cols) = (radius(a.rows()), radius(a.cols()));
    let inner_rows: Vec<usize> = (0..a.rows().len()).filter(|&i| a.rows().norm(i) <= 0.5 * r_rows + 1e-12).collect();
    let inner_cols: Vec<usize> = (0..a.cols().len()).filter(|&i| a.cols().norm(i) <= 0.5 * r_cols + 1e-12).collect();
    let mut cache: BTreeMap<Vec<i64>, f64> = BTreeMap::new();
    let (mut pairs, mut violations, mut max_ratio) = (0usize, 0usize, 0.0f64);
    let dim = a.rows().dim();
    let mut d = vec![0.0; dim];
    // B = A^{-1} is indexed by (Π, Λ)
    for &c in &inner_cols {
        for &r in &inner_rows {
            let rho = a.cols().point(c);
            let lam = a.rows().point(r);
            for ax in 0..dim {
                d[ax] = rho[ax] - lam[ax];
            }
            let key: Vec<i64> = d.iter().map(|v| (v * 1e9).round() as i64).collect();
            let bound = *cache.entry(key).or_insert_with(|| env.entry_bound(&d));
            let b = inv[(c, r)].norm();
            pairs += 1;
            let ratio = if bound > 0.0 { b / bound } else if b > 0.0 { f64::INFINITY } else { 0.0 };
            max_ratio = max_ratio.max(ratio);
            if b > bound * (1.0 + 1e-9) {
                violations += 1;
            }
        }
    }
    Ok(VerifyReport {
        condition,
        inconclusive: !(condition <= CONDITION_LIMIT),
        interior_pairs: pairs,
        violations,
        max_ratio,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointset::{enumerate, PointSet, RectangularLattice};
    use num_complex::Complex64;
    use std::sync::Arc;

    fn zsec(n: f64) -> Arc<PointSet> {
        Arc::new(enumerate(&RectangularLattice::integer(1, n).unwrap()).unwrap())
    }

    fn test_instance(n: f64) -> CDMatrix {
        let s = zsec(n);
        let t = CDMatrix::toeplitz(s, |d| Complex64::new(0.1 * (-d[0].abs()).exp(), 0.0)).unwrap();
        let e = t.entries() + linalg::identity(t.shape().0);
        t.with_entries(e).unwrap()
    }

    #[test]
    fn identity_has_trivial_series() {
        let a = CDMatrix::identity(zsec(6.0));
        let env = neumann_inverse_envelope(&a, 2.0, 0.5, 1.0, &NeumannOptions::default()).unwrap();
        assert_eq!(env.budget, 0.0);
        assert!(env.w.iter().all(|(l, v)| if l.iter().all(|&x| x == 0) { *v == 1.0 } else { *v == 0.0 }));
        let rep = verify_inverse_envelope(&a, &env).unwrap();
        assert_eq!(rep.violations, 0);
    }

    #[test]
    fn decaying_instance_passes() {
        let a = test_instance(24.0);
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let c0 = super::super::lower_bound(&a, 1.0, 0, &mut rng).unwrap().value;
        let env = neumann_inverse_envelope(&a, 1.0, 0.5, c0, &NeumannOptions::default()).unwrap();
        assert!(env.budget <= 0.5);
        let rep = verify_inverse_envelope(&a, &env).unwrap();
        assert!(!rep.inconclusive);
        assert_eq!(rep.violations, 0, "{rep:?}");
        let h = env.to_envelope(0.25).unwrap();
        assert!(h.amalgam_quasinorm(0.5).unwrap().is_finite());
    }
}
