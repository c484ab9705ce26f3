use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pou::PartitionOfUnity;
use crate::cdmatrix::CDMatrix;
use crate::error::{CdError, Result};
use crate::linalg::CMat;
use crate::sequences::pow_abs;

/// `([A, φ^ε_k] φ^ε_j)_{λρ} = −a_{λρ} φ^ε_j(ρ) (φ^ε_k(λ) − φ^ε_k(ρ))`.
pub fn commutator_matrix(a: &CDMatrix, pou: &PartitionOfUnity, j: &[i64], k: &[i64]) -> CDMatrix {
    let rows = a.rows();
    let cols = a.cols();
    let pk_rows: Vec<f64> = rows.iter().map(|x| pou.phi_k(k, x)).collect();
    let m = CMat::from_fn(rows.len(), cols.len(), |i, c| {
        let rho = cols.point(c);
        let pj = pou.phi_k(j, rho);
        if pj == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        -a.entries()[(i, c)] * (pj * (pk_rows[i] - pou.phi_k(k, rho)))
    });
    a.with_entries(m).expect("same shape")
}

/// `V^{ε,p}_{j,k}`: S−p norm of the commutator for `p <= 1`, Schur norm above.
pub fn v_eps(a: &CDMatrix, pou: &PartitionOfUnity, j: &[i64], k: &[i64], p: f64) -> Result<f64> {
    let c = commutator_matrix(a, pou, j, k);
    if p <= 1.0 {
        c.sp_norm(p)
    } else {
        Ok(c.schur_norm())
    }
}

/// All `V^{ε,p}_{j,k}` over the bumps meeting the index sets.
#[derive(Debug, Clone)]
pub struct VTable {
    pub eps: f64,
    pub p: f64,
    pub ks: Vec<Vec<i64>>,
    /// Row-major `v[j * n + k]`.
    pub v: Vec<f64>,
    /// Largest number of column points in one bump support.
    pub n_cols: usize,
    /// Largest number of row points in one bump support.
    pub n_rows: usize,
}

impl VTable {
    pub fn compute(a: &CDMatrix, pou: &PartitionOfUnity, p: f64) -> Result<VTable> {
        if a.rows().dim() != pou.dim() {
            return Err(CdError::DimensionMismatch(a.rows().dim(), pou.dim()));
        }
        let rows = a.rows();
        let cols = a.cols();
        let ks = pou.relevant_ks(&[rows, cols]);
        let nk = ks.len();
        let (nr, nc) = (rows.len(), cols.len());
        let phi_r: Vec<Vec<f64>> = ks.iter().map(|k| rows.iter().map(|x| pou.phi_k(k, x)).collect()).collect();
        let phi_c: Vec<Vec<f64>> = ks.iter().map(|k| cols.iter().map(|x| pou.phi_k(k, x)).collect()).collect();
        let supp_r: Vec<Vec<usize>> = phi_r.iter().map(|f| (0..nr).filter(|&i| f[i] > 0.0).collect()).collect();
        let supp_c: Vec<Vec<usize>> = phi_c.iter().map(|f| (0..nc).filter(|&i| f[i] > 0.0).collect()).collect();
        let n_rows = supp_r.iter().map(Vec::len).max().unwrap_or(0);
        let n_cols = supp_c.iter().map(Vec::len).max().unwrap_or(0);
        let abs: Vec<f64> = a.entries().iter().map(|z| z.norm()).collect(); // column-major
        let at = |i: usize, c: usize| abs[c * nr + i];

        let v: Vec<f64> = (0..nk)
            .into_par_iter()
            .flat_map_iter(|j| {
                let mut row_acc = vec![0.0f64; nr];
                let mut touched: Vec<usize> = Vec::new();
                let mut out = vec![0.0f64; nk];
                for (k, slot) in out.iter_mut().enumerate() {
                    let mut col_best = 0.0f64;
                    for &rho in &supp_c[j] {
                        let pj = phi_c[j][rho];
                        let pk_rho = phi_c[k][rho];
                        let mut col = 0.0;
                        let visit = |lam: usize, acc: &mut Vec<f64>, touched: &mut Vec<usize>| {
                            let e = at(lam, rho) * pj * (phi_r[k][lam] - pk_rho).abs();
                            if e == 0.0 {
                                return 0.0;
                            }
                            if p > 1.0 {
                                if acc[lam] == 0.0 {
                                    touched.push(lam);
                                }
                                acc[lam] += e;
                                e
                            } else {
                                pow_abs(e, p)
                            }
                        };
                        if pk_rho > 0.0 {
                            for lam in 0..nr {
                                col += visit(lam, &mut row_acc, &mut touched);
                            }
                        } else {
                            for &lam in &supp_r[k] {
                                col += visit(lam, &mut row_acc, &mut touched);
                            }
                        }
                        col_best = col_best.max(col);
                    }
                    *slot = if p > 1.0 {
                        let row_best = touched.iter().map(|&l| row_acc[l]).fold(0.0, f64::max);
                        for &l in &touched {
                            row_acc[l] = 0.0;
                        }
                        touched.clear();
                        col_best + row_best
                    } else {
                        col_best
                    };
                }
                out
            })
            .collect();
        Ok(VTable {
            eps: pou.eps(),
            p,
            ks,
            v,
            n_cols,
            n_rows,
        })
    }

    pub fn len(&self) -> usize {
        self.ks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ks.is_empty()
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.v[j * self.ks.len() + k]
    }

    pub fn max_entry(&self) -> f64 {
        self.v.iter().copied().fold(0.0, f64::max)
    }

    /// `sup_j Σ_k V_{jk}^r`.
    pub fn sup_j_sum_k(&self, r: f64) -> f64 {
        let n = self.ks.len();
        (0..n)
            .map(|j| (0..n).map(|k| pow_abs(self.get(j, k), r)).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `sup_k Σ_j V_{jk}^r`.
    pub fn sup_k_sum_j(&self, r: f64) -> f64 {
        let n = self.ks.len();
        (0..n)
            .map(|k| (0..n).map(|j| pow_abs(self.get(j, k), r)).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Which budget the ε sweep must push below the threshold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetKind {
    /// `K^{q/p} sup_j Σ_k (V^{ε,p})^{q/p}`, used for `p <= 1`, `q < p`.
    Contracting,
    /// `K max(sup_j Σ_k V, sup_k Σ_j V)`, used when `q >= p` or `p, q >= 1`.
    TwoSided,
}

pub fn budget_kind(p: f64, q: f64) -> BudgetKind {
    if p <= 1.0 && q < p {
        BudgetKind::Contracting
    } else {
        BudgetKind::TwoSided
    }
}

/// Budget for the given table; `k_const` is `K` at exponent `p`.
pub fn budget(table: &VTable, k_const: f64, p: f64, q: f64) -> f64 {
    match budget_kind(p, q) {
        BudgetKind::Contracting => {
            let r = q / p;
            pow_abs(k_const, r) * table.sup_j_sum_k(r)
        }
        BudgetKind::TwoSided => k_const * table.sup_j_sum_k(1.0).max(table.sup_k_sum_j(1.0)),
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpsSweep {
    pub threshold: f64,
    pub floor: f64,
}

impl Default for EpsSweep {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            floor: 2f64.powi(-12),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EpsChoice {
    pub eps: f64,
    pub budget: f64,
    pub trace: Vec<(f64, f64)>,
}

/// Halving sweep `ε = 1, 1/2, …` down to the floor; the first ε whose
/// budget is below the threshold wins.
pub fn sweep_eps(opts: &EpsSweep, mut budget_at: impl FnMut(f64) -> Result<f64>) -> Result<EpsChoice> {
    let mut trace = Vec::new();
    let mut eps = 1.0;
    while eps >= opts.floor * (1.0 - 1e-12) {
        let b = budget_at(eps)?;
        trace.push((eps, b));
        if b < opts.threshold {
            return Ok(EpsChoice { eps, budget: b, trace });
        }
        eps *= 0.5;
    }
    let (best_eps, best_budget) = trace
        .iter()
        .copied()
        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap_or(std::cmp::Ordering::Equal))
        .unwrap_or((f64::NAN, f64::NAN));
    Err(CdError::EpsilonSearchFailed {
        best_eps,
        best_budget,
        threshold: opts.threshold,
        trace,
    })
}

/// Chooses ε for a matrix already normalized to `‖c‖_p <= ‖Ac‖_p`.
pub fn choose_eps(a: &CDMatrix, p: f64, q: f64, opts: &EpsSweep) -> Result<EpsChoice> {
    let dim = a.rows().dim();
    sweep_eps(opts, |eps| {
        let pou = PartitionOfUnity::new(dim, eps)?;
        let table = VTable::compute(a, &pou, p)?;
        Ok(budget(&table, pou.k_constant(p), p, q))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointset::{enumerate, PointSet, RectangularLattice};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn zsec(n: f64) -> Arc<PointSet> {
        Arc::new(enumerate(&RectangularLattice::integer(1, n).unwrap()).unwrap())
    }

    #[test]
    fn commutator_vanishes_for_diagonal() {
        let s = zsec(6.0);
        let mut d = CMat::zeros(13, 13);
        for i in 0..13 {
            d[(i, i)] = Complex64::new(i as f64 - 2.0, 1.0);
        }
        let a = CDMatrix::new(s.clone(), s.clone(), d).unwrap();
        let pou = PartitionOfUnity::new(1, 0.5).unwrap();
        for j in -3..=3 {
            for k in -3..=3 {
                let c = commutator_matrix(&a, &pou, &[j], &[k]);
                assert!(c.entries().iter().all(|z| z.norm() == 0.0));
            }
        }
        let t = VTable::compute(&CDMatrix::identity(s), &pou, 0.5).unwrap();
        assert_eq!(t.max_entry(), 0.0);
    }

    #[test]
    fn table_matches_direct_norms() {
        let s = zsec(8.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = s.len();
        let m = CMat::from_fn(n, n, |i, j| {
            let d = (i as f64 - j as f64).abs();
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * (-0.5 * d).exp()
        });
        let a = CDMatrix::new(s.clone(), s, m).unwrap();
        let pou = PartitionOfUnity::new(1, 0.3).unwrap();
        for p in [0.5, 1.0, 2.0] {
            let t = VTable::compute(&a, &pou, p).unwrap();
            for (jj, j) in t.ks.iter().enumerate() {
                for (kk, k) in t.ks.iter().enumerate() {
                    let direct = v_eps(&a, &pou, j, k, p).unwrap();
                    assert!((direct - t.get(jj, kk)).abs() <= 1e-12 * (1.0 + direct), "p={p} j={j:?} k={k:?}");
                }
            }
        }
    }

    #[test]
    fn identity_accepts_first_eps() {
        let a = CDMatrix::identity(zsec(10.0));
        let c = choose_eps(&a, 2.0, 0.5, &EpsSweep::default()).unwrap();
        assert_eq!(c.eps, 1.0);
        assert_eq!(c.budget, 0.0);
    }
}
