//! Partition-of-unity localization, commutator estimates, stability
//! transfer across ℓ^p and explicit envelopes for inverses.

mod commutator;
mod inverse;
mod pou;

pub use commutator::{budget, budget_kind, choose_eps, commutator_matrix, sweep_eps, v_eps, BudgetKind, EpsChoice, EpsSweep, VTable};
pub use inverse::{neumann_inverse_envelope, verify_inverse_envelope, InverseEnvelope, NeumannOptions, VerifyReport};
pub use pou::{bump_1d, cutoff, mollifier_cdf, PartitionOfUnity};

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::cdmatrix::CDMatrix;
use crate::error::{CdError, Result};
use crate::linalg;
use crate::sequences::{check_exponent, lp_norm, pow_abs};

/// How a lower bound `inf ‖Ac‖_p / ‖c‖_p` was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LowerBoundMethod {
    /// Smallest singular value.
    SingularValue,
    /// `1 / ‖A^{-1}‖_{p→p}`, exact for `p <= 1` and `p = ∞`.
    InverseNorm,
    /// Best value found by random search; an upper estimate of the infimum.
    RandomSearch,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LowerBound {
    pub value: f64,
    pub method: LowerBoundMethod,
}

/// Lower bound constant of `A` on `ℓ^p`, exact where a closed form exists.
pub fn lower_bound(a: &CDMatrix, p: f64, starts: usize, rng: &mut impl Rng) -> Result<LowerBound> {
    check_exponent(p)?;
    let (m, n) = a.shape();
    if p == 2.0 {
        let sv = linalg::singular_values(a.entries());
        let value = if m < n { 0.0 } else { sv.last().copied().unwrap_or(0.0) };
        return Ok(LowerBound {
            value,
            method: LowerBoundMethod::SingularValue,
        });
    }
    if m == n && (p <= 1.0 || p.is_infinite()) {
        if let Ok(inv) = linalg::inverse(a.entries()) {
            let norm = if p <= 1.0 {
                (0..n).map(|j| lp_norm(inv.column(j).as_slice(), p)).fold(0.0, f64::max)
            } else {
                (0..n).map(|i| inv.row(i).iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
            };
            return Ok(LowerBound {
                value: 1.0 / norm,
                method: LowerBoundMethod::InverseNorm,
            });
        }
    }
    Ok(LowerBound {
        value: lower_bound_search(a, p, starts, rng),
        method: LowerBoundMethod::RandomSearch,
    })
}

/// Multi-start random search for `inf ‖Ac‖_p / ‖c‖_p` with a short local
/// refinement per start. Never below the true infimum.
pub fn lower_bound_search(a: &CDMatrix, p: f64, starts: usize, rng: &mut impl Rng) -> f64 {
    let n = a.cols().len();
    if n == 0 {
        return f64::INFINITY;
    }
    let ratio = |c: &[Complex64]| {
        let nc = lp_norm(c, p);
        if nc == 0.0 {
            f64::INFINITY
        } else {
            lp_norm(&a.apply_slice(c), p) / nc
        }
    };
    let mut best = f64::INFINITY;
    for s in 0..starts {
        let mut c = vec![Complex64::new(0.0, 0.0); n];
        match s % 3 {
            0 => c.iter_mut().for_each(|z| *z = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)),
            1 => {
                let hot = 1 + rng.gen_range(0..n.min(4));
                for _ in 0..hot {
                    c[rng.gen_range(0..n)] = Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
                }
            }
            _ => {
                let centre = rng.gen_range(0..n) as f64;
                let width = 1.0 + rng.gen::<f64>() * (n as f64 / 4.0);
                let freq = rng.gen::<f64>() * std::f64::consts::PI;
                for (i, z) in c.iter_mut().enumerate() {
                    let t = (i as f64 - centre) / width;
                    *z = Complex64::from_polar((-t * t).exp(), freq * i as f64);
                }
            }
        }
        let mut r = ratio(&c);
        let mut sigma = 0.3;
        for _ in 0..20 {
            let scale = lp_norm(&c, 2.0) / (n as f64).sqrt();
            let trial: Vec<Complex64> = c
                .iter()
                .map(|z| z + Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * (sigma * scale))
                .collect();
            let rt = ratio(&trial);
            if rt < r {
                c = trial;
                r = rt;
            } else {
                sigma *= 0.7;
            }
        }
        best = best.min(r);
    }
    best
}

/// Constants relating `Σ_k ‖φ^ε_k c‖_p^q` to `‖c‖_q^q` on the section.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct NormEquivalence {
    /// Lower constant on the column set.
    pub c1: f64,
    /// Upper constant on the row set.
    pub c2: f64,
    pub n_cols: usize,
    pub n_rows: usize,
}

/// `c1 ‖c‖_q^q <= Σ_k ‖φ_k c‖_p^q` on `Π` and `Σ_k ‖φ_k d‖_p^q <= c2 ‖d‖_q^q`
/// on `Λ`. For `q = ∞` the constants bound `‖c‖_∞` and `sup_k ‖φ_k d‖_p`
/// directly.
pub fn norm_equivalence(a: &CDMatrix, pou: &PartitionOfUnity, p: f64, q: f64) -> NormEquivalence {
    let count = |s: &crate::pointset::PointSet| -> usize {
        pou.relevant_ks(&[s])
            .iter()
            .map(|k| s.iter().filter(|x| pou.phi_k(k, x) > 0.0).count())
            .max()
            .unwrap_or(0)
    };
    let (n_cols, n_rows) = (count(a.cols()), count(a.rows()));
    if q.is_infinite() {
        let c1 = a
            .cols()
            .iter()
            .map(|x| pou.active_ks(x).iter().map(|k| pou.phi_k(k, x)).fold(0.0, f64::max))
            .fold(f64::INFINITY, f64::min);
        let c2 = if p.is_infinite() { 1.0 } else { pow_abs(n_rows as f64, 1.0 / p) };
        return NormEquivalence { c1, c2, n_cols, n_rows };
    }
    let s_q = |x: &[f64]| -> f64 { pou.active_ks(x).iter().map(|k| pow_abs(pou.phi_k(k, x), q)).sum() };
    let smin = a.cols().iter().map(s_q).fold(f64::INFINITY, f64::min);
    let smax = a.rows().iter().map(s_q).fold(0.0, f64::max);
    let ratio = if p.is_infinite() { 0.0 } else { q / p };
    let (m, big_m) = if ratio >= 1.0 {
        (1.0, (n_rows.max(1) as f64).powf(ratio - 1.0))
    } else {
        ((n_cols.max(1) as f64).powf(ratio - 1.0), 1.0)
    };
    NormEquivalence {
        c1: m * smin,
        c2: big_m * smax,
        n_cols,
        n_rows,
    }
}

/// Which branch of the transfer argument produced a constant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransferCase {
    /// `q = p`: nothing to transfer.
    Same,
    /// `p >= 1` and `q >= 1`.
    Banach,
    /// `p <= 1` and `q < p`.
    QuasiDown,
    /// `p > 1` and `q < 1`: Banach step to `q = 1`, then down.
    BanachThenDown,
    /// `p < 1` and `q > p`.
    QuasiUp,
}

pub fn transfer_case(p: f64, q: f64) -> TransferCase {
    if q == p {
        TransferCase::Same
    } else if p <= 1.0 && q < p {
        TransferCase::QuasiDown
    } else if p > 1.0 && q < 1.0 {
        TransferCase::BanachThenDown
    } else if p >= 1.0 && q >= 1.0 {
        TransferCase::Banach
    } else {
        TransferCase::QuasiUp
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagnostics {
    pub k_constant: f64,
    pub eta: usize,
    pub norm_equivalence: Option<NormEquivalence>,
    pub budget_kind: Option<BudgetKind>,
    pub budget_trace: Vec<(f64, f64)>,
    pub c0_method: Option<LowerBoundMethod>,
    pub c0_check: Option<f64>,
    /// First leg of a two-step transfer.
    pub first_step: Option<Box<StabilityCertificate>>,
    pub note: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StabilityCertificate {
    #[serde(with = "crate::extreal")]
    pub p_source: f64,
    #[serde(with = "crate::extreal")]
    pub q_target: f64,
    pub case: TransferCase,
    pub c0: f64,
    pub eps_chosen: f64,
    pub schur_budget: f64,
    pub threshold: f64,
    /// Certified `C_q` with `‖Ac‖_q >= C_q ‖c‖_q`.
    pub constant: f64,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, Copy)]
pub struct TransferOptions {
    pub sweep: EpsSweep,
    /// Random-search starts for the precondition check when no exact
    /// lower bound is available.
    pub starts: usize,
    pub seed: u64,
    /// Skip the empirical check of `C0`.
    pub trust_c0: bool,
}

impl Default for TransferOptions {
    fn default() -> Self {
        Self {
            sweep: EpsSweep::default(),
            starts: 1000,
            seed: 0,
            trust_c0: false,
        }
    }
}

/// Transfers a lower bound `‖Ac‖_p >= C0 ‖c‖_p` to `ℓ^q`.
pub fn stability_transfer(a: &CDMatrix, p: f64, c0: f64, q: f64, opts: &TransferOptions) -> Result<StabilityCertificate> {
    check_exponent(p)?;
    check_exponent(q)?;
    if !(c0 > 0.0 && c0.is_finite()) {
        return Err(CdError::param(format!("C0 must be positive, got {c0}")));
    }
    let (mut c0_method, mut c0_check) = (None, None);
    if !opts.trust_c0 {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(opts.seed);
        let lb = lower_bound(a, p, opts.starts, &mut rng)?;
        if lb.value < c0 * (1.0 - 1e-9) {
            return Err(CdError::Precondition(format!(
                "measured lower bound {:.6e} at p = {p} is below C0 = {c0:.6e}",
                lb.value
            )));
        }
        c0_method = Some(lb.method);
        c0_check = Some(lb.value);
    }
    let dim = a.rows().dim();
    let case = transfer_case(p, q);
    let base_diag = |k: f64| Diagnostics {
        k_constant: k,
        eta: PartitionOfUnity::new(dim, 1.0).map(|u| u.covering_number()).unwrap_or(0),
        norm_equivalence: None,
        budget_kind: None,
        budget_trace: Vec::new(),
        c0_method,
        c0_check,
        first_step: None,
        note: String::new(),
    };
    match case {
        TransferCase::Same => Ok(StabilityCertificate {
            p_source: p,
            q_target: q,
            case,
            c0,
            eps_chosen: 1.0,
            schur_budget: 0.0,
            threshold: opts.sweep.threshold,
            constant: c0,
            diagnostics: base_diag(PartitionOfUnity::new(dim, 1.0)?.k_constant(p)),
        }),
        TransferCase::BanachThenDown => {
            let first = stability_transfer(a, p, c0, 1.0, &TransferOptions { trust_c0: true, ..*opts })?;
            let mut second = stability_transfer(a, 1.0, first.constant, q, &TransferOptions { trust_c0: true, ..*opts })?;
            second.p_source = p;
            second.case = case;
            second.c0 = c0;
            second.diagnostics.c0_method = c0_method;
            second.diagnostics.c0_check = c0_check;
            second.diagnostics.first_step = Some(Box::new(first));
            Ok(second)
        }
        _ => {
            let normalized = a.scaled(1.0 / c0);
            let choice = choose_eps(&normalized, p, q, &opts.sweep)?;
            let pou = PartitionOfUnity::new(dim, choice.eps)?;
            let ne = norm_equivalence(a, &pou, p, q);
            let factor = match case {
                TransferCase::QuasiDown => {
                    if q.is_infinite() {
                        unreachable!("q < p <= 1")
                    }
                    pow_abs(0.5, 1.0 / q)
                }
                TransferCase::QuasiUp => pow_abs(0.5, 1.0 / p),
                _ => 0.5,
            };
            let ratio = if q.is_infinite() { ne.c1 / ne.c2 } else { pow_abs(ne.c1 / ne.c2, 1.0 / q) };
            let mut diag = base_diag(pou.k_constant(p));
            diag.norm_equivalence = Some(ne);
            diag.budget_kind = Some(budget_kind(p, q));
            diag.budget_trace = choice.trace.clone();
            Ok(StabilityCertificate {
                p_source: p,
                q_target: q,
                case,
                c0,
                eps_chosen: choice.eps,
                schur_budget: choice.budget,
                threshold: opts.sweep.threshold,
                constant: c0 * factor * ratio,
                diagnostics: diag,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pointset::{enumerate, PointSet, RectangularLattice};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
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
    fn case_dispatch() {
        assert_eq!(transfer_case(2.0, 2.0), TransferCase::Same);
        assert_eq!(transfer_case(2.0, 1.0), TransferCase::Banach);
        assert_eq!(transfer_case(2.0, f64::INFINITY), TransferCase::Banach);
        assert_eq!(transfer_case(2.0, 0.5), TransferCase::BanachThenDown);
        assert_eq!(transfer_case(0.5, 0.3), TransferCase::QuasiDown);
        assert_eq!(transfer_case(0.5, 1.0), TransferCase::QuasiUp);
        assert_eq!(transfer_case(1.0, 0.5), TransferCase::QuasiDown);
    }

    #[test]
    fn identity_certificates() {
        let a = CDMatrix::identity(zsec(8.0));
        for q in [0.3, 0.5, 1.0, 2.0, f64::INFINITY] {
            let c = stability_transfer(&a, 2.0, 1.0, q, &TransferOptions::default()).unwrap();
            assert!(c.constant > 0.0 && c.constant <= 1.0, "q={q}: {}", c.constant);
            assert!(c.schur_budget < 0.5);
        }
    }

    #[test]
    fn lower_bounds_agree_where_exact() {
        let a = test_instance(10.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for p in [0.5, 1.0, f64::INFINITY] {
            let exact = lower_bound(&a, p, 0, &mut rng).unwrap();
            assert_eq!(exact.method, LowerBoundMethod::InverseNorm);
            let search = lower_bound_search(&a, p, 300, &mut rng);
            assert!(search >= exact.value * (1.0 - 1e-12));
        }
    }

    #[test]
    fn precondition_enforced() {
        let a = test_instance(6.0);
        let r = stability_transfer(&a, 2.0, 5.0, 1.0, &TransferOptions::default());
        assert!(matches!(r, Err(CdError::Precondition(_))));
    }

    #[test]
    fn certificate_round_trips_through_json() {
        let a = test_instance(6.0);
        let c = stability_transfer(&a, 2.0, 0.5, f64::INFINITY, &TransferOptions::default()).unwrap();
        let s = serde_json::to_string(&c).unwrap();
        let back: StabilityCertificate = serde_json::from_str(&s).unwrap();
        assert!(back.q_target.is_infinite());
        assert_eq!(back.constant, c.constant);
    }
}
