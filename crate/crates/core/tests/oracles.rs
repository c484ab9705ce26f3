//! Closed-form checks for the time-frequency layer and small matrix facts.

use std::sync::Arc;

use cdspec::gabor::{modulation_quasinorm, stft, tf_shift, GaborSystem, Grid, SampledFunction};
use cdspec::weyl::{self, SampledSymbol, INTERIOR};
use cdspec::{enumerate, CDMatrix, RectangularLattice, Seq};
use num_complex::Complex64;

fn grid() -> Grid {
    Grid::new(1.0 / 8.0, 8.0).unwrap()
}

#[test]
fn gaussian_ambiguity_magnitude() {
    let g = SampledFunction::gaussian(grid());
    let v = stft(&g, &g, 1, 1).unwrap();
    let sg = *v.symbol_grid();
    let mut worst: f64 = 0.0;
    for i in 0..sg.nx {
        for m in 0..sg.nxi {
            let (x, xi) = (sg.x(i), sg.xi(m));
            if x.abs() > 4.0 || xi.abs() > 3.0 {
                continue;
            }
            let want = (-std::f64::consts::PI * (x * x + xi * xi) / 2.0).exp();
            worst = worst.max((v.get(i, m).norm() - want).abs());
        }
    }
    assert!(worst < 1e-10, "{worst}");
}

#[test]
fn stft_covariance() {
    let gr = grid();
    let g = SampledFunction::gaussian(gr);
    let f = SampledFunction::hermite(gr, 3);
    let (s, m0) = (12usize, 5usize);
    let w = (s as f64 * gr.step(), m0 as f64 / gr.period());
    let shifted = tf_shift(&f, w.0, w.1);
    assert!(shifted.snap_offset.abs() < 1e-12);
    let a = stft(&shifted.function, &g, 1, 1).unwrap();
    let b = stft(&f, &g, 1, 1).unwrap();
    let n = gr.len();
    let mut worst: f64 = 0.0;
    for i in 0..n {
        for m in 0..n {
            let lhs = a.get(i, m).norm();
            let rhs = b.get((i + n - s) % n, (m + n - m0) % n).norm();
            worst = worst.max((lhs - rhs).abs());
        }
    }
    assert!(worst < 1e-12, "{worst}");
}

#[test]
fn modulation_norm_two_two_is_l2() {
    let gr = grid();
    let g = SampledFunction::gaussian(gr);
    for n in 0..4 {
        let f = SampledFunction::hermite(gr, n);
        let m = modulation_quasinorm(&f, &g, 2.0, 2.0).unwrap();
        assert!((m - f.norm() * g.norm()).abs() < 1e-10, "{n}: {m} vs {}", f.norm());
    }
}

#[test]
fn hermite_functions_are_orthonormal() {
    let gr = grid();
    let hs: Vec<_> = (0..6).map(|n| SampledFunction::hermite(gr, n)).collect();
    for (i, a) in hs.iter().enumerate() {
        for (j, b) in hs.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((a.inner(b).unwrap() - want).norm() < 1e-10, "{i} {j}");
        }
    }
}

#[test]
fn fourier_of_gaussian_is_gaussian() {
    let g = SampledFunction::gaussian(grid());
    let gr = *g.grid();
    let hat = g.fourier();
    for (m, z) in hat.iter().enumerate() {
        let xi = gr.xi(m);
        let want = 2f64.powf(0.25) * (-std::f64::consts::PI * xi * xi).exp();
        assert!((z - want).norm() < 1e-10, "{m}");
    }
    let back = SampledFunction::from_fourier(gr, &hat).unwrap();
    assert!(back.sub(&g).unwrap().norm() < 1e-12);
}

#[test]
fn wigner_marginal_recovers_intensity() {
    let gr = grid();
    let f = SampledFunction::hermite(gr, 2);
    let w = weyl::wigner(&f, &f).unwrap();
    let sg = *w.symbol_grid();
    for k in gr.interior(0.5) {
        let c = 2 * k;
        let marg: f64 = (0..sg.nxi).map(|m| w.get(c, m).re).sum::<f64>() * sg.dxi;
        assert!((marg - f.samples()[k].norm_sqr()).abs() < 1e-10, "{k}");
    }
}

#[test]
fn symbol_one_is_identity_and_zero_kills() {
    let gr = grid();
    let f = SampledFunction::hermite(gr, 4);
    let one = SampledSymbol::constant(gr, Complex64::new(1.0, 0.0));
    assert!(weyl::weyl_apply(&one, &f).unwrap().sub(&f).unwrap().norm() < 1e-12);
    let zero = SampledSymbol::constant(gr, Complex64::new(0.0, 0.0));
    assert!(weyl::weyl_apply(&zero, &f).unwrap().norm() < 1e-15);
    let kn = weyl::weyl_to_kn(&one).unwrap();
    assert!(weyl::kn_apply(&kn, &f).unwrap().sub(&f).unwrap().norm() < 1e-12);
}

#[test]
fn gabor_matrix_projection_identities() {
    let gr = Grid::new(1.0 / 8.0, 4.0).unwrap();
    let tight = GaborSystem::new(&SampledFunction::gaussian(gr), 0.5, 0.5).unwrap().tight_system().unwrap();
    assert!(tight.is_tight());
    let a = SampledSymbol::from_real_fn(gr, |x, xi| 1.0 + 0.3 * (-std::f64::consts::PI * (x * x + xi * xi)).exp());
    let b = weyl::gabor_matrix(&a, &tight).unwrap();
    let (p, m) = (b.p.entries(), b.m.entries());
    let scale = m.norm();
    assert!((p * p - p).norm() < 1e-10 * p.norm());
    assert!((p * m - m).norm() < 1e-10 * scale);
    assert!((m * p - m).norm() < 1e-10 * scale);
    // hGMG^H gives back the Weyl operator.
    let op = b.operator_of(&b.m);
    let k = weyl::weyl_operator(&a).unwrap();
    assert!((op - k).norm() < 1e-10 * scale);
}

#[test]
fn gabor_matrix_refuses_non_tight_frame() {
    let gr = Grid::new(1.0 / 8.0, 4.0).unwrap();
    let sys = GaborSystem::new(&SampledFunction::gaussian(gr), 0.5, 0.5).unwrap();
    let a = SampledSymbol::constant(gr, Complex64::new(1.0, 0.0));
    assert!(matches!(weyl::gabor_matrix(&a, &sys), Err(cdspec::CdError::NotTight { .. })));
}

#[test]
fn critical_density_gaussian_is_not_a_frame() {
    let gr = Grid::new(1.0 / 8.0, 4.0).unwrap();
    let sys = GaborSystem::new(&SampledFunction::gaussian(gr), 1.0, 1.0).unwrap();
    assert!(!sys.is_frame());
    assert!(matches!(sys.require_frame(), Err(cdspec::CdError::NotAFrame { .. })));
}

#[test]
fn interior_window_matches_weyl_operator_on_hermite() {
    let gr = grid();
    let a = SampledSymbol::from_real_fn(gr, |x, xi| 1.0 + 0.5 * (-(x * x + xi * xi)).exp());
    let k = weyl::weyl_operator(&a).unwrap();
    let f = SampledFunction::hermite(gr, 1);
    let v = weyl::weyl_apply(&a, &f).unwrap();
    let dense: Vec<Complex64> = (0..gr.len()).map(|i| (0..gr.len()).map(|j| k[(i, j)] * f.samples()[j]).sum()).collect();
    let w = SampledFunction::new(gr, dense).unwrap();
    assert!(w.sub(&v).unwrap().interior_norm(INTERIOR) < 1e-12);
}

#[test]
fn identity_matrix_facts() {
    let s = Arc::new(enumerate(&RectangularLattice::integer(2, 4.0).unwrap()).unwrap());
    let id = CDMatrix::identity(s.clone());
    let x = Seq::from_real(s.clone(), &(0..s.len()).map(|i| i as f64 - 3.0).collect::<Vec<_>>()).unwrap();
    assert_eq!(id.apply(&x).unwrap().values(), x.values());
    for p in [0.3, 0.5, 1.0, 2.0, f64::INFINITY] {
        assert!((id.schur_test_bound(p) - 1.0).abs() < 1e-12);
    }
    assert!(id.cdnorm_estimate(0.5).unwrap() >= 1.0 - 1e-12);
}
