use std::sync::Arc;

use cdspec::gabor::{tf_shift, Grid, SampledFunction};
use cdspec::weyl::{self, SampledSymbol};
use cdspec::{enumerate, CDMatrix, Envelope, PointSet, RectangularLattice, Seq};
use num_complex::Complex64;
use proptest::prelude::*;

fn line(r: f64) -> Arc<PointSet> {
    Arc::new(enumerate(&RectangularLattice::integer(1, r).unwrap()).unwrap())
}

fn seq(vals: &[(f64, f64)]) -> Seq {
    let s = line(8.0);
    let mut v: Vec<Complex64> = vals.iter().map(|&(a, b)| Complex64::new(a, b)).collect();
    v.resize(s.len(), Complex64::new(0.0, 0.0));
    Seq::new(s, v).unwrap()
}

fn vals() -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-5.0..5.0f64, -5.0..5.0f64), 17)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn p_triangle(a in vals(), b in vals(), p in 0.1..1.0f64) {
        let (a, b) = (seq(&a), seq(&b));
        let lhs = a.add(&b).unwrap().lp_quasinorm(p).unwrap().powf(p);
        let rhs = a.lp_quasinorm(p).unwrap().powf(p) + b.lp_quasinorm(p).unwrap().powf(p);
        prop_assert!(lhs <= rhs * (1.0 + 1e-12));
    }

    #[test]
    fn lp_norms_decrease_in_p(a in vals(), p in 0.1..4.0f64, dq in 0.0..4.0f64) {
        let a = seq(&a);
        let q = p + dq;
        prop_assert!(a.lp_quasinorm(q).unwrap() <= a.lp_quasinorm(p).unwrap() * (1.0 + 1e-12));
        prop_assert!(a.lp_quasinorm(f64::INFINITY).unwrap() <= a.lp_quasinorm(q).unwrap() * (1.0 + 1e-12));
    }

    #[test]
    fn schur_bound_dominates_exact_norm(c in -0.9..0.9f64, g in 0.1..3.0f64, q in prop::sample::select(vec![1.0, 2.0, f64::INFINITY])) {
        let s = line(10.0);
        let a = CDMatrix::toeplitz(s, |d| Complex64::new(c * (-g * d[0].abs()).exp(), 0.3 * c)).unwrap();
        let exact = a.operator_norm_exact(q).unwrap().unwrap();
        prop_assert!(exact <= a.schur_test_bound(q) * (1.0 + 1e-10));
    }

    #[test]
    fn envelope_quasinorm_is_homogeneous(c in 0.1..10.0f64, g in 0.2..2.0f64, p0 in 0.2..1.0f64) {
        let h = Envelope::from_fn(1, 0.25, 6.0, |x| (-g * x[0].abs()).exp()).unwrap();
        let a = h.amalgam_quasinorm(p0).unwrap();
        let b = h.scale(c).unwrap().amalgam_quasinorm(p0).unwrap();
        prop_assert!((b - c * a).abs() <= 1e-10 * b);
    }

    #[test]
    fn tf_shift_is_unitary(n in 0usize..6, k in -20i64..20, m in -20i64..20) {
        let gr = Grid::new(0.125, 4.0).unwrap();
        let f = SampledFunction::hermite(gr, n);
        let s = tf_shift(&f, k as f64 * gr.step(), m as f64 / gr.period());
        prop_assert!((s.function.norm() - f.norm()).abs() < 1e-12);
    }

    #[test]
    fn weyl_apply_is_linear_in_the_symbol(s in 0.1..2.0f64, w in -1.0..1.0f64, n in 0usize..4) {
        let gr = Grid::new(0.125, 4.0).unwrap();
        let f = SampledFunction::hermite(gr, n);
        let a = SampledSymbol::from_real_fn(gr, |x, xi| (-s * (x * x + xi * xi)).exp());
        let b = SampledSymbol::from_real_fn(gr, |x, _| x.cos());
        let sum: Vec<Complex64> = a.values().iter().zip(b.values()).map(|(u, v)| u + v * w).collect();
        let ab = SampledSymbol::new(gr, *a.symbol_grid(), sum).unwrap();
        let lhs = weyl::weyl_apply(&ab, &f).unwrap();
        let rhs = weyl::weyl_apply(&a, &f).unwrap().add(&weyl::weyl_apply(&b, &f).unwrap().scaled(Complex64::new(w, 0.0))).unwrap();
        prop_assert!(lhs.sub(&rhs).unwrap().norm() < 1e-10);
    }

    #[test]
    fn function_csv_round_trip(n in 0usize..5, phase in -3.0..3.0f64) {
        let gr = Grid::new(0.25, 2.0).unwrap();
        let f = SampledFunction::hermite(gr, n).scaled(Complex64::from_polar(1.0, phase));
        let mut buf = Vec::new();
        f.write_csv(&mut buf).unwrap();
        let g = SampledFunction::read_csv(&buf[..]).unwrap();
        prop_assert_eq!(f.samples(), g.samples());
    }
}
