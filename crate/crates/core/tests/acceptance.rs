//! One test per acceptance criterion, at the tolerances the suites encode.

use cdspec::acceptance::{self, CriterionReport};

const SEED: u64 = 20240611;

fn check(r: CriterionReport) {
    assert!(
        r.passed,
        "criterion {} ({}) failed: {} of {} checks violated, worst {} vs tolerance {}\n{}",
        r.id,
        r.name,
        r.violations,
        r.checks,
        r.worst,
        r.tolerance,
        serde_json::to_string_pretty(&r.details).unwrap()
    );
    assert!(r.checks > 0);
}

#[test]
fn quasinorm_laws() {
    check(acceptance::quasinorm_laws(SEED));
}

#[test]
fn schur_tests() {
    check(acceptance::schur_tests(SEED));
}

#[test]
fn boundedness_bound() {
    check(acceptance::boundedness_bound(SEED));
}

#[test]
fn stability_transfer() {
    check(acceptance::stability(SEED));
}

#[test]
fn inverse_envelope() {
    check(acceptance::inverse_envelope(SEED));
}

#[test]
fn gabor_layer() {
    check(acceptance::gabor_layer(SEED));
}

#[test]
fn almost_diagonalization() {
    check(acceptance::almost_diagonalization(SEED));
}

#[test]
fn weyl_inversion() {
    check(acceptance::weyl_inversion(SEED));
}

#[test]
fn frame_symbol() {
    check(acceptance::frame_symbol(SEED));
}

#[test]
fn norm_equivalence() {
    check(acceptance::norm_equivalence(SEED));
}
