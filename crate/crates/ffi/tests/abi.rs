use std::ffi::CStr;
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use cdspec_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(cdspec_last_error()) }.to_string_lossy().into_owned()
}

#[test]
fn matrix_round_trip() {
    unsafe {
        let mut m = ptr::null_mut();
        assert_eq!(cdspec_matrix_toeplitz_exp(1, 8.0, 0.2, 1.0, &mut m), CdspecStatus::Ok);
        let n = cdspec_matrix_size(m);
        assert_eq!(n, 17);
        let x = vec![CdspecComplex { re: 1.0, im: 0.0 }; n];
        let mut y = vec![CdspecComplex::default(); n];
        assert_eq!(cdspec_matrix_apply(m, x.as_ptr(), y.as_mut_ptr(), n), CdspecStatus::Ok);
        // Centre row: 1 + 0.2 Σ e^{−|k|}, |k| <= 8.
        let want = 1.0 + 0.2 * (-8..=8).map(|k: i32| (-(k.abs() as f64)).exp()).sum::<f64>();
        assert!((y[n / 2].re - want).abs() < 1e-12);

        assert_eq!(cdspec_matrix_apply(m, x.as_ptr(), y.as_mut_ptr(), n - 1), CdspecStatus::DimensionMismatch);
        assert!(last_error().contains("expected 17"));

        let mut bound = 0.0;
        assert_eq!(cdspec_matrix_schur_bound(m, 0.5, &mut bound), CdspecStatus::Ok);
        assert!(bound >= 1.0);
        assert!(last_error().is_empty());

        let (mut amalgam, mut viol) = (0.0, 99usize);
        let mut c0 = 0.0;
        assert_eq!(cdspec_matrix_lower_bound(m, 2.0, 1, 1, &mut c0), CdspecStatus::Ok);
        assert_eq!(cdspec_inverse_envelope(m, 2.0, 0.5, c0, 0.25, &mut amalgam, &mut viol), CdspecStatus::Ok);
        assert!(amalgam.is_finite() && amalgam > 0.0);
        assert_eq!(viol, 0);
        cdspec_matrix_free(m);
    }
}

#[test]
fn null_and_bad_arguments() {
    unsafe {
        assert_eq!(cdspec_matrix_toeplitz_exp(1, 8.0, 0.2, 1.0, ptr::null_mut()), CdspecStatus::NullPointer);
        let mut m = ptr::null_mut();
        assert_eq!(cdspec_matrix_toeplitz_exp(0, 8.0, 0.2, 1.0, &mut m), CdspecStatus::Parameter);
        assert!(m.is_null());
        assert_eq!(cdspec_matrix_size(ptr::null()), 0);
        cdspec_matrix_free(ptr::null_mut());
        let mut g = ptr::null_mut();
        assert_eq!(cdspec_gabor_gaussian(0.3, 4.0, 0.5, 0.5, &mut g), CdspecStatus::Parameter);
    }
}

#[test]
fn gabor_and_weyl_inverse() {
    unsafe {
        let mut g = ptr::null_mut();
        assert_eq!(cdspec_gabor_gaussian(0.125, 4.0, 0.5, 0.5, &mut g), CdspecStatus::Ok);
        let (l, n) = (cdspec_gabor_grid_len(g), cdspec_gabor_len(g));
        let f: Vec<CdspecComplex> = (0..l)
            .map(|k| {
                let t = 0.125 * (k as f64 - l as f64 / 2.0);
                CdspecComplex { re: (-std::f64::consts::PI * t * t).exp() * t, im: 0.0 }
            })
            .collect();
        let mut c = vec![CdspecComplex::default(); n];
        assert_eq!(cdspec_gabor_analysis(g, f.as_ptr(), l, c.as_mut_ptr(), n), CdspecStatus::Ok);
        let mut t = ptr::null_mut();
        assert_eq!(cdspec_gabor_tight(g, &mut t), CdspecStatus::Ok);
        let (mut lo, mut hi) = (0.0, 0.0);
        assert_eq!(cdspec_gabor_frame_bounds(t, &mut lo, &mut hi), CdspecStatus::Ok);
        assert!((lo - 1.0).abs() < 1e-8 && (hi - 1.0).abs() < 1e-8);

        // Analysis then synthesis through the tight frame is the identity.
        assert_eq!(cdspec_gabor_analysis(t, f.as_ptr(), l, c.as_mut_ptr(), n), CdspecStatus::Ok);
        let mut back = vec![CdspecComplex::default(); l];
        assert_eq!(cdspec_gabor_synthesis(t, c.as_ptr(), n, back.as_mut_ptr(), l), CdspecStatus::Ok);
        let err = f.iter().zip(&back).map(|(a, b)| (a.re - b.re).hypot(a.im - b.im)).fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");

        let (mut nx, mut nxi) = (0, 0);
        assert_eq!(cdspec_symbol_shape(0.125, 4.0, &mut nx, &mut nxi), CdspecStatus::Ok);
        let mut vals = Vec::with_capacity(nx * nxi);
        for i in 0..nx {
            for m in 0..nxi {
                let x = 0.0625 * (i as f64 - l as f64);
                let xi = (m as f64 - nxi as f64 / 2.0) / 8.0;
                vals.push(CdspecComplex { re: 1.0 + 0.3 * (-std::f64::consts::PI * (x * x + xi * xi)).exp(), im: 0.0 });
            }
        }
        let mut a = ptr::null_mut();
        assert_eq!(cdspec_symbol_new(0.125, 4.0, vals.as_ptr(), vals.len(), &mut a), CdspecStatus::Ok);
        let (mut b, mut cond, mut rt) = (ptr::null_mut(), 0.0, 0.0);
        assert_eq!(cdspec_invert_weyl(a, g, 2.0, &mut b, &mut cond, &mut rt), CdspecStatus::NotAFrame);
        assert_eq!(cdspec_invert_weyl(a, t, 2.0, &mut b, &mut cond, &mut rt), CdspecStatus::Ok, "{}", last_error());
        assert!(cond >= 1.0 && rt < 1e-8, "{cond} {rt}");

        // b^w a^w f = f.
        let mut af = vec![CdspecComplex::default(); l];
        let mut baf = vec![CdspecComplex::default(); l];
        assert_eq!(cdspec_symbol_apply(a, f.as_ptr(), af.as_mut_ptr(), l), CdspecStatus::Ok);
        assert_eq!(cdspec_symbol_apply(b, af.as_ptr(), baf.as_mut_ptr(), l), CdspecStatus::Ok);
        let err = f.iter().zip(&baf).map(|(a, b)| (a.re - b.re).hypot(a.im - b.im)).fold(0.0, f64::max);
        assert!(err < 1e-8, "{err}");

        cdspec_symbol_free(a);
        cdspec_symbol_free(b);
        cdspec_gabor_free(t);
        cdspec_gabor_free(g);
    }
}

#[test]
fn header_declares_the_exports() {
    let h = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/cdspec.h")).unwrap();
    for f in ["cdspec_last_error", "cdspec_matrix_toeplitz_exp", "cdspec_gabor_analysis", "cdspec_invert_weyl", "cdspec_symbol_free"] {
        assert!(h.contains(f), "{f}");
    }
    assert!(h.contains("typedef struct CdspecMatrix CdspecMatrix;"));
}

/// Builds the C smoke test against the static library when a C compiler is
/// around.
#[test]
fn c_program_links_and_runs() {
    let cc = std::env::var("CC").unwrap_or_else(|_| "cc".into());
    if Command::new(&cc).arg("--version").output().is_err() {
        eprintln!("no C compiler, skipping");
        return;
    }
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    // tests run from target/<profile>/deps
    let exe = std::env::current_exe().unwrap();
    let profile_dir = exe.parent().unwrap().parent().unwrap();
    let lib = profile_dir.join("libcdspec_ffi.a");
    if !lib.exists() {
        eprintln!("{} not built, skipping", lib.display());
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let bin = tmp.path().join("smoke");
    let st = Command::new(&cc)
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lm", "-lpthread", "-ldl", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(st.success(), "C compile failed");
    let out = Command::new(&bin).output().unwrap();
    assert!(out.status.success(), "{}{}", String::from_utf8_lossy(&out.stdout), String::from_utf8_lossy(&out.stderr));
}
