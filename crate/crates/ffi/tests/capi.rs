use std::ffi::{CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use mvtda::*;

fn cylinder() -> Vec<f64> {
    let mut v = vec![10.0; 100];
    for o in 1..3 {
        for r in 1..4 {
            for c in 1..4 {
                v[o * 25 + r * 5 + c] = 2.0;
            }
        }
    }
    v
}

unsafe fn stack(dims: &[usize], v: &[f64]) -> *mut MvStack {
    let mut st = ptr::null_mut();
    let s = mvtda_stack_new(dims.as_ptr(), dims.len(), v.as_ptr(), v.len(), 1.0, &mut st);
    assert_eq!(s, MvStatus::Ok);
    st
}

unsafe fn last_error() -> String {
    let p = mvtda_last_error();
    assert!(!p.is_null());
    CStr::from_ptr(p).to_string_lossy().into_owned()
}

#[test]
fn cylinder_void_and_loop() {
    unsafe {
        let st = stack(&[5, 5, 4], &cylinder());
        assert_eq!(mvtda_stack_len(st), 100);
        assert_eq!(mvtda_stack_ndim(st), 3);

        let mut pd = ptr::null_mut();
        assert_eq!(mvtda_persistence(st, 2, &mut pd), MvStatus::Ok);
        let pts: Vec<MvPoint> = (0..mvtda_diagram_len(pd))
            .map(|i| {
                let mut p = MvPoint::default();
                assert_eq!(mvtda_diagram_get(pd, i, &mut p), MvStatus::Ok);
                p
            })
            .collect();
        let h2: Vec<_> = pts
            .iter()
            .filter(|p| p.dim == 2 && p.birth != p.death)
            .collect();
        assert_eq!(h2.len(), 1);
        assert_eq!((h2[0].birth, h2[0].death), (10.0, 2.0));
        let mut p = MvPoint::default();
        assert_eq!(
            mvtda_diagram_get(pd, pts.len(), &mut p),
            MvStatus::OutOfRange
        );
        assert!(last_error().contains("point"));

        let mut zz = ptr::null_mut();
        assert_eq!(mvtda_zigzag(st, 5.0, MvSetOp::Union, &mut zz), MvStatus::Ok);
        let ivs: Vec<MvInterval> = (0..mvtda_zigzag_len(zz))
            .map(|i| {
                let mut iv = MvInterval::default();
                assert_eq!(mvtda_zigzag_get(zz, i, &mut iv), MvStatus::Ok);
                iv
            })
            .collect();
        let h1: Vec<_> = ivs.iter().filter(|iv| iv.dim == 1).collect();
        assert_eq!(h1.len(), 1);
        assert_eq!((h1[0].birth_index, h1[0].death_index), (3, 5));

        mvtda_zigzag_free(zz);
        mvtda_diagram_free(pd);
        mvtda_stack_free(st);
    }
}

#[test]
fn max_test_matches_core() {
    unsafe {
        let st = stack(&[5, 5, 4], &cylinder());
        let mut o = mvtda_test_options_default();
        o.permutations = 19;
        o.smooth_span = 0.5;
        let mut res = ptr::null_mut();
        assert_eq!(mvtda_max_test(st, &o, &mut res), MvStatus::Ok);
        let mut sum = MvTestSummary::default();
        assert_eq!(mvtda_test_summary(res, &mut sum), MvStatus::Ok);
        assert_eq!(mvtda_test_nulls(res, ptr::null_mut(), 0), 19);
        let mut nulls = vec![0.0; 19];
        mvtda_test_nulls(res, nulls.as_mut_ptr(), nulls.len());

        let raw = mvtda_core::stack::ImageStack::new(vec![5, 5, 4], cylinder()).unwrap();
        let cfg = mvtda_core::maxtest::MaxTestConfig {
            permutations: 19,
            smoother: Some(mvtda_core::smoothing::SmootherConfig::new(2, 0.5).unwrap()),
            ..Default::default()
        };
        let direct = mvtda_core::maxtest::run_max_test(&raw, &cfg).unwrap();
        assert_eq!(sum.rho_obs, direct.rho_obs);
        assert_eq!(sum.p_value, direct.p_value);
        assert_eq!(sum.reject, direct.reject);
        assert_eq!(nulls, direct.null_samples);
        assert!(sum.reject && sum.has_theta);
        mvtda_test_free(res);
        mvtda_stack_free(st);
    }
}

#[test]
fn errors_are_reported_not_panicked() {
    unsafe {
        let mut st = ptr::null_mut();
        let dims = [2usize, 2];
        let v = [1.0; 3];
        let s = mvtda_stack_new(dims.as_ptr(), 2, v.as_ptr(), 3, 1.0, &mut st);
        assert_eq!(s, MvStatus::InvalidInput);
        assert!(st.is_null());
        assert!(!last_error().is_empty());

        assert_eq!(
            mvtda_stack_new(ptr::null(), 2, v.as_ptr(), 3, 1.0, &mut st),
            MvStatus::NullPointer
        );
        let path = CString::new("/definitely/missing.json").unwrap();
        assert_eq!(mvtda_stack_load(path.as_ptr(), &mut st), MvStatus::Io);

        let mut pd = ptr::null_mut();
        assert_eq!(
            mvtda_persistence(ptr::null(), 2, &mut pd),
            MvStatus::NullPointer
        );
        // A 2D stack has no time axis to zigzag over.
        let flat = stack(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        let mut zz = ptr::null_mut();
        assert_eq!(
            mvtda_zigzag(flat, 1.0, MvSetOp::Union, &mut zz),
            MvStatus::InvalidInput
        );
        mvtda_stack_free(flat);

        // A successful call clears the message.
        let ok = stack(&[2, 2], &[1.0, 2.0, 3.0, 4.0]);
        assert!(mvtda_last_error().is_null());
        mvtda_stack_free(ok);

        mvtda_stack_free(ptr::null_mut());
        mvtda_diagram_free(ptr::null_mut());
        mvtda_test_free(ptr::null_mut());
        mvtda_zigzag_free(ptr::null_mut());
        assert_eq!(mvtda_stack_len(ptr::null()), 0);
    }
}

#[test]
fn version_is_the_crate_version() {
    let v = unsafe { CStr::from_ptr(mvtda_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

/// Builds the static library, compiles a C program against the generated
/// header and runs it.
#[test]
fn c_program_links_and_runs() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let build = Command::new(env!("CARGO"))
        .args(["build", "--quiet", "-p", "mvtda-ffi", "--lib"])
        .current_dir(&manifest)
        .status()
        .expect("cargo runs");
    assert!(build.success());
    let target = std::env::var_os("CARGO_TARGET_DIR")
        .map(PathBuf::from)
        .unwrap_or_else(|| manifest.join("../../target"));
    let lib = target.join("debug/libmvtda.a");
    assert!(
        lib.exists(),
        "static library not found at {}",
        lib.display()
    );
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("smoke");
    let cc = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&out)
        .output()
        .expect("a C compiler is available");
    assert!(
        cc.status.success(),
        "{}",
        String::from_utf8_lossy(&cc.stderr)
    );
    let run = Command::new(&out).output().unwrap();
    assert!(run.status.success(), "exit {:?}", run.status.code());
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
