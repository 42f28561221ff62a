use std::ffi::{c_char, CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use ddpulse_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    let len = unsafe { dd_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert!(len > 0);
    unsafe { CStr::from_ptr(buf.as_ptr()) }
        .to_string_lossy()
        .into_owned()
}

fn parse(spec: &str) -> *mut DdSequence {
    let c = CString::new(spec).unwrap();
    let mut seq = ptr::null_mut();
    assert_eq!(
        unsafe { dd_sequence_parse(c.as_ptr(), &mut seq) },
        DdStatus::Ok
    );
    assert!(!seq.is_null());
    seq
}

fn hard_bath() -> *mut DdBath {
    let mut bath = ptr::null_mut();
    let status = unsafe { dd_bath_new(0.25, 1.0, f64::INFINITY, f64::INFINITY, false, &mut bath) };
    assert_eq!(status, DdStatus::Ok);
    bath
}

#[test]
fn sequence_round_trip() {
    let seq = parse("cdd:4");
    unsafe {
        assert_eq!(dd_sequence_len(seq), 10);
        let mut small = [0.0; 4];
        assert_eq!(
            dd_sequence_deltas(seq, small.as_mut_ptr(), small.len()),
            DdStatus::BufferTooSmall
        );
        assert!(last_error().contains("need 10"));
        let mut deltas = [0.0; 10];
        assert_eq!(
            dd_sequence_deltas(seq, deltas.as_mut_ptr(), 10),
            DdStatus::Ok
        );
        assert_eq!(deltas[0], 0.0625);
        assert!(deltas.windows(2).all(|w| w[0] < w[1]));

        let mut copy = ptr::null_mut();
        assert_eq!(
            dd_sequence_custom(deltas.as_ptr(), 10, &mut copy),
            DdStatus::Ok
        );
        let mut a = DdComplex::default();
        let mut b = DdComplex::default();
        dd_filter_y(seq, 3.7, &mut a);
        dd_filter_y(copy, 3.7, &mut b);
        assert_eq!(a, b);
        dd_sequence_free(copy);
        dd_sequence_free(seq);
    }
}

#[test]
fn errors_carry_status_and_message() {
    let bad = CString::new("udd:x").unwrap();
    let mut seq = ptr::null_mut();
    unsafe {
        assert_eq!(dd_sequence_parse(bad.as_ptr(), &mut seq), DdStatus::Parse);
        assert!(seq.is_null());
        assert!(last_error().contains("non-negative integer"));

        let unordered = [0.6, 0.3];
        assert_eq!(
            dd_sequence_custom(unordered.as_ptr(), 2, &mut seq),
            DdStatus::InvalidArgument
        );
        assert_eq!(
            dd_sequence_parse(ptr::null(), &mut seq),
            DdStatus::NullPointer
        );
        assert_eq!(dd_sequence_len(ptr::null()), 0);
        dd_sequence_free(ptr::null_mut());
        dd_bath_free(ptr::null_mut());

        let mut bath = ptr::null_mut();
        assert_eq!(
            dd_bath_new(0.25, 1.0, -2.0, f64::INFINITY, false, &mut bath),
            DdStatus::InvalidArgument
        );
        assert!(last_error().contains("gamma"));
    }
}

#[test]
fn residuals_and_filter() {
    let seq = parse("udd:5");
    unsafe {
        for m in 1..=5 {
            let mut r = f64::NAN;
            assert_eq!(dd_residual(seq, m, &mut r), DdStatus::Ok);
            assert!(r.abs() < 1e-13, "m={m}");
        }
        let mut y = DdComplex::default();
        assert_eq!(dd_filter_y(seq, 0.0, &mut y), DdStatus::Ok);
        assert_eq!(y, DdComplex { re: 0.0, im: 0.0 });
        dd_sequence_free(seq);
    }
}

#[test]
fn signal_and_curve_agree() {
    let seq = parse("udd:4");
    let bath = hard_bath();
    let times = [0.5, 1.0, 2.0];
    let mut points = [DdSignalPoint::default(); 3];
    unsafe {
        assert_eq!(
            dd_curve(seq, bath, times.as_ptr(), times.len(), points.as_mut_ptr()),
            DdStatus::Ok
        );
        let mut single = DdSignalPoint::default();
        assert_eq!(dd_signal(seq, bath, 1.0, &mut single), DdStatus::Ok);
        assert_eq!(single, points[1]);
        assert!(points.windows(2).all(|w| w[0].deviation < w[1].deviation));
        assert!((points[1].s + points[1].deviation - 1.0).abs() < 1e-15);

        let unsorted = [1.0, 0.5];
        assert_eq!(
            dd_curve(seq, bath, unsorted.as_ptr(), 2, points.as_mut_ptr()),
            DdStatus::InvalidArgument
        );
        assert_eq!(
            dd_bath_set_tolerance(bath, -1.0, 0.0),
            DdStatus::InvalidArgument
        );
        assert_eq!(dd_bath_set_tolerance(bath, 1e-15, 1e-11), DdStatus::Ok);
        dd_bath_free(bath);
        dd_sequence_free(seq);
    }
}

#[test]
fn solver_and_verifier() {
    let mut out = [0.0; 8];
    let mut iterations = 0usize;
    unsafe {
        assert_eq!(
            dd_solve_order_conditions(8, ptr::null(), 1e-12, out.as_mut_ptr(), &mut iterations),
            DdStatus::Ok
        );
        assert!(iterations > 0);
        let seq = parse("udd:8");
        let mut reference = [0.0; 8];
        dd_sequence_deltas(seq, reference.as_mut_ptr(), 8);
        for (a, b) in out.iter().zip(reference) {
            assert!((a - b).abs() < 1e-8);
        }

        let mut report = DdOrderReport::default();
        assert_eq!(dd_verify_order(seq, 8, 60, &mut report), DdStatus::Ok);
        assert!(report.passed && report.digits == 60 && report.separation > 10.0);
        assert_eq!(
            dd_verify_order(seq, 8, 20, &mut report),
            DdStatus::Numerical
        );
        assert!(last_error().contains("precision too low"));
        dd_sequence_free(seq);

        let cpmg = parse("cpmg:4");
        assert_eq!(dd_verify_order(cpmg, 3, 0, &mut report), DdStatus::Ok);
        assert!(!report.passed && report.digits == 0);
        dd_sequence_free(cpmg);
    }
}

#[test]
fn version_is_terminated() {
    let v = unsafe { CStr::from_ptr(dd_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

/// Directory holding the static library built alongside this test binary.
fn artifact_dir() -> Option<PathBuf> {
    let exe = std::env::current_exe().ok()?;
    let dir = exe.parent()?.parent()?.to_path_buf();
    dir.join("libddpulse_ffi.a").exists().then_some(dir)
}

#[test]
fn header_compiles_and_links_from_c() {
    let crate_dir = Path::new(env!("CARGO_MANIFEST_DIR"));
    let Some(lib_dir) = artifact_dir() else {
        eprintln!("static library not found next to the test binary; skipping C build");
        return;
    };
    let exe = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("ddpulse_c_program");
    let compiled = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg("-I")
        .arg(crate_dir.join("include"))
        .arg(crate_dir.join("tests/c_program.c"))
        .arg(lib_dir.join("libddpulse_ffi.a"))
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status();
    let Ok(status) = compiled else {
        eprintln!("no C compiler available; skipping C build");
        return;
    };
    assert!(status.success(), "C compilation failed");
    let run = Command::new(&exe).output().unwrap();
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    assert!(String::from_utf8_lossy(&run.stdout).starts_with("ok "));
}
