use std::ffi::CStr;
use std::ptr;

use sgl_ffi::*;

fn last_error() -> String {
    let p = sgl_last_error_message();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

// 6×4 design, two groups of two.
fn small_problem() -> *mut SglProblem {
    let n = 6;
    let x_rows = [
        [1.0, 0.2, -0.3, 0.0],
        [0.5, -1.0, 0.1, 0.4],
        [-0.2, 0.3, 1.2, -0.5],
        [0.0, 0.7, -0.4, 1.0],
        [0.9, 0.1, 0.0, -0.8],
        [-0.6, -0.2, 0.5, 0.3],
    ];
    let mut x = Vec::new();
    for j in 0..4 {
        for row in &x_rows {
            x.push(row[j]);
        }
    }
    let y = [1.0, -0.5, 2.0, 0.3, 0.8, -1.1];
    let ids = [0usize, 0, 1, 1];
    let mut h = ptr::null_mut();
    let s = unsafe { sgl_problem_new(x.as_ptr(), n, 4, y.as_ptr(), ids.as_ptr(), 2, ptr::null(), 0.3, &mut h) };
    assert_eq!(s, SglStatus::Ok);
    h
}

#[test]
fn solve_and_path_round_trip() {
    let h = small_problem();
    let (mut n, mut p, mut g) = (0, 0, 0);
    assert_eq!(unsafe { sgl_problem_dims(h, &mut n, &mut p, &mut g) }, SglStatus::Ok);
    assert_eq!((n, p, g), (6, 4, 2));

    let mut lmax = 0.0;
    assert_eq!(unsafe { sgl_problem_lambda_max(h, &mut lmax) }, SglStatus::Ok);
    assert!(lmax > 0.0);

    let opts = sgl_solver_options_default();
    assert_eq!(opts.rule, SglRule::Gap);
    let mut beta = [f64::NAN; 4];
    let mut gap = f64::NAN;
    let s = unsafe { sgl_solve(h, lmax, ptr::null(), &opts, beta.as_mut_ptr(), &mut gap) };
    assert_eq!(s, SglStatus::Ok);
    assert_eq!(beta, [0.0; 4]);
    assert!(gap <= opts.tolerance);

    let mut path = ptr::null_mut();
    assert_eq!(unsafe { sgl_solve_path(h, 5, 2.0, &opts, &mut path) }, SglStatus::Ok);
    assert_eq!(unsafe { sgl_path_len(path) }, 5);
    let (mut lam, mut pgap, mut conv) = (0.0, 0.0, false);
    assert_eq!(
        unsafe { sgl_path_point(path, 4, &mut lam, &mut pgap, &mut conv) },
        SglStatus::Ok
    );
    assert!((lam - lmax / 100.0).abs() <= 1e-12 * lmax);
    assert!(conv && pgap <= opts.tolerance);

    // The last path point agrees with a direct solve at the same λ.
    let mut from_path = [0.0; 4];
    assert_eq!(
        unsafe { sgl_path_beta(path, 4, from_path.as_mut_ptr(), 4) },
        SglStatus::Ok
    );
    let tight = SglSolverOptions {
        tolerance: 1e-14,
        ..opts
    };
    let mut direct = [0.0; 4];
    let s = unsafe { sgl_solve(h, lam, ptr::null(), &tight, direct.as_mut_ptr(), ptr::null_mut()) };
    assert_eq!(s, SglStatus::Ok);
    for (a, b) in from_path.iter().zip(&direct) {
        assert!((a - b).abs() < 1e-4, "{a} vs {b}");
    }

    assert_eq!(
        unsafe { sgl_path_point(path, 5, ptr::null_mut(), ptr::null_mut(), ptr::null_mut()) },
        SglStatus::OutOfRange
    );
    assert!(last_error().contains("out of range"));
    assert_eq!(
        unsafe { sgl_path_beta(path, 0, from_path.as_mut_ptr(), 3) },
        SglStatus::DimensionMismatch
    );

    unsafe {
        sgl_path_free(path);
        sgl_problem_free(h);
    }
}

#[test]
fn errors_are_reported() {
    let x = [1.0, 2.0];
    let y = [1.0];
    let mut h = ptr::null_mut();
    let s = unsafe { sgl_problem_new(x.as_ptr(), 1, 2, y.as_ptr(), ptr::null(), 1, ptr::null(), 0.5, &mut h) };
    assert_eq!(s, SglStatus::NullPointer);
    assert!(last_error().contains("group_ids"));

    let ids = [0usize, 3];
    let s = unsafe { sgl_problem_new(x.as_ptr(), 1, 2, y.as_ptr(), ids.as_ptr(), 2, ptr::null(), 0.5, &mut h) };
    assert_eq!(s, SglStatus::OutOfRange);
    assert!(h.is_null());

    let ids = [0usize, 0];
    let s = unsafe { sgl_problem_new(x.as_ptr(), 1, 2, y.as_ptr(), ids.as_ptr(), 1, ptr::null(), 1.5, &mut h) };
    assert_eq!(s, SglStatus::InvalidArgument);
    assert!(last_error().contains("tau"), "{}", last_error());

    // Group 1 is empty.
    let s = unsafe { sgl_problem_new(x.as_ptr(), 1, 2, y.as_ptr(), ids.as_ptr(), 2, ptr::null(), 0.5, &mut h) };
    assert_ne!(s, SglStatus::Ok);

    let opts = SglSolverOptions {
        max_passes: 1,
        gap_check_every: 1,
        tolerance: 1e-300,
        ..sgl_solver_options_default()
    };
    let h = small_problem();
    let mut beta = [0.0; 4];
    let s = unsafe { sgl_solve(h, 1e-3, ptr::null(), &opts, beta.as_mut_ptr(), ptr::null_mut()) };
    assert_eq!(s, SglStatus::NotConverged);
    assert!(beta.iter().any(|&b| b != 0.0));
    let s = unsafe {
        sgl_solve(
            h,
            -1.0,
            ptr::null(),
            &sgl_solver_options_default(),
            beta.as_mut_ptr(),
            ptr::null_mut(),
        )
    };
    assert_ne!(s, SglStatus::Ok);
    unsafe { sgl_problem_free(h) };
    unsafe { sgl_problem_free(ptr::null_mut()) };
    assert_eq!(unsafe { sgl_path_len(ptr::null()) }, 0);
}

#[test]
fn scalar_helpers() {
    let x = [3.0, -4.0];
    let mut out = 0.0;
    assert_eq!(unsafe { sgl_epsilon_norm(x.as_ptr(), 2, 1.0, &mut out) }, SglStatus::Ok);
    assert!((out - 5.0).abs() < 1e-14);
    assert_eq!(unsafe { sgl_epsilon_norm(x.as_ptr(), 2, 0.0, &mut out) }, SglStatus::Ok);
    assert!((out - 4.0).abs() < 1e-14);
    assert_eq!(
        unsafe { sgl_epsilon_norm(x.as_ptr(), 2, 2.0, &mut out) },
        SglStatus::InvalidArgument
    );

    // α = 0 branch: ‖x‖ / R.
    assert_eq!(
        unsafe { sgl_lambda_solver(x.as_ptr(), 2, 0.0, 2.0, &mut out) },
        SglStatus::Ok
    );
    assert!((out - 2.5).abs() < 1e-14);
    assert_eq!(
        unsafe { sgl_lambda_solver(x.as_ptr(), 2, -1.0, 2.0, &mut out) },
        SglStatus::InvalidArgument
    );
    assert_eq!(
        unsafe { sgl_lambda_solver(ptr::null(), 0, 1.0, 1.0, &mut out) },
        SglStatus::NullPointer
    );
}

#[test]
fn header_declares_every_export() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/sgl.h")).unwrap();
    let src = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/src/lib.rs")).unwrap();
    let exports: Vec<&str> = src
        .lines()
        .filter_map(|l| l.split("extern \"C\" fn ").nth(1))
        .map(|rest| rest.split('(').next().unwrap())
        .collect();
    assert!(exports.len() >= 12);
    for name in exports {
        assert!(header.contains(&format!("{name}(")), "{name} missing from header");
    }
}
