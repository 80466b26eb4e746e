use std::ffi::CStr;
use std::ptr;

use geope_ffi::*;

fn status_text(s: GeopeStatus) -> String {
    unsafe { CStr::from_ptr(geope_status_str(s as i32)) }.to_string_lossy().into_owned()
}

#[test]
fn closed_forms() {
    let mut q = GeopeQuaternion { w: 0.0, x: 0.0, y: 0.0, z: 0.0 };
    unsafe {
        assert_eq!(geope_build_2d(0.0, 0.0, &mut q), GeopeStatus::Ok);
        assert_eq!(q, GeopeQuaternion { w: 1.0, x: 0.0, y: 0.0, z: 0.0 });
        assert_eq!(geope_build_3d(std::f64::consts::PI, 0.0, 0.0, &mut q), GeopeStatus::Ok);
        assert!((q.w - 0.75f64.sqrt()).abs() < 1e-15 && (q.x - 0.5).abs() < 1e-15);
        assert_eq!(geope_build_2d(1.0, 2.0, ptr::null_mut()), GeopeStatus::NullPointer);
    }
}

#[test]
fn geometric_mean_checks_inputs() {
    let id = GeopeQuaternion { w: 1.0, x: 0.0, y: 0.0, z: 0.0 };
    let mut out = id;
    unsafe {
        assert_eq!(geope_geometric_mean([id, id].as_ptr(), 2, &mut out), GeopeStatus::Ok);
        assert_eq!(out, id);
        assert_eq!(geope_geometric_mean(ptr::null(), 0, &mut out), GeopeStatus::EmptyList);
        let bad = GeopeQuaternion { w: 2.0, ..id };
        assert_eq!(geope_geometric_mean(&bad, 1, &mut out), GeopeStatus::NonUnitRotor);
    }
}

#[test]
fn decomposition() {
    let mut d = GeopeScoreDecomposition { projected_similarity: 0.0, axial_alignment: 0.0, torsional: 0.0, total: 0.0 };
    let (q, k, n) = ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]);
    unsafe {
        let s = geope_decompose_score(q.as_ptr(), k.as_ptr(), std::f64::consts::FRAC_PI_2, n.as_ptr(), &mut d);
        assert_eq!(s, GeopeStatus::Ok);
        assert!((d.total + 1.0).abs() < 1e-15);
        let bad = [0.0, 0.0, 2.0];
        let s = geope_decompose_score(q.as_ptr(), k.as_ptr(), 1.0, bad.as_ptr(), &mut d);
        assert_eq!(s, GeopeStatus::NonUnitAxis);
    }
}

#[test]
fn operator_lifecycle() {
    let schedule = geope_schedule_default(6);
    let mut op: *mut GeopeOperator = ptr::null_mut();
    unsafe {
        assert_eq!(geope_operator_new(&schedule, GeopeMode::TwoD as i32, 0, 2, 3, &mut op), GeopeStatus::Ok);
        assert!(!op.is_null());
        assert_eq!(geope_operator_head_dim(op), 6);
        let x = [1.0, 2.0, 3.0, -1.0, 0.5, 4.0];
        let mut y = [0.0; 6];
        assert_eq!(geope_operator_apply(op, x.as_ptr(), y.as_mut_ptr(), 6), GeopeStatus::Ok);
        for (a, b) in x.chunks(3).zip(y.chunks(3)) {
            let na: f64 = a.iter().map(|v| v * v).sum();
            let nb: f64 = b.iter().map(|v| v * v).sum();
            assert!((na - nb).abs() < 1e-12);
        }
        assert_eq!(geope_operator_apply(op, x.as_ptr(), y.as_mut_ptr(), 5), GeopeStatus::DimensionMismatch);
        geope_operator_free(op);
        geope_operator_free(ptr::null_mut());

        let bad = geope_schedule_default(64);
        assert_eq!(geope_operator_new(&bad, GeopeMode::TwoD as i32, 0, 0, 0, &mut op), GeopeStatus::DimensionMismatch);
        assert!(op.is_null());
        assert_eq!(geope_operator_new(&schedule, 7, 0, 0, 0, &mut op), GeopeStatus::InvalidConfig);
        assert_eq!(geope_operator_head_dim(ptr::null()), 0);
    }
}

#[test]
fn table_lifecycle() {
    let schedule = geope_schedule_default(6);
    let mut table: *mut GeopeDisplacementTable = ptr::null_mut();
    unsafe {
        assert_eq!(geope_table_new(&schedule, 14, 14, &mut table), GeopeStatus::Ok);
        assert_eq!(geope_table_len(table), 729);
        let q = [1.0, 0.0, 0.0, 0.0, 1.0, 0.0];
        let (mut a, mut b) = (0.0, 0.0);
        assert_eq!(geope_table_score(table, 0, 0, 3, 4, q.as_ptr(), q.as_ptr(), 6, &mut a), GeopeStatus::Ok);
        assert_eq!(geope_table_score(table, 5, 5, 8, 9, q.as_ptr(), q.as_ptr(), 6, &mut b), GeopeStatus::Ok);
        assert_eq!(a.to_bits(), b.to_bits());
        assert_eq!(
            geope_table_score(table, 0, 0, 14, 0, q.as_ptr(), q.as_ptr(), 6, &mut a),
            GeopeStatus::IndexOutOfRange
        );
        geope_table_free(table);
    }
}

#[test]
fn status_strings() {
    assert_eq!(status_text(GeopeStatus::Ok), "ok");
    assert_eq!(status_text(GeopeStatus::DimensionMismatch), "dimension mismatch");
    let unknown = unsafe { CStr::from_ptr(geope_status_str(99)) };
    assert_eq!(unknown.to_str().unwrap(), "unknown status");
}

/// The generated header must compile as C and agree with the Rust layouts.
#[test]
fn header_compiles() {
    let compiler = ["cc", "gcc", "clang"]
        .into_iter()
        .find(|c| std::process::Command::new(c).arg("--version").output().is_ok());
    let Some(cc) = compiler else {
        eprintln!("no C compiler found; skipping header check");
        return;
    };
    let include = concat!(env!("CARGO_MANIFEST_DIR"), "/include");
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("check.c");
    std::fs::write(
        &src,
        format!(
            r#"#include "geope.h"
_Static_assert(sizeof(GeopeQuaternion) == {q}, "quaternion size");
_Static_assert(sizeof(GeopeSchedule) == {s}, "schedule size");
_Static_assert(GEOPE_STATUS_DIMENSION_MISMATCH == 6, "status value");
int main(void) {{
    GeopeSchedule s = geope_schedule_default(48);
    GeopeOperator *op = 0;
    GeopeStatus st = geope_operator_new(&s, GEOPE_MODE_TWO_D, 0, 1, 2, &op);
    geope_operator_free(op);
    return (int)st;
}}
"#,
            q = std::mem::size_of::<GeopeQuaternion>(),
            s = std::mem::size_of::<GeopeSchedule>(),
        ),
    )
    .unwrap();
    let out = std::process::Command::new(cc)
        .args(["-std=c11", "-fsyntax-only", "-Wall", "-Werror", "-I", include])
        .arg(&src)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

/// Links a C program against the static library and runs it, when both a
/// compiler and the archive are available.
#[test]
fn c_program_links_and_runs() {
    let exe = std::env::current_exe().unwrap();
    let archive = exe.parent().and_then(|d| d.parent()).map(|d| d.join("libgeope_ffi.a"));
    let Some(archive) = archive.filter(|a| a.exists()) else {
        eprintln!("static library not found; skipping link check");
        return;
    };
    if std::process::Command::new("cc").arg("--version").output().is_err() {
        eprintln!("no C compiler found; skipping link check");
        return;
    }
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("main.c");
    let bin = dir.path().join("main");
    std::fs::write(
        &src,
        r#"#include <stdio.h>
#include "geope.h"
int main(void) {
    GeopeQuaternion q;
    if (geope_build_2d(0.0, 0.0, &q) != GEOPE_STATUS_OK || q.w != 1.0) return 1;
    GeopeSchedule s = geope_schedule_default(48);
    GeopeDisplacementTable *t = 0;
    if (geope_table_new(&s, 14, 14, &t) != GEOPE_STATUS_OK) return 2;
    size_t n = geope_table_len(t);
    geope_table_free(t);
    s.head_dim = 64;
    GeopeOperator *op = 0;
    GeopeStatus st = geope_operator_new(&s, GEOPE_MODE_TWO_D, 0, 0, 0, &op);
    printf("%zu %s\n", n, geope_status_str(st));
    return op == 0 ? 0 : 3;
}
"#,
    )
    .unwrap();
    let out = std::process::Command::new("cc")
        .args(["-std=c11", "-I", concat!(env!("CARGO_MANIFEST_DIR"), "/include")])
        .arg(&src)
        .arg(&archive)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let run = std::process::Command::new(&bin).output().unwrap();
    assert!(run.status.success());
    assert_eq!(String::from_utf8_lossy(&run.stdout), "729 dimension mismatch\n");
}
