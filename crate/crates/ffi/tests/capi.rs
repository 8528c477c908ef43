use std::ffi::{CStr, CString};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::ptr;

use euler_stat_ffi::*;

const SMALL: &str = "grid.n = 8\nensemble.samples = 3\ntime.t_end = 0.05\ntime.outputs = 0, 0.05\n";

fn last_error() -> String {
    let p = es_last_error();
    assert!(!p.is_null());
    unsafe { CStr::from_ptr(p) }.to_string_lossy().into_owned()
}

fn config(text: &str) -> *mut EsConfig {
    let text = CString::new(text).unwrap();
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { es_config_parse(text.as_ptr(), &mut cfg) }, EsStatus::Ok);
    cfg
}

fn run(text: &str) -> *mut EsEnsemble {
    let cfg = config(text);
    let mut ens = ptr::null_mut();
    assert_eq!(unsafe { es_run_ensemble(cfg, &mut ens) }, EsStatus::Ok, "{}", last_error());
    unsafe { es_config_free(cfg) };
    ens
}

fn info(ens: *const EsEnsemble) -> EsEnsembleInfo {
    let mut i = EsEnsembleInfo::default();
    assert_eq!(unsafe { es_ensemble_info(ens, &mut i) }, EsStatus::Ok);
    i
}

fn field(ens: *const EsEnsemble, m: usize, k: usize) -> (Vec<f64>, Vec<f64>) {
    let i = info(ens);
    let n = i.n1 * i.n2;
    let (mut u, mut v) = (vec![0.0; n], vec![0.0; n]);
    let s = unsafe { es_ensemble_copy_field(ens, m, k, u.as_mut_ptr(), v.as_mut_ptr(), n) };
    assert_eq!(s, EsStatus::Ok);
    (u, v)
}

fn path(p: &Path) -> CString {
    CString::new(p.to_str().unwrap()).unwrap()
}

#[test]
fn version_is_crate_version() {
    let v = unsafe { CStr::from_ptr(es_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn run_and_inspect() {
    let ens = run(SMALL);
    let i = info(ens);
    assert_eq!((i.n1, i.n2, i.samples, i.times), (8, 8, 3, 2));

    let mut t = -1.0;
    assert_eq!(unsafe { es_ensemble_time(ens, 1, &mut t) }, EsStatus::Ok);
    assert_eq!(t, 0.05);
    assert_eq!(unsafe { es_ensemble_time(ens, 2, &mut t) }, EsStatus::Invalid);

    let (u, v) = field(ens, 2, 1);
    assert!(u.iter().chain(&v).all(|x| x.is_finite()));
    assert!(u.iter().any(|&x| x != 0.0));

    let mut short = vec![0.0; 10];
    let s = unsafe { es_ensemble_copy_field(ens, 0, 0, short.as_mut_ptr(), short.as_mut_ptr(), 10) };
    assert_eq!(s, EsStatus::Invalid);
    let mut buf = vec![0.0; 64];
    let s = unsafe { es_ensemble_copy_field(ens, 3, 0, buf.as_mut_ptr(), buf.as_mut_ptr(), 64) };
    assert_eq!(s, EsStatus::Invalid);
    assert!(last_error().contains("sample 3"));

    unsafe { es_ensemble_free(ens) };
}

#[test]
fn workers_do_not_change_results() {
    let cfg = config(SMALL);
    let mut a = ptr::null_mut();
    let mut b = ptr::null_mut();
    unsafe {
        assert_eq!(es_config_set_workers(cfg, 1), EsStatus::Ok);
        assert_eq!(es_run_ensemble(cfg, &mut a), EsStatus::Ok);
        assert_eq!(es_config_set_workers(cfg, 3), EsStatus::Ok);
        assert_eq!(es_run_ensemble(cfg, &mut b), EsStatus::Ok);
    }
    for m in 0..3 {
        assert_eq!(field(a, m, 1), field(b, m, 1));
    }
    unsafe {
        es_ensemble_free(a);
        es_ensemble_free(b);
        es_config_free(cfg);
    }
}

#[test]
fn save_load_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let ens = run(SMALL);
    let d = path(dir.path());
    assert_eq!(unsafe { es_ensemble_save(ens, d.as_ptr()) }, EsStatus::Ok);
    let mut back = ptr::null_mut();
    assert_eq!(unsafe { es_ensemble_load(d.as_ptr(), &mut back) }, EsStatus::Ok);
    assert_eq!(info(back).samples, 3);
    assert_eq!(field(ens, 1, 1), field(back, 1, 1));
    unsafe {
        es_ensemble_free(ens);
        es_ensemble_free(back);
    }
}

#[test]
fn run_in_dir_matches_memory_run() {
    let dir = tempfile::tempdir().unwrap();
    let d = path(&dir.path().join("run"));
    let cfg = config(SMALL);
    let mut on_disk = ptr::null_mut();
    assert_eq!(unsafe { es_run_in_dir(cfg, d.as_ptr(), &mut on_disk) }, EsStatus::Ok);
    let mem = run(SMALL);
    assert_eq!(field(on_disk, 0, 1), field(mem, 0, 1));
    unsafe {
        es_ensemble_free(on_disk);
        es_ensemble_free(mem);
        es_config_free(cfg);
    }
}

#[test]
fn load_missing_dir_is_io_error() {
    let d = CString::new("/nonexistent/euler-stat-run").unwrap();
    let mut ens = ptr::null_mut();
    assert_eq!(unsafe { es_ensemble_load(d.as_ptr(), &mut ens) }, EsStatus::Io);
    assert!(ens.is_null());
    assert!(!last_error().is_empty());
}

#[test]
fn projection_is_idempotent() {
    let mut s = ptr::null_mut();
    assert_eq!(unsafe { es_solver_new(16, 8, &mut s) }, EsStatus::Ok);
    let n = 16 * 8;
    let mut u: Vec<f64> = (0..n).map(|i| ((i * 37 % 11) as f64).sin()).collect();
    let mut v: Vec<f64> = (0..n).map(|i| ((i * 13 % 7) as f64).cos()).collect();
    assert_eq!(unsafe { es_project(s, u.as_mut_ptr(), v.as_mut_ptr(), n) }, EsStatus::Ok);
    let (u1, v1) = (u.clone(), v.clone());
    assert_eq!(unsafe { es_project(s, u.as_mut_ptr(), v.as_mut_ptr(), n) }, EsStatus::Ok);
    let diff = u.iter().zip(&u1).chain(v.iter().zip(&v1)).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(diff < 1e-12, "{diff}");

    assert_eq!(unsafe { es_project(s, u.as_mut_ptr(), v.as_mut_ptr(), n - 1) }, EsStatus::Invalid);
    unsafe { es_solver_free(s) };

    let mut bad = ptr::null_mut();
    assert_eq!(unsafe { es_solver_new(0, 8, &mut bad) }, EsStatus::Invalid);
}

#[test]
fn structure_function_and_distance() {
    let ens = run(SMALL);
    let mut vals = [0.0; 3];
    assert_eq!(unsafe { es_structure_function(ens, 1, 2.0, 3, vals.as_mut_ptr()) }, EsStatus::Ok);
    assert!(vals.iter().all(|&x| x > 0.0 && x.is_finite()));
    assert_eq!(unsafe { es_structure_function(ens, 1, 0.5, 3, vals.as_mut_ptr()) }, EsStatus::Invalid);

    let mut w = -1.0;
    assert_eq!(unsafe { es_wasserstein(ens, 1, ens, 1, 2, 20, 4, &mut w) }, EsStatus::Ok);
    assert_eq!(w, 0.0);
    assert_eq!(unsafe { es_wasserstein(ens, 0, ens, 1, 1, 20, 4, &mut w) }, EsStatus::Ok);
    assert!(w > 0.0);
    assert_eq!(unsafe { es_wasserstein(ens, 0, ens, 1, 9, 20, 4, &mut w) }, EsStatus::Invalid);
    assert_eq!(unsafe { es_wasserstein(ens, 5, ens, 1, 1, 20, 4, &mut w) }, EsStatus::Invalid);
    unsafe { es_ensemble_free(ens) };
}

#[test]
fn null_pointers_are_reported() {
    let mut cfg = ptr::null_mut();
    assert_eq!(unsafe { es_config_parse(ptr::null(), &mut cfg) }, EsStatus::NullPointer);
    assert!(last_error().contains("text"));
    let text = CString::new(SMALL).unwrap();
    assert_eq!(unsafe { es_config_parse(text.as_ptr(), ptr::null_mut()) }, EsStatus::NullPointer);
    let mut ens = ptr::null_mut();
    assert_eq!(unsafe { es_run_ensemble(ptr::null(), &mut ens) }, EsStatus::NullPointer);
    assert_eq!(unsafe { es_ensemble_info(ptr::null(), ptr::null_mut()) }, EsStatus::NullPointer);
    unsafe {
        es_config_free(ptr::null_mut());
        es_ensemble_free(ptr::null_mut());
        es_solver_free(ptr::null_mut());
    }
}

#[test]
fn bad_config_is_invalid() {
    for text in ["grid.n = x\n", "no.such.key = 1\n", "grid.n = 8\ngrid.n = 8\n"] {
        let t = CString::new(text).unwrap();
        let mut cfg = ptr::null_mut();
        assert_eq!(unsafe { es_config_parse(t.as_ptr(), &mut cfg) }, EsStatus::Invalid, "{text}");
        assert!(cfg.is_null());
    }
}

fn target_dir() -> PathBuf {
    let exe = std::env::current_exe().unwrap();
    exe.parent().unwrap().parent().unwrap().to_path_buf()
}

#[test]
fn c_program_links_against_header_and_staticlib() {
    let manifest = Path::new(env!("CARGO_MANIFEST_DIR"));
    let lib = target_dir().join("libeuler_stat_ffi.a");
    let header_dir = manifest.join("include");
    assert!(header_dir.join("euler_stat.h").exists());
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping C link test: no C compiler or static library");
        return;
    }
    let out = tempfile::tempdir().unwrap();
    let exe = out.path().join("smoke");
    let status = Command::new("cc")
        .arg("-std=c99")
        .arg("-Wall")
        .arg("-Werror")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(&header_dir)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let run = Command::new(&exe).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    assert!(String::from_utf8_lossy(&run.stdout).ends_with("ok\n"));
}
