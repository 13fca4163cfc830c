use std::ffi::{c_char, CStr, CString};
use std::path::PathBuf;
use std::process::Command;
use std::ptr;

use cellfree_ffi::*;

fn last_error() -> String {
    let mut buf = vec![0 as c_char; 512];
    unsafe { cf_last_error(buf.as_mut_ptr(), buf.len()) };
    unsafe { CStr::from_ptr(buf.as_ptr()) }.to_string_lossy().into_owned()
}

struct Handles {
    cfg: *mut CfConfig,
    snap: *mut CfSnapshot,
}

impl Handles {
    fn new(json: &str, seed: u64) -> Self {
        let text = CString::new(json).unwrap();
        let mut cfg = ptr::null_mut();
        let mut snap = ptr::null_mut();
        unsafe {
            assert_eq!(
                cf_config_from_json(text.as_ptr(), &mut cfg),
                CfStatus::Ok,
                "{}",
                last_error()
            );
            assert_eq!(
                cf_snapshot_build(cfg, seed, &mut snap),
                CfStatus::Ok,
                "{}",
                last_error()
            );
        }
        Handles { cfg, snap }
    }
}

impl Drop for Handles {
    fn drop(&mut self) {
        unsafe {
            cf_snapshot_free(self.snap);
            cf_config_free(self.cfg);
        }
    }
}

const SMALL: &str = r#"{"M": 8, "N": 4, "K": 3, "tau_up": 2, "tau_dp": 3, "cluster_min": 3}"#;

#[test]
fn evaluate_matches_the_rust_api() {
    let h = Handles::new(SMALL, 3);
    let (mut m, mut k) = (0, 0);
    unsafe { assert_eq!(cf_snapshot_dims(h.snap, &mut m, &mut k), CfStatus::Ok) };
    assert_eq!((m, k), (8, 3));

    let cfg = cellfree::cli::parse_spec(SMALL, "test").unwrap().system;
    let snap = cellfree::build_snapshot(&cfg, 3).unwrap();
    let mut beta = vec![0.0; m * k];
    unsafe { assert_eq!(cf_snapshot_beta(h.snap, beta.as_mut_ptr(), beta.len()), CfStatus::Ok) };
    assert_eq!(beta[k + 2], snap.beta[(1, 2)]);

    for (raw, scheme) in [
        (CfScheme::Cb, "CB"),
        (CfScheme::Ncb, "NCB"),
        (CfScheme::Ecb, "ECB"),
        (CfScheme::Cbdt, "CBDT"),
    ] {
        let scheme: cellfree::Scheme = scheme.parse().unwrap();
        let mut eta = vec![0.0; m * k];
        let mut report = ptr::null_mut();
        let mut sinr = vec![0.0; k];
        let mut se = vec![0.0; k];
        unsafe {
            assert_eq!(
                cf_power_maximal_ratio(h.snap, h.cfg, raw as i32, eta.as_mut_ptr(), eta.len()),
                CfStatus::Ok
            );
            assert_eq!(
                cf_evaluate(h.snap, h.cfg, raw as i32, eta.as_ptr(), eta.len(), &mut report),
                CfStatus::Ok
            );
            assert_eq!(cf_report_num_users(report), k);
            assert_eq!(cf_report_sinr(report, sinr.as_mut_ptr(), k), CfStatus::Ok);
            assert_eq!(cf_report_se(report, se.as_mut_ptr(), k), CfStatus::Ok);
            cf_report_free(report);
        }
        let alloc = cellfree::closedform::maximal_ratio_power(&snap, scheme, 4, Default::default());
        let want = cellfree::closedform::evaluate(&snap, &alloc, &cfg).unwrap();
        assert_eq!(sinr, want.sinr, "{scheme}");
        assert_eq!(se, want.se, "{scheme}");
    }
}

#[test]
fn mmf_round_trip() {
    let h = Handles::new(SMALL, 5);
    let mut sol = ptr::null_mut();
    let mut nu = 0.0;
    let mut eta = vec![0.0; 24];
    unsafe {
        assert_eq!(
            cf_mmf_solve(h.snap, h.cfg, CfScheme::Ecb as i32, 0.0, &mut sol),
            CfStatus::Ok,
            "{}",
            last_error()
        );
        assert_eq!(cf_mmf_nu(sol, &mut nu), CfStatus::Ok);
        assert_eq!(cf_mmf_eta(sol, eta.as_mut_ptr(), eta.len()), CfStatus::Ok);
        cf_mmf_free(sol);
    }
    assert!(nu > 0.0);
    let mut report = ptr::null_mut();
    let mut sinr = [0.0; 3];
    unsafe {
        assert_eq!(
            cf_evaluate(h.snap, h.cfg, CfScheme::Ecb as i32, eta.as_ptr(), 24, &mut report),
            CfStatus::Ok
        );
        cf_report_sinr(report, sinr.as_mut_ptr(), 3);
        cf_report_free(report);
    }
    for s in sinr {
        assert!((s - nu).abs() <= 1e-2 * nu, "{s} vs {nu}");
    }

    unsafe {
        assert_eq!(
            cf_mmf_solve(h.snap, h.cfg, CfScheme::Cbdt as i32, 0.0, &mut sol),
            CfStatus::Validation
        );
    }
    assert!(last_error().contains("CBDT"));
}

#[test]
fn errors_are_reported_not_thrown() {
    let h = Handles::new(SMALL, 1);
    let mut report = ptr::null_mut();
    let mut eta = vec![0.0; 24];
    unsafe {
        assert_eq!(
            cf_snapshot_dims(ptr::null(), ptr::null_mut(), ptr::null_mut()),
            CfStatus::NullPointer
        );
        assert_eq!(
            cf_evaluate(h.snap, h.cfg, 9, eta.as_ptr(), 24, &mut report),
            CfStatus::InvalidArgument
        );
        assert_eq!(
            cf_evaluate(h.snap, h.cfg, 0, eta.as_ptr(), 5, &mut report),
            CfStatus::InvalidArgument
        );
        assert!(last_error().contains("expected 24"));

        eta.fill(1.0);
        assert_eq!(
            cf_evaluate(h.snap, h.cfg, 0, eta.as_ptr(), 24, &mut report),
            CfStatus::InvalidArgument
        );
        assert!(report.is_null());
        assert!(last_error().contains("constraint") || last_error().contains("cluster"));

        assert_eq!(cf_snapshot_gamma(h.snap, eta.as_mut_ptr(), 3), CfStatus::BufferTooSmall);

        let bad = CString::new(r#"{"N": 1, "schemes": ["ECB"]}"#).unwrap();
        let mut cfg = ptr::null_mut();
        assert_eq!(cf_config_from_json(bad.as_ptr(), &mut cfg), CfStatus::Validation);
        assert!(cfg.is_null());
        let unknown = CString::new(r#"{"antenas": 2}"#).unwrap();
        assert_eq!(cf_config_from_json(unknown.as_ptr(), &mut cfg), CfStatus::Validation);
        assert!(last_error().contains("antenas"));

        // message longer than the buffer is truncated, full length returned
        let mut tiny = [0 as c_char; 4];
        let n = cf_last_error(tiny.as_mut_ptr(), tiny.len());
        assert!(n > 3);
        assert_eq!(CStr::from_ptr(tiny.as_ptr()).to_bytes().len(), 3);

        cf_config_free(ptr::null_mut());
    }
}

#[test]
fn default_config_has_paper_dimensions() {
    let mut cfg = ptr::null_mut();
    let (mut m, mut n, mut k) = (0, 0, 0);
    unsafe {
        assert_eq!(cf_config_default(&mut cfg), CfStatus::Ok);
        assert_eq!(cf_config_dims(cfg, &mut m, &mut n, &mut k), CfStatus::Ok);
        cf_config_free(cfg);
        assert_eq!(
            CStr::from_ptr(cf_version()).to_str().unwrap(),
            env!("CARGO_PKG_VERSION")
        );
    }
    assert_eq!((m, n, k), (200, 8, 40));
}

/// Compiles the C smoke test against the generated header and static library.
#[test]
fn c_program_links_against_the_header() {
    let manifest = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let exe = std::env::current_exe().unwrap();
    let lib_dir = exe.parent().and_then(|d| d.parent()).unwrap().to_path_buf();
    let lib = lib_dir.join("libcellfree_ffi.a");
    if !lib.exists() || Command::new("cc").arg("--version").output().is_err() {
        eprintln!("skipping: no C compiler or static library at {}", lib.display());
        return;
    }
    let out = tempfile::tempdir().unwrap();
    let bin = out.path().join("smoke");
    let status = Command::new("cc")
        .arg(manifest.join("tests/c/smoke.c"))
        .arg("-I")
        .arg(manifest.join("include"))
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&bin)
        .status()
        .unwrap();
    assert!(status.success());
    let run = Command::new(&bin).output().unwrap();
    assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    let line = String::from_utf8(run.stdout).unwrap();
    assert!(line.starts_with(env!("CARGO_PKG_VERSION")), "{line}");
}
