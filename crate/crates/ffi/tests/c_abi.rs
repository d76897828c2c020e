use std::ffi::{c_char, CString};
use std::ptr;

use latent_spectrum::boxspectrum::{self, BoxSpec};
use latent_spectrum_ffi::*;

fn default_spec() -> LsBoxSpec {
    let mut spec = std::mem::MaybeUninit::<LsBoxSpec>::uninit();
    assert_eq!(unsafe { ls_box_spec_default(spec.as_mut_ptr()) }, LsStatus::Ok);
    unsafe { spec.assume_init() }
}

fn last_error() -> String {
    let mut buf = vec![0 as c_char; ls_last_error_length() + 1];
    let n = unsafe { ls_last_error_message(buf.as_mut_ptr(), buf.len()) };
    let bytes: Vec<u8> = buf[..n].iter().map(|&c| c as u8).collect();
    String::from_utf8(bytes).unwrap()
}

#[test]
fn scalar_functions_match_the_library() {
    let spec = default_spec();
    let lib = BoxSpec::default();
    let mut out = 0.0;
    unsafe {
        assert_eq!(ls_e0(&spec, 2.0, &mut out), LsStatus::Ok);
        assert_eq!(out, boxspectrum::e0(2.0, &lib));
        assert_eq!(ls_e1(&spec, 1.3, &mut out), LsStatus::Ok);
        assert_eq!(out, boxspectrum::e1_closed(1.3, &lib));
        assert_eq!(ls_coupling(&spec, 2, 5, &mut out), LsStatus::Ok);
        assert_eq!(out, boxspectrum::coupling(2, 5, &lib));
        let psi = boxspectrum::phi(1.0, 0.3, &lib);
        assert_eq!(ls_quantum_number(&spec, psi, 0.3, true, &mut out), LsStatus::Ok);
        assert!((out - 1.0).abs() < 1e-9);
    }
}

#[test]
fn errors_carry_codes_and_messages() {
    let spec = default_spec();
    let mut out = 0.0;
    unsafe {
        assert_eq!(ls_e0(ptr::null(), 1.0, &mut out), LsStatus::NullPointer);
        assert!(last_error().contains("spec"));
        assert_eq!(ls_e0(&spec, 1.0, ptr::null_mut()), LsStatus::NullPointer);
        assert_eq!(ls_coupling(&spec, 0, 1, &mut out), LsStatus::InvalidArgument);
        assert_eq!(ls_quantum_number(&spec, 0.5, 0.0, true, &mut out), LsStatus::Contract);
        assert!(last_error().contains("margin"));
        let bad = LsBoxSpec { alpha: -1.0, ..spec };
        assert_eq!(ls_e1(&bad, 1.0, &mut out), LsStatus::Config);
        assert_eq!(ls_e1(&spec, 1.0, &mut out), LsStatus::Ok);
        assert_eq!(ls_last_error_length(), 0);
    }
}

#[test]
fn truncated_error_copy() {
    let mut out = 0.0;
    unsafe { ls_e0(ptr::null(), 1.0, &mut out) };
    let mut buf = [0 as c_char; 4];
    let n = unsafe { ls_last_error_message(buf.as_mut_ptr(), buf.len()) };
    assert_eq!(n, 3);
    assert_eq!(buf[3], 0);
    assert_eq!(unsafe { ls_last_error_message(ptr::null_mut(), 10) }, 0);
}

#[test]
fn spectrum_table_handle() {
    let spec = default_spec();
    let mut table: *mut LsSpectrumTable = ptr::null_mut();
    unsafe {
        assert_eq!(ls_spectrum_table_new(&spec, &mut table), LsStatus::Ok);
        assert!(!table.is_null());
        assert_eq!(ls_spectrum_table_modes(table), spec.modes);
        let (mut e0, mut e1, mut c) = (0.0, 0.0, 0.0);
        assert_eq!(ls_spectrum_table_energy(table, 3, &mut e0, &mut e1), LsStatus::Ok);
        assert_eq!(e0, boxspectrum::e0(3.0, &BoxSpec::default()));
        assert!(e1.abs() < 1e-12);
        assert_eq!(ls_spectrum_table_coupling(table, 1, 4, &mut c), LsStatus::Ok);
        assert_eq!(c, boxspectrum::coupling(1, 4, &BoxSpec::default()));
        assert_eq!(
            ls_spectrum_table_energy(table, spec.modes + 1, &mut e0, &mut e1),
            LsStatus::InvalidArgument
        );
        ls_spectrum_table_free(table);
        ls_spectrum_table_free(ptr::null_mut());
        assert_eq!(ls_spectrum_table_modes(ptr::null()), 0);
    }
}

#[test]
fn alignment_and_distance() {
    let a = [0.0, 0.0, 1.0, 0.0, 0.0, 2.0, 3.0, 1.0];
    // rotate each row by 90 degrees
    let b: Vec<f64> = a.chunks(2).flat_map(|r| [-r[1], r[0]]).collect();
    let mut out = 0.0;
    unsafe {
        assert_eq!(ls_alignment(a.as_ptr(), b.as_ptr(), 4, 2, &mut out), LsStatus::Ok);
        assert!((out - 1.0).abs() < 1e-12);
        assert_eq!(ls_alignment(a.as_ptr(), ptr::null(), 4, 2, &mut out), LsStatus::NullPointer);
        let (s, t) = ([2.0, 4.0], [10.0, 20.0]);
        assert_eq!(ls_spectrum_distance(s.as_ptr(), t.as_ptr(), 2, &mut out), LsStatus::Ok);
        assert_eq!(out, 0.0);
        assert_eq!(ls_spectrum_distance(s.as_ptr(), t.as_ptr(), 0, &mut out), LsStatus::Contract);
    }
}

#[test]
fn pipeline_through_config_handle() {
    let dir = tempfile::tempdir().unwrap();
    let text = CString::new(
        "[dataset]\nn_samples = 120\nn_features = 6\nn_informative = 3\nn_redundant = 1\n\
         [vae]\nencoder_hidden = [8]\ndecoder_hidden = [8]\nepochs = 2\n\
         [assign]\nhidden = [4]\nepochs = 2\n",
    )
    .unwrap();
    let out = CString::new(dir.path().to_str().unwrap()).unwrap();
    let mut cfg: *mut LsRunConfig = ptr::null_mut();
    unsafe {
        assert_eq!(ls_config_parse(text.as_ptr(), &mut cfg), LsStatus::Ok);
        assert_eq!(ls_config_set_seed(cfg, 7), LsStatus::Ok);
        assert_eq!(ls_config_set_seed(cfg, u64::MAX), LsStatus::Config);
        assert_eq!(ls_run_pipeline(cfg, out.as_ptr(), false), LsStatus::Ok);
        assert!(dir.path().join("assignment.csv").exists());
        assert_eq!(ls_run_pipeline(cfg, out.as_ptr(), false), LsStatus::WouldOverwrite);
        assert_eq!(ls_run_pipeline(cfg, out.as_ptr(), true), LsStatus::Ok);
        ls_config_free(cfg);

        let bad = CString::new("[dataset]\nk_classes = 1\n").unwrap();
        let mut other: *mut LsRunConfig = ptr::null_mut();
        assert_eq!(ls_config_parse(bad.as_ptr(), &mut other), LsStatus::Config);
        assert!(other.is_null());
        assert!(last_error().contains("k_classes"));
        let missing = CString::new(dir.path().join("nope.toml").to_str().unwrap()).unwrap();
        assert_eq!(ls_config_load(missing.as_ptr(), &mut other), LsStatus::Config);
    }
}

#[test]
fn version_string() {
    let v = unsafe { std::ffi::CStr::from_ptr(ls_version()) };
    assert_eq!(v.to_str().unwrap(), env!("CARGO_PKG_VERSION"));
}

#[test]
fn header_is_generated() {
    let header = std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/latent_spectrum.h")).unwrap();
    for name in ["ls_e1", "ls_spectrum_table_new", "ls_run_pipeline", "LS_STATUS_WOULD_OVERWRITE", "typedef struct LsSpectrumTable LsSpectrumTable"] {
        assert!(header.contains(name), "{name}");
    }
}
