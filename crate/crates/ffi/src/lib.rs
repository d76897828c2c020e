//! C ABI over `latent_spectrum`.
//!
//! Every fallible function returns an [`LsStatus`]; on failure the message
//! is kept per thread and can be copied out with [`ls_last_error_message`].
//! Handles are opaque pointers owned by the caller and released with the
//! matching `*_free` function. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use latent_spectrum::assign::{self, InversionMode};
use latent_spectrum::boxspectrum::{self, BoxSpec, CouplingMode, SpectrumTable};
use latent_spectrum::config::RunConfig;
use latent_spectrum::{degeneracy, pipeline, Error};
use nalgebra::DMatrix;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LsStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Contract = 4,
    Training = 5,
    MissingUpstream = 6,
    WouldOverwrite = 7,
    Parse = 8,
    Io = 9,
    Panic = 10,
}

/// Physical configuration of the box. `textbook_coupling` selects
/// energy-denominator weighting of the expansion coefficients.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct LsBoxSpec {
    pub length: f64,
    pub kinetic: f64,
    pub frequency: u32,
    pub alpha: f64,
    pub modes: usize,
    pub textbook_coupling: bool,
}

impl From<LsBoxSpec> for BoxSpec {
    fn from(s: LsBoxSpec) -> Self {
        BoxSpec {
            length: s.length,
            kinetic: s.kinetic,
            frequency: s.frequency,
            alpha: s.alpha,
            modes: s.modes,
            coupling_mode: if s.textbook_coupling {
                CouplingMode::Textbook
            } else {
                CouplingMode::Bare
            },
        }
    }
}

/// Tabulated spectrum for modes `1..=M`.
pub struct LsSpectrumTable(SpectrumTable);

/// Parsed run configuration.
pub struct LsRunConfig(RunConfig);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(msg: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(e: &Error) -> LsStatus {
    match e {
        Error::Config { .. } => LsStatus::Config,
        Error::Contract(_) => LsStatus::Contract,
        Error::Training(_) => LsStatus::Training,
        Error::MissingUpstream(_) => LsStatus::MissingUpstream,
        Error::WouldOverwrite(_) => LsStatus::WouldOverwrite,
        Error::Parse { .. } => LsStatus::Parse,
        Error::Io(_) | Error::Csv(_) => LsStatus::Io,
    }
}

struct Fail(LsStatus, String);

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail(status_of(&e), e.to_string())
    }
}

fn null(what: &str) -> Fail {
    Fail(LsStatus::NullPointer, format!("{what} is null"))
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> LsStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error(String::new());
            LsStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("panic inside latent-spectrum".into());
            LsStatus::Panic
        }
    }
}

unsafe fn write_out<T>(out: *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(null("output pointer"));
    }
    unsafe { out.write(value) };
    Ok(())
}

unsafe fn read_spec(spec: *const LsBoxSpec) -> Result<BoxSpec, Fail> {
    if spec.is_null() {
        return Err(null("spec"));
    }
    let spec: BoxSpec = unsafe { *spec }.into();
    spec.validate()?;
    Ok(spec)
}

unsafe fn read_str<'a>(s: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if s.is_null() {
        return Err(null(what));
    }
    unsafe { CStr::from_ptr(s) }
        .to_str()
        .map_err(|_| Fail(LsStatus::InvalidArgument, format!("{what} is not valid UTF-8")))
}

unsafe fn read_slice<'a>(p: *const f64, len: usize, what: &str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(null(what));
    }
    Ok(unsafe { std::slice::from_raw_parts(p, len) })
}

/// Length in bytes of the last error message on this thread, excluding the
/// terminating NUL.
#[no_mangle]
pub extern "C" fn ls_last_error_length() -> usize {
    LAST_ERROR.with(|e| e.borrow().len())
}

/// Copies the last error message into `buf` (NUL-terminated, truncated to
/// `len - 1` bytes). Returns the number of bytes written excluding the NUL.
///
/// # Safety
/// `buf` must point to at least `len` writable bytes.
#[no_mangle]
pub unsafe extern "C" fn ls_last_error_message(buf: *mut c_char, len: usize) -> usize {
    if buf.is_null() || len == 0 {
        return 0;
    }
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        let n = msg.len().min(len - 1);
        unsafe {
            ptr::copy_nonoverlapping(msg.as_ptr().cast::<c_char>(), buf, n);
            *buf.add(n) = 0;
        }
        n
    })
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ls_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `out` must be a valid pointer to an `LsBoxSpec`.
#[no_mangle]
pub unsafe extern "C" fn ls_box_spec_default(out: *mut LsBoxSpec) -> LsStatus {
    guard(|| {
        let d = BoxSpec::default();
        unsafe {
            write_out(
                out,
                LsBoxSpec {
                    length: d.length,
                    kinetic: d.kinetic,
                    frequency: d.frequency,
                    alpha: d.alpha,
                    modes: d.modes,
                    textbook_coupling: d.coupling_mode == CouplingMode::Textbook,
                },
            )
        }
    })
}

/// Unperturbed energy `E⁰(n)` for real `n`.
///
/// # Safety
/// `spec` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ls_e0(spec: *const LsBoxSpec, n: f64, out: *mut f64) -> LsStatus {
    guard(|| unsafe {
        let spec = read_spec(spec)?;
        write_out(out, boxspectrum::e0(n, &spec))
    })
}

/// First-order correction `E¹(n)` for real `n`.
///
/// # Safety
/// `spec` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ls_e1(spec: *const LsBoxSpec, n: f64, out: *mut f64) -> LsStatus {
    guard(|| unsafe {
        let spec = read_spec(spec)?;
        write_out(out, boxspectrum::e1_closed(n, &spec))
    })
}

/// Matrix element `⟨φₘ|V|φₙ⟩` for integer modes `m, n ≥ 1`.
///
/// # Safety
/// `spec` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ls_coupling(spec: *const LsBoxSpec, m: u32, n: u32, out: *mut f64) -> LsStatus {
    guard(|| unsafe {
        let spec = read_spec(spec)?;
        if m == 0 || n == 0 {
            return Err(Fail(LsStatus::InvalidArgument, "modes start at 1".into()));
        }
        write_out(out, boxspectrum::coupling(m, n, &spec))
    })
}

/// Continuous quantum number from `psi` at `z_box`. `corrected` selects the
/// exact inverse of φₙ; otherwise the literal `asin(L ψ² / 2)` form is used.
///
/// # Safety
/// `spec` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ls_quantum_number(
    spec: *const LsBoxSpec,
    psi: f64,
    z_box: f64,
    corrected: bool,
    out: *mut f64,
) -> LsStatus {
    guard(|| unsafe {
        let spec = read_spec(spec)?;
        let mode = if corrected {
            InversionMode::Corrected
        } else {
            InversionMode::PaperLiteral
        };
        write_out(out, assign::quantum_number(psi, z_box, &spec, mode)?)
    })
}

/// Builds the spectrum table for `spec`.
///
/// # Safety
/// `spec` and `out` must be valid pointers. Release the handle with
/// [`ls_spectrum_table_free`].
#[no_mangle]
pub unsafe extern "C" fn ls_spectrum_table_new(
    spec: *const LsBoxSpec,
    out: *mut *mut LsSpectrumTable,
) -> LsStatus {
    guard(|| unsafe {
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let spec = read_spec(spec)?;
        let table = boxspectrum::build_table(&spec)?;
        write_out(out, Box::into_raw(Box::new(LsSpectrumTable(table))))
    })
}

/// # Safety
/// `table` must be null or a handle from [`ls_spectrum_table_new`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn ls_spectrum_table_free(table: *mut LsSpectrumTable) {
    if !table.is_null() {
        drop(unsafe { Box::from_raw(table) });
    }
}

/// Number of modes in the table (0 for a null handle).
///
/// # Safety
/// `table` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ls_spectrum_table_modes(table: *const LsSpectrumTable) -> usize {
    if table.is_null() {
        return 0;
    }
    unsafe { &*table }.0.modes()
}

/// `E⁰ₙ` and `E¹ₙ` for mode `n` in `1..=M`.
///
/// # Safety
/// `table`, `e0` and `e1` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ls_spectrum_table_energy(
    table: *const LsSpectrumTable,
    n: usize,
    e0: *mut f64,
    e1: *mut f64,
) -> LsStatus {
    guard(|| unsafe {
        if table.is_null() {
            return Err(null("table"));
        }
        let t = &(*table).0;
        if n == 0 || n > t.modes() {
            return Err(Fail(
                LsStatus::InvalidArgument,
                format!("mode {n} outside 1..={}", t.modes()),
            ));
        }
        write_out(e0, t.e0[n - 1])?;
        write_out(e1, t.e1[n - 1])
    })
}

/// Tabulated `⟨φₘ|V|φₙ⟩` for `m, n` in `1..=M`.
///
/// # Safety
/// `table` and `out` must be valid pointers.
#[no_mangle]
pub unsafe extern "C" fn ls_spectrum_table_coupling(
    table: *const LsSpectrumTable,
    m: usize,
    n: usize,
    out: *mut f64,
) -> LsStatus {
    guard(|| unsafe {
        if table.is_null() {
            return Err(null("table"));
        }
        let t = &(*table).0;
        if m == 0 || n == 0 || m > t.modes() || n > t.modes() {
            return Err(Fail(
                LsStatus::InvalidArgument,
                format!("modes ({m}, {n}) outside 1..={}", t.modes()),
            ));
        }
        write_out(out, t.coupling[(m - 1, n - 1)])
    })
}

/// Orthogonal alignment score of two row-major `rows × cols` point clouds.
///
/// # Safety
/// `a` and `b` must each point to `rows * cols` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ls_alignment(
    a: *const f64,
    b: *const f64,
    rows: usize,
    cols: usize,
    out: *mut f64,
) -> LsStatus {
    guard(|| unsafe {
        let len = rows
            .checked_mul(cols)
            .ok_or_else(|| Fail(LsStatus::InvalidArgument, "rows * cols overflows".into()))?;
        let a = DMatrix::from_row_slice(rows, cols, read_slice(a, len, "a")?);
        let b = DMatrix::from_row_slice(rows, cols, read_slice(b, len, "b")?);
        write_out(out, degeneracy::cloud_alignment(&a, &b)?)
    })
}

/// Distance between two class-mean spectra of length `len`.
///
/// # Safety
/// `a` and `b` must each point to `len` doubles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ls_spectrum_distance(
    a: *const f64,
    b: *const f64,
    len: usize,
    out: *mut f64,
) -> LsStatus {
    guard(|| unsafe {
        let a = read_slice(a, len, "a")?;
        let b = read_slice(b, len, "b")?;
        write_out(out, degeneracy::spectrum_distance(a, b)?)
    })
}

/// Parses a run configuration from text.
///
/// # Safety
/// `text` must be a NUL-terminated string and `out` a valid pointer. Release
/// the handle with [`ls_config_free`].
#[no_mangle]
pub unsafe extern "C" fn ls_config_parse(text: *const c_char, out: *mut *mut LsRunConfig) -> LsStatus {
    guard(|| unsafe {
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let cfg = RunConfig::parse(read_str(text, "text")?)?;
        write_out(out, Box::into_raw(Box::new(LsRunConfig(cfg))))
    })
}

/// Loads a run configuration from a file.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ls_config_load(path: *const c_char, out: *mut *mut LsRunConfig) -> LsStatus {
    guard(|| unsafe {
        if out.is_null() {
            return Err(null("output pointer"));
        }
        let cfg = RunConfig::load(&PathBuf::from(read_str(path, "path")?))?;
        write_out(out, Box::into_raw(Box::new(LsRunConfig(cfg))))
    })
}

/// Replaces the run seed.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ls_config_set_seed(config: *mut LsRunConfig, seed: u64) -> LsStatus {
    guard(|| unsafe {
        if config.is_null() {
            return Err(null("config"));
        }
        let cfg = &mut (*config).0;
        let updated = cfg.clone().with_seed(seed);
        updated.validate()?;
        *cfg = updated;
        Ok(())
    })
}

/// # Safety
/// `config` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn ls_config_free(config: *mut LsRunConfig) {
    if !config.is_null() {
        drop(unsafe { Box::from_raw(config) });
    }
}

/// Runs the configured stages into `out_dir`, or into the config's own
/// output directory when `out_dir` is null.
///
/// # Safety
/// `config` must be a live handle; `out_dir` null or a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn ls_run_pipeline(
    config: *const LsRunConfig,
    out_dir: *const c_char,
    overwrite: bool,
) -> LsStatus {
    guard(|| unsafe {
        if config.is_null() {
            return Err(null("config"));
        }
        let cfg = &(*config).0;
        let dir = if out_dir.is_null() {
            cfg.out.clone()
        } else {
            PathBuf::from(read_str(out_dir, "out_dir")?)
        };
        pipeline::run_pipeline(cfg, &dir, overwrite)?;
        Ok(())
    })
}
