//! C interface to mipt-shadows.
//!
//! Every fallible function returns an [`MsStatus`]. On failure the message is
//! available from [`ms_last_error`] until the next call on the same thread.

use mipt_shadows::circuit::{GateEnsemble, MonitoredCircuitSpec, Prescramble};
use mipt_shadows::cli::{run, ExperimentConfig};
use mipt_shadows::dense::DenseState;
use mipt_shadows::ensemble::{feature_run, moments_run, EnsembleMoments, Subsets};
use mipt_shadows::error::{Error, ErrorClass};
use mipt_shadows::infopower::subentropy_spectrum;
use mipt_shadows::shadow::{lambdas_from_feature, shadow_norm_means};
use mipt_shadows::stab::StabilizerMixedState;
use mipt_shadows::u1::ChargeBlockState;
use mipt_shadows::xeb::weingarten3;
use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MsStatus {
    Ok = 0,
    NullPointer = 1,
    Config = 2,
    Resource = 3,
    Numerical = 4,
    Io = 5,
    Panic = 6,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MsGateEnsemble {
    Haar = 0,
    Clifford = 1,
    U1Haar = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MsPrescramble {
    None = 0,
    GlobalHaar = 1,
    GlobalClifford = 2,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MsEngine {
    Dense = 0,
    Stabilizer = 1,
    ChargeBlock = 2,
}

/// Ensemble moments with standard errors.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct MsMoments {
    pub purity: f64,
    pub purity_stderr: f64,
    pub purity3: f64,
    pub purity3_stderr: f64,
    pub purity_modified: f64,
    pub purity_modified_stderr: f64,
    pub einf: f64,
    pub einf_stderr: f64,
    pub ess: f64,
}

/// Harmonic, arithmetic and geometric means of the Pauli shadow norms.
#[repr(C)]
#[derive(Clone, Copy, Debug, Default)]
pub struct MsShadowNorms {
    pub harmonic: f64,
    pub arithmetic: f64,
    pub geometric: f64,
    pub unlearnable: u64,
}

/// Opaque circuit description.
pub struct MsSpec(MonitoredCircuitSpec);

/// Opaque experiment configuration.
pub struct MsConfig(ExperimentConfig);

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn status_of(e: &Error) -> MsStatus {
    match e.class() {
        ErrorClass::Config => MsStatus::Config,
        ErrorClass::Resource => MsStatus::Resource,
        ErrorClass::Numerical => MsStatus::Numerical,
        ErrorClass::Io => MsStatus::Io,
    }
}

fn guard<F: FnOnce() -> Result<(), MsStatus>>(f: F) -> MsStatus {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => MsStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic".into());
            MsStatus::Panic
        }
    }
}

fn fail(e: Error) -> MsStatus {
    let s = status_of(&e);
    set_error(e.to_string());
    s
}

fn null(what: &str) -> MsStatus {
    set_error(format!("{what} is null"));
    MsStatus::NullPointer
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn ms_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Message of the last failed call on this thread, or NULL. The pointer stays
/// valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn ms_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Creates a circuit description. Free with [`ms_spec_free`].
///
/// # Safety
/// `out` must be a valid pointer to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_spec_new(
    n_qubits: usize,
    depth: usize,
    measurement_rate: f64,
    gates: MsGateEnsemble,
    prescramble: MsPrescramble,
    out: *mut *mut MsSpec,
) -> MsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let gates = match gates {
            MsGateEnsemble::Haar => GateEnsemble::Haar,
            MsGateEnsemble::Clifford => GateEnsemble::Clifford2q,
            MsGateEnsemble::U1Haar => GateEnsemble::U1Haar,
        };
        let pre = match prescramble {
            MsPrescramble::None => Prescramble::None,
            MsPrescramble::GlobalHaar => Prescramble::GlobalHaar,
            MsPrescramble::GlobalClifford => Prescramble::GlobalClifford,
        };
        let spec = MonitoredCircuitSpec::new(n_qubits, depth, measurement_rate, gates).with_prescramble(pre);
        spec.validate().map_err(fail)?;
        *out = Box::into_raw(Box::new(MsSpec(spec)));
        Ok(())
    })
}

/// # Safety
/// `spec` must be NULL or a pointer from [`ms_spec_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ms_spec_free(spec: *mut MsSpec) {
    if !spec.is_null() {
        drop(Box::from_raw(spec));
    }
}

/// Writes the 64-character hex hash of the circuit description and a NUL into `buf`.
///
/// # Safety
/// `spec` must be a live handle and `buf` must hold at least 65 bytes.
#[no_mangle]
pub unsafe extern "C" fn ms_spec_hash(spec: *const MsSpec, buf: *mut c_char) -> MsStatus {
    guard(|| {
        let spec = spec.as_ref().ok_or_else(|| null("spec"))?;
        if buf.is_null() {
            return Err(null("buf"));
        }
        let h = CString::new(spec.0.hash()).expect("hex has no NUL");
        ptr::copy_nonoverlapping(h.as_ptr(), buf, 65);
        Ok(())
    })
}

fn moments_for(spec: &MonitoredCircuitSpec, engine: MsEngine, n_traj: usize, seed: u64) -> mipt_shadows::error::Result<EnsembleMoments> {
    match engine {
        MsEngine::Dense => moments_run::<DenseState>(spec, n_traj, seed),
        MsEngine::Stabilizer => moments_run::<StabilizerMixedState>(spec, n_traj, seed),
        MsEngine::ChargeBlock => moments_run::<ChargeBlockState>(spec, n_traj, seed),
    }
}

/// Monte Carlo moments of the eavesdropper's ensemble.
///
/// # Safety
/// `spec` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_moments(spec: *const MsSpec, engine: MsEngine, n_traj: usize, seed: u64, out: *mut MsMoments) -> MsStatus {
    guard(|| {
        let spec = spec.as_ref().ok_or_else(|| null("spec"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let m = moments_for(&spec.0, engine, n_traj, seed).map_err(fail)?;
        *out = MsMoments {
            purity: m.purity.value,
            purity_stderr: m.purity.stderr,
            purity3: m.purity3.value,
            purity3_stderr: m.purity3.stderr,
            purity_modified: m.purity_modified.value,
            purity_modified_stderr: m.purity_modified.stderr,
            einf: m.einf.value,
            einf_stderr: m.einf.stderr,
            ess: m.ess,
        };
        Ok(())
    })
}

/// Shadow-norm means from the subsystem-purity table of `n_traj` trajectories.
///
/// # Safety
/// `spec` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_shadow_norms(spec: *const MsSpec, engine: MsEngine, n_traj: usize, seed: u64, out: *mut MsShadowNorms) -> MsStatus {
    guard(|| {
        let spec = spec.as_ref().ok_or_else(|| null("spec"))?;
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        let acc = match engine {
            MsEngine::Dense => feature_run::<DenseState>(&spec.0, n_traj, seed, &Subsets::All),
            MsEngine::Stabilizer => feature_run::<StabilizerMixedState>(&spec.0, n_traj, seed, &Subsets::All),
            MsEngine::ChargeBlock => feature_run::<ChargeBlockState>(&spec.0, n_traj, seed, &Subsets::All),
        }
        .map_err(fail)?;
        let m = lambdas_from_feature(&acc.feature()).and_then(|l| shadow_norm_means(&l)).map_err(fail)?;
        *out = MsShadowNorms { harmonic: m.harmonic, arithmetic: m.arithmetic, geometric: m.geometric, unlearnable: m.unlearnable };
        Ok(())
    })
}

/// Subentropy of a probability spectrum.
///
/// # Safety
/// `spectrum` must point to `len` readable doubles and `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn ms_subentropy(spectrum: *const f64, len: usize, out: *mut f64) -> MsStatus {
    guard(|| {
        if spectrum.is_null() {
            return Err(null("spectrum"));
        }
        let out = out.as_mut().ok_or_else(|| null("out"))?;
        *out = subentropy_spectrum(std::slice::from_raw_parts(spectrum, len)).map_err(fail)?;
        Ok(())
    })
}

/// Third-order Weingarten values (identity, transposition, 3-cycle) at dimension `d`.
///
/// # Safety
/// `out` must point to 3 writable doubles.
#[no_mangle]
pub unsafe extern "C" fn ms_weingarten3(d: usize, out: *mut f64) -> MsStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let (e, t, c) = weingarten3(d).map_err(fail)?;
        std::slice::from_raw_parts_mut(out, 3).copy_from_slice(&[e, t, c]);
        Ok(())
    })
}

/// Parses and validates a JSON experiment configuration. Free with [`ms_config_free`].
///
/// # Safety
/// `json` must be a NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn ms_config_from_json(json: *const c_char, out: *mut *mut MsConfig) -> MsStatus {
    guard(|| {
        if json.is_null() {
            return Err(null("json"));
        }
        if out.is_null() {
            return Err(null("out"));
        }
        let s = CStr::from_ptr(json).to_str().map_err(|_| {
            set_error("configuration is not valid UTF-8".into());
            MsStatus::Config
        })?;
        let cfg = ExperimentConfig::from_json(s).map_err(fail)?;
        *out = Box::into_raw(Box::new(MsConfig(cfg)));
        Ok(())
    })
}

/// # Safety
/// `config` must be NULL or a pointer from [`ms_config_from_json`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn ms_config_free(config: *mut MsConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Runs the configured experiment and writes its outputs to the configured directory.
///
/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn ms_config_run(config: *const MsConfig) -> MsStatus {
    guard(|| {
        let cfg = config.as_ref().ok_or_else(|| null("config"))?;
        run(&cfg.0).map_err(fail)?;
        Ok(())
    })
}
