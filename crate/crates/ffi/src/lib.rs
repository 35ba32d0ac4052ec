//! C interface to phasor networks.
//!
//! Every fallible call returns a [`PnStatus`]; on anything but `PN_STATUS_OK`
//! the message is available from [`pn_last_error`] until the next failing
//! call on the same thread. Models live behind an opaque [`PnModel`] handle
//! that must be released with [`pn_model_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use phasornet::network::{forward_atemporal, load_model, ForwardMode, Model};
use phasornet::phasor::{phasor_activate, predict_class};
use phasornet::temporal::{impulse_closed_form, simulate_network, RFParams, SimOptions};
use phasornet::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PnStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    LengthMismatch = 3,
    Io = 4,
    MalformedModel = 5,
    /// Temporal run produced no output spikes.
    Silent = 6,
    Panic = 7,
}

/// Opaque trained model.
pub struct PnModel {
    inner: Model,
}

/// Resonate-and-fire parameters; fill with [`pn_rf_params_default`].
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct PnRfParams {
    pub period: f64,
    pub leakage: f64,
    pub box_width: f64,
    pub threshold: f64,
    pub refractory: f64,
    pub steps_per_cycle: usize,
    pub n_cycles: usize,
}

impl From<PnRfParams> for RFParams {
    fn from(p: PnRfParams) -> Self {
        RFParams {
            period: p.period,
            leakage: p.leakage,
            box_width: p.box_width,
            threshold: p.threshold,
            refractory: p.refractory,
            steps_per_cycle: p.steps_per_cycle,
            n_cycles: p.n_cycles,
            ..RFParams::default()
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = msg);
}

fn status_of(err: &Error) -> PnStatus {
    match err {
        Error::LengthMismatch { .. } => PnStatus::LengthMismatch,
        Error::Io { .. } => PnStatus::Io,
        Error::MalformedModel { .. } | Error::Json(_) => PnStatus::MalformedModel,
        _ => PnStatus::InvalidArgument,
    }
}

/// Runs `f`, turning errors and panics into a status plus message.
fn guard(f: impl FnOnce() -> Result<(), (PnStatus, String)>) -> PnStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PnStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            PnStatus::Panic
        }
    }
}

fn lib(err: Error) -> (PnStatus, String) {
    (status_of(&err), err.to_string())
}

fn null(what: &str) -> (PnStatus, String) {
    (PnStatus::NullPointer, format!("{what} is null"))
}

/// # Safety
/// `p` must be null or valid for `n` reads.
unsafe fn input<'a>(p: *const f64, n: usize, what: &str) -> Result<&'a [f64], (PnStatus, String)> {
    if n == 0 {
        return Ok(&[]);
    }
    if p.is_null() {
        return Err(null(what));
    }
    Ok(slice::from_raw_parts(p, n))
}

/// Message of the last failure on this thread; empty if none. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn pn_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Loads a model JSON file into `*out`.
///
/// # Safety
/// `path` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pn_model_load(path: *const c_char, out: *mut *mut PnModel) -> PnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = ptr::null_mut();
        if path.is_null() {
            return Err(null("path"));
        }
        let path = CStr::from_ptr(path).to_str().map_err(|_| (PnStatus::InvalidArgument, "path is not UTF-8".into()))?;
        let model = load_model(path).map_err(lib)?;
        *out = Box::into_raw(Box::new(PnModel { inner: model }));
        Ok(())
    })
}

/// Releases a model; null is ignored.
///
/// # Safety
/// `model` must come from [`pn_model_load`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn pn_model_free(model: *mut PnModel) {
    if !model.is_null() {
        drop(Box::from_raw(model));
    }
}

/// Input (pixel) count and class count of a model.
///
/// # Safety
/// `model` must be a live handle; `input_dim` and `n_classes` writable.
#[no_mangle]
pub unsafe extern "C" fn pn_model_dims(model: *const PnModel, input_dim: *mut usize, n_classes: *mut usize) -> PnStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if input_dim.is_null() || n_classes.is_null() {
            return Err(null("output"));
        }
        *input_dim = m.inner.input_dim();
        *n_classes = m.inner.n_classes;
        Ok(())
    })
}

/// Atemporal inference on one image of intensities in [0, 1]. Writes the
/// output phases (`n_classes` values) when `phases_out` is non-null and the
/// predicted class to `class_out`.
///
/// # Safety
/// `img` must hold `len` doubles; `phases_out` room for `n_classes`.
#[no_mangle]
pub unsafe extern "C" fn pn_predict_atemporal(
    model: *const PnModel,
    img: *const f64,
    len: usize,
    phases_out: *mut f64,
    class_out: *mut usize,
) -> PnStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        if class_out.is_null() {
            return Err(null("class_out"));
        }
        let img = input(img, len, "img")?;
        let (out, _) = forward_atemporal(&m.inner, img, ForwardMode::Eval).map_err(lib)?;
        if !phases_out.is_null() {
            ptr::copy_nonoverlapping(out.as_ptr(), phases_out, out.len());
        }
        *class_out = predict_class(&out).map_err(lib)?;
        Ok(())
    })
}

/// Default resonate-and-fire parameters.
#[no_mangle]
pub extern "C" fn pn_rf_params_default() -> PnRfParams {
    let p = RFParams::default();
    PnRfParams {
        period: p.period,
        leakage: p.leakage,
        box_width: p.box_width,
        threshold: p.threshold,
        refractory: p.refractory,
        steps_per_cycle: p.steps_per_cycle,
        n_cycles: p.n_cycles,
    }
}

/// Spiking inference on one image. The decoded output phases go to
/// `phases_out` (NaN for neurons that never fired) and the total synaptic
/// operation count to `synops_out`, both optional. Returns
/// `PN_STATUS_SILENT` when no output neuron fired.
///
/// # Safety
/// As [`pn_predict_atemporal`]; `params` must be readable.
#[no_mangle]
pub unsafe extern "C" fn pn_simulate(
    model: *const PnModel,
    img: *const f64,
    len: usize,
    params: *const PnRfParams,
    phases_out: *mut f64,
    synops_out: *mut u64,
    class_out: *mut usize,
) -> PnStatus {
    guard(|| {
        let m = model.as_ref().ok_or_else(|| null("model"))?;
        let p: RFParams = (*params.as_ref().ok_or_else(|| null("params"))?).into();
        if class_out.is_null() {
            return Err(null("class_out"));
        }
        let img = input(img, len, "img")?;
        let run = simulate_network(&m.inner, img, &p, &SimOptions::default()).map_err(lib)?;
        if !phases_out.is_null() {
            for (j, ph) in run.output_phases.iter().enumerate() {
                *phases_out.add(j) = ph.unwrap_or(f64::NAN);
            }
        }
        if !synops_out.is_null() {
            *synops_out = run.synops.total;
        }
        match run.prediction {
            Some(c) => {
                *class_out = c;
                Ok(())
            }
            None => Err((PnStatus::Silent, "no output neuron fired".into())),
        }
    })
}

/// Phasor activation of one neuron: the normalized angle of `Σ wᵢ·e^{iπxᵢ}`.
///
/// # Safety
/// `x` and `w` must each hold `n` doubles; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn pn_activate(x: *const f64, w: *const f64, n: usize, out: *mut f64) -> PnStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        *out = phasor_activate(input(x, n, "x")?, input(w, n, "w")?).map_err(lib)?;
        Ok(())
    })
}

/// `Σ wᵢ·e^{−iπxᵢ}`, the potential after one lossless cycle of weighted
/// impulses; real and imaginary parts go to `re` and `im`.
///
/// # Safety
/// `x` and `w` must each hold `n` doubles; `re` and `im` writable.
#[no_mangle]
pub unsafe extern "C" fn pn_impulse_closed_form(
    x: *const f64,
    w: *const f64,
    n: usize,
    re: *mut f64,
    im: *mut f64,
) -> PnStatus {
    guard(|| {
        if re.is_null() || im.is_null() {
            return Err(null("out"));
        }
        let z = impulse_closed_form(input(x, n, "x")?, input(w, n, "w")?).map_err(lib)?;
        *re = z.re;
        *im = z.im;
        Ok(())
    })
}
