//! C ABI for the fxinsure library: opaque model handles, status codes and a
//! thread-local last-error message. The header is generated by cbindgen into
//! `include/fxinsure.h` at build time.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::ptr;

use fxinsure::closed_form::{ClosedFormSolution, DEFAULT_GRID_POINTS};
use fxinsure::market::{MarketKind, ParamFile, ValidatedConfig};
use fxinsure::mc::{estimate_utility, SimConfig, StrategySpec};

/// Status codes returned by every fallible function of this API.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FxStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParseError = 3,
    ValidationError = 4,
    DomainError = 5,
    NumericError = 6,
}

/// Market variant selector.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FxMarket {
    ForeignOu = 0,
    ForeignGbm = 1,
    DomesticOnly = 2,
}

/// Strategy selector for simulation; `param` carries the scale factor or
/// constant amount where applicable.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FxStrategy {
    Optimal = 0,
    ScaledOptimal = 1,
    ConstantAmount = 2,
    ZeroInvestment = 3,
}

/// Monte Carlo estimate of the expected terminal utility.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct FxSimResult {
    pub estimate: f64,
    pub std_error: f64,
}

/// Opaque handle: a validated configuration plus its closed-form solution.
pub struct FxModel {
    cfg: ValidatedConfig,
    sol: ClosedFormSolution,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let cleaned: String = msg.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(cleaned).unwrap());
}

fn classify(err: &fxinsure::Error) -> FxStatus {
    match err {
        fxinsure::Error::Validation(_) => FxStatus::ValidationError,
        fxinsure::Error::Parse(_) => FxStatus::ParseError,
        fxinsure::Error::TimeOutOfRange { .. } => FxStatus::DomainError,
        _ => FxStatus::NumericError,
    }
}

/// Message of the most recent error on this thread; valid until the next
/// failing call on the same thread.
#[no_mangle]
pub extern "C" fn fx_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Builds a model from a flat JSON parameter document (same schema as the
/// CLI config file) and a market variant. `grid_points` of 0 selects the
/// default coefficient-table resolution. On success `*out` owns the handle;
/// release it with `fx_model_free`.
///
/// # Safety
/// `json` must be a valid NUL-terminated string and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fx_model_new_from_json(
    json: *const c_char,
    market: FxMarket,
    grid_points: u32,
    out: *mut *mut FxModel,
) -> FxStatus {
    if json.is_null() || out.is_null() {
        set_error("null pointer argument");
        return FxStatus::NullPointer;
    }
    unsafe { *out = ptr::null_mut() };
    let text = match unsafe { CStr::from_ptr(json) }.to_str() {
        Ok(t) => t,
        Err(_) => {
            set_error("config is not valid UTF-8");
            return FxStatus::InvalidUtf8;
        }
    };
    let pf = match ParamFile::from_json(text) {
        Ok(pf) => pf,
        Err(e) => {
            set_error(&e.to_string());
            return FxStatus::ParseError;
        }
    };
    let kind = match market {
        FxMarket::ForeignOu => MarketKind::ForeignOu,
        FxMarket::ForeignGbm => MarketKind::ForeignGbm,
        FxMarket::DomesticOnly => MarketKind::DomesticOnly,
    };
    let cfg = match pf.validated(kind) {
        Ok(cfg) => cfg,
        Err(e) => {
            set_error(&e.to_string());
            return FxStatus::ValidationError;
        }
    };
    let n = if grid_points == 0 { DEFAULT_GRID_POINTS } else { grid_points as usize };
    let sol = match ClosedFormSolution::new(&cfg, n) {
        Ok(sol) => sol,
        Err(e) => {
            set_error(&e.to_string());
            return classify(&e);
        }
    };
    unsafe { *out = Box::into_raw(Box::new(FxModel { cfg, sol })) };
    FxStatus::Ok
}

/// Releases a model handle. Passing NULL is a no-op.
///
/// # Safety
/// `model` must be NULL or a pointer returned by `fx_model_new_from_json`
/// that has not been freed yet.
#[no_mangle]
pub unsafe extern "C" fn fx_model_free(model: *mut FxModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

unsafe fn with_model<T>(
    model: *const FxModel,
    out: *mut T,
    f: impl FnOnce(&FxModel) -> fxinsure::Result<T>,
) -> FxStatus {
    if model.is_null() || out.is_null() {
        set_error("null pointer argument");
        return FxStatus::NullPointer;
    }
    match f(unsafe { &*model }) {
        Ok(v) => {
            unsafe { *out = v };
            FxStatus::Ok
        }
        Err(e) => {
            set_error(&e.to_string());
            classify(&e)
        }
    }
}

/// Excess return A_1 = u_f + u_Q - r_d of the model's parameters.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fx_model_a1(model: *const FxModel, out: *mut f64) -> FxStatus {
    unsafe { with_model(model, out, |m| Ok(m.cfg.a1())) }
}

/// Value function V(t, x, m); m is ignored for the degenerate variants.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fx_model_value(
    model: *const FxModel,
    t: f64,
    x: f64,
    m: f64,
    out: *mut f64,
) -> FxStatus {
    unsafe { with_model(model, out, |mdl| mdl.sol.value(t, x, m)) }
}

/// Optimal amount invested in the risky asset at (t, m).
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fx_model_strategy(
    model: *const FxModel,
    t: f64,
    m: f64,
    out: *mut f64,
) -> FxStatus {
    unsafe { with_model(model, out, |mdl| mdl.sol.strategy(t, m)) }
}

/// Monte Carlo estimate of E[u(X_T)] under the selected strategy.
/// Deterministic in (seed, paths, steps) regardless of worker count.
///
/// # Safety
/// `model` must be a live handle and `out` a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn fx_model_simulate(
    model: *const FxModel,
    paths: u64,
    steps: u32,
    seed: u64,
    strategy: FxStrategy,
    strategy_param: f64,
    out: *mut FxSimResult,
) -> FxStatus {
    let spec = match strategy {
        FxStrategy::Optimal => StrategySpec::Optimal,
        FxStrategy::ScaledOptimal => StrategySpec::ScaledOptimal(strategy_param),
        FxStrategy::ConstantAmount => StrategySpec::ConstantAmount(strategy_param),
        FxStrategy::ZeroInvestment => StrategySpec::ZeroInvestment,
    };
    unsafe {
        with_model(model, out, |mdl| {
            let sim = SimConfig { paths, steps: steps as usize, seed, strategy: spec };
            let r = estimate_utility(&mdl.cfg, &mdl.sol, &sim)?;
            Ok(FxSimResult { estimate: r.estimate, std_error: r.std_error })
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TABLE1_JSON: &str = r#"{"T":4,"r_d":0.1,"lambda":1,"gamma":1,"theta":1,
        "u":0.4,"sigma":0.1,"u_f":0.3,"sigma_f":0.31622776601683794,"u_Q":0.2,
        "sigma_Q":0.5477225575051661,"u_d":0.3,"sigma_d":0.4472135954999579,"x0":2}"#;

    fn model(market: FxMarket) -> *mut FxModel {
        let json = CString::new(TABLE1_JSON).unwrap();
        let mut handle: *mut FxModel = ptr::null_mut();
        let status =
            unsafe { fx_model_new_from_json(json.as_ptr(), market, 0, &mut handle) };
        assert_eq!(status, FxStatus::Ok);
        assert!(!handle.is_null());
        handle
    }

    #[test]
    fn value_and_strategy_roundtrip() {
        let m = model(FxMarket::ForeignGbm);
        let mut v = 0.0;
        assert_eq!(unsafe { fx_model_value(m, 0.0, 2.0, 0.0, &mut v) }, FxStatus::Ok);
        assert!((v - 0.9967213045443465).abs() < 1e-12);
        let mut pi = 0.0;
        assert_eq!(unsafe { fx_model_strategy(m, 0.0, 0.0, &mut pi) }, FxStatus::Ok);
        assert!((pi - 0.6703200460356394).abs() < 1e-12);
        let mut a1 = 0.0;
        assert_eq!(unsafe { fx_model_a1(m, &mut a1) }, FxStatus::Ok);
        assert_eq!(a1, 0.4);
        unsafe { fx_model_free(m) };
    }

    #[test]
    fn domain_error_reported() {
        let m = model(FxMarket::ForeignGbm);
        let mut v = 0.0;
        let status = unsafe { fx_model_value(m, 9.0, 2.0, 0.0, &mut v) };
        assert_eq!(status, FxStatus::DomainError);
        let msg = unsafe { CStr::from_ptr(fx_last_error_message()) };
        assert!(!msg.to_bytes().is_empty());
        unsafe { fx_model_free(m) };
    }

    #[test]
    fn validation_error_reported() {
        let json = CString::new(TABLE1_JSON.replace("\"theta\":1", "\"theta\":0")).unwrap();
        let mut handle: *mut FxModel = ptr::null_mut();
        let status = unsafe {
            fx_model_new_from_json(json.as_ptr(), FxMarket::ForeignGbm, 0, &mut handle)
        };
        assert_eq!(status, FxStatus::ValidationError);
        assert!(handle.is_null());
        let msg = unsafe { CStr::from_ptr(fx_last_error_message()) };
        assert_eq!(msg.to_str().unwrap(), "theta must be > 0");
    }

    #[test]
    fn simulate_is_deterministic() {
        let m = model(FxMarket::DomesticOnly);
        let mut a = FxSimResult { estimate: 0.0, std_error: 0.0 };
        let mut b = FxSimResult { estimate: 0.0, std_error: 0.0 };
        let s1 = unsafe {
            fx_model_simulate(m, 500, 64, 7, FxStrategy::Optimal, 0.0, &mut a)
        };
        let s2 = unsafe {
            fx_model_simulate(m, 500, 64, 7, FxStrategy::Optimal, 0.0, &mut b)
        };
        assert_eq!(s1, FxStatus::Ok);
        assert_eq!(s2, FxStatus::Ok);
        assert_eq!(a.estimate.to_bits(), b.estimate.to_bits());
        assert!(a.estimate < 1.0);
        unsafe { fx_model_free(m) };
    }

    #[test]
    fn null_arguments_rejected() {
        let mut v = 0.0;
        assert_eq!(
            unsafe { fx_model_value(ptr::null(), 0.0, 0.0, 0.0, &mut v) },
            FxStatus::NullPointer
        );
        unsafe { fx_model_free(ptr::null_mut()) };
    }
}
