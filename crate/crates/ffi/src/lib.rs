//! C bindings over the library: the privacy accountant, KS-test helpers,
//! the discrete Gaussian sampler, and a JSON-driven training runner.
//!
//! Conventions: fallible calls return a status code and write results
//! through out pointers; handles are opaque and released by their matching
//! `_free`; strings allocated here are released with
//! `sparsagg_string_free`. No call unwinds across the boundary.

use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::slice;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use sparsagg::accountant::{epsilon_for, sigma_for_budget, PrivacyConfig};
use sparsagg::noise::{ks_critical, ks_two_sample, DiscreteGaussian};
use sparsagg::train::{run_training, TrainConfig};

/// Result of every fallible call.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SparsaggStatus {
    /// Success.
    Ok = 0,
    /// A required pointer argument was null.
    NullArgument = 1,
    /// An argument failed validation.
    InvalidArgument = 2,
    /// A string argument was not valid UTF-8.
    InvalidUtf8 = 3,
    /// A JSON payload failed to parse or serialize.
    InvalidJson = 4,
    /// The protocol aborted; details are in the returned report.
    Abort = 5,
    /// An internal panic was caught at the boundary.
    Internal = 6,
}

fn guard(f: impl FnOnce() -> SparsaggStatus) -> SparsaggStatus {
    catch_unwind(AssertUnwindSafe(f)).unwrap_or(SparsaggStatus::Internal)
}

/// Library version as a static NUL-terminated string; do not free.
#[no_mangle]
pub extern "C" fn sparsagg_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr() as *const c_char
}

/// The field modulus 2^61 - 1.
#[no_mangle]
pub extern "C" fn sparsagg_field_prime() -> u64 {
    sparsagg::PRIME
}

/// Optimized (ε, δ)-DP budget after `rounds` subsampled rounds at noise
/// multiplier `sigma` and sampling rate `q`. Writes the budget, the
/// optimizing order, and the per-round divergence at that order.
///
/// # Safety
/// `out_epsilon`, `out_alpha`, and `out_tau` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sparsagg_accountant_epsilon(
    q: f64,
    sigma: f64,
    delta: f64,
    rounds: u32,
    out_epsilon: *mut f64,
    out_alpha: *mut u64,
    out_tau: *mut f64,
) -> SparsaggStatus {
    if out_epsilon.is_null() || out_alpha.is_null() || out_tau.is_null() {
        return SparsaggStatus::NullArgument;
    }
    guard(|| {
        if !(q > 0.0 && q <= 1.0) {
            return SparsaggStatus::InvalidArgument;
        }
        let config = PrivacyConfig {
            q,
            sigma,
            delta,
            rounds,
        };
        match epsilon_for(&config) {
            Ok(report) => {
                unsafe {
                    *out_epsilon = report.epsilon;
                    *out_alpha = report.alpha_star;
                    *out_tau = report.tau;
                }
                SparsaggStatus::Ok
            }
            Err(_) => SparsaggStatus::InvalidArgument,
        }
    })
}

/// Noise variance σ² meeting a target (ε, δ) budget over `rounds` rounds
/// at sampling rate `q`.
///
/// # Safety
/// `out_sigma_sq` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sparsagg_accountant_sigma_sq(
    epsilon: f64,
    delta: f64,
    q: f64,
    rounds: u32,
    out_sigma_sq: *mut f64,
) -> SparsaggStatus {
    if out_sigma_sq.is_null() {
        return SparsaggStatus::NullArgument;
    }
    guard(|| match sigma_for_budget(epsilon, delta, q, rounds) {
        Ok(v) => {
            unsafe {
                *out_sigma_sq = v;
            }
            SparsaggStatus::Ok
        }
        Err(_) => SparsaggStatus::InvalidArgument,
    })
}

/// Two-sample KS rejection threshold at significance `alpha` for two
/// samples of size `d`.
///
/// # Safety
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sparsagg_ks_critical(
    alpha: f64,
    d: usize,
    out: *mut f64,
) -> SparsaggStatus {
    if out.is_null() {
        return SparsaggStatus::NullArgument;
    }
    guard(|| match ks_critical(alpha, d) {
        Ok(v) => {
            unsafe {
                *out = v;
            }
            SparsaggStatus::Ok
        }
        Err(_) => SparsaggStatus::InvalidArgument,
    })
}

/// Two-sample KS statistic between integer samples `a` and `b`.
///
/// # Safety
/// `a` must point to `a_len` readable i64 values, `b` to `b_len`, and
/// `out` must be valid for writes.
#[no_mangle]
pub unsafe extern "C" fn sparsagg_ks_statistic(
    a: *const i64,
    a_len: usize,
    b: *const i64,
    b_len: usize,
    out: *mut f64,
) -> SparsaggStatus {
    if a.is_null() || b.is_null() || out.is_null() {
        return SparsaggStatus::NullArgument;
    }
    let a = unsafe { slice::from_raw_parts(a, a_len) };
    let b = unsafe { slice::from_raw_parts(b, b_len) };
    guard(|| match ks_two_sample(a, b) {
        Ok(v) => {
            unsafe {
                *out = v;
            }
            SparsaggStatus::Ok
        }
        Err(_) => SparsaggStatus::InvalidArgument,
    })
}

/// An exact discrete Gaussian sampler with its own deterministic stream.
pub struct SparsaggSampler {
    dist: DiscreteGaussian,
    rng: ChaCha20Rng,
}

/// Creates a sampler for N_Z(0, std²) seeded deterministically.
///
/// # Safety
/// `out` must be valid for writes. The handle must be released with
/// `sparsagg_sampler_free`.
#[no_mangle]
pub unsafe extern "C" fn sparsagg_sampler_new(
    std: f64,
    seed: u64,
    out: *mut *mut SparsaggSampler,
) -> SparsaggStatus {
    if out.is_null() {
        return SparsaggStatus::NullArgument;
    }
    guard(|| match DiscreteGaussian::new(std) {
        Ok(dist) => {
            let sampler = Box::new(SparsaggSampler {
                dist,
                rng: ChaCha20Rng::seed_from_u64(seed),
            });
            unsafe {
                *out = Box::into_raw(sampler);
            }
            SparsaggStatus::Ok
        }
        Err(_) => SparsaggStatus::InvalidArgument,
    })
}

/// Draws `n` samples into `out`.
///
/// # Safety
/// `sampler` must be a live handle from `sparsagg_sampler_new` and `out`
/// must be valid for `n` i64 writes.
#[no_mangle]
pub unsafe extern "C" fn sparsagg_sampler_draw(
    sampler: *mut SparsaggSampler,
    out: *mut i64,
    n: usize,
) -> SparsaggStatus {
    if sampler.is_null() || out.is_null() {
        return SparsaggStatus::NullArgument;
    }
    let sampler = unsafe { &mut *sampler };
    let out = unsafe { slice::from_raw_parts_mut(out, n) };
    guard(|| {
        for slot in out.iter_mut() {
            *slot = sampler.dist.sample(&mut sampler.rng);
        }
        SparsaggStatus::Ok
    })
}

/// Releases a sampler handle; null is a no-op.
///
/// # Safety
/// `sampler` must be null or a live handle from `sparsagg_sampler_new`,
/// and must not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sparsagg_sampler_free(sampler: *mut SparsaggSampler) {
    if !sampler.is_null() {
        drop(unsafe { Box::from_raw(sampler) });
    }
}

/// Runs federated training from a JSON config (the CLI `train` schema) and
/// returns a JSON report `{"w": [...], "metrics": [...], "abort": ...}`.
///
/// # Safety
/// `config_json` must be a NUL-terminated string and `out_json` valid for
/// writes. The returned string is released with `sparsagg_string_free`.
#[no_mangle]
pub unsafe extern "C" fn sparsagg_train_json(
    config_json: *const c_char,
    out_json: *mut *mut c_char,
) -> SparsaggStatus {
    if config_json.is_null() || out_json.is_null() {
        return SparsaggStatus::NullArgument;
    }
    let raw = unsafe { CStr::from_ptr(config_json) };
    let text = match raw.to_str() {
        Ok(t) => t,
        Err(_) => return SparsaggStatus::InvalidUtf8,
    };
    guard(|| {
        let config: TrainConfig = match serde_json::from_str(text) {
            Ok(c) => c,
            Err(_) => return SparsaggStatus::InvalidJson,
        };
        let outcome = match run_training(&config) {
            Ok(o) => o,
            Err(_) => return SparsaggStatus::InvalidArgument,
        };
        let aborted = outcome.abort.is_some();
        let report = serde_json::json!({
            "w": outcome.w,
            "metrics": outcome.metrics,
            "abort": outcome.abort.map(|a| a.reason),
        });
        let text = match serde_json::to_string(&report) {
            Ok(t) => t,
            Err(_) => return SparsaggStatus::InvalidJson,
        };
        let c = CString::new(text).expect("JSON has no interior NUL");
        unsafe {
            *out_json = c.into_raw();
        }
        if aborted {
            SparsaggStatus::Abort
        } else {
            SparsaggStatus::Ok
        }
    })
}

/// Releases a string returned by this library; null is a no-op.
///
/// # Safety
/// `s` must be null or a string returned by this library, and must not be
/// used afterwards.
#[no_mangle]
pub unsafe extern "C" fn sparsagg_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(unsafe { CString::from_raw(s) });
    }
}
