//! RDP privacy accounting for the subsampled Gaussian mechanism: per-round
//! Renyi bounds, adaptive composition over rounds, conversion to (ε, δ)-DP,
//! and the closed-form noise requirement for a target budget.
//!
//! The full per-round bound is a binomial series evaluated in the log
//! domain (naive evaluation overflows beyond order α ≈ 40); the simplified
//! bound 3.5q²α/σ² backs the closed-form σ² and its self-consistency check.

use serde::{Deserialize, Serialize};
use std::f64::consts::LN_2;
use std::sync::OnceLock;

/// Largest integer RDP order the optimizer searches.
pub const MAX_ALPHA: u64 = 256;

/// Invalid accounting parameters.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum AccountantError {
    /// The series bound is defined for integer orders in the search grid.
    #[error("integer RDP order must lie in 2..={MAX_ALPHA}, got {0}")]
    AlphaOutOfGrid(u64),
    /// Composition needs a Renyi order above 1.
    #[error("RDP order must exceed 1, got {0}")]
    InvalidAlpha(f64),
    /// Sampling rates live in (0, 1]; 0 is allowed where the limit is exact.
    #[error("sampling rate must lie in [0, 1], got {0}")]
    InvalidRate(f64),
    /// The noise multiplier must be positive and finite.
    #[error("noise multiplier must be positive, got {0}")]
    InvalidSigma(f64),
    /// Failure probabilities live strictly between 0 and 1.
    #[error("delta must lie in (0, 1), got {0}")]
    InvalidDelta(f64),
    /// Privacy budgets must be positive.
    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),
    /// The closed-form σ² is valid only below 2·ln(1/δ).
    #[error("closed-form noise requires epsilon < 2 ln(1/delta) ({bound}), got {eps}")]
    EpsilonTooLarge {
        /// Requested budget.
        eps: f64,
        /// Validity threshold 2·ln(1/δ).
        bound: f64,
    },
    /// Round counts start at 1.
    #[error("round count must be at least 1")]
    NoRounds,
}

/// Accounting inputs for one training run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PrivacyConfig {
    /// Per-round client sampling rate.
    pub q: f64,
    /// Noise multiplier.
    pub sigma: f64,
    /// DP failure probability.
    pub delta: f64,
    /// Number of composed rounds.
    pub rounds: u32,
}

impl PrivacyConfig {
    /// Validates and builds a configuration.
    pub fn new(q: f64, sigma: f64, delta: f64, rounds: u32) -> Result<Self, AccountantError> {
        if !(q > 0.0 && q < 1.0) {
            return Err(AccountantError::InvalidRate(q));
        }
        if !(sigma.is_finite() && sigma > 0.0) {
            return Err(AccountantError::InvalidSigma(sigma));
        }
        if !(delta > 0.0 && delta < 1.0) {
            return Err(AccountantError::InvalidDelta(delta));
        }
        if rounds == 0 {
            return Err(AccountantError::NoRounds);
        }
        Ok(PrivacyConfig {
            q,
            sigma,
            delta,
            rounds,
        })
    }
}

/// The optimized privacy guarantee of a run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonReport {
    /// Final privacy budget ε.
    pub epsilon: f64,
    /// Integer order achieving the minimum.
    pub alpha_star: u64,
    /// Per-round RDP bound at `alpha_star`.
    pub tau: f64,
}

fn ln_factorials() -> &'static [f64; MAX_ALPHA as usize + 1] {
    static TABLE: OnceLock<[f64; MAX_ALPHA as usize + 1]> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = [0.0f64; MAX_ALPHA as usize + 1];
        for i in 2..t.len() {
            t[i] = t[i - 1] + (i as f64).ln();
        }
        t
    })
}

fn ln_choose(n: u64, k: u64) -> f64 {
    let t = ln_factorials();
    t[n as usize] - t[k as usize] - t[(n - k) as usize]
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Per-round RDP of the subsampled Gaussian mechanism at integer order α:
///
/// τ′(α) = ln(1 + 2q²·C(α,2)·min(2e^{(α−1)²/σ²}−1, e^{α²/σ²})
///              + Σ_{j=3..α} 2q^j·C(α,j)·e^{j(j−1)/(2σ²)}) / (α−1),
///
/// with every series term kept in the log domain.
pub fn rdp_subsampled_full(alpha: u64, q: f64, sigma: f64) -> Result<f64, AccountantError> {
    if !(2..=MAX_ALPHA).contains(&alpha) {
        return Err(AccountantError::AlphaOutOfGrid(alpha));
    }
    if !(0.0..=1.0).contains(&q) || !q.is_finite() {
        return Err(AccountantError::InvalidRate(q));
    }
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(AccountantError::InvalidSigma(sigma));
    }
    if q == 0.0 {
        return Ok(0.0);
    }
    let s2 = sigma * sigma;
    let a = alpha as f64;
    let mut terms = Vec::with_capacity(alpha as usize);
    terms.push(0.0);
    // ln(2e^x - 1) = x + ln(2 - e^-x) stays finite for any x >= 0.
    let x = (a - 1.0) * (a - 1.0) / s2;
    let ln_min = (x + (2.0 - (-x).exp()).ln()).min(a * a / s2);
    terms.push(LN_2 + 2.0 * q.ln() + ln_choose(alpha, 2) + ln_min);
    for j in 3..=alpha {
        let jf = j as f64;
        terms.push(LN_2 + jf * q.ln() + ln_choose(alpha, j) + jf * (jf - 1.0) / (2.0 * s2));
    }
    Ok(log_sum_exp(&terms) / (a - 1.0))
}

/// Simplified per-round RDP bound τ = 3.5·q²·α/σ², valid for real orders.
pub fn rdp_simplified(alpha: f64, q: f64, sigma: f64) -> f64 {
    3.5 * q * q * alpha / (sigma * sigma)
}

/// Composes a per-round bound over `rounds` rounds and converts to DP:
/// ε = T·τ + ln(1/δ)/(α−1).
pub fn compose_and_convert(
    tau: f64,
    rounds: u32,
    alpha: f64,
    delta: f64,
) -> Result<f64, AccountantError> {
    if !(alpha.is_finite() && alpha > 1.0) {
        return Err(AccountantError::InvalidAlpha(alpha));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(AccountantError::InvalidDelta(delta));
    }
    if rounds == 0 {
        return Err(AccountantError::NoRounds);
    }
    Ok(rounds as f64 * tau + (1.0 / delta).ln() / (alpha - 1.0))
}

/// Minimizes ε over the integer order grid 2..=256 using the full
/// per-round bound.
pub fn epsilon_for(config: &PrivacyConfig) -> Result<EpsilonReport, AccountantError> {
    let mut best: Option<EpsilonReport> = None;
    for alpha in 2..=MAX_ALPHA {
        let tau = rdp_subsampled_full(alpha, config.q, config.sigma)?;
        let epsilon = compose_and_convert(tau, config.rounds, alpha as f64, config.delta)?;
        if best.map_or(true, |b| epsilon < b.epsilon) {
            best = Some(EpsilonReport {
                epsilon,
                alpha_star: alpha,
                tau,
            });
        }
    }
    Ok(best.expect("non-empty grid"))
}

/// Closed-form variance meeting an (ε, δ) budget over T subsampled rounds:
/// σ² = 14q²T·ln(1/δ)/ε² + 7q²T/ε, valid for ε < 2·ln(1/δ). Plugging the
/// result back through `rdp_simplified` at α = 1 + 2ln(1/δ)/ε returns
/// exactly ε.
pub fn sigma_for_budget(
    epsilon: f64,
    delta: f64,
    q: f64,
    rounds: u32,
) -> Result<f64, AccountantError> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(AccountantError::InvalidEpsilon(epsilon));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(AccountantError::InvalidDelta(delta));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(AccountantError::InvalidRate(q));
    }
    if rounds == 0 {
        return Err(AccountantError::NoRounds);
    }
    let l = (1.0 / delta).ln();
    if epsilon >= 2.0 * l {
        return Err(AccountantError::EpsilonTooLarge {
            eps: epsilon,
            bound: 2.0 * l,
        });
    }
    let t = rounds as f64;
    Ok(14.0 * q * q * t * l / (epsilon * epsilon) + 7.0 * q * q * t / epsilon)
}
