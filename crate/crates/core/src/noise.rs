//! Distributed differential-privacy noise: exact discrete Gaussian sampling,
//! three-server noise addition, and verifiable noise sampling with a
//! two-sample Kolmogorov-Smirnov check.
//!
//! Noise lives on the fixed-point integer grid. Each server contributes one
//! discrete Gaussian vector with variance (σ·C·2^15)²/2 per coordinate, so
//! the decoded total carries variance (3/2)σ²C² and the view of any single
//! server, minus its own contribution, still carries σ²C². Sampling is exact
//! (rejection from discrete Laplace proposals, computed in exact rational
//! arithmetic), so the verification step rejects honest noise at the nominal
//! significance level and nothing else.

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_rational::BigRational;
use num_traits::{ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::field::{FieldElement, FIXED_SCALE, PRIME};
use crate::net::{EndpointId, Payload};
use crate::prg::Seed;
use crate::report::{Abort, AbortReason, KsReport};
use crate::rss::{PartyId, RssVector, SecurityMode};
use crate::server::{phase, AdversaryKind, Cluster};

/// Significance level of the noise-verification KS test.
pub const KS_ALPHA: f64 = 0.05;

/// Invalid noise configuration or test input.
#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum NoiseError {
    /// The sampler needs a positive, finite standard deviation.
    #[error("noise std must be positive and finite, got {0}")]
    InvalidStd(f64),
    /// Significance levels live strictly between 0 and 1.
    #[error("significance level must lie in (0, 1), got {0}")]
    InvalidAlpha(f64),
    /// The KS statistic is undefined on empty samples.
    #[error("KS test requires non-empty samples")]
    EmptySample,
    /// Six-sigma noise tails plus the clipped payload must fit in (-p/2, p/2).
    #[error("noise tails plus payload exceed field headroom ({needed:.3e} vs {available:.3e})")]
    CapacityExceeded {
        /// Worst-case magnitude the round can produce.
        needed: f64,
        /// Largest centered magnitude the field can represent.
        available: f64,
    },
}

/// Bernoulli(num/den) for an exact unreduced fraction in [0, 1].
fn bernoulli_frac<R: Rng + ?Sized>(num: &BigUint, den: &BigUint, rng: &mut R) -> bool {
    if num.is_zero() {
        return false;
    }
    &rng.gen_biguint_below(den) < num
}

/// Bernoulli(exp(-num/den)) for num/den in [0, 1], via the alternating-
/// series trick: run Bernoulli(num/(den·k)) for k = 1, 2, ... until a
/// failure and accept when the failing k is odd.
fn bernoulli_exp_unit<R: Rng + ?Sized>(num: &BigUint, den: &BigUint, rng: &mut R) -> bool {
    let mut k = 1u64;
    loop {
        let den_k = den * k;
        if bernoulli_frac(num, &den_k, rng) {
            k += 1;
        } else {
            break;
        }
    }
    k % 2 == 1
}

/// Bernoulli(exp(-num/den)) for any nonnegative fraction.
fn bernoulli_exp<R: Rng + ?Sized>(num: &BigUint, den: &BigUint, rng: &mut R) -> bool {
    let mut num = num.clone();
    while num > *den {
        // One factor of exp(-1) at a time; the first failure short-circuits.
        if !bernoulli_exp_unit(den, den, rng) {
            return false;
        }
        num -= den;
    }
    bernoulli_exp_unit(&num, den, rng)
}

/// Discrete Laplace with integer scale t >= 1: P(y) proportional to
/// exp(-|y|/t). Magnitude is U + t·V with U uniform below t (kept with
/// probability exp(-U/t)) and V geometric with rate exp(-1); a fair sign bit
/// finishes, rejecting the double-counted -0.
fn sample_discrete_laplace<R: Rng + ?Sized>(t: &BigUint, rng: &mut R) -> BigInt {
    loop {
        let u = rng.gen_biguint_below(t);
        if !bernoulli_exp_unit(&u, t, rng) {
            continue;
        }
        let mut v = 0u64;
        while bernoulli_exp_unit(t, t, rng) {
            v += 1;
        }
        let magnitude = u + t * v;
        let negative = rng.gen::<bool>();
        if negative && magnitude.is_zero() {
            continue;
        }
        let magnitude = BigInt::from(magnitude);
        return if negative { -magnitude } else { magnitude };
    }
}

/// Exact sampler for the discrete Gaussian N_Z(0, sigma^2): support Z,
/// P(y) proportional to exp(-y²/2σ²).
///
/// Proposals come from a discrete Laplace with scale t = floor(σ) + 1 and
/// are accepted with probability exp(-(|y| - σ²/t)²/(2σ²)). With σ² =
/// num/den, the exponent equals (|y|·den·t - num)² / (2·num·den·t²); all
/// probabilities are evaluated on exact integer fractions, so samples follow
/// the target distribution exactly (no floating-point tail bias).
#[derive(Clone, Debug)]
pub struct DiscreteGaussian {
    t: BigUint,
    sigma_sq_num: BigUint,
    den_t: BigUint,
    gamma_den: BigUint,
}

impl DiscreteGaussian {
    /// Builds a sampler for the given standard deviation (interpreted
    /// exactly as the rational value of the float).
    pub fn new(std: f64) -> Result<Self, NoiseError> {
        if !std.is_finite() || std <= 0.0 {
            return Err(NoiseError::InvalidStd(std));
        }
        let r = BigRational::from_float(std).expect("finite float");
        Self::from_variance(&r * &r)
    }

    /// Builds a sampler from an exact variance.
    pub fn from_variance(sigma_sq: BigRational) -> Result<Self, NoiseError> {
        if sigma_sq <= BigRational::zero() {
            return Err(NoiseError::InvalidStd(sigma_sq.to_f64().unwrap_or(f64::NAN)));
        }
        let num = sigma_sq.numer().magnitude().clone();
        let den = sigma_sq.denom().magnitude().clone();
        let t = (&num / &den).sqrt() + 1u32;
        let den_t = &den * &t;
        let gamma_den = (&num * &den_t) * &t * 2u32;
        Ok(DiscreteGaussian {
            t,
            sigma_sq_num: num,
            den_t,
            gamma_den,
        })
    }

    /// Draws one sample.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> i64 {
        loop {
            let y = sample_discrete_laplace(&self.t, rng);
            let scaled = y.magnitude() * &self.den_t;
            let diff = if scaled >= self.sigma_sq_num {
                scaled - &self.sigma_sq_num
            } else {
                &self.sigma_sq_num - scaled
            };
            let gamma_num = &diff * &diff;
            if bernoulli_exp(&gamma_num, &self.gamma_den, rng) {
                return y.to_i64().expect("discrete Gaussian sample exceeds i64 range");
            }
        }
    }

    /// Draws `n` samples.
    pub fn sample_many<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<i64> {
        (0..n).map(|_| self.sample(rng)).collect()
    }
}

/// Draws `n` exact discrete Gaussian samples at the given integer-grid std.
pub fn sample_discrete_gaussian<R: Rng + ?Sized>(
    std_int: f64,
    n: usize,
    rng: &mut R,
) -> Result<Vec<i64>, NoiseError> {
    Ok(DiscreteGaussian::new(std_int)?.sample_many(n, rng))
}

/// DP noise configuration for one aggregation round.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    /// Noise multiplier sigma (unitless).
    pub sigma: f64,
    /// L2 clipping bound in model-update units.
    pub clip: f64,
    /// Vector dimension.
    pub dim: usize,
}

impl NoiseParams {
    /// Validates and builds the parameters. `sigma = 0` disables noise.
    pub fn new(sigma: f64, clip: f64, dim: usize) -> Result<Self, NoiseError> {
        if !sigma.is_finite() || sigma < 0.0 {
            return Err(NoiseError::InvalidStd(sigma));
        }
        if !clip.is_finite() || clip <= 0.0 {
            return Err(NoiseError::InvalidStd(clip));
        }
        Ok(NoiseParams { sigma, clip, dim })
    }

    /// Per-server noise std on the integer grid: σ·C·2^15/√2, the std of
    /// N_Z(0, ½σ²C²) after fixed-point scaling.
    pub fn per_server_std_int(&self) -> f64 {
        self.sigma * self.clip * FIXED_SCALE / std::f64::consts::SQRT_2
    }

    /// Exact per-server grid variance (σC)²·2^29, or `None` when σ = 0.
    pub fn per_server_variance(&self) -> Option<BigRational> {
        if self.sigma == 0.0 {
            return None;
        }
        let r = BigRational::from_float(self.sigma).expect("finite sigma")
            * BigRational::from_float(self.clip).expect("finite clip");
        Some(&r * &r * BigRational::from_integer(BigInt::from(1u64 << 29)))
    }

    /// Exact grid variance of the verification reference N_Z(0, σ²C²):
    /// twice the per-server variance.
    pub fn reference_variance(&self) -> Option<BigRational> {
        self.per_server_variance()
            .map(|v| &v + &v)
    }

    /// Checks that six-sigma noise tails plus `n` clipped contributions stay
    /// inside the centered field range, so decoding never wraps.
    pub fn check_capacity(&self, n: usize) -> Result<(), NoiseError> {
        let needed = 3.0 * 6.0 * self.per_server_std_int() + n as f64 * self.clip * FIXED_SCALE;
        let available = PRIME as f64 / 2.0;
        if needed < available {
            Ok(())
        } else {
            Err(NoiseError::CapacityExceeded { needed, available })
        }
    }
}

/// The three per-server noise sharings of one round, kept for verification.
pub struct NoiseRound {
    /// `shares[i]` is the replicated sharing of η_i; empty when σ = 0.
    pub shares: Vec<[RssVector; 3]>,
}

/// Each server samples η_i ~ N_Z(0, ½σ²C² I_d) on the integer grid and
/// deals a replicated sharing of it; all three sharings fold into `delta`.
/// With σ = 0 the aggregate is left untouched and nothing is sent.
///
/// An `InflatedNoise` adversary samples the corrupt server's vector with a
/// scaled-up std; masks and references elsewhere stay honest.
pub fn sec_noise_add(
    cluster: &mut Cluster,
    delta: &mut [RssVector; 3],
    params: &NoiseParams,
) -> NoiseRound {
    let Some(variance) = params.per_server_variance() else {
        return NoiseRound { shares: Vec::new() };
    };
    let d = delta[0].len();
    assert_eq!(d, params.dim, "aggregate and noise dimensions must agree");
    cluster.net.begin_phase("noise/share");
    let mut shares = Vec::with_capacity(3);
    for i in PartyId::ALL {
        let variance_i = match cluster.adversary.kind {
            AdversaryKind::InflatedNoise { factor } if cluster.is_corrupt(i) => {
                let f = BigRational::from_float(factor).expect("finite noise factor");
                &variance * &f * &f
            }
            _ => variance.clone(),
        };
        let sampler = DiscreteGaussian::from_variance(variance_i).expect("positive variance");
        let eta: Vec<FieldElement> = {
            let rng = &mut cluster.server_mut(i).rng;
            (0..d)
                .map(|_| FieldElement::from_i128(sampler.sample(rng) as i128))
                .collect()
        };
        let eta_shares = cluster.share_from_dealer(i, &eta, phase::NOISE_SHARE);
        for p in PartyId::ALL {
            delta[p.idx()]
                .add_local(&eta_shares[p.idx()])
                .expect("noise dimension");
        }
        shares.push(eta_shares);
    }
    NoiseRound { shares }
}

/// Two-sample Kolmogorov-Smirnov statistic D = sup |F_a - F_b| over the
/// empirical CDFs, computed exactly by a merge over the sorted samples.
pub fn ks_two_sample(a: &[i64], b: &[i64]) -> Result<f64, NoiseError> {
    if a.is_empty() || b.is_empty() {
        return Err(NoiseError::EmptySample);
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_unstable();
    y.sort_unstable();
    let (n, m) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j) = (0usize, 0usize);
    let mut d = 0f64;
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] == v {
            i += 1;
        }
        while j < y.len() && y[j] == v {
            j += 1;
        }
        d = d.max((i as f64 / n - j as f64 / m).abs());
    }
    Ok(d)
}

/// Critical value sqrt(-ln(α/2)/2)·sqrt(2/d) for two samples of size d.
pub fn ks_critical(alpha: f64, d: usize) -> Result<f64, NoiseError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(NoiseError::InvalidAlpha(alpha));
    }
    if d == 0 {
        return Err(NoiseError::EmptySample);
    }
    Ok((-0.5 * (alpha / 2.0).ln()).sqrt() * (2.0 / d as f64).sqrt())
}

/// Verifies the noise of server `i` (Alg. 3 pattern): S_{i+1} deals a mask
/// ξ with the same distribution, κ = η_i + ξ is opened toward S_{i-1} with
/// both holders of ⟨κ⟩_{i+1} sending their copy, and the verifier runs a
/// two-sample KS test of κ against a fresh reference κ' ~ N_Z(0, σ²C² I_d)
/// drawn from a seed recorded in the report.
///
/// Aborts with `OpenInconsistency` when the two κ copies disagree and with
/// `NoiseKs` when the statistic exceeds the critical value.
pub fn verify_noise_round(
    cluster: &mut Cluster,
    i: PartyId,
    noise: &NoiseRound,
    params: &NoiseParams,
) -> Result<KsReport, Abort> {
    let masker = i.next();
    let verifier = i.prev();
    let eta = &noise.shares[i.idx()];
    let d = eta[0].len();

    cluster.net.begin_phase("noise/mask");
    let variance = params.per_server_variance().expect("verification needs sigma > 0");
    let sampler = DiscreteGaussian::from_variance(variance).expect("positive variance");
    let xi: Vec<FieldElement> = {
        let rng = &mut cluster.server_mut(masker).rng;
        (0..d)
            .map(|_| FieldElement::from_i128(sampler.sample(rng) as i128))
            .collect()
    };
    let xi_shares = cluster.share_from_dealer(masker, &xi, phase::MASK_SHARE);
    let kappa: [RssVector; 3] = PartyId::ALL.map(|p| {
        let mut k = eta[p.idx()].clone();
        k.add_local(&xi_shares[p.idx()]).expect("mask dimension");
        k
    });

    // Party i holds <kappa>_{i+1} as its second share, the masker as its
    // first; the verifier compares the copies before reconstructing.
    cluster.net.begin_phase("noise/open");
    let round = cluster.round;
    for (sender, copy) in [
        (i, kappa[i.idx()].share_b.clone()),
        (masker, kappa[masker.idx()].share_a.clone()),
    ] {
        let mut copy = copy;
        if cluster.is_corrupt(sender)
            && cluster.adversary.kind == AdversaryKind::InconsistentOpening
            && !copy.is_empty()
        {
            copy[0] += FieldElement::ONE;
        }
        cluster
            .net
            .send(
                EndpointId::server(sender),
                EndpointId::server(verifier),
                phase::KAPPA_OPEN,
                round,
                Payload::Elements(copy),
            )
            .expect("kappa open send");
    }
    let copy_i = cluster
        .net
        .recv(EndpointId::server(i), EndpointId::server(verifier))
        .expect("kappa open recv")
        .payload
        .into_elements();
    let copy_masker = cluster
        .net
        .recv(EndpointId::server(masker), EndpointId::server(verifier))
        .expect("kappa open recv")
        .payload
        .into_elements();
    if copy_i != copy_masker {
        return Err(Abort::new(
            AbortReason::OpenInconsistency,
            format!("masked-noise copies for party {} disagree", i.0),
        ));
    }
    let view = &kappa[verifier.idx()];
    let kappa_ints: Vec<i64> = (0..d)
        .map(|j| {
            let v = view.share_a[j] + view.share_b[j] + copy_i[j];
            i64::try_from(v.centered()).expect("masked noise fits i64")
        })
        .collect();

    let ref_seed = Seed::random(&mut cluster.server_mut(verifier).rng);
    let mut ref_rng = ChaCha20Rng::from_seed(ref_seed.0.repeat(2).try_into().unwrap());
    let ref_sampler =
        DiscreteGaussian::from_variance(params.reference_variance().expect("sigma > 0"))
            .expect("positive variance");
    let reference = ref_sampler.sample_many(d, &mut ref_rng);

    let d_ks = ks_two_sample(&kappa_ints, &reference).expect("non-empty samples");
    let d_crit = ks_critical(KS_ALPHA, d).expect("fixed alpha");
    let passed = d_ks <= d_crit;
    let report = KsReport {
        party: i.0,
        d,
        d_ks,
        d_crit,
        alpha: KS_ALPHA,
        passed,
        ref_seed: ref_seed.to_hex(),
    };
    if passed {
        Ok(report)
    } else {
        Err(Abort::new(
            AbortReason::NoiseKs,
            format!("party {} noise rejected: D_KS {d_ks:.5} > D_crit {d_crit:.5}", i.0),
        ))
    }
}

/// Noise phase of one round: sample and fold in the three noise vectors,
/// then, under malicious security with σ > 0, verify all three via the KS
/// procedure. Returns the verification reports (empty when skipped).
pub fn run_noise_phase(
    cluster: &mut Cluster,
    delta: &mut [RssVector; 3],
    params: &NoiseParams,
) -> Result<Vec<KsReport>, Abort> {
    let noise = sec_noise_add(cluster, delta, params);
    if cluster.mode != SecurityMode::Malicious || noise.shares.is_empty() {
        return Ok(Vec::new());
    }
    let mut reports = Vec::with_capacity(3);
    for i in PartyId::ALL {
        reports.push(verify_noise_round(cluster, i, &noise, params)?);
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::NetModel;
    use crate::rss::reconstruct;
    use crate::server::AdversaryBehavior;

    fn rng(seed: u64) -> ChaCha20Rng {
        ChaCha20Rng::seed_from_u64(seed)
    }

    fn cluster(mode: SecurityMode, seed: u8) -> Cluster {
        Cluster::new(mode, Seed([seed; 16]), NetModel::default())
    }

    fn zero_delta(d: usize) -> [RssVector; 3] {
        PartyId::ALL.map(|p| RssVector::zeros(p, d))
    }

    #[test]
    fn tiny_std_concentrates_at_zero() {
        let samples = sample_discrete_gaussian(1e-6, 1000, &mut rng(1)).unwrap();
        assert!(samples.iter().all(|&s| s == 0));
    }

    #[test]
    fn sampler_rejects_degenerate_stds() {
        assert_eq!(
            DiscreteGaussian::new(0.0).unwrap_err(),
            NoiseError::InvalidStd(0.0)
        );
        assert!(DiscreteGaussian::new(-1.0).is_err());
        assert!(DiscreteGaussian::new(f64::NAN).is_err());
        assert!(DiscreteGaussian::from_variance(BigRational::zero()).is_err());
    }

    #[test]
    fn pmf_matches_normalized_gaussian_weights_at_unit_std() {
        // Normalizing exp(-x²/2) over Z gives these masses for |x| = 0..3.
        let expected = [0.3989422783, 0.2419707232, 0.05399096622, 0.004431848388];
        let n = 400_000usize;
        let mut counts = [0u64; 4];
        let sampler = DiscreteGaussian::new(1.0).unwrap();
        let mut r = rng(2);
        for _ in 0..n {
            let s = sampler.sample(&mut r).unsigned_abs() as usize;
            if s < 4 {
                counts[s] += 1;
            }
        }
        // Both signs fold onto |x|, so nonzero bins carry twice the mass.
        for (x, &p) in expected.iter().enumerate() {
            let mass = if x == 0 { p } else { 2.0 * p };
            let freq = counts[x] as f64 / n as f64;
            assert!(
                (freq - mass).abs() < 0.006,
                "pmf mismatch at |x|={x}: {freq} vs {mass}"
            );
        }
    }

    #[test]
    fn pmf_matches_normalized_gaussian_weights_at_fractional_std() {
        let expected = [0.1595769122, 0.1473080561, 0.1158766211, 0.07767442199];
        let n = 300_000usize;
        let mut counts = [0u64; 4];
        let sampler = DiscreteGaussian::new(2.5).unwrap();
        let mut r = rng(3);
        for _ in 0..n {
            let s = sampler.sample(&mut r).unsigned_abs() as usize;
            if s < 4 {
                counts[s] += 1;
            }
        }
        for (x, &p) in expected.iter().enumerate() {
            let mass = if x == 0 { p } else { 2.0 * p };
            let freq = counts[x] as f64 / n as f64;
            assert!(
                (freq - mass).abs() < 0.007,
                "pmf mismatch at |x|={x}: {freq} vs {mass}"
            );
        }
    }

    #[test]
    fn empirical_moments_track_the_target() {
        let sigma = 100.0;
        let n = 1_000_000usize;
        let sampler = DiscreteGaussian::new(sigma).unwrap();
        let mut r = rng(4);
        let mut sum = 0i64;
        let mut sum_sq = 0f64;
        for _ in 0..n {
            let s = sampler.sample(&mut r);
            sum += s;
            sum_sq += (s as f64) * (s as f64);
        }
        let mean = sum as f64 / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        assert!(mean.abs() < 0.5, "mean {mean} too far from 0");
        assert!(
            (var / (sigma * sigma) - 1.0).abs() < 0.02,
            "variance {var} off target {}",
            sigma * sigma
        );
    }

    #[test]
    fn noise_round_trips_through_the_field() {
        let sampler = DiscreteGaussian::new(1e6).unwrap();
        let mut r = rng(5);
        for _ in 0..500 {
            let s = sampler.sample(&mut r);
            let encoded = FieldElement::from_i128(s as i128);
            assert_eq!(encoded.centered(), s as i128);
        }
    }

    #[test]
    fn ks_statistic_hand_cases() {
        assert_eq!(ks_two_sample(&[5, 1, 3], &[5, 1, 3]).unwrap(), 0.0);
        assert_eq!(ks_two_sample(&[0, 0], &[1, 1]).unwrap(), 1.0);
        assert_eq!(ks_two_sample(&[1, 1, 2, 4], &[1, 3, 3, 5]).unwrap(), 0.5);
        assert_eq!(
            ks_two_sample(&[-2, 0, 0, 1, 7], &[-1, 0, 2, 2, 2]).unwrap(),
            0.4
        );
        assert_eq!(
            ks_two_sample(&[], &[1]).unwrap_err(),
            NoiseError::EmptySample
        );
    }

    #[test]
    fn ks_statistic_matches_brute_force() {
        let mut r = rng(6);
        for trial in 0..20 {
            let n = 40 + trial * 7;
            let m = 60 + trial * 3;
            let a: Vec<i64> = (0..n).map(|_| r.gen_range(-30..30)).collect();
            let b: Vec<i64> = (0..m).map(|_| r.gen_range(-25..35)).collect();
            let fast = ks_two_sample(&a, &b).unwrap();
            let mut slow = 0f64;
            for &v in a.iter().chain(b.iter()) {
                let fa = a.iter().filter(|&&x| x <= v).count() as f64 / a.len() as f64;
                let fb = b.iter().filter(|&&x| x <= v).count() as f64 / b.len() as f64;
                slow = slow.max((fa - fb).abs());
            }
            assert_eq!(fast, slow, "trial {trial}");
        }
    }

    #[test]
    fn ks_statistic_survives_monotone_relabeling() {
        let mut r = rng(7);
        let a: Vec<i64> = (0..200).map(|_| r.gen_range(-50..50)).collect();
        let b: Vec<i64> = (0..150).map(|_| r.gen_range(-40..60)).collect();
        let base = ks_two_sample(&a, &b).unwrap();
        let stretch = |v: &i64| 3 * *v + 7;
        let cube = |v: &i64| v.pow(3);
        for f in [stretch as fn(&i64) -> i64, cube] {
            let fa: Vec<i64> = a.iter().map(f).collect();
            let fb: Vec<i64> = b.iter().map(f).collect();
            assert_eq!(ks_two_sample(&fa, &fb).unwrap(), base);
        }
        assert!((0.0..=1.0).contains(&base));
    }

    #[test]
    fn ks_critical_frozen_values() {
        let cases = [
            (0.01, 5000, 0.0325524726144),
            (0.05, 100, 0.192064558264),
            (0.05, 10_000, 0.0192064558264),
            (0.05, 100_000, 0.00607361461908),
        ];
        for (alpha, d, expect) in cases {
            let got = ks_critical(alpha, d).unwrap();
            assert!((got - expect).abs() < 1e-10, "ks_critical({alpha}, {d})");
        }
        // Quadrupling the sample size halves the critical value.
        let base = ks_critical(0.05, 100).unwrap();
        assert!((ks_critical(0.05, 400).unwrap() - base / 2.0).abs() < 1e-12);
        assert_eq!(
            ks_critical(2.0, 10).unwrap_err(),
            NoiseError::InvalidAlpha(2.0)
        );
        assert!(ks_critical(0.0, 10).is_err());
        assert!(ks_critical(1.0, 10).is_err());
        assert_eq!(ks_critical(0.05, 0).unwrap_err(), NoiseError::EmptySample);
    }

    #[test]
    fn capacity_check_flags_wraparound() {
        let ok = NoiseParams::new(1.0, 1.0, 100).unwrap();
        assert!(ok.check_capacity(1000).is_ok());
        let big = NoiseParams::new(1e12, 1e6, 100).unwrap();
        assert!(matches!(
            big.check_capacity(1000),
            Err(NoiseError::CapacityExceeded { .. })
        ));
        assert!(NoiseParams::new(-1.0, 1.0, 10).is_err());
        assert!(NoiseParams::new(1.0, 0.0, 10).is_err());
    }

    #[test]
    fn per_server_std_matches_the_grid_formula() {
        let p = NoiseParams::new(0.5, 2.0, 10).unwrap();
        let expect = 0.5 * 2.0 * FIXED_SCALE / std::f64::consts::SQRT_2;
        assert!((p.per_server_std_int() - expect).abs() < 1e-9);
        let var = p.per_server_variance().unwrap().to_f64().unwrap();
        assert!((var - expect * expect).abs() / (expect * expect) < 1e-12);
        let rv = p.reference_variance().unwrap().to_f64().unwrap();
        assert!((rv - 2.0 * var).abs() / rv < 1e-12);
        assert!(NoiseParams::new(0.0, 1.0, 10)
            .unwrap()
            .per_server_variance()
            .is_none());
    }

    #[test]
    fn sigma_zero_adds_nothing_and_sends_nothing() {
        let mut c = cluster(SecurityMode::Malicious, 11);
        c.begin_round();
        let d = 16;
        let mut delta = zero_delta(d);
        let params = NoiseParams::new(0.0, 1.0, d).unwrap();
        let reports = run_noise_phase(&mut c, &mut delta, &params).unwrap();
        assert!(reports.is_empty());
        assert_eq!(c.net.inter_server_bytes(), 0);
        let opened = reconstruct(
            [&delta[0], &delta[1], &delta[2]],
            SecurityMode::Malicious,
        )
        .unwrap();
        assert!(opened.iter().all(|&v| v == FieldElement::ZERO));
    }

    #[test]
    fn total_noise_variance_is_three_halves_per_server() {
        let d = 20_000;
        // sigma*clip = 1 gives per-server grid variance 2^29.
        let params = NoiseParams::new(0.5, 2.0, d).unwrap();
        let mut c = cluster(SecurityMode::SemiHonest, 12);
        c.begin_round();
        let mut delta = zero_delta(d);
        let noise = sec_noise_add(&mut c, &mut delta, &params);
        let opened = reconstruct(
            [&delta[0], &delta[1], &delta[2]],
            SecurityMode::SemiHonest,
        )
        .unwrap();
        let ints: Vec<f64> = opened.iter().map(|v| v.centered() as f64).collect();
        let var = ints.iter().map(|v| v * v).sum::<f64>() / d as f64;
        let per_server = (1u64 << 29) as f64;
        let total = 3.0 * per_server;
        assert!(
            (var / total - 1.0).abs() < 0.06,
            "total noise variance {var} vs {total}"
        );

        // Subtracting one server's own noise leaves two shares' worth.
        let eta0 = reconstruct(
            [&noise.shares[0][0], &noise.shares[0][1], &noise.shares[0][2]],
            SecurityMode::SemiHonest,
        )
        .unwrap();
        let residual: Vec<f64> = opened
            .iter()
            .zip(&eta0)
            .map(|(&v, &e)| (v - e).centered() as f64)
            .collect();
        let var_res = residual.iter().map(|v| v * v).sum::<f64>() / d as f64;
        assert!(
            (var_res / (2.0 * per_server) - 1.0).abs() < 0.06,
            "residual variance {var_res} vs {}",
            2.0 * per_server
        );
    }

    #[test]
    fn noise_phase_traffic_is_thirty_d_elements() {
        let d = 64;
        let params = NoiseParams::new(0.1, 1.0, d).unwrap();
        let mut c = cluster(SecurityMode::Malicious, 13);
        c.begin_round();
        let mut delta = zero_delta(d);
        run_noise_phase(&mut c, &mut delta, &params).unwrap();
        // Sharing: 3 dealers x 2 recipients x 2 columns; verification x3:
        // mask sharing (4d) plus the two kappa copies (2d).
        assert_eq!(c.net.inter_server_bytes(), 30 * d as u64 * 8);
        assert!(c.net.fully_drained());
    }

    #[test]
    fn honest_verification_passes_at_the_null_rate() {
        let d = 4000;
        let params = NoiseParams::new(1.0, 1.0, d).unwrap();
        let mut passes = 0u32;
        let mut total = 0u32;
        for trial in 0..40u64 {
            let mut c = cluster(SecurityMode::Malicious, 20 + trial as u8);
            c.begin_round();
            let mut delta = zero_delta(d);
            let noise = sec_noise_add(&mut c, &mut delta, &params);
            for i in PartyId::ALL {
                total += 1;
                if verify_noise_round(&mut c, i, &noise, &params).is_ok() {
                    passes += 1;
                }
            }
        }
        // Null rejection rate is alpha = 5%; 105/120 leaves a wide margin.
        assert!(
            passes >= 105,
            "only {passes}/{total} honest verifications passed"
        );
    }

    #[test]
    fn doubled_noise_std_is_rejected() {
        let d = 10_000;
        let params = NoiseParams::new(1.0, 1.0, d).unwrap();
        for trial in 0..10u64 {
            let mut c = cluster(SecurityMode::Malicious, 60 + trial as u8);
            c.adversary = AdversaryBehavior {
                kind: AdversaryKind::InflatedNoise { factor: 2.0 },
                party: PartyId(1),
            };
            c.begin_round();
            let mut delta = zero_delta(d);
            let noise = sec_noise_add(&mut c, &mut delta, &params);
            let err = verify_noise_round(&mut c, PartyId(1), &noise, &params).unwrap_err();
            assert_eq!(err.reason, AbortReason::NoiseKs, "trial {trial}");
        }
    }

    #[test]
    fn inconsistent_kappa_copies_abort() {
        let d = 32;
        let params = NoiseParams::new(1.0, 1.0, d).unwrap();
        for corrupt in [PartyId(1), PartyId(2)] {
            let mut c = cluster(SecurityMode::Malicious, 90);
            c.adversary = AdversaryBehavior {
                kind: AdversaryKind::InconsistentOpening,
                party: corrupt,
            };
            c.begin_round();
            let mut delta = zero_delta(d);
            let noise = sec_noise_add(&mut c, &mut delta, &params);
            // Party 1 is a copy-holder both as the tested party and as the
            // masker of party 0's check.
            let err = verify_noise_round(&mut c, PartyId(1), &noise, &params).unwrap_err();
            assert_eq!(err.reason, AbortReason::OpenInconsistency);
        }
    }

    #[test]
    fn full_noise_phase_reports_all_three_parties() {
        let d = 10_000;
        let params = NoiseParams::new(1.0, 1.0, d).unwrap();
        let mut c = cluster(SecurityMode::Malicious, 42);
        c.begin_round();
        let mut delta = zero_delta(d);
        let reports = run_noise_phase(&mut c, &mut delta, &params).unwrap();
        assert_eq!(reports.len(), 3);
        for (idx, rep) in reports.iter().enumerate() {
            assert_eq!(rep.party, idx as u8);
            assert_eq!(rep.d, d);
            assert!(rep.passed);
            assert!(rep.d_ks <= rep.d_crit);
            assert_eq!(rep.alpha, KS_ALPHA);
            assert_eq!(rep.ref_seed.len(), 32);
        }
    }
}
