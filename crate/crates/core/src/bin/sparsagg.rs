//! Experiment drivers: secure-aggregation rounds, the DP mean-estimation
//! sweep, federated training, the privacy accountant, standalone noise
//! verification, and a communication cost table.
//!
//! Every command reads an optional JSON config, honors `--seed`, and prints
//! one deterministic JSON report (or JSON-lines for `train`) to stdout or
//! `--out`. Timing chatter goes to stderr so reports stay byte-identical
//! for a fixed config and seed.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use sparsagg::accountant::{epsilon_for, sigma_for_budget, PrivacyConfig};
use sparsagg::agg::{
    aggregate_round, baseline_client_cost, client_encode, load_uploads, save_uploads,
    BaselineKind, ClientUpload,
};
use sparsagg::field::{elements_to_bytes, fixed_decode, fixed_encode};
use sparsagg::integrity::open_checked;
use sparsagg::net::{estimate_wallclock, NetModel};
use sparsagg::noise::{ks_critical, run_noise_phase, NoiseParams, KS_ALPHA};
use sparsagg::perm::SparseVector;
use sparsagg::prg::{derive_seed, PrgStream};
use sparsagg::report::KsReport;
use sparsagg::rss::{PartyId, RssVector};
use sparsagg::server::{AdversaryBehavior, AdversaryKind, Cluster};
use sparsagg::train::{run_training, TrainConfig};
use sparsagg::{AbortReason, FieldElement, Seed, SecurityMode};

#[derive(Parser)]
#[command(name = "sparsagg", version, about = "Three-server secure aggregation experiments")]
struct Cli {
    /// Master seed; overrides the config file's seed when given.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Write the report to this file instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one aggregation round over random sparse vectors.
    Aggregate(AggregateArgs),
    /// Sweep DP mean-estimation error over privacy budgets and densities.
    DpSum(DpSumArgs),
    /// Run federated training from a JSON config.
    Train(TrainArgs),
    /// Convert noise and sampling parameters to a privacy budget.
    Accountant(AccountantArgs),
    /// Run one distributed-noise round with verification.
    NoiseVerify(NoiseVerifyArgs),
    /// Tabulate per-round communication across security modes.
    Bench(BenchArgs),
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let start = Instant::now();
    let report = match &cli.command {
        Command::Aggregate(args) => cmd_aggregate(&cli, args)?,
        Command::DpSum(args) => cmd_dp_sum(&cli, args)?,
        Command::Train(args) => cmd_train(&cli, args)?,
        Command::Accountant(args) => cmd_accountant(args)?,
        Command::NoiseVerify(args) => cmd_noise_verify(&cli, args)?,
        Command::Bench(args) => cmd_bench(&cli, args)?,
    };
    match &cli.out {
        Some(path) => fs::write(path, report).with_context(|| format!("writing {path:?}"))?,
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(report.as_bytes())?;
        }
    }
    eprintln!("elapsed: {:.3}s", start.elapsed().as_secs_f64());
    Ok(())
}

fn load_config<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {path:?}"))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {path:?}"))
}

fn to_pretty<T: Serialize>(value: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(value)? + "\n")
}

fn master_seed(seed: u64) -> Seed {
    let mut bytes = [0u8; 16];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..].copy_from_slice(&seed.to_le_bytes());
    Seed(bytes)
}

fn seeded_rng(seed: u64, tag: &str) -> ChaCha20Rng {
    let derived = derive_seed(master_seed(seed), tag);
    ChaCha20Rng::from_seed(
        PrgStream::new(derived, "rng")
            .next_seed()
            .0
            .repeat(2)
            .try_into()
            .unwrap(),
    )
}

fn parse_mode(s: &str) -> Result<SecurityMode> {
    match s {
        "semi_honest" => Ok(SecurityMode::SemiHonest),
        "malicious" => Ok(SecurityMode::Malicious),
        other => bail!("unknown mode {other:?} (expected semi_honest or malicious)"),
    }
}

fn parse_adversary(kind: &str, party: u8, factor: f64) -> Result<AdversaryBehavior> {
    if party > 2 {
        bail!("adversary party must be 0, 1, or 2");
    }
    let kind = match kind {
        "none" => AdversaryKind::None,
        "wrong_permutation" => AdversaryKind::WrongPermutation,
        "share_tamper" => AdversaryKind::ShareTamper,
        "additive_aggregation_error" => AdversaryKind::AdditiveAggregationError,
        "inflated_noise" => AdversaryKind::InflatedNoise { factor },
        "inconsistent_opening" => AdversaryKind::InconsistentOpening,
        other => bail!("unknown adversary {other:?}"),
    };
    Ok(AdversaryBehavior {
        kind,
        party: PartyId(party),
    })
}

/// A sparse vector with L2 norm `scale`: k distinct coordinates, uniform
/// values rescaled onto the sphere. Returns the real values alongside the
/// field encoding.
fn random_unit_sparse<R: Rng + ?Sized>(
    dim: usize,
    k: usize,
    scale: f64,
    rng: &mut R,
) -> (Vec<usize>, Vec<f64>, SparseVector) {
    let mut indices = rand::seq::index::sample(rng, dim, k).into_vec();
    indices.sort_unstable();
    let values: Vec<f64> = loop {
        let raw: Vec<f64> = (0..k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 1e-9 {
            break raw.iter().map(|v| v * scale / norm).collect();
        }
    };
    let encoded = values
        .iter()
        .map(|&v| fixed_encode(v).expect("unit-scale value"))
        .collect();
    let vector = SparseVector::new(dim, indices.clone(), encoded).expect("distinct sorted indices");
    (indices, values, vector)
}

fn sha256_hex(elements: &[FieldElement]) -> String {
    let digest = Sha256::digest(elements_to_bytes(elements));
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

// ---------------------------------------------------------------- aggregate

#[derive(Args)]
struct AggregateArgs {
    /// JSON config; flags override individual fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Replay uploads from a bundle directory instead of generating them.
    #[arg(long)]
    bundles: Option<PathBuf>,
    /// Save the generated uploads as a replayable bundle directory.
    #[arg(long)]
    save_bundles: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    /// Nonzero fraction per client vector.
    #[arg(long)]
    density: Option<f64>,
    #[arg(long)]
    clip: Option<f64>,
    /// semi_honest or malicious.
    #[arg(long)]
    mode: Option<String>,
    /// Deviation to inject: none, wrong_permutation, share_tamper,
    /// additive_aggregation_error, inflated_noise, inconsistent_opening.
    #[arg(long)]
    adversary: Option<String>,
    /// Corrupt server for --adversary.
    #[arg(long, default_value_t = 0)]
    adversary_party: u8,
    /// Noise-std multiplier for --adversary inflated_noise.
    #[arg(long, default_value_t = 2.0)]
    noise_factor: f64,
}

#[derive(Clone, Serialize, Deserialize)]
struct AggregateConfig {
    n: usize,
    dim: usize,
    density: f64,
    clip: f64,
    mode: SecurityMode,
    #[serde(default)]
    adversary: AdversaryBehavior,
    #[serde(default)]
    seed: u64,
}

impl Default for AggregateConfig {
    fn default() -> Self {
        AggregateConfig {
            n: 100,
            dim: 100_000,
            density: 0.01,
            clip: 1.0,
            mode: SecurityMode::SemiHonest,
            adversary: AdversaryBehavior::honest(),
            seed: 0,
        }
    }
}

#[derive(Serialize)]
struct CostTable {
    upload_bits_per_client: u64,
    dense_rss_bits: u64,
    uncompressed_perm_bits: u64,
    index_value_strawman_bits: u64,
    compressed_to_strawman_ratio: f64,
}

fn cost_table(upload_bits: u64, dim: usize, k: usize) -> CostTable {
    let strawman = baseline_client_cost(BaselineKind::IndexValueStrawman, dim, k);
    CostTable {
        upload_bits_per_client: upload_bits,
        dense_rss_bits: baseline_client_cost(BaselineKind::DenseRss, dim, k),
        uncompressed_perm_bits: baseline_client_cost(BaselineKind::UncompressedPerm, dim, k),
        index_value_strawman_bits: strawman,
        compressed_to_strawman_ratio: upload_bits as f64 / strawman as f64,
    }
}

#[derive(Serialize)]
struct AggregateReport {
    config: AggregateConfig,
    k: usize,
    replayed_from: Option<String>,
    accepted: usize,
    rejected: usize,
    abort: AbortReason,
    matches_plaintext_sum: Option<bool>,
    aggregate_sha256: Option<String>,
    costs: CostTable,
    inter_server_bytes: u64,
    estimated_seconds: f64,
}

fn density_to_k(dim: usize, density: f64) -> Result<usize> {
    if !(density > 0.0 && density <= 1.0) {
        bail!("density must lie in (0, 1], got {density}");
    }
    Ok(((dim as f64 * density).round() as usize).clamp(1, dim))
}

fn cmd_aggregate(cli: &Cli, args: &AggregateArgs) -> Result<String> {
    let mut config: AggregateConfig = match &args.config {
        Some(path) => load_config(path)?,
        None => AggregateConfig::default(),
    };
    if let Some(n) = args.n {
        config.n = n;
    }
    if let Some(d) = args.d {
        config.dim = d;
    }
    if let Some(density) = args.density {
        config.density = density;
    }
    if let Some(clip) = args.clip {
        config.clip = clip;
    }
    if let Some(mode) = &args.mode {
        config.mode = parse_mode(mode)?;
    }
    if let Some(kind) = &args.adversary {
        config.adversary = parse_adversary(kind, args.adversary_party, args.noise_factor)?;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if config.n == 0 {
        bail!("need at least one client");
    }
    if !(config.clip.is_finite() && config.clip > 0.0) {
        bail!("clip bound must be positive");
    }

    let (dim, k, uploads, expected, replayed_from) = match &args.bundles {
        Some(dir) => {
            if args.save_bundles.is_some() {
                bail!("--save-bundles only applies to generated uploads");
            }
            let (dim, k, mode, uploads) = load_uploads(dir)?;
            config.n = uploads.len();
            config.dim = dim;
            config.density = k as f64 / dim as f64;
            config.mode = mode;
            (dim, k, uploads, None, Some(dir.display().to_string()))
        }
        None => {
            let dim = config.dim;
            let k = density_to_k(dim, config.density)?;
            let mut expected = vec![FieldElement::ZERO; dim];
            let mut uploads = Vec::with_capacity(config.n);
            for c in 0..config.n as u32 {
                let mut rng = seeded_rng(config.seed, &format!("agg/c{c}"));
                let (indices, _, vector) = random_unit_sparse(dim, k, config.clip, &mut rng);
                for (slot, &i) in indices.iter().enumerate() {
                    expected[i] += vector.values[slot];
                }
                uploads.push(client_encode(c, &vector, k, config.mode, &mut rng)?);
            }
            if let Some(dir) = &args.save_bundles {
                save_uploads(dir, dim, k, config.mode, &uploads)?;
            }
            (dim, k, uploads, Some(expected), None)
        }
    };

    let cluster_seed = derive_seed(master_seed(config.seed), "cluster");
    let mut cluster = Cluster::new(config.mode, cluster_seed, NetModel::default());
    cluster.adversary = config.adversary;
    cluster.begin_round();
    let outcome: std::result::Result<_, sparsagg::Abort> = (|| {
        let agg = aggregate_round(&mut cluster, dim, k, &uploads)?;
        let opened = open_checked(&mut cluster, &agg.state.acc)?;
        Ok((agg.accepted.len(), agg.rejected.len(), opened))
    })();
    let (accepted, rejected, abort, matches, digest) = match outcome {
        Ok((accepted, rejected, opened)) => {
            let matches = expected.as_ref().map(|e| *e == opened);
            (accepted, rejected, AbortReason::None, matches, Some(sha256_hex(&opened)))
        }
        Err(abort) => (0, 0, abort.reason, None, None),
    };

    let upload_bits = cluster.net.client_upload_bits(uploads[0].client);
    let report = AggregateReport {
        k,
        replayed_from,
        accepted,
        rejected,
        abort,
        matches_plaintext_sum: matches,
        aggregate_sha256: digest,
        costs: cost_table(upload_bits, dim, k),
        inter_server_bytes: cluster.net.inter_server_bytes(),
        estimated_seconds: estimate_wallclock(cluster.net.phases(), &cluster.model),
        config,
    };
    to_pretty(&report)
}

// ------------------------------------------------------------------ dp-sum

#[derive(Args)]
struct DpSumArgs {
    /// JSON config overriding the defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Repetitions per (epsilon, density) cell.
    #[arg(long)]
    reps: Option<u32>,
}

#[derive(Clone, Serialize, Deserialize)]
struct DpSumConfig {
    n: usize,
    dim: usize,
    clip: f64,
    delta: f64,
    epsilons: Vec<f64>,
    densities: Vec<f64>,
    reps: u32,
    #[serde(default)]
    seed: u64,
}

impl Default for DpSumConfig {
    fn default() -> Self {
        DpSumConfig {
            n: 100,
            dim: 10_000,
            clip: 1.0,
            delta: 1e-5,
            epsilons: vec![1.0, 5.0, 10.0],
            densities: vec![0.001, 0.005, 0.01],
            reps: 5,
            seed: 0,
        }
    }
}

#[derive(Serialize)]
struct DpSumCell {
    epsilon: Option<f64>,
    density: f64,
    sigma: f64,
    mean_mse: f64,
}

#[derive(Serialize)]
struct DpSumReport {
    config: DpSumConfig,
    cells: Vec<DpSumCell>,
}

/// Mean estimation under the full pipeline: encode, aggregate, add noise,
/// open, divide by n. Returns the MSE against the real-valued mean.
fn dp_sum_once(config: &DpSumConfig, sigma: f64, k: usize, rep_tag: &str) -> Result<f64> {
    let dim = config.dim;
    let mut mean = vec![0.0f64; dim];
    let mut uploads: Vec<ClientUpload> = Vec::with_capacity(config.n);
    for c in 0..config.n as u32 {
        let mut rng = seeded_rng(config.seed, &format!("dpsum/{rep_tag}/c{c}"));
        let (indices, values, vector) = random_unit_sparse(dim, k, config.clip, &mut rng);
        for (&i, &v) in indices.iter().zip(&values) {
            mean[i] += v / config.n as f64;
        }
        uploads.push(client_encode(c, &vector, k, SecurityMode::SemiHonest, &mut rng)?);
    }
    let cluster_seed = derive_seed(master_seed(config.seed), &format!("dpsum/{rep_tag}"));
    let mut cluster = Cluster::new(SecurityMode::SemiHonest, cluster_seed, NetModel::default());
    cluster.begin_round();
    let params = NoiseParams::new(sigma, config.clip, dim)?;
    params.check_capacity(config.n)?;
    let opened = (|| {
        let agg = aggregate_round(&mut cluster, dim, k, &uploads)?;
        let mut acc = agg.state.acc;
        run_noise_phase(&mut cluster, &mut acc, &params)?;
        open_checked(&mut cluster, &acc)
    })()
    .map_err(|abort| anyhow::anyhow!("unexpected abort: {:?}", abort.reason))?;
    let mse = opened
        .iter()
        .zip(&mean)
        .map(|(&el, &m)| {
            let est = fixed_decode(el) / config.n as f64;
            (est - m) * (est - m)
        })
        .sum::<f64>()
        / dim as f64;
    Ok(mse)
}

fn cmd_dp_sum(cli: &Cli, args: &DpSumArgs) -> Result<String> {
    let mut config: DpSumConfig = match &args.config {
        Some(path) => load_config(path)?,
        None => DpSumConfig::default(),
    };
    if let Some(reps) = args.reps {
        config.reps = reps;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if config.reps == 0 {
        bail!("need at least one repetition");
    }
    let mut cells = Vec::new();
    for &density in &config.densities {
        let k = density_to_k(config.dim, density)?;
        let mut noiseless = 0.0;
        for rep in 0..config.reps {
            noiseless += dp_sum_once(&config, 0.0, k, &format!("q{density}/r{rep}"))?;
        }
        cells.push(DpSumCell {
            epsilon: None,
            density,
            sigma: 0.0,
            mean_mse: noiseless / config.reps as f64,
        });
        for &epsilon in &config.epsilons {
            let sigma = sigma_for_budget(epsilon, config.delta, 1.0, 1)?.sqrt();
            let mut total = 0.0;
            for rep in 0..config.reps {
                total += dp_sum_once(&config, sigma, k, &format!("e{epsilon}/q{density}/r{rep}"))?;
            }
            cells.push(DpSumCell {
                epsilon: Some(epsilon),
                density,
                sigma,
                mean_mse: total / config.reps as f64,
            });
        }
    }
    to_pretty(&DpSumReport { config, cells })
}

// ------------------------------------------------------------------- train

#[derive(Args)]
struct TrainArgs {
    /// JSON config mirroring the library's training config.
    #[arg(long)]
    config: PathBuf,
}

fn cmd_train(cli: &Cli, args: &TrainArgs) -> Result<String> {
    let mut config: TrainConfig = load_config(&args.config)?;
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let outcome = run_training(&config)?;
    let mut lines = String::new();
    for row in &outcome.metrics {
        lines.push_str(&serde_json::to_string(row)?);
        lines.push('\n');
    }
    Ok(lines)
}

// -------------------------------------------------------------- accountant

#[derive(Args)]
struct AccountantArgs {
    /// Per-round client sampling rate.
    #[arg(long)]
    q: f64,
    /// Noise multiplier.
    #[arg(long)]
    sigma: f64,
    /// Failure probability.
    #[arg(long)]
    delta: f64,
    /// Rounds composed.
    #[arg(long)]
    rounds: u32,
    /// Target budget; when given, also reports the σ that meets it.
    #[arg(long)]
    epsilon: Option<f64>,
}

#[derive(Serialize)]
struct AccountantReport {
    epsilon: f64,
    alpha_star: u64,
    tau: f64,
    sigma_required: Option<f64>,
}

fn cmd_accountant(args: &AccountantArgs) -> Result<String> {
    if !(args.q > 0.0 && args.q <= 1.0) {
        bail!("sampling rate must lie in (0, 1], got {}", args.q);
    }
    let config = PrivacyConfig {
        q: args.q,
        sigma: args.sigma,
        delta: args.delta,
        rounds: args.rounds,
    };
    let report = epsilon_for(&config)?;
    let sigma_required = match args.epsilon {
        Some(eps) => Some(sigma_for_budget(eps, args.delta, args.q, args.rounds)?.sqrt()),
        None => None,
    };
    to_pretty(&AccountantReport {
        epsilon: report.epsilon,
        alpha_star: report.alpha_star,
        tau: report.tau,
        sigma_required,
    })
}

// ------------------------------------------------------------ noise-verify

#[derive(Args)]
struct NoiseVerifyArgs {
    /// Vector dimension (= KS sample size).
    #[arg(long, default_value_t = 10_000)]
    d: usize,
    /// Noise multiplier.
    #[arg(long, default_value_t = 1.0)]
    sigma: f64,
    /// Clipping bound.
    #[arg(long, default_value_t = 1.0)]
    clip: f64,
    /// Noise-std multiplier for the corrupt server; 1 means honest.
    #[arg(long, default_value_t = 1.0)]
    factor: f64,
    /// Corrupt server when --factor differs from 1.
    #[arg(long, default_value_t = 2)]
    party: u8,
}

#[derive(Serialize)]
struct NoiseVerifyReport {
    d: usize,
    sigma: f64,
    clip: f64,
    factor: f64,
    ks_alpha: f64,
    ks_critical: f64,
    abort: AbortReason,
    reports: Vec<KsReport>,
}

fn cmd_noise_verify(cli: &Cli, args: &NoiseVerifyArgs) -> Result<String> {
    if !(args.sigma > 0.0) {
        bail!("noise multiplier must be positive");
    }
    let seed = cli.seed.unwrap_or(0);
    let params = NoiseParams::new(args.sigma, args.clip, args.d)?;
    params.check_capacity(0)?;
    let cluster_seed = derive_seed(master_seed(seed), "noise-verify");
    let mut cluster = Cluster::new(SecurityMode::Malicious, cluster_seed, NetModel::default());
    if args.factor != 1.0 {
        cluster.adversary = parse_adversary("inflated_noise", args.party, args.factor)?;
    }
    cluster.begin_round();
    let mut acc = PartyId::ALL.map(|p| RssVector::zeros(p, args.d));
    let (abort, reports) = match run_noise_phase(&mut cluster, &mut acc, &params) {
        Ok(reports) => (AbortReason::None, reports),
        Err(abort) => (abort.reason, Vec::new()),
    };
    to_pretty(&NoiseVerifyReport {
        d: args.d,
        sigma: args.sigma,
        clip: args.clip,
        factor: args.factor,
        ks_alpha: KS_ALPHA,
        ks_critical: ks_critical(KS_ALPHA, args.d)?,
        abort,
        reports,
    })
}

// ------------------------------------------------------------------- bench

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 100_000)]
    d: usize,
    /// Nonzero fraction per client vector.
    #[arg(long, default_value_t = 0.01)]
    density: f64,
    #[arg(long, default_value_t = 1.0)]
    clip: f64,
}

#[derive(Serialize)]
struct BenchRow {
    mode: SecurityMode,
    upload_bits_per_client: u64,
    inter_server_bytes: u64,
    estimated_seconds: f64,
}

#[derive(Serialize)]
struct BenchReport {
    n: usize,
    dim: usize,
    k: usize,
    rows: Vec<BenchRow>,
    malicious_overhead_ratio: f64,
    costs: CostTable,
}

fn cmd_bench(cli: &Cli, args: &BenchArgs) -> Result<String> {
    let seed = cli.seed.unwrap_or(0);
    let k = density_to_k(args.d, args.density)?;
    let mut rows = Vec::new();
    let mut upload_bits = 0;
    for mode in [SecurityMode::SemiHonest, SecurityMode::Malicious] {
        let mut uploads = Vec::with_capacity(args.n);
        for c in 0..args.n as u32 {
            let mut rng = seeded_rng(seed, &format!("bench/c{c}"));
            let (_, _, vector) = random_unit_sparse(args.d, k, args.clip, &mut rng);
            uploads.push(client_encode(c, &vector, k, mode, &mut rng)?);
        }
        let cluster_seed = derive_seed(master_seed(seed), "bench");
        let mut cluster = Cluster::new(mode, cluster_seed, NetModel::default());
        cluster.begin_round();
        let agg = aggregate_round(&mut cluster, args.d, k, &uploads)
            .map_err(|abort| anyhow::anyhow!("unexpected abort: {:?}", abort.reason))?;
        open_checked(&mut cluster, &agg.state.acc)
            .map_err(|abort| anyhow::anyhow!("unexpected abort: {:?}", abort.reason))?;
        upload_bits = cluster.net.client_upload_bits(0);
        rows.push(BenchRow {
            mode,
            upload_bits_per_client: upload_bits,
            inter_server_bytes: cluster.net.inter_server_bytes(),
            estimated_seconds: estimate_wallclock(cluster.net.phases(), &cluster.model),
        });
    }
    let ratio = rows[1].inter_server_bytes as f64 / rows[0].inter_server_bytes as f64;
    to_pretty(&BenchReport {
        n: args.n,
        dim: args.d,
        k,
        rows,
        malicious_overhead_ratio: ratio,
        costs: cost_table(upload_bits, args.d, k),
    })
}
