//! End-to-end federated rounds over a synthetic least-squares task: local
//! SGD, top-k sparsification, clipping, secure aggregation, distributed
//! noise, verification, and the model update.
//!
//! The task is quadratic with a known optimum, so convergence claims reduce
//! to arithmetic instead of benchmark lore: clients hold rows of a linear
//! system solved exactly by `w_star`, losses are mean squared residuals, and
//! a plaintext FedAvg twin of the secure pipeline isolates the effects of
//! fixed-point encoding, sparsification, and noise.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::agg::{aggregate_round, client_encode};
use crate::field::{fixed_decode, fixed_encode, FieldError};
use crate::integrity::open_checked;
use crate::net::NetModel;
use crate::noise::{run_noise_phase, NoiseError, NoiseParams};
use crate::perm::SparseVector;
use crate::prg::{derive_seed, PrgStream, Seed};
use crate::report::{Abort, AbortReason, RoundTranscript};
use crate::rss::SecurityMode;
use crate::server::{AdversaryBehavior, Cluster};
use crate::accountant::{epsilon_for, PrivacyConfig};

/// Invalid training configuration.
#[derive(Debug, PartialEq, thiserror::Error)]
pub enum TrainError {
    /// A field failed validation.
    #[error("invalid training config: {0}")]
    Config(String),
    /// Noise parameters cannot fit the field.
    #[error(transparent)]
    Noise(#[from] NoiseError),
}

fn default_q() -> f64 {
    1.0
}

fn default_epochs() -> u32 {
    1
}

fn default_delta() -> f64 {
    1e-5
}

fn default_column_decay() -> f64 {
    1.0
}

/// Everything that defines a training run; JSON-friendly for the CLI.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Total clients.
    pub n: usize,
    /// Model dimension.
    pub dim: usize,
    /// Per-round client sampling rate (Poisson, per client).
    #[serde(default = "default_q")]
    pub q: f64,
    /// Rounds to run.
    pub rounds: u32,
    /// Local epochs per selected client.
    #[serde(default = "default_epochs")]
    pub epochs: u32,
    /// Local SGD learning rate.
    pub eta_l: f64,
    /// L2 clipping bound on sparsified updates.
    pub clip: f64,
    /// Coordinates kept by top-k sparsification.
    pub k: usize,
    /// DP noise multiplier; 0 disables noise.
    #[serde(default)]
    pub sigma: f64,
    /// DP failure probability for the accountant.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Minibatch size; 0 means full batch.
    #[serde(default)]
    pub batch_size: usize,
    /// Data rows per client; 0 picks 2·dim.
    #[serde(default)]
    pub rows_per_client: usize,
    /// Geometric scale on design-matrix column j (decay^j). 1 gives an
    /// isotropic task; smaller values concentrate gradient mass in the
    /// leading coordinates, the regime where top-k sparsification pays.
    #[serde(default = "default_column_decay")]
    pub column_decay: f64,
    /// Security mode for the server protocol.
    pub mode: SecurityMode,
    /// Injected server deviation.
    #[serde(default)]
    pub adversary: AdversaryBehavior,
    /// Master seed; everything else derives from it.
    #[serde(default)]
    pub seed: u64,
}

impl TrainConfig {
    /// Validates ranges and the field-capacity headroom.
    pub fn validate(&self) -> Result<(), TrainError> {
        if self.n == 0 {
            return Err(TrainError::Config("need at least one client".into()));
        }
        if self.dim == 0 {
            return Err(TrainError::Config("dimension must be positive".into()));
        }
        if !(self.q > 0.0 && self.q <= 1.0) {
            return Err(TrainError::Config(format!(
                "sampling rate must lie in (0, 1], got {}",
                self.q
            )));
        }
        if self.k > self.dim {
            return Err(TrainError::Config(format!(
                "sparsity {} exceeds dimension {}",
                self.k, self.dim
            )));
        }
        if !(self.clip.is_finite() && self.clip > 0.0) {
            return Err(TrainError::Config(format!(
                "clip bound must be positive, got {}",
                self.clip
            )));
        }
        if !(self.eta_l.is_finite() && self.eta_l >= 0.0) {
            return Err(TrainError::Config(format!(
                "learning rate must be nonnegative, got {}",
                self.eta_l
            )));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(TrainError::Config(format!(
                "noise multiplier must be nonnegative, got {}",
                self.sigma
            )));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(TrainError::Config(format!(
                "delta must lie in (0, 1), got {}",
                self.delta
            )));
        }
        if !(self.column_decay > 0.0 && self.column_decay <= 1.0) {
            return Err(TrainError::Config(format!(
                "column decay must lie in (0, 1], got {}",
                self.column_decay
            )));
        }
        NoiseParams::new(self.sigma, self.clip, self.dim)?.check_capacity(self.n)?;
        Ok(())
    }

    fn rows(&self) -> usize {
        if self.rows_per_client == 0 {
            2 * self.dim
        } else {
            self.rows_per_client
        }
    }
}

/// One client's local data: rows of the design matrix and targets.
#[derive(Clone, Debug)]
pub struct ClientData {
    /// Design-matrix rows.
    pub rows: Vec<Vec<f64>>,
    /// Targets, one per row.
    pub targets: Vec<f64>,
}

/// A least-squares problem split across clients. Targets are generated as
/// exact row products with `w_star`, so the global optimum and its zero
/// loss are known by construction.
#[derive(Clone, Debug)]
pub struct SyntheticTask {
    /// Model dimension.
    pub dim: usize,
    /// The planted optimum.
    pub w_star: Vec<f64>,
    /// Per-client data.
    pub clients: Vec<ClientData>,
}

impl SyntheticTask {
    /// Samples a task with uniform entries in [-1, 1), column j scaled by
    /// `column_decay`^j.
    pub fn generate<R: Rng + ?Sized>(
        n: usize,
        dim: usize,
        rows_per_client: usize,
        column_decay: f64,
        rng: &mut R,
    ) -> Self {
        let scales: Vec<f64> = (0..dim as i32).map(|j| column_decay.powi(j)).collect();
        let w_star: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let clients = (0..n)
            .map(|_| {
                let rows: Vec<Vec<f64>> = (0..rows_per_client)
                    .map(|_| {
                        scales
                            .iter()
                            .map(|s| s * rng.gen_range(-1.0..1.0))
                            .collect()
                    })
                    .collect();
                let targets = rows.iter().map(|r| dot(r, &w_star)).collect();
                ClientData { rows, targets }
            })
            .collect();
        SyntheticTask {
            dim,
            w_star,
            clients,
        }
    }

    /// Mean squared residual of one client: ½‖A_i w − b_i‖²/m.
    pub fn client_loss(&self, client: usize, w: &[f64]) -> f64 {
        let data = &self.clients[client];
        let m = data.rows.len() as f64;
        let sum: f64 = data
            .rows
            .iter()
            .zip(&data.targets)
            .map(|(row, &b)| {
                let r = dot(row, w) - b;
                r * r
            })
            .sum();
        0.5 * sum / m
    }

    /// Mean of the client losses.
    pub fn global_loss(&self, w: &[f64]) -> f64 {
        let total: f64 = (0..self.clients.len())
            .map(|i| self.client_loss(i, w))
            .sum();
        total / self.clients.len() as f64
    }

    /// Full-batch gradient of one client's loss.
    pub fn client_gradient(&self, client: usize, w: &[f64]) -> Vec<f64> {
        let data = &self.clients[client];
        let m = data.rows.len() as f64;
        let mut g = vec![0.0; self.dim];
        for (row, &b) in data.rows.iter().zip(&data.targets) {
            let r = dot(row, w) - b;
            for (gj, &aj) in g.iter_mut().zip(row) {
                *gj += r * aj / m;
            }
        }
        g
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `epochs` passes of mini-batch SGD on one client's quadratic loss,
/// starting from `w`; returns the model delta. Batch order reshuffles per
/// epoch from `rng`, so the result is deterministic under a fixed seed.
pub fn local_update<R: Rng + ?Sized>(
    data: &ClientData,
    w: &[f64],
    epochs: u32,
    eta_l: f64,
    batch_size: usize,
    rng: &mut R,
) -> Vec<f64> {
    let m = data.rows.len();
    let bs = if batch_size == 0 || batch_size > m {
        m
    } else {
        batch_size
    };
    let mut cur = w.to_vec();
    let mut order: Vec<usize> = (0..m).collect();
    for _ in 0..epochs {
        order.shuffle(rng);
        for chunk in order.chunks(bs) {
            let mut g = vec![0.0; cur.len()];
            for &r in chunk {
                let row = &data.rows[r];
                let err = dot(row, &cur) - data.targets[r];
                for (gj, &aj) in g.iter_mut().zip(row) {
                    *gj += err * aj;
                }
            }
            let scale = eta_l / chunk.len() as f64;
            for (wj, gj) in cur.iter_mut().zip(&g) {
                *wj -= scale * gj;
            }
        }
    }
    for (c, &orig) in cur.iter_mut().zip(w) {
        *c -= orig;
    }
    cur
}

/// A sparse real-valued model update.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseUpdate {
    /// Dense dimension.
    pub dim: usize,
    /// Kept coordinates, ascending.
    pub indices: Vec<usize>,
    /// Values parallel to `indices`.
    pub values: Vec<f64>,
}

/// Keeps the k largest-magnitude coordinates; ties break toward the lower
/// index.
pub fn topk_sparsify(delta: &[f64], k: usize) -> SparseUpdate {
    let k = k.min(delta.len());
    let mut by_magnitude: Vec<usize> = (0..delta.len()).collect();
    by_magnitude.sort_by(|&a, &b| {
        delta[b]
            .abs()
            .total_cmp(&delta[a].abs())
            .then(a.cmp(&b))
    });
    let mut indices: Vec<usize> = by_magnitude[..k].to_vec();
    indices.sort_unstable();
    let values = indices.iter().map(|&i| delta[i]).collect();
    SparseUpdate {
        dim: delta.len(),
        indices,
        values,
    }
}

/// Scales the update down to L2 norm `c` when it exceeds the bound.
pub fn clip(mut update: SparseUpdate, c: f64) -> SparseUpdate {
    let norm = update.values.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm > c {
        let scale = c / norm;
        for v in &mut update.values {
            *v *= scale;
        }
    }
    update
}

/// Fixed-point encodes a clipped update for upload.
pub fn encode_update(update: &SparseUpdate) -> Result<SparseVector, FieldError> {
    let values = update
        .values
        .iter()
        .map(|&v| fixed_encode(v))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(SparseVector::new(update.dim, update.indices.clone(), values)
        .expect("ascending in-range indices"))
}

fn master_seed(seed: u64) -> Seed {
    let mut bytes = [0u8; 16];
    bytes[..8].copy_from_slice(&seed.to_le_bytes());
    bytes[8..].copy_from_slice(&seed.to_le_bytes());
    Seed(bytes)
}

fn train_rng(seed: u64, tag: &str) -> ChaCha20Rng {
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

/// The task a training run with this config will generate; callers that
/// need the plaintext twin (or losses) reconstruct it from the config.
pub fn task_for(config: &TrainConfig) -> SyntheticTask {
    let mut rng = train_rng(config.seed, "task");
    SyntheticTask::generate(
        config.n,
        config.dim,
        config.rows(),
        config.column_decay,
        &mut rng,
    )
}

/// Poisson client sampling for one round: each client joins independently
/// with probability q.
pub fn sample_participants(config: &TrainConfig, round: u32) -> Vec<u32> {
    let mut rng = train_rng(config.seed, &format!("sample/r{round}"));
    (0..config.n as u32)
        .filter(|_| rng.gen::<f64>() < config.q)
        .collect()
}

/// The full client-side pipeline in the clear: local SGD, then top-k, then
/// clipping. Both the secure round and the plaintext twin call this.
pub fn client_update(
    task: &SyntheticTask,
    config: &TrainConfig,
    client: u32,
    w: &[f64],
    round: u32,
) -> SparseUpdate {
    let mut rng = train_rng(config.seed, &format!("sgd/r{round}/c{client}"));
    let delta = local_update(
        &task.clients[client as usize],
        w,
        config.epochs,
        config.eta_l,
        config.batch_size,
        &mut rng,
    );
    clip(topk_sparsify(&delta, config.k), config.clip)
}

/// One secure round: sample clients, encode and upload their updates, run
/// the server pipeline (aggregate, noise, verification, opening), and fold
/// the averaged delta into `w`. On abort `w` is left untouched and the
/// abort is returned alongside the transcript.
pub fn run_round(
    cluster: &mut Cluster,
    task: &SyntheticTask,
    config: &TrainConfig,
    round: u32,
    w: &mut [f64],
) -> (RoundTranscript, Option<Abort>) {
    cluster.begin_round();
    let participants = sample_participants(config, round);
    if participants.is_empty() {
        let transcript = RoundTranscript::from_network(
            round,
            Vec::new(),
            AbortReason::None,
            Vec::new(),
            &cluster.net,
            &cluster.model,
        );
        return (transcript, None);
    }
    let uploads: Vec<_> = participants
        .iter()
        .map(|&c| {
            let update = client_update(task, config, c, w, round);
            let encoded = encode_update(&update).expect("clipped values fit the fixed-point range");
            let mut rng = train_rng(config.seed, &format!("enc/r{round}/c{c}"));
            client_encode(c, &encoded, config.k, cluster.mode, &mut rng)
                .expect("well-formed client upload")
        })
        .collect();
    let params = NoiseParams::new(config.sigma, config.clip, config.dim).expect("validated config");
    let outcome: Result<_, Abort> = (|| {
        let agg = aggregate_round(cluster, config.dim, config.k, &uploads)?;
        let mut acc = agg.state.acc;
        let reports = run_noise_phase(cluster, &mut acc, &params)?;
        let opened = open_checked(cluster, &acc)?;
        Ok((opened, reports, agg.accepted.len()))
    })();
    match outcome {
        Ok((opened, reports, accepted)) => {
            let count = accepted as f64;
            for (wj, &el) in w.iter_mut().zip(&opened) {
                *wj += fixed_decode(el) / count;
            }
            let transcript = RoundTranscript::from_network(
                round,
                participants,
                AbortReason::None,
                reports,
                &cluster.net,
                &cluster.model,
            );
            (transcript, None)
        }
        Err(abort) => {
            let transcript = RoundTranscript::from_network(
                round,
                participants,
                abort.reason,
                Vec::new(),
                &cluster.net,
                &cluster.model,
            );
            (transcript, Some(abort))
        }
    }
}

/// One metrics row, emitted per round.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoundMetrics {
    /// Round index (1-based).
    pub round: u32,
    /// Realized participant count.
    pub participants: usize,
    /// Global loss after the round.
    pub loss: f64,
    /// L2 distance to the planted optimum.
    pub dist_to_opt: f64,
    /// Cumulative privacy budget through this round; absent when σ = 0.
    pub epsilon: Option<f64>,
    /// Payload bytes exchanged between servers this round.
    pub inter_server_bytes: u64,
    /// Total client upload bits this round.
    pub upload_bits: u64,
    /// Modeled wallclock seconds for the round.
    pub estimated_seconds: f64,
    /// Outcome of the round.
    pub abort_reason: AbortReason,
}

/// Result of a training run.
#[derive(Debug)]
pub struct TrainOutcome {
    /// Final model.
    pub w: Vec<f64>,
    /// Per-round metrics, one row per executed round.
    pub metrics: Vec<RoundMetrics>,
    /// Per-round transcripts, parallel to `metrics`.
    pub transcripts: Vec<RoundTranscript>,
    /// The abort that ended the run early, if any.
    pub abort: Option<Abort>,
}

/// Runs the configured number of secure rounds from a zero model, stopping
/// early on abort. Metrics carry the accountant's cumulative ε when σ > 0.
pub fn run_training(config: &TrainConfig) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let task = task_for(config);
    let cluster_seed = derive_seed(master_seed(config.seed), "cluster");
    let mut cluster = Cluster::new(config.mode, cluster_seed, NetModel::default());
    cluster.adversary = config.adversary;
    let mut w = vec![0.0; config.dim];
    let mut metrics = Vec::new();
    let mut transcripts = Vec::new();
    let mut abort = None;
    for round in 1..=config.rounds {
        let (transcript, round_abort) = run_round(&mut cluster, &task, config, round, &mut w);
        let epsilon = if config.sigma > 0.0 {
            let pc = PrivacyConfig {
                q: config.q,
                sigma: config.sigma,
                delta: config.delta,
                rounds: round,
            };
            epsilon_for(&pc).ok().map(|r| r.epsilon)
        } else {
            None
        };
        metrics.push(RoundMetrics {
            round,
            participants: transcript.participants.len(),
            loss: task.global_loss(&w),
            dist_to_opt: w
                .iter()
                .zip(&task.w_star)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
            epsilon,
            inter_server_bytes: transcript.inter_server_bytes,
            upload_bits: transcript.client_upload_bits.iter().sum(),
            estimated_seconds: transcript.estimated_seconds,
            abort_reason: transcript.abort_reason,
        });
        transcripts.push(transcript);
        if round_abort.is_some() {
            abort = round_abort;
            break;
        }
    }
    Ok(TrainOutcome {
        w,
        metrics,
        transcripts,
        abort,
    })
}

/// Plaintext FedAvg twin: the identical client pipeline and sampling, with
/// float aggregation instead of the secure protocol. Returns the final
/// model and the per-round losses.
pub fn run_fedavg_plain(task: &SyntheticTask, config: &TrainConfig) -> (Vec<f64>, Vec<f64>) {
    let mut w = vec![0.0; config.dim];
    let mut losses = Vec::new();
    for round in 1..=config.rounds {
        let participants = sample_participants(config, round);
        if !participants.is_empty() {
            let mut sum = vec![0.0; config.dim];
            for &c in &participants {
                let update = client_update(task, config, c, &w, round);
                for (&i, &v) in update.indices.iter().zip(&update.values) {
                    sum[i] += v;
                }
            }
            let count = participants.len() as f64;
            for (wj, s) in w.iter_mut().zip(&sum) {
                *wj += s / count;
            }
        }
        losses.push(task.global_loss(&w));
    }
    (w, losses)
}
