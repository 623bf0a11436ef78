//! Three-server secure aggregation for sparse vectors with distributed
//! differential privacy.
//!
//! The crate simulates a deployment of three non-colluding servers that
//! aggregate sparse client vectors under replicated secret sharing. Clients
//! upload O(k) material per vector through permutation compression; the
//! servers obliviously shuffle each contribution out to full dimension, add
//! shares locally, attach jointly sampled discrete Gaussian noise, and open
//! only the noisy sum. A malicious mode layers blind MAC batch verification,
//! robust openings, digest cross-checks, and statistical verification of
//! each server's noise on top of the same pipeline.
//!
//! Modules follow the deployment's layers:
//!
//! * [`field`], [`prg`], [`rss`]: the 61-bit Mersenne field, fixed-point
//!   embedding, deterministic tagged PRG streams, and replicated sharing.
//! * [`perm`], [`shuffle`]: permutation compression and the three-pass
//!   oblivious shuffle.
//! * [`agg`], [`integrity`]: client encoding, server orchestration, and the
//!   malicious-security checks.
//! * [`net`], [`server`], [`report`]: the simulated transport with byte
//!   accounting, the three-server context, and run transcripts.

pub mod accountant;
pub mod agg;
pub mod field;
pub mod integrity;
pub mod net;
pub mod noise;
pub mod perm;
pub mod prg;
pub mod report;
pub mod rss;
pub mod server;
pub mod shuffle;
pub mod train;

pub use field::{fixed_decode, fixed_encode, FieldElement, PRIME};
pub use perm::{Permutation, SparseVector};
pub use prg::Seed;
pub use report::{Abort, AbortReason, RoundTranscript};
pub use rss::{PartyId, RssVector, SecurityMode};
pub use server::{AdversaryBehavior, AdversaryKind, Cluster};
pub use train::{run_training, TrainConfig, TrainOutcome};
