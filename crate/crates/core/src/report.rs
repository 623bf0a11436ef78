//! Abort taxonomy and per-round reporting structures.
//!
//! Every malicious-security check folds into one of four abort reasons;
//! transcripts carry the reason, per-link traffic, KS verdicts, and the
//! modeled wallclock so experiment reports are self-contained and
//! reproducible from config plus seed.

use serde::{Deserialize, Serialize};

use crate::net::{EndpointId, NetModel, Network};

/// Why a round stopped (or `None` if it completed).
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortReason {
    /// Round completed.
    None,
    /// Blind MAC batch verification opened nonzero.
    Mac,
    /// Model digests disagreed after reconstruction.
    Hash,
    /// Noise verification KS statistic exceeded the critical value.
    NoiseKs,
    /// Redundant copies disagreed during an opening.
    OpenInconsistency,
}

/// A protocol abort carrying its taxonomy reason.
#[derive(Clone, Debug, thiserror::Error, PartialEq)]
#[error("protocol abort: {reason:?} ({detail})")]
pub struct Abort {
    /// Taxonomy bucket.
    pub reason: AbortReason,
    /// Human-readable context.
    pub detail: String,
}

impl Abort {
    /// Builds an abort with a context message.
    pub fn new(reason: AbortReason, detail: impl Into<String>) -> Self {
        Abort {
            reason,
            detail: detail.into(),
        }
    }
}

/// One noise-verification verdict.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct KsReport {
    /// Party whose noise was under test.
    pub party: u8,
    /// Sample size d.
    pub d: usize,
    /// Two-sample KS statistic.
    pub d_ks: f64,
    /// Critical value at the configured significance.
    pub d_crit: f64,
    /// Significance level.
    pub alpha: f64,
    /// True when d_ks <= d_crit.
    pub passed: bool,
    /// Seed of the auditable reference sample.
    pub ref_seed: String,
}

/// Traffic counters for one directed link, flattened for JSON.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinkReport {
    /// Sending endpoint.
    pub from: EndpointId,
    /// Receiving endpoint.
    pub to: EndpointId,
    /// Frames sent.
    pub messages: u64,
    /// Payload bytes.
    pub payload_bytes: u64,
    /// Logical bits.
    pub logical_bits: u64,
}

/// Everything observable about one protocol round.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RoundTranscript {
    /// Round index.
    pub round: u32,
    /// Selected client ids.
    pub participants: Vec<u32>,
    /// Outcome.
    pub abort_reason: AbortReason,
    /// Noise-verification verdicts (malicious mode).
    pub ks_reports: Vec<KsReport>,
    /// Per-link traffic.
    pub links: Vec<LinkReport>,
    /// Per-client upload logical bits, parallel to `participants`.
    pub client_upload_bits: Vec<u64>,
    /// Payload bytes over server-to-server links.
    pub inter_server_bytes: u64,
    /// Modeled wallclock for the round in seconds.
    pub estimated_seconds: f64,
}

impl RoundTranscript {
    /// Snapshots the network state into a transcript.
    pub fn from_network(
        round: u32,
        participants: Vec<u32>,
        abort_reason: AbortReason,
        ks_reports: Vec<KsReport>,
        net: &Network,
        model: &NetModel,
    ) -> Self {
        let links = net
            .all_links()
            .into_iter()
            .map(|((from, to), s)| LinkReport {
                from,
                to,
                messages: s.messages,
                payload_bytes: s.payload_bytes,
                logical_bits: s.logical_bits,
            })
            .collect();
        let client_upload_bits = participants
            .iter()
            .map(|&c| net.client_upload_bits(c))
            .collect();
        RoundTranscript {
            round,
            participants,
            abort_reason,
            ks_reports,
            links,
            client_upload_bits,
            inter_server_bytes: net.inter_server_bytes(),
            estimated_seconds: crate::net::estimate_wallclock(net.phases(), model),
        }
    }
}
