//! Malicious-security checks for the aggregation pipeline.
//!
//! Two mechanisms cover the two trust boundaries:
//!
//! * A blind Carter-Wegman MAC certifies everything between a client's
//!   upload and the aggregated share vector: padding, permutation
//!   decompression, and all shuffle passes. Each client tags its reordered
//!   update with t = Σ k[j]·x′[j] under a random key k it derives from three
//!   seeds; the servers recompute the tag on the shuffled shares with one
//!   secure dot product per client and batch-verify all differences behind a
//!   shared random factor, so a nonzero difference reveals nothing beyond
//!   the fact of tampering.
//!
//! * A digest comparison certifies the final plain reconstruction: every
//!   server hashes the vector it reconstructed and cross-checks the other
//!   two digests, catching a server that opened different values toward
//!   different peers.

use sha2::{Digest, Sha256};

use crate::field::{elements_to_bytes, FieldElement};
use crate::net::{EndpointId, Payload};
use crate::prg::{PrgStream, Seed};
use crate::report::{Abort, AbortReason};
use crate::rss::{dot_local, PartyId, RssScalar, RssVector, SecurityMode};
use crate::server::{phase, Cluster};

/// Stream tag under which MAC key seeds expand to key share vectors.
pub const MAC_KEY_TAG: &str = "mackey";

/// Client-side MAC over the reordered update: t = Σ key[j]·r[j]. Positions
/// past the retained values multiply explicit zeros and drop out, so only
/// the key prefix matching `r` is needed.
pub fn client_mac_tag(key_prefix: &[FieldElement], r: &[FieldElement]) -> FieldElement {
    assert!(key_prefix.len() >= r.len(), "key prefix shorter than values");
    r.iter().zip(key_prefix).map(|(&x, &k)| x * k).sum()
}

/// Expands the full MAC key as the client computes it: the sum of the three
/// seed streams.
pub fn expand_key(seeds: &[Seed; 3], len: usize) -> Vec<FieldElement> {
    let mut streams: Vec<PrgStream> = seeds.iter().map(|&s| PrgStream::new(s, MAC_KEY_TAG)).collect();
    (0..len)
        .map(|_| {
            streams
                .iter_mut()
                .map(|st| st.next_element())
                .sum::<FieldElement>()
        })
        .collect()
}

/// Server-side expansion of one key share column from its seed.
pub fn expand_key_share(seed: Seed, len: usize) -> Vec<FieldElement> {
    let mut st = PrgStream::new(seed, MAC_KEY_TAG);
    (0..len).map(|_| st.next_element()).collect()
}

/// The servers' recomputed MAC ⟦t′⟧ for one client: a secure dot product of
/// the shuffled update and the shuffled key. Each party computes its local
/// cross terms, remasks with a fresh zero sharing, and passes the result to
/// the previous party to restore replication. Three scalar messages.
pub fn expected_mac(
    cluster: &mut Cluster,
    value: &[RssVector; 3],
    key: &[RssVector; 3],
) -> [RssScalar; 3] {
    let tag = cluster.next_reshare_tag();
    let z: [FieldElement; 3] = PartyId::ALL.map(|p| {
        dot_local(&value[p.idx()], &key[p.idx()]).expect("dot shape")
            + cluster.server(p).reshare_mask(&tag)
    });
    reshare_to_pairs(cluster, z, phase::DOT_RESHARE, "mac/dot")
}

/// Sends each party's additive share to the previous party, rebuilding
/// replicated pairs from 3-out-of-3 shares.
fn reshare_to_pairs(
    cluster: &mut Cluster,
    z: [FieldElement; 3],
    phase_tag: u8,
    phase_name: &str,
) -> [RssScalar; 3] {
    cluster.net.begin_phase(phase_name);
    let round = cluster.round;
    for p in PartyId::ALL {
        cluster
            .net
            .send(
                EndpointId::server(p),
                EndpointId::server(p.prev()),
                phase_tag,
                round,
                Payload::Elements(vec![z[p.idx()]]),
            )
            .expect("reshare send");
    }
    PartyId::ALL.map(|p| {
        let from_next = cluster
            .net
            .recv(EndpointId::server(p.next()), EndpointId::server(p))
            .expect("reshare recv")
            .payload
            .into_elements()[0];
        RssScalar {
            owner: p,
            share_a: z[p.idx()],
            share_b: from_next,
        }
    })
}

/// Batch-verifies all MAC differences of a round: opens g = r·Σ(t_i − t′_i)
/// for a shared random nonzero r and accepts only g = 0. The difference sum
/// is multiplied in shared form (cross terms plus resharing), then opened
/// robustly so a corrupt server cannot equivocate about the flag itself.
pub fn blind_batch_verify(cluster: &mut Cluster, deltas: [RssScalar; 3]) -> Result<(), Abort> {
    let r = cluster.shared_rand_nonzero();
    let tag = cluster.next_reshare_tag();
    let z: [FieldElement; 3] = PartyId::ALL.map(|p| {
        let (f, rr) = (deltas[p.idx()], r[p.idx()]);
        f.share_a * rr.share_a + f.share_a * rr.share_b + f.share_b * rr.share_a
            + cluster.server(p).reshare_mask(&tag)
    });
    let g = reshare_to_pairs(cluster, z, phase::DOT_RESHARE, "mac/verify");
    let opened = cluster.open_scalar_robust(&g, phase::MAC_OPEN)?;
    if opened != FieldElement::ZERO {
        return Err(Abort::new(
            AbortReason::Mac,
            "batched MAC difference is nonzero",
        ));
    }
    Ok(())
}

/// SHA-256 digest used for reconstruction consistency checks.
pub fn digest_bytes(bytes: &[u8]) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(bytes);
    h.finalize().into()
}

/// Cross-checks one digest per party: each sends its own to both peers and
/// compares what it receives. Any disagreement aborts; agreement means all
/// three parties reconstructed identical data.
pub fn digest_exchange(cluster: &mut Cluster, digests: [[u8; 32]; 3]) -> Result<(), Abort> {
    cluster.net.begin_phase("open/hash");
    let round = cluster.round;
    for p in PartyId::ALL {
        for peer in [p.next(), p.prev()] {
            cluster
                .net
                .send(
                    EndpointId::server(p),
                    EndpointId::server(peer),
                    phase::HASH_EXCHANGE,
                    round,
                    Payload::Digest(digests[p.idx()]),
                )
                .expect("digest send");
        }
    }
    for p in PartyId::ALL {
        for peer in [p.prev(), p.next()] {
            let got = cluster
                .net
                .recv(EndpointId::server(peer), EndpointId::server(p))
                .expect("digest recv")
                .payload
                .into_digest();
            if got != digests[p.idx()] {
                return Err(Abort::new(
                    AbortReason::Hash,
                    format!(
                        "reconstruction digests disagree between parties {} and {}",
                        p.0, peer.0
                    ),
                ));
            }
        }
    }
    Ok(())
}

/// Opens an aggregate with the mode's final-reconstruction check: plain
/// reconstruction always, plus a digest exchange over the opened bytes in
/// malicious mode. Tampering with any transmitted or accumulated share makes
/// at least two parties reconstruct different vectors, which the digests
/// surface; the cheap plain opening therefore stays safe to use here.
pub fn open_checked(cluster: &mut Cluster, shares: &[RssVector; 3]) -> Result<Vec<FieldElement>, Abort> {
    cluster.net.begin_phase("open/rec");
    let views = cluster.open_vector_plain(shares, phase::MODEL_OPEN);
    if cluster.mode == SecurityMode::Malicious {
        let digests = [0, 1, 2].map(|i| digest_bytes(&elements_to_bytes(&views[i])));
        digest_exchange(cluster, digests)?;
    }
    let [first, _, _] = views;
    Ok(first)
}
