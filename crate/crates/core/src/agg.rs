//! Client encoding and server orchestration: from n sparse uploads to one
//! secret-shared dense aggregate.
//!
//! A client with k retained coordinates uploads only O(k) material: shares
//! of the value list, two seeds, and the k-entry head of the third
//! permutation factor. The servers expand the factors, pad the shares to
//! dimension d with derivable zero sharings, shuffle each client's vector
//! under the composed permutation, and add the results share-wise. Under
//! malicious security the upload also carries a MAC tag sharing and key
//! seeds; every client's tag is recomputed on the shuffled shares and the
//! batch is verified before the aggregate leaves this module.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::field::{elements_from_bytes, elements_to_bytes, FieldElement};
use crate::integrity::{
    blind_batch_verify, client_mac_tag, expand_key, expand_key_share, expected_mac,
};
use crate::net::{EndpointId, Payload};
use crate::perm::{
    decompose_and_compress, derive_permutation, reorder, PermError, Permutation, SparseVector,
};
use crate::prg::{Seed, ELEMENT_BITS, SEED_BITS};
use crate::report::Abort;
use crate::rss::{share_vector, PartyId, RssScalar, RssVector, SecurityMode};
use crate::server::{phase, AdversaryKind, Cluster};
use crate::shuffle::{oblivious_shuffle, PassFactors, PassPair};

/// Encoding and ingestion failures.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AggError {
    /// More retained entries than slots.
    #[error("sparse vector has {0} entries but only {1} slots")]
    TooManyEntries(usize, usize),
    /// More slots than coordinates.
    #[error("slot count {0} exceeds dimension {1}")]
    SlotsExceedDim(usize, usize),
    /// A client upload failed validation at ingest.
    #[error("client {0} rejected: {1}")]
    Rejected(u32, PermError),
}

/// Pads a sparse vector's entry set with zero-valued unused indices until it
/// has exactly `k` slots, keeping indices ascending. The protocol shape
/// requires a uniform k across clients; explicit zero slots change nothing
/// about the aggregate.
pub fn pad_to_slots(x: &SparseVector, k: usize) -> Result<SparseVector, AggError> {
    if x.k() > k {
        return Err(AggError::TooManyEntries(x.k(), k));
    }
    if k > x.dim {
        return Err(AggError::SlotsExceedDim(k, x.dim));
    }
    if x.k() == k {
        return Ok(x.clone());
    }
    let mut used = vec![false; x.dim];
    for &i in &x.indices {
        used[i] = true;
    }
    let mut indices = x.indices.clone();
    let mut values = x.values.clone();
    for i in 0..x.dim {
        if indices.len() == k {
            break;
        }
        if !used[i] {
            indices.push(i);
            values.push(FieldElement::ZERO);
        }
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by_key(|&j| indices[j]);
    Ok(SparseVector {
        dim: x.dim,
        indices: order.iter().map(|&j| indices[j]).collect(),
        values: order.iter().map(|&j| values[j]).collect(),
    })
}

/// The bundle one server receives from one client.
#[derive(Clone, Debug, PartialEq)]
pub struct ServerBundle {
    /// This server's replicated pair of the value-list sharing.
    pub value_a: Vec<FieldElement>,
    /// Second column of the pair.
    pub value_b: Vec<FieldElement>,
    /// Permutation seeds routed to this server (S0 gets both, in order
    /// seed0 then seed1; S1 gets seed1; S2 gets seed0).
    pub perm_seeds: Vec<Seed>,
    /// Head of the third factor (S1 and S2 only).
    pub head: Option<Vec<usize>>,
    /// Replicated pair of the MAC tag sharing (malicious mode).
    pub mac_share: Option<(FieldElement, FieldElement)>,
    /// This server's two MAC key seeds (malicious mode).
    pub key_seeds: Option<[Seed; 2]>,
}

/// Everything one client uploads in a round.
#[derive(Clone, Debug, PartialEq)]
pub struct ClientUpload {
    /// Client identity.
    pub client: u32,
    /// Vector dimension d.
    pub dim: usize,
    /// Retained slot count k.
    pub k: usize,
    /// Per-server bundles, indexed by server.
    pub bundles: [ServerBundle; 3],
}

/// Encodes one client's sparse update for upload: reorders it, shares the
/// value list, compresses the permutation, and (malicious mode) attaches the
/// MAC material.
pub fn client_encode<R: Rng + ?Sized>(
    client: u32,
    x: &SparseVector,
    k: usize,
    mode: SecurityMode,
    rng: &mut R,
) -> Result<ClientUpload, AggError> {
    let x = pad_to_slots(x, k)?;
    let (r, l, e) = reorder(&x);
    let pi = derive_permutation(&l, &e).expect("reorder yields a partition");
    let (compressed, _) = decompose_and_compress(&pi, k, rng);
    let value_shares = share_vector(&r, rng);

    let mut mac_shares: Option<[RssScalar; 3]> = None;
    let mut key_seeds: Option<[Seed; 3]> = None;
    if mode == SecurityMode::Malicious {
        let ks = [
            Seed::random(rng),
            Seed::random(rng),
            Seed::random(rng),
        ];
        let key_prefix = expand_key(&ks, k);
        let t = client_mac_tag(&key_prefix, &r);
        let t_shares = share_vector(&[t], rng);
        mac_shares = Some([t_shares[0].scalar(), t_shares[1].scalar(), t_shares[2].scalar()]);
        key_seeds = Some(ks);
    }

    let bundles = PartyId::ALL.map(|p| {
        let j = p.idx();
        let perm_seeds = match j {
            0 => vec![compressed.seed0, compressed.seed1],
            1 => vec![compressed.seed1],
            _ => vec![compressed.seed0],
        };
        let head = if j == 0 {
            None
        } else {
            Some(compressed.head.clone())
        };
        ServerBundle {
            value_a: value_shares[j].share_a.clone(),
            value_b: value_shares[j].share_b.clone(),
            perm_seeds,
            head,
            mac_share: mac_shares.map(|m| (m[j].share_a, m[j].share_b)),
            key_seeds: key_seeds.map(|ks| [ks[j], ks[(j + 1) % 3]]),
        }
    });
    Ok(ClientUpload {
        client,
        dim: x.dim,
        k,
        bundles,
    })
}

/// Counts a client's logical upload bits without touching a network.
pub fn upload_logical_bits(upload: &ClientUpload) -> u64 {
    let mut elements = 0u64;
    let mut seeds = 0u64;
    let mut indices = 0u64;
    for b in &upload.bundles {
        elements += (b.value_a.len() + b.value_b.len()) as u64;
        if b.mac_share.is_some() {
            elements += 2;
        }
        seeds += b.perm_seeds.len() as u64;
        if let Some(ks) = &b.key_seeds {
            seeds += ks.len() as u64;
        }
        if let Some(h) = &b.head {
            indices += h.len() as u64;
        }
    }
    (elements + indices) * ELEMENT_BITS + seeds * SEED_BITS
}

/// Transmits an upload to the three servers, one frame per bundle field.
pub fn send_upload(cluster: &mut Cluster, upload: &ClientUpload) {
    cluster.net.begin_phase("upload");
    let round = cluster.round;
    let from = EndpointId::Client(upload.client);
    for p in PartyId::ALL {
        let b = &upload.bundles[p.idx()];
        let to = EndpointId::server(p);
        let mut frames = vec![
            Payload::Elements(b.value_a.clone()),
            Payload::Elements(b.value_b.clone()),
        ];
        if let Some((ta, tb)) = b.mac_share {
            frames.push(Payload::Elements(vec![ta, tb]));
        }
        if let Some(ks) = &b.key_seeds {
            frames.push(Payload::Seeds(ks.to_vec()));
        }
        frames.push(Payload::Seeds(b.perm_seeds.clone()));
        if let Some(h) = &b.head {
            frames.push(Payload::Indices(h.iter().map(|&i| i as u64).collect()));
        }
        for f in frames {
            cluster
                .net
                .send(from, to, phase::UPLOAD, round, f)
                .expect("upload send");
        }
    }
}

/// One client's validated server-side state, ready to shuffle.
#[derive(Debug)]
pub struct ClientServerState {
    /// Client identity.
    pub client: u32,
    /// Replicated sharing of the reordered update, padded to d.
    pub value: [RssVector; 3],
    /// Replicated sharing of the expanded MAC key (malicious mode).
    pub key: Option<[RssVector; 3]>,
    /// Replicated sharing of the client's MAC tag (malicious mode).
    pub mac: Option<[RssScalar; 3]>,
    /// Per-pass permutation factors as each active server expanded them.
    pub factors: PassFactors,
}

/// Receives one client's frames, validates the head copies, expands factors
/// and key shares, and pads the value sharing to full dimension. The frames
/// are consumed even when validation rejects the client, so a bad upload
/// cannot desynchronize the links.
pub fn server_ingest(
    cluster: &mut Cluster,
    client: u32,
    dim: usize,
    k: usize,
) -> Result<ClientServerState, AggError> {
    let malicious = cluster.mode == SecurityMode::Malicious;
    let from = EndpointId::Client(client);
    let mut values: Vec<(Vec<FieldElement>, Vec<FieldElement>)> = Vec::with_capacity(3);
    let mut macs: Vec<(FieldElement, FieldElement)> = Vec::new();
    let mut key_seeds: Vec<[Seed; 2]> = Vec::new();
    let mut perm_seeds: Vec<Vec<Seed>> = Vec::with_capacity(3);
    let mut heads: Vec<Vec<usize>> = Vec::with_capacity(2);
    for p in PartyId::ALL {
        let to = EndpointId::server(p);
        let mut next = || cluster.net.recv(from, to).expect("upload frame").payload;
        let a = next().into_elements();
        let b = next().into_elements();
        values.push((a, b));
        if malicious {
            let t = next().into_elements();
            macs.push((t[0], t[1]));
            let ks = next().into_seeds();
            key_seeds.push([ks[0], ks[1]]);
        }
        perm_seeds.push(next().into_seeds());
        if p.idx() != 0 {
            heads.push(next().into_indices().iter().map(|&i| i as usize).collect());
        }
    }

    // Both head holders expand the third factor independently; either copy
    // failing validation rejects the client.
    let reject = |e: PermError| AggError::Rejected(client, e);
    let pass0 = PassPair {
        lead: crate::perm::server_decompress_head(&heads[0], dim).map_err(reject)?,
        follow: crate::perm::server_decompress_head(&heads[1], dim).map_err(reject)?,
    };
    let s0_at_s0 = perm_seeds[0][0];
    let s1_at_s0 = perm_seeds[0][1];
    let s1_at_s1 = perm_seeds[1][0];
    let s0_at_s2 = perm_seeds[2][0];
    let factors = PassFactors {
        passes: [
            pass0,
            PassPair {
                lead: Permutation::from_seed(s1_at_s0, dim),
                follow: Permutation::from_seed(s1_at_s1, dim),
            },
            PassPair {
                lead: Permutation::from_seed(s0_at_s2, dim),
                follow: Permutation::from_seed(s0_at_s0, dim),
            },
        ],
    };

    let round = cluster.round;
    let value = PartyId::ALL.map(|p| {
        let (mut a, mut b) = values[p.idx()].clone();
        let (pad_a, pad_b) = cluster.server(p).pad_pair(round, client, dim - k);
        a.extend(pad_a);
        b.extend(pad_b);
        RssVector {
            owner: p,
            share_a: a,
            share_b: b,
        }
    });
    let key = malicious.then(|| {
        PartyId::ALL.map(|p| RssVector {
            owner: p,
            share_a: expand_key_share(key_seeds[p.idx()][0], dim),
            share_b: expand_key_share(key_seeds[p.idx()][1], dim),
        })
    });
    let mac = malicious.then(|| {
        PartyId::ALL.map(|p| RssScalar {
            owner: p,
            share_a: macs[p.idx()].0,
            share_b: macs[p.idx()].1,
        })
    });
    Ok(ClientServerState {
        client,
        value,
        key,
        mac,
        factors,
    })
}

/// The running share-wise aggregate.
#[derive(Debug)]
pub struct AggregateState {
    /// Replicated sharing of the partial sum, length d.
    pub acc: [RssVector; 3],
    /// Clients folded in so far.
    pub processed: usize,
}

impl AggregateState {
    /// An empty aggregate of dimension d.
    pub fn new(dim: usize) -> Self {
        AggregateState {
            acc: PartyId::ALL.map(|p| RssVector::zeros(p, dim)),
            processed: 0,
        }
    }

    /// Adds one client's shuffled sharing; local, order-independent.
    pub fn absorb(&mut self, shuffled: &[RssVector; 3]) {
        for p in PartyId::ALL {
            self.acc[p.idx()]
                .add_local(&shuffled[p.idx()])
                .expect("aggregate shape");
        }
        self.processed += 1;
    }
}

/// Result of one aggregation round, still in shared form.
#[derive(Debug)]
pub struct RoundAggregate {
    /// The share-wise sum over accepted clients.
    pub state: AggregateState,
    /// Clients folded into the aggregate.
    pub accepted: Vec<u32>,
    /// Clients whose uploads failed validation.
    pub rejected: Vec<u32>,
}

/// Runs the full server pipeline for one round's uploads: ingest, shuffle,
/// accumulate, and (malicious mode) recompute and batch-verify every MAC.
/// Per-client state is dropped as soon as it is folded in, so peak memory
/// stays at O(d) regardless of the client count.
pub fn aggregate_round(
    cluster: &mut Cluster,
    dim: usize,
    k: usize,
    uploads: &[ClientUpload],
) -> Result<RoundAggregate, Abort> {
    let mut state = AggregateState::new(dim);
    let mut accepted = Vec::new();
    let mut rejected = Vec::new();
    let mut mac_deltas: Option<[RssScalar; 3]> = None;
    for upload in uploads {
        send_upload(cluster, upload);
        let ClientServerState {
            client,
            value,
            key,
            mac,
            factors,
        } = match server_ingest(cluster, upload.client, dim, k) {
            Ok(s) => s,
            Err(_) => {
                rejected.push(upload.client);
                continue;
            }
        };
        let (value, key) = oblivious_shuffle(cluster, client, &factors, value, key);
        state.absorb(&value);
        accepted.push(client);
        if let (Some(key), Some(mac)) = (key, mac) {
            let recomputed = expected_mac(cluster, &value, &key);
            let delta =
                PartyId::ALL.map(|p| mac[p.idx()].sub_local(recomputed[p.idx()]));
            mac_deltas = Some(match mac_deltas {
                None => delta,
                Some(acc) => PartyId::ALL.map(|p| acc[p.idx()].add_local(delta[p.idx()])),
            });
        }
    }

    if cluster.adversary.kind == AdversaryKind::AdditiveAggregationError && dim > 0 {
        // The corrupt server shifts the aggregate copy it will transmit at
        // opening; the MAC does not cover post-verification additions, the
        // digest comparison does.
        let p = cluster.adversary.party;
        state.acc[p.idx()].share_b[0] += FieldElement::ONE;
    }

    if let Some(deltas) = mac_deltas {
        blind_batch_verify(cluster, deltas)?;
    }
    Ok(RoundAggregate {
        state,
        accepted,
        rejected,
    })
}

/// Reference client-cost formulas the compressed upload is reported against.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineKind {
    /// Share the dense vector.
    DenseRss,
    /// Share the k values plus the full reordering permutation.
    UncompressedPerm,
    /// Share (index, value) pairs and aggregate them obliviously.
    IndexValueStrawman,
}

/// Logical upload bits a baseline scheme would cost for one client.
pub fn baseline_client_cost(kind: BaselineKind, d: usize, k: usize) -> u64 {
    let (d, k) = (d as u64, k as u64);
    match kind {
        BaselineKind::DenseRss => 6 * d * ELEMENT_BITS,
        BaselineKind::UncompressedPerm => (6 * d + 6 * k) * ELEMENT_BITS,
        BaselineKind::IndexValueStrawman => 12 * k * ELEMENT_BITS,
    }
}

/// Bundle directory errors.
#[derive(Debug, thiserror::Error)]
pub enum BundleError {
    /// Filesystem failure.
    #[error("bundle io: {0}")]
    Io(#[from] std::io::Error),
    /// Manifest parse failure.
    #[error("bundle manifest: {0}")]
    Json(#[from] serde_json::Error),
    /// Structural problem in a manifest or blob.
    #[error("malformed bundle: {0}")]
    Malformed(String),
}

#[derive(Serialize, Deserialize)]
struct ServerManifest {
    value_blob: String,
    perm_seeds: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    head: Option<Vec<u64>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    mac_share: Option<[String; 2]>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    key_seeds: Option<[String; 2]>,
}

#[derive(Serialize, Deserialize)]
struct ClientManifest {
    client: u32,
    servers: Vec<ServerManifest>,
}

#[derive(Serialize, Deserialize)]
struct BundleManifest {
    dim: usize,
    k: usize,
    mode: SecurityMode,
    clients: Vec<ClientManifest>,
}

/// Writes a round's uploads as a replayable bundle directory: a JSON
/// manifest plus one binary share blob per client and server.
pub fn save_uploads(
    dir: &Path,
    dim: usize,
    k: usize,
    mode: SecurityMode,
    uploads: &[ClientUpload],
) -> Result<(), BundleError> {
    fs::create_dir_all(dir)?;
    let mut clients = Vec::with_capacity(uploads.len());
    for u in uploads {
        let mut servers = Vec::with_capacity(3);
        for (j, b) in u.bundles.iter().enumerate() {
            let blob = format!("c{}_s{}.shares", u.client, j);
            let mut f = fs::File::create(dir.join(&blob))?;
            f.write_all(&elements_to_bytes(&b.value_a))?;
            f.write_all(&elements_to_bytes(&b.value_b))?;
            servers.push(ServerManifest {
                value_blob: blob,
                perm_seeds: b.perm_seeds.iter().map(|s| s.to_hex()).collect(),
                head: b
                    .head
                    .as_ref()
                    .map(|h| h.iter().map(|&i| i as u64).collect()),
                mac_share: b
                    .mac_share
                    .map(|(a, bb)| [a.value().to_string(), bb.value().to_string()]),
                key_seeds: b.key_seeds.map(|ks| [ks[0].to_hex(), ks[1].to_hex()]),
            });
        }
        clients.push(ClientManifest {
            client: u.client,
            servers,
        });
    }
    let manifest = BundleManifest {
        dim,
        k,
        mode,
        clients,
    };
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(())
}

fn seed_from_hex(s: &str) -> Result<Seed, BundleError> {
    Seed::from_hex(s).ok_or_else(|| BundleError::Malformed(format!("bad seed hex: {s}")))
}

fn element_from_str(s: &str) -> Result<FieldElement, BundleError> {
    let v: u64 = s
        .parse()
        .map_err(|_| BundleError::Malformed(format!("bad field value: {s}")))?;
    if v >= crate::field::PRIME {
        return Err(BundleError::Malformed(format!("non-canonical value: {s}")));
    }
    Ok(FieldElement::new(v))
}

/// Reads a bundle directory back into uploads plus its round parameters.
pub fn load_uploads(dir: &Path) -> Result<(usize, usize, SecurityMode, Vec<ClientUpload>), BundleError> {
    let manifest: BundleManifest =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest.json"))?)?;
    let mut uploads = Vec::with_capacity(manifest.clients.len());
    for c in &manifest.clients {
        if c.servers.len() != 3 {
            return Err(BundleError::Malformed(format!(
                "client {} has {} server bundles",
                c.client,
                c.servers.len()
            )));
        }
        let mut bundles = Vec::with_capacity(3);
        for m in &c.servers {
            let bytes = fs::read(dir.join(&m.value_blob))?;
            if bytes.len() != 2 * manifest.k * 8 {
                return Err(BundleError::Malformed(format!(
                    "blob {} has {} bytes, expected {}",
                    m.value_blob,
                    bytes.len(),
                    2 * manifest.k * 8
                )));
            }
            let all = elements_from_bytes(&bytes)
                .map_err(|e| BundleError::Malformed(format!("blob {}: {e}", m.value_blob)))?;
            let (a, b) = all.split_at(manifest.k);
            let perm_seeds = m
                .perm_seeds
                .iter()
                .map(|s| seed_from_hex(s))
                .collect::<Result<Vec<_>, _>>()?;
            let mac_share = match &m.mac_share {
                None => None,
                Some([a, b]) => Some((element_from_str(a)?, element_from_str(b)?)),
            };
            let key_seeds = match &m.key_seeds {
                None => None,
                Some([a, b]) => Some([seed_from_hex(a)?, seed_from_hex(b)?]),
            };
            bundles.push(ServerBundle {
                value_a: a.to_vec(),
                value_b: b.to_vec(),
                perm_seeds,
                head: m
                    .head
                    .as_ref()
                    .map(|h| h.iter().map(|&i| i as usize).collect()),
                mac_share,
                key_seeds,
            });
        }
        let bundles: [ServerBundle; 3] = bundles.try_into().expect("length checked");
        uploads.push(ClientUpload {
            client: c.client,
            dim: manifest.dim,
            k: manifest.k,
            bundles,
        });
    }
    Ok((manifest.dim, manifest.k, manifest.mode, uploads))
}
