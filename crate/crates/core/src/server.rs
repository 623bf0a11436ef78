//! The three-server protocol context: correlated randomness, openings, and
//! adversary injection.
//!
//! The cluster owns the transport and one state block per server. Protocol
//! steps run the parties in lockstep phases; each party's computation only
//! reads that party's keys, rng, and received frames, so the simulation maps
//! one-to-one onto three communicating processes.
//!
//! Offline key material follows the usual pairwise-PRF layout: servers j and
//! j+1 share key k_j. Party i can therefore derive share m of a replicated
//! random value for m ∈ {i, i+1} but not m = i+2, while three-out-of-three
//! zero sharings come from the difference of a party's two keys.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::field::FieldElement;
use crate::net::{EndpointId, NetModel, Network, Payload};
use crate::prg::{derive_seed, prg_expand, PrgStream, Seed};
use crate::report::{Abort, AbortReason};
use crate::rss::{PartyId, RssScalar, RssVector, SecurityMode};

/// Phase tags for the wire frames.
pub mod phase {
    /// Client upload bundles.
    pub const UPLOAD: u8 = 0x01;
    /// Shuffle pass p, value payload (0x10 + p).
    pub const SHUFFLE_VALUE: u8 = 0x10;
    /// Shuffle pass p, MAC-key payload (0x18 + p).
    pub const SHUFFLE_KEY: u8 = 0x18;
    /// Dot-product resharing.
    pub const DOT_RESHARE: u8 = 0x30;
    /// Batch-verification opening.
    pub const MAC_OPEN: u8 = 0x31;
    /// Noise share distribution.
    pub const NOISE_SHARE: u8 = 0x40;
    /// Noise mask share distribution.
    pub const MASK_SHARE: u8 = 0x41;
    /// Masked-noise opening toward the verifier.
    pub const KAPPA_OPEN: u8 = 0x42;
    /// Final aggregate opening.
    pub const MODEL_OPEN: u8 = 0x50;
    /// Model digest exchange.
    pub const HASH_EXCHANGE: u8 = 0x51;
}

/// Single-server deviations the simulator can inject (at most one corrupt
/// server, matching the threat model).
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AdversaryKind {
    /// Honest execution.
    None,
    /// Corrupt server applies a perturbed permutation in one shuffle pass.
    WrongPermutation,
    /// Corrupt server adds 1 to one element of a shuffle-pass message.
    ShareTamper,
    /// Corrupt server shifts its accumulated aggregate share by a constant.
    AdditiveAggregationError,
    /// Corrupt server samples its DP noise with an inflated std.
    InflatedNoise {
        /// Multiplier on the per-server noise std.
        factor: f64,
    },
    /// Corrupt server sends mismatched copies during a robust opening.
    InconsistentOpening,
}

/// Adversary configuration for a run.
#[derive(Clone, Copy, PartialEq, Debug, Serialize, Deserialize)]
pub struct AdversaryBehavior {
    /// Which deviation to inject.
    #[serde(flatten)]
    pub kind: AdversaryKind,
    /// The corrupt server.
    pub party: PartyId,
}

impl AdversaryBehavior {
    /// Honest configuration.
    pub fn honest() -> Self {
        AdversaryBehavior {
            kind: AdversaryKind::None,
            party: PartyId(0),
        }
    }
}

impl Default for AdversaryBehavior {
    fn default() -> Self {
        Self::honest()
    }
}

/// One server's private state.
pub struct ServerCtx {
    /// This server's identity.
    pub id: PartyId,
    /// Pairwise key shared with the next server (k_id).
    key_next: Seed,
    /// Pairwise key shared with the previous server (k_{id-1}).
    key_prev: Seed,
    /// Offline seed known to all servers (zero-padding derivations).
    setup_seed: Seed,
    /// Local sampling randomness (noise draws, reference samples).
    pub rng: ChaCha20Rng,
}

impl ServerCtx {
    /// This party's share of a three-out-of-three zero sharing for the given
    /// tag: F(k_i, tag) - F(k_{i-1}, tag), which telescopes to zero over the
    /// three parties.
    pub fn reshare_mask(&self, tag: &str) -> FieldElement {
        PrgStream::new(self.key_next, tag).next_element()
            - PrgStream::new(self.key_prev, tag).next_element()
    }

    /// This party's replicated pair of a shared random scalar for the given
    /// tag: share m is F(k_{m-1}, tag), so the pair comes from this party's
    /// two keys and the third share stays unknown to it.
    pub fn shared_rand_pair(&self, tag: &str) -> RssScalar {
        RssScalar {
            owner: self.id,
            share_a: PrgStream::new(self.key_prev, tag).next_element(),
            share_b: PrgStream::new(self.key_next, tag).next_element(),
        }
    }

    /// This party's replicated pair of the public zero-padding sharing for a
    /// client (all servers can derive every column; padded positions are
    /// known zeros by protocol design, so the sharing carries no secrecy).
    pub fn pad_pair(&self, round: u32, client: u32, len: usize) -> (Vec<FieldElement>, Vec<FieldElement>) {
        let cols = pad_columns(self.setup_seed, round, client, len);
        (
            cols[self.id.idx()].clone(),
            cols[self.id.next().idx()].clone(),
        )
    }
}

fn pad_columns(setup_seed: Seed, round: u32, client: u32, len: usize) -> [Vec<FieldElement>; 3] {
    let z0 = prg_expand(setup_seed, &format!("pad/r{round}/c{client}/0"), len);
    let z1 = prg_expand(setup_seed, &format!("pad/r{round}/c{client}/1"), len);
    let z2: Vec<FieldElement> = z0.iter().zip(&z1).map(|(&a, &b)| -(a + b)).collect();
    [z0, z1, z2]
}

/// The full simulated deployment: three servers plus transport.
pub struct Cluster {
    /// Security mode for every protocol step.
    pub mode: SecurityMode,
    /// Message transport with byte accounting.
    pub net: Network,
    /// Cost model used for wallclock estimates.
    pub model: NetModel,
    /// Current round counter.
    pub round: u32,
    /// Injected deviation, if any.
    pub adversary: AdversaryBehavior,
    servers: [ServerCtx; 3],
    rand_ctr: u64,
    reshare_ctr: u64,
}

impl Cluster {
    /// Builds a cluster with key material derived from a global seed.
    pub fn new(mode: SecurityMode, global_seed: Seed, model: NetModel) -> Self {
        let pair_keys: [Seed; 3] =
            [0, 1, 2].map(|j| derive_seed(global_seed, &format!("pair/{j}")));
        let setup_seed = derive_seed(global_seed, "setup");
        let servers = PartyId::ALL.map(|p| ServerCtx {
            id: p,
            key_next: pair_keys[p.idx()],
            key_prev: pair_keys[p.prev().idx()],
            setup_seed,
            rng: ChaCha20Rng::from_seed(
                PrgStream::new(derive_seed(global_seed, &format!("party/{}", p.0)), "rng")
                    .next_seed()
                    .0
                    .repeat(2)
                    .try_into()
                    .unwrap(),
            ),
        });
        Cluster {
            mode,
            net: Network::new(),
            model,
            round: 0,
            adversary: AdversaryBehavior::honest(),
            servers,
            rand_ctr: 0,
            reshare_ctr: 0,
        }
    }

    /// Immutable access to one server's state.
    pub fn server(&self, p: PartyId) -> &ServerCtx {
        &self.servers[p.idx()]
    }

    /// Mutable access to one server's state.
    pub fn server_mut(&mut self, p: PartyId) -> &mut ServerCtx {
        &mut self.servers[p.idx()]
    }

    /// The pairwise key shared by servers j and j+1 (protocol code may only
    /// consult it on behalf of those two parties).
    pub(crate) fn pair_key(&self, j: PartyId) -> Seed {
        self.servers[j.idx()].key_next
    }

    /// True when `p` is the corrupt server of the configured adversary.
    pub fn is_corrupt(&self, p: PartyId) -> bool {
        self.adversary.kind != AdversaryKind::None && self.adversary.party == p
    }

    /// Fresh tag for a three-out-of-three resharing mask.
    pub fn next_reshare_tag(&mut self) -> String {
        let n = self.reshare_ctr;
        self.reshare_ctr += 1;
        format!("resh/r{}/n{}", self.round, n)
    }

    /// Draws a shared random scalar, redrawn while the hidden value is zero.
    ///
    /// No single party can test r = 0 on its own; the simulator performs the
    /// global check the parties would realize by redrawing on a failed batch
    /// proof, keeping the trace deterministic.
    pub fn shared_rand_nonzero(&mut self) -> [RssScalar; 3] {
        loop {
            let n = self.rand_ctr;
            self.rand_ctr += 1;
            let tag = format!("rand/r{}/n{}", self.round, n);
            let pairs = PartyId::ALL.map(|p| self.server(p).shared_rand_pair(&tag));
            let value = pairs[0].share_a + pairs[1].share_a + pairs[2].share_a;
            if value != FieldElement::ZERO {
                return pairs;
            }
        }
    }

    /// The common mask triple for one shuffle pass, derived from the active
    /// pair's key so both actives agree without interaction. `kind`
    /// separates the value and MAC-key payloads.
    pub(crate) fn pass_mask_triple(
        &self,
        active_j: PartyId,
        client: u32,
        pass: usize,
        kind: &str,
        len: usize,
    ) -> [Vec<FieldElement>; 3] {
        let tag = format!("mask/r{}/c{client}/p{pass}/{kind}", self.round);
        let both = prg_expand(self.pair_key(active_j), &tag, 2 * len);
        let a0 = both[..len].to_vec();
        let a1 = both[len..].to_vec();
        let a2: Vec<FieldElement> = a0.iter().zip(&a1).map(|(&x, &y)| -(x + y)).collect();
        [a0, a1, a2]
    }

    /// Starts a new round: bumps the counter and clears traffic accounting.
    pub fn begin_round(&mut self) {
        self.round += 1;
        self.net.reset();
    }

    /// Dealer-style sharing: `dealer` samples share columns from its own rng
    /// and ships each other server its replicated pair.
    pub fn share_from_dealer(
        &mut self,
        dealer: PartyId,
        secret: &[FieldElement],
        phase_tag: u8,
    ) -> [RssVector; 3] {
        let n = secret.len();
        let mut cols: [Vec<FieldElement>; 3] =
            [Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n)];
        {
            let rng = &mut self.server_mut(dealer).rng;
            for &x in secret {
                let s0 = FieldElement::new(rng.gen_range(0..crate::field::PRIME));
                let s1 = FieldElement::new(rng.gen_range(0..crate::field::PRIME));
                cols[0].push(s0);
                cols[1].push(s1);
                cols[2].push(x - s0 - s1);
            }
        }
        let round = self.round;
        for p in [dealer.next(), dealer.prev()] {
            for col in [p.idx(), p.next().idx()] {
                self.net
                    .send(
                        EndpointId::server(dealer),
                        EndpointId::server(p),
                        phase_tag,
                        round,
                        Payload::Elements(cols[col].clone()),
                    )
                    .expect("dealer share send");
            }
        }
        let mut out = PartyId::ALL.map(|p| RssVector {
            owner: p,
            share_a: Vec::new(),
            share_b: Vec::new(),
        });
        out[dealer.idx()].share_a = cols[dealer.idx()].clone();
        out[dealer.idx()].share_b = cols[dealer.next().idx()].clone();
        for p in [dealer.next(), dealer.prev()] {
            let a = self
                .net
                .recv(EndpointId::server(dealer), EndpointId::server(p))
                .expect("dealer share recv")
                .payload
                .into_elements();
            let b = self
                .net
                .recv(EndpointId::server(dealer), EndpointId::server(p))
                .expect("dealer share recv")
                .payload
                .into_elements();
            out[p.idx()].share_a = a;
            out[p.idx()].share_b = b;
        }
        out
    }

    /// Plain reconstruction (the semi-honest Rec pattern): each party sends
    /// its second share to the previous party and sums three columns.
    /// Returns each party's local reconstruction; in honest runs all three
    /// agree, and the caller's digest comparison covers tampering.
    pub fn open_vector_plain(&mut self, shares: &[RssVector; 3], phase_tag: u8) -> [Vec<FieldElement>; 3] {
        let round = self.round;
        for p in PartyId::ALL {
            self.net
                .send(
                    EndpointId::server(p),
                    EndpointId::server(p.prev()),
                    phase_tag,
                    round,
                    Payload::Elements(shares[p.idx()].share_b.clone()),
                )
                .expect("open send");
        }
        PartyId::ALL.map(|p| {
            let missing = self
                .net
                .recv(EndpointId::server(p.next()), EndpointId::server(p))
                .expect("open recv")
                .payload
                .into_elements();
            let view = &shares[p.idx()];
            (0..view.len())
                .map(|j| view.share_a[j] + view.share_b[j] + missing[j])
                .collect()
        })
    }

    /// Robust reconstruction: every party receives its missing share from
    /// both holders and compares the copies before summing. Mismatch aborts
    /// with `OpenInconsistency`. An `InconsistentOpening` adversary tampers
    /// the copy it sends to its next party.
    pub fn open_vector_robust(
        &mut self,
        shares: &[RssVector; 3],
        phase_tag: u8,
    ) -> Result<Vec<FieldElement>, Abort> {
        let round = self.round;
        // Party p misses share p+2, held by p+1 (as share_b) and p+2 (as
        // share_a); both send their copy to p.
        for p in PartyId::ALL {
            let holder_b = p.next();
            let mut copy_b = shares[holder_b.idx()].share_b.clone();
            if self.is_corrupt(holder_b)
                && self.adversary.kind == AdversaryKind::InconsistentOpening
                && !copy_b.is_empty()
            {
                copy_b[0] += FieldElement::ONE;
            }
            self.net
                .send(
                    EndpointId::server(holder_b),
                    EndpointId::server(p),
                    phase_tag,
                    round,
                    Payload::Elements(copy_b),
                )
                .expect("robust open send");
            let holder_a = p.prev();
            self.net
                .send(
                    EndpointId::server(holder_a),
                    EndpointId::server(p),
                    phase_tag,
                    round,
                    Payload::Elements(shares[holder_a.idx()].share_a.clone()),
                )
                .expect("robust open send");
        }
        let mut results: Vec<Vec<FieldElement>> = Vec::with_capacity(3);
        for p in PartyId::ALL {
            let copy1 = self
                .net
                .recv(EndpointId::server(p.next()), EndpointId::server(p))
                .expect("robust open recv")
                .payload
                .into_elements();
            let copy2 = self
                .net
                .recv(EndpointId::server(p.prev()), EndpointId::server(p))
                .expect("robust open recv")
                .payload
                .into_elements();
            if copy1 != copy2 {
                return Err(Abort::new(
                    AbortReason::OpenInconsistency,
                    format!("redundant copies disagree at party {}", p.0),
                ));
            }
            let view = &shares[p.idx()];
            results.push(
                (0..view.len())
                    .map(|j| view.share_a[j] + view.share_b[j] + copy1[j])
                    .collect(),
            );
        }
        // All parties hold every share once copies check out, so the three
        // reconstructions agree by construction.
        debug_assert!(results[0] == results[1] && results[1] == results[2]);
        Ok(results.swap_remove(0))
    }

    /// Robust opening of a scalar.
    pub fn open_scalar_robust(
        &mut self,
        shares: &[RssScalar; 3],
        phase_tag: u8,
    ) -> Result<FieldElement, Abort> {
        let vecs = PartyId::ALL.map(|p| shares[p.idx()].to_vector());
        Ok(self.open_vector_robust(&vecs, phase_tag)?[0])
    }

    /// Opens a vector according to the cluster mode: robust under malicious
    /// security, plain otherwise.
    pub fn open_vector(
        &mut self,
        shares: &[RssVector; 3],
        phase_tag: u8,
    ) -> Result<Vec<FieldElement>, Abort> {
        match self.mode {
            SecurityMode::SemiHonest => {
                let [first, _, _] = self.open_vector_plain(shares, phase_tag);
                Ok(first)
            }
            SecurityMode::Malicious => self.open_vector_robust(shares, phase_tag),
        }
    }
}
