//! Three-party oblivious shuffle over replicated shares.
//!
//! A shuffle runs as three passes. In each pass two active servers share a
//! permutation factor and a zero mask triple; each applies the factor to its
//! two share columns, adds the masks, and ships one remasked column to the
//! passive server. After a pass every server again holds a valid replicated
//! pair of the permuted vector, while the passive server saw only columns
//! blinded by masks it cannot derive. Running the passes over the three
//! factors applies the composed permutation without any single server ever
//! learning it.
//!
//! Pass p uses the factor known to that pass's active pair:
//!
//! | pass | actives    | factor           | mask key |
//! |------|------------|------------------|----------|
//! | 0    | S1, S2     | head expansion   | k1       |
//! | 1    | S0, S1     | seed1 expansion  | k0       |
//! | 2    | S2, S0     | seed0 expansion  | k2       |
//!
//! Each active re-expands the factor from its own copy of the client's seed
//! or head, so the two copies are carried separately here; they differ only
//! when a client or server tampered, which the MAC check surfaces later.
//!
//! Under malicious security the MAC key vector travels through the same
//! passes with independently derived masks; reusing the value masks would
//! hand the passive server the permuted difference of the two payloads.

use crate::field::FieldElement;
use crate::net::{EndpointId, Payload};
use crate::perm::{server_decompress_head, PermError, Permutation};
use crate::prg::Seed;
use crate::rss::{PartyId, RssVector};
use crate::server::{phase, AdversaryKind, Cluster};

/// Active pair lead for each pass: pass p's actives are (lead, lead + 1).
pub const PASS_LEAD: [PartyId; 3] = [PartyId(1), PartyId(0), PartyId(2)];

/// Which payload a pass is moving.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum PayloadKind {
    /// The shared gradient update.
    Value,
    /// The shared MAC key vector.
    Key,
}

impl PayloadKind {
    fn mask_tag(self) -> &'static str {
        match self {
            PayloadKind::Value => "val",
            PayloadKind::Key => "key",
        }
    }

    fn phase_tag(self, pass: usize) -> u8 {
        match self {
            PayloadKind::Value => phase::SHUFFLE_VALUE + pass as u8,
            PayloadKind::Key => phase::SHUFFLE_KEY + pass as u8,
        }
    }
}

/// One pass's permutation factor as re-expanded by each active server.
#[derive(Clone, Debug)]
pub struct PassPair {
    /// The lead active's expansion.
    pub lead: Permutation,
    /// The other active's expansion; equals `lead` for honest uploads.
    pub follow: Permutation,
}

/// The three per-pass factors of one client's permutation.
#[derive(Clone, Debug)]
pub struct PassFactors {
    /// Indexed by pass.
    pub passes: [PassPair; 3],
}

impl PassFactors {
    /// Expands consistent factors from one copy of the client artifacts:
    /// the compressed head plus the two seeds. Fails if the head is not a
    /// valid partial permutation.
    pub fn honest(seed0: Seed, seed1: Seed, head: &[usize], d: usize) -> Result<Self, PermError> {
        let p2 = server_decompress_head(head, d)?;
        let p1 = Permutation::from_seed(seed1, d);
        let p0 = Permutation::from_seed(seed0, d);
        Ok(PassFactors {
            passes: [
                PassPair {
                    lead: p2.clone(),
                    follow: p2,
                },
                PassPair {
                    lead: p1.clone(),
                    follow: p1,
                },
                PassPair {
                    lead: p0.clone(),
                    follow: p0,
                },
            ],
        })
    }

    /// The composition the three passes realize (lead copies).
    pub fn composed(&self) -> Permutation {
        self.passes[2]
            .lead
            .compose(&self.passes[1].lead)
            .compose(&self.passes[0].lead)
    }
}

/// First pass in which a server is active; deviations inject here so a
/// single adversary configuration exercises every corruption position.
fn first_active_pass(p: PartyId) -> usize {
    match p.0 {
        0 => 1,
        1 => 0,
        _ => 0,
    }
}

fn permute_add(
    perm: &Permutation,
    v: &[FieldElement],
    mask: &[FieldElement],
    corrupt_perm: bool,
) -> Vec<FieldElement> {
    let mut out = perm.apply(v);
    if corrupt_perm && out.len() >= 2 {
        out.swap(0, 1);
    }
    for (o, m) in out.iter_mut().zip(mask) {
        *o += *m;
    }
    out
}

/// Runs one shuffle pass for one client payload, reading and rebuilding the
/// full replicated state.
pub fn shuffle_pass(
    cluster: &mut Cluster,
    client: u32,
    pass: usize,
    pair: &PassPair,
    state: &[RssVector; 3],
    kind: PayloadKind,
) -> [RssVector; 3] {
    let lead = PASS_LEAD[pass];
    let follow = lead.next();
    let passive = lead.prev();
    let d = state[0].len();
    let masks = cluster.pass_mask_triple(lead, client, pass, kind.mask_tag(), d);

    let corrupt_of = |p: PartyId| -> bool {
        cluster.is_corrupt(p)
            && cluster.adversary.kind == AdversaryKind::WrongPermutation
            && first_active_pass(p) == pass
    };
    let tamper_of = |p: PartyId| -> bool {
        cluster.is_corrupt(p)
            && cluster.adversary.kind == AdversaryKind::ShareTamper
            && kind == PayloadKind::Value
            && first_active_pass(p) == pass
    };

    // Lead holds columns (lead, lead+1), follow holds (lead+1, lead+2); each
    // remasks what it holds. The overlap column is computed by both actives
    // and stays consistent exactly when both follow the protocol.
    let y_lead = permute_add(
        &pair.lead,
        &state[lead.idx()].share_a,
        &masks[lead.idx()],
        corrupt_of(lead),
    );
    let y_mid_lead = permute_add(
        &pair.lead,
        &state[lead.idx()].share_b,
        &masks[follow.idx()],
        corrupt_of(lead),
    );
    let y_mid_follow = permute_add(
        &pair.follow,
        &state[follow.idx()].share_a,
        &masks[follow.idx()],
        corrupt_of(follow),
    );
    let y_tail = permute_add(
        &pair.follow,
        &state[follow.idx()].share_b,
        &masks[passive.idx()],
        corrupt_of(follow),
    );

    let mut sent_lead = y_lead.clone();
    if tamper_of(lead) && !sent_lead.is_empty() {
        sent_lead[0] += FieldElement::ONE;
    }
    let mut sent_tail = y_tail.clone();
    if tamper_of(follow) && !sent_tail.is_empty() {
        sent_tail[0] += FieldElement::ONE;
    }

    let round = cluster.round;
    let tag = kind.phase_tag(pass);
    cluster
        .net
        .send(
            EndpointId::server(lead),
            EndpointId::server(passive),
            tag,
            round,
            Payload::Elements(sent_lead),
        )
        .expect("shuffle send");
    cluster
        .net
        .send(
            EndpointId::server(follow),
            EndpointId::server(passive),
            tag,
            round,
            Payload::Elements(sent_tail),
        )
        .expect("shuffle send");
    let recv_lead = cluster
        .net
        .recv(EndpointId::server(lead), EndpointId::server(passive))
        .expect("shuffle recv")
        .payload
        .into_elements();
    let recv_tail = cluster
        .net
        .recv(EndpointId::server(follow), EndpointId::server(passive))
        .expect("shuffle recv")
        .payload
        .into_elements();

    let mut out = PartyId::ALL.map(|p| RssVector {
        owner: p,
        share_a: Vec::new(),
        share_b: Vec::new(),
    });
    out[lead.idx()].share_a = y_lead;
    out[lead.idx()].share_b = y_mid_lead;
    out[follow.idx()].share_a = y_mid_follow;
    out[follow.idx()].share_b = y_tail;
    out[passive.idx()].share_a = recv_tail;
    out[passive.idx()].share_b = recv_lead;
    out
}

/// Applies all three passes to a value payload and, when present, the MAC
/// key payload. Phases are named per pass so concurrent clients merge.
pub fn oblivious_shuffle(
    cluster: &mut Cluster,
    client: u32,
    factors: &PassFactors,
    mut value: [RssVector; 3],
    mut key: Option<[RssVector; 3]>,
) -> ([RssVector; 3], Option<[RssVector; 3]>) {
    for pass in 0..3 {
        cluster.net.begin_phase(&format!("shuffle/pass{pass}"));
        let pair = &factors.passes[pass];
        value = shuffle_pass(cluster, client, pass, pair, &value, PayloadKind::Value);
        if let Some(k) = key.take() {
            key = Some(shuffle_pass(cluster, client, pass, pair, &k, PayloadKind::Key));
        }
    }
    (value, key)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::net::NetModel;
    use crate::rss::{reconstruct, share_vector, SecurityMode};
    use crate::server::AdversaryBehavior;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn fe(v: u64) -> FieldElement {
        FieldElement::new(v)
    }

    fn cluster(mode: SecurityMode) -> Cluster {
        Cluster::new(mode, Seed([7; 16]), NetModel::default())
    }

    fn random_factors(d: usize) -> PassFactors {
        let head: Vec<usize> = (0..3).map(|i| (2 * i + 1) % d).collect();
        PassFactors::honest(Seed([1; 16]), Seed([2; 16]), &head, d).unwrap()
    }

    fn check_replicated(state: &[RssVector; 3]) {
        for p in PartyId::ALL {
            assert_eq!(
                state[p.idx()].share_b,
                state[p.next().idx()].share_a,
                "replication broken at party {}",
                p.0
            );
        }
    }

    #[test]
    fn single_pass_permutes_and_stays_replicated() {
        let mut c = cluster(SecurityMode::SemiHonest);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let x: Vec<FieldElement> = (0..8).map(fe).collect();
        let state = share_vector(&x, &mut rng);
        let perm = Permutation::from_seed(Seed([9; 16]), 8);
        let pair = PassPair {
            lead: perm.clone(),
            follow: perm.clone(),
        };
        let out = shuffle_pass(&mut c, 0, 0, &pair, &state, PayloadKind::Value);
        check_replicated(&out);
        let views = [&out[0], &out[1], &out[2]];
        assert_eq!(
            reconstruct(views, SecurityMode::Malicious).unwrap(),
            perm.apply(&x)
        );
    }

    #[test]
    fn three_passes_compose_the_full_permutation() {
        let d = 16;
        let mut c = cluster(SecurityMode::SemiHonest);
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let x: Vec<FieldElement> = (0..d as u64).map(|v| fe(v * v + 1)).collect();
        let state = share_vector(&x, &mut rng);
        let factors = random_factors(d);
        let (out, none) = oblivious_shuffle(&mut c, 3, &factors, state, None);
        assert!(none.is_none());
        check_replicated(&out);
        let views = [&out[0], &out[1], &out[2]];
        assert_eq!(
            reconstruct(views, SecurityMode::Malicious).unwrap(),
            factors.composed().apply(&x)
        );
        assert!(c.net.fully_drained());
    }

    #[test]
    fn key_payload_rides_the_same_permutation() {
        let d = 12;
        let mut c = cluster(SecurityMode::Malicious);
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let x: Vec<FieldElement> = (0..d as u64).map(|v| fe(100 + v)).collect();
        let k: Vec<FieldElement> = (0..d as u64).map(|v| fe(7000 + 3 * v)).collect();
        let factors = random_factors(d);
        let (vx, vk) = oblivious_shuffle(
            &mut c,
            0,
            &factors,
            share_vector(&x, &mut rng),
            Some(share_vector(&k, &mut rng)),
        );
        let pi = factors.composed();
        let vx_views = [&vx[0], &vx[1], &vx[2]];
        assert_eq!(
            reconstruct(vx_views, SecurityMode::Malicious).unwrap(),
            pi.apply(&x)
        );
        let vk = vk.unwrap();
        let vk_views = [&vk[0], &vk[1], &vk[2]];
        assert_eq!(
            reconstruct(vk_views, SecurityMode::Malicious).unwrap(),
            pi.apply(&k)
        );
    }

    #[test]
    fn value_and_key_masks_differ() {
        let c = cluster(SecurityMode::Malicious);
        let v = c.pass_mask_triple(PartyId(1), 0, 0, "val", 4);
        let k = c.pass_mask_triple(PartyId(1), 0, 0, "key", 4);
        assert_ne!(v[0], k[0]);
    }

    #[test]
    fn traffic_is_two_vectors_per_pass_per_payload() {
        let d = 10;
        let mut c = cluster(SecurityMode::Malicious);
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let x: Vec<FieldElement> = (0..d as u64).map(fe).collect();
        let factors = random_factors(d);
        let _ = oblivious_shuffle(
            &mut c,
            0,
            &factors,
            share_vector(&x, &mut rng),
            Some(share_vector(&x, &mut rng)),
        );
        let total: u64 = c
            .net
            .all_links()
            .iter()
            .map(|(_, s)| s.payload_bytes)
            .sum();
        // 3 passes x 2 payloads x 2 messages x d elements x 8 bytes.
        assert_eq!(total, 3 * 2 * 2 * (d as u64) * 8);
    }

    #[test]
    fn wrong_permutation_changes_the_open_value() {
        let d = 8;
        for corrupt in PartyId::ALL {
            let mut c = cluster(SecurityMode::Malicious);
            c.adversary = AdversaryBehavior {
                kind: AdversaryKind::WrongPermutation,
                party: corrupt,
            };
            let mut rng = ChaCha20Rng::seed_from_u64(5);
            let x: Vec<FieldElement> = (0..d as u64).map(|v| fe(v + 1)).collect();
            let factors = random_factors(d);
            let (out, _) = oblivious_shuffle(&mut c, 0, &factors, share_vector(&x, &mut rng), None);
            let honest = factors.composed().apply(&x);
            // Sum the canonical columns: the corrupt server's deviation
            // displaced at least one value regardless of which copy is read.
            let opened: Vec<FieldElement> = (0..d)
                .map(|j| out[0].share_a[j] + out[1].share_a[j] + out[2].share_a[j])
                .collect();
            assert_ne!(opened, honest, "corrupt party {}", corrupt.0);
        }
    }

    #[test]
    fn share_tamper_breaks_one_replicated_copy() {
        let d = 6;
        let mut c = cluster(SecurityMode::Malicious);
        c.adversary = AdversaryBehavior {
            kind: AdversaryKind::ShareTamper,
            party: PartyId(1),
        };
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let x: Vec<FieldElement> = (0..d as u64).map(fe).collect();
        let perm = Permutation::from_seed(Seed([8; 16]), d);
        let pair = PassPair {
            lead: perm.clone(),
            follow: perm,
        };
        let state = share_vector(&x, &mut rng);
        // Party 1 leads pass 0; its tampered copy lands at the passive party.
        let out = shuffle_pass(&mut c, 0, 0, &pair, &state, PayloadKind::Value);
        assert_ne!(out[0].share_b, out[1].share_a);
        assert_eq!(out[1].share_b, out[2].share_a);
    }

    #[test]
    fn mismatched_factor_copies_desynchronize_the_shares() {
        let d = 8;
        let mut c = cluster(SecurityMode::Malicious);
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let x: Vec<FieldElement> = (0..d as u64).map(|v| fe(9 * v + 2)).collect();
        let pair = PassPair {
            lead: Permutation::from_seed(Seed([8; 16]), d),
            follow: Permutation::from_seed(Seed([9; 16]), d),
        };
        let state = share_vector(&x, &mut rng);
        let out = shuffle_pass(&mut c, 0, 0, &pair, &state, PayloadKind::Value);
        // The overlap column is computed by both actives from different
        // factors, so replication breaks at their shared column.
        assert_ne!(out[1].share_b, out[2].share_a);
    }

    #[test]
    fn shuffle_phases_merge_across_clients() {
        let d = 8;
        let mut c = cluster(SecurityMode::SemiHonest);
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let x: Vec<FieldElement> = (0..d as u64).map(fe).collect();
        let factors = random_factors(d);
        for client in 0..5 {
            let state = share_vector(&x, &mut rng);
            let _ = oblivious_shuffle(&mut c, client, &factors, state, None);
        }
        assert_eq!(c.net.phases().len(), 3);
    }
}
