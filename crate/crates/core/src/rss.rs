//! Replicated secret sharing over Z_p among three parties.
//!
//! A secret x splits into additive shares x_0 + x_1 + x_2 = x, and party i
//! holds the pair (x_i, x_{i+1}) with indices mod 3. Linear operations are
//! local; multiplication needs one resharing round (driven by the protocol
//! layer). Every share is held by exactly two parties, which is what the
//! malicious-mode consistency checks lean on.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::field::FieldElement;
use crate::prg::PrgStream;

/// One of the three servers; arithmetic on ids wraps mod 3.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PartyId(pub u8);

impl PartyId {
    /// All parties in order.
    pub const ALL: [PartyId; 3] = [PartyId(0), PartyId(1), PartyId(2)];

    /// The party i+1.
    pub fn next(self) -> PartyId {
        PartyId((self.0 + 1) % 3)
    }

    /// The party i-1.
    pub fn prev(self) -> PartyId {
        PartyId((self.0 + 2) % 3)
    }

    /// Index into per-party arrays.
    pub fn idx(self) -> usize {
        self.0 as usize
    }
}

/// Error from share-level operations.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum RssError {
    /// Vectors of different lengths were combined.
    #[error("share length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    /// Redundant share copies disagreed during reconstruction.
    #[error("inconsistent share copies at element {0}")]
    Inconsistent(usize),
}

/// A party's replicated pair of share vectors for one secret vector.
#[derive(Clone, Debug, PartialEq)]
pub struct RssVector {
    /// Owning party.
    pub owner: PartyId,
    /// This party's first share column, ⟨x⟩_i.
    pub share_a: Vec<FieldElement>,
    /// This party's second share column, ⟨x⟩_{i+1}.
    pub share_b: Vec<FieldElement>,
}

impl RssVector {
    /// An all-zero sharing of the zero vector.
    pub fn zeros(owner: PartyId, len: usize) -> Self {
        RssVector {
            owner,
            share_a: vec![FieldElement::ZERO; len],
            share_b: vec![FieldElement::ZERO; len],
        }
    }

    /// Vector length.
    pub fn len(&self) -> usize {
        self.share_a.len()
    }

    /// True when the vector is empty.
    pub fn is_empty(&self) -> bool {
        self.share_a.is_empty()
    }

    /// Elementwise share addition with `other`; local, no communication.
    pub fn add_local(&mut self, other: &RssVector) -> Result<(), RssError> {
        if self.len() != other.len() {
            return Err(RssError::LengthMismatch(self.len(), other.len()));
        }
        for (a, b) in self.share_a.iter_mut().zip(&other.share_a) {
            *a += *b;
        }
        for (a, b) in self.share_b.iter_mut().zip(&other.share_b) {
            *a += *b;
        }
        Ok(())
    }

    /// Elementwise share subtraction; local.
    pub fn sub_local(&mut self, other: &RssVector) -> Result<(), RssError> {
        if self.len() != other.len() {
            return Err(RssError::LengthMismatch(self.len(), other.len()));
        }
        for (a, b) in self.share_a.iter_mut().zip(&other.share_a) {
            *a -= *b;
        }
        for (a, b) in self.share_b.iter_mut().zip(&other.share_b) {
            *a -= *b;
        }
        Ok(())
    }

    /// Multiplies both share columns by a public constant; local.
    pub fn scale_local(&mut self, c: FieldElement) {
        for a in &mut self.share_a {
            *a *= c;
        }
        for b in &mut self.share_b {
            *b *= c;
        }
    }

    /// The scalar view of a length-1 vector.
    pub fn scalar(&self) -> RssScalar {
        debug_assert_eq!(self.len(), 1);
        RssScalar {
            owner: self.owner,
            share_a: self.share_a[0],
            share_b: self.share_b[0],
        }
    }
}

/// A party's replicated pair of shares for one secret scalar.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RssScalar {
    /// Owning party.
    pub owner: PartyId,
    /// ⟨x⟩_i.
    pub share_a: FieldElement,
    /// ⟨x⟩_{i+1}.
    pub share_b: FieldElement,
}

impl RssScalar {
    /// A sharing of zero with zero shares.
    pub fn zero(owner: PartyId) -> Self {
        RssScalar {
            owner,
            share_a: FieldElement::ZERO,
            share_b: FieldElement::ZERO,
        }
    }

    /// Local share addition.
    pub fn add_local(self, other: RssScalar) -> RssScalar {
        RssScalar {
            owner: self.owner,
            share_a: self.share_a + other.share_a,
            share_b: self.share_b + other.share_b,
        }
    }

    /// Local share subtraction.
    pub fn sub_local(self, other: RssScalar) -> RssScalar {
        RssScalar {
            owner: self.owner,
            share_a: self.share_a - other.share_a,
            share_b: self.share_b - other.share_b,
        }
    }

    /// Promotes to a length-1 vector.
    pub fn to_vector(self) -> RssVector {
        RssVector {
            owner: self.owner,
            share_a: vec![self.share_a],
            share_b: vec![self.share_b],
        }
    }
}

/// Shares a secret vector into the three parties' replicated pairs.
pub fn share_vector<R: Rng + ?Sized>(secret: &[FieldElement], rng: &mut R) -> [RssVector; 3] {
    let mut cols: [Vec<FieldElement>; 3] = [
        Vec::with_capacity(secret.len()),
        Vec::with_capacity(secret.len()),
        Vec::with_capacity(secret.len()),
    ];
    for &x in secret {
        let s0 = FieldElement::new(rng.gen_range(0..crate::field::PRIME));
        let s1 = FieldElement::new(rng.gen_range(0..crate::field::PRIME));
        let s2 = x - s0 - s1;
        cols[0].push(s0);
        cols[1].push(s1);
        cols[2].push(s2);
    }
    build_replicated(&cols)
}

/// Shares a secret vector deterministically from a PRG stream (used for
/// dealer-style sharing where the dealer's randomness must be reproducible).
pub fn share_vector_from_stream(secret: &[FieldElement], stream: &mut PrgStream) -> [RssVector; 3] {
    let mut cols: [Vec<FieldElement>; 3] = [
        Vec::with_capacity(secret.len()),
        Vec::with_capacity(secret.len()),
        Vec::with_capacity(secret.len()),
    ];
    for &x in secret {
        let s0 = stream.next_element();
        let s1 = stream.next_element();
        let s2 = x - s0 - s1;
        cols[0].push(s0);
        cols[1].push(s1);
        cols[2].push(s2);
    }
    build_replicated(&cols)
}

/// Assembles per-party replicated pairs from three additive share columns.
pub fn build_replicated(cols: &[Vec<FieldElement>; 3]) -> [RssVector; 3] {
    PartyId::ALL.map(|p| RssVector {
        owner: p,
        share_a: cols[p.idx()].clone(),
        share_b: cols[p.next().idx()].clone(),
    })
}

/// Reconstruction mode: whether redundant share copies are cross-checked.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SecurityMode {
    /// Single copies, no consistency checks, no MACs.
    SemiHonest,
    /// Redundant copies compared on every opening; MACs and hash checks on.
    Malicious,
}

/// Reconstructs the secret from all three parties' pairs.
///
/// In malicious mode each additive share is present twice across the pairs
/// (party i's `share_b` duplicates party i+1's `share_a`); any disagreement
/// aborts. In semi-honest mode the `share_a` columns are summed directly.
pub fn reconstruct(
    views: [&RssVector; 3],
    mode: SecurityMode,
) -> Result<Vec<FieldElement>, RssError> {
    let n = views[0].len();
    for v in &views {
        if v.len() != n {
            return Err(RssError::LengthMismatch(n, v.len()));
        }
    }
    if mode == SecurityMode::Malicious {
        for i in 0..3 {
            let mine = &views[i].share_b;
            let theirs = &views[(i + 1) % 3].share_a;
            for j in 0..n {
                if mine[j] != theirs[j] {
                    return Err(RssError::Inconsistent(j));
                }
            }
        }
    }
    let mut out = Vec::with_capacity(n);
    for j in 0..n {
        out.push(views[0].share_a[j] + views[1].share_a[j] + views[2].share_a[j]);
    }
    Ok(out)
}

/// Party-local cross terms of a share-wise dot product: the 3-out-of-3
/// additive share z_i = Σ_j (a_i·b_i + a_i·b_{i+1} + a_{i+1}·b_i).
pub fn dot_local(x: &RssVector, y: &RssVector) -> Result<FieldElement, RssError> {
    if x.len() != y.len() {
        return Err(RssError::LengthMismatch(x.len(), y.len()));
    }
    let mut acc = FieldElement::ZERO;
    for j in 0..x.len() {
        acc += x.share_a[j] * y.share_a[j]
            + x.share_a[j] * y.share_b[j]
            + x.share_b[j] * y.share_a[j];
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use crate::field::PRIME;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn fe(v: u64) -> FieldElement {
        FieldElement::new(v)
    }

    fn views(shares: &[RssVector; 3]) -> [&RssVector; 3] {
        [&shares[0], &shares[1], &shares[2]]
    }

    #[test]
    fn share_round_trip() {
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        for secret in [vec![], vec![fe(0)], vec![fe(5), fe(7)]] {
            let shares = share_vector(&secret, &mut rng);
            assert_eq!(
                reconstruct(views(&shares), SecurityMode::Malicious).unwrap(),
                secret
            );
        }
    }

    #[test]
    fn sharings_are_randomized() {
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let s1 = share_vector(&[fe(9)], &mut rng);
        let s2 = share_vector(&[fe(9)], &mut rng);
        assert_ne!(s1[0], s2[0]);
    }

    #[test]
    fn tampered_copy_detected() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let mut shares = share_vector(&[fe(9), fe(4)], &mut rng);
        shares[1].share_a[1] += FieldElement::ONE;
        assert_eq!(
            reconstruct(views(&shares), SecurityMode::Malicious),
            Err(RssError::Inconsistent(1))
        );
        // Semi-honest reconstruction does not cross-check copies; the sum
        // simply shifts.
        let plain = reconstruct(views(&shares), SecurityMode::SemiHonest).unwrap();
        assert_eq!(plain, vec![fe(9), fe(5)]);
    }

    #[test]
    fn linear_ops_match_plaintext() {
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let x: Vec<FieldElement> = (0..100).map(|_| fe(rng.gen_range(0..PRIME))).collect();
        let y: Vec<FieldElement> = (0..100).map(|_| fe(rng.gen_range(0..PRIME))).collect();
        let c = fe(rng.gen_range(0..PRIME));
        let xs = share_vector(&x, &mut rng);
        let ys = share_vector(&y, &mut rng);

        let mut sum = xs.clone();
        for (s, o) in sum.iter_mut().zip(&ys) {
            s.add_local(o).unwrap();
            s.scale_local(c);
        }
        let want: Vec<FieldElement> = x.iter().zip(&y).map(|(&a, &b)| (a + b) * c).collect();
        assert_eq!(
            reconstruct(views(&sum), SecurityMode::Malicious).unwrap(),
            want
        );

        let mut diff = xs.clone();
        for (s, o) in diff.iter_mut().zip(&xs) {
            s.sub_local(o).unwrap();
        }
        assert_eq!(
            reconstruct(views(&diff), SecurityMode::Malicious).unwrap(),
            vec![FieldElement::ZERO; 100]
        );
    }

    #[test]
    fn length_mismatch_rejected() {
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let mut a = share_vector(&[fe(1)], &mut rng);
        let b = share_vector(&[fe(1), fe(2)], &mut rng);
        assert_eq!(
            a[0].add_local(&b[0]),
            Err(RssError::LengthMismatch(1, 2))
        );
    }

    #[test]
    fn dot_local_sums_to_plaintext_dot() {
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let x = vec![fe(1), fe(2)];
        let y = vec![fe(3), fe(4)];
        let xs = share_vector(&x, &mut rng);
        let ys = share_vector(&y, &mut rng);
        let z: FieldElement = (0..3).map(|i| dot_local(&xs[i], &ys[i]).unwrap()).sum();
        assert_eq!(z, fe(11));
    }

    #[test]
    fn share_low_bits_uniform() {
        // One party's stored share over many sharings of a fixed secret:
        // chi-square over the low byte, 255 dof, critical 310.457 at 0.01.
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let mut counts = [0u64; 256];
        let n = 200_000;
        for _ in 0..n {
            let shares = share_vector(&[fe(42)], &mut rng);
            counts[(shares[2].share_a[0].value() & 0xff) as usize] += 1;
        }
        let expected = n as f64 / 256.0;
        let stat: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(stat < 310.457, "chi-square statistic {stat}");
    }

    proptest! {
        #[test]
        fn reconstruct_inverts_share(vals in proptest::collection::vec(0..PRIME, 0..50), seed in any::<u64>()) {
            let secret: Vec<FieldElement> = vals.iter().map(|&v| fe(v)).collect();
            let mut rng = ChaCha20Rng::seed_from_u64(seed);
            let shares = share_vector(&secret, &mut rng);
            prop_assert_eq!(reconstruct(views(&shares), SecurityMode::Malicious).unwrap(), secret);
        }
    }
}
