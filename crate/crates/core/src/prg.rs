//! Deterministic pseudorandom expansion from 16-byte seeds.
//!
//! Every party-reproducible random object in the protocol (permutations,
//! MAC keys, zero sharings, padding) is expanded from a [`Seed`] plus a
//! domain tag. The stream is ChaCha20: the cipher key is the seed
//! concatenated with the first half of SHA-256(tag), and the stream id is
//! taken from the second half, so distinct tags yield independent streams
//! even under a fixed seed.

use std::fmt;

use rand::rngs::OsRng;
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::field::{FieldElement, PRIME};

/// A 128-bit PRG seed. The unit of "small seed" in all cost accounting
/// (|s| = 128 bits).
#[derive(Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Seed(pub [u8; 16]);

/// Bit length of a seed, as counted by the communication formulas.
pub const SEED_BITS: u64 = 128;

/// Bit length of a field element, as counted by the communication formulas.
pub const ELEMENT_BITS: u64 = 61;

impl Seed {
    /// Draws a fresh seed from the given rng.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut bytes = [0u8; 16];
        rng.fill_bytes(&mut bytes);
        Seed(bytes)
    }

    /// Draws a fresh seed from the operating system.
    pub fn from_entropy() -> Self {
        Seed::random(&mut OsRng)
    }

    /// Hex rendering used in transcripts.
    pub fn to_hex(self) -> String {
        self.0.iter().map(|b| format!("{b:02x}")).collect()
    }

    /// Parses the hex rendering back into a seed.
    pub fn from_hex(s: &str) -> Option<Self> {
        if s.len() != 32 || !s.is_ascii() {
            return None;
        }
        let mut bytes = [0u8; 16];
        for (i, chunk) in s.as_bytes().chunks(2).enumerate() {
            let hi = (chunk[0] as char).to_digit(16)?;
            let lo = (chunk[1] as char).to_digit(16)?;
            bytes[i] = (hi * 16 + lo) as u8;
        }
        Some(Seed(bytes))
    }
}

impl fmt::Debug for Seed {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Seed({})", self.to_hex())
    }
}

/// A deterministic ChaCha20 stream bound to (seed, domain tag).
pub struct PrgStream {
    rng: ChaCha20Rng,
}

impl PrgStream {
    /// Opens the stream for `seed` under `tag`.
    pub fn new(seed: Seed, tag: &str) -> Self {
        let digest = Sha256::digest(tag.as_bytes());
        let mut key = [0u8; 32];
        key[..16].copy_from_slice(&seed.0);
        key[16..].copy_from_slice(&digest[..16]);
        let mut rng = ChaCha20Rng::from_seed(key);
        rng.set_stream(u64::from_le_bytes(digest[16..24].try_into().unwrap()));
        PrgStream { rng }
    }

    /// Next raw 64-bit block.
    pub fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    /// Next uniform field element via rejection sampling: 61-bit blocks are
    /// drawn and the single non-canonical value 2^61 - 1 is retried.
    pub fn next_element(&mut self) -> FieldElement {
        loop {
            let v = self.rng.next_u64() & PRIME;
            if v < PRIME {
                return FieldElement::new(v);
            }
        }
    }

    /// Next uniform index in `[0, bound)`, unbiased by rejection.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "empty draw range");
        let zone = u64::MAX - u64::MAX % bound;
        loop {
            let v = self.rng.next_u64();
            if v < zone {
                return v % bound;
            }
        }
    }

    /// Next derived 16-byte seed.
    pub fn next_seed(&mut self) -> Seed {
        let mut bytes = [0u8; 16];
        self.rng.fill_bytes(&mut bytes);
        Seed(bytes)
    }
}

/// Expands `n` uniform field elements from (seed, tag).
pub fn prg_expand(seed: Seed, tag: &str, n: usize) -> Vec<FieldElement> {
    let mut stream = PrgStream::new(seed, tag);
    (0..n).map(|_| stream.next_element()).collect()
}

/// Derives a child seed from (seed, tag).
pub fn derive_seed(seed: Seed, tag: &str) -> Seed {
    PrgStream::new(seed, tag).next_seed()
}
