//! Arithmetic in the prime field Z_p with p = 2^61 - 1, plus the fixed-point
//! codec mapping reals onto field elements with 15 fractional bits.
//!
//! All protocol values live in this field. Elements are stored canonically
//! (always `< p`) and serialize as 8-byte little-endian integers.

use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Mul, MulAssign, Neg, Sub, SubAssign};

use serde::{Deserialize, Serialize};

/// The field modulus, the Mersenne prime 2^61 - 1.
pub const PRIME: u64 = (1 << 61) - 1;

/// Number of fractional bits in the fixed-point encoding.
pub const FRAC_BITS: u32 = 15;

/// Fixed-point scale factor, 2^15.
pub const FIXED_SCALE: f64 = (1u64 << FRAC_BITS) as f64;

/// An element of Z_p in canonical representation.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FieldElement(u64);

impl FieldElement {
    /// The additive identity.
    pub const ZERO: FieldElement = FieldElement(0);
    /// The multiplicative identity.
    pub const ONE: FieldElement = FieldElement(1);

    /// Builds an element from an arbitrary `u64`, reducing mod p.
    pub fn new(v: u64) -> Self {
        FieldElement(v % PRIME)
    }

    /// Builds an element from a signed integer, mapping negatives to the
    /// upper half of the field.
    pub fn from_i128(v: i128) -> Self {
        let p = PRIME as i128;
        FieldElement(v.rem_euclid(p) as u64)
    }

    /// Canonical value in `[0, p)`.
    pub fn value(self) -> u64 {
        self.0
    }

    /// Centered representative in `(-p/2, p/2]`.
    pub fn centered(self) -> i128 {
        if self.0 > PRIME / 2 {
            self.0 as i128 - PRIME as i128
        } else {
            self.0 as i128
        }
    }

    /// Serializes to 8 little-endian bytes.
    pub fn to_le_bytes(self) -> [u8; 8] {
        self.0.to_le_bytes()
    }

    /// Parses 8 little-endian bytes; rejects non-canonical values.
    pub fn from_le_bytes(bytes: [u8; 8]) -> Result<Self, FieldError> {
        let v = u64::from_le_bytes(bytes);
        if v >= PRIME {
            return Err(FieldError::NonCanonical(v));
        }
        Ok(FieldElement(v))
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Add for FieldElement {
    type Output = FieldElement;
    fn add(self, rhs: FieldElement) -> FieldElement {
        let s = self.0 + rhs.0;
        FieldElement(if s >= PRIME { s - PRIME } else { s })
    }
}

impl Sub for FieldElement {
    type Output = FieldElement;
    fn sub(self, rhs: FieldElement) -> FieldElement {
        let s = self.0 + PRIME - rhs.0;
        FieldElement(if s >= PRIME { s - PRIME } else { s })
    }
}

impl Neg for FieldElement {
    type Output = FieldElement;
    fn neg(self) -> FieldElement {
        if self.0 == 0 {
            self
        } else {
            FieldElement(PRIME - self.0)
        }
    }
}

impl Mul for FieldElement {
    type Output = FieldElement;
    fn mul(self, rhs: FieldElement) -> FieldElement {
        FieldElement(reduce_u128(self.0 as u128 * rhs.0 as u128))
    }
}

impl AddAssign for FieldElement {
    fn add_assign(&mut self, rhs: FieldElement) {
        *self = *self + rhs;
    }
}

impl SubAssign for FieldElement {
    fn sub_assign(&mut self, rhs: FieldElement) {
        *self = *self - rhs;
    }
}

impl MulAssign for FieldElement {
    fn mul_assign(&mut self, rhs: FieldElement) {
        *self = *self * rhs;
    }
}

impl Sum for FieldElement {
    fn sum<I: Iterator<Item = FieldElement>>(iter: I) -> FieldElement {
        iter.fold(FieldElement::ZERO, |acc, x| acc + x)
    }
}

/// Reduces a product below 2^122 mod the Mersenne prime by folding the high
/// bits twice.
fn reduce_u128(x: u128) -> u64 {
    let m = PRIME as u128;
    let folded = (x & m) + (x >> 61);
    let folded = (folded & m) + (folded >> 61);
    let mut r = folded as u64;
    if r >= PRIME {
        r -= PRIME;
    }
    r
}

/// Errors from field parsing and the fixed-point codec.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FieldError {
    /// A serialized element was >= p.
    #[error("non-canonical field element {0}")]
    NonCanonical(u64),
    /// A real value does not fit the fixed-point range.
    #[error("value {0} outside fixed-point range")]
    FixedPointOverflow(f64),
}

/// Encodes a real as round(x * 2^15) mod p, rounding halves away from zero.
///
/// Accepts |x| < p / 2^16 so the centered decoding stays unambiguous.
pub fn fixed_encode(x: f64) -> Result<FieldElement, FieldError> {
    if !x.is_finite() || x.abs() >= PRIME as f64 / FIXED_SCALE / 2.0 {
        return Err(FieldError::FixedPointOverflow(x));
    }
    let scaled = x * FIXED_SCALE;
    let rounded = if scaled >= 0.0 {
        (scaled + 0.5).floor()
    } else {
        (scaled - 0.5).ceil()
    };
    Ok(FieldElement::from_i128(rounded as i128))
}

/// Decodes a field element back to a real using the centered representative.
pub fn fixed_decode(e: FieldElement) -> f64 {
    e.centered() as f64 / FIXED_SCALE
}

/// Serializes a slice of elements as consecutive 8-byte LE words.
pub fn elements_to_bytes(elems: &[FieldElement]) -> Vec<u8> {
    let mut out = Vec::with_capacity(elems.len() * 8);
    for e in elems {
        out.extend_from_slice(&e.to_le_bytes());
    }
    out
}

/// Parses consecutive 8-byte LE words back into elements.
pub fn elements_from_bytes(bytes: &[u8]) -> Result<Vec<FieldElement>, FieldError> {
    assert!(bytes.len() % 8 == 0, "element payload not 8-byte aligned");
    bytes
        .chunks_exact(8)
        .map(|c| FieldElement::from_le_bytes(c.try_into().unwrap()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn add_wraps_at_prime() {
        assert_eq!(
            FieldElement::new(PRIME - 1) + FieldElement::ONE,
            FieldElement::ZERO
        );
    }

    #[test]
    fn sub_underflows_to_top() {
        assert_eq!(
            FieldElement::ZERO - FieldElement::ONE,
            FieldElement::new(PRIME - 1)
        );
    }

    #[test]
    fn mul_matches_reference_values() {
        // Frozen from an independent big-integer evaluation.
        let cases: [(u64, u64, u64); 5] = [
            (PRIME - 1, 2, PRIME - 2),
            (
                616542978382638287,
                2043992214028699930,
                2262108860389761913,
            ),
            (
                211547586220075831,
                1247167139007580100,
                1253897124670926158,
            ),
            (830170374493752451 % PRIME, 1, 830170374493752451),
            (
                1502053182579698403,
                816053786636713330,
                1272090655317538814,
            ),
        ];
        for (a, b, want) in cases {
            assert_eq!(
                FieldElement::new(a) * FieldElement::new(b),
                FieldElement::new(want),
                "{a} * {b}"
            );
        }
    }

    #[test]
    fn fixed_encode_reference_values() {
        assert_eq!(fixed_encode(1.0).unwrap().value(), 32768);
        assert_eq!(fixed_encode(-1.0).unwrap().value(), PRIME - 32768);
        assert_eq!(fixed_encode(0.123).unwrap().value(), 4030);
        assert_eq!(fixed_encode(-0.123).unwrap().value(), PRIME - 4030);
        assert_eq!(fixed_encode(1234.56789).unwrap().value(), 40454321);
        // Ties round away from zero: 3 * 2^-16 scales to exactly 1.5.
        assert_eq!(fixed_encode(3.0 * 2f64.powi(-16)).unwrap().value(), 2);
        assert_eq!(
            fixed_encode(-3.0 * 2f64.powi(-16)).unwrap().value(),
            PRIME - 2
        );
        assert_eq!(fixed_encode(2f64.powi(-16)).unwrap().value(), 1);
    }

    #[test]
    fn fixed_encode_rejects_out_of_range() {
        let limit = PRIME as f64 / 2f64.powi(16);
        assert!(fixed_encode(limit * 1.01).is_err());
        assert!(fixed_encode(f64::NAN).is_err());
        assert!(fixed_encode(f64::INFINITY).is_err());
    }

    #[test]
    fn fixed_round_trip_within_half_ulp() {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let x: f64 = rng.gen_range(-100.0..100.0);
            let back = fixed_decode(fixed_encode(x).unwrap());
            assert!((back - x).abs() <= 2f64.powi(-16), "x={x} back={back}");
        }
    }

    #[test]
    fn byte_round_trip_and_canonical_check() {
        let e = FieldElement::new(123456789);
        assert_eq!(FieldElement::from_le_bytes(e.to_le_bytes()).unwrap(), e);
        assert_eq!(
            FieldElement::from_le_bytes(PRIME.to_le_bytes()),
            Err(FieldError::NonCanonical(PRIME))
        );
        let v = vec![FieldElement::new(1), FieldElement::new(PRIME - 1)];
        assert_eq!(elements_from_bytes(&elements_to_bytes(&v)).unwrap(), v);
    }

    proptest! {
        #[test]
        fn field_axioms(a in 0..PRIME, b in 0..PRIME) {
            let (x, y) = (FieldElement::new(a), FieldElement::new(b));
            prop_assert_eq!((x + y) - y, x);
            prop_assert_eq!(x * y, y * x);
            prop_assert_eq!(x * FieldElement::ONE, x);
            prop_assert_eq!(x + (-x), FieldElement::ZERO);
            prop_assert!((x + y).value() < PRIME);
            prop_assert!((x * y).value() < PRIME);
        }

        #[test]
        fn centered_round_trips(a in 0..PRIME) {
            let x = FieldElement::new(a);
            prop_assert_eq!(FieldElement::from_i128(x.centered()), x);
        }
    }
}
