//! Permutations, the sparse-vector reordering encoding, and the seed+head
//! permutation compression scheme.
//!
//! A client reorders its sparse vector so the k retained values lead,
//! derives the permutation that undoes the reordering, splits it into three
//! factors, and ships two factors as 16-byte seeds plus the first k
//! destinations of the third. Servers re-expand the seeds and fill in the
//! rest of the third factor with the ascending complement, which acts
//! identically on any vector whose tail is zero.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::field::FieldElement;
use crate::prg::{PrgStream, Seed};

/// Errors from permutation construction and validation.
#[derive(Debug, thiserror::Error, PartialEq)]
pub enum PermError {
    /// An index is outside `[0, d)`.
    #[error("index {0} out of range for dimension {1}")]
    IndexOutOfRange(usize, usize),
    /// An index appears twice.
    #[error("duplicate index {0}")]
    DuplicateIndex(usize),
    /// The leading and trailing index lists do not partition `[0, d)`.
    #[error("index lists do not partition the dimension")]
    NotAPartition,
}

/// A permutation of `[0, d)` stored as a destination table:
/// `dest[i]` is where position `i` moves.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Permutation {
    dest: Vec<usize>,
}

impl Permutation {
    /// The identity on `d` positions.
    pub fn identity(d: usize) -> Self {
        Permutation {
            dest: (0..d).collect(),
        }
    }

    /// Builds from an explicit destination table, validating bijectivity.
    pub fn from_dest(dest: Vec<usize>) -> Result<Self, PermError> {
        let d = dest.len();
        let mut seen = vec![false; d];
        for &t in &dest {
            if t >= d {
                return Err(PermError::IndexOutOfRange(t, d));
            }
            if seen[t] {
                return Err(PermError::DuplicateIndex(t));
            }
            seen[t] = true;
        }
        Ok(Permutation { dest })
    }

    /// Deterministic uniform permutation from a seed: a Fisher-Yates pass
    /// from the last position down, with unbiased index draws.
    pub fn from_seed(seed: Seed, d: usize) -> Self {
        let mut stream = PrgStream::new(seed, "perm");
        let mut dest: Vec<usize> = (0..d).collect();
        for i in (1..d).rev() {
            let j = stream.next_below(i as u64 + 1) as usize;
            dest.swap(i, j);
        }
        Permutation { dest }
    }

    /// Number of positions.
    pub fn len(&self) -> usize {
        self.dest.len()
    }

    /// True for the empty permutation.
    pub fn is_empty(&self) -> bool {
        self.dest.is_empty()
    }

    /// Destination of position `i`.
    pub fn dest(&self, i: usize) -> usize {
        self.dest[i]
    }

    /// Applies the permutation: output[dest[i]] = input[i].
    pub fn apply<T: Copy + Default>(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.dest.len(), "vector/permutation size mismatch");
        let mut out = vec![T::default(); v.len()];
        for (i, &t) in self.dest.iter().enumerate() {
            out[t] = v[i];
        }
        out
    }

    /// Composition self ∘ other: first `other`, then `self`.
    pub fn compose(&self, other: &Permutation) -> Permutation {
        assert_eq!(self.len(), other.len());
        let dest = (0..self.len()).map(|i| self.dest[other.dest[i]]).collect();
        Permutation { dest }
    }

    /// The inverse permutation.
    pub fn invert(&self) -> Permutation {
        let mut dest = vec![0usize; self.len()];
        for (i, &t) in self.dest.iter().enumerate() {
            dest[t] = i;
        }
        Permutation { dest }
    }
}

/// A sparse vector over the field: `dim` total coordinates of which the
/// listed `indices` are retained. Indices are strictly ascending; values may
/// include explicit zeros when a fixed slot count k is padded up (see
/// [`crate::agg::pad_to_slots`]).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SparseVector {
    /// Total dimension d.
    pub dim: usize,
    /// Retained coordinate indices, strictly ascending.
    pub indices: Vec<usize>,
    /// Values at those indices.
    pub values: Vec<FieldElement>,
}

impl SparseVector {
    /// Builds from parallel index/value lists, validating shape.
    pub fn new(
        dim: usize,
        indices: Vec<usize>,
        values: Vec<FieldElement>,
    ) -> Result<Self, PermError> {
        assert_eq!(indices.len(), values.len(), "index/value length mismatch");
        let mut prev: Option<usize> = None;
        for &i in &indices {
            if i >= dim {
                return Err(PermError::IndexOutOfRange(i, dim));
            }
            if prev == Some(i) {
                return Err(PermError::DuplicateIndex(i));
            }
            if let Some(p) = prev {
                assert!(i > p, "indices must be ascending");
            }
            prev = Some(i);
        }
        Ok(SparseVector {
            dim,
            indices,
            values,
        })
    }

    /// Extracts the nonzero entries of a dense vector.
    pub fn from_dense(v: &[FieldElement]) -> Self {
        let mut indices = Vec::new();
        let mut values = Vec::new();
        for (i, &x) in v.iter().enumerate() {
            if x != FieldElement::ZERO {
                indices.push(i);
                values.push(x);
            }
        }
        SparseVector {
            dim: v.len(),
            indices,
            values,
        }
    }

    /// Materializes the dense vector.
    pub fn to_dense(&self) -> Vec<FieldElement> {
        let mut out = vec![FieldElement::ZERO; self.dim];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i] = v;
        }
        out
    }

    /// Number of retained slots k.
    pub fn k(&self) -> usize {
        self.indices.len()
    }
}

/// Reorders a sparse vector so retained values lead: returns the value list
/// r with r[j] = x[L(j)], the retained index list L (order of occurrence),
/// and the ascending complement E.
pub fn reorder(x: &SparseVector) -> (Vec<FieldElement>, Vec<usize>, Vec<usize>) {
    let r = x.values.clone();
    let l = x.indices.clone();
    let mut retained = vec![false; x.dim];
    for &i in &l {
        retained[i] = true;
    }
    let e = (0..x.dim).filter(|&i| !retained[i]).collect();
    (r, l, e)
}

/// Builds the permutation that maps the reordered vector back onto the
/// original layout: position j goes to L(j) for j < k and to E(j - k) after.
pub fn derive_permutation(l: &[usize], e: &[usize]) -> Result<Permutation, PermError> {
    let d = l.len() + e.len();
    let mut seen = vec![false; d];
    let mut dest = Vec::with_capacity(d);
    for &t in l.iter().chain(e.iter()) {
        if t >= d {
            return Err(PermError::IndexOutOfRange(t, d));
        }
        if seen[t] {
            return Err(PermError::NotAPartition);
        }
        seen[t] = true;
        dest.push(t);
    }
    Ok(Permutation { dest })
}

/// The client's compressed permutation upload: two seeds and the k-entry
/// head of the third factor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompressedPermutation {
    /// Seed expanding the outermost factor.
    pub seed0: Seed,
    /// Seed expanding the middle factor.
    pub seed1: Seed,
    /// First k destinations of the innermost factor.
    pub head: Vec<usize>,
}

/// Splits `pi` into random factors pi0 ∘ pi1 ∘ pi2 and compresses: pi0, pi1
/// become fresh seeds, pi2 is distilled to its first `k` destinations.
/// Also returns the full pi2 (the client-side ground truth used in tests).
pub fn decompose_and_compress<R: Rng + ?Sized>(
    pi: &Permutation,
    k: usize,
    rng: &mut R,
) -> (CompressedPermutation, Permutation) {
    let d = pi.len();
    let seed0 = Seed::random(rng);
    let seed1 = Seed::random(rng);
    let pi0 = Permutation::from_seed(seed0, d);
    let pi1 = Permutation::from_seed(seed1, d);
    let pi2 = pi1.invert().compose(&pi0.invert()).compose(pi);
    let head = pi2.dest[..k].to_vec();
    (CompressedPermutation { seed0, seed1, head }, pi2)
}

/// Server-side expansion of a distilled head list: the first k destinations
/// are the head, the remaining positions take the ascending complement.
/// Rejects malformed heads (duplicates, out of range).
pub fn server_decompress_head(head: &[usize], d: usize) -> Result<Permutation, PermError> {
    let mut seen = vec![false; d];
    for &t in head {
        if t >= d {
            return Err(PermError::IndexOutOfRange(t, d));
        }
        if seen[t] {
            return Err(PermError::DuplicateIndex(t));
        }
        seen[t] = true;
    }
    let mut dest = Vec::with_capacity(d);
    dest.extend_from_slice(head);
    dest.extend((0..d).filter(|&i| !seen[i]));
    Ok(Permutation { dest })
}
