use std::cmp::Ordering;

/// A model is an inclusion vector over the eligible drugs: bit j set means
/// drug j enters the regression for the event under study.
///
/// Stored as packed 64-bit blocks so models over a few hundred drugs stay
/// cheap to clone, hash, and compare. Bit i lives in block i/64 at position
/// i%64. Two vectors of different lengths are never equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ModelVector {
    len: usize,
    blocks: Vec<u64>,
}

impl ModelVector {
    /// The empty model (all bits zero) over `len` positions.
    pub fn zeros(len: usize) -> Self {
        let nblocks = len.div_ceil(64).max(1);
        ModelVector {
            len,
            blocks: vec![0; nblocks],
        }
    }

    /// Builds a vector with the given positions set.
    ///
    /// Panics if any index is out of range.
    pub fn from_indices(len: usize, ones: &[usize]) -> Self {
        let mut v = Self::zeros(len);
        for &i in ones {
            v.set(i, true);
        }
        v
    }

    /// Interprets the low `len` bits of `mask` as a model. Only valid for
    /// `len <= 64`; used by the exhaustive enumerator, which walks a u64
    /// counter over the whole space.
    pub fn from_u64_mask(len: usize, mask: u64) -> Self {
        assert!(len <= 64, "u64 mask only covers 64 positions");
        assert!(
            len == 64 || mask < (1u64 << len),
            "mask has bits beyond len"
        );
        ModelVector {
            len,
            blocks: vec![mask],
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range for len {}", self.len);
        self.blocks[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, value: bool) {
        assert!(i < self.len, "bit index {i} out of range for len {}", self.len);
        let mask = 1u64 << (i % 64);
        if value {
            self.blocks[i / 64] |= mask;
        } else {
            self.blocks[i / 64] &= !mask;
        }
    }

    pub fn flip(&mut self, i: usize) {
        assert!(i < self.len, "bit index {i} out of range for len {}", self.len);
        self.blocks[i / 64] ^= 1u64 << (i % 64);
    }

    /// Number of included drugs, |gamma|.
    pub fn count_ones(&self) -> usize {
        self.blocks.iter().map(|b| b.count_ones() as usize).sum()
    }

    /// Indices of included drugs in increasing order.
    pub fn iter_ones(&self) -> impl Iterator<Item = usize> + '_ {
        self.blocks.iter().enumerate().flat_map(|(bi, &block)| {
            let mut rest = block;
            std::iter::from_fn(move || {
                if rest == 0 {
                    None
                } else {
                    let t = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    Some(bi * 64 + t)
                }
            })
        })
    }

    pub fn ones_vec(&self) -> Vec<usize> {
        self.iter_ones().collect()
    }

    /// Lexicographic order on the bit sequence read from index 0 upward:
    /// at the first differing position, the vector holding a 0 there is the
    /// smaller one. Used as the final tie-break between equal-BIC,
    /// equal-size models so search results are reproducible.
    pub fn lex_cmp(&self, other: &Self) -> Ordering {
        assert_eq!(self.len, other.len, "lex_cmp requires equal lengths");
        for (a, b) in self.blocks.iter().zip(&other.blocks) {
            let diff = a ^ b;
            if diff != 0 {
                let first = diff.trailing_zeros();
                return if a >> first & 1 == 0 {
                    Ordering::Less
                } else {
                    Ordering::Greater
                };
            }
        }
        Ordering::Equal
    }
}
