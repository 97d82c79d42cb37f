//! Random test set and disjoint signature blocks drawn from a Z-basis pool.
//!
//! The pool is shuffled by a keyed pseudorandom permutation evaluated lazily,
//! so pools of billions of bits never need an index table: the test set is
//! the first `c_test` permuted positions and block `k` the next `c_sig` after
//! `c_test + k·c_sig`.

use serde::{Deserialize, Serialize};

use crate::counts::Link;
use crate::error::{domain, Result};
use crate::qds::distil::block_count;

/// Read access to a sequence of bits.
pub trait BitSource {
    fn bit_len(&self) -> u64;
    fn bit(&self, index: u64) -> bool;
}

impl BitSource for [bool] {
    fn bit_len(&self) -> u64 {
        self.len() as u64
    }
    fn bit(&self, index: u64) -> bool {
        self[index as usize]
    }
}

impl BitSource for Vec<bool> {
    fn bit_len(&self) -> u64 {
        self.len() as u64
    }
    fn bit(&self, index: u64) -> bool {
        self[index as usize]
    }
}

/// A pool of known length whose contents are never read, for block-count
/// and index arithmetic on very large pools.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct UnreadPool(pub u64);

impl BitSource for UnreadPool {
    fn bit_len(&self) -> u64 {
        self.0
    }
    fn bit(&self, _index: u64) -> bool {
        false
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SignatureBlock {
    pub link: Link,
    pub bit_values: Vec<bool>,
    /// Positions in the Z pool, strictly increasing.
    pub origin_indices: Vec<u64>,
}

impl SignatureBlock {
    pub fn len(&self) -> usize {
        self.bit_values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bit_values.is_empty()
    }
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

const ROUNDS: u64 = 6;

/// Balanced Feistel network on `2·half_bits` bits, restricted to `[0, n)` by
/// cycle walking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Permutation {
    n: u64,
    half_bits: u32,
    key: u64,
}

impl Permutation {
    pub fn new(n: u64, seed: u64) -> Self {
        let bits = 64 - n.saturating_sub(1).leading_zeros();
        let half_bits = bits.div_ceil(2).max(1);
        Permutation {
            n,
            half_bits,
            key: mix(seed ^ 0x5851_F42D_4C95_7F2D),
        }
    }

    fn encrypt(&self, x: u64) -> u64 {
        let mask = (1u64 << self.half_bits) - 1;
        let (mut l, mut r) = (x >> self.half_bits, x & mask);
        for round in 0..ROUNDS {
            let f = mix(r ^ self
                .key
                .wrapping_add(round.wrapping_mul(0x9E37_79B9_7F4A_7C15)))
                & mask;
            (l, r) = (r, l ^ f);
        }
        (l << self.half_bits) | r
    }

    /// Image of `x`; a bijection on `[0, n)`.
    pub fn apply(&self, x: u64) -> u64 {
        debug_assert!(x < self.n);
        let mut y = self.encrypt(x);
        while y >= self.n {
            y = self.encrypt(y);
        }
        y
    }
}

/// Random partition of a pool into a test set and signature blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BlockPlan {
    pub pool_len: u64,
    pub c_test: u64,
    pub c_sig: u64,
    n_blocks: u64,
    perm: Permutation,
}

impl BlockPlan {
    pub fn new(pool_len: u64, c_test: u64, c_sig: u64, seed: u64) -> Result<Self> {
        let n_blocks = block_count(pool_len, c_test, c_sig)?;
        Ok(BlockPlan {
            pool_len,
            c_test,
            c_sig,
            n_blocks,
            perm: Permutation::new(pool_len, seed),
        })
    }

    pub fn n_blocks(&self) -> u64 {
        self.n_blocks
    }

    fn sorted_range(&self, start: u64, len: u64) -> Vec<u64> {
        let mut v: Vec<u64> = (start..start + len).map(|i| self.perm.apply(i)).collect();
        v.sort_unstable();
        v
    }

    pub fn test_indices(&self) -> Vec<u64> {
        self.sorted_range(0, self.c_test)
    }

    pub fn block_indices(&self, k: u64) -> Result<Vec<u64>> {
        if k >= self.n_blocks {
            return Err(domain(format!("block {k} of {}", self.n_blocks)));
        }
        Ok(self.sorted_range(self.c_test + k * self.c_sig, self.c_sig))
    }
}

/// Lazily materialised test set and blocks over a concrete pool.
pub struct Extraction<'a, S: BitSource + ?Sized> {
    pub link: Link,
    pub plan: BlockPlan,
    pool: &'a S,
}

impl<'a, S: BitSource + ?Sized> Extraction<'a, S> {
    pub fn n_blocks(&self) -> u64 {
        self.plan.n_blocks()
    }

    pub fn test_set(&self) -> SignatureBlock {
        self.gather(self.plan.test_indices())
    }

    pub fn block(&self, k: u64) -> Result<SignatureBlock> {
        Ok(self.gather(self.plan.block_indices(k)?))
    }

    pub fn blocks(&self) -> impl Iterator<Item = SignatureBlock> + '_ {
        (0..self.n_blocks()).map(move |k| self.block(k).expect("index in range"))
    }

    fn gather(&self, indices: Vec<u64>) -> SignatureBlock {
        SignatureBlock {
            link: self.link,
            bit_values: indices.iter().map(|&i| self.pool.bit(i)).collect(),
            origin_indices: indices,
        }
    }
}

/// Samples a disjoint test set of `c_test` bits and
/// `floor((|pool| - c_test) / c_sig)` disjoint blocks of `c_sig` bits.
/// Deterministic under `seed`: two pools of equal length (a sender's and a
/// receiver's copy) are partitioned identically.
pub fn extract_blocks<S: BitSource + ?Sized>(
    pool: &S,
    link: Link,
    c_test: u64,
    c_sig: u64,
    seed: u64,
) -> Result<Extraction<'_, S>> {
    Ok(Extraction {
        link,
        plan: BlockPlan::new(pool.bit_len(), c_test, c_sig, seed)?,
        pool,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn permutation_is_bijective() {
        for n in [1u64, 2, 3, 7, 100, 1023, 1024, 1025] {
            let p = Permutation::new(n, 42);
            let image: HashSet<u64> = (0..n).map(|x| p.apply(x)).collect();
            assert_eq!(image.len() as u64, n);
            assert!(image.iter().all(|&y| y < n));
        }
    }

    #[test]
    fn published_block_counts() {
        let mdi = BlockPlan::new(4_936_714_426, 1_714_426, 2_500_000, 1).unwrap();
        assert_eq!(mdi.n_blocks(), 1974);
        let qkd = BlockPlan::new(422_879_354, 46_979_354, 150_000, 1).unwrap();
        assert_eq!(qkd.n_blocks(), 2506);
    }

    #[test]
    fn exact_fit_gives_one_block() {
        let pool = vec![true; 30];
        let ex = extract_blocks(&pool, Link::AB, 10, 20, 0).unwrap();
        assert_eq!(ex.n_blocks(), 1);
        assert!(extract_blocks(&pool, Link::AB, 11, 20, 0).is_err());
    }

    #[test]
    fn blocks_are_disjoint_and_sorted() {
        let pool: Vec<bool> = (0..1000).map(|i| i % 3 == 0).collect();
        let ex = extract_blocks(&pool, Link::AC, 100, 70, 9).unwrap();
        let mut seen: HashSet<u64> = ex.test_set().origin_indices.into_iter().collect();
        assert_eq!(seen.len(), 100);
        for b in ex.blocks() {
            assert!(b.origin_indices.windows(2).all(|w| w[0] < w[1]));
            for (&i, &bit) in b.origin_indices.iter().zip(&b.bit_values) {
                assert_eq!(bit, pool[i as usize]);
                assert!(seen.insert(i));
            }
        }
        assert_eq!(ex.n_blocks(), 12);
    }

    #[test]
    fn same_seed_same_partition() {
        let a = BlockPlan::new(5000, 100, 300, 3).unwrap();
        let b = BlockPlan::new(5000, 100, 300, 3).unwrap();
        assert_eq!(a.block_indices(4).unwrap(), b.block_indices(4).unwrap());
        let c = BlockPlan::new(5000, 100, 300, 4).unwrap();
        assert_ne!(a.block_indices(4).unwrap(), c.block_indices(4).unwrap());
    }
}
