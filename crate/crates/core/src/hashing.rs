//! Seeded hashing: every random choice the sketches make comes from here.
//!
//! Items are reduced to a 64-bit word with XXH3-64 keyed by the seed. All
//! further values are derived from that word and from per-purpose subkeys,
//! where a subkey is the `index`-th output of a SplitMix64 stream started at
//! `mix64(seed ^ domain)`:
//!
//! ```text
//! subkey(seed, domain, i) = mix64(mix64(seed ^ domain) + GOLDEN * (i + 1))
//! lane word               = mix64(xxh3(item, seed) ^ subkey(seed, LANE, lane))
//! bucket word             = mix64(xxh3(item, seed) ^ subkey(seed, BUCKET, 0))
//! ```
//!
//! The exact construction is part of the sketch file contract (see FORMAT.md):
//! changing any constant here changes every register a sketch holds.

use serde::{Deserialize, Serialize};
use xxhash_rust::xxh3::xxh3_64_with_seed;

/// SplitMix64 increment (`2^64 / phi`).
pub const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub const DOMAIN_LANE: u64 = u64::from_le_bytes(*b"gs-lane\0");
pub const DOMAIN_BUCKET: u64 = u64::from_le_bytes(*b"gs-bckt\0");
pub const DOMAIN_INIT: u64 = u64::from_le_bytes(*b"gs-init\0");
pub const DOMAIN_SHIFT: u64 = u64::from_le_bytes(*b"gs-shft\0");

const UNIT_SCALE: f64 = 1.0 / (1u64 << 53) as f64;
const UNIT_FLOOR: f64 = UNIT_SCALE / 2.0;

/// Key material shared by every hash function of a sketch. Sketches merge
/// only when their seeds are equal.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct HashSeed(pub u64);

impl From<u64> for HashSeed {
    fn from(seed: u64) -> Self {
        HashSeed(seed)
    }
}

/// SplitMix64 output function (Stafford's Mix13).
#[inline]
pub fn mix64(mut x: u64) -> u64 {
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

#[inline]
pub fn subkey(seed: HashSeed, domain: u64, index: u64) -> u64 {
    mix64(mix64(seed.0 ^ domain).wrapping_add(GOLDEN.wrapping_mul(index.wrapping_add(1))))
}

/// Top 53 bits scaled into `[0, 1)`, with zero lifted to `2^-54` so the
/// result is strictly inside `(0, 1)`.
#[inline]
pub fn unit_from_word(word: u64) -> f64 {
    let t = (word >> 11) as f64 * UNIT_SCALE;
    if t == 0.0 {
        UNIT_FLOOR
    } else {
        t
    }
}

/// Fixed-point range reduction of a 64-bit word onto `[0, k)`.
#[inline]
pub fn reduce(word: u64, k: u32) -> u32 {
    ((word as u128 * k as u128) >> 64) as u32
}

/// An item reduced to its seeded 64-bit digest. Hashing the bytes once and
/// deriving every lane from the digest keeps full replication at one pass
/// over the item.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ItemHash(u64);

impl ItemHash {
    #[inline]
    pub fn new(item: &[u8], seed: HashSeed) -> Self {
        ItemHash(xxh3_64_with_seed(item, seed.0))
    }

    pub fn digest(self) -> u64 {
        self.0
    }

    #[inline]
    pub fn lane_unit(self, seed: HashSeed, lane: u64) -> f64 {
        unit_from_word(mix64(self.0 ^ subkey(seed, DOMAIN_LANE, lane)))
    }

    #[inline]
    pub fn bucket(self, seed: HashSeed, k: u32) -> u32 {
        reduce(mix64(self.0 ^ subkey(seed, DOMAIN_BUCKET, 0)), k)
    }
}

/// The `lane`-th independent hash of `item` onto `(0, 1)`. Lane 0 is the
/// value hash used by the stochastic-averaging variants.
pub fn hash_to_unit(item: &[u8], seed: HashSeed, lane: u64) -> f64 {
    ItemHash::new(item, seed).lane_unit(seed, lane)
}

/// Bucket of `item` among `k` buckets; `k` need not be a power of two.
pub fn bucket_of(item: &[u8], k: u32, seed: HashSeed) -> u32 {
    assert!(k >= 1, "bucket_of requires k >= 1");
    ItemHash::new(item, seed).bucket(seed, k)
}

/// Uniform used to initialize register `i` of a stochastic-averaging sketch.
/// A function of `(i, seed)` only, so equal configurations start equal.
pub fn bucket_init_uniform(i: u32, seed: HashSeed) -> f64 {
    unit_from_word(subkey(seed, DOMAIN_INIT, i as u64))
}

/// Rounding shift `c_i` in `[0, 1)` for register `i` of a discretized sketch.
pub fn bucket_shift(i: u32, seed: HashSeed) -> f64 {
    (subkey(seed, DOMAIN_SHIFT, i as u64) >> 11) as f64 * UNIT_SCALE
}
