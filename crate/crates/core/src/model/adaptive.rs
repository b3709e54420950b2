//! Adaptive baseline: voxel-window hash buckets with Krichevsky–Trofimov
//! counters.

use rustc_hash::FxHashMap;

use super::{EntropyModel, ModelId, Probability, PROB_ONE};
use crate::context::{HybridContext, VoxelContext, UNKNOWN};

/// `log2` of the number of hash buckets.
pub const HASH_BUCKET_BITS: u32 = 22;
/// Initial state of the context hash.
pub const HASH_SEED: u64 = 0x9c3f_52a1_d06e_b7e5;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Bucket of a voxel window and child index.
///
/// Each cell is packed into two bits (empty 0, occupied 1, unknown 2), 32
/// cells per word in window index order. Starting from [`HASH_SEED`], the
/// state absorbs each word and finally the child index via
/// `h = splitmix64(h ^ word)`; the bucket is the top [`HASH_BUCKET_BITS`]
/// bits of the result.
pub fn hash_context(vox: &VoxelContext, child_index: u8) -> u32 {
    let mut words = [0u64; 2];
    for (i, &c) in vox.cells().iter().enumerate() {
        let code = match c {
            UNKNOWN => 2u64,
            0 => 0,
            _ => 1,
        };
        words[i / 32] |= code << (2 * (i % 32));
    }
    let mut h = HASH_SEED;
    h = splitmix64(h ^ words[0]);
    h = splitmix64(h ^ words[1]);
    h = splitmix64(h ^ child_index as u64);
    (h >> (64 - HASH_BUCKET_BITS)) as u32
}

/// KT estimate `(c1 + 1/2) / (c0 + c1 + 1)` in 1/65536 units, rounded half up.
fn kt_quantized(c0: u32, c1: u32) -> u32 {
    let num = (2 * c1 as u64 + 1) * PROB_ONE as u64;
    let den = 2 * (c0 as u64 + c1 as u64 + 1);
    ((2 * num + den) / (2 * den)) as u32
}

/// Counts live in a sparse map over the `2^22` buckets; untouched buckets
/// read as zero counts.
#[derive(Debug, Clone, Default)]
pub struct AdaptiveModel {
    counts: FxHashMap<u32, [u32; 2]>,
}

impl AdaptiveModel {
    pub fn new() -> Self {
        Self::default()
    }

    /// `(zeros, ones)` observed in a bucket.
    pub fn counts(&self, bucket: u32) -> [u32; 2] {
        self.counts.get(&bucket).copied().unwrap_or([0, 0])
    }

    /// The full counter table, for replay comparisons.
    pub fn snapshot(&self) -> Vec<(u32, [u32; 2])> {
        let mut v: Vec<_> = self.counts.iter().map(|(&k, &c)| (k, c)).collect();
        v.sort_unstable();
        v
    }
}

impl EntropyModel for AdaptiveModel {
    fn id(&self) -> ModelId {
        ModelId::Adaptive
    }

    fn fingerprint(&self) -> u64 {
        0
    }

    fn predict(&mut self, ctx: &HybridContext) -> Probability {
        let [c0, c1] = self.counts(hash_context(&ctx.vox, ctx.key.child_index()));
        Probability::from_quantized(kt_quantized(c0, c1))
    }

    fn update(&mut self, ctx: &HybridContext, bit: bool) {
        let bucket = hash_context(&ctx.vox, ctx.key.child_index());
        let c = self.counts.entry(bucket).or_insert([0, 0]);
        let slot = &mut c[bit as usize];
        *slot = slot.saturating_add(1);
    }
}
