//! Stable hashing for seed derivation and content ids.
//!
//! FNV-1a folded through a SplitMix64 finalizer. The values are part of the
//! on-disk reproducibility contract, so they must never change between
//! releases.

pub struct Fnv64(u64);

impl Fnv64 {
    pub const fn new() -> Self {
        Fnv64(0xcbf2_9ce4_8422_2325)
    }

    pub fn write(&mut self, bytes: &[u8]) {
        for &b in bytes {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }

    pub fn finish(&self) -> u64 {
        splitmix64(self.0)
    }
}

impl Default for Fnv64 {
    fn default() -> Self {
        Self::new()
    }
}

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-item seed from a global seed and a stable key (document id, tool
/// name, ...).
pub fn derive_seed(global: u64, key: &str) -> u64 {
    let mut h = Fnv64::new();
    h.write(&global.to_le_bytes());
    h.write(key.as_bytes());
    h.finish()
}

/// Deterministic uniform draw in `[0, 1)` for a (seed, key) pair.
pub fn unit_draw(global: u64, key: &str) -> f64 {
    (derive_seed(global, key) >> 11) as f64 / (1u64 << 53) as f64
}
