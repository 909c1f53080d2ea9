//! Counter-based random streams.
//!
//! Every stream is a ChaCha8 keystream. The key is derived from the master seed
//! and a lane (what the numbers are used for), the stream id is the replication
//! index. Streams never depend on the order in which they are created, so a
//! replication produces the same numbers on any thread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is consumed by.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Lane {
    /// Observations of group `i`.
    Group(usize),
    /// Index tuples for trace order `k`.
    Indices(u32),
    /// Within-group permutations for trace order `k`.
    Permutations(u32),
    /// Weighted chi-square mixture draws.
    Mixture,
    Aux(u32),
}

impl Lane {
    fn code(self) -> u64 {
        const SHIFT: u32 = 40;
        match self {
            Lane::Group(i) => i as u64,
            Lane::Indices(k) => (1 << SHIFT) | k as u64,
            Lane::Permutations(k) => (2 << SHIFT) | k as u64,
            Lane::Mixture => 3 << SHIFT,
            Lane::Aux(k) => (4 << SHIFT) | k as u64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub replication: u64,
}

impl RngStream {
    pub fn new(seed: u64, replication: u64) -> Self {
        RngStream { seed, replication }
    }

    pub fn rng(&self, lane: Lane) -> ChaCha8Rng {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&self.seed.to_le_bytes());
        key[8..16].copy_from_slice(&lane.code().to_le_bytes());
        key[16..24].copy_from_slice(&splitmix64(self.seed ^ lane.code()).to_le_bytes());
        let mut rng = ChaCha8Rng::from_seed(key);
        rng.set_stream(self.replication);
        rng
    }
}

/// SplitMix64 finalizer, used to derive child seeds.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a list of words into one seed.
pub fn derive_seed(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x243F_6A88_85A3_08D3, |acc, &p| splitmix64(acc ^ splitmix64(p)))
}
