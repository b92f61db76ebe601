//! Seed derivation.
//!
//! One global seed fans out into independent substreams. A substream seed is
//! a SplitMix64 chain over the global seed, an FNV-1a hash of the component
//! name, and any number of integer indices (network index, generation, ...).
//! Streams therefore depend only on their own labels: adding a network or a
//! component never shifts the stream of another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        h ^= *b as u64;
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

pub fn derive_seed(seed: u64, component: &str, indices: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ fnv1a(component.as_bytes()));
    for &i in indices {
        h = splitmix64(h ^ splitmix64(i));
    }
    h
}

pub fn substream(seed: u64, component: &str, indices: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, component, indices))
}
