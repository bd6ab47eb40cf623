//! Hierarchical seed derivation.
//!
//! Every random stream in the simulator is keyed by the scenario seed, a
//! component label and a list of integer indices:
//!
//! ```text
//! h0 = FNV-1a-64(label bytes)
//! h  = splitmix64(master ^ h0)
//! for i in indices: h = splitmix64(h ^ splitmix64(i + 1))
//! ```
//!
//! The derived value seeds a ChaCha8 generator. Because a stream depends only
//! on its own key, adding a sweep point or reordering parallel work never
//! perturbs any other stream.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| {
        (h ^ u64::from(b)).wrapping_mul(FNV_PRIME)
    })
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, label: &str, indices: &[u64]) -> u64 {
    let mut h = splitmix64(master ^ fnv1a(label.as_bytes()));
    for &i in indices {
        h = splitmix64(h ^ splitmix64(i.wrapping_add(1)));
    }
    h
}

pub fn rng_for(master: u64, label: &str, indices: &[u64]) -> SimRng {
    SimRng::seed_from_u64(derive_seed(master, label, indices))
}
