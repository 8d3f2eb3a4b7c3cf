//! Named random streams derived from one master seed.
//!
//! Every consumer (object placement, each client's walk, each channel's
//! backoff) gets its own generator keyed by (master, domain, id). Streams
//! are independent of unrelated config, so e.g. client 3 walks the same
//! path whether the run has 10 clients or 40, which is what makes
//! cross-cell comparisons pathwise fair.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub fn derive_seed(master: u64, domain: &str, id: u64) -> u64 {
    let mut h = splitmix64(master);
    for &b in domain.as_bytes() {
        h = splitmix64(h ^ u64::from(b));
    }
    splitmix64(h ^ id)
}

pub fn stream_rng(master: u64, domain: &str, id: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(master, domain, id))
}
