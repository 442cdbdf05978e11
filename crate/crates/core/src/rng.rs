//! Seeded random streams.
//!
//! Every stochastic component takes an explicit stream derived from the
//! master seed and a path of identifiers, so results never depend on thread
//! scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Random stream used throughout the crate.
pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// A component of a seed derivation path.
#[derive(Debug, Clone, Copy)]
pub enum SeedPart<'a> {
    Index(u64),
    Label(&'a str),
}

impl From<u64> for SeedPart<'_> {
    fn from(v: u64) -> Self {
        SeedPart::Index(v)
    }
}

impl From<usize> for SeedPart<'_> {
    fn from(v: usize) -> Self {
        SeedPart::Index(v as u64)
    }
}

impl<'a> From<&'a str> for SeedPart<'a> {
    fn from(v: &'a str) -> Self {
        SeedPart::Label(v)
    }
}

/// Derives a child seed from `master` and a path. Stable across platforms
/// and releases (no dependence on std's hasher).
pub fn derive_seed(master: u64, path: &[SeedPart<'_>]) -> u64 {
    let mut h = splitmix64(master);
    for part in path {
        match part {
            SeedPart::Index(i) => {
                h = splitmix64(h ^ 0x1F);
                h = splitmix64(h ^ i);
            }
            SeedPart::Label(s) => {
                h = splitmix64(h ^ 0x2B);
                for chunk in s.as_bytes().chunks(8) {
                    let mut buf = [0u8; 8];
                    buf[..chunk.len()].copy_from_slice(chunk);
                    h = splitmix64(h ^ u64::from_le_bytes(buf));
                }
                h = splitmix64(h ^ s.len() as u64);
            }
        }
    }
    h
}

/// Stream seeded from `derive_seed(master, path)`.
pub fn stream(master: u64, path: &[SeedPart<'_>]) -> Rng {
    Rng::seed_from_u64(derive_seed(master, path))
}

/// Stream seeded directly from a `u64`.
pub fn from_seed(seed: u64) -> Rng {
    Rng::seed_from_u64(seed)
}
