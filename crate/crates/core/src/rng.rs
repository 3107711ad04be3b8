//! Seeded random streams.
//!
//! Every random decision in a pipeline is drawn from a ChaCha stream keyed by
//! `(seed, purpose)` and selected by a stream index (usually the record
//! index), so results do not depend on processing order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// What a stream is used for. Distinct purposes never share keystream.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Perturb = 1,
    ClientParams = 2,
    Synthetic = 3,
    Test = 0xff,
}

pub fn stream(seed: u64, purpose: Purpose, index: u64) -> ChaCha20Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&(purpose as u64).to_le_bytes());
    let mut rng = ChaCha20Rng::from_seed(key);
    rng.set_stream(index);
    rng
}

/// Uniform draw on `(0, 1]`, the range the inverse-CDF walk expects.
pub fn open_closed_unit<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.gen::<f64>()
}
