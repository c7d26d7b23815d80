//! Counter-based random substreams.
//!
//! Every random draw in an experiment comes from a ChaCha8 generator seeded
//! with the experiment's master seed and positioned on a stream number built
//! from `(purpose, snr index, realization index)`. Trials therefore never
//! share state and can be evaluated in any order or in parallel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// What a substream is used for. Occupies the top byte of the stream number.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Matrix = 1,
    Symbols = 2,
    Noise = 3,
    Benchmark = 4,
    SelfCheck = 5,
}

const REALIZATION_BITS: u32 = 40;
const SNR_BITS: u32 = 16;

/// Builds the generator for one `(purpose, snr_index, realization)` cell.
///
/// Stream layout: `purpose << 56 | snr_index << 40 | realization`.
pub fn substream(master_seed: u64, purpose: Purpose, snr_index: u64, realization: u64) -> SimRng {
    assert!(snr_index < (1 << SNR_BITS), "snr index out of range");
    assert!(realization < (1 << REALIZATION_BITS), "realization index out of range");
    let stream = ((purpose as u64) << (REALIZATION_BITS + SNR_BITS))
        | (snr_index << REALIZATION_BITS)
        | realization;
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream);
    rng
}

/// Plain seeded generator for one-off use (CLI detect, tests).
pub fn seeded(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}
