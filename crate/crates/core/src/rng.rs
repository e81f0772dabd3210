//! Seeded random streams.
//!
//! All randomness comes from ChaCha8 (`rand_chacha::ChaCha8Rng`), a
//! counter-based generator. A `(seed, purpose, index)` triple selects an
//! independent stream through ChaCha's 64-bit stream id, so a row can be
//! generated without touching any other row's draws. Serial and parallel
//! generation therefore produce identical output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for; occupies the top byte of the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Theta = 1,
    Items = 2,
    Mask = 3,
    Responses = 4,
    Init = 5,
    Folds = 6,
}

/// Stream for entity `index` (a person or item row) of the given purpose.
pub fn substream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    debug_assert!(index < 1 << 56);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 56) | index);
    rng
}
