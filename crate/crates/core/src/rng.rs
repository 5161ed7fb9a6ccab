//! Seed derivation.
//!
//! Every run has one master seed. Randomness for a given `(task, purpose)` pair
//! comes from its own ChaCha stream: the generator is keyed by the master seed
//! and the 64-bit stream id is `task << 8 | purpose`. Streams never overlap, so
//! adding a consumer for one purpose leaves every other stream untouched, and a
//! single task can be replayed without running the tasks before it.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// What a random stream is used for.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum Purpose {
    /// Drawing the active kernel set of a synthetic environment.
    Support = 1,
    /// Drawing the reward coefficients of one task.
    Coefficients = 2,
    /// Observation noise of one task.
    Noise = 3,
    /// Forced-exploration actions of one task.
    Exploration = 4,
    /// Offline (non-interactive) design points of one task.
    Design = 5,
}

/// Generator for `purpose` within `task` under `master`.
pub fn substream(master: u64, task: u64, purpose: Purpose) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream((task << 8) | purpose as u64);
    rng
}
