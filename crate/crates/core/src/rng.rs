//! Seeded random streams. One master seed; independent runs and replicas
//! draw from numbered ChaCha streams so results do not depend on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// Stream `index` of the master seed.
pub fn stream(master: u64, index: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(index);
    rng
}

/// Stream index for replica `replica` of a labelled sub-experiment.
pub fn substream(label: u32, replica: u64) -> u64 {
    ((label as u64) << 40) | (replica & ((1 << 40) - 1))
}
