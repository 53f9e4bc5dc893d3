use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Seed plus a stream counter. Every call to [`RngState::stream`] hands out a
/// fresh ChaCha stream, so identical `(seed, counter)` pairs replay identical draws.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RngState {
    seed: u64,
    counter: u64,
}

impl RngState {
    pub fn new(seed: u64) -> Self {
        RngState { seed, counter: 0 }
    }

    pub fn with_counter(seed: u64, counter: u64) -> Self {
        RngState { seed, counter }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn counter(&self) -> u64 {
        self.counter
    }

    pub fn stream(&mut self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.counter);
        self.counter += 1;
        rng
    }
}
