use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Bits reserved for the worker index inside a ChaCha stream id.
const WORKER_BITS: u32 = 24;

/// Derives independent noise streams from a single 64-bit run seed.
///
/// Every `(worker, round)` pair owns its own ChaCha8 stream, so the noise a
/// worker sees at local step `j` of round `t` does not depend on how many
/// draws other workers (or other rounds) consumed. Synchronous and
/// asynchronous schedules therefore see identical noise for identical
/// logical gradients.
#[derive(Clone, Debug)]
pub struct NoiseSource {
    key: [u8; 32],
}

impl NoiseSource {
    pub fn new(seed: u64) -> Self {
        let mut expand = ChaCha8Rng::seed_from_u64(seed);
        let mut key = [0u8; 32];
        expand.fill(&mut key);
        Self { key }
    }

    /// Opens the stream of `worker` for `round`, positioned at draw 0.
    pub fn cursor(&self, worker: usize, round: u64) -> StreamCursor {
        self.cursor_on(worker, worker, round)
    }

    /// Opens stream `stream` of `round` on behalf of `worker`. Used to
    /// relabel workers while keeping their noise.
    pub(crate) fn cursor_on(&self, worker: usize, stream: usize, round: u64) -> StreamCursor {
        assert!(
            (stream as u64) < (1u64 << WORKER_BITS),
            "stream index {stream} exceeds stream layout"
        );
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream((round << WORKER_BITS) | stream as u64);
        StreamCursor {
            worker,
            round,
            draw: 0,
            rng,
        }
    }
}

/// Position inside one worker's noise stream.
///
/// Cloning a cursor and drawing from both copies yields identical samples.
#[derive(Clone, Debug)]
pub struct StreamCursor {
    worker: usize,
    round: u64,
    draw: u64,
    rng: ChaCha8Rng,
}

impl StreamCursor {
    pub fn worker(&self) -> usize {
        self.worker
    }

    pub fn round(&self) -> u64 {
        self.round
    }

    /// Index of the next draw in this stream.
    pub fn position(&self) -> u64 {
        self.draw
    }

    pub(crate) fn advance(&mut self) -> u64 {
        let id = self.draw;
        self.draw += 1;
        id
    }

    pub(crate) fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    pub(crate) fn index_below(&mut self, bound: usize) -> usize {
        self.rng.random_range(0..bound)
    }
}
