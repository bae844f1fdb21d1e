//! Counter-based random streams.
//!
//! Every random draw in the crate is addressed by `(seed, stream, position)`:
//! the seed selects a ChaCha key, the stream id selects an independent
//! keystream (one per replicate or per Gaussian draw), and the position is the
//! word offset inside it. Replicates therefore never share state and can be run
//! in any order or on any thread.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

pub type StreamRng = ChaCha8Rng;

/// Keystream `stream` under key `seed`, positioned at its start.
pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Keystream positioned `word` 32-bit words into stream `stream`.
pub fn stream_at(seed: u64, stream_id: u64, word: u128) -> StreamRng {
    let mut rng = stream(seed, stream_id);
    rng.set_word_pos(word);
    rng
}

/// Derive an independent key for a named purpose, so that e.g. the sampler of
/// a second series and the Gaussian limit draws never reuse the data keystreams.
pub fn derive_seed(seed: u64, purpose: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(purpose.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}
