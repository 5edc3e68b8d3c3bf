//! Named, independently seeded random streams.
//!
//! Every source of stochasticity in a run (environment resets, policy
//! sampling, decoder noise, replay sampling, network init) draws from its
//! own ChaCha stream derived from one master seed. Streams never interact,
//! so disabling one consumer (e.g. the feedback channel) cannot shift the
//! draws seen by any other.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// The purpose a random stream serves. Each purpose maps to a fixed ChaCha
/// stream id, so the mapping is stable across runs and versions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    /// Scene randomization and environment resets.
    Env,
    /// Policy action sampling and update-time reparameterization noise.
    Policy,
    /// Simulated decoder (observer) noise.
    Decoder,
    /// Replay buffer minibatch sampling.
    Buffer,
    /// Network parameter initialization.
    Init,
    /// Evaluation episode scene seeds.
    Eval,
}

impl StreamKind {
    fn stream_id(self) -> u64 {
        match self {
            StreamKind::Env => 1,
            StreamKind::Policy => 2,
            StreamKind::Decoder => 3,
            StreamKind::Buffer => 4,
            StreamKind::Init => 5,
            StreamKind::Eval => 6,
        }
    }
}

/// Derive the stream for `kind` from a master seed.
pub fn derive_stream(master_seed: u64, kind: StreamKind) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(master_seed);
    rng.set_stream(kind.stream_id());
    rng
}

/// FNV-1a over a byte string; used to fold experiment cell coordinates into
/// a seed deterministically.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x100000001b3);
    }
    h
}

/// Master seed for one experiment cell.
///
/// Deliberately a function of `(master_seed, seed_index)` only: the sparse
/// baseline and every feedback-weighted variant at the same seed index share
/// environment and policy streams, so comparisons between them are paired.
pub fn cell_seed(master_seed: u64, seed_index: u32) -> u64 {
    fnv1a(&[&master_seed.to_le_bytes()[..], &seed_index.to_le_bytes()[..]].concat())
}

/// Scene seed for one evaluation episode; independent of training-stream
/// consumption so evaluation never perturbs training randomness.
pub fn eval_seed(master_seed: u64, eval_index: u32, episode: u32) -> u64 {
    fnv1a(
        &[
            &master_seed.to_le_bytes()[..],
            b"eval",
            &eval_index.to_le_bytes()[..],
            &episode.to_le_bytes()[..],
        ]
        .concat(),
    )
}

/// Seed for a cell's decoder stream; unlike [`cell_seed`] this folds in the
/// subject, so different observers produce different noise sequences while
/// leaving all other streams untouched.
pub fn decoder_seed(master_seed: u64, seed_index: u32, subject_id: &str) -> u64 {
    fnv1a(
        &[
            &master_seed.to_le_bytes()[..],
            &seed_index.to_le_bytes()[..],
            subject_id.as_bytes(),
        ]
        .concat(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn streams_are_independent_and_reproducible() {
        let mut a = derive_stream(7, StreamKind::Policy);
        let mut b = derive_stream(7, StreamKind::Policy);
        let mut c = derive_stream(7, StreamKind::Decoder);
        let xs: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let ys: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        let zs: Vec<u64> = (0..8).map(|_| c.next_u64()).collect();
        assert_eq!(xs, ys);
        assert_ne!(xs, zs);
    }

    #[test]
    fn cell_seed_ignores_nothing_it_should_use() {
        assert_ne!(cell_seed(0, 0), cell_seed(0, 1));
        assert_ne!(cell_seed(0, 0), cell_seed(1, 0));
        assert_eq!(cell_seed(42, 3), cell_seed(42, 3));
    }

    #[test]
    fn decoder_seed_distinguishes_subjects() {
        assert_ne!(decoder_seed(0, 0, "s01"), decoder_seed(0, 0, "s02"));
        assert_eq!(decoder_seed(0, 0, "s01"), decoder_seed(0, 0, "s01"));
    }
}
