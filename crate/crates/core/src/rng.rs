//! Counter-addressed random streams.
//!
//! Every path owns a ChaCha8 stream selected by its index, so results do not
//! depend on how paths are distributed over workers. Brownian-bridge
//! refinement draws come from a second key and are addressed by
//! (path, step, node), which lets a path be refined anywhere without
//! disturbing the coarse increments.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BRIDGE_SALT: u64 = 0x5be0_cd19_137e_2179;

/// Sequential stream for path `index` of a run keyed by `seed`.
pub fn path_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Random-access normals for Brownian-bridge midpoints of one path.
#[derive(Clone)]
pub struct BridgeNormals {
    rng: ChaCha8Rng,
}

impl BridgeNormals {
    pub fn new(seed: u64, path: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ BRIDGE_SALT);
        rng.set_stream(path);
        BridgeNormals { rng }
    }

    /// Standard normal attached to node `node` (heap numbering, root 1) of the
    /// refinement tree of coarse step `step`.
    pub fn normal(&mut self, step: u64, node: u64) -> f64 {
        debug_assert!(node < 1 << 32 && step < 1 << 32);
        let counter = ((step as u128) << 32) | node as u128;
        self.rng.set_word_pos(counter << 2);
        let u1 = unit_open(self.rng.next_u64());
        let u2 = unit_open(self.rng.next_u64());
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}

/// Uniform on (0, 1] from the top 53 bits.
fn unit_open(bits: u64) -> f64 {
    ((bits >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Splits a seed into an independent seed for a sub-experiment.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::MAX - tag);
    rng.next_u64()
}
