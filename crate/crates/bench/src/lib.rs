//! Fixtures shared by the benchmarks.

use linkforge_core::editing::pair_weight;
use linkforge_core::rng::{stream_rng, Stream};
use linkforge_core::{Cutoff, EditingInstance};
use rand::Rng;

/// A component of `n` entities in planted groups of `group` with noisy
/// probabilities: within-group pairs score high, others low, and a
/// fraction `flip` of pairs is scored on the wrong side.
pub fn noisy_component(n: usize, group: usize, flip: f64, seed: u64) -> EditingInstance {
    let mut rng = stream_rng(seed, Stream::Sampling);
    let theta = Cutoff::new(0.5).expect("valid cutoff");
    EditingInstance::from_fn(n, |i, j| {
        let same = i / group == j / group;
        let agree = !rng.random_bool(flip);
        let p = if same == agree {
            rng.random_range(0.55..0.99)
        } else {
            rng.random_range(0.01..0.45)
        };
        pair_weight(p, theta).expect("p inside (0, 1)")
    })
}
