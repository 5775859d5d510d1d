//! Seeded, splittable random sources.
//!
//! Every run takes one `u64` seed. Each consumer of randomness (a worker's
//! data sampling, its gossip coin flips, the scheduler, the initializer, the
//! dataset generator) gets its own counter-addressed stream of the same seed,
//! so components draw independently: one component consuming more randomness
//! never shifts what another component sees.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Well-known stream ids. Worker streams count up from zero; singleton
/// streams count down from `u64::MAX` so the two ranges can never collide.
pub mod streams {
    /// Stream for worker `i`'s data-sampling draws.
    pub fn data(worker: usize) -> u64 {
        2 * worker as u64
    }

    /// Stream for worker `i`'s gossip draws (push coin, peer choice).
    pub fn gossip(worker: usize) -> u64 {
        2 * worker as u64 + 1
    }

    /// Sequential-simulation scheduler.
    pub const SCHEDULER: u64 = u64::MAX;
    /// Shared parameter initialization.
    pub const INIT: u64 = u64::MAX - 1;
    /// Synthetic dataset generation.
    pub const DATAGEN: u64 = u64::MAX - 2;
    /// Synthetic quadratic target.
    pub const TARGET: u64 = u64::MAX - 3;
}

/// A deterministic RNG identified by `(seed, stream)`.
#[derive(Clone, Debug)]
pub struct RandomSource {
    rng: ChaCha8Rng,
}

impl RandomSource {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        RandomSource { rng }
    }

    /// One biased coin flip: true with probability `p`.
    ///
    /// Always consumes exactly one `f64` draw, including at `p = 0` and
    /// `p = 1`, so the stream position doesn't depend on the probability.
    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.rng.gen::<f64>() < p
    }

    /// Uniform element of `0..n` excluding `me`. Requires `n >= 2`.
    ///
    /// Single draw from `0..n-1`, then shift past `me`: uniform over the
    /// remaining `n - 1` values with exactly one consumed sample.
    pub fn uniform_peer(&mut self, me: usize, n: usize) -> usize {
        debug_assert!(n >= 2, "uniform_peer needs at least two parties");
        debug_assert!(me < n);
        let raw = self.rng.gen_range(0..n - 1);
        if raw >= me {
            raw + 1
        } else {
            raw
        }
    }

    /// Uniform index in `0..n`.
    pub fn index(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        self.rng.gen_range(0..n)
    }

    /// Uniform real in `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        self.rng.gen_range(lo..hi)
    }

    /// Standard normal via Box-Muller (two uniform draws per call).
    pub fn standard_normal(&mut self) -> f64 {
        // Guard the log: gen::<f64>() is in [0, 1), so flip to (0, 1].
        let u1 = 1.0 - self.rng.gen::<f64>();
        let u2 = self.rng.gen::<f64>();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * std::f64::consts::PI * u2)
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.rng.gen_range(0..=i);
            items.swap(i, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream_agree() {
        let mut a = RandomSource::new(42, 7);
        let mut b = RandomSource::new(42, 7);
        for _ in 0..100 {
            assert_eq!(a.uniform(0.0, 1.0).to_bits(), b.uniform(0.0, 1.0).to_bits());
        }
    }

    #[test]
    fn different_streams_differ() {
        let mut a = RandomSource::new(42, 0);
        let mut b = RandomSource::new(42, 1);
        let draws_a: Vec<u64> = (0..8).map(|_| a.uniform(0.0, 1.0).to_bits()).collect();
        let draws_b: Vec<u64> = (0..8).map(|_| b.uniform(0.0, 1.0).to_bits()).collect();
        assert_ne!(draws_a, draws_b);
    }

    #[test]
    fn bernoulli_extremes() {
        let mut r = RandomSource::new(1, 0);
        for _ in 0..1000 {
            assert!(!r.bernoulli(0.0));
        }
        for _ in 0..1000 {
            assert!(r.bernoulli(1.0));
        }
    }

    #[test]
    fn bernoulli_frequency_near_half() {
        let mut r = RandomSource::new(7, 3);
        let hits = (0..100_000).filter(|_| r.bernoulli(0.5)).count();
        let freq = hits as f64 / 100_000.0;
        assert!((0.49..=0.51).contains(&freq), "freq = {freq}");
    }

    #[test]
    fn uniform_peer_excludes_self_and_is_balanced() {
        let n = 8;
        let me = 3;
        let mut r = RandomSource::new(11, 5);
        let mut counts = vec![0usize; n];
        let draws = 80_000;
        for _ in 0..draws {
            let peer = r.uniform_peer(me, n);
            assert_ne!(peer, me);
            counts[peer] += 1;
        }
        let expect = 1.0 / (n - 1) as f64;
        for (peer, &c) in counts.iter().enumerate() {
            if peer == me {
                assert_eq!(c, 0);
                continue;
            }
            let freq = c as f64 / draws as f64;
            assert!(
                (freq - expect).abs() < 0.01,
                "peer {peer}: freq {freq} vs {expect}"
            );
        }
    }

    #[test]
    fn uniform_peer_two_parties() {
        let mut r = RandomSource::new(3, 9);
        for _ in 0..100 {
            assert_eq!(r.uniform_peer(0, 2), 1);
            assert_eq!(r.uniform_peer(1, 2), 0);
        }
    }

    #[test]
    fn standard_normal_moments() {
        let mut r = RandomSource::new(19, 2);
        let n = 100_000;
        let samples: Vec<f64> = (0..n).map(|_| r.standard_normal()).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|s| (s - mean) * (s - mean)).sum::<f64>() / n as f64;
        assert!(mean.abs() < 0.02, "mean = {mean}");
        assert!((var - 1.0).abs() < 0.03, "var = {var}");
    }

    #[test]
    fn shuffle_is_a_permutation() {
        let mut r = RandomSource::new(5, 1);
        let mut items: Vec<usize> = (0..50).collect();
        r.shuffle(&mut items);
        let mut sorted = items.clone();
        sorted.sort_unstable();
        assert_eq!(sorted, (0..50).collect::<Vec<_>>());
    }

    #[test]
    fn worker_streams_never_collide_with_singletons() {
        for i in 0..1024 {
            assert!(streams::data(i) < streams::TARGET);
            assert!(streams::gossip(i) < streams::TARGET);
        }
        assert_ne!(streams::SCHEDULER, streams::INIT);
        assert_ne!(streams::INIT, streams::DATAGEN);
        assert_ne!(streams::DATAGEN, streams::TARGET);
    }
}
