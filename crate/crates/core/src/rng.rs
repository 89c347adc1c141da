use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// Seeded random stream. Each trial of an experiment gets its own stream via
/// [`Rng::for_trial`], so results never depend on scheduling order.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    stream: u64,
    inner: ChaCha12Rng,
}

impl Rng {
    pub fn from_seed(seed: u64) -> Rng {
        Rng::for_trial(seed, 0)
    }

    /// Independent stream number `trial` under `seed`.
    pub fn for_trial(seed: u64, trial: u64) -> Rng {
        let mut inner = ChaCha12Rng::seed_from_u64(seed);
        inner.set_stream(trial);
        Rng {
            seed,
            stream: trial,
            inner,
        }
    }

    /// Child stream keyed by the next output of this one.
    pub fn fork(&mut self) -> Rng {
        let child = self.inner.next_u64();
        Rng::for_trial(child, 0)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform real in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n`.
    pub fn below(&mut self, n: usize) -> usize {
        use rand::Rng as _;
        self.inner.random_range(0..n)
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn coin(&mut self) -> bool {
        self.inner.next_u32() & 1 == 1
    }

    /// Number of successes in `n` independent Bernoulli(`p`) trials.
    pub fn binomial(&mut self, n: u64, p: f64) -> u64 {
        use rand_distr::{Binomial, Distribution};
        let p = p.clamp(0.0, 1.0);
        Binomial::new(n, p)
            .expect("probability clamped to [0, 1]")
            .sample(&mut self.inner)
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let mut a = Rng::for_trial(7, 3);
        let mut b = Rng::for_trial(7, 3);
        for _ in 0..16 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn trials_are_distinct() {
        let mut a = Rng::for_trial(7, 0);
        let mut b = Rng::for_trial(7, 1);
        assert_ne!(a.next_u64(), b.next_u64());
    }

    #[test]
    fn uniform_in_unit_interval() {
        let mut r = Rng::from_seed(1);
        for _ in 0..1000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
        }
    }
}
