use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use super::subset::{sample_subset, SubsetSpec};
use crate::error::{Error, Result};
use crate::qcore::StateVector;
use crate::rng::Rng;
use crate::C64;

/// One oracle instance: a subset per `lambda` plus per-`lambda` query counters.
///
/// Counters are atomic so a shared environment can be queried from several
/// threads; they only ever increase.
#[derive(Debug, Default)]
pub struct OracleEnv {
    specs: BTreeMap<u32, SubsetSpec>,
    axes: BTreeMap<u32, StateVector>,
    counters: BTreeMap<u32, AtomicU64>,
}

impl Clone for OracleEnv {
    fn clone(&self) -> Self {
        OracleEnv {
            specs: self.specs.clone(),
            axes: self.axes.clone(),
            counters: self
                .counters
                .iter()
                .map(|(l, c)| (*l, AtomicU64::new(c.load(Ordering::Relaxed))))
                .collect(),
        }
    }
}

impl OracleEnv {
    pub fn new() -> OracleEnv {
        OracleEnv::default()
    }

    pub fn from_specs(specs: impl IntoIterator<Item = SubsetSpec>) -> OracleEnv {
        let mut env = OracleEnv::new();
        for s in specs {
            env.insert(s);
        }
        env
    }

    /// Draws an independent random subset for each `lambda`.
    pub fn sample(lambdas: &[u32], rng: &mut Rng) -> Result<OracleEnv> {
        let mut env = OracleEnv::new();
        for &l in lambdas {
            env.insert(sample_subset(l, rng)?);
        }
        Ok(env)
    }

    /// Registers `spec`, replacing any previous subset for its `lambda`.
    pub fn insert(&mut self, spec: SubsetSpec) {
        let l = spec.lambda();
        self.axes.insert(l, spec.axis());
        self.specs.insert(l, spec);
        self.counters.entry(l).or_insert_with(|| AtomicU64::new(0));
    }

    pub fn spec(&self, lambda: u32) -> Result<&SubsetSpec> {
        self.specs.get(&lambda).ok_or(Error::MissingSpec(lambda))
    }

    /// `|1>|S_lambda->`.
    pub fn axis(&self, lambda: u32) -> Result<&StateVector> {
        self.axes.get(&lambda).ok_or(Error::MissingSpec(lambda))
    }

    pub fn lambdas(&self) -> Vec<u32> {
        self.specs.keys().copied().collect()
    }

    pub fn queries(&self, lambda: u32) -> u64 {
        self.counters
            .get(&lambda)
            .map(|c| c.load(Ordering::Relaxed))
            .unwrap_or(0)
    }

    pub fn total_queries(&self) -> u64 {
        self.counters.values().map(|c| c.load(Ordering::Relaxed)).sum()
    }

    pub fn query_counts(&self) -> BTreeMap<u32, u64> {
        self.counters
            .iter()
            .map(|(l, c)| (*l, c.load(Ordering::Relaxed)))
            .collect()
    }

    /// Accounts for `count` queries made outside [`OracleEnv::apply`], e.g. by
    /// bulk resource generation that samples attempt counts directly.
    pub fn record_queries(&self, lambda: u32, count: u64) -> Result<()> {
        self.counters
            .get(&lambda)
            .ok_or(Error::MissingSpec(lambda))?
            .fetch_add(count, Ordering::Relaxed);
        Ok(())
    }

    /// `U_S = I - 2|1,S-><1,S-|` on `targets` (control first), in place.
    pub fn apply(&self, state: &mut StateVector, lambda: u32, targets: &[usize]) -> Result<()> {
        let n = state.num_qubits();
        self.apply_amplitudes(state.amplitudes_mut(), n, 1, lambda, targets)
    }

    pub(crate) fn apply_amplitudes(
        &self,
        amps: &mut [C64],
        n: usize,
        inner: usize,
        lambda: u32,
        targets: &[usize],
    ) -> Result<()> {
        let spec = self.spec(lambda)?;
        let expected = spec.lambda() as usize + 1;
        if targets.len() != expected {
            return Err(Error::OracleArity {
                lambda,
                expected,
                found: targets.len(),
            });
        }
        // rank-1 update on the control=1 branch, about |S-> on the data qubits
        let s_minus = &self.axes[&lambda].amplitudes()[1 << lambda..];
        crate::qcore::kernel::reflect_rank1(
            amps,
            n,
            inner,
            s_minus,
            &targets[1..],
            Some((targets[0], true)),
        )?;
        self.counters[&lambda].fetch_add(1, Ordering::Relaxed);
        Ok(())
    }
}

/// Functional form of [`OracleEnv::apply`].
pub fn apply_oracle(
    state: &StateVector,
    env: &OracleEnv,
    lambda: u32,
    targets: &[usize],
) -> Result<StateVector> {
    let mut out = state.clone();
    env.apply(&mut out, lambda, targets)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::gates;
    use proptest::prelude::*;
    use crate::rng::Rng;

    fn env2() -> OracleEnv {
        OracleEnv::from_specs([SubsetSpec::from_strs(2, &["01", "10"]).unwrap()])
    }

    #[test]
    fn maps_one_zero_to_one_s() {
        let env = env2();
        let input = StateVector::basis(3, 0b100).unwrap();
        let out = apply_oracle(&input, &env, 2, &[0, 1, 2]).unwrap();
        let expect = StateVector::basis(1, 1)
            .unwrap()
            .tensor(&env.spec(2).unwrap().states().s)
            .unwrap();
        assert!(out.fidelity(&expect).unwrap() > 1.0 - 1e-12);
        assert_eq!(env.queries(2), 1);
    }

    #[test]
    fn identity_off_the_axis() {
        let env = env2();
        for x in 0..4 {
            let input = StateVector::basis(3, x).unwrap();
            assert!(apply_oracle(&input, &env, 2, &[0, 1, 2]).unwrap().max_abs_diff(&input) < 1e-15);
        }
        // control 1, x = 11 is outside S and not 00
        let input = StateVector::basis(3, 0b111).unwrap();
        assert!(apply_oracle(&input, &env, 2, &[0, 1, 2]).unwrap().max_abs_diff(&input) < 1e-15);
    }

    #[test]
    fn arity_and_missing_spec() {
        let env = env2();
        let s = StateVector::zero(5).unwrap();
        assert!(matches!(
            apply_oracle(&s, &env, 2, &[0, 1]).unwrap_err(),
            Error::OracleArity { .. }
        ));
        assert_eq!(
            apply_oracle(&s, &env, 4, &[0, 1, 2, 3, 4]).unwrap_err(),
            Error::MissingSpec(4)
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn matches_materialized_reflection(seed in any::<u64>(), lambda in prop::sample::select(vec![2u32, 4])) {
            let mut rng = Rng::from_seed(seed);
            let env = OracleEnv::sample(&[lambda], &mut rng).unwrap();
            let n = lambda as usize + 2;
            let s = StateVector::random(n, &mut rng).unwrap();
            let targets: Vec<usize> = (1..n).rev().collect();
            let fast = apply_oracle(&s, &env, lambda, &targets).unwrap();
            let m = gates::reflection(env.axis(lambda).unwrap().amplitudes());
            let slow = s.apply_unitary(&m, &targets).unwrap();
            prop_assert!(fast.max_abs_diff(&slow) < 1e-9);
            prop_assert!((fast.norm() - 1.0).abs() < 1e-10);
            let back = apply_oracle(&fast, &env, lambda, &targets).unwrap();
            prop_assert!(back.max_abs_diff(&s) < 1e-9);
            prop_assert_eq!(env.queries(lambda), 2);
        }
    }
}
