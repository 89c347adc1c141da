use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use super::{OwsgCandidate, ResourceState};
use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::oracle::OracleEnv;
use crate::qcore::StateVector;
use crate::rng::Rng;
use crate::tomography::{gentle_batch_size, gentle_search, Copies, Estimator, FnFamily};

#[derive(Debug, Clone, Serialize)]
pub struct OwsgParams {
    /// Copies of `|1>|S_lambda->` per lambda for one emulated verifier run.
    /// Defaults to `ceil(2 q^2 / slack^2)`.
    pub copies_per_query: Option<usize>,
    /// Emulation slack standing in for `1/kappa`.
    pub slack: f64,
    pub eps: f64,
    pub delta: f64,
    pub estimator: Estimator,
    /// Challenge copies handed to the attacker; defaults to one gentle-search
    /// batch per key.
    pub challenge_copies: Option<usize>,
    /// Attempts allowed per generated `|S_lambda->`.
    pub retry_budget: usize,
}

impl Default for OwsgParams {
    fn default() -> Self {
        OwsgParams {
            copies_per_query: None,
            slack: 0.1,
            eps: 0.5,
            delta: 0.5,
            estimator: Estimator::Exact,
            challenge_copies: None,
            retry_budget: 64,
        }
    }
}

impl OwsgParams {
    pub fn copies_for(&self, queries: usize) -> usize {
        match (self.copies_per_query, queries) {
            (Some(r), _) => r,
            (None, 0) => 0,
            (None, q) => (2.0 * (q * q) as f64 / (self.slack * self.slack)).ceil() as usize,
        }
    }

    pub fn challenge_copies_for(&self, keys: usize) -> usize {
        self.challenge_copies
            .unwrap_or_else(|| keys * gentle_batch_size(keys, self.eps, self.delta))
    }
}

/// Per-run diagnostics of [`owsg_attack`].
#[derive(Debug, Clone, Serialize)]
pub struct OwsgReport {
    pub candidate: String,
    pub key: Bits,
    /// Gentle-search estimates in examination order.
    pub examined: Vec<(Bits, f64)>,
    pub challenge_copies: usize,
    pub copies_used: usize,
    pub copies_per_query: usize,
    pub resource_bundles: usize,
    pub resource_attempts: u64,
    /// Threshold handed to gentle search.
    pub c: f64,
    /// `min(1, 2q/sqrt(r+1))`, 0 without queries.
    pub emulation_bound: f64,
    /// Exact acceptance of the emulated verifier on the challenge.
    pub emulated_accept: f64,
    /// Exact acceptance of the real verifier on the challenge.
    pub real_accept: f64,
}

/// Recovers a key accepted on `challenge` from copies of it.
///
/// Generates copies of `|1>|S_lambda->`, replaces every verifier query by the
/// emulation over `r` of them, and runs gentle search over the emulated
/// verifiers `{V~(k, .)}_k` with threshold `c = 1 - slack_V - bound`, where
/// `bound` is the emulation distance bound. Exact mode generates a single
/// bundle of resources; measured mode one per challenge copy.
pub fn owsg_attack(
    candidate: &OwsgCandidate,
    env: &OracleEnv,
    challenge: &StateVector,
    params: &OwsgParams,
    rng: &mut Rng,
) -> Result<OwsgReport> {
    if !(params.slack > 0.0 && params.slack < 1.0) {
        return Err(Error::InvalidParameter(format!("slack {} outside (0, 1)", params.slack)));
    }
    if challenge.num_qubits() != candidate.state_qubits {
        return Err(Error::DimensionMismatch {
            expected: candidate.state_qubits,
            found: challenge.num_qubits(),
        });
    }
    let q = candidate.query_bound();
    let r = params.copies_for(q);
    if q > 0 && r == 0 {
        return Err(Error::InvalidParameter("an emulated verifier needs at least one copy".into()));
    }
    let keys = candidate.keys().to_vec();
    let t = params.challenge_copies_for(keys.len());
    let bundles = match (q, params.estimator) {
        (0, _) => 0,
        (_, Estimator::Exact) => 1,
        (_, Estimator::Measured) => t,
    };
    let resources = ResourceState::generate(env, candidate.lambdas(), r, bundles, params.retry_budget, rng)?;
    let ell: BTreeMap<u32, usize> = candidate.lambdas().iter().map(|&l| (l, r)).collect();
    let bound = if q == 0 {
        0.0
    } else {
        (2.0 * q as f64 / ((r + 1) as f64).sqrt()).min(1.0)
    };
    let c = (1.0 - candidate.slack - bound).max(0.0);

    let cand = candidate.clone();
    let fenv = env.clone();
    let fell = ell.clone();
    let family = FnFamily::new(keys, candidate.state_qubits, move |k, s| {
        cand.emulated_verify_prob(k, s, &fenv, &fell)
    })?
    .with_resources(usize::from(q > 0));
    let mut copies = Copies::pure(challenge.clone(), t).with_resources(bundles);
    let found = gentle_search(&family, &mut copies, c, params.eps, params.delta, params.estimator, rng)?;

    let emulated_accept = candidate.emulated_verify_prob(&found.key, challenge, env, &ell)?;
    let real_accept = candidate.verify_prob(&found.key, challenge, env)?;
    if r >= 4 && (real_accept - emulated_accept).abs() > bound + 1e-9 {
        return Err(Error::Invariant(format!(
            "emulated verifier differs from the real one by {} > {bound}",
            (real_accept - emulated_accept).abs()
        )));
    }
    Ok(OwsgReport {
        candidate: candidate.name.clone(),
        key: found.key,
        examined: found.examined,
        challenge_copies: t,
        copies_used: found.copies_used,
        copies_per_query: r,
        resource_bundles: bundles,
        resource_attempts: resources.attempts,
        c,
        emulation_bound: bound,
        emulated_accept,
        real_accept,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct OwsgTrial {
    pub trial: u64,
    pub key_star: Bits,
    pub key: Option<Bits>,
    pub real_accept: Option<f64>,
    pub emulated_accept: Option<f64>,
    pub copies_used: usize,
    pub resource_attempts: u64,
    /// `ok`, or the error that ended the run.
    pub outcome: String,
    pub success: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct OwsgGameResult {
    pub candidate: String,
    pub params: OwsgParams,
    pub trials: u64,
    pub successes: u64,
    pub rate: f64,
    pub failures: u64,
    /// Success means the real verifier accepts the returned key with at least
    /// this probability.
    pub threshold: f64,
    pub records: Vec<OwsgTrial>,
}

/// Runs [`owsg_attack`] against fresh oracles and uniformly random keys.
/// Trial `i` uses the stream `Rng::for_trial(seed, i)`. Failed searches and
/// resource failures count as unsuccessful; invariant violations abort.
pub fn owsg_game(candidate: &OwsgCandidate, params: &OwsgParams, trials: u64, seed: u64) -> Result<OwsgGameResult> {
    let threshold = 1.0 / 3.0;
    let records = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = Rng::for_trial(seed, i);
            let env = candidate.sample_env(&mut rng)?;
            let key_star = candidate.keys()[rng.below(candidate.keys().len())];
            let phi = candidate.state(&key_star, &env.clone())?;
            Ok(match owsg_attack(candidate, &env, &phi, params, &mut rng) {
                Ok(r) => OwsgTrial {
                    trial: i,
                    key_star,
                    key: Some(r.key),
                    real_accept: Some(r.real_accept),
                    emulated_accept: Some(r.emulated_accept),
                    copies_used: r.copies_used,
                    resource_attempts: r.resource_attempts,
                    outcome: "ok".into(),
                    success: r.real_accept >= threshold,
                },
                Err(e @ Error::Invariant(_)) => return Err(e),
                Err(e) => OwsgTrial {
                    trial: i,
                    key_star,
                    key: None,
                    real_accept: None,
                    emulated_accept: None,
                    copies_used: 0,
                    resource_attempts: 0,
                    outcome: e.to_string(),
                    success: false,
                },
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let successes = records.iter().filter(|r| r.success).count() as u64;
    let failures = records.iter().filter(|r| r.key.is_none()).count() as u64;
    Ok(OwsgGameResult {
        candidate: candidate.name.clone(),
        params: params.clone(),
        trials,
        successes,
        rate: if trials == 0 { 0.0 } else { successes as f64 / trials as f64 },
        failures,
        threshold,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::{oracle_echo_owsg, wiesner_owsg};

    #[test]
    fn query_free_candidate_reduces_to_gentle_search() {
        let c = wiesner_owsg(2).unwrap();
        let env = OracleEnv::new();
        let k: Bits = "1001".parse().unwrap();
        let phi = c.state(&k, &env).unwrap();
        let r = owsg_attack(&c, &env, &phi, &OwsgParams::default(), &mut Rng::from_seed(1)).unwrap();
        assert_eq!(r.key, k);
        assert_eq!(r.resource_attempts, 0);
        assert_eq!(r.copies_per_query, 0);
        assert!((r.real_accept - 1.0).abs() < 1e-12);
    }

    #[test]
    fn echo_attack_generates_resources_and_recovers_the_key() {
        let c = oracle_echo_owsg(3, 2).unwrap();
        let mut rng = Rng::from_seed(4);
        let env = c.sample_env(&mut rng).unwrap();
        let k: Bits = "011".parse().unwrap();
        let phi = c.state(&k, &env).unwrap();
        let p = OwsgParams::default();
        let r = owsg_attack(&c, &env, &phi, &p, &mut rng).unwrap();
        assert_eq!(r.copies_per_query, 800);
        assert!(r.resource_attempts >= 800);
        assert_eq!(env.total_queries(), r.resource_attempts);
        assert!(r.real_accept >= 0.5 - 2.0 * p.slack);
    }

    #[test]
    fn measured_echo_attack_spends_one_bundle_per_copy() {
        let c = oracle_echo_owsg(2, 2).unwrap();
        let mut rng = Rng::from_seed(9);
        let env = c.sample_env(&mut rng).unwrap();
        let phi = c.state(&"10".parse().unwrap(), &env).unwrap();
        let p = OwsgParams {
            estimator: Estimator::Measured,
            copies_per_query: Some(50),
            ..OwsgParams::default()
        };
        let r = owsg_attack(&c, &env, &phi, &p, &mut rng).unwrap();
        assert_eq!(r.resource_bundles, r.challenge_copies);
        assert!(r.copies_used > 0 && r.copies_used <= r.challenge_copies);
        assert!(r.real_accept >= 1.0 / 3.0);
    }

    #[test]
    fn game_is_reproducible() {
        let c = wiesner_owsg(2).unwrap();
        let p = OwsgParams {
            estimator: Estimator::Measured,
            ..OwsgParams::default()
        };
        let a = owsg_game(&c, &p, 8, 77).unwrap();
        let b = owsg_game(&c, &p, 8, 77).unwrap();
        assert_eq!(format!("{:?}", a.records), format!("{:?}", b.records));
    }
}
