use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, Ordering};

use rayon::prelude::*;
use serde::Serialize;

use super::{compose, emulated_accept_prob, MoneyScheme, ResourceState};
use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::oracle::OracleEnv;
use crate::qcore::StateVector;
use crate::rng::Rng;
use crate::tomography::{exact_table, shadow_batch_size, shadow_tomography, Copies, EstimateTable, Estimator, FnFamily, Input};

#[derive(Debug, Clone, Serialize)]
pub struct MoneyParams {
    /// Slack standing in for `1/kappa`; must lie in `(0, 0.1)`.
    pub eta: f64,
    pub eps_st: f64,
    pub delta_st: f64,
    pub estimator: Estimator,
    /// Copies of `|1>|S_lambda->` per lambda in one tau. Defaults to
    /// `ceil(2 q^2 / (eta mu)^2)`.
    pub copies_per_query: Option<usize>,
    /// Multiplier on the number of minted outputs.
    pub repetitions: usize,
    /// Attempts allowed per generated `|S_lambda->`.
    pub retry_budget: usize,
}

impl Default for MoneyParams {
    fn default() -> Self {
        MoneyParams {
            eta: 0.05,
            eps_st: 0.05,
            delta_st: 0.05,
            estimator: Estimator::Exact,
            copies_per_query: None,
            repetitions: 1,
            retry_budget: 64,
        }
    }
}

impl MoneyParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0 && self.eta < 0.1) {
            return Err(Error::InvalidParameter(format!("eta {} outside (0, 0.1)", self.eta)));
        }
        if self.repetitions == 0 {
            return Err(Error::InvalidParameter("repetitions must be at least 1".into()));
        }
        Ok(())
    }

    pub fn copies_for(&self, queries: usize, mu: f64) -> usize {
        match (self.copies_per_query, queries) {
            (Some(r), _) => r,
            (None, 0) => 0,
            (None, q) => {
                let s = self.eta * mu;
                (2.0 * (q * q) as f64 / (s * s)).ceil() as usize
            }
        }
    }

    /// `ceil(2m / (mu (1 - 10 eta)))` times the repetition multiplier.
    pub fn m_prime(&self, m: usize, mu: f64) -> usize {
        (2.0 * m as f64 / (mu * (1.0 - 10.0 * self.eta))).ceil() as usize * self.repetitions
    }

    /// Step-4 consistency threshold `5 mu eta`.
    pub fn threshold(&self, mu: f64) -> f64 {
        5.0 * mu * self.eta
    }

    /// Estimation error the estimator guarantees: 0 for exact baselines.
    pub fn effective_eps(&self) -> f64 {
        match self.estimator {
            Estimator::Exact => 0.0,
            Estimator::Measured => self.eps_st,
        }
    }
}

/// Per-run diagnostics of [`money_forge`].
#[derive(Debug, Clone, Serialize)]
pub struct ForgeReport {
    pub scheme: String,
    pub params: MoneyParams,
    pub copies_per_query: usize,
    /// Independent tau bundles generated.
    pub tau_bundles: usize,
    pub resource_attempts: u64,
    /// `b_V(k)` per key.
    pub b_v: EstimateTable,
    /// `b_VM(k, k')` keyed by `k || k'`.
    pub b_vm: EstimateTable,
    pub threshold: f64,
    pub chosen_key: Bits,
    pub m_prime: usize,
    /// Oracle queries spent minting the outputs.
    pub mint_queries: u64,
}

fn pair_keys(keys: &[Bits]) -> Vec<Bits> {
    keys.iter().flat_map(|k| keys.iter().map(move |k2| k.concat(k2))).collect()
}

/// Forges banknotes from `m` copies of `money` without the verification
/// oracle.
///
/// 1. Generates tau bundles, each holding `r` copies of `|1>|S_lambda->`
///    per lambda: `3m` of them with exact estimators, otherwise one per
///    measured evaluation.
/// 2. `b_V`: shadow tomography of `{Verify~(k, ., tau)}_k` on the banknotes.
/// 3. `b_VM`: shadow tomography of `VM(k, k')`, which runs `Mint~(k', tau)`
///    and then `Verify~(k, ., tau')` on the same tau. Each pair gets its own
///    tau.
/// 4. Picks the lexicographically first `k'` with
///    `|b_V(k) - b_VM(k, k')| <= 5 mu eta` for every `k`, else aborts.
/// 5. Mints `m'` banknotes under `k'` with the real oracle.
///
/// An abort while both tables are within the estimator's accuracy and the
/// witness `k' = k*` is guaranteed to qualify is an invariant violation.
pub fn money_forge(
    scheme: &MoneyScheme,
    env: &OracleEnv,
    money: &StateVector,
    m: usize,
    params: &MoneyParams,
    rng: &mut Rng,
) -> Result<(Vec<StateVector>, ForgeReport)> {
    params.validate()?;
    let n = scheme.money_qubits;
    if money.num_qubits() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: money.num_qubits(),
        });
    }
    if m == 0 {
        return Err(Error::InvalidParameter("the forger needs at least one banknote".into()));
    }
    let mu = scheme.mu;
    let keys = scheme.keys().to_vec();
    let pairs = pair_keys(&keys);
    let q = scheme.query_bound();
    let r = params.copies_for(q, mu);
    if q > 0 && r == 0 {
        return Err(Error::InvalidParameter("emulated algorithms need at least one copy".into()));
    }
    let ell: BTreeMap<u32, usize> = scheme.lambdas().iter().map(|&l| (l, r)).collect();

    // copies of $* and of tau each stage consumes
    let (notes_tau, pair_tau) = match params.estimator {
        Estimator::Exact => (m, 2 * m),
        Estimator::Measured => {
            let bv = shadow_batch_size(keys.len(), params.eps_st, params.delta_st) * keys.len();
            if bv > m {
                return Err(Error::InsufficientCopies { needed: bv, available: m });
            }
            (bv, shadow_batch_size(pairs.len(), params.eps_st, params.delta_st) * pairs.len())
        }
    };
    let bundles = if q == 0 { 0 } else { notes_tau + pair_tau };
    let tau = ResourceState::generate(env, scheme.lambdas(), r, bundles, params.retry_budget, rng)?;
    let per_eval = usize::from(q > 0);

    let (s, e, l) = (scheme.clone(), env.clone(), ell.clone());
    let fam_v = FnFamily::new(keys.clone(), n, move |k, st| {
        emulated_accept_prob(&s.verify_circuit(k)?, &e, &l, st, s.accept_qubit)
    })?
    .with_resources(per_eval);
    let mut notes = Copies::pure(money.clone(), m).with_resources(if q == 0 { 0 } else { notes_tau });
    let b_v = shadow_tomography(&fam_v, &mut notes, params.eps_st, params.delta_st, params.estimator, rng)?;

    let kappa = scheme.kappa;
    let (s, e, l) = (scheme.clone(), env.clone(), ell.clone());
    let fam_vm = FnFamily::new(pairs.clone(), 0, move |pk, st| {
        let (k, k2) = (pk.slice(0, kappa), pk.slice(kappa, kappa));
        let mint = s.mint_circuit(&k2)?;
        let c = compose(&mint, &s.verify_circuit(&k)?, n)?;
        let accept = if s.accept_qubit < n {
            s.accept_qubit
        } else {
            mint.num_qubits() + s.accept_qubit - n
        };
        emulated_accept_prob(&c, &e, &l, st, accept)
    })?
    .with_resources(per_eval);
    let mut empties = Copies::pure(StateVector::zero(0)?, 2 * m.max(pair_tau)).with_resources(if q == 0 { 0 } else { pair_tau });
    let b_vm = shadow_tomography(&fam_vm, &mut empties, params.eps_st, params.delta_st, params.estimator, rng)?;

    let threshold = params.threshold(mu);
    let value = |t: &EstimateTable, k: &Bits| t.get(k).ok_or_else(|| Error::UnknownKey(k.to_string()));
    let mut chosen = None;
    for k2 in &keys {
        let mut ok = true;
        for k in &keys {
            if (value(&b_v, k)? - value(&b_vm, &k.concat(k2))?).abs() > threshold + 1e-12 {
                ok = false;
                break;
            }
        }
        if ok {
            chosen = Some(*k2);
            break;
        }
    }
    let Some(chosen_key) = chosen else {
        // the witness k' = k* qualifies when both tables are accurate
        let eps = params.effective_eps();
        let mint_bound = if q == 0 { 0.0 } else { 2.0 * q as f64 / ((r + 1) as f64).sqrt() };
        if 2.0 * eps + mint_bound <= threshold {
            let accurate = match params.estimator {
                Estimator::Exact => true,
                Estimator::Measured => {
                    b_v.max_error(&exact_table(&fam_v, &Input::Pure(money.clone()))?)? <= eps
                        && b_vm.max_error(&exact_table(&fam_vm, &Input::Pure(StateVector::zero(0)?))?)? <= eps
                }
            };
            if accurate {
                return Err(Error::Invariant(
                    "step 4 aborted although both estimate tables are accurate".into(),
                ));
            }
        }
        return Err(Error::Aborted);
    };

    let m_prime = params.m_prime(m, mu);
    let before = env.total_queries();
    let outputs = (0..m_prime)
        .map(|_| scheme.mint_state(&chosen_key, env))
        .collect::<Result<Vec<_>>>()?;
    Ok((
        outputs,
        ForgeReport {
            scheme: scheme.name.clone(),
            params: params.clone(),
            copies_per_query: r,
            tau_bundles: bundles,
            resource_attempts: tau.attempts,
            b_v,
            b_vm,
            threshold,
            chosen_key,
            m_prime,
            mint_queries: env.total_queries() - before,
        },
    ))
}

/// The challenger's verification service for one key. It answers accept or
/// reject and counts calls; the post-measurement state is not returned.
pub struct VerifyOracle {
    scheme: MoneyScheme,
    key: Bits,
    env: OracleEnv,
    calls: AtomicU64,
}

impl VerifyOracle {
    pub fn new(scheme: MoneyScheme, key: Bits, env: OracleEnv) -> VerifyOracle {
        VerifyOracle {
            scheme,
            key,
            env,
            calls: AtomicU64::new(0),
        }
    }

    pub fn verify(&self, rho: &Input, rng: &mut Rng) -> Result<bool> {
        self.calls.fetch_add(1, Ordering::Relaxed);
        let p = self.scheme.verify_prob(&self.key, rho, &self.env)?;
        Ok(rng.bernoulli(p))
    }

    pub fn calls(&self) -> u64 {
        self.calls.load(Ordering::Relaxed)
    }
}

/// Output of a forger.
#[derive(Debug, Clone)]
pub struct Forgery {
    /// Banknote registers in order; they are handed to the verifier as a
    /// product state.
    pub outputs: Vec<Input>,
    pub chosen_key: Option<Bits>,
}

pub trait Forger: Send + Sync {
    fn name(&self) -> String;

    /// Produces banknotes from `m` copies of `money`.
    fn forge(
        &self,
        scheme: &MoneyScheme,
        env: &OracleEnv,
        money: &StateVector,
        m: usize,
        oracle: &VerifyOracle,
        rng: &mut Rng,
    ) -> Result<Forgery>;
}

/// Returns its `m` banknotes followed by `pad` maximally mixed registers.
pub struct EchoForger {
    pub pad: usize,
}

impl Forger for EchoForger {
    fn name(&self) -> String {
        format!("echo+{}", self.pad)
    }

    fn forge(&self, scheme: &MoneyScheme, _: &OracleEnv, money: &StateVector, m: usize, _: &VerifyOracle, _: &mut Rng) -> Result<Forgery> {
        let mut outputs = vec![Input::Pure(money.clone()); m];
        for _ in 0..self.pad {
            outputs.push(scheme.garbage()?);
        }
        Ok(Forgery {
            outputs,
            chosen_key: None,
        })
    }
}

/// [`money_forge`] as a forger.
pub struct StatisticalForger {
    pub params: MoneyParams,
}

impl Forger for StatisticalForger {
    fn name(&self) -> String {
        "statistical".into()
    }

    fn forge(&self, scheme: &MoneyScheme, env: &OracleEnv, money: &StateVector, m: usize, _: &VerifyOracle, rng: &mut Rng) -> Result<Forgery> {
        let (outputs, report) = money_forge(scheme, env, money, m, &self.params, rng)?;
        Ok(Forgery {
            outputs: outputs.into_iter().map(Input::Pure).collect(),
            chosen_key: Some(report.chosen_key),
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TrialRecord {
    pub trial: u64,
    pub key: Bits,
    pub outputs: usize,
    pub accepts: usize,
    pub success: bool,
    /// `ok`, `aborted`, or the error that ended the run.
    pub outcome: String,
    pub chosen_key: Option<Bits>,
    /// Exact `Pr[Verify(k*, Mint(k'))]` for the forger's chosen key.
    pub single_accept: Option<f64>,
    pub verify_oracle_calls: u64,
    /// Queries the forger made to the oracle `O`.
    pub forger_queries: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct GameResult {
    pub scheme: String,
    pub forger: String,
    pub m: usize,
    pub trials: u64,
    pub successes: u64,
    pub rate: f64,
    pub aborts: u64,
    pub errors: u64,
    pub verify_oracle_calls: u64,
    pub records: Vec<TrialRecord>,
}

/// Unforgeability game: per trial a fresh oracle and key, `m` minted
/// banknotes for the forger, then every output register verified in
/// ascending order. Success iff at least `m + 1` registers verify. Aborts
/// and errors count as failures; invariant violations are returned.
pub fn forgery_game(scheme: &MoneyScheme, forger: &dyn Forger, m: usize, trials: u64, seed: u64) -> Result<GameResult> {
    let n = scheme.money_qubits;
    let records = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = Rng::for_trial(seed, i);
            let env = scheme.sample_env(&mut rng)?;
            let key = scheme.keygen(&mut rng);
            let challenger = env.clone();
            let mut money = scheme.mint_state(&key, &challenger)?;
            for _ in 1..m {
                money = scheme.mint_state(&key, &challenger)?;
            }
            let oracle = VerifyOracle::new(scheme.clone(), key, challenger.clone());
            let mut rec = TrialRecord {
                trial: i,
                key,
                outputs: 0,
                accepts: 0,
                success: false,
                outcome: "ok".into(),
                chosen_key: None,
                single_accept: None,
                verify_oracle_calls: 0,
                forger_queries: 0,
            };
            match forger.forge(scheme, &env, &money, m, &oracle, &mut rng) {
                Ok(f) => {
                    rec.outputs = f.outputs.len();
                    if let Some(bad) = f.outputs.iter().find(|o| o.num_qubits() != n) {
                        rec.outcome = format!("output register has {} qubits, expected {n}", bad.num_qubits());
                    } else {
                        for o in &f.outputs {
                            let p = scheme.verify_prob(&key, o, &challenger)?;
                            rec.accepts += usize::from(rng.bernoulli(p));
                        }
                        rec.success = rec.accepts > m;
                    }
                    if let Some(k2) = f.chosen_key {
                        let note = scheme.mint_state(&k2, &env.clone())?;
                        rec.single_accept = Some(scheme.verify_prob(&key, &Input::Pure(note), &challenger)?);
                    }
                    rec.chosen_key = f.chosen_key;
                }
                Err(Error::Aborted) => rec.outcome = "aborted".into(),
                Err(e @ Error::Invariant(_)) => return Err(e),
                Err(e) => rec.outcome = e.to_string(),
            }
            rec.verify_oracle_calls = oracle.calls();
            rec.forger_queries = env.total_queries();
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;
    let successes = records.iter().filter(|r| r.success).count() as u64;
    let aborts = records.iter().filter(|r| r.outcome == "aborted").count() as u64;
    let errors = records
        .iter()
        .filter(|r| r.outcome != "ok" && r.outcome != "aborted")
        .count() as u64;
    Ok(GameResult {
        scheme: scheme.name.clone(),
        forger: forger.name(),
        m,
        trials,
        successes,
        rate: if trials == 0 { 0.0 } else { successes as f64 / trials as f64 },
        aborts,
        errors,
        verify_oracle_calls: records.iter().map(|r| r.verify_oracle_calls).sum(),
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::attacks::{subset_pair_money, wiesner_money};

    #[test]
    fn output_count_formula() {
        let p = MoneyParams::default();
        assert_eq!(p.m_prime(2, 1.0), 8);
        assert_eq!(p.m_prime(1, 1.0), 4);
        assert!((p.threshold(1.0) - 0.25).abs() < 1e-15);
        assert_eq!(p.copies_for(1, 1.0), 800);
        assert!(MoneyParams { eta: 0.1, ..p.clone() }.validate().is_err());
    }

    #[test]
    fn wiesner_forger_finds_the_minting_key() {
        let s = wiesner_money(2).unwrap();
        let env = OracleEnv::new();
        let k: Bits = "0110".parse().unwrap();
        let note = s.mint_state(&k, &env).unwrap();
        let (out, rep) = money_forge(&s, &env, &note, 2, &MoneyParams::default(), &mut Rng::from_seed(2)).unwrap();
        assert_eq!(rep.chosen_key, k);
        assert_eq!(out.len(), 8);
        assert_eq!(rep.b_vm.len(), 256);
    }

    #[test]
    fn subset_pair_forger_threads_tau() {
        let s = subset_pair_money(2, 2).unwrap();
        let mut rng = Rng::from_seed(6);
        let env = s.sample_env(&mut rng).unwrap();
        let k: Bits = "11".parse().unwrap();
        let note = s.mint_state(&k, &env.clone()).unwrap();
        let (out, rep) = money_forge(&s, &env, &note, 1, &MoneyParams::default(), &mut rng).unwrap();
        assert_eq!(rep.chosen_key, k);
        assert_eq!(rep.tau_bundles, 3);
        assert_eq!(rep.mint_queries, out.len() as u64);
        assert_eq!(env.total_queries(), rep.resource_attempts + rep.mint_queries);
        let diag = rep.b_vm.get(&k.concat(&k)).unwrap();
        assert!((diag - rep.b_v.get(&k).unwrap()).abs() <= rep.threshold);
    }

    #[test]
    fn measured_forger_needs_a_batch_of_banknotes_per_key() {
        let s = wiesner_money(1).unwrap();
        let env = OracleEnv::new();
        let note = s.mint_state(&"10".parse().unwrap(), &env).unwrap();
        let p = MoneyParams {
            estimator: Estimator::Measured,
            ..MoneyParams::default()
        };
        let err = money_forge(&s, &env, &note, 2, &p, &mut Rng::from_seed(1)).unwrap_err();
        assert!(matches!(err, Error::InsufficientCopies { .. }));
        let need = 4 * shadow_batch_size(4, p.eps_st, p.delta_st);
        let (_, rep) = money_forge(&s, &env, &note, need, &p, &mut Rng::from_seed(1)).unwrap();
        assert_eq!(rep.chosen_key, "10".parse().unwrap());
    }

    #[test]
    fn no_extra_register_means_no_forgery() {
        let s = wiesner_money(2).unwrap();
        let g = forgery_game(&s, &EchoForger { pad: 0 }, 2, 20, 3).unwrap();
        assert_eq!(g.successes, 0);
        assert_eq!(g.verify_oracle_calls, 0);
    }
}
