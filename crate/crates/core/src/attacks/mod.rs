//! The one-way state generator inverter, the statistical money forger and the
//! candidate schemes they run against.
//!
//! Every acceptance probability here is computed exactly by the simulator.
//! Emulated algorithms replace oracle queries by reflections about the
//! symmetric subspace over copies of `|1>|S_lambda->` and run on the
//! occupation-number backend, so large copy counts stay cheap.

mod money;
mod owsg;
mod schemes;

use std::collections::BTreeMap;

pub use money::{
    forgery_game, money_forge, EchoForger, ForgeReport, Forger, Forgery, GameResult, MoneyParams,
    StatisticalForger, TrialRecord, VerifyOracle,
};
pub use owsg::{owsg_attack, owsg_game, OwsgGameResult, OwsgParams, OwsgReport, OwsgTrial};
pub use schemes::{
    keyed_template, oracle_echo_owsg, subset_pair_money, swap_test_owsg, wiesner_money, wiesner_owsg, KeyedCircuit,
    MoneyScheme, OwsgCandidate,
};

use crate::emulate::{generate_copies, run_fock};
use crate::error::{Error, Result};
use crate::oracle::{defer_measurements, run_circuit, OracleAidedCircuit, OracleEnv};
use crate::qcore::StateVector;
use crate::rng::Rng;

/// `second` run after `first`, reading `first`'s leading `n` qubits as its
/// input. The remaining qubits of `second` are fresh and follow `first`'s.
pub fn compose(first: &OracleAidedCircuit, second: &OracleAidedCircuit, n: usize) -> Result<OracleAidedCircuit> {
    if first.num_qubits() < n || second.num_qubits() < n {
        return Err(Error::InvalidParameter(format!(
            "cannot pass {n} qubits between circuits of widths {} and {}",
            first.num_qubits(),
            second.num_qubits()
        )));
    }
    let w = first.num_qubits();
    let mut out = OracleAidedCircuit::new(w + second.num_qubits() - n);
    out.embed(first, &(0..w).collect::<Vec<_>>(), "a.")?;
    let map: Vec<usize> = (0..second.num_qubits()).map(|i| if i < n { i } else { w + i - n }).collect();
    out.embed(second, &map, "b.")?;
    Ok(out)
}

fn unitary_form(c: &OracleAidedCircuit) -> Result<OracleAidedCircuit> {
    if c.is_unitary() {
        Ok(c.clone())
    } else {
        Ok(defer_measurements(c)?.circuit)
    }
}

fn padded(input: &StateVector, width: usize) -> Result<StateVector> {
    if input.num_qubits() > width {
        return Err(Error::DimensionMismatch {
            expected: width,
            found: input.num_qubits(),
        });
    }
    input.tensor(&StateVector::zero(width - input.num_qubits())?)
}

fn run_pure(c: &OracleAidedCircuit, env: &OracleEnv, input: &StateVector) -> Result<StateVector> {
    let out = run_circuit(c, env, input, &mut Rng::from_seed(0))?;
    Ok(out.output.pure().expect("unitary circuit").clone())
}

/// State a generator leaves on its leading `n` qubits when run from
/// `|0...0>`. The other qubits must come back to `|0>`. Queries are charged to
/// `env`.
pub fn generated_state(circuit: &OracleAidedCircuit, env: &OracleEnv, n: usize) -> Result<StateVector> {
    let c = unitary_form(circuit)?;
    let out = run_pure(&c, env, &StateVector::zero(c.num_qubits())?)?;
    let keep: Vec<usize> = (0..n).collect();
    let slice = out.slice_on(&keep, 0)?;
    if (slice.norm_sqr() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(
            "generator does not return its work qubits to |0>".into(),
        ));
    }
    StateVector::normalized(slice.into_amplitudes())
}

/// Exact probability that `accept` reads 1 after `circuit` runs on
/// `input (x) |0...>`. Queries are not charged.
pub fn accept_prob(circuit: &OracleAidedCircuit, env: &OracleEnv, input: &StateVector, accept: usize) -> Result<f64> {
    let c = unitary_form(circuit)?;
    run_pure(&c, &env.clone(), &padded(input, c.num_qubits())?)?.prob_one(accept)
}

/// [`accept_prob`] with each query at `lambda` emulated by `ell[lambda]`
/// copies of `|1>|S_lambda->`.
pub fn emulated_accept_prob(
    circuit: &OracleAidedCircuit,
    env: &OracleEnv,
    ell: &BTreeMap<u32, usize>,
    input: &StateVector,
    accept: usize,
) -> Result<f64> {
    let c = unitary_form(circuit)?;
    run_fock(&c, env, ell, &padded(input, c.num_qubits())?)?.prob_one(accept)
}

/// Freshly generated copies of `|1>|S_lambda->`, `multiplicity` per lambda in
/// each of `bundles` independent bundles. One bundle feeds one emulated run.
#[derive(Debug, Clone)]
pub struct ResourceState {
    pub multiplicity: usize,
    pub bundles: usize,
    blocks: BTreeMap<u32, StateVector>,
    /// Oracle queries spent generating.
    pub attempts: u64,
}

impl ResourceState {
    /// Generates every copy with [`generate_copies`], `retry_budget` attempts
    /// each, and checks the copy block against the oracle's axis.
    pub fn generate(
        env: &OracleEnv,
        lambdas: &[u32],
        multiplicity: usize,
        bundles: usize,
        retry_budget: usize,
        rng: &mut Rng,
    ) -> Result<ResourceState> {
        let mut out = ResourceState {
            multiplicity,
            bundles,
            blocks: BTreeMap::new(),
            attempts: 0,
        };
        if multiplicity == 0 || bundles == 0 {
            return Ok(out);
        }
        for &lambda in lambdas {
            let count = multiplicity
                .checked_mul(bundles)
                .ok_or_else(|| Error::Capacity("resource copy count overflows".into()))?;
            let batch = generate_copies(env, lambda, count, retry_budget, rng)?;
            let block = StateVector::basis(1, 1)?.tensor(&batch.state)?;
            let f = block.fidelity(env.axis(lambda)?)?;
            if (f - 1.0).abs() > 1e-9 {
                return Err(Error::Invariant(format!(
                    "generated copy block at lambda={lambda} has fidelity {f} with the axis"
                )));
            }
            out.blocks.insert(lambda, block);
            out.attempts += batch.attempts;
        }
        Ok(out)
    }

    pub fn block(&self, lambda: u32) -> Option<&StateVector> {
        self.blocks.get(&lambda)
    }

    /// Copy count per lambda seen by one emulated run.
    pub fn ell(&self) -> BTreeMap<u32, usize> {
        self.blocks.keys().map(|&l| (l, self.multiplicity)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn compose_feeds_leading_qubits() {
        let mut a = OracleAidedCircuit::new(2);
        a.gate("x", &[], &[0]).unwrap();
        let mut b = OracleAidedCircuit::new(2);
        b.controlled("x", &[], &[1], &[(0, true)]).unwrap();
        let c = compose(&a, &b, 1).unwrap();
        assert_eq!(c.num_qubits(), 3);
        let p = accept_prob(&c, &OracleEnv::new(), &StateVector::zero(0).unwrap(), 2).unwrap();
        assert!((p - 1.0).abs() < 1e-12);
    }

    #[test]
    fn generated_state_rejects_dirty_ancillas() {
        let mut c = OracleAidedCircuit::new(2);
        c.gate("h", &[], &[0]).unwrap();
        c.controlled("x", &[], &[1], &[(0, true)]).unwrap();
        assert!(generated_state(&c, &OracleEnv::new(), 1).is_err());
        assert_eq!(generated_state(&c, &OracleEnv::new(), 2).unwrap().num_qubits(), 2);
    }

    #[test]
    fn resources_match_axis_and_charge_queries() {
        let mut rng = Rng::from_seed(5);
        let env = OracleEnv::sample(&[2, 4], &mut rng).unwrap();
        let r = ResourceState::generate(&env, &[2, 4], 3, 2, 64, &mut rng).unwrap();
        assert_eq!(r.ell(), [(2, 3), (4, 3)].into());
        assert!(r.attempts >= 12);
        assert_eq!(env.total_queries(), r.attempts);
        assert!(r.block(2).unwrap().fidelity(env.axis(2).unwrap()).unwrap() > 1.0 - 1e-12);
        let empty = ResourceState::generate(&env, &[2], 0, 5, 64, &mut rng).unwrap();
        assert!(empty.ell().is_empty());
    }
}
