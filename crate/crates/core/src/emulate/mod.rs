//! Replacing reflection-oracle queries by reflections about the symmetric
//! subspace of the query register and `ell` copies of the reflection axis.
//!
//! Two exact backends run the rewritten circuit. The explicit one executes the
//! plan's gate list with the permutation-averaging projector and is limited to
//! a handful of copies. The occupation-number backend in [`fock`] tracks the
//! copies as a symmetric register and reaches copy counts in the hundreds.

mod fock;

use std::collections::BTreeMap;

use serde::Serialize;

pub use fock::{run_fock, FockState, MAX_FOCK_AMPLITUDES};

use crate::error::{Error, Result};
use crate::oracle::{run_circuit, Gate, OracleAidedCircuit, OracleEnv};
use crate::policy::policy;
use crate::qcore::{gates, measure_computational, StateVector};
use crate::rng::Rng;
use crate::C64;

/// Result of [`project_via_reflection`].
#[derive(Debug, Clone)]
pub struct Projection {
    pub success: bool,
    /// On success the normalized target (up to phase); otherwise the
    /// normalized component orthogonal to it.
    pub output: StateVector,
    /// Exact probability of the success branch, `|<target|input>|^2`.
    pub success_probability: f64,
}

/// One-query projection onto `target`: ancilla `|+>`, reflection about
/// `target` controlled on the ancilla, Hadamard, measure the ancilla.
/// Outcome 1 leaves exactly `<target|input> |target>`.
pub fn project_via_reflection(input: &StateVector, target: &StateVector, rng: &mut Rng) -> Result<Projection> {
    let n = input.num_qubits();
    if target.num_qubits() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: target.num_qubits(),
        });
    }
    let mut state = StateVector::plus(1)?.tensor(input)?;
    let work: Vec<usize> = (1..=n).collect();
    state.reflect_about_mut(target, &work, Some((0, true)))?;
    state.apply_mut(&gates::h(), &[0])?;
    let success_probability = state.prob_one(0)?;
    let m = measure_computational(&state, &[0], rng)?;
    let outcome = m.outcome.index();
    let output = m.collapsed.slice_on(&work, outcome)?;
    let norm = output.norm();
    Ok(Projection {
        success: outcome == 1,
        output: output.scaled(C64::new(1.0 / norm, 0.0)),
        success_probability,
    })
}

/// A freshly generated `|S_lambda->` and the oracle queries it cost.
#[derive(Debug, Clone)]
pub struct Generated {
    pub state: StateVector,
    pub attempts: usize,
}

/// Up to `kappa` attempts of: query the oracle on `|+>|0^lambda>`, Hadamard
/// the control and measure it. Outcome 1 leaves `-|S_lambda->` on the data
/// register; each attempt succeeds with probability exactly 1/2.
pub fn generate_s_minus(env: &OracleEnv, lambda: u32, kappa: usize, rng: &mut Rng) -> Result<Generated> {
    if kappa == 0 {
        return Err(Error::InvalidParameter("retry budget must be at least 1".into()));
    }
    env.spec(lambda)?;
    let width = lambda as usize + 1;
    let data: Vec<usize> = (1..width).collect();
    let targets: Vec<usize> = (0..width).collect();
    for attempt in 1..=kappa {
        let mut state = StateVector::plus(1)?.tensor(&StateVector::zero(lambda as usize)?)?;
        env.apply(&mut state, lambda, &targets)?;
        state.apply_mut(&gates::h(), &[0])?;
        let m = measure_computational(&state, &[0], rng)?;
        if m.outcome.index() == 1 {
            let out = m.collapsed.slice_on(&data, 1)?;
            let norm = out.norm();
            return Ok(Generated {
                state: out.scaled(C64::new(1.0 / norm, 0.0)),
                attempts: attempt,
            });
        }
    }
    Err(Error::GenerationFailed { attempts: kappa })
}

/// Identical copies of `|S_lambda->` and the queries spent making them.
#[derive(Debug, Clone)]
pub struct CopyBatch {
    pub state: StateVector,
    pub count: usize,
    pub attempts: u64,
}

/// `count` copies of `|S_lambda->`, each with its own retry budget `kappa`.
///
/// Only the first copy is simulated; the rest are identical states, so only
/// their attempt counts are sampled (geometric with success 1/2, truncated at
/// `kappa`) and charged to the oracle's query counter.
pub fn generate_copies(env: &OracleEnv, lambda: u32, count: usize, kappa: usize, rng: &mut Rng) -> Result<CopyBatch> {
    if count == 0 {
        return Err(Error::InvalidParameter("copy count must be at least 1".into()));
    }
    let first = generate_s_minus(env, lambda, kappa, rng)?;
    let mut attempts = first.attempts as u64;
    let mut extra = 0u64;
    for _ in 1..count {
        let mut tries = 1;
        while !rng.coin() {
            if tries == kappa {
                env.record_queries(lambda, extra + kappa as u64)?;
                return Err(Error::GenerationFailed { attempts: kappa });
            }
            tries += 1;
        }
        extra += tries as u64;
    }
    env.record_queries(lambda, extra)?;
    attempts += extra;
    Ok(CopyBatch {
        state: first.state,
        count,
        attempts,
    })
}

/// An oracle-aided circuit rewritten to consume copies instead of queries.
#[derive(Debug, Clone)]
pub struct EmulationPlan {
    pub source: OracleAidedCircuit,
    /// Copies of `|1>|S_lambda->` per `lambda`.
    pub ell: BTreeMap<u32, usize>,
    /// Qubits of each copy block, appended after the source qubits in
    /// ascending `lambda` order.
    pub copy_blocks: BTreeMap<u32, Vec<Vec<usize>>>,
    /// Source gates with every oracle query replaced by a symmetric reflection.
    pub rewritten: OracleAidedCircuit,
}

/// Rewrites `circuit`, which must already be in deferred-measurement form.
/// Every `lambda` it queries needs an entry in `ell`.
pub fn build_emulation(circuit: &OracleAidedCircuit, ell: &BTreeMap<u32, usize>) -> Result<EmulationPlan> {
    if !circuit.is_unitary() {
        return Err(Error::NotDeferred(
            "emulation needs a circuit without measurements or discards".into(),
        ));
    }
    let mut next = circuit.num_qubits();
    let mut copy_blocks = BTreeMap::new();
    let mut used = BTreeMap::new();
    for &lambda in circuit.query_counts().keys() {
        let l = *ell
            .get(&lambda)
            .ok_or_else(|| Error::InvalidParameter(format!("no copy count for lambda={lambda}")))?;
        if l == 0 {
            return Err(Error::InvalidParameter("copy count must be at least 1".into()));
        }
        let w = lambda as usize + 1;
        let blocks: Vec<Vec<usize>> = (0..l).map(|i| (next + i * w..next + (i + 1) * w).collect()).collect();
        next += l * w;
        copy_blocks.insert(lambda, blocks);
        used.insert(lambda, l);
    }
    let mut rewritten = OracleAidedCircuit::new(next);
    for g in circuit.gates() {
        match g {
            Gate::Oracle { lambda, targets } => {
                let mut blocks = vec![targets.clone()];
                blocks.extend(copy_blocks[lambda].iter().cloned());
                rewritten.sym_reflect(blocks)?;
            }
            other => rewritten.push(other.clone())?,
        }
    }
    Ok(EmulationPlan {
        source: circuit.clone(),
        ell: used,
        copy_blocks,
        rewritten,
    })
}

impl EmulationPlan {
    /// Exact copies `|1>|S_lambda->^ell` for every `lambda`, in layout order.
    pub fn exact_copies(&self, env: &OracleEnv) -> Result<StateVector> {
        let mut out = StateVector::from_amplitudes(vec![C64::new(1.0, 0.0)])?;
        for (&lambda, &l) in &self.ell {
            let axis = env.axis(lambda)?;
            for _ in 0..l {
                out = out.tensor(axis)?;
            }
        }
        Ok(out)
    }

    /// Copies manufactured with the oracle: [`generate_copies`] and a `|1>`
    /// prepended on the control qubit.
    pub fn prepare_copies(&self, env: &OracleEnv, kappa: usize, rng: &mut Rng) -> Result<(StateVector, u64)> {
        let mut out = StateVector::from_amplitudes(vec![C64::new(1.0, 0.0)])?;
        let mut attempts = 0;
        for (&lambda, &l) in &self.ell {
            let batch = generate_copies(env, lambda, l, kappa, rng)?;
            attempts += batch.attempts;
            let block = StateVector::basis(1, 1)?.tensor(&batch.state)?;
            for _ in 0..l {
                out = out.tensor(&block)?;
            }
        }
        Ok((out, attempts))
    }

    /// Runs the rewritten circuit on `input (x) copies` with the permutation
    /// projector; no oracle is consulted.
    pub fn run_explicit(&self, input: &StateVector, copies: &StateVector) -> Result<StateVector> {
        let full = input.tensor(copies)?;
        let out = run_circuit(&self.rewritten, &OracleEnv::new(), &full, &mut Rng::from_seed(0))?;
        Ok(out.output.pure().expect("unitary circuit stays pure").clone())
    }
}

/// Which exact simulator evaluates the emulated circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Explicit when it fits the state and permutation limits, else occupation numbers.
    Auto,
    Explicit,
    Fock,
}

/// Exact comparison of a circuit with its emulation.
#[derive(Debug, Clone, Serialize)]
pub struct EmulationReport {
    pub queries: usize,
    pub ell: BTreeMap<u32, usize>,
    /// `<original (x) copies | emulated>`.
    pub inner_re: f64,
    pub inner_im: f64,
    pub exact_td: f64,
    /// `min(1, sum_lambda 2 q_lambda / sqrt(ell_lambda + 1))`.
    pub bound: f64,
    /// Every copy count is at least 4, where the bound is proven.
    pub proof_regime: bool,
    pub backend: Backend,
}

/// `sum_lambda 2 q_lambda / sqrt(ell_lambda + 1)`, capped at 1. With one
/// copy count for every `lambda` this is `2q / sqrt(ell + 1)`.
pub fn emulation_bound(queries: &BTreeMap<u32, usize>, ell: &BTreeMap<u32, usize>) -> f64 {
    let raw: f64 = queries
        .iter()
        .map(|(l, &q)| 2.0 * q as f64 / ((ell.get(l).copied().unwrap_or(0) + 1) as f64).sqrt())
        .sum();
    raw.min(1.0)
}

fn check_eps(eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::InvalidParameter(format!("accuracy {eps} outside (0, 1]")));
    }
    Ok(())
}

/// Aggregate copy count `2 q^2 / eps^2 - 1`, rounded up. The distance bound
/// at this count is `sqrt(2) eps`, not `eps`; see [`copies_for_accuracy`].
pub fn aggregate_copy_count(queries: usize, eps: f64) -> Result<usize> {
    check_eps(eps)?;
    let t = 2.0 * (queries * queries) as f64 / (eps * eps) - 1.0;
    Ok((t - 1e-9).ceil().max(1.0) as usize)
}

/// Smallest copy count with `2q / sqrt(ell + 1) <= eps`: `4 q^2 / eps^2 - 1`.
pub fn copies_for_accuracy(queries: usize, eps: f64) -> Result<usize> {
    check_eps(eps)?;
    let t = 4.0 * (queries * queries) as f64 / (eps * eps) - 1.0;
    Ok((t - 1e-9).ceil().max(1.0) as usize)
}

fn explicit_fits(circuit: &OracleAidedCircuit, ell: &BTreeMap<u32, usize>) -> bool {
    let mut qubits = circuit.num_qubits();
    let mut fits = true;
    for &lambda in circuit.query_counts().keys() {
        let l = ell.get(&lambda).copied().unwrap_or(0);
        qubits += l * (lambda as usize + 1);
        let perms = (1..=l + 1).try_fold(1usize, |acc, k| acc.checked_mul(k));
        fits &= perms.is_some_and(|p| p <= policy().max_permutations);
    }
    fits && qubits <= policy().max_state_qubits
}

/// [`emulation_error_with`] on the automatic backend.
pub fn emulation_error(
    circuit: &OracleAidedCircuit,
    env: &OracleEnv,
    ell: &BTreeMap<u32, usize>,
    input: &StateVector,
) -> Result<EmulationReport> {
    emulation_error_with(circuit, env, ell, input, Backend::Auto)
}

/// Exact trace distance between `circuit(input) (x) copies` and the emulated
/// output on `input (x) copies`, both pure, via `sqrt(1 - |<a|b>|^2)`.
///
/// Inside the proof regime a distance above the bound is reported as an
/// [`Error::Invariant`].
pub fn emulation_error_with(
    circuit: &OracleAidedCircuit,
    env: &OracleEnv,
    ell: &BTreeMap<u32, usize>,
    input: &StateVector,
    backend: Backend,
) -> Result<EmulationReport> {
    if !circuit.is_unitary() {
        return Err(Error::NotDeferred(
            "emulation needs a circuit without measurements or discards".into(),
        ));
    }
    let queries = circuit.query_counts().clone();
    let used: BTreeMap<u32, usize> = queries
        .keys()
        .map(|l| {
            ell.get(l)
                .map(|&v| (*l, v))
                .ok_or_else(|| Error::InvalidParameter(format!("no copy count for lambda={l}")))
        })
        .collect::<Result<_>>()?;
    // the original run must not disturb the caller's query counters
    let scratch = env.clone();
    let original = run_circuit(circuit, &scratch, input, &mut Rng::from_seed(0))?;
    let original = original.output.pure().expect("unitary circuit stays pure").clone();
    let backend = match backend {
        Backend::Auto if explicit_fits(circuit, &used) => Backend::Explicit,
        Backend::Auto => Backend::Fock,
        b => b,
    };
    let inner = match backend {
        Backend::Explicit => {
            let plan = build_emulation(circuit, &used)?;
            let copies = plan.exact_copies(env)?;
            let emulated = plan.run_explicit(input, &copies)?;
            original.tensor(&copies)?.inner(&emulated)?
        }
        _ => run_fock(circuit, env, &used, input)?.overlap_with_copies(&original)?,
    };
    let exact_td = (1.0 - inner.norm_sqr().min(1.0)).max(0.0).sqrt();
    let bound = emulation_bound(&queries, &used);
    let proof_regime = used.values().all(|&l| l >= 4);
    if proof_regime && exact_td > bound + 1e-9 {
        return Err(Error::Invariant(format!(
            "emulation distance {exact_td} exceeds the bound {bound}"
        )));
    }
    Ok(EmulationReport {
        queries: queries.values().sum(),
        ell: used,
        inner_re: inner.re,
        inner_im: inner.im,
        exact_td,
        bound,
        proof_regime,
        backend,
    })
}

/// Random circuit over `max(lambda) + 1 + extra` qubits: a layer of random
/// single-qubit rotations and a CNOT ladder before and after every query, one
/// query per entry of `queries`, each on a random ordered set of qubits.
pub fn random_query_circuit(queries: &[u32], extra: usize, rng: &mut Rng) -> Result<OracleAidedCircuit> {
    let width = queries.iter().map(|&l| l as usize + 1).max().unwrap_or(1);
    let n = width + extra;
    let mut c = OracleAidedCircuit::new(n);
    let layer = |c: &mut OracleAidedCircuit, rng: &mut Rng| -> Result<()> {
        for q in 0..n {
            c.gate("ry", &[rng.uniform() * std::f64::consts::TAU], &[q])?;
            c.gate("rz", &[rng.uniform() * std::f64::consts::TAU], &[q])?;
        }
        let mut order: Vec<usize> = (0..n).collect();
        shuffle(&mut order, rng);
        for w in order.windows(2) {
            c.controlled("x", &[], &[w[1]], &[(w[0], true)])?;
        }
        Ok(())
    };
    layer(&mut c, rng)?;
    for &lambda in queries {
        let mut order: Vec<usize> = (0..n).collect();
        shuffle(&mut order, rng);
        c.oracle(lambda, &order[..lambda as usize + 1])?;
        layer(&mut c, rng)?;
    }
    Ok(c)
}

/// Closed form of the inner product between the real and the emulated run of
/// a circuit with exactly one query, `(ell-1)/(ell+1) + 2/(ell+1) * w`, where
/// `w = ||(<1,S-| (x) I) phi||^2` and `phi` is the state just before the query.
pub fn single_query_claim(circuit: &OracleAidedCircuit, env: &OracleEnv, ell: usize, input: &StateVector) -> Result<f64> {
    if circuit.total_queries() != 1 || !circuit.is_unitary() {
        return Err(Error::InvalidParameter("need a unitary circuit with exactly one query".into()));
    }
    let mut pre = OracleAidedCircuit::new(circuit.num_qubits());
    let mut query = None;
    for g in circuit.gates() {
        if let Gate::Oracle { lambda, targets } = g {
            query = Some((*lambda, targets.clone()));
            break;
        }
        pre.push(g.clone())?;
    }
    let (lambda, targets) = query.expect("one query");
    let phi = run_circuit(&pre, &env.clone(), input, &mut Rng::from_seed(0))?;
    let phi = phi.output.pure().expect("unitary prefix").clone();
    let axis = env.axis(lambda)?;
    let rest = phi.num_qubits() - targets.len();
    let mut weight = 0.0;
    for r in 0..1usize << rest {
        weight += phi.slice_on(&targets, r)?.inner(axis)?.norm_sqr();
    }
    let l = ell as f64;
    Ok((l - 1.0) / (l + 1.0) + 2.0 / (l + 1.0) * weight)
}

fn shuffle(v: &mut [usize], rng: &mut Rng) {
    for i in (1..v.len()).rev() {
        let j = rng.below(i + 1);
        v.swap(i, j);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::SubsetSpec;
    use crate::symsub;

    fn env2() -> OracleEnv {
        OracleEnv::from_specs([SubsetSpec::from_strs(2, &["01", "10"]).unwrap()])
    }

    fn ell(pairs: &[(u32, usize)]) -> BTreeMap<u32, usize> {
        pairs.iter().copied().collect()
    }

    #[test]
    fn projection_identity_and_orthogonal() {
        let mut rng = Rng::from_seed(1);
        let t = StateVector::random(2, &mut rng).unwrap();
        let p = project_via_reflection(&t, &t, &mut rng).unwrap();
        assert!(p.success);
        assert!((p.success_probability - 1.0).abs() < 1e-12);
        assert!(p.output.fidelity(&t).unwrap() > 1.0 - 1e-12);
        let a = StateVector::basis(2, 0).unwrap();
        let b = StateVector::basis(2, 3).unwrap();
        for _ in 0..20 {
            let p = project_via_reflection(&a, &b, &mut rng).unwrap();
            assert!(!p.success);
            assert!(p.success_probability.abs() < 1e-15);
        }
        assert!(project_via_reflection(&a, &StateVector::zero(3).unwrap(), &mut rng).is_err());
    }

    #[test]
    fn projection_half_overlap() {
        let mut rng = Rng::from_seed(2);
        let t = StateVector::plus(2).unwrap();
        let orth = StateVector::from_real(&[0.5, -0.5, 0.5, -0.5]).unwrap();
        let amps: Vec<C64> = t.amplitudes().iter().zip(orth.amplitudes()).map(|(a, b)| a + b).collect();
        let input = StateVector::normalized(amps).unwrap();
        let trials = 4000;
        let mut hits = 0;
        for _ in 0..trials {
            let p = project_via_reflection(&input, &t, &mut rng).unwrap();
            assert!((p.success_probability - 0.5).abs() < 1e-12);
            if p.success {
                hits += 1;
                assert!(p.output.fidelity(&t).unwrap() > 1.0 - 1e-9);
            }
        }
        let sigma = (0.25 / trials as f64).sqrt();
        assert!((hits as f64 / trials as f64 - 0.5).abs() < 3.0 * sigma);
    }

    #[test]
    fn generated_state_is_s_minus() {
        let env = env2();
        let mut rng = Rng::from_seed(4);
        let g = generate_s_minus(&env, 2, 40, &mut rng).unwrap();
        let want = &env.spec(2).unwrap().states().s_minus;
        assert!(g.state.fidelity(want).unwrap() > 1.0 - 1e-12);
        assert_eq!(env.queries(2), g.attempts as u64);
        assert!(generate_s_minus(&env, 4, 3, &mut rng).is_err());
    }

    #[test]
    fn bulk_generation_charges_every_attempt() {
        let env = env2();
        let mut rng = Rng::from_seed(6);
        let b = generate_copies(&env, 2, 500, 30, &mut rng).unwrap();
        assert_eq!(env.queries(2), b.attempts);
        // mean attempts per copy is 2
        assert!((b.attempts as f64 / 500.0 - 2.0).abs() < 0.3);
        let fail = generate_copies(&env, 2, 2000, 1, &mut rng).unwrap_err();
        assert_eq!(fail, Error::GenerationFailed { attempts: 1 });
    }

    #[test]
    fn oracle_free_circuit_is_untouched() {
        let env = env2();
        let mut c = OracleAidedCircuit::new(2);
        c.gate("h", &[], &[0]).unwrap();
        c.gate("ry", &[0.3], &[1]).unwrap();
        let plan = build_emulation(&c, &ell(&[])).unwrap();
        assert_eq!(plan.rewritten.gates(), c.gates());
        let mut rng = Rng::from_seed(0);
        let input = StateVector::random(2, &mut rng).unwrap();
        let r = emulation_error(&c, &env, &ell(&[(2, 5)]), &input).unwrap();
        assert_eq!((r.exact_td, r.bound, r.queries), (0.0, 0.0, 0));
    }

    #[test]
    fn rewritten_has_no_oracle_gates_and_uniform_copy_count() {
        let mut rng = Rng::from_seed(8);
        let c = random_query_circuit(&[2, 2, 2], 1, &mut rng).unwrap();
        let plan = build_emulation(&c, &ell(&[(2, 3)])).unwrap();
        assert_eq!(plan.rewritten.total_queries(), 0);
        assert_eq!(plan.rewritten.num_qubits(), c.num_qubits() + 9);
        for g in plan.rewritten.gates() {
            if let Gate::SymReflect { blocks } = g {
                assert_eq!(blocks.len(), 4);
                assert_eq!(&blocks[1..], &plan.copy_blocks[&2][..]);
            }
        }
        let mut measured = c.clone();
        measured.measure("m", &[0]).unwrap();
        assert!(matches!(
            build_emulation(&measured, &ell(&[(2, 3)])).unwrap_err(),
            Error::NotDeferred(_)
        ));
        assert!(build_emulation(&c, &ell(&[(4, 3)])).is_err());
    }

    #[test]
    fn unqueried_copies_stay_intact() {
        let env = env2();
        let mut c = OracleAidedCircuit::new(4);
        c.gate("h", &[], &[3]).unwrap();
        c.oracle(2, &[0, 1, 2]).unwrap();
        let plan = build_emulation(&c, &ell(&[(2, 2)])).unwrap();
        let copies = plan.exact_copies(&env).unwrap();
        // a circuit with only the base gate touches no copy block
        let mut bare = OracleAidedCircuit::new(plan.rewritten.num_qubits());
        bare.gate("h", &[], &[3]).unwrap();
        let input = StateVector::zero(4).unwrap();
        let out = run_circuit(&bare, &env, &input.tensor(&copies).unwrap(), &mut Rng::from_seed(0)).unwrap();
        let copy_qubits: Vec<usize> = (4..10).collect();
        let rho = crate::qcore::DensityMatrix::reduce_pure(out.output.pure().unwrap(), &[0, 1, 2, 3]).unwrap();
        let want = crate::qcore::DensityMatrix::from_pure(&copies).unwrap();
        assert_eq!(copy_qubits.len(), rho.num_qubits());
        assert!(rho.matrix().max_abs_diff(want.matrix()) < 1e-12);
    }

    #[test]
    fn explicit_run_uses_the_symmetric_reflection() {
        // the rewritten gate list reproduces a hand-applied reflection
        let env = env2();
        let mut c = OracleAidedCircuit::new(3);
        c.oracle(2, &[0, 1, 2]).unwrap();
        let plan = build_emulation(&c, &ell(&[(2, 2)])).unwrap();
        let copies = plan.exact_copies(&env).unwrap();
        let input = StateVector::basis(3, 0b100).unwrap();
        let got = plan.run_explicit(&input, &copies).unwrap();
        let blocks: Vec<Vec<usize>> = vec![vec![0, 1, 2], vec![3, 4, 5], vec![6, 7, 8]];
        let want = symsub::symmetric_reflect_on(&input.tensor(&copies).unwrap(), &blocks).unwrap();
        assert!(got.max_abs_diff(&want) < 1e-12);
    }

    #[test]
    fn single_query_matches_claim_on_both_backends() {
        let mut rng = Rng::from_seed(12);
        let env = OracleEnv::sample(&[2], &mut rng).unwrap();
        for l in [1, 3, 4] {
            let c = random_query_circuit(&[2], 1, &mut rng).unwrap();
            let input = StateVector::random(4, &mut rng).unwrap();
            let want = single_query_claim(&c, &env, l, &input).unwrap();
            for b in [Backend::Explicit, Backend::Fock] {
                let r = emulation_error_with(&c, &env, &ell(&[(2, l)]), &input, b).unwrap();
                assert!((r.inner_re - want).abs() < 1e-9, "{b:?} l={l} {} {want}", r.inner_re);
                assert!(r.inner_im.abs() < 1e-9);
                assert_eq!(r.proof_regime, l >= 4);
            }
        }
    }


    #[test]
    fn fock_matches_explicit_on_multi_query_circuits() {
        let mut rng = Rng::from_seed(21);
        let env = OracleEnv::sample(&[2], &mut rng).unwrap();
        for q in 1..=3 {
            for l in 1..=4 {
                let c = random_query_circuit(&vec![2; q], 1, &mut rng).unwrap();
                let input = StateVector::random(c.num_qubits(), &mut rng).unwrap();
                let e = emulation_error_with(&c, &env, &ell(&[(2, l)]), &input, Backend::Explicit).unwrap();
                let f = emulation_error_with(&c, &env, &ell(&[(2, l)]), &input, Backend::Fock).unwrap();
                assert!((e.inner_re - f.inner_re).abs() < 1e-10, "q={q} l={l}");
                assert!((e.inner_im - f.inner_im).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn fock_matches_explicit_with_two_lambdas() {
        let mut rng = Rng::from_seed(33);
        let env = OracleEnv::sample(&[2, 4], &mut rng).unwrap();
        let c = random_query_circuit(&[2, 4, 2], 0, &mut rng).unwrap();
        let input = StateVector::random(c.num_qubits(), &mut rng).unwrap();
        let cells = ell(&[(2, 2), (4, 1)]);
        let e = emulation_error_with(&c, &env, &cells, &input, Backend::Explicit).unwrap();
        let f = emulation_error_with(&c, &env, &cells, &input, Backend::Fock).unwrap();
        assert!((e.inner_re - f.inner_re).abs() < 1e-10);
        assert!((e.inner_im - f.inner_im).abs() < 1e-10);
    }

    #[test]
    fn one_query_on_one_zero_at_fifteen_copies() {
        let env = OracleEnv::sample(&[2], &mut Rng::from_seed(5)).unwrap();
        let mut c = OracleAidedCircuit::new(3);
        c.oracle(2, &[0, 1, 2]).unwrap();
        let input = StateVector::basis(3, 0b100).unwrap();
        let r = emulation_error(&c, &env, &ell(&[(2, 15)]), &input).unwrap();
        assert_eq!(r.backend, Backend::Fock);
        assert!(r.exact_td <= 0.5);
        assert!(r.inner_re >= 1.0 - 2.0 / 16.0 - 1e-12);
        // |<psi|1,0>|^2 = 1/2
        let want = 14.0 / 16.0 + 2.0 / 16.0 * 0.5;
        assert!((r.inner_re - want).abs() < 1e-10);
        assert!((r.exact_td - (1.0 - want * want).sqrt()).abs() < 1e-8);
    }

    #[test]
    fn small_copy_counts_report_a_vacuous_bound() {
        let env = OracleEnv::sample(&[2], &mut Rng::from_seed(7)).unwrap();
        let c = random_query_circuit(&[2], 0, &mut Rng::from_seed(8)).unwrap();
        let input = StateVector::zero(3).unwrap();
        let r = emulation_error(&c, &env, &ell(&[(2, 3)]), &input).unwrap();
        assert_eq!(r.bound, 1.0);
        assert!(!r.proof_regime);
        assert!(r.exact_td <= 1.0);
    }

    #[test]
    fn copy_count_values() {
        assert_eq!(aggregate_copy_count(1, 0.5).unwrap(), 7);
        assert_eq!(aggregate_copy_count(2, 0.5).unwrap(), 31);
        assert_eq!(aggregate_copy_count(3, 0.25).unwrap(), 287);
        assert!(aggregate_copy_count(1, 0.0).is_err());
        assert_eq!(copies_for_accuracy(1, 0.5).unwrap(), 15);
        assert_eq!(copies_for_accuracy(3, 0.25).unwrap(), 575);
        for q in 1..4 {
            for eps in [0.5, 0.25, 0.1] {
                let l = copies_for_accuracy(q, eps).unwrap();
                let ell: BTreeMap<u32, usize> = [(2, l)].into();
                let qs: BTreeMap<u32, usize> = [(2, q)].into();
                assert!(emulation_bound(&qs, &ell) <= eps + 1e-12);
            }
        }
    }

    #[test]
    fn prepared_copies_match_exact_copies() {
        let env = env2();
        let mut c = OracleAidedCircuit::new(3);
        c.oracle(2, &[0, 1, 2]).unwrap();
        let plan = build_emulation(&c, &ell(&[(2, 3)])).unwrap();
        let (made, attempts) = plan.prepare_copies(&env, 40, &mut Rng::from_seed(3)).unwrap();
        assert!(made.fidelity(&plan.exact_copies(&env).unwrap()).unwrap() > 1.0 - 1e-12);
        assert_eq!(env.queries(2), attempts);
    }
}
