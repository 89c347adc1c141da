//! Gentle search and shadow tomography over finite families of two-outcome
//! measurements, with exact acceptance probabilities as the reference.
//!
//! Both procedures spend fresh copies per key: every key is measured on its
//! own batch, and the batch count is a Binomial draw at the exact acceptance
//! probability, which is the exact law of measuring that many independent
//! copies one at a time. Batch sizes come from Hoeffding bounds rather than
//! gentle-measurement sample complexities.

use std::collections::BTreeMap;
use std::sync::Arc;

use serde::Serialize;

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::oracle::{defer_measurements, run_circuit, OracleAidedCircuit, OracleEnv};
use crate::qcore::{DensityMatrix, StateVector};
use crate::rng::Rng;

/// A finite family of accept/reject measurements indexed by keys.
pub trait PovmFamily: Send + Sync {
    /// Keys in ascending order, without duplicates.
    fn keys(&self) -> &[Bits];

    /// Qubits per input copy.
    fn arity(&self) -> usize;

    /// Auxiliary resource copies one evaluation consumes.
    fn resources_per_eval(&self) -> usize {
        0
    }

    /// Exact acceptance probability of `key` on a pure input.
    fn accept_prob(&self, key: &Bits, input: &StateVector) -> Result<f64>;
}

fn check_keys(keys: &mut Vec<Bits>) -> Result<()> {
    if keys.is_empty() {
        return Err(Error::InvalidParameter("key set is empty".into()));
    }
    let n = keys.len();
    keys.sort();
    keys.dedup();
    if keys.len() != n {
        return Err(Error::InvalidParameter("key set has duplicates".into()));
    }
    Ok(())
}

type Builder = Arc<dyn Fn(&Bits) -> Result<OracleAidedCircuit> + Send + Sync>;

/// Family whose element for `key` is a circuit reading the input on its first
/// `arity` qubits (the rest start at `|0>`) and accepting iff `accept_qubit`
/// reads 1 at the end. Mid-circuit measurements are deferred.
#[derive(Clone)]
pub struct CircuitFamily {
    keys: Vec<Bits>,
    arity: usize,
    accept_qubit: usize,
    env: OracleEnv,
    builder: Builder,
}

impl CircuitFamily {
    pub fn new(
        keys: Vec<Bits>,
        arity: usize,
        accept_qubit: usize,
        env: OracleEnv,
        builder: impl Fn(&Bits) -> Result<OracleAidedCircuit> + Send + Sync + 'static,
    ) -> Result<CircuitFamily> {
        let mut keys = keys;
        check_keys(&mut keys)?;
        Ok(CircuitFamily {
            keys,
            arity,
            accept_qubit,
            env,
            builder: Arc::new(builder),
        })
    }

    pub fn circuit(&self, key: &Bits) -> Result<OracleAidedCircuit> {
        (self.builder)(key)
    }
}

impl PovmFamily for CircuitFamily {
    fn keys(&self) -> &[Bits] {
        &self.keys
    }

    fn arity(&self) -> usize {
        self.arity
    }

    fn accept_prob(&self, key: &Bits, input: &StateVector) -> Result<f64> {
        let c = self.circuit(key)?;
        if c.num_qubits() < self.arity || self.accept_qubit >= c.num_qubits() {
            return Err(Error::InvalidParameter(format!(
                "element circuit for key {key} is narrower than its input"
            )));
        }
        let deferred = defer_measurements(&c)?;
        let pad = deferred.circuit.num_qubits() - input.num_qubits();
        let full = input.tensor(&StateVector::zero(pad)?)?;
        // oracle queries made while computing the reference do not count
        let out = run_circuit(&deferred.circuit, &self.env.clone(), &full, &mut Rng::from_seed(0))?;
        out.output
            .pure()
            .expect("deferred circuit is unitary")
            .prob_one(self.accept_qubit)
    }
}

type AcceptFn = Arc<dyn Fn(&Bits, &StateVector) -> Result<f64> + Send + Sync>;

/// Family given by a closure computing acceptance probabilities directly.
#[derive(Clone)]
pub struct FnFamily {
    keys: Vec<Bits>,
    arity: usize,
    resources: usize,
    f: AcceptFn,
}

impl FnFamily {
    pub fn new(
        keys: Vec<Bits>,
        arity: usize,
        f: impl Fn(&Bits, &StateVector) -> Result<f64> + Send + Sync + 'static,
    ) -> Result<FnFamily> {
        let mut keys = keys;
        check_keys(&mut keys)?;
        Ok(FnFamily {
            keys,
            arity,
            resources: 0,
            f: Arc::new(f),
        })
    }

    pub fn with_resources(mut self, per_eval: usize) -> FnFamily {
        self.resources = per_eval;
        self
    }
}

impl PovmFamily for FnFamily {
    fn keys(&self) -> &[Bits] {
        &self.keys
    }

    fn arity(&self) -> usize {
        self.arity
    }

    fn resources_per_eval(&self) -> usize {
        self.resources
    }

    fn accept_prob(&self, key: &Bits, input: &StateVector) -> Result<f64> {
        (self.f)(key, input)
    }
}

fn check_key(family: &dyn PovmFamily, key: &Bits) -> Result<()> {
    if family.keys().binary_search(key).is_err() {
        return Err(Error::UnknownKey(key.to_string()));
    }
    Ok(())
}

/// Exact acceptance probability of `key` on a pure state.
pub fn exact_accept_prob_pure(family: &dyn PovmFamily, key: &Bits, input: &StateVector) -> Result<f64> {
    check_key(family, key)?;
    if input.num_qubits() != family.arity() {
        return Err(Error::DimensionMismatch {
            expected: family.arity(),
            found: input.num_qubits(),
        });
    }
    Ok(family.accept_prob(key, input)?.clamp(0.0, 1.0))
}

/// Exact acceptance probability of `key` on `input`, by linearity over the
/// eigen-decomposition of the density matrix.
pub fn exact_accept_prob(family: &dyn PovmFamily, key: &Bits, input: &DensityMatrix) -> Result<f64> {
    check_key(family, key)?;
    if input.num_qubits() != family.arity() {
        return Err(Error::DimensionMismatch {
            expected: family.arity(),
            found: input.num_qubits(),
        });
    }
    let (vals, vecs) = input.matrix().hermitian_eigen();
    let d = input.dim();
    let mut p = 0.0;
    for (i, &w) in vals.iter().enumerate() {
        if w <= 1e-14 {
            continue;
        }
        let col = (0..d).map(|r| vecs[(r, i)]).collect();
        p += w * family.accept_prob(key, &StateVector::normalized(col)?)?;
    }
    Ok(p.clamp(0.0, 1.0))
}

/// Input state of which copies are available.
#[derive(Debug, Clone)]
pub enum Input {
    Pure(StateVector),
    Mixed(DensityMatrix),
}

impl Input {
    pub fn num_qubits(&self) -> usize {
        match self {
            Input::Pure(s) => s.num_qubits(),
            Input::Mixed(d) => d.num_qubits(),
        }
    }
}

/// A finite supply of identical copies plus auxiliary resource copies.
#[derive(Debug, Clone)]
pub struct Copies {
    pub input: Input,
    available: usize,
    used: usize,
    resources_available: usize,
    resources_used: usize,
}

impl Copies {
    pub fn new(input: Input, count: usize) -> Copies {
        Copies {
            input,
            available: count,
            used: 0,
            resources_available: 0,
            resources_used: 0,
        }
    }

    pub fn pure(state: StateVector, count: usize) -> Copies {
        Copies::new(Input::Pure(state), count)
    }

    pub fn with_resources(mut self, count: usize) -> Copies {
        self.resources_available = count;
        self
    }

    pub fn remaining(&self) -> usize {
        self.available - self.used
    }

    pub fn used(&self) -> usize {
        self.used
    }

    pub fn resources_used(&self) -> usize {
        self.resources_used
    }

    /// Consumes `n` copies and `n * per_eval` resource copies.
    pub fn take(&mut self, n: usize, per_eval: usize) -> Result<()> {
        if n > self.remaining() {
            return Err(Error::InsufficientCopies {
                needed: n,
                available: self.remaining(),
            });
        }
        let r = n * per_eval;
        if r > self.resources_available - self.resources_used {
            return Err(Error::InsufficientCopies {
                needed: r,
                available: self.resources_available - self.resources_used,
            });
        }
        self.used += n;
        self.resources_used += r;
        Ok(())
    }
}

fn exact_on(family: &dyn PovmFamily, key: &Bits, input: &Input) -> Result<f64> {
    match input {
        Input::Pure(s) => exact_accept_prob_pure(family, key, s),
        Input::Mixed(d) => exact_accept_prob(family, key, d),
    }
}

/// Measures `key` on `batch` fresh copies; returns the acceptance frequency.
pub fn measure_batch(family: &dyn PovmFamily, key: &Bits, copies: &mut Copies, batch: usize, rng: &mut Rng) -> Result<f64> {
    if batch == 0 {
        return Err(Error::InvalidParameter("batch must hold at least one copy".into()));
    }
    let p = exact_on(family, key, &copies.input)?;
    copies.take(batch, family.resources_per_eval())?;
    Ok(rng.binomial(batch as u64, p) as f64 / batch as f64)
}

fn check_accuracy(eps: f64, delta: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0 && delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "need 0 < eps <= 1 and 0 < delta < 1, got eps={eps}, delta={delta}"
        )));
    }
    Ok(())
}

/// Per-key batch for gentle search: every estimate lands within `eps/2` of
/// its exact value with probability `1 - delta` jointly, `ceil(2 ln(2|K|/delta)/eps^2)`.
pub fn gentle_batch_size(keys: usize, eps: f64, delta: f64) -> usize {
    (2.0 * (2.0 * keys as f64 / delta).ln() / (eps * eps)).ceil() as usize
}

/// Per-key batch for shadow tomography, `ceil(ln(2M/delta) / (2 eps^2))`.
pub fn shadow_batch_size(keys: usize, eps: f64, delta: f64) -> usize {
    ((2.0 * keys as f64 / delta).ln() / (2.0 * eps * eps)).ceil() as usize
}

/// How acceptance probabilities are obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    /// Exact probabilities; no copies are spent.
    Exact,
    /// Batched measurements on fresh copies.
    Measured,
}

#[derive(Debug, Clone, Serialize)]
pub struct SearchOutcome {
    pub key: Bits,
    /// Estimates of every key examined, in examination order.
    pub examined: Vec<(Bits, f64)>,
    pub copies_used: usize,
}

/// Returns the lexicographically first key whose estimate reaches
/// `c - eps/2`. With measured estimates each key costs
/// [`gentle_batch_size`] copies, and the returned key's exact acceptance
/// probability is at least `c - eps` with probability `1 - delta` whenever
/// some key reaches `c`.
pub fn gentle_search(
    family: &dyn PovmFamily,
    copies: &mut Copies,
    c: f64,
    eps: f64,
    delta: f64,
    estimator: Estimator,
    rng: &mut Rng,
) -> Result<SearchOutcome> {
    check_accuracy(eps, delta)?;
    let batch = gentle_batch_size(family.keys().len(), eps, delta);
    let start = copies.used();
    let mut examined = Vec::new();
    for key in family.keys() {
        let est = match estimator {
            Estimator::Exact => exact_on(family, key, &copies.input)?,
            Estimator::Measured => match measure_batch(family, key, copies, batch, rng) {
                Ok(v) => v,
                Err(Error::InsufficientCopies { .. }) => return Err(Error::SearchFailed),
                Err(e) => return Err(e),
            },
        };
        examined.push((*key, est));
        if est >= c - eps / 2.0 {
            return Ok(SearchOutcome {
                key: *key,
                examined,
                copies_used: copies.used() - start,
            });
        }
    }
    Err(Error::SearchFailed)
}

/// Estimates per key, each in `[0, 1]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct EstimateTable {
    values: BTreeMap<Bits, f64>,
}

impl EstimateTable {
    pub fn new() -> EstimateTable {
        EstimateTable::default()
    }

    pub fn insert(&mut self, key: Bits, value: f64) -> Result<()> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidParameter(format!("estimate {value} outside [0, 1]")));
        }
        self.values.insert(key, value);
        Ok(())
    }

    pub fn get(&self, key: &Bits) -> Option<f64> {
        self.values.get(key).copied()
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Bits, &f64)> {
        self.values.iter()
    }

    /// Largest absolute difference over the keys of `self`.
    pub fn max_error(&self, reference: &EstimateTable) -> Result<f64> {
        self.values.iter().try_fold(0.0f64, |acc, (k, v)| {
            let r = reference.get(k).ok_or_else(|| Error::UnknownKey(k.to_string()))?;
            Ok(acc.max((v - r).abs()))
        })
    }
}

/// Exact acceptance probabilities of every key.
pub fn exact_table(family: &dyn PovmFamily, input: &Input) -> Result<EstimateTable> {
    let mut t = EstimateTable::new();
    for k in family.keys() {
        t.insert(*k, exact_on(family, k, input)?)?;
    }
    Ok(t)
}

/// Estimates every key's acceptance probability within `eps`, jointly with
/// probability `1 - delta`, from [`shadow_batch_size`] fresh copies per key.
pub fn shadow_tomography(
    family: &dyn PovmFamily,
    copies: &mut Copies,
    eps: f64,
    delta: f64,
    estimator: Estimator,
    rng: &mut Rng,
) -> Result<EstimateTable> {
    check_accuracy(eps, delta)?;
    match estimator {
        Estimator::Exact => exact_table(family, &copies.input),
        Estimator::Measured => {
            let batch = shadow_batch_size(family.keys().len(), eps, delta);
            shadow_tomography_batched(family, copies, batch, rng)
        }
    }
}

/// [`shadow_tomography`] with an explicit per-key batch.
pub fn shadow_tomography_batched(
    family: &dyn PovmFamily,
    copies: &mut Copies,
    batch: usize,
    rng: &mut Rng,
) -> Result<EstimateTable> {
    let needed = batch * family.keys().len();
    if needed > copies.remaining() {
        return Err(Error::InsufficientCopies {
            needed,
            available: copies.remaining(),
        });
    }
    let mut t = EstimateTable::new();
    for k in family.keys() {
        t.insert(*k, measure_batch(family, k, copies, batch, rng)?)?;
    }
    Ok(t)
}
