use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use super::{accept_prob, emulated_accept_prob, generated_state};
use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::oracle::{parse_circuit, OracleAidedCircuit, OracleEnv};
use crate::qcore::{DensityMatrix, StateVector};
use crate::rng::Rng;
use crate::tomography::{exact_accept_prob, FnFamily, Input};

/// Circuit depending on a key.
pub type KeyedCircuit = Arc<dyn Fn(&Bits) -> Result<OracleAidedCircuit> + Send + Sync>;

/// Seed of the oracle sampled for registration-time correctness checks.
const REGISTRATION_SEED: u64 = 0x5eed;

/// Lambdas queried by any of the circuits, and the largest query count of
/// the `bounded` ones.
fn survey(keys: &[Bits], all: &[&KeyedCircuit], bounded: &[&KeyedCircuit]) -> Result<(Vec<u32>, usize)> {
    let mut lambdas = BTreeSet::new();
    let mut q = 0;
    for k in keys {
        for b in all {
            lambdas.extend(b(k)?.query_counts().keys().copied());
        }
        for b in bounded {
            q = q.max(b(k)?.total_queries());
        }
    }
    Ok((lambdas.into_iter().collect(), q))
}

fn check_key_set(kappa: u32, keys: &mut Vec<Bits>) -> Result<()> {
    if keys.is_empty() {
        return Err(Error::InvalidParameter("key set is empty".into()));
    }
    if let Some(k) = keys.iter().find(|k| k.len() != kappa) {
        return Err(Error::InvalidParameter(format!("key {k} does not have length {kappa}")));
    }
    keys.sort();
    keys.dedup();
    Ok(())
}

/// A keyed state generator with a verifier.
#[derive(Clone)]
pub struct OwsgCandidate {
    pub name: String,
    pub kappa: u32,
    keys: Vec<Bits>,
    /// Qubits of one generated state.
    pub state_qubits: usize,
    /// Verifier qubit that reads 1 on acceptance.
    pub accept_qubit: usize,
    /// Declared correctness slack.
    pub slack: f64,
    lambdas: Vec<u32>,
    query_bound: usize,
    gen: KeyedCircuit,
    verify: KeyedCircuit,
}

impl OwsgCandidate {
    /// Registers a candidate after checking, for every key, that the verifier
    /// accepts the generated state with probability at least `1 - slack`.
    ///
    /// `gen(k)` runs from `|0...0>` and leaves the state on its first
    /// `state_qubits` qubits; `verify(k)` reads the state on its first
    /// `state_qubits` qubits.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: &str,
        kappa: u32,
        keys: Option<Vec<Bits>>,
        state_qubits: usize,
        accept_qubit: usize,
        slack: f64,
        gen: KeyedCircuit,
        verify: KeyedCircuit,
    ) -> Result<OwsgCandidate> {
        let mut keys = keys.unwrap_or_else(|| Bits::all(kappa).collect());
        check_key_set(kappa, &mut keys)?;
        if !(0.0..1.0).contains(&slack) {
            return Err(Error::InvalidParameter(format!("slack {slack} outside [0, 1)")));
        }
        let (lambdas, query_bound) = survey(&keys, &[&gen, &verify], &[&verify])?;
        let c = OwsgCandidate {
            name: name.to_string(),
            kappa,
            keys,
            state_qubits,
            accept_qubit,
            slack,
            lambdas,
            query_bound,
            gen,
            verify,
        };
        let env = c.sample_env(&mut Rng::from_seed(REGISTRATION_SEED))?;
        for k in &c.keys {
            let p = c.verify_prob(k, &c.state(k, &env)?, &env)?;
            if p < 1.0 - slack - 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "{name}: key {k} is accepted with probability {p} < 1 - {slack}"
                )));
            }
        }
        Ok(c)
    }

    pub fn keys(&self) -> &[Bits] {
        &self.keys
    }

    pub fn lambdas(&self) -> &[u32] {
        &self.lambdas
    }

    /// Largest number of oracle queries the verifier makes.
    pub fn query_bound(&self) -> usize {
        self.query_bound
    }

    /// Largest queried lambda, 0 when the candidate makes no queries.
    pub fn lambda_bar(&self) -> u32 {
        self.lambdas.last().copied().unwrap_or(0)
    }

    pub fn sample_env(&self, rng: &mut Rng) -> Result<OracleEnv> {
        OracleEnv::sample(&self.lambdas, rng)
    }

    pub fn gen_circuit(&self, key: &Bits) -> Result<OracleAidedCircuit> {
        (self.gen)(key)
    }

    pub fn verify_circuit(&self, key: &Bits) -> Result<OracleAidedCircuit> {
        let c = (self.verify)(key)?;
        if c.num_qubits() < self.state_qubits || self.accept_qubit >= c.num_qubits() {
            return Err(Error::InvalidParameter(format!(
                "verifier for key {key} is narrower than its input or accept qubit"
            )));
        }
        Ok(c)
    }

    /// `phi_k`, with the generator's queries charged to `env`.
    pub fn state(&self, key: &Bits, env: &OracleEnv) -> Result<StateVector> {
        generated_state(&self.gen_circuit(key)?, env, self.state_qubits)
    }

    /// Exact `Pr[V(k, phi) = 1]` with the real oracle.
    pub fn verify_prob(&self, key: &Bits, phi: &StateVector, env: &OracleEnv) -> Result<f64> {
        accept_prob(&self.verify_circuit(key)?, env, phi, self.accept_qubit)
    }

    /// Exact acceptance probability of the emulated verifier fed `ell`
    /// copies per lambda.
    pub fn emulated_verify_prob(
        &self,
        key: &Bits,
        phi: &StateVector,
        env: &OracleEnv,
        ell: &BTreeMap<u32, usize>,
    ) -> Result<f64> {
        emulated_accept_prob(&self.verify_circuit(key)?, env, ell, phi, self.accept_qubit)
    }
}

/// A private-key quantum money scheme with a uniform key distribution.
#[derive(Clone)]
pub struct MoneyScheme {
    pub name: String,
    pub kappa: u32,
    keys: Vec<Bits>,
    /// Qubits of one banknote.
    pub money_qubits: usize,
    pub accept_qubit: usize,
    /// Declared correctness.
    pub mu: f64,
    lambdas: Vec<u32>,
    query_bound: usize,
    mint: KeyedCircuit,
    verify: KeyedCircuit,
}

impl MoneyScheme {
    /// Registers a scheme after checking exact correctness `>= mu` per key.
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        name: &str,
        kappa: u32,
        keys: Option<Vec<Bits>>,
        money_qubits: usize,
        accept_qubit: usize,
        mu: f64,
        mint: KeyedCircuit,
        verify: KeyedCircuit,
    ) -> Result<MoneyScheme> {
        let mut keys = keys.unwrap_or_else(|| Bits::all(kappa).collect());
        check_key_set(kappa, &mut keys)?;
        if !(mu > 0.0 && mu <= 1.0) {
            return Err(Error::InvalidParameter(format!("correctness {mu} outside (0, 1]")));
        }
        let (lambdas, query_bound) = survey(&keys, &[&mint, &verify], &[&mint, &verify])?;
        let s = MoneyScheme {
            name: name.to_string(),
            kappa,
            keys,
            money_qubits,
            accept_qubit,
            mu,
            lambdas,
            query_bound,
            mint,
            verify,
        };
        let env = s.sample_env(&mut Rng::from_seed(REGISTRATION_SEED))?;
        for k in &s.keys {
            let note = s.mint_state(k, &env)?;
            let p = s.verify_prob(k, &Input::Pure(note), &env)?;
            if p < mu - 1e-9 {
                return Err(Error::InvalidParameter(format!(
                    "{name}: key {k} verifies its own banknote with probability {p} < {mu}"
                )));
            }
        }
        Ok(s)
    }

    pub fn keys(&self) -> &[Bits] {
        &self.keys
    }

    pub fn lambdas(&self) -> &[u32] {
        &self.lambdas
    }

    /// Largest query count of mint or verify.
    pub fn query_bound(&self) -> usize {
        self.query_bound
    }

    pub fn sample_env(&self, rng: &mut Rng) -> Result<OracleEnv> {
        OracleEnv::sample(&self.lambdas, rng)
    }

    pub fn keygen(&self, rng: &mut Rng) -> Bits {
        self.keys[rng.below(self.keys.len())]
    }

    pub fn mint_circuit(&self, key: &Bits) -> Result<OracleAidedCircuit> {
        (self.mint)(key)
    }

    pub fn mint_circuit_builder(&self) -> KeyedCircuit {
        self.mint.clone()
    }

    pub fn verify_circuit_builder(&self) -> KeyedCircuit {
        self.verify.clone()
    }

    pub fn verify_circuit(&self, key: &Bits) -> Result<OracleAidedCircuit> {
        let c = (self.verify)(key)?;
        if c.num_qubits() < self.money_qubits || self.accept_qubit >= c.num_qubits() {
            return Err(Error::InvalidParameter(format!(
                "verifier for key {key} is narrower than its input or accept qubit"
            )));
        }
        Ok(c)
    }

    /// `$_k`, with the mint's queries charged to `env`.
    pub fn mint_state(&self, key: &Bits, env: &OracleEnv) -> Result<StateVector> {
        generated_state(&self.mint_circuit(key)?, env, self.money_qubits)
    }

    /// Exact `Pr[Verify(k, rho) = 1]` with the real oracle.
    pub fn verify_prob(&self, key: &Bits, rho: &Input, env: &OracleEnv) -> Result<f64> {
        match rho {
            Input::Pure(s) => accept_prob(&self.verify_circuit(key)?, env, s, self.accept_qubit),
            Input::Mixed(d) => exact_accept_prob(&self.verify_family(env)?, key, d),
        }
    }

    /// `{Verify(k, .)}_k` as a measurement family.
    pub fn verify_family(&self, env: &OracleEnv) -> Result<FnFamily> {
        let me = self.clone();
        let env = env.clone();
        FnFamily::new(self.keys.clone(), self.money_qubits, move |k, s| {
            accept_prob(&me.verify_circuit(k)?, &env, s, me.accept_qubit)
        })
    }

    /// Maximally mixed state on the banknote register.
    pub fn garbage(&self) -> Result<Input> {
        Ok(Input::Mixed(DensityMatrix::maximally_mixed(self.money_qubits)?))
    }
}

/// Key `x || theta` of `2n` bits: qubit `i` holds `H^theta_i |x_i>`.
fn bb84_circuit(key: &Bits, n: usize) -> Result<OracleAidedCircuit> {
    let mut c = OracleAidedCircuit::new(n);
    for i in 0..n {
        if key.bit(i as u32) {
            c.gate("x", &[], &[i])?;
        }
        if key.bit((n + i) as u32) {
            c.gate("h", &[], &[i])?;
        }
    }
    Ok(c)
}

/// Measures each qubit in its key basis; accepts iff every outcome is `x_i`.
/// The accept qubit is `n`.
fn bb84_verify(key: &Bits, n: usize) -> Result<OracleAidedCircuit> {
    let mut c = OracleAidedCircuit::new(n + 1);
    for i in 0..n {
        if key.bit((n + i) as u32) {
            c.gate("h", &[], &[i])?;
        }
    }
    let ctl: Vec<_> = (0..n).map(|i| (i, key.bit(i as u32))).collect();
    c.controlled("x", &[], &[n], &ctl)?;
    Ok(c)
}

/// Wiesner states on `n` qubits as a one-way state generator (`kappa = 2n`).
pub fn wiesner_owsg(n: usize) -> Result<OwsgCandidate> {
    OwsgCandidate::new(
        "wiesner",
        2 * n as u32,
        None,
        n,
        n,
        0.0,
        Arc::new(move |k| bb84_circuit(k, n)),
        Arc::new(move |k| bb84_verify(k, n)),
    )
}

/// Wiesner money on `n` qubits (`kappa = 2n`).
pub fn wiesner_money(n: usize) -> Result<MoneyScheme> {
    MoneyScheme::new(
        "wiesner-money",
        2 * n as u32,
        None,
        n,
        n,
        1.0,
        Arc::new(move |k| bb84_circuit(k, n)),
        Arc::new(move |k| bb84_verify(k, n)),
    )
}

/// Appends a swap test between `left` and `right` on ancilla `anc`; `anc`
/// reads 0 with probability `(1 + |<l|r>|^2) / 2`.
fn swap_test(c: &mut OracleAidedCircuit, anc: usize, left: &[usize], right: &[usize]) -> Result<()> {
    c.gate("h", &[], &[anc])?;
    for (&l, &r) in left.iter().zip(right) {
        c.controlled("swap", &[], &[l, r], &[(anc, true)])?;
    }
    c.gate("h", &[], &[anc])
}

/// `kappa`-fold product of a keyed pure-state family, verified by
/// regenerating the copies and swap-testing each against its input block.
///
/// `family(k)` prepares `phi_k` on `width` qubits from `|0>` and must return
/// any work qubits beyond `width` to `|0>`.
pub fn swap_test_owsg(name: &str, keys: Vec<Bits>, width: usize, kappa: usize, family: KeyedCircuit) -> Result<OwsgCandidate> {
    if kappa == 0 || width == 0 {
        return Err(Error::InvalidParameter("need at least one copy of at least one qubit".into()));
    }
    let key_len = keys.first().map(|k| k.len()).unwrap_or(0);
    let f = family.clone();
    let gen: KeyedCircuit = Arc::new(move |k| {
        let one = f(k)?;
        let extra = one.num_qubits().saturating_sub(width);
        let mut c = OracleAidedCircuit::new(kappa * width + extra);
        for i in 0..kappa {
            let map: Vec<usize> = (0..one.num_qubits())
                .map(|q| if q < width { i * width + q } else { kappa * width + q - width })
                .collect();
            c.embed(&one, &map, &format!("g{i}."))?;
        }
        Ok(c)
    });
    let f = family;
    let n = kappa * width;
    let verify: KeyedCircuit = Arc::new(move |k| {
        let one = f(k)?;
        let extra = one.num_qubits().saturating_sub(width);
        // input | regenerated copies | swap ancillas | accept | family work qubits
        let anc0 = 2 * n;
        let accept = anc0 + kappa;
        let mut c = OracleAidedCircuit::new(accept + 1 + extra);
        for i in 0..kappa {
            let map: Vec<usize> = (0..one.num_qubits())
                .map(|q| if q < width { n + i * width + q } else { accept + 1 + q - width })
                .collect();
            c.embed(&one, &map, &format!("r{i}."))?;
            let left: Vec<usize> = (i * width..(i + 1) * width).collect();
            let right: Vec<usize> = left.iter().map(|q| q + n).collect();
            swap_test(&mut c, anc0 + i, &left, &right)?;
        }
        let ctl: Vec<_> = (anc0..anc0 + kappa).map(|a| (a, false)).collect();
        c.controlled("x", &[], &[accept], &ctl)?;
        Ok(c)
    });
    OwsgCandidate::new(name, key_len, Some(keys), n, 2 * n + kappa, 0.0, gen, verify)
}

/// Prepares `-|0>|S_lambda->` deterministically with one query: `U_S` on
/// `|->|0^lambda>` gives `(|0>|0> - |1>|S>)/sqrt(2)`, and flipping the control
/// whenever the data register is nonzero clears it.
fn prepare_s_minus(c: &mut OracleAidedCircuit, lambda: u32, control: usize, data: &[usize]) -> Result<()> {
    c.gate("x", &[], &[control])?;
    c.gate("h", &[], &[control])?;
    let mut targets = vec![control];
    targets.extend_from_slice(data);
    c.oracle(lambda, &targets)?;
    c.gate("x", &[], &[control])?;
    let zero: Vec<_> = data.iter().map(|&q| (q, false)).collect();
    c.controlled("x", &[], &[control], &zero)
}

/// Generator `|k>` whose verifier spends two cancelling queries on an
/// ancilla `|1>|0^lambda>` before swap-testing its input against `|k>`.
pub fn oracle_echo_owsg(kappa: u32, lambda: u32) -> Result<OwsgCandidate> {
    let n = kappa as usize;
    let l = lambda as usize;
    let gen: KeyedCircuit = Arc::new(move |k| {
        let mut c = OracleAidedCircuit::new(n);
        for i in 0..n {
            if k.bit(i as u32) {
                c.gate("x", &[], &[i])?;
            }
        }
        Ok(c)
    });
    let verify: KeyedCircuit = Arc::new(move |k| {
        // input | echo block | reference |k> | swap ancilla | accept
        let block: Vec<usize> = (n..n + 1 + l).collect();
        let reference = n + 1 + l;
        let anc = reference + n;
        let mut c = OracleAidedCircuit::new(anc + 2);
        c.gate("x", &[], &[block[0]])?;
        c.oracle(lambda, &block)?;
        c.oracle(lambda, &block)?;
        c.gate("x", &[], &[block[0]])?;
        for i in 0..n {
            if k.bit(i as u32) {
                c.gate("x", &[], &[reference + i])?;
            }
        }
        let left: Vec<usize> = (0..n).collect();
        let right: Vec<usize> = (reference..reference + n).collect();
        swap_test(&mut c, anc, &left, &right)?;
        c.controlled("x", &[], &[anc + 1], &[(anc, false)])?;
        Ok(c)
    });
    OwsgCandidate::new("oracle-echo", kappa, None, n, 2 * n + l + 2, 0.0, gen, verify)
}

/// Banknote `|k> (x) |S_lambda->`, verified by checking the key register in
/// the computational basis and swap-testing the second register against a
/// freshly prepared `|S_lambda->`. One query for each of mint and verify.
pub fn subset_pair_money(kappa: u32, lambda: u32) -> Result<MoneyScheme> {
    let kb = kappa as usize;
    let l = lambda as usize;
    let n = kb + l;
    let mint: KeyedCircuit = Arc::new(move |k| {
        let mut c = OracleAidedCircuit::new(n + 1);
        for i in 0..kb {
            if k.bit(i as u32) {
                c.gate("x", &[], &[i])?;
            }
        }
        prepare_s_minus(&mut c, lambda, n, &(kb..n).collect::<Vec<_>>())?;
        Ok(c)
    });
    let verify: KeyedCircuit = Arc::new(move |k| {
        // banknote | fresh control, fresh data | swap ancilla | accept
        let fresh: Vec<usize> = (n + 1..n + 1 + l).collect();
        let anc = n + 1 + l;
        let mut c = OracleAidedCircuit::new(anc + 2);
        prepare_s_minus(&mut c, lambda, n, &fresh)?;
        swap_test(&mut c, anc, &(kb..n).collect::<Vec<_>>(), &fresh)?;
        let mut ctl: Vec<_> = (0..kb).map(|i| (i, k.bit(i as u32))).collect();
        ctl.push((anc, false));
        c.controlled("x", &[], &[anc + 1], &ctl)?;
        Ok(c)
    });
    MoneyScheme::new("subset-pair", kappa, None, n, n + l + 2, 1.0, mint, verify)
}

/// Keyed circuit from the text format where a line may start with
/// `@kI=B`, keeping it only when key bit `I` equals `B`. Several prefixes on
/// one line must all hold.
pub fn keyed_template(template: &str) -> Result<KeyedCircuit> {
    // parse once with every conditional line kept to surface syntax errors
    let keep_all: String = template
        .lines()
        .map(|l| strip_conditions(l).map(|(_, body)| body))
        .collect::<Result<Vec<_>>>()?
        .join("\n");
    parse_circuit(&keep_all)?;
    let template = template.to_string();
    Ok(Arc::new(move |k: &Bits| {
        let mut lines = Vec::new();
        for (no, line) in template.lines().enumerate() {
            let (conds, body) = strip_conditions(line)?;
            let mut keep = true;
            for (i, b) in conds {
                if i >= k.len() {
                    return Err(Error::Parse {
                        line: no + 1,
                        msg: format!("key bit {i} out of range for a {}-bit key", k.len()),
                    });
                }
                keep &= k.bit(i) == b;
            }
            lines.push(if keep { body } else { String::new() });
        }
        parse_circuit(&lines.join("\n"))
    }))
}

fn strip_conditions(line: &str) -> Result<(Vec<(u32, bool)>, String)> {
    let mut conds = Vec::new();
    let mut rest = line.trim_start();
    while let Some(tail) = rest.strip_prefix("@k") {
        let (tok, after) = tail.split_once(char::is_whitespace).unwrap_or((tail, ""));
        let bad = || Error::Parse {
            line: 0,
            msg: format!("bad key condition `@k{tok}`"),
        };
        let (i, b) = tok.split_once('=').ok_or_else(bad)?;
        let i: u32 = i.parse().map_err(|_| bad())?;
        let b = match b {
            "0" => false,
            "1" => true,
            _ => return Err(bad()),
        };
        conds.push((i, b));
        rest = after.trim_start();
    }
    Ok((conds, rest.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key(s: &str) -> Bits {
        s.parse().unwrap()
    }

    #[test]
    fn wiesner_verify_is_a_product_of_per_qubit_factors() {
        let c = wiesner_owsg(2).unwrap();
        assert_eq!(c.keys().len(), 16);
        assert_eq!(c.query_bound(), 0);
        let env = OracleEnv::new();
        // x=01 theta=01 against x=01 theta=00: second qubit in the wrong basis
        let phi = c.state(&key("0101"), &env).unwrap();
        assert!((c.verify_prob(&key("0100"), &phi, &env).unwrap() - 0.5).abs() < 1e-12);
        // wrong bit in the right basis
        assert!(c.verify_prob(&key("1101"), &phi, &env).unwrap() < 1e-12);
    }

    #[test]
    fn garbage_verifies_with_one_over_dimension() {
        let s = wiesner_money(3).unwrap();
        let env = OracleEnv::new();
        let p = s.verify_prob(&key("101010"), &s.garbage().unwrap(), &env).unwrap();
        assert!((p - 1.0 / 8.0).abs() < 1e-12);
        assert!(p <= 0.75f64.powi(3));
    }

    #[test]
    fn swap_test_family_accepts_per_overlap() {
        // ry(theta) |0>, overlap between keys 0 and 1 set to 0.8
        let theta = 2.0 * 0.8f64.sqrt().acos();
        let fam: KeyedCircuit = Arc::new(move |k: &Bits| {
            let mut c = OracleAidedCircuit::new(1);
            c.gate("ry", &[theta * k.index() as f64], &[0])?;
            Ok(c)
        });
        let kappa = 3;
        let c = swap_test_owsg("ry", vec![key("0"), key("1")], 1, kappa, fam).unwrap();
        let env = OracleEnv::new();
        let phi1 = c.state(&key("1"), &env).unwrap();
        let p = c.verify_prob(&key("0"), &phi1, &env).unwrap();
        assert!((p - 0.9f64.powi(kappa as i32)).abs() < 1e-12);
        assert!((c.verify_prob(&key("1"), &phi1, &env).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn swap_test_orthogonal_states() {
        let fam: KeyedCircuit = Arc::new(|k: &Bits| {
            let mut c = OracleAidedCircuit::new(1);
            if k.bit(0) {
                c.gate("x", &[], &[0])?;
            }
            Ok(c)
        });
        let c = swap_test_owsg("basis", vec![key("0"), key("1")], 1, 4, fam).unwrap();
        let env = OracleEnv::new();
        let p = c.verify_prob(&key("0"), &c.state(&key("1"), &env).unwrap(), &env).unwrap();
        assert!((p - 0.0625).abs() < 1e-12);
    }

    #[test]
    fn oracle_echo_makes_two_queries_and_is_correct() {
        let c = oracle_echo_owsg(3, 2).unwrap();
        assert_eq!(c.query_bound(), 2);
        assert_eq!(c.lambdas(), &[2]);
        let env = c.sample_env(&mut Rng::from_seed(3)).unwrap();
        let phi = c.state(&key("110"), &env).unwrap();
        assert!((c.verify_prob(&key("010"), &phi, &env).unwrap() - 0.5).abs() < 1e-12);
        let ell = [(2, 10)].into();
        let e = c.emulated_verify_prob(&key("110"), &phi, &env, &ell).unwrap();
        assert!((e - 1.0).abs() < 1e-10);
    }

    #[test]
    fn subset_pair_mint_holds_s_minus() {
        let s = subset_pair_money(2, 2).unwrap();
        let mut rng = Rng::from_seed(8);
        let env = s.sample_env(&mut rng).unwrap();
        let note = s.mint_state(&key("10"), &env).unwrap();
        assert_eq!(env.total_queries(), 1);
        let expect = StateVector::from_bits(key("10")).unwrap().tensor(&env.axis(2).unwrap().slice_on(&[1, 2], 1).unwrap()).unwrap();
        assert!(note.fidelity(&expect).unwrap() > 1.0 - 1e-12);
        let other = s.verify_prob(&key("11"), &Input::Pure(note.clone()), &env).unwrap();
        assert!(other < 1e-12);
        assert!((s.verify_prob(&key("10"), &Input::Pure(note), &env).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn template_keeps_lines_by_key_bit() {
        let gen = keyed_template("qubits 2\n@k0=1 x 0\n@k1=1 @k0=0 x 1\n").unwrap();
        assert_eq!(gen(&key("10")).unwrap().gates().len(), 1);
        assert_eq!(gen(&key("01")).unwrap().gates().len(), 1);
        assert_eq!(gen(&key("00")).unwrap().gates().len(), 0);
        assert!(keyed_template("qubits 1\n@kx=1 x 0\n").is_err());
        assert!(gen(&key("1")).is_err());
    }
}
