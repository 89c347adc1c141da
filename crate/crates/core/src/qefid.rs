//! The subset-state sampler pair, its statistical distance, the
//! absolute-to-positive gap transform and the copy-aided trace-distance
//! experiment.

use std::collections::BTreeMap;

use faer::{Mat, Side};
use serde::Serialize;

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::oracle::{all_subsets, sample_subset, subset_size, OracleEnv, SubsetSpec};
use crate::qcore::{measure_computational, statistical_distance, ProbTable, StateVector};
use crate::rng::Rng;

/// Draws from `D_0`: one oracle query on `|1>|0^lambda>`, then a
/// computational-basis measurement of the data register.
pub fn sample_d0(env: &OracleEnv, lambda: u32, rng: &mut Rng) -> Result<Bits> {
    env.spec(lambda)?;
    let n = lambda as usize + 1;
    let mut state = StateVector::basis(n, 1 << lambda)?;
    let targets: Vec<usize> = (0..n).collect();
    env.apply(&mut state, lambda, &targets)?;
    let m = measure_computational(&state, &targets[1..], rng)?;
    Ok(m.outcome)
}

/// Draws from `D_1`: a uniform `lambda`-bit string.
pub fn sample_d1(lambda: u32, rng: &mut Rng) -> Bits {
    Bits::new(rng.next_bits(lambda), lambda)
}

trait NextBits {
    fn next_bits(&mut self, len: u32) -> u64;
}

impl NextBits for Rng {
    fn next_bits(&mut self, len: u32) -> u64 {
        use rand::RngCore;
        if len == 0 {
            0
        } else {
            self.next_u64() >> (64 - len)
        }
    }
}

fn d0_table(spec: &SubsetSpec) -> ProbTable {
    let p = 1.0 / spec.members().len() as f64;
    spec.members().iter().map(|m| (*m, p)).collect()
}

fn d1_table(lambda: u32) -> ProbTable {
    let p = 1.0 / (1u64 << lambda) as f64;
    Bits::all(lambda).map(|x| (x, p)).collect()
}

/// `SD(D_0, D_1)` by enumerating both distributions.
pub fn exact_sd(spec: &SubsetSpec) -> f64 {
    statistical_distance(&d0_table(spec), &d1_table(spec.lambda()))
        .expect("both tables are normalized by construction")
}

/// `1 - 2^(-lambda/2)`.
pub fn sd_closed_form(lambda: u32) -> f64 {
    1.0 - (-(lambda as f64) / 2.0).exp2()
}

/// A classical-output sampler with an exactly known distribution.
pub trait Sampler: Send + Sync {
    fn lambda(&self) -> u32;
    fn sample(&self, env: &OracleEnv, rng: &mut Rng) -> Result<Bits>;
    /// Exact probability of `x` on the instance `spec`.
    fn prob(&self, x: Bits, spec: &SubsetSpec) -> f64;
}

/// `D_0` as a [`Sampler`].
#[derive(Debug, Clone, Copy)]
pub struct SubsetSampler {
    pub lambda: u32,
}

impl Sampler for SubsetSampler {
    fn lambda(&self) -> u32 {
        self.lambda
    }
    fn sample(&self, env: &OracleEnv, rng: &mut Rng) -> Result<Bits> {
        sample_d0(env, self.lambda, rng)
    }
    fn prob(&self, x: Bits, spec: &SubsetSpec) -> f64 {
        if spec.contains(x) {
            1.0 / spec.members().len() as f64
        } else {
            0.0
        }
    }
}

/// `D_1` as a [`Sampler`].
#[derive(Debug, Clone, Copy)]
pub struct UniformSampler {
    pub lambda: u32,
}

impl Sampler for UniformSampler {
    fn lambda(&self) -> u32 {
        self.lambda
    }
    fn sample(&self, _env: &OracleEnv, rng: &mut Rng) -> Result<Bits> {
        Ok(sample_d1(self.lambda, rng))
    }
    fn prob(&self, _x: Bits, _spec: &SubsetSpec) -> f64 {
        (-(self.lambda as f64)).exp2()
    }
}

/// Point mass at a fixed string.
#[derive(Debug, Clone, Copy)]
pub struct PointSampler {
    pub value: Bits,
}

impl Sampler for PointSampler {
    fn lambda(&self) -> u32 {
        self.value.len()
    }
    fn sample(&self, _env: &OracleEnv, _rng: &mut Rng) -> Result<Bits> {
        Ok(self.value)
    }
    fn prob(&self, x: Bits, _spec: &SubsetSpec) -> f64 {
        if x == self.value {
            1.0
        } else {
            0.0
        }
    }
}

/// What a distinguisher may touch besides its challenge.
#[derive(Debug, Default)]
pub struct Resources<'a> {
    pub env: Option<&'a OracleEnv>,
    /// Copies of `|S->`, consumed from the back.
    pub copies: Vec<StateVector>,
}

impl Resources<'_> {
    fn take_copy(&mut self) -> Result<StateVector> {
        self.copies.pop().ok_or(Error::InsufficientCopies {
            needed: 1,
            available: 0,
        })
    }
}

/// A one-bit test on a `lambda`-bit challenge.
pub trait Distinguisher: Send + Sync {
    fn name(&self) -> String;
    /// Copies of `|S->` consumed per invocation.
    fn copies_needed(&self) -> usize {
        0
    }
    fn needs_oracle(&self) -> bool {
        false
    }
    /// Exact acceptance probability on challenge `x` when the instance is
    /// `spec` (and any copies are of `|S->` for that instance).
    fn accept_prob(&self, x: Bits, spec: &SubsetSpec) -> f64;
    fn run(&self, x: Bits, res: &mut Resources<'_>, rng: &mut Rng) -> Result<bool>;
}

/// `E_{x<-s0}[accept] - E_{x<-s1}[accept]` on instance `spec`.
pub fn exact_gap(a: &dyn Distinguisher, s0: &dyn Sampler, s1: &dyn Sampler, spec: &SubsetSpec) -> f64 {
    let lambda = s0.lambda();
    Bits::all(lambda)
        .map(|x| (s0.prob(x, spec) - s1.prob(x, spec)) * a.accept_prob(x, spec))
        .sum()
}

/// Always outputs 0.
#[derive(Debug, Clone, Copy)]
pub struct ConstantZero;

impl Distinguisher for ConstantZero {
    fn name(&self) -> String {
        "constant-zero".into()
    }
    fn accept_prob(&self, _x: Bits, _spec: &SubsetSpec) -> f64 {
        0.0
    }
    fn run(&self, _x: Bits, _res: &mut Resources<'_>, _rng: &mut Rng) -> Result<bool> {
        Ok(false)
    }
}

/// Accepts iff the challenge is in `S`, read off the oracle instance.
#[derive(Debug, Clone, Copy)]
pub struct ExactMembership {
    pub lambda: u32,
}

impl Distinguisher for ExactMembership {
    fn name(&self) -> String {
        "exact-membership".into()
    }
    fn needs_oracle(&self) -> bool {
        true
    }
    fn accept_prob(&self, x: Bits, spec: &SubsetSpec) -> f64 {
        if spec.contains(x) {
            1.0
        } else {
            0.0
        }
    }
    fn run(&self, x: Bits, res: &mut Resources<'_>, _rng: &mut Rng) -> Result<bool> {
        let env = res
            .env
            .ok_or_else(|| Error::InvalidParameter("membership test needs the oracle instance".into()))?;
        Ok(env.spec(self.lambda)?.contains(x))
    }
}

/// Accepts iff the challenge equals a fixed string.
#[derive(Debug, Clone, Copy)]
pub struct EqualsString {
    pub value: Bits,
}

impl Distinguisher for EqualsString {
    fn name(&self) -> String {
        format!("equals-{}", self.value)
    }
    fn accept_prob(&self, x: Bits, _spec: &SubsetSpec) -> f64 {
        if x == self.value {
            1.0
        } else {
            0.0
        }
    }
    fn run(&self, x: Bits, _res: &mut Resources<'_>, _rng: &mut Rng) -> Result<bool> {
        Ok(x == self.value)
    }
}

/// The absolute-to-positive gap transform of `a`.
///
/// On challenge `x`: draw `c`, draw `x'` from `D_c`, let `d = a(x')`,
/// `e = a(x)` and output `1 xor c xor d xor e`. The extra complement makes the
/// positive gap equal `(Pr_0[a] - Pr_1[a])^2`; without it the gap is the
/// negative of that square.
pub struct YaoTransform<'a> {
    pub a: &'a dyn Distinguisher,
    pub s0: &'a dyn Sampler,
    pub s1: &'a dyn Sampler,
}

/// Builds the transformed distinguisher.
pub fn yao_transform<'a>(
    a: &'a dyn Distinguisher,
    s0: &'a dyn Sampler,
    s1: &'a dyn Sampler,
) -> YaoTransform<'a> {
    YaoTransform { a, s0, s1 }
}

impl YaoTransform<'_> {
    /// `Pr[c xor d = 1]` on instance `spec`.
    fn pr_cd_one(&self, spec: &SubsetSpec) -> f64 {
        let lambda = self.s0.lambda();
        let (mut a0, mut b0) = (0.0, 0.0);
        for x in Bits::all(lambda) {
            let acc = self.a.accept_prob(x, spec);
            a0 += self.s0.prob(x, spec) * acc;
            b0 += self.s1.prob(x, spec) * acc;
        }
        // c = 0: d = 1 w.p. a0; c = 1: d = 0 w.p. 1 - b0
        0.5 * a0 + 0.5 * (1.0 - b0)
    }
}

impl Distinguisher for YaoTransform<'_> {
    fn name(&self) -> String {
        format!("yao({})", self.a.name())
    }
    fn copies_needed(&self) -> usize {
        2 * self.a.copies_needed()
    }
    fn needs_oracle(&self) -> bool {
        true
    }
    fn accept_prob(&self, x: Bits, spec: &SubsetSpec) -> f64 {
        let p1 = self.pr_cd_one(spec);
        let e = self.a.accept_prob(x, spec);
        // output 1 iff e == c xor d
        p1 * e + (1.0 - p1) * (1.0 - e)
    }
    fn run(&self, x: Bits, res: &mut Resources<'_>, rng: &mut Rng) -> Result<bool> {
        let env = res
            .env
            .ok_or_else(|| Error::InvalidParameter("the transform samples D_c through the oracle".into()))?;
        let c = rng.coin();
        let xp = if c {
            self.s1.sample(env, rng)?
        } else {
            self.s0.sample(env, rng)?
        };
        let d = self.a.run(xp, res, rng)?;
        let e = self.a.run(x, res, rng)?;
        Ok(!(c ^ d ^ e))
    }
}

/// `2^(-lambda/2 + 1) + sqrt(t 2^(-lambda/2))`.
pub fn statistical_lemma_bound(lambda: u32, t: usize) -> f64 {
    let h = (-(lambda as f64) / 2.0).exp2();
    2.0 * h + (t as f64 * h).sqrt()
}

fn minus_power(spec: &SubsetSpec, t: usize) -> Vec<f64> {
    let v: Vec<f64> = spec.states().s_minus.amplitudes().iter().map(|a| a.re).collect();
    let mut out = vec![1.0];
    for _ in 0..t {
        out = out.iter().flat_map(|a| v.iter().map(move |b| a * b)).collect();
    }
    out
}

fn sym_eigen(m: &Mat<f64>) -> Result<(Vec<f64>, Mat<f64>)> {
    let eig = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Invariant(format!("eigendecomposition failed: {e:?}")))?;
    let vals = (0..m.nrows()).map(|i| eig.S()[i]).collect();
    Ok((vals, eig.U().to_owned()))
}

fn trace_norm_sym(m: &Mat<f64>) -> Result<f64> {
    let ev = m
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Invariant(format!("eigendecomposition failed: {e:?}")))?;
    Ok(ev.iter().map(|e| e.abs()).sum())
}

/// Half the trace norm of `sum_i c_i v_i v_i^T` for the columns `v_i` of `v`.
/// With fewer columns than rows it works on `G^(1/2) C G^(1/2)`, `G = V^T V`,
/// which has the same non-zero spectrum.
struct MixtureDiff<'a> {
    v: &'a Mat<f64>,
    gram_sqrt: Option<Mat<f64>>,
}

impl<'a> MixtureDiff<'a> {
    fn new(v: &'a Mat<f64>) -> Result<MixtureDiff<'a>> {
        let (d, n) = (v.nrows(), v.ncols());
        let gram_sqrt = if n < d {
            let g = v.transpose() * v;
            let (vals, u) = sym_eigen(&g)?;
            let us = Mat::from_fn(n, n, |r, c| u[(r, c)] * vals[c].max(0.0).sqrt());
            Some(&us * u.transpose())
        } else {
            None
        };
        Ok(MixtureDiff { v, gram_sqrt })
    }

    fn half_trace_norm(&self, c: &[f64]) -> Result<f64> {
        let m = match &self.gram_sqrt {
            Some(r) => {
                let rc = Mat::from_fn(r.nrows(), r.ncols(), |i, j| r[(i, j)] * c[j]);
                &rc * r
            }
            None => {
                let vc = Mat::from_fn(self.v.nrows(), self.v.ncols(), |i, j| self.v[(i, j)] * c[j]);
                &vc * self.v.transpose()
            }
        };
        Ok(0.5 * trace_norm_sym(&m)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum LemmaMode {
    /// Enumerate every subset.
    Exact,
    /// Monte-Carlo mixtures over `count` subsets.
    Sampled { count: usize },
}

#[derive(Debug, Clone, Serialize)]
pub struct LemmaResult {
    pub lambda: u32,
    pub t: usize,
    pub mode: LemmaMode,
    /// Trace distance between the two (possibly empirical) mixtures.
    pub td: f64,
    pub bound: f64,
}

/// Largest Gram or register dimension the sampled mode will diagonalize.
pub const MAX_SAMPLED_RANK: usize = 1024;

/// Trace distance between `{|S->^t (x) |s>}` and `{|W->^t (x) |u>}`.
///
/// Both ensembles are block diagonal in the classical register, so the trace
/// distance is the sum of per-string block norms. Within a block the `s <- S`
/// and `u` averages are folded in analytically. In sampled mode the same
/// random subsets serve as `S` and `W`, which only reduces variance.
pub fn statistical_lemma_experiment(lambda: u32, t: usize, mode: LemmaMode, rng: &mut Rng) -> Result<LemmaResult> {
    if t == 0 {
        return Err(Error::InvalidParameter("t must be at least 1".into()));
    }
    let specs = match mode {
        LemmaMode::Exact => {
            if lambda > 4 || t > 2 {
                return Err(Error::Capacity(format!(
                    "exact mode supports lambda <= 4 and t <= 2, got lambda={lambda}, t={t}"
                )));
            }
            all_subsets(lambda)?
        }
        LemmaMode::Sampled { count } => {
            if lambda > 8 {
                return Err(Error::Capacity(format!("sampled mode supports lambda <= 8, got {lambda}")));
            }
            let d = 1usize.checked_shl(lambda * t as u32).unwrap_or(usize::MAX);
            if count == 0 || count.min(d) > MAX_SAMPLED_RANK {
                return Err(Error::Capacity(format!(
                    "sampled mode needs min(count, 2^(lambda t)) <= {MAX_SAMPLED_RANK}, got count={count}"
                )));
            }
            (0..count)
                .map(|_| sample_subset(lambda, rng))
                .collect::<Result<Vec<_>>>()?
        }
    };
    let n = specs.len();
    let d = 1usize << (lambda as usize * t);
    let cols: Vec<Vec<f64>> = specs.iter().map(|s| minus_power(s, t)).collect();
    let v = Mat::from_fn(d, n, |r, c| cols[c][r]);
    let diff = MixtureDiff::new(&v)?;
    let k = subset_size(lambda) as f64;
    let u = (-(lambda as f64)).exp2();
    // strings with the same membership pattern have identical blocks
    let mut patterns: BTreeMap<Vec<bool>, usize> = BTreeMap::new();
    for x in Bits::all(lambda) {
        let pat: Vec<bool> = specs.iter().map(|s| s.contains(x)).collect();
        *patterns.entry(pat).or_insert(0) += 1;
    }
    let mut td = 0.0;
    for (pat, mult) in patterns {
        let c: Vec<f64> = pat
            .iter()
            .map(|&inside| (if inside { 1.0 / k } else { 0.0 } - u) / n as f64)
            .collect();
        td += mult as f64 * diff.half_trace_norm(&c)?;
    }
    Ok(LemmaResult {
        lambda,
        t,
        mode,
        td: td.min(1.0),
        bound: statistical_lemma_bound(lambda, t),
    })
}

/// Measures one copy of `|S->` and accepts iff the outcome equals the challenge.
#[derive(Debug, Clone, Copy)]
pub struct MembershipTester;

/// Swap-tests every copy against `(|x> - |0>)/sqrt 2`; accepts iff all pass.
#[derive(Debug, Clone, Copy)]
pub struct SwapTester {
    pub copies: usize,
}

/// Measures every copy and accepts iff some outcome collides with the challenge.
#[derive(Debug, Clone, Copy)]
pub struct CollisionTester {
    pub copies: usize,
}

fn x_minus(x: Bits) -> Result<StateVector> {
    let n = x.len() as usize;
    let mut amps = vec![crate::C64::new(0.0, 0.0); 1 << n];
    amps[x.index()] += 1.0;
    amps[0] -= 1.0;
    StateVector::normalized(amps)
}

/// `|<x-|S->|^2`, or 0 when `x = 0` (the probe is undefined and the tester
/// then rejects outright).
fn probe_overlap(x: Bits, spec: &SubsetSpec) -> f64 {
    if x.is_zero() {
        return 0.0;
    }
    let k = spec.members().len() as f64;
    let inside = if spec.contains(x) { 1.0 / k.sqrt() } else { 0.0 };
    (0.5 * (1.0 + inside)).powi(2)
}

impl Distinguisher for MembershipTester {
    fn name(&self) -> String {
        "membership".into()
    }
    fn copies_needed(&self) -> usize {
        1
    }
    fn accept_prob(&self, x: Bits, spec: &SubsetSpec) -> f64 {
        let k = spec.members().len() as f64;
        if x.is_zero() {
            0.5
        } else if spec.contains(x) {
            0.5 / k
        } else {
            0.0
        }
    }
    fn run(&self, x: Bits, res: &mut Resources<'_>, rng: &mut Rng) -> Result<bool> {
        let c = res.take_copy()?;
        let targets: Vec<usize> = (0..c.num_qubits()).collect();
        Ok(measure_computational(&c, &targets, rng)?.outcome == x)
    }
}

impl Distinguisher for SwapTester {
    fn name(&self) -> String {
        format!("swap-test-{}", self.copies)
    }
    fn copies_needed(&self) -> usize {
        self.copies
    }
    fn accept_prob(&self, x: Bits, spec: &SubsetSpec) -> f64 {
        if x.is_zero() {
            return 0.0;
        }
        (0.5 * (1.0 + probe_overlap(x, spec))).powi(self.copies as i32)
    }
    fn run(&self, x: Bits, res: &mut Resources<'_>, rng: &mut Rng) -> Result<bool> {
        let probe = if x.is_zero() { None } else { Some(x_minus(x)?) };
        let mut all = true;
        for _ in 0..self.copies {
            let c = res.take_copy()?;
            // swap-test acceptance is (1 + |<a|b>|^2)/2 by the Born rule
            let pass = match &probe {
                Some(p) => rng.bernoulli(0.5 * (1.0 + p.fidelity(&c)?)),
                None => false,
            };
            all &= pass;
        }
        Ok(all)
    }
}

impl Distinguisher for CollisionTester {
    fn name(&self) -> String {
        format!("collision-{}", self.copies)
    }
    fn copies_needed(&self) -> usize {
        self.copies
    }
    fn accept_prob(&self, x: Bits, spec: &SubsetSpec) -> f64 {
        let hit = MembershipTester.accept_prob(x, spec);
        1.0 - (1.0 - hit).powi(self.copies as i32)
    }
    fn run(&self, x: Bits, res: &mut Resources<'_>, rng: &mut Rng) -> Result<bool> {
        let mut hit = false;
        for _ in 0..self.copies {
            hit |= MembershipTester.run(x, res, rng)?;
        }
        Ok(hit)
    }
}

/// The built-in copy-aided testers for `t` copies.
pub fn distinguisher_catalog(t: usize) -> Vec<Box<dyn Distinguisher>> {
    vec![
        Box::new(MembershipTester),
        Box::new(SwapTester { copies: t }),
        Box::new(CollisionTester { copies: t }),
    ]
}

#[derive(Debug, Clone, Serialize)]
pub struct AdvantageResult {
    pub distinguisher: String,
    pub lambda: u32,
    pub t: usize,
    /// `|E_{S, s<-S} accept - E_{W, u} accept|`.
    pub exact: f64,
    pub empirical: f64,
    pub trials: usize,
    pub bound: f64,
}

/// Exact advantage of a copy-aided tester over the two lemma ensembles.
///
/// The catalog testers are invariant under permutations of the non-zero
/// strings, so their acceptance depends only on whether `x = 0` and whether
/// `x` is in the subset; one representative instance covers every case.
pub fn exact_copy_advantage(a: &dyn Distinguisher, lambda: u32) -> Result<f64> {
    let k = subset_size(lambda);
    let rep = SubsetSpec::new(lambda, (1..=k as u64).map(|v| Bits::new(v, lambda)).collect())?;
    let inside = a.accept_prob(Bits::new(1, lambda), &rep);
    let outside = a.accept_prob(Bits::new(k as u64 + 1, lambda), &rep);
    let zero = a.accept_prob(Bits::zeros(lambda), &rep);
    let nonzero = ((1u64 << lambda) - 1) as f64;
    let u = (-(lambda as f64)).exp2();
    let p_in = k as f64 / nonzero;
    let side1 = u * zero + (1.0 - u) * (p_in * inside + (1.0 - p_in) * outside);
    Ok((inside - side1).abs())
}

/// Runs `a` on `trials` challenges, half from each ensemble, and reports the
/// empirical advantage next to the exact one. Trial `i` uses stream `i`.
pub fn copy_advantage_experiment(a: &dyn Distinguisher, lambda: u32, trials: usize, seed: u64) -> Result<AdvantageResult> {
    use rayon::prelude::*;
    let t = a.copies_needed();
    let outcomes: Vec<(bool, bool)> = (0..trials)
        .into_par_iter()
        .map(|i| -> Result<(bool, bool)> {
            let mut rng = Rng::for_trial(seed, i as u64);
            let side_one = i % 2 == 1;
            let spec = sample_subset(lambda, &mut rng)?;
            let x = if side_one {
                sample_d1(lambda, &mut rng)
            } else {
                spec.members()[rng.below(spec.members().len())]
            };
            let copy = spec.states().s_minus;
            let mut res = Resources {
                env: None,
                copies: vec![copy; t],
            };
            Ok((side_one, a.run(x, &mut res, &mut rng)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let count = |side: bool| {
        let runs: Vec<_> = outcomes.iter().filter(|o| o.0 == side).collect();
        runs.iter().filter(|o| o.1).count() as f64 / runs.len().max(1) as f64
    };
    Ok(AdvantageResult {
        distinguisher: a.name(),
        lambda,
        t,
        exact: exact_copy_advantage(a, lambda)?,
        empirical: (count(false) - count(true)).abs(),
        trials,
        bound: statistical_lemma_bound(lambda, t.max(1)),
    })
}
