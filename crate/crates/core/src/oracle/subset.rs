use serde::Serialize;

use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::qcore::StateVector;
use crate::rng::Rng;
use crate::C64;

pub const MAX_LAMBDA: u32 = 12;

/// A subset `S` of `{0,1}^lambda \ {0^lambda}` with `2^(lambda/2)` members.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SubsetSpec {
    lambda: u32,
    members: Vec<Bits>,
}

fn check_lambda(lambda: u32) -> Result<()> {
    if !(2..=MAX_LAMBDA).contains(&lambda) || lambda % 2 == 1 {
        return Err(Error::InvalidParameter(format!(
            "lambda must be even and in 2..={MAX_LAMBDA}, got {lambda}"
        )));
    }
    Ok(())
}

/// `2^(lambda/2)`.
pub fn subset_size(lambda: u32) -> usize {
    1usize << (lambda / 2)
}

impl SubsetSpec {
    /// Validates and sorts `members`.
    pub fn new(lambda: u32, mut members: Vec<Bits>) -> Result<SubsetSpec> {
        check_lambda(lambda)?;
        members.sort();
        members.dedup();
        if members.len() != subset_size(lambda) {
            return Err(Error::InvalidParameter(format!(
                "subset for lambda={lambda} needs {} distinct members, got {}",
                subset_size(lambda),
                members.len()
            )));
        }
        if let Some(bad) = members.iter().find(|m| m.len() != lambda || m.is_zero()) {
            return Err(Error::InvalidParameter(format!(
                "invalid subset member {bad} for lambda={lambda}"
            )));
        }
        Ok(SubsetSpec { lambda, members })
    }

    /// Parses members written as bitstrings.
    pub fn from_strs(lambda: u32, members: &[&str]) -> Result<SubsetSpec> {
        let parsed = members
            .iter()
            .map(|s| s.parse::<Bits>())
            .collect::<Result<Vec<_>>>()?;
        SubsetSpec::new(lambda, parsed)
    }

    pub fn lambda(&self) -> u32 {
        self.lambda
    }

    pub fn members(&self) -> &[Bits] {
        &self.members
    }

    pub fn contains(&self, x: Bits) -> bool {
        self.members.binary_search(&x).is_ok()
    }

    /// `|S>`, `|S->` and `|S+>` on `lambda` qubits.
    pub fn states(&self) -> SubsetStates {
        let dim = 1usize << self.lambda;
        let amp = 1.0 / (self.members.len() as f64).sqrt();
        let mut s = vec![C64::new(0.0, 0.0); dim];
        for m in &self.members {
            s[m.index()] = C64::new(amp, 0.0);
        }
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let mut minus: Vec<C64> = s.iter().map(|a| a * h).collect();
        let mut plus = minus.clone();
        minus[0] = C64::new(-h, 0.0);
        plus[0] = C64::new(h, 0.0);
        let wrap = |v| StateVector::from_amplitudes(v).expect("subset states are normalized");
        SubsetStates {
            s: wrap(s),
            s_minus: wrap(minus),
            s_plus: wrap(plus),
        }
    }

    /// The reflection axis `|1>|S->` on `lambda + 1` qubits.
    pub fn axis(&self) -> StateVector {
        let one = StateVector::basis(1, 1).expect("one qubit");
        one.tensor(&self.states().s_minus)
            .expect("axis fits the state capacity")
    }
}

#[derive(Debug, Clone)]
pub struct SubsetStates {
    pub s: StateVector,
    pub s_minus: StateVector,
    pub s_plus: StateVector,
}

/// Free-function form of [`SubsetSpec::states`].
pub fn subset_states(spec: &SubsetSpec) -> SubsetStates {
    spec.states()
}

/// Uniformly random subset via a partial Fisher-Yates shuffle of the
/// non-zero strings.
pub fn sample_subset(lambda: u32, rng: &mut Rng) -> Result<SubsetSpec> {
    check_lambda(lambda)?;
    let mut pool: Vec<u64> = (1..1u64 << lambda).collect();
    let k = subset_size(lambda);
    for i in 0..k {
        let j = i + rng.below(pool.len() - i);
        pool.swap(i, j);
    }
    SubsetSpec::new(lambda, pool[..k].iter().map(|&v| Bits::new(v, lambda)).collect())
}

/// Every valid subset for `lambda`, in lexicographic order of member sets.
/// Only small `lambda` are enumerable (`C(15, 4) = 1365` at `lambda = 4`).
pub fn all_subsets(lambda: u32) -> Result<Vec<SubsetSpec>> {
    check_lambda(lambda)?;
    if lambda > 4 {
        return Err(Error::Capacity(format!(
            "subset enumeration is limited to lambda <= 4, got {lambda}"
        )));
    }
    let n = (1usize << lambda) - 1;
    let k = subset_size(lambda);
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(SubsetSpec {
            lambda,
            members: idx.iter().map(|&i| Bits::new(i as u64 + 1, lambda)).collect(),
        });
        let Some(pos) = (0..k).rev().find(|&p| idx[p] < n - k + p) else {
            return Ok(out);
        };
        idx[pos] += 1;
        for p in pos + 1..k {
            idx[p] = idx[p - 1] + 1;
        }
    }
}
