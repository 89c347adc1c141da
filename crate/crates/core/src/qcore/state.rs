use std::fmt;

use super::kernel::{self, bit_of};
use super::{CMatrix, Control};
use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::policy::policy;
use crate::rng::Rng;
use crate::C64;

/// Normalized pure state on `num_qubits` qubits.
#[derive(Clone, PartialEq)]
pub struct StateVector {
    num_qubits: usize,
    amps: Vec<C64>,
}

impl fmt::Debug for StateVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StateVector[{}](", self.num_qubits)?;
        let mut first = true;
        for (i, a) in self.amps.iter().enumerate() {
            if a.norm() > 1e-12 {
                if !first {
                    write!(f, " ")?;
                }
                first = false;
                write!(
                    f,
                    "{:+.4}{:+.4}i|{}>",
                    a.re,
                    a.im,
                    Bits::new(i as u64, self.num_qubits as u32)
                )?;
            }
        }
        write!(f, ")")
    }
}

fn check_capacity(n: usize) -> Result<()> {
    if n > policy().max_state_qubits {
        return Err(Error::Capacity(format!(
            "{n}-qubit state exceeds the {}-qubit limit",
            policy().max_state_qubits
        )));
    }
    Ok(())
}

impl StateVector {
    /// `|0...0>`.
    pub fn zero(num_qubits: usize) -> Result<StateVector> {
        StateVector::basis(num_qubits, 0)
    }

    pub fn basis(num_qubits: usize, index: usize) -> Result<StateVector> {
        check_capacity(num_qubits)?;
        let dim = 1usize << num_qubits;
        if index >= dim {
            return Err(Error::InvalidParameter(format!(
                "basis index {index} out of range for {num_qubits} qubits"
            )));
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Ok(StateVector { num_qubits, amps })
    }

    pub fn from_bits(b: Bits) -> Result<StateVector> {
        StateVector::basis(b.len() as usize, b.index())
    }

    /// Validates length `2^n` and unit norm.
    pub fn from_amplitudes(amps: Vec<C64>) -> Result<StateVector> {
        let sv = StateVector::from_unnormalized(amps)?;
        let norm = sv.norm();
        if (norm - 1.0).abs() > policy().norm_tol {
            return Err(Error::NotNormalized(format!("norm {norm}")));
        }
        Ok(sv)
    }

    /// Rescales to unit norm. Fails on the zero vector.
    pub fn normalized(amps: Vec<C64>) -> Result<StateVector> {
        let mut sv = StateVector::from_unnormalized(amps)?;
        let norm = sv.norm();
        if norm < 1e-300 {
            return Err(Error::ZeroNorm);
        }
        sv.amps.iter_mut().for_each(|a| *a /= norm);
        Ok(sv)
    }

    /// Wraps an arbitrary vector of length `2^n`; used for projections.
    pub fn from_unnormalized(amps: Vec<C64>) -> Result<StateVector> {
        if !amps.len().is_power_of_two() {
            return Err(Error::DimensionMismatch {
                expected: amps.len().next_power_of_two(),
                found: amps.len(),
            });
        }
        let num_qubits = amps.len().trailing_zeros() as usize;
        check_capacity(num_qubits)?;
        Ok(StateVector { num_qubits, amps })
    }

    pub fn from_real(amps: &[f64]) -> Result<StateVector> {
        StateVector::from_amplitudes(amps.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// `|+>^{\otimes n}`.
    pub fn plus(num_qubits: usize) -> Result<StateVector> {
        check_capacity(num_qubits)?;
        let dim = 1usize << num_qubits;
        let a = C64::new(1.0 / (dim as f64).sqrt(), 0.0);
        Ok(StateVector {
            num_qubits,
            amps: vec![a; dim],
        })
    }

    /// Haar-ish random state from Gaussian amplitudes.
    pub fn random(num_qubits: usize, rng: &mut Rng) -> Result<StateVector> {
        use rand_distr::{Distribution, StandardNormal};
        check_capacity(num_qubits)?;
        let amps = (0..1usize << num_qubits)
            .map(|_| {
                let re: f64 = StandardNormal.sample(rng);
                let im: f64 = StandardNormal.sample(rng);
                C64::new(re, im)
            })
            .collect();
        StateVector::normalized(amps)
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn amplitude(&self, b: Bits) -> C64 {
        self.amps[b.index()]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    /// `<self|other>`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(self
            .amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum())
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        Ok(self.inner(other)?.norm_sqr())
    }

    pub fn tensor(&self, other: &StateVector) -> Result<StateVector> {
        check_capacity(self.num_qubits + other.num_qubits)?;
        let mut amps = Vec::with_capacity(self.dim() * other.dim());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        Ok(StateVector {
            num_qubits: self.num_qubits + other.num_qubits,
            amps,
        })
    }

    /// Tensor product of a sequence of states, left to right.
    pub fn tensor_all<'a>(parts: impl IntoIterator<Item = &'a StateVector>) -> Result<StateVector> {
        parts
            .into_iter()
            .try_fold(StateVector::zero(0)?, |acc, s| acc.tensor(s))
    }

    pub fn scaled(&self, s: C64) -> StateVector {
        StateVector {
            num_qubits: self.num_qubits,
            amps: self.amps.iter().map(|a| a * s).collect(),
        }
    }

    pub fn sub(&self, other: &StateVector) -> Result<StateVector> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(StateVector {
            num_qubits: self.num_qubits,
            amps: self.amps.iter().zip(&other.amps).map(|(a, b)| a - b).collect(),
        })
    }

    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Applies `unitary` to `targets` in place.
    pub fn apply_mut(&mut self, unitary: &CMatrix, targets: &[usize]) -> Result<()> {
        kernel::apply_matrix(&mut self.amps, self.num_qubits, 1, unitary, targets, &[])
    }

    /// Applies `unitary` to `targets` on the branch selected by `controls`.
    pub fn apply_controlled_mut(
        &mut self,
        unitary: &CMatrix,
        targets: &[usize],
        controls: &[Control],
    ) -> Result<()> {
        kernel::apply_matrix(&mut self.amps, self.num_qubits, 1, unitary, targets, controls)
    }

    /// Functional form of [`StateVector::apply_mut`].
    pub fn apply_unitary(&self, unitary: &CMatrix, targets: &[usize]) -> Result<StateVector> {
        let mut out = self.clone();
        out.apply_mut(unitary, targets)?;
        Ok(out)
    }

    /// `I - 2|v><v|` on `targets` (controlled on `control` if given), where `v`
    /// is a unit vector on `targets`.
    pub fn reflect_about_mut(
        &mut self,
        axis: &StateVector,
        targets: &[usize],
        control: Option<Control>,
    ) -> Result<()> {
        kernel::reflect_rank1(
            &mut self.amps,
            self.num_qubits,
            1,
            axis.amplitudes(),
            targets,
            control,
        )
    }

    /// Born probabilities of every outcome on `targets`, indexed by the
    /// outcome bitstring value (first target most significant).
    pub fn marginal(&self, targets: &[usize]) -> Result<Vec<f64>> {
        kernel::check_targets(self.num_qubits, targets)?;
        let k = targets.len();
        let mut probs = vec![0.0; 1 << k];
        for (i, a) in self.amps.iter().enumerate() {
            let p = a.norm_sqr();
            if p == 0.0 {
                continue;
            }
            probs[self.extract(i, targets)] += p;
        }
        Ok(probs)
    }

    /// Probability that qubit `q` reads 1.
    pub fn prob_one(&self, q: usize) -> Result<f64> {
        Ok(self.marginal(&[q])?[1])
    }

    fn extract(&self, index: usize, targets: &[usize]) -> usize {
        targets.iter().fold(0usize, |acc, &q| {
            acc << 1 | (index >> bit_of(self.num_qubits, q) & 1)
        })
    }

    /// Projects `targets` onto `outcome` and renormalizes.
    pub fn collapse(&self, targets: &[usize], outcome: usize) -> Result<StateVector> {
        kernel::check_targets(self.num_qubits, targets)?;
        let amps = self
            .amps
            .iter()
            .enumerate()
            .map(|(i, a)| {
                if self.extract(i, targets) == outcome {
                    *a
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect();
        StateVector::normalized(amps)
    }

    /// Keeps `keep` qubits when the remaining qubits are in the basis state
    /// `rest` (first remaining qubit most significant). Unnormalized.
    pub fn slice_on(&self, keep: &[usize], rest_value: usize) -> Result<StateVector> {
        kernel::check_targets(self.num_qubits, keep)?;
        let others: Vec<usize> = (0..self.num_qubits).filter(|q| !keep.contains(q)).collect();
        let mut amps = vec![C64::new(0.0, 0.0); 1 << keep.len()];
        for (i, a) in self.amps.iter().enumerate() {
            if self.extract(i, &others) == rest_value {
                amps[self.extract(i, keep)] = *a;
            }
        }
        StateVector::from_unnormalized(amps)
    }

    /// Reorders qubits: new qubit `i` is old qubit `order[i]`.
    pub fn permute_qubits(&self, order: &[usize]) -> Result<StateVector> {
        if order.len() != self.num_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits,
                found: order.len(),
            });
        }
        kernel::check_targets(self.num_qubits, order)?;
        let mut amps = vec![C64::new(0.0, 0.0); self.dim()];
        for (i, a) in self.amps.iter().enumerate() {
            amps[self.extract(i, order)] = *a;
        }
        Ok(StateVector {
            num_qubits: self.num_qubits,
            amps,
        })
    }
}

/// Outcome of a computational-basis measurement.
#[derive(Debug, Clone)]
pub struct Measurement {
    pub outcome: Bits,
    pub collapsed: StateVector,
    pub probability: f64,
}

/// Samples an outcome on `targets` with Born probabilities and collapses.
pub fn measure_computational(
    state: &StateVector,
    targets: &[usize],
    rng: &mut Rng,
) -> Result<Measurement> {
    let probs = state.marginal(targets)?;
    let total: f64 = probs.iter().sum();
    if total <= 1e-300 {
        return Err(Error::ZeroNorm);
    }
    let mut u = rng.uniform() * total;
    let mut outcome = probs.len() - 1;
    for (i, p) in probs.iter().enumerate() {
        if *p <= 0.0 {
            continue;
        }
        if u < *p {
            outcome = i;
            break;
        }
        u -= p;
    }
    // guard against landing on a zero-probability tail through round-off
    while probs[outcome] <= 0.0 {
        outcome -= 1;
    }
    let collapsed = state.collapse(targets, outcome)?;
    Ok(Measurement {
        outcome: Bits::new(outcome as u64, targets.len() as u32),
        collapsed,
        probability: probs[outcome] / total,
    })
}
