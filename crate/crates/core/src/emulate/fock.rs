//! Exact occupation-number backend for emulated circuits.
//!
//! The `ell` copies of `psi` for one `lambda` are only ever touched by
//! reflections about the symmetric subspace, so their joint state stays
//! symmetric and is described by occupation numbers over the `N = 2^(lambda+1)`
//! modes of a basis whose first vector is `psi`. Each query moves at most one
//! excitation between the query register and the copies, so after `K` queries
//! at most `min(K, ell)` copies are excited. The copy register is stored as a
//! superposition over those truncated occupation states, which is exact.
//!
//! The query register is rotated into the same basis by `B^dagger` before the
//! reflection and back by `B` afterwards, where `B e_0 = psi`.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::oracle::{Gate, OracleAidedCircuit, OracleEnv};
use crate::qcore::{kernel, CMatrix, StateVector};
use crate::C64;

/// Largest amplitude array the backend will allocate.
pub const MAX_FOCK_AMPLITUDES: usize = 1 << 25;

/// Unitary whose first column is `psi`: a phase times a Householder reflection.
pub(crate) fn basis_change(psi: &[C64]) -> CMatrix {
    let n = psi.len();
    let alpha = if psi[0].norm() > 0.0 { psi[0].arg() } else { 0.0 };
    let phase = C64::from_polar(1.0, alpha);
    let mut u: Vec<C64> = psi.iter().map(|a| -a * phase.conj()).collect();
    u[0] += 1.0;
    let norm_sqr: f64 = u.iter().map(C64::norm_sqr).sum();
    let mut b = CMatrix::identity(n);
    if norm_sqr > 1e-28 {
        for r in 0..n {
            for c in 0..n {
                b[(r, c)] -= u[r] * u[c].conj() * (2.0 / norm_sqr);
            }
        }
    }
    b.scale(phase)
}

/// Truncated symmetric copy register for one `lambda`.
struct CopySpace {
    lambda: u32,
    modes: usize,
    /// Rotation taking `e_0` to the reflection axis.
    b: CMatrix,
    b_dag: CMatrix,
    /// Number of copy occupation states.
    dim: usize,
    /// `up[n * modes + j]`: index of the `ell + 1` register state `n + e_j`.
    up: Vec<u32>,
    /// `sqrt((n_j + 1) / (ell + 1))`, laid out like `up`.
    weight: Vec<f64>,
    big_dim: usize,
}

fn multisets(modes: usize, max_len: usize) -> Vec<Vec<u16>> {
    // excited modes are 1..modes, stored sorted
    let mut out = vec![Vec::new()];
    let mut frontier = vec![Vec::<u16>::new()];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for m in &frontier {
            let lo = m.last().copied().unwrap_or(1);
            for j in lo..modes as u16 {
                let mut e = m.clone();
                e.push(j);
                next.push(e);
            }
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out
}

fn multiset_count(modes: usize, max_len: usize) -> Option<usize> {
    // sum_{s <= max_len} C(modes - 1 + s - 1, s)
    let k = modes - 1;
    let mut total: usize = 1;
    let mut term: u128 = 1;
    for s in 1..=max_len {
        term = term * (k + s - 1) as u128 / s as u128;
        total = total.checked_add(usize::try_from(term).ok()?)?;
    }
    Some(total)
}

impl CopySpace {
    fn new(lambda: u32, axis: &[C64], ell: usize, queries: usize) -> CopySpace {
        let modes = axis.len();
        let excited = queries.min(ell);
        let copies = multisets(modes, excited);
        let mut big: HashMap<Vec<u16>, u32> = HashMap::new();
        let mut up = Vec::with_capacity(copies.len() * modes);
        let mut weight = Vec::with_capacity(copies.len() * modes);
        for n in &copies {
            for j in 0..modes {
                let occ = if j == 0 {
                    ell - n.len()
                } else {
                    n.iter().filter(|&&m| m as usize == j).count()
                };
                let mut m = n.clone();
                if j > 0 {
                    let pos = m.partition_point(|&x| (x as usize) <= j);
                    m.insert(pos, j as u16);
                }
                let next = big.len() as u32;
                up.push(*big.entry(m).or_insert(next));
                weight.push(((occ + 1) as f64 / (ell + 1) as f64).sqrt());
            }
        }
        let b = basis_change(axis);
        CopySpace {
            lambda,
            modes,
            b_dag: b.adjoint(),
            b,
            dim: copies.len(),
            up,
            weight,
            big_dim: big.len(),
        }
    }
}

/// Joint state of the source register and every copy register.
#[derive(Debug, Clone)]
pub struct FockState {
    num_qubits: usize,
    /// `index = work * inner + f`, with `f` mixed radix over the copy spaces in
    /// ascending `lambda` order, the first most significant.
    amps: Vec<C64>,
    inner: usize,
}

impl FockState {
    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    /// Number of copy occupation states summed over.
    pub fn copy_dim(&self) -> usize {
        self.inner
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(C64::norm_sqr).sum()
    }

    /// `<reference (x) psi^ell ... | self>`: the copy-unexcited component.
    pub fn overlap_with_copies(&self, reference: &StateVector) -> Result<C64> {
        if reference.num_qubits() != self.num_qubits {
            return Err(Error::DimensionMismatch {
                expected: self.num_qubits,
                found: reference.num_qubits(),
            });
        }
        Ok(reference
            .amplitudes()
            .iter()
            .enumerate()
            .map(|(w, a)| a.conj() * self.amps[w * self.inner])
            .sum())
    }

    /// Probability that source qubit `q` reads 1, copies traced out.
    pub fn prob_one(&self, q: usize) -> Result<f64> {
        kernel::check_targets(self.num_qubits, &[q])?;
        let bit = kernel::bit_of(self.num_qubits, q);
        Ok(self
            .amps
            .chunks(self.inner)
            .enumerate()
            .filter(|(w, _)| w >> bit & 1 == 1)
            .flat_map(|(_, c)| c.iter().map(C64::norm_sqr))
            .sum())
    }

    /// Probability mass left with every copy register unexcited.
    pub fn copies_intact_weight(&self) -> f64 {
        (0..1usize << self.num_qubits)
            .map(|w| self.amps[w * self.inner].norm_sqr())
            .sum()
    }
}

fn reflect_symmetric(
    amps: &mut [C64],
    n: usize,
    inner: usize,
    space: &CopySpace,
    outer: usize,
    stride: usize,
    targets: &[usize],
) -> Result<()> {
    let layout = kernel::Layout::new(n, targets, &[])?;
    let mut c = vec![C64::new(0.0, 0.0); space.big_dim];
    let modes = space.modes;
    for base in layout.bases() {
        for h in 0..outer {
            for l in 0..stride {
                c.iter_mut().for_each(|x| *x = C64::new(0.0, 0.0));
                let at = |j: usize, ni: usize| (base | layout.offsets[j]) * inner + (h * space.dim + ni) * stride + l;
                for ni in 0..space.dim {
                    for j in 0..modes {
                        let k = ni * modes + j;
                        c[space.up[k] as usize] += amps[at(j, ni)] * space.weight[k];
                    }
                }
                for ni in 0..space.dim {
                    for j in 0..modes {
                        let k = ni * modes + j;
                        amps[at(j, ni)] -= c[space.up[k] as usize] * (2.0 * space.weight[k]);
                    }
                }
            }
        }
    }
    Ok(())
}

/// Runs the emulation of a unitary oracle-aided `circuit`: every oracle gate
/// at `lambda` becomes the symmetric reflection over its target block and
/// `ell[lambda]` copies of `|1>|S_lambda->`, the copies starting untouched.
pub fn run_fock(
    circuit: &OracleAidedCircuit,
    env: &OracleEnv,
    ell: &BTreeMap<u32, usize>,
    input: &StateVector,
) -> Result<FockState> {
    let n = circuit.num_qubits();
    if input.num_qubits() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: input.num_qubits(),
        });
    }
    if !circuit.is_unitary() {
        return Err(Error::NotDeferred(
            "emulation needs a circuit without measurements or discards".into(),
        ));
    }
    let mut spaces = Vec::new();
    let mut inner: usize = 1;
    for (&lambda, &q) in circuit.query_counts() {
        let l = *ell
            .get(&lambda)
            .ok_or_else(|| Error::InvalidParameter(format!("no copy count for lambda={lambda}")))?;
        if l == 0 {
            return Err(Error::InvalidParameter("copy count must be at least 1".into()));
        }
        let modes = 1usize << (lambda + 1);
        let d = multiset_count(modes, q.min(l))
            .filter(|d| d.saturating_mul(modes) <= MAX_FOCK_AMPLITUDES)
            .ok_or_else(|| Error::Capacity(format!("copy space for lambda={lambda} is too large")))?;
        inner = inner
            .checked_mul(d)
            .filter(|&f| f.checked_shl(n as u32).is_some_and(|t| t >> n == f && t <= MAX_FOCK_AMPLITUDES))
            .ok_or_else(|| {
                Error::Capacity(format!(
                    "emulated state needs more than {MAX_FOCK_AMPLITUDES} amplitudes"
                ))
            })?;
        spaces.push(CopySpace::new(lambda, env.axis(lambda)?.amplitudes(), l, q));
    }
    let mut amps = vec![C64::new(0.0, 0.0); inner << n];
    for (w, a) in input.amplitudes().iter().enumerate() {
        amps[w * inner] = *a;
    }
    // (outer, stride) radix of each copy space inside the inner index
    let mut radix = Vec::with_capacity(spaces.len());
    let mut outer = 1;
    for s in &spaces {
        radix.push((outer, inner / (outer * s.dim)));
        outer *= s.dim;
    }
    for g in circuit.gates() {
        match g {
            Gate::Unitary {
                matrix,
                targets,
                controls,
                ..
            } => kernel::apply_matrix(&mut amps, n, inner, matrix, targets, controls)?,
            Gate::Oracle { lambda, targets } => {
                let i = spaces.iter().position(|s| s.lambda == *lambda).expect("counted lambda");
                let s = &spaces[i];
                kernel::apply_matrix(&mut amps, n, inner, &s.b_dag, targets, &[])?;
                reflect_symmetric(&mut amps, n, inner, s, radix[i].0, radix[i].1, targets)?;
                kernel::apply_matrix(&mut amps, n, inner, &s.b, targets, &[])?;
            }
            Gate::SymReflect { .. } => {
                return Err(Error::InvalidParameter(
                    "source circuit already contains symmetric reflections".into(),
                ))
            }
            Gate::Measure { .. } | Gate::Discard { .. } => unreachable!("checked unitary"),
        }
    }
    Ok(FockState {
        num_qubits: n,
        amps,
        inner,
    })
}
