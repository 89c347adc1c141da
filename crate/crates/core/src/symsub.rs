//! Projector and reflection about the symmetric subspace of equally sized
//! registers, computed by averaging register-permuted amplitude arrays.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::policy::policy;
use crate::qcore::kernel::bit_of;
use crate::qcore::StateVector;
use crate::C64;

/// `block_count` contiguous registers of `block_qubits` qubits each, starting
/// at qubit `base_offset`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RegisterBlock {
    pub block_qubits: usize,
    pub block_count: usize,
    pub base_offset: usize,
}

impl RegisterBlock {
    pub fn new(block_qubits: usize, block_count: usize, base_offset: usize) -> Result<RegisterBlock> {
        if block_qubits == 0 || block_count == 0 {
            return Err(Error::InvalidParameter(
                "register blocks need at least one qubit and one block".into(),
            ));
        }
        Ok(RegisterBlock {
            block_qubits,
            block_count,
            base_offset,
        })
    }

    /// Qubit lists of each block.
    pub fn layout(&self) -> Vec<Vec<usize>> {
        (0..self.block_count)
            .map(|b| {
                let start = self.base_offset + b * self.block_qubits;
                (start..start + self.block_qubits).collect()
            })
            .collect()
    }
}

fn factorial_capped(n: usize, cap: usize) -> Option<usize> {
    (1..=n).try_fold(1usize, |acc, k| acc.checked_mul(k).filter(|v| *v <= cap))
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    let mut cur: Vec<usize> = (0..n).collect();
    let mut out = vec![cur.clone()];
    loop {
        let Some(i) = (1..n).rev().find(|&i| cur[i - 1] < cur[i]) else {
            return out;
        };
        let j = (i..n).rev().find(|&j| cur[j] > cur[i - 1]).expect("pivot exists");
        cur.swap(i - 1, j);
        cur[i..].reverse();
        out.push(cur.clone());
    }
}

struct Shuffler {
    /// `place[b][v]`: index bits that put value `v` into block `b`.
    place: Vec<Vec<usize>>,
    clear_mask: usize,
    perms: Vec<Vec<usize>>,
}

impl Shuffler {
    fn new(n: usize, blocks: &[Vec<usize>]) -> Result<Shuffler> {
        let width = blocks.first().map(Vec::len).unwrap_or(0);
        if blocks.is_empty() || width == 0 || blocks.iter().any(|b| b.len() != width) {
            return Err(Error::InvalidParameter(
                "symmetric subspace needs non-empty blocks of equal size".into(),
            ));
        }
        let flat: Vec<usize> = blocks.iter().flatten().copied().collect();
        crate::qcore::kernel::check_targets(n, &flat)?;
        let cap = policy().max_permutations;
        if factorial_capped(blocks.len(), cap).is_none() {
            return Err(Error::Capacity(format!(
                "{}! register permutations exceed the limit of {cap}",
                blocks.len()
            )));
        }
        let place = blocks
            .iter()
            .map(|qs| {
                (0..1usize << width)
                    .map(|v| {
                        qs.iter().enumerate().fold(0usize, |acc, (i, &q)| {
                            if v >> (width - 1 - i) & 1 == 1 {
                                acc | 1 << bit_of(n, q)
                            } else {
                                acc
                            }
                        })
                    })
                    .collect()
            })
            .collect();
        let clear_mask = !flat.iter().fold(0usize, |acc, &q| acc | 1 << bit_of(n, q));
        Ok(Shuffler {
            place,
            clear_mask,
            perms: permutations(blocks.len()),
        })
    }

    fn block_values(&self, index: usize, n: usize, blocks: &[Vec<usize>], out: &mut [usize]) {
        for (o, qs) in out.iter_mut().zip(blocks) {
            *o = qs
                .iter()
                .fold(0usize, |acc, &q| acc << 1 | (index >> bit_of(n, q) & 1));
        }
    }
}

/// Unnormalized projection of `amps` (an `n`-qubit array) onto the symmetric
/// subspace of `blocks`.
pub fn project_amplitudes(amps: &[C64], n: usize, blocks: &[Vec<usize>]) -> Result<Vec<C64>> {
    let sh = Shuffler::new(n, blocks)?;
    let scale = 1.0 / sh.perms.len() as f64;
    let mut out = vec![C64::new(0.0, 0.0); amps.len()];
    out.par_chunks_mut(1 << 10)
        .enumerate()
        .for_each(|(chunk, slot)| {
            let mut vals = vec![0usize; blocks.len()];
            for (k, o) in slot.iter_mut().enumerate() {
                let i = chunk * (1 << 10) + k;
                sh.block_values(i, n, blocks, &mut vals);
                let rest = i & sh.clear_mask;
                let mut acc = C64::new(0.0, 0.0);
                for p in &sh.perms {
                    let src = p
                        .iter()
                        .enumerate()
                        .fold(rest, |idx, (b, &from)| idx | sh.place[b][vals[from]]);
                    acc += amps[src];
                }
                *o = acc * scale;
            }
        });
    Ok(out)
}

/// Projection onto the symmetric subspace of `blocks` (identity elsewhere)
/// with its squared norm.
pub fn symmetric_project(state: &StateVector, blocks: &RegisterBlock) -> Result<(StateVector, f64)> {
    symmetric_project_on(state, &blocks.layout())
}

/// [`symmetric_project`] over arbitrary equally sized qubit lists.
pub fn symmetric_project_on(state: &StateVector, blocks: &[Vec<usize>]) -> Result<(StateVector, f64)> {
    let p = project_amplitudes(state.amplitudes(), state.num_qubits(), blocks)?;
    let projected = StateVector::from_unnormalized(p)?;
    let weight = projected.norm_sqr();
    Ok((projected, weight))
}

/// `(I - 2 Proj_sym) state`.
pub fn symmetric_reflect(state: &StateVector, blocks: &RegisterBlock) -> Result<StateVector> {
    symmetric_reflect_on(state, &blocks.layout())
}

/// [`symmetric_reflect`] over arbitrary equally sized qubit lists.
pub fn symmetric_reflect_on(state: &StateVector, blocks: &[Vec<usize>]) -> Result<StateVector> {
    let p = project_amplitudes(state.amplitudes(), state.num_qubits(), blocks)?;
    let amps = state
        .amplitudes()
        .iter()
        .zip(&p)
        .map(|(a, b)| a - b * 2.0)
        .collect();
    StateVector::from_unnormalized(amps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::gates;
    use crate::rng::Rng;
    use proptest::prelude::*;

    fn singlet() -> StateVector {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        StateVector::from_real(&[0.0, h, -h, 0.0]).unwrap()
    }

    fn pair() -> RegisterBlock {
        RegisterBlock::new(1, 2, 0).unwrap()
    }

    #[test]
    fn lexicographic_permutations() {
        let p = permutations(3);
        assert_eq!(p.len(), 6);
        assert_eq!(p[0], vec![0, 1, 2]);
        assert_eq!(p[1], vec![0, 2, 1]);
        assert_eq!(p[5], vec![2, 1, 0]);
    }

    #[test]
    fn product_of_identical_copies_is_fixed() {
        let mut rng = Rng::from_seed(3);
        let psi = StateVector::random(2, &mut rng).unwrap();
        let prod = StateVector::tensor_all([&psi, &psi, &psi]).unwrap();
        let blocks = RegisterBlock::new(2, 3, 0).unwrap();
        let (proj, w) = symmetric_project(&prod, &blocks).unwrap();
        assert!((w - 1.0).abs() < 1e-12);
        assert!(proj.max_abs_diff(&prod) < 1e-12);
        let refl = symmetric_reflect(&prod, &blocks).unwrap();
        assert!(refl.max_abs_diff(&prod.scaled(C64::new(-1.0, 0.0))) < 1e-12);
    }

    #[test]
    fn antisymmetric_state() {
        let (proj, w) = symmetric_project(&singlet(), &pair()).unwrap();
        assert!(w < 1e-15);
        assert!(proj.norm() < 1e-15);
        let refl = symmetric_reflect(&singlet(), &pair()).unwrap();
        assert!(refl.max_abs_diff(&singlet()) < 1e-15);
    }

    #[test]
    fn basis_pair_projects_to_half() {
        let s = StateVector::basis(2, 0b01).unwrap();
        let (proj, w) = symmetric_project(&s, &pair()).unwrap();
        // average of |01> and |10>
        assert!((w - 0.5).abs() < 1e-15);
        assert!((proj.amplitudes()[1].re - 0.5).abs() < 1e-15);
        assert!((proj.amplitudes()[2].re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn blocks_leave_other_qubits_alone() {
        // |a> on qubit 0, blocks on qubits 1 and 2
        let a = StateVector::from_real(&[0.6, 0.8]).unwrap();
        let s = a.tensor(&StateVector::basis(2, 0b01).unwrap()).unwrap();
        let blocks = RegisterBlock::new(1, 2, 1).unwrap();
        let (proj, w) = symmetric_project(&s, &blocks).unwrap();
        assert!((w - 0.5).abs() < 1e-12);
        assert!((proj.amplitudes()[0b101].re - 0.4).abs() < 1e-12);
        assert!((proj.amplitudes()[0b110].re - 0.4).abs() < 1e-12);
    }

    #[test]
    fn capacity_limit() {
        let s = StateVector::zero(8).unwrap();
        let blocks = RegisterBlock::new(1, 8, 0).unwrap();
        assert!(symmetric_project(&s, &blocks).unwrap_err().is_capacity());
    }

    #[test]
    fn ragged_blocks_rejected() {
        let s = StateVector::zero(3).unwrap();
        assert!(symmetric_project_on(&s, &[vec![0], vec![1, 2]]).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn projection_is_idempotent(seed in any::<u64>(), count in 2usize..5) {
            let mut rng = Rng::from_seed(seed);
            let s = StateVector::random(count + 1, &mut rng).unwrap();
            let blocks = RegisterBlock::new(1, count, 1).unwrap();
            let (p1, _) = symmetric_project(&s, &blocks).unwrap();
            let p2 = project_amplitudes(p1.amplitudes(), p1.num_qubits(), &blocks.layout()).unwrap();
            let diff = p1.amplitudes().iter().zip(&p2).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
            prop_assert!(diff < 1e-9);
        }

        #[test]
        fn reflection_is_involution(seed in any::<u64>()) {
            let mut rng = Rng::from_seed(seed);
            let s = StateVector::random(6, &mut rng).unwrap();
            let blocks = RegisterBlock::new(2, 3, 0).unwrap();
            let r = symmetric_reflect(&s, &blocks).unwrap();
            prop_assert!((r.norm() - 1.0).abs() < 1e-9);
            let back = symmetric_reflect(&r, &blocks).unwrap();
            prop_assert!(back.max_abs_diff(&s) < 1e-9);
        }

        #[test]
        fn copy_claim_inner_product(seed in any::<u64>(), ell in 1usize..5) {
            let mut rng = Rng::from_seed(seed);
            let phi = StateVector::random(1, &mut rng).unwrap();
            let psi = StateVector::random(1, &mut rng).unwrap();
            let mut parts = vec![&phi];
            parts.extend(std::iter::repeat_n(&psi, ell));
            let input = StateVector::tensor_all(parts).unwrap();
            let blocks = RegisterBlock::new(1, ell + 1, 0).unwrap();
            let b = symmetric_reflect(&input, &blocks).unwrap();
            let mut a = input.clone();
            a.reflect_about_mut(&psi, &[0], None).unwrap();
            let ip = a.inner(&b).unwrap();
            let l = ell as f64;
            let closed = (l - 1.0) / (l + 1.0) + 2.0 / (l + 1.0) * psi.fidelity(&phi).unwrap();
            prop_assert!(ip.im.abs() < 1e-9);
            prop_assert!((ip.re - closed).abs() < 1e-9);
            prop_assert!(ip.re >= 1.0 - 2.0 / (l + 1.0) - 1e-9);
        }

        #[test]
        fn commutes_with_collective_unitary(seed in any::<u64>(), theta in -3.2f64..3.2) {
            let mut rng = Rng::from_seed(seed);
            let s = StateVector::random(4, &mut rng).unwrap();
            let blocks = RegisterBlock::new(1, 3, 1).unwrap();
            let u = gates::ry(theta).matmul(&gates::rz(0.7 * theta)).matmul(&gates::h());
            let mut ua = s.clone();
            for q in 1..4 {
                ua.apply_mut(&u, &[q]).unwrap();
            }
            let left = symmetric_reflect(&ua, &blocks).unwrap();
            let mut right = symmetric_reflect(&s, &blocks).unwrap();
            for q in 1..4 {
                right.apply_mut(&u, &[q]).unwrap();
            }
            prop_assert!(left.max_abs_diff(&right) < 1e-9);
        }
    }
}
