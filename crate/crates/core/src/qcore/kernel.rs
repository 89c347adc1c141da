//! Amplitude-array kernels shared by the state-vector, density-matrix and
//! occupation-number backends.
//!
//! Arrays are laid out as `index = work * inner + f`, where `work` is the
//! `n`-qubit computational index (qubit 0 most significant) and `f` ranges
//! over an opaque inner factor that gates never touch.

use super::{CMatrix, Control};
use crate::error::{Error, Result};
use crate::C64;

/// Bit position of qubit `q` in an `n`-qubit index.
#[inline]
pub(crate) fn bit_of(n: usize, q: usize) -> usize {
    n - 1 - q
}

pub(crate) fn check_targets(n: usize, targets: &[usize]) -> Result<()> {
    let mut seen = 0u64;
    for &q in targets {
        if q >= n {
            return Err(Error::TargetOutOfRange {
                qubit: q,
                num_qubits: n,
            });
        }
        if seen >> q & 1 == 1 {
            return Err(Error::DuplicateTarget(q));
        }
        seen |= 1 << q;
    }
    Ok(())
}

/// Index layout for an operation on `targets`, optionally gated by `controls`.
pub(crate) struct Layout {
    /// Offsets of each target configuration, first target most significant.
    pub offsets: Vec<usize>,
    /// Bit positions of the qubits that are neither targets nor controls.
    free: Vec<usize>,
    /// Fixed bits contributed by the controls.
    control_bits: usize,
}

impl Layout {
    pub fn new(n: usize, targets: &[usize], controls: &[Control]) -> Result<Layout> {
        let mut all: Vec<usize> = targets.to_vec();
        all.extend(controls.iter().map(|c| c.0));
        check_targets(n, &all)?;
        let k = targets.len();
        let offsets = (0..1usize << k)
            .map(|t| {
                targets.iter().enumerate().fold(0usize, |acc, (i, &q)| {
                    if t >> (k - 1 - i) & 1 == 1 {
                        acc | 1 << bit_of(n, q)
                    } else {
                        acc
                    }
                })
            })
            .collect();
        let used: Vec<usize> = all.iter().map(|&q| bit_of(n, q)).collect();
        let free = (0..n).filter(|b| !used.contains(b)).collect();
        let control_bits = controls
            .iter()
            .filter(|c| c.1)
            .fold(0usize, |acc, c| acc | 1 << bit_of(n, c.0));
        Ok(Layout {
            offsets,
            free,
            control_bits,
        })
    }

    pub fn bases(&self) -> impl Iterator<Item = usize> + '_ {
        (0..1usize << self.free.len()).map(move |c| {
            let mut idx = self.control_bits;
            for (i, &b) in self.free.iter().enumerate() {
                if c >> i & 1 == 1 {
                    idx |= 1 << b;
                }
            }
            idx
        })
    }
}

/// Applies `m` to `targets` of every inner slice, gated by `controls`.
pub(crate) fn apply_matrix(
    amps: &mut [C64],
    n: usize,
    inner: usize,
    m: &CMatrix,
    targets: &[usize],
    controls: &[Control],
) -> Result<()> {
    if m.dim() != 1usize << targets.len() {
        return Err(Error::DimensionMismatch {
            expected: 1usize << targets.len(),
            found: m.dim(),
        });
    }
    debug_assert_eq!(amps.len(), inner << n);
    let layout = Layout::new(n, targets, controls)?;
    let d = m.dim();
    let mut buf = vec![C64::new(0.0, 0.0); d];
    let mut out = vec![C64::new(0.0, 0.0); d];
    for base in layout.bases() {
        for f in 0..inner {
            for (t, off) in layout.offsets.iter().enumerate() {
                buf[t] = amps[(base | off) * inner + f];
            }
            for (r, o) in out.iter_mut().enumerate() {
                let row = &m.data()[r * d..(r + 1) * d];
                *o = row.iter().zip(&buf).map(|(a, b)| a * b).sum();
            }
            for (t, off) in layout.offsets.iter().enumerate() {
                amps[(base | off) * inner + f] = out[t];
            }
        }
    }
    Ok(())
}

/// Applies `I - 2|c,v><c,v|`: the reflection about `axis` on `targets`,
/// acting only on the branch where `control` holds (if any).
pub(crate) fn reflect_rank1(
    amps: &mut [C64],
    n: usize,
    inner: usize,
    axis: &[C64],
    targets: &[usize],
    control: Option<Control>,
) -> Result<()> {
    if axis.len() != 1usize << targets.len() {
        return Err(Error::DimensionMismatch {
            expected: 1usize << targets.len(),
            found: axis.len(),
        });
    }
    let controls: Vec<Control> = control.into_iter().collect();
    let layout = Layout::new(n, targets, &controls)?;
    for base in layout.bases() {
        for f in 0..inner {
            let overlap: C64 = layout
                .offsets
                .iter()
                .zip(axis)
                .map(|(off, a)| a.conj() * amps[(base | off) * inner + f])
                .sum();
            if overlap == C64::new(0.0, 0.0) {
                continue;
            }
            let s = overlap * 2.0;
            for (off, a) in layout.offsets.iter().zip(axis) {
                amps[(base | off) * inner + f] -= s * a;
            }
        }
    }
    Ok(())
}
