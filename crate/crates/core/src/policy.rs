//! The single numerical-policy record shared by every module.

use std::sync::OnceLock;

#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct NumericalPolicy {
    /// Allowed deviation of a pure state's L2 norm from 1.
    pub norm_tol: f64,
    /// Entrywise Hermiticity tolerance for density matrices.
    pub hermitian_tol: f64,
    /// Allowed deviation of a density matrix trace from 1.
    pub trace_tol: f64,
    /// Most negative eigenvalue accepted in a density matrix.
    pub eigen_floor: f64,
    /// Allowed deviation of a probability table's total mass from 1.
    pub probability_tol: f64,
    /// Largest pure state, in qubits.
    pub max_state_qubits: usize,
    /// Largest density matrix, in qubits.
    pub max_density_qubits: usize,
    /// Largest number of register permutations averaged by the symmetric projector.
    pub max_permutations: usize,
}

impl Default for NumericalPolicy {
    fn default() -> Self {
        NumericalPolicy {
            norm_tol: 1e-10,
            hermitian_tol: 1e-9,
            trace_tol: 1e-9,
            eigen_floor: -1e-8,
            probability_tol: 1e-9,
            max_state_qubits: 22,
            max_density_qubits: 13,
            max_permutations: 5040,
        }
    }
}

static POLICY: OnceLock<NumericalPolicy> = OnceLock::new();

/// The active policy. Defaults apply unless [`set_policy`] ran first.
pub fn policy() -> &'static NumericalPolicy {
    POLICY.get_or_init(NumericalPolicy::default)
}

/// Installs a policy. Returns `false` if one was already in effect.
pub fn set_policy(p: NumericalPolicy) -> bool {
    POLICY.set(p).is_ok()
}
