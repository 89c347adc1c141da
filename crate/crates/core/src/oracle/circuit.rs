use std::collections::BTreeMap;

use super::env::OracleEnv;
use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::qcore::{gates, measure_computational, CMatrix, Control, DensityMatrix, StateVector};
use crate::rng::Rng;
use crate::symsub;

/// Classical condition: the gate fires iff measurement `tag` read `value`.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub tag: String,
    pub value: Bits,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    Unitary {
        /// Gate name from [`gates::by_name`], or `custom`.
        name: String,
        params: Vec<f64>,
        matrix: CMatrix,
        targets: Vec<usize>,
        controls: Vec<Control>,
        condition: Option<Condition>,
    },
    /// `U_S` for the subset at `lambda`; `targets[0]` is the control.
    Oracle { lambda: u32, targets: Vec<usize> },
    /// Reflection about the symmetric subspace of equally sized blocks.
    SymReflect { blocks: Vec<Vec<usize>> },
    Measure { tag: String, targets: Vec<usize> },
    Discard { targets: Vec<usize> },
}

impl Gate {
    fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::Unitary {
                targets, controls, ..
            } => targets.iter().copied().chain(controls.iter().map(|c| c.0)).collect(),
            Gate::Oracle { targets, .. }
            | Gate::Measure { targets, .. }
            | Gate::Discard { targets } => targets.clone(),
            Gate::SymReflect { blocks } => blocks.iter().flatten().copied().collect(),
        }
    }

    fn remap(&self, map: &[usize], prefix: &str) -> Gate {
        let m = |qs: &[usize]| qs.iter().map(|&q| map[q]).collect::<Vec<_>>();
        match self {
            Gate::Unitary {
                name,
                params,
                matrix,
                targets,
                controls,
                condition,
            } => Gate::Unitary {
                name: name.clone(),
                params: params.clone(),
                matrix: matrix.clone(),
                targets: m(targets),
                controls: controls.iter().map(|&(q, b)| (map[q], b)).collect(),
                condition: condition.as_ref().map(|c| Condition {
                    tag: format!("{prefix}{}", c.tag),
                    value: c.value,
                }),
            },
            Gate::Oracle { lambda, targets } => Gate::Oracle {
                lambda: *lambda,
                targets: m(targets),
            },
            Gate::SymReflect { blocks } => Gate::SymReflect {
                blocks: blocks.iter().map(|b| m(b)).collect(),
            },
            Gate::Measure { tag, targets } => Gate::Measure {
                tag: format!("{prefix}{tag}"),
                targets: m(targets),
            },
            Gate::Discard { targets } => Gate::Discard { targets: m(targets) },
        }
    }
}

/// Gate list over base gates and oracle queries.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleAidedCircuit {
    num_qubits: usize,
    gates: Vec<Gate>,
    queries: BTreeMap<u32, usize>,
}

impl OracleAidedCircuit {
    pub fn new(num_qubits: usize) -> OracleAidedCircuit {
        OracleAidedCircuit {
            num_qubits,
            gates: Vec::new(),
            queries: BTreeMap::new(),
        }
    }

    pub fn num_qubits(&self) -> usize {
        self.num_qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    /// Number of oracle gates at `lambda`.
    pub fn declared_query_count(&self, lambda: u32) -> usize {
        self.queries.get(&lambda).copied().unwrap_or(0)
    }

    pub fn query_counts(&self) -> &BTreeMap<u32, usize> {
        &self.queries
    }

    pub fn total_queries(&self) -> usize {
        self.queries.values().sum()
    }

    /// No measurements, discards or classical conditions.
    pub fn is_unitary(&self) -> bool {
        self.gates.iter().all(|g| match g {
            Gate::Unitary { condition, .. } => condition.is_none(),
            Gate::Measure { .. } | Gate::Discard { .. } => false,
            _ => true,
        })
    }

    /// Validates and appends a gate.
    pub fn push(&mut self, gate: Gate) -> Result<()> {
        let qs = gate.qubits();
        check_qubits(self.num_qubits, &qs)?;
        match &gate {
            Gate::Unitary { matrix, targets, .. } => {
                if matrix.dim() != 1usize << targets.len() {
                    return Err(Error::DimensionMismatch {
                        expected: 1usize << targets.len(),
                        found: matrix.dim(),
                    });
                }
            }
            Gate::Oracle { lambda, targets } => {
                if targets.len() != *lambda as usize + 1 {
                    return Err(Error::OracleArity {
                        lambda: *lambda,
                        expected: *lambda as usize + 1,
                        found: targets.len(),
                    });
                }
                *self.queries.entry(*lambda).or_insert(0) += 1;
            }
            Gate::SymReflect { blocks } => {
                let w = blocks.first().map(Vec::len).unwrap_or(0);
                if w == 0 || blocks.iter().any(|b| b.len() != w) {
                    return Err(Error::InvalidParameter(
                        "symmetric reflection needs equally sized non-empty blocks".into(),
                    ));
                }
            }
            Gate::Measure { targets, .. } | Gate::Discard { targets } => {
                if targets.is_empty() {
                    return Err(Error::InvalidParameter("empty target list".into()));
                }
            }
        }
        self.gates.push(gate);
        Ok(())
    }

    /// Appends the named gate from [`gates::by_name`].
    pub fn gate(&mut self, name: &str, params: &[f64], targets: &[usize]) -> Result<()> {
        self.controlled(name, params, targets, &[])
    }

    pub fn controlled(
        &mut self,
        name: &str,
        params: &[f64],
        targets: &[usize],
        controls: &[Control],
    ) -> Result<()> {
        let matrix = gates::by_name(name, params)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown gate `{name}`/{}", params.len())))?;
        self.push(Gate::Unitary {
            name: name.to_string(),
            params: params.to_vec(),
            matrix,
            targets: targets.to_vec(),
            controls: controls.to_vec(),
            condition: None,
        })
    }

    /// Appends an arbitrary unitary matrix.
    pub fn custom(&mut self, matrix: CMatrix, targets: &[usize], controls: &[Control]) -> Result<()> {
        self.push(Gate::Unitary {
            name: "custom".into(),
            params: Vec::new(),
            matrix,
            targets: targets.to_vec(),
            controls: controls.to_vec(),
            condition: None,
        })
    }

    /// Appends a named gate that fires only when measurement `tag` read `value`.
    pub fn conditioned(
        &mut self,
        tag: &str,
        value: Bits,
        name: &str,
        params: &[f64],
        targets: &[usize],
    ) -> Result<()> {
        let matrix = gates::by_name(name, params)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown gate `{name}`")))?;
        self.push(Gate::Unitary {
            name: name.to_string(),
            params: params.to_vec(),
            matrix,
            targets: targets.to_vec(),
            controls: Vec::new(),
            condition: Some(Condition {
                tag: tag.to_string(),
                value,
            }),
        })
    }

    pub fn oracle(&mut self, lambda: u32, targets: &[usize]) -> Result<()> {
        self.push(Gate::Oracle {
            lambda,
            targets: targets.to_vec(),
        })
    }

    pub fn measure(&mut self, tag: &str, targets: &[usize]) -> Result<()> {
        self.push(Gate::Measure {
            tag: tag.to_string(),
            targets: targets.to_vec(),
        })
    }

    pub fn discard(&mut self, targets: &[usize]) -> Result<()> {
        self.push(Gate::Discard {
            targets: targets.to_vec(),
        })
    }

    pub fn sym_reflect(&mut self, blocks: Vec<Vec<usize>>) -> Result<()> {
        self.push(Gate::SymReflect { blocks })
    }

    /// Appends `other` with its qubit `i` placed on `map[i]` and its
    /// measurement tags prefixed by `prefix`.
    pub fn embed(&mut self, other: &OracleAidedCircuit, map: &[usize], prefix: &str) -> Result<()> {
        if map.len() != other.num_qubits {
            return Err(Error::DimensionMismatch {
                expected: other.num_qubits,
                found: map.len(),
            });
        }
        for g in &other.gates {
            self.push(g.remap(map, prefix))?;
        }
        Ok(())
    }

    /// Copy of this circuit on `num_qubits >= self.num_qubits()` qubits.
    pub fn widened(&self, num_qubits: usize) -> Result<OracleAidedCircuit> {
        let mut out = OracleAidedCircuit::new(num_qubits);
        let map: Vec<usize> = (0..self.num_qubits).collect();
        out.embed(self, &map, "")?;
        Ok(out)
    }
}

fn check_qubits(n: usize, qs: &[usize]) -> Result<()> {
    let mut seen = std::collections::BTreeSet::new();
    for &q in qs {
        if q >= n {
            return Err(Error::TargetOutOfRange {
                qubit: q,
                num_qubits: n,
            });
        }
        if !seen.insert(q) {
            return Err(Error::DuplicateTarget(q));
        }
    }
    Ok(())
}

#[derive(Debug, Clone)]
pub enum RunOutput {
    Pure(StateVector),
    /// Reduced state on the qubits that were not discarded, in ascending order.
    Mixed(DensityMatrix),
}

impl RunOutput {
    pub fn into_density(self) -> Result<DensityMatrix> {
        match self {
            RunOutput::Pure(s) => DensityMatrix::from_pure(&s),
            RunOutput::Mixed(d) => Ok(d),
        }
    }

    pub fn pure(&self) -> Option<&StateVector> {
        match self {
            RunOutput::Pure(s) => Some(s),
            RunOutput::Mixed(_) => None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub output: RunOutput,
    /// Latest outcome per measurement tag.
    pub record: BTreeMap<String, Bits>,
}

/// Executes `circuit` on `input`. Discarded qubits stay in the simulation
/// until the end and are traced out there; later gates may not touch them.
pub fn run_circuit(
    circuit: &OracleAidedCircuit,
    env: &OracleEnv,
    input: &StateVector,
    rng: &mut Rng,
) -> Result<RunResult> {
    if input.num_qubits() != circuit.num_qubits {
        return Err(Error::DimensionMismatch {
            expected: circuit.num_qubits,
            found: input.num_qubits(),
        });
    }
    let mut state = input.clone();
    let mut record: BTreeMap<String, Bits> = BTreeMap::new();
    let mut discarded: Vec<usize> = Vec::new();
    for g in &circuit.gates {
        if let Some(q) = g.qubits().into_iter().find(|q| discarded.contains(q)) {
            return Err(Error::InvalidParameter(format!("qubit {q} used after discard")));
        }
        match g {
            Gate::Unitary {
                matrix,
                targets,
                controls,
                condition,
                ..
            } => {
                if let Some(c) = condition {
                    let got = record.get(&c.tag).ok_or_else(|| {
                        Error::InvalidParameter(format!("condition on unmeasured tag `{}`", c.tag))
                    })?;
                    if *got != c.value {
                        continue;
                    }
                }
                state.apply_controlled_mut(matrix, targets, controls)?;
            }
            Gate::Oracle { lambda, targets } => env.apply(&mut state, *lambda, targets)?,
            Gate::SymReflect { blocks } => state = symsub::symmetric_reflect_on(&state, blocks)?,
            Gate::Measure { tag, targets } => {
                let m = measure_computational(&state, targets, rng)?;
                state = m.collapsed;
                record.insert(tag.clone(), m.outcome);
            }
            Gate::Discard { targets } => discarded.extend(targets),
        }
    }
    let output = if discarded.is_empty() {
        RunOutput::Pure(state)
    } else {
        RunOutput::Mixed(DensityMatrix::reduce_pure(&state, &discarded)?)
    };
    Ok(RunResult { output, record })
}

/// A circuit rewritten into deferred-measurement form.
#[derive(Debug, Clone)]
pub struct Deferred {
    /// Unitary circuit on the original qubits followed by ancillas.
    pub circuit: OracleAidedCircuit,
    /// Ancillas holding each tag's final outcome (copied by CNOT).
    pub measured: BTreeMap<String, Vec<usize>>,
    /// Qubits the source circuit discarded; the caller traces them out.
    pub discarded: Vec<usize>,
}

/// Moves measurements to the end: each measured qubit is copied onto a fresh
/// ancilla with a CNOT and every classical condition becomes a control on
/// those ancillas.
pub fn defer_measurements(circuit: &OracleAidedCircuit) -> Result<Deferred> {
    let ancillas: usize = circuit
        .gates
        .iter()
        .map(|g| match g {
            Gate::Measure { targets, .. } => targets.len(),
            _ => 0,
        })
        .sum();
    let mut out = OracleAidedCircuit::new(circuit.num_qubits + ancillas);
    let mut next = circuit.num_qubits;
    let mut measured: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    let mut discarded = Vec::new();
    for g in &circuit.gates {
        match g {
            Gate::Measure { tag, targets } => {
                let anc: Vec<usize> = (next..next + targets.len()).collect();
                next += targets.len();
                for (&t, &a) in targets.iter().zip(&anc) {
                    out.controlled("x", &[], &[a], &[(t, true)])?;
                }
                measured.insert(tag.clone(), anc);
            }
            Gate::Discard { targets } => discarded.extend(targets.iter().copied()),
            Gate::Unitary {
                name,
                params,
                matrix,
                targets,
                controls,
                condition: Some(c),
            } => {
                let anc = measured.get(&c.tag).ok_or_else(|| {
                    Error::NotDeferred(format!("condition on unmeasured tag `{}`", c.tag))
                })?;
                if anc.len() != c.value.len() as usize {
                    return Err(Error::NotDeferred(format!(
                        "condition value {} has the wrong width for tag `{}`",
                        c.value, c.tag
                    )));
                }
                let mut ctl = controls.clone();
                ctl.extend(anc.iter().enumerate().map(|(i, &a)| (a, c.value.bit(i as u32))));
                out.push(Gate::Unitary {
                    name: name.clone(),
                    params: params.clone(),
                    matrix: matrix.clone(),
                    targets: targets.clone(),
                    controls: ctl,
                    condition: None,
                })?;
            }
            other => out.push(other.clone())?,
        }
    }
    Ok(Deferred {
        circuit: out,
        measured,
        discarded,
    })
}
