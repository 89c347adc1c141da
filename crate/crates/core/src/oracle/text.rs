//! Line-oriented circuit format.
//!
//! ```text
//! # comment
//! qubits 4
//! h 0
//! ry(0.25) 1
//! ctrl 0=1,1=0 x 2
//! oracle 2 0 1 2
//! measure m 1 2
//! if m=01 x 3
//! if m=01 ctrl 0=1 z 3
//! symreflect 2 0 1 2 3
//! discard 0
//! ```
//!
//! The header `qubits N` comes first. A gate line is an optional `if TAG=BITS`
//! condition, an optional `ctrl q=b,...` control list, then a gate name with
//! optional parenthesised parameters and its target qubits. `oracle L q...`
//! queries the subset oracle at `lambda = L` with the control qubit first.
//! `symreflect W q...` reflects about the symmetric subspace of the targets
//! split into blocks of `W` qubits.

use super::circuit::{Condition, Gate, OracleAidedCircuit};
use crate::bits::Bits;
use crate::error::{Error, Result};
use crate::qcore::{gates, Control};

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}

fn qubit_list(line: usize, toks: &[&str]) -> Result<Vec<usize>> {
    toks.iter()
        .map(|t| t.parse::<usize>().map_err(|_| perr(line, format!("bad qubit index `{t}`"))))
        .collect()
}

fn parse_controls(line: usize, spec: &str) -> Result<Vec<Control>> {
    spec.split(',')
        .map(|c| {
            let (q, b) = c
                .split_once('=')
                .ok_or_else(|| perr(line, format!("control `{c}` is not q=b")))?;
            let q = q.parse().map_err(|_| perr(line, format!("bad control qubit `{q}`")))?;
            let b = match b {
                "0" => false,
                "1" => true,
                _ => return Err(perr(line, format!("control value `{b}` is not 0 or 1"))),
            };
            Ok((q, b))
        })
        .collect()
}

fn parse_name(line: usize, tok: &str) -> Result<(String, Vec<f64>)> {
    match tok.split_once('(') {
        None => Ok((tok.to_string(), Vec::new())),
        Some((name, rest)) => {
            let inner = rest
                .strip_suffix(')')
                .ok_or_else(|| perr(line, format!("unclosed parameter list in `{tok}`")))?;
            let params = inner
                .split(',')
                .map(|p| {
                    p.trim()
                        .parse::<f64>()
                        .map_err(|_| perr(line, format!("bad parameter `{p}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((name.to_string(), params))
        }
    }
}

/// Parses the text format.
pub fn parse_circuit(text: &str) -> Result<OracleAidedCircuit> {
    let mut circuit: Option<OracleAidedCircuit> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let toks: Vec<&str> = body.split_whitespace().collect();
        let Some(c) = circuit.as_mut() else {
            if toks.len() == 2 && toks[0] == "qubits" {
                let n = toks[1]
                    .parse()
                    .map_err(|_| perr(line, format!("bad qubit count `{}`", toks[1])))?;
                circuit = Some(OracleAidedCircuit::new(n));
                continue;
            }
            return Err(perr(line, "expected `qubits N` header"));
        };
        let wrap = |e: Error| match e {
            Error::Parse { .. } => e,
            other => perr(line, other.to_string()),
        };
        let gate = match toks[0] {
            "qubits" => return Err(perr(line, "duplicate `qubits` header")),
            "oracle" => {
                if toks.len() < 2 {
                    return Err(perr(line, "oracle needs lambda and targets"));
                }
                let lambda = toks[1]
                    .parse()
                    .map_err(|_| perr(line, format!("bad lambda `{}`", toks[1])))?;
                Gate::Oracle {
                    lambda,
                    targets: qubit_list(line, &toks[2..])?,
                }
            }
            "measure" => {
                if toks.len() < 3 {
                    return Err(perr(line, "measure needs a tag and targets"));
                }
                Gate::Measure {
                    tag: toks[1].to_string(),
                    targets: qubit_list(line, &toks[2..])?,
                }
            }
            "discard" => Gate::Discard {
                targets: qubit_list(line, &toks[1..])?,
            },
            "symreflect" => {
                if toks.len() < 3 {
                    return Err(perr(line, "symreflect needs a block width and targets"));
                }
                let w: usize = toks[1]
                    .parse()
                    .map_err(|_| perr(line, format!("bad block width `{}`", toks[1])))?;
                let qs = qubit_list(line, &toks[2..])?;
                if w == 0 || qs.len() % w != 0 {
                    return Err(perr(line, "targets do not split into blocks of the given width"));
                }
                Gate::SymReflect {
                    blocks: qs.chunks(w).map(<[usize]>::to_vec).collect(),
                }
            }
            _ => {
                let mut rest = &toks[..];
                let mut condition = None;
                let mut controls = Vec::new();
                if rest[0] == "if" {
                    let spec = rest.get(1).ok_or_else(|| perr(line, "`if` needs TAG=BITS"))?;
                    let (tag, bits) = spec
                        .split_once('=')
                        .ok_or_else(|| perr(line, format!("condition `{spec}` is not TAG=BITS")))?;
                    condition = Some(Condition {
                        tag: tag.to_string(),
                        value: bits.parse::<Bits>().map_err(|e| perr(line, e.to_string()))?,
                    });
                    rest = &rest[2..];
                }
                if rest.first() == Some(&"ctrl") {
                    let spec = rest.get(1).ok_or_else(|| perr(line, "`ctrl` needs q=b list"))?;
                    controls = parse_controls(line, spec)?;
                    rest = &rest[2..];
                }
                let (name, params) = parse_name(line, rest.first().ok_or_else(|| perr(line, "missing gate"))?)?;
                let matrix = gates::by_name(&name, &params)
                    .ok_or_else(|| perr(line, format!("unknown gate `{name}` with {} parameters", params.len())))?;
                Gate::Unitary {
                    name,
                    params,
                    matrix,
                    targets: qubit_list(line, &rest[1..])?,
                    controls,
                    condition,
                }
            }
        };
        c.push(gate).map_err(wrap)?;
    }
    circuit.ok_or_else(|| perr(0, "empty circuit file"))
}

fn join(qs: &[usize]) -> String {
    qs.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

/// Serializes a circuit; fails on `custom` matrices, which have no name.
pub fn circuit_to_text(circuit: &OracleAidedCircuit) -> Result<String> {
    let mut out = format!("qubits {}\n", circuit.num_qubits());
    for g in circuit.gates() {
        let line = match g {
            Gate::Oracle { lambda, targets } => format!("oracle {lambda} {}", join(targets)),
            Gate::Measure { tag, targets } => format!("measure {tag} {}", join(targets)),
            Gate::Discard { targets } => format!("discard {}", join(targets)),
            Gate::SymReflect { blocks } => {
                let flat: Vec<usize> = blocks.iter().flatten().copied().collect();
                format!("symreflect {} {}", blocks[0].len(), join(&flat))
            }
            Gate::Unitary {
                name,
                params,
                targets,
                controls,
                condition,
                ..
            } => {
                if name == "custom" {
                    return Err(Error::InvalidParameter(
                        "custom matrices cannot be written in the text format".into(),
                    ));
                }
                let mut s = String::new();
                if let Some(c) = condition {
                    s.push_str(&format!("if {}={} ", c.tag, c.value));
                }
                if !controls.is_empty() {
                    let cs: Vec<String> = controls
                        .iter()
                        .map(|(q, b)| format!("{q}={}", u8::from(*b)))
                        .collect();
                    s.push_str(&format!("ctrl {} ", cs.join(",")));
                }
                s.push_str(name);
                if !params.is_empty() {
                    let ps: Vec<String> = params.iter().map(f64::to_string).collect();
                    s.push_str(&format!("({})", ps.join(",")));
                }
                s.push(' ');
                s.push_str(&join(targets));
                s
            }
        };
        out.push_str(&line);
        out.push('\n');
    }
    Ok(out)
}
