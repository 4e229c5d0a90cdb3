//! Plain-text circuit format.
//!
//! ```text
//! # Bell pair
//! qubits 2
//! h 0
//! cx 0 1
//! ```
//!
//! One instruction per line, `#` starts a comment. Single-qubit gates are
//! `h x y z s sdg t tdg <q>`, rotations `rx ry rz <q> <radians>`, a custom
//! unitary `u <q>` followed by eight reals (real and imaginary part of each
//! entry, row-major), and `cx|cz <control> <target>`. The optional
//! `qubits <n>` directive must come before any gate.

use std::fmt::Write as _;

use crate::error::{Error, ParseErrorKind, Result};
use crate::model::{
    make_gate_checked, Circuit, GateLabel, GateOp, DEFAULT_UNITARY_TOLERANCE,
    STRICT_UNITARY_TOLERANCE,
};

fn perr(line: usize, kind: ParseErrorKind) -> Error {
    Error::Parse { line, kind }
}

fn arity(line: usize, instruction: &str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(perr(
            line,
            ParseErrorKind::Arity {
                instruction: instruction.to_string(),
                expected,
                got,
            },
        ))
    }
}

fn parse_qubit(line: usize, tok: &str) -> Result<usize> {
    tok.parse().map_err(|_| {
        perr(
            line,
            ParseErrorKind::Syntax(format!("`{tok}` is not a qubit index")),
        )
    })
}

fn parse_real(line: usize, tok: &str) -> Result<f64> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(perr(
            line,
            ParseErrorKind::Syntax(format!("`{tok}` is not a finite number")),
        )),
    }
}

/// Parses circuit text with the default unitarity tolerance.
pub fn parse_circuit(text: &str, n_override: Option<usize>) -> Result<Circuit> {
    parse_circuit_with(text, n_override, false)
}

/// Parses circuit text. `strict` tightens the unitarity check on `u`.
pub fn parse_circuit_with(text: &str, n_override: Option<usize>, strict: bool) -> Result<Circuit> {
    let tolerance = if strict {
        STRICT_UNITARY_TOLERANCE
    } else {
        DEFAULT_UNITARY_TOLERANCE
    };
    let mut n_qubits = n_override;
    let mut ops = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("");
        let mut toks = content.split_whitespace();
        let Some(head) = toks.next() else { continue };
        let args: Vec<&str> = toks.collect();
        let name = head.to_ascii_lowercase();

        if name == "qubits" {
            arity(line, "qubits", 1, args.len())?;
            if !ops.is_empty() {
                return Err(perr(
                    line,
                    ParseErrorKind::Invalid("`qubits` must precede all gates".into()),
                ));
            }
            let declared = parse_qubit(line, args[0])?;
            if declared == 0 {
                return Err(perr(
                    line,
                    ParseErrorKind::Invalid("qubit count must be positive".into()),
                ));
            }
            match n_override {
                Some(requested) if requested != declared => {
                    return Err(perr(
                        line,
                        ParseErrorKind::QubitCountConflict {
                            directive: declared,
                            requested,
                        },
                    ))
                }
                _ => n_qubits = Some(declared),
            }
            continue;
        }

        let op = match name.as_str() {
            "h" | "x" | "y" | "z" | "s" | "sdg" | "t" | "tdg" => {
                arity(line, &name, 1, args.len())?;
                let q = parse_qubit(line, args[0])?;
                let (_, label) = make_gate_checked(&name, &[], tolerance)
                    .map_err(|e| perr(line, ParseErrorKind::Invalid(e.to_string())))?;
                GateOp::single(label, q)
            }
            "rx" | "ry" | "rz" => {
                arity(line, &name, 2, args.len())?;
                let q = parse_qubit(line, args[0])?;
                let theta = parse_real(line, args[1])?;
                let (_, label) = make_gate_checked(&name, &[theta], tolerance)
                    .map_err(|e| perr(line, ParseErrorKind::Invalid(e.to_string())))?;
                GateOp::single(label, q)
            }
            "u" => {
                arity(line, "u", 9, args.len())?;
                let q = parse_qubit(line, args[0])?;
                let reals = args[1..]
                    .iter()
                    .map(|t| parse_real(line, t))
                    .collect::<Result<Vec<f64>>>()?;
                let (gate, _) = make_gate_checked("u", &reals, tolerance)
                    .map_err(|e| perr(line, ParseErrorKind::Invalid(e.to_string())))?;
                GateOp::custom(gate, q)
            }
            "cx" | "cz" => {
                arity(line, &name, 2, args.len())?;
                let c = parse_qubit(line, args[0])?;
                let t = parse_qubit(line, args[1])?;
                if name == "cx" {
                    GateOp::cx(c, t)
                } else {
                    GateOp::cz(c, t)
                }
            }
            _ => {
                return Err(perr(
                    line,
                    ParseErrorKind::UnknownInstruction(head.to_string()),
                ))
            }
        };

        let n = n_qubits.ok_or_else(|| perr(line, ParseErrorKind::MissingQubitCount))?;
        if let Some(v) = op.check(n) {
            let violation = crate::model::Violation {
                op_index: None,
                kind: v,
            };
            return Err(perr(line, ParseErrorKind::Invalid(violation.to_string())));
        }
        ops.push(op);
    }

    let n = n_qubits.ok_or_else(|| perr(1, ParseErrorKind::MissingQubitCount))?;
    Ok(Circuit::with_ops(n, ops))
}

fn real(v: f64) -> String {
    format!("{v:.16e}")
}

/// Writes `c` in the text format. Reals carry 17 significant digits, so
/// parsing the output gives back an identical circuit.
pub fn serialize_circuit(c: &Circuit) -> Result<String> {
    let mut out = String::new();
    writeln!(out, "qubits {}", c.n_qubits).unwrap();
    for op in &c.ops {
        match (op.control, op.label) {
            (Some(ctrl), GateLabel::X) => writeln!(out, "cx {ctrl} {}", op.target),
            (Some(ctrl), GateLabel::Z) => writeln!(out, "cz {ctrl} {}", op.target),
            (Some(_), _) => return Err(Error::Unserializable(op.to_string())),
            (None, GateLabel::Rx(t) | GateLabel::Ry(t) | GateLabel::Rz(t)) => {
                writeln!(out, "{} {} {}", op.label.mnemonic(), op.target, real(t))
            }
            (None, GateLabel::Custom) => {
                let reals: Vec<String> = op.gate.to_reals().into_iter().map(real).collect();
                writeln!(out, "u {} {}", op.target, reals.join(" "))
            }
            (None, label) => writeln!(out, "{} {}", label.mnemonic(), op.target),
        }
        .unwrap();
    }
    Ok(out)
}
