// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain a
// copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! Byte-stable text emission.

use super::QasmError;
use crate::circuit::{Circuit, ClassicalExpr, Instruction, OpKind, ParamValue};
use std::fmt::Write as _;

/// Emit a fully bound circuit.  Free parameters are rejected; use
/// [`emit_with_params`] to keep them symbolic.
pub fn emit(circuit: &Circuit) -> Result<String, QasmError> {
    if let Some(name) = circuit.free_parameters().into_iter().next() {
        return Err(QasmError::UnboundParameter(name));
    }
    render(circuit, false)
}

/// Emit a circuit, declaring any free parameters as `input float` symbols.
pub fn emit_with_params(circuit: &Circuit) -> Result<String, QasmError> {
    render(circuit, true)
}

/// Seventeen significant digits: enough for every `f64` to survive a
/// round trip through text exactly.
fn number(v: f64) -> String {
    format!("{v:.16e}")
}

fn render(circuit: &Circuit, declare_params: bool) -> Result<String, QasmError> {
    let mut out = String::from("OPENQASM 3;\n");
    if declare_params {
        for name in circuit.free_parameters() {
            let _ = writeln!(out, "input float {name};");
        }
    }
    for reg in circuit.qregs() {
        let _ = writeln!(out, "qubit[{}] {};", reg.size, reg.name);
    }
    for reg in circuit.cregs() {
        let _ = writeln!(out, "bit[{}] {};", reg.size, reg.name);
    }
    for inst in circuit.instructions() {
        instruction(&mut out, circuit, inst, 0)?;
    }
    Ok(out)
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}

/// `name[offset]` form of an absolute qubit index.
fn qubit_ref(root: &Circuit, q: u32) -> Result<String, QasmError> {
    match root.qregs().iter().find(|r| r.contains(q)) {
        Some(r) => Ok(format!("{}[{}]", r.name, q - r.start)),
        None => Err(QasmError::Unrepresentable(format!(
            "qubit {q} lies outside every register"
        ))),
    }
}

fn clbit_ref(root: &Circuit, c: u32) -> Result<String, QasmError> {
    match root.cregs().iter().find(|r| r.contains(c)) {
        Some(r) => Ok(format!("{}[{}]", r.name, c - r.start)),
        None => Err(QasmError::Unrepresentable(format!(
            "bit {c} lies outside every register"
        ))),
    }
}

fn angle(param: &ParamValue) -> String {
    match param {
        ParamValue::Real(v) => number(*v),
        ParamValue::Expr(e) => {
            let mut text = if e.scale == 1.0 {
                e.parameter.name().to_string()
            } else {
                format!("{}*{}", number(e.scale), e.parameter.name())
            };
            if e.offset > 0.0 {
                let _ = write!(text, " + {}", number(e.offset));
            } else if e.offset < 0.0 {
                let _ = write!(text, " - {}", number(-e.offset));
            }
            text
        }
    }
}

/// Render a condition.  Nested binary operators are parenthesized so the
/// reading never depends on precedence; bit bundles print as a register
/// name when they cover one exactly and as `bits(...)` otherwise.
fn expr(root: &Circuit, e: &ClassicalExpr, top: bool) -> Result<String, QasmError> {
    Ok(match e {
        ClassicalExpr::Bit(c) => clbit_ref(root, *c)?,
        ClassicalExpr::Bits(bits) => {
            let whole = root.cregs().iter().find(|r| {
                bits.len() == r.size as usize
                    && bits.iter().enumerate().all(|(k, b)| *b == r.start + k as u32)
            });
            match whole {
                Some(r) => r.name.clone(),
                None => {
                    let refs: Result<Vec<_>, _> =
                        bits.iter().map(|b| clbit_ref(root, *b)).collect();
                    format!("bits({})", refs?.join(", "))
                }
            }
        }
        ClassicalExpr::Int(v) => v.to_string(),
        ClassicalExpr::Binary { op, lhs, rhs } => {
            let text = format!(
                "{} {} {}",
                expr(root, lhs, false)?,
                op.symbol(),
                expr(root, rhs, false)?
            );
            if top {
                text
            } else {
                format!("({text})")
            }
        }
        ClassicalExpr::XorReduce(inner) => format!("parity({})", expr(root, inner, true)?),
    })
}

fn block(out: &mut String, root: &Circuit, body: &Circuit, depth: usize) -> Result<(), QasmError> {
    out.push_str(" {\n");
    for inst in body.instructions() {
        instruction(out, root, inst, depth + 1)?;
    }
    indent(out, depth);
    out.push('}');
    Ok(())
}

fn instruction(
    out: &mut String,
    root: &Circuit,
    inst: &Instruction,
    depth: usize,
) -> Result<(), QasmError> {
    indent(out, depth);
    match &inst.op {
        OpKind::Gate(g) => {
            out.push_str(g.name());
            if !inst.params.is_empty() {
                let angles: Vec<String> = inst.params.iter().map(angle).collect();
                let _ = write!(out, "({})", angles.join(", "));
            }
            let qubits: Result<Vec<_>, _> =
                inst.qubits.iter().map(|q| qubit_ref(root, *q)).collect();
            let _ = write!(out, " {};", qubits?.join(", "));
        }
        OpKind::Barrier => {
            out.push_str("barrier");
            if !inst.qubits.is_empty() {
                let qubits: Result<Vec<_>, _> =
                    inst.qubits.iter().map(|q| qubit_ref(root, *q)).collect();
                let _ = write!(out, " {}", qubits?.join(", "));
            }
            out.push(';');
        }
        OpKind::Delay => {
            let duration = inst.delay_dt().ok_or_else(|| {
                QasmError::Unrepresentable("delay without an integer duration".into())
            })?;
            let _ = write!(out, "delay({duration}dt) {};", qubit_ref(root, inst.qubits[0])?);
        }
        OpKind::Measure => {
            let _ = write!(
                out,
                "{} = measure {};",
                clbit_ref(root, inst.clbits[0])?,
                qubit_ref(root, inst.qubits[0])?
            );
        }
        OpKind::Reset => {
            let _ = write!(out, "reset {};", qubit_ref(root, inst.qubits[0])?);
        }
        OpKind::Init => {
            let _ = write!(out, "init {};", qubit_ref(root, inst.qubits[0])?);
        }
        OpKind::IfElse => {
            let cond = inst.condition.as_ref().ok_or_else(|| {
                QasmError::Unrepresentable("branch without a condition".into())
            })?;
            let _ = write!(out, "if ({})", expr(root, cond, true)?);
            block(out, root, &inst.blocks[0], depth)?;
            if let Some(otherwise) = inst.blocks.get(1) {
                out.push_str(" else");
                block(out, root, otherwise, depth)?;
            }
        }
        OpKind::Switch => {
            let scrutinee = inst.condition.as_ref().ok_or_else(|| {
                QasmError::Unrepresentable("switch without a scrutinee".into())
            })?;
            let _ = write!(out, "switch ({}) {{", expr(root, scrutinee, true)?);
            out.push('\n');
            for (values, body) in inst.switch_arms() {
                indent(out, depth + 1);
                match values {
                    Some(values) => {
                        let values: Vec<String> =
                            values.iter().map(|v| v.to_string()).collect();
                        let _ = write!(out, "case {}", values.join(", "));
                    }
                    None => out.push_str("default"),
                }
                block(out, root, body, depth + 1)?;
                out.push('\n');
            }
            indent(out, depth);
            out.push('}');
        }
        OpKind::ForLoop { var, start, count } => {
            let end = start + *count as i64 - 1;
            let _ = write!(out, "for {var} in [{start}:{end}]");
            block(out, root, &inst.blocks[0], depth)?;
        }
        OpKind::While => {
            let cond = inst.condition.as_ref().ok_or_else(|| {
                QasmError::Unrepresentable("loop without a condition".into())
            })?;
            let _ = write!(out, "while ({})", expr(root, cond, true)?);
            block(out, root, &inst.blocks[0], depth)?;
        }
    }
    out.push('\n');
    Ok(())
}
