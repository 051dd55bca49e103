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

//! Rewriting gates into the target's native set.
//!
//! Each unsupported gate expands through a rule into other standard gates,
//! recursively, until everything is supported.  Rules stay symbolic where
//! they can (angles pass through as affine parameter expressions), so
//! parametric circuits survive translation unbound.

use super::{Pass, PropertySet, TranspileError};
use crate::circuit::{Instruction, OpKind, ParamValue, StandardGate, PI, PI2, PI4};
use crate::dag::DagCircuit;
use crate::target::Target;

/// Maximum expansion depth before concluding there is no path.
const MAX_DEPTH: u32 = 16;

fn gate(g: StandardGate, params: Vec<ParamValue>, qubits: Vec<u32>) -> Instruction {
    Instruction {
        op: OpKind::Gate(g),
        params,
        qubits,
        clbits: vec![],
        condition: None,
        blocks: vec![],
        case_values: vec![],
        has_default: false,
    }
}

/// One-qubit ZSX form of a ZYZ triple, dropping angle-free rotations:
/// `RZ(phi+pi) SX RZ(theta+pi) SX RZ(lambda)` in circuit order
/// `[rz(lambda), sx, rz(theta+pi), sx, rz(phi+pi)]`.
fn zsx(theta: ParamValue, phi: ParamValue, lambda: ParamValue, q: u32) -> Vec<Instruction> {
    vec![
        gate(StandardGate::RZ, vec![lambda], vec![q]),
        gate(StandardGate::SX, vec![], vec![q]),
        gate(StandardGate::RZ, vec![theta.offset_by(PI)], vec![q]),
        gate(StandardGate::SX, vec![], vec![q]),
        gate(StandardGate::RZ, vec![phi.offset_by(PI)], vec![q]),
    ]
}

/// Expansion rule for one unsupported gate, or `None` if no rule applies.
fn expand(inst: &Instruction, target: &Target) -> Option<Vec<Instruction>> {
    let g = match inst.op {
        OpKind::Gate(g) => g,
        _ => return None,
    };
    let q = inst.qubits.clone();
    let p = inst.params.clone();
    let real = |v: f64| ParamValue::Real(v);
    Some(match g {
        StandardGate::I => vec![],
        StandardGate::Z => vec![gate(StandardGate::RZ, vec![real(PI)], q)],
        StandardGate::S => vec![gate(StandardGate::RZ, vec![real(PI2)], q)],
        StandardGate::Sdg => vec![gate(StandardGate::RZ, vec![real(-PI2)], q)],
        StandardGate::T => vec![gate(StandardGate::RZ, vec![real(PI4)], q)],
        StandardGate::Tdg => vec![gate(StandardGate::RZ, vec![real(-PI4)], q)],
        StandardGate::H => vec![
            gate(StandardGate::RZ, vec![real(PI2)], q.clone()),
            gate(StandardGate::SX, vec![], q.clone()),
            gate(StandardGate::RZ, vec![real(PI2)], q),
        ],
        StandardGate::X => vec![
            gate(StandardGate::SX, vec![], q.clone()),
            gate(StandardGate::SX, vec![], q),
        ],
        StandardGate::Y => vec![
            gate(StandardGate::RZ, vec![real(PI)], q.clone()),
            gate(StandardGate::X, vec![], q),
        ],
        // rx(t) = rz(-pi/2) . ry(t) . rz(pi/2) in matrix order.
        StandardGate::RX => zsx(p[0].clone(), real(-PI2), real(PI2), q[0]),
        StandardGate::RY => zsx(p[0].clone(), real(0.0), real(0.0), q[0]),
        StandardGate::RZZ => vec![
            gate(StandardGate::CX, vec![], q.clone()),
            gate(StandardGate::RZ, vec![p[0].clone()], vec![q[1]]),
            gate(StandardGate::CX, vec![], q),
        ],
        // Z(x)X = (I(x)H) Z(x)Z (I(x)H).
        StandardGate::RZX => vec![
            gate(StandardGate::H, vec![], vec![q[1]]),
            gate(StandardGate::RZZ, vec![p[0].clone()], q.clone()),
            gate(StandardGate::H, vec![], vec![q[1]]),
        ],
        StandardGate::ECR => vec![
            gate(StandardGate::RZX, vec![real(-PI4)], q.clone()),
            gate(StandardGate::X, vec![], vec![q[0]]),
            gate(StandardGate::RZX, vec![real(PI4)], q),
        ],
        StandardGate::Swap => vec![
            gate(StandardGate::CX, vec![], vec![q[0], q[1]]),
            gate(StandardGate::CX, vec![], vec![q[1], q[0]]),
            gate(StandardGate::CX, vec![], vec![q[0], q[1]]),
        ],
        StandardGate::CX => {
            if target.has_instruction("cx") {
                // Supported in the reversed direction only.
                vec![
                    gate(StandardGate::H, vec![], vec![q[0]]),
                    gate(StandardGate::H, vec![], vec![q[1]]),
                    gate(StandardGate::CX, vec![], vec![q[1], q[0]]),
                    gate(StandardGate::H, vec![], vec![q[0]]),
                    gate(StandardGate::H, vec![], vec![q[1]]),
                ]
            } else {
                vec![
                    gate(StandardGate::H, vec![], vec![q[1]]),
                    gate(StandardGate::CZ, vec![], q.clone()),
                    gate(StandardGate::H, vec![], vec![q[1]]),
                ]
            }
        }
        StandardGate::CZ => vec![
            gate(StandardGate::H, vec![], vec![q[1]]),
            gate(StandardGate::CX, vec![], q.clone()),
            gate(StandardGate::H, vec![], vec![q[1]]),
        ],
        StandardGate::SX | StandardGate::RZ => return None,
    })
}

fn translate_instruction(
    inst: &Instruction,
    target: &Target,
    depth: u32,
    out: &mut Vec<Instruction>,
) -> Result<(), TranspileError> {
    if !inst.blocks.is_empty() {
        let mut blocks = Vec::with_capacity(inst.blocks.len());
        for block in &inst.blocks {
            let mut body = Vec::new();
            for nested in block.instructions() {
                translate_instruction(nested, target, depth, &mut body)?;
            }
            blocks.push(
                block
                    .empty_like()
                    .with_instructions(body)
                    .map_err(TranspileError::Circuit)?,
            );
        }
        let mut rebuilt = inst.clone();
        rebuilt.blocks = blocks;
        out.push(rebuilt);
        return Ok(());
    }
    let Some(name) = inst.op.is_gate().then(|| inst.op.name()) else {
        out.push(inst.clone());
        return Ok(());
    };
    if target.instruction_supported(name, &inst.qubits) {
        out.push(inst.clone());
        return Ok(());
    }
    if depth == 0 {
        return Err(TranspileError::NoTranslationPath(name.to_string()));
    }
    let Some(expansion) = expand(inst, target) else {
        return Err(TranspileError::NoTranslationPath(name.to_string()));
    };
    for produced in &expansion {
        translate_instruction(produced, target, depth - 1, out)?;
    }
    Ok(())
}

/// Rewrite every gate into the target's native set.
pub struct TranslateToBasis;

impl Pass for TranslateToBasis {
    fn name(&self) -> &str {
        "translate"
    }

    fn run(
        &self,
        dag: DagCircuit,
        target: &Target,
        _properties: &mut PropertySet,
    ) -> Result<DagCircuit, TranspileError> {
        let circuit = dag.to_circuit()?;
        let mut translated = Vec::with_capacity(circuit.len());
        for inst in circuit.instructions() {
            translate_instruction(inst, target, MAX_DEPTH, &mut translated)?;
        }
        let out = circuit
            .empty_like()
            .with_instructions(translated)
            .map_err(TranspileError::Circuit)?;
        Ok(DagCircuit::from_circuit(&out))
    }
}
