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

//! Peephole optimizations: adjacent inverse cancellation and single-qubit
//! run resynthesis.

use super::{Pass, PropertySet, TranspileError};
use crate::circuit::{Instruction, OpKind, ParamValue, StandardGate, PI};
use crate::dag::{DagCircuit, Wire};
use crate::target::Target;
use ndarray::Array2;
use num_complex::Complex64;
use petgraph::graph::NodeIndex;
use std::collections::HashSet;

const TWO_PI: f64 = 2.0 * PI;

/// Angle equal to the identity rotation, up to global phase.
fn is_identity_angle(theta: f64) -> bool {
    let m = theta.rem_euclid(TWO_PI);
    m < 1e-12 || TWO_PI - m < 1e-12
}

fn gate_of(inst: &Instruction) -> Option<StandardGate> {
    match inst.op {
        OpKind::Gate(g) => Some(g),
        _ => None,
    }
}

fn same_operands(a: &Instruction, b: &Instruction, symmetric: bool) -> bool {
    if a.qubits == b.qubits {
        return true;
    }
    symmetric
        && a.qubits.len() == 2
        && a.qubits[0] == b.qubits[1]
        && a.qubits[1] == b.qubits[0]
}

/// What happens when `a` is immediately followed by `b`: `None` if they do
/// not interact, `Some(None)` if they annihilate, `Some(Some(g))` if they
/// merge into one gate.
fn combine(a: &Instruction, b: &Instruction) -> Option<Option<Instruction>> {
    let ga = gate_of(a)?;
    let gb = gate_of(b)?;
    let symmetric = matches!(ga, StandardGate::CZ | StandardGate::Swap | StandardGate::RZZ);
    if ga == gb && ga.self_inverse() && same_operands(a, b, symmetric) {
        return Some(None);
    }
    let named_inverse = matches!(
        (ga, gb),
        (StandardGate::S, StandardGate::Sdg)
            | (StandardGate::Sdg, StandardGate::S)
            | (StandardGate::T, StandardGate::Tdg)
            | (StandardGate::Tdg, StandardGate::T)
    );
    if named_inverse && a.qubits == b.qubits {
        return Some(None);
    }
    let rotation = matches!(
        ga,
        StandardGate::RX | StandardGate::RY | StandardGate::RZ | StandardGate::RZZ | StandardGate::RZX
    );
    if rotation && ga == gb && same_operands(a, b, symmetric) {
        let (Some(ta), Some(tb)) = (a.params[0].value(), b.params[0].value()) else {
            return None;
        };
        let sum = ta + tb;
        if is_identity_angle(sum) {
            return Some(None);
        }
        let mut merged = a.clone();
        merged.params = vec![ParamValue::Real(sum)];
        return Some(Some(merged));
    }
    None
}

/// Cancel or merge adjacent gate pairs until none remain.
pub struct CancelInverses;

impl Pass for CancelInverses {
    fn name(&self) -> &str {
        "cancel_inverses"
    }

    fn run(
        &self,
        mut dag: DagCircuit,
        _target: &Target,
        _properties: &mut PropertySet,
    ) -> Result<DagCircuit, TranspileError> {
        loop {
            let mut used: HashSet<NodeIndex> = HashSet::new();
            let mut actions: Vec<([NodeIndex; 2], Option<Instruction>)> = Vec::new();
            for node in dag.topological_op_nodes() {
                if used.contains(&node) {
                    continue;
                }
                let Some(inst) = dag.instruction(node) else {
                    continue;
                };
                if !inst.op.is_gate() {
                    continue;
                }
                // The same node must follow on every wire.
                let mut follower: Option<NodeIndex> = None;
                let mut uniform = true;
                for &q in &inst.qubits {
                    match (follower, dag.successor_on_wire(node, Wire::Qubit(q))) {
                        (_, None) => {
                            uniform = false;
                            break;
                        }
                        (None, Some(next)) => follower = Some(next),
                        (Some(seen), Some(next)) if seen == next => {}
                        _ => {
                            uniform = false;
                            break;
                        }
                    }
                }
                let Some(next) = follower.filter(|_| uniform) else {
                    continue;
                };
                if used.contains(&next) {
                    continue;
                }
                let Some(next_inst) = dag.instruction(next) else {
                    continue;
                };
                if next_inst.qubits.len() != inst.qubits.len() {
                    continue;
                }
                if let Some(action) = combine(inst, next_inst) {
                    used.insert(node);
                    used.insert(next);
                    actions.push(([node, next], action));
                }
            }
            if actions.is_empty() {
                return Ok(dag);
            }
            for (pair, action) in actions {
                let replacement = action.into_iter().collect();
                dag.replace_block(&pair, replacement)
                    .map_err(TranspileError::Circuit)?;
            }
        }
    }
}

/// ZYZ Euler angles `(theta, phi, lambda)` with
/// `U ~ RZ(phi) RY(theta) RZ(lambda)` up to global phase.
pub(crate) fn zyz_angles(u: &Array2<Complex64>) -> (f64, f64, f64) {
    let det = u[[0, 0]] * u[[1, 1]] - u[[0, 1]] * u[[1, 0]];
    let scale = det.sqrt();
    let v00 = u[[0, 0]] / scale;
    let v10 = u[[1, 0]] / scale;
    let theta = 2.0 * v10.norm().atan2(v00.norm());
    let (sum, diff) = if v00.norm() >= v10.norm() {
        let sum = -2.0 * v00.arg();
        let diff = if v10.norm() > 1e-18 { 2.0 * v10.arg() } else { 0.0 };
        (sum, diff)
    } else {
        let diff = 2.0 * v10.arg();
        let sum = if v00.norm() > 1e-18 { -2.0 * v00.arg() } else { 0.0 };
        (sum, diff)
    };
    ((theta), (sum + diff) / 2.0, (sum - diff) / 2.0)
}

fn rz_gate(angle: f64, q: u32) -> Instruction {
    Instruction {
        op: OpKind::Gate(StandardGate::RZ),
        params: vec![ParamValue::Real(angle)],
        qubits: vec![q],
        clbits: vec![],
        condition: None,
        blocks: vec![],
        case_values: vec![],
        has_default: false,
    }
}

fn sx_gate(q: u32) -> Instruction {
    Instruction {
        op: OpKind::Gate(StandardGate::SX),
        params: vec![],
        qubits: vec![q],
        clbits: vec![],
        condition: None,
        blocks: vec![],
        case_values: vec![],
        has_default: false,
    }
}

/// Shortest RZ/SX realisation of the ZYZ triple, in circuit order.
pub(crate) fn zsx_sequence(theta: f64, phi: f64, lambda: f64, q: u32) -> Vec<Instruction> {
    let mut out = Vec::with_capacity(5);
    if theta.abs() < 1e-12 || is_identity_angle(theta) {
        let angle = phi + lambda;
        if !is_identity_angle(angle) {
            out.push(rz_gate(angle, q));
        }
        return out;
    }
    if !is_identity_angle(lambda) {
        out.push(rz_gate(lambda, q));
    }
    out.push(sx_gate(q));
    if !is_identity_angle(theta + PI) {
        out.push(rz_gate(theta + PI, q));
    }
    out.push(sx_gate(q));
    if !is_identity_angle(phi + PI) {
        out.push(rz_gate(phi + PI, q));
    }
    out
}

fn matrix_of(inst: &Instruction) -> Option<Array2<Complex64>> {
    let g = gate_of(inst)?;
    let params: Option<Vec<f64>> = inst.params.iter().map(|p| p.value()).collect();
    Some(g.matrix(&params?))
}

fn product_of(dag: &DagCircuit, run: &[NodeIndex]) -> Option<Array2<Complex64>> {
    let mut u = Array2::eye(2);
    for &node in run {
        let m = matrix_of(dag.instruction(node)?)?;
        u = m.dot(&u);
    }
    Some(u)
}

/// Resynthesise maximal single-qubit runs into the RZ/SX ISA form when
/// that shortens them or removes non-native gates.
pub struct Optimize1q;

impl Pass for Optimize1q {
    fn name(&self) -> &str {
        "optimize_1q"
    }

    fn run(
        &self,
        mut dag: DagCircuit,
        target: &Target,
        _properties: &mut PropertySet,
    ) -> Result<DagCircuit, TranspileError> {
        for run in dag.collect_1q_runs() {
            let Some(u) = product_of(&dag, &run) else {
                continue; // unbound parameters stay untouched
            };
            let q = dag.instruction(run[0]).expect("run node").qubits[0];
            let (theta, phi, lambda) = zyz_angles(&u);
            let candidate = zsx_sequence(theta, phi, lambda, q);
            // Self-check the resynthesis before committing.
            let mut v: Array2<Complex64> = Array2::eye(2);
            for inst in &candidate {
                v = matrix_of(inst).expect("candidate is bound").dot(&v);
            }
            if crate::quantum_info::phase_aligned_distance(&u, &v) > 1e-9 {
                continue;
            }
            let non_native = run.iter().any(|&n| {
                let inst = dag.instruction(n).expect("run node");
                !target.instruction_supported(inst.op.name(), &inst.qubits)
            });
            if candidate.len() < run.len() || non_native {
                dag.replace_block(&run, candidate)
                    .map_err(TranspileError::Circuit)?;
            }
        }
        Ok(dag)
    }
}
