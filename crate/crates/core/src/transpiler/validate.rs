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

//! Final check that a circuit only uses what the target can execute.

use super::{Pass, PropertySet, TranspileError};
use crate::circuit::{Circuit, OpKind, ParamValue, StandardGate};
use crate::dag::DagCircuit;
use crate::target::Target;
use std::collections::HashSet;

/// Reject anything the device cannot run directly: unknown operations,
/// gates on unsupported placements, initialisation after other activity,
/// runtime branching nested inside runtime branching, and symbolic
/// parameters anywhere but the virtual `rz`.
pub struct ValidateIsa;

fn check_block(
    circuit: &Circuit,
    target: &Target,
    in_runtime_branch: bool,
    touched: &mut HashSet<u32>,
) -> Result<(), TranspileError> {
    for inst in circuit.instructions() {
        let name = inst.op.name();
        if !target.instruction_supported(name, &inst.qubits) {
            return Err(TranspileError::IsaViolation(format!(
                "`{name}` on {:?} is not in the target ISA",
                inst.qubits
            )));
        }
        for p in &inst.params {
            if matches!(p, ParamValue::Expr(_))
                && !matches!(inst.op, OpKind::Gate(StandardGate::RZ))
            {
                return Err(TranspileError::IsaViolation(format!(
                    "unbound parameter on `{name}`; only rz angles may stay symbolic"
                )));
            }
        }
        match &inst.op {
            OpKind::Init => {
                if let Some(&q) = inst.qubits.iter().find(|q| touched.contains(q)) {
                    return Err(TranspileError::IsaViolation(format!(
                        "init on qubit {q} after other operations"
                    )));
                }
            }
            op if op.is_runtime_control_flow() => {
                if in_runtime_branch {
                    return Err(TranspileError::IsaViolation(
                        "runtime control flow nested inside a runtime branch".to_string(),
                    ));
                }
                for block in &inst.blocks {
                    check_block(block, target, true, touched)?;
                }
            }
            OpKind::ForLoop { .. } => {
                for block in &inst.blocks {
                    check_block(block, target, in_runtime_branch, touched)?;
                }
            }
            _ => {}
        }
        if !matches!(inst.op, OpKind::Barrier) {
            touched.extend(inst.qubits.iter().copied());
        }
    }
    Ok(())
}

impl Pass for ValidateIsa {
    fn name(&self) -> &str {
        "validate_isa"
    }

    fn run(
        &self,
        dag: DagCircuit,
        target: &Target,
        _properties: &mut PropertySet,
    ) -> Result<DagCircuit, TranspileError> {
        let circuit = dag.to_circuit().map_err(TranspileError::Circuit)?;
        check_block(&circuit, target, false, &mut HashSet::new())?;
        Ok(dag)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::ClassicalExpr;
    use crate::target::presets::heron_custom;
    use crate::transpiler::{PassPipeline, PipelineItem, Stage};

    fn validate(circuit: &Circuit) -> Result<(), TranspileError> {
        let target = heron_custom("isa", 4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let mut pipeline = PassPipeline::new();
        pipeline.push(Stage::Scheduling, PipelineItem::pass(ValidateIsa));
        pipeline.run(circuit, &target).map(|_| ())
    }

    #[test]
    fn native_circuits_pass() {
        let mut c = Circuit::new(2, 1);
        c.init(0).unwrap();
        c.rz(0.3, 0).unwrap();
        c.sx(0).unwrap();
        c.cz(0, 1).unwrap();
        c.measure(0, 0).unwrap();
        assert_eq!(validate(&c), Ok(()));
    }

    #[test]
    fn foreign_gates_are_rejected() {
        let mut c = Circuit::new(1, 0);
        c.h(0).unwrap();
        assert!(matches!(
            validate(&c),
            Err(TranspileError::IsaViolation(msg)) if msg.contains("`h`")
        ));
    }

    #[test]
    fn off_coupling_two_qubit_gates_are_rejected() {
        let mut c = Circuit::new(3, 0);
        c.cz(0, 2).unwrap();
        assert!(validate(&c).is_err());
        let mut c = Circuit::new(3, 0);
        c.cz(2, 1).unwrap(); // reversed orientation of a real edge
        assert_eq!(validate(&c), Ok(()));
    }

    #[test]
    fn late_init_is_rejected() {
        let mut c = Circuit::new(1, 0);
        c.sx(0).unwrap();
        c.init(0).unwrap();
        assert!(validate(&c).is_err());
        // A barrier does not count as activity.
        let mut c = Circuit::new(2, 0);
        c.barrier(&[0, 1]).unwrap();
        c.init(0).unwrap();
        assert_eq!(validate(&c), Ok(()));
    }

    #[test]
    fn nested_runtime_branching_is_rejected() {
        let mut inner = Circuit::new(1, 1);
        inner.sx(0).unwrap();
        let mut then = Circuit::new(1, 1);
        then.if_test(ClassicalExpr::bit(0), inner).unwrap();
        let mut c = Circuit::new(1, 1);
        c.measure(0, 0).unwrap();
        c.if_test(ClassicalExpr::bit(0), then).unwrap();
        assert!(matches!(
            validate(&c),
            Err(TranspileError::IsaViolation(msg)) if msg.contains("nested")
        ));
    }

    #[test]
    fn branches_inside_counted_loops_are_fine() {
        let mut then = Circuit::new(1, 1);
        then.sx(0).unwrap();
        let mut body = Circuit::new(1, 1);
        body.measure(0, 0).unwrap();
        body.if_test(ClassicalExpr::bit(0), then).unwrap();
        let mut c = Circuit::new(1, 1);
        c.for_loop("i", 0, 3, body).unwrap();
        assert_eq!(validate(&c), Ok(()));
    }

    #[test]
    fn symbolic_rz_is_allowed_but_symbolic_sx_arguments_are_not() {
        let theta = crate::circuit::Parameter::new("t");
        let mut c = Circuit::new(1, 0);
        c.rz(theta.clone(), 0).unwrap();
        assert_eq!(validate(&c), Ok(()));
        let mut c = Circuit::new(2, 0);
        c.rzz(theta, 0, 1).unwrap();
        assert!(validate(&c).is_err());
    }
}
