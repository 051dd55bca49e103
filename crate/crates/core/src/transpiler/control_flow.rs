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

//! Crosstalk compensation around feedforward windows.
//!
//! While classical feedforward resolves a branch decision, every qubit sits
//! idle and coupled pairs accrue ZZ phase.  When one side of a pair is a
//! freshly measured ancilla its state inside each branch is a known
//! computational basis state, so the pair phase degenerates to a plain Z
//! rotation on the other side — which a branch-conditional `rz` cancels
//! exactly.  This pass inserts those corrections; where a branch covers both
//! readings of the bit the correction is guarded by a nested test on it.

use super::{Pass, PropertySet, TranspileError};
use crate::circuit::{
    Circuit, ClassicalExpr, Instruction, OpKind, ParamValue, StandardGate,
};
use crate::dag::DagCircuit;
use crate::quantum_info::NoiseModel;
use crate::target::Target;
use std::collections::BTreeMap;
use std::collections::BTreeSet;

/// Largest number of condition bits we will enumerate assignments over.
const MAX_CONDITION_BITS: usize = 12;

pub struct CompensateCrosstalk {
    pub noise: NoiseModel,
}

impl CompensateCrosstalk {
    pub fn new(noise: NoiseModel) -> Self {
        CompensateCrosstalk { noise }
    }
}

fn rz_on(angle: f64, q: u32) -> Instruction {
    Instruction::gate(StandardGate::RZ, vec![ParamValue::Real(angle)], vec![q])
}

/// Which block an assignment of the condition bits selects; `None` means no
/// block runs (an unmatched switch value).
fn branch_of(inst: &Instruction, bits: &[bool]) -> Option<usize> {
    let cond = inst.condition.as_ref()?;
    match inst.op {
        OpKind::IfElse => {
            if cond.evaluate_bool(bits) {
                Some(0)
            } else if inst.blocks.len() > 1 {
                Some(1)
            } else {
                None
            }
        }
        OpKind::Switch => {
            let value = cond.evaluate(bits);
            for (i, values) in inst.case_values.iter().enumerate() {
                if values.contains(&value) {
                    return Some(i);
                }
            }
            if inst.has_default {
                Some(inst.case_values.len())
            } else {
                None
            }
        }
        _ => None,
    }
}

/// Per-branch consensus of one condition bit.  `None` means no assignment
/// selects the branch, `Some(Some(v))` that every selecting assignment
/// agrees on the bit, `Some(None)` that they disagree.
fn consensus(
    inst: &Instruction,
    cond_bits: &[u32],
    num_clbits: u32,
    bit: u32,
    branches: usize,
) -> Vec<Option<Option<bool>>> {
    let mut seen: Vec<Option<Option<bool>>> = vec![None; branches + 1];
    let mut bits = vec![false; num_clbits as usize];
    let pos = cond_bits.iter().position(|&c| c == bit).expect("bit in condition");
    for mask in 0u32..(1 << cond_bits.len()) {
        for (i, &c) in cond_bits.iter().enumerate() {
            bits[c as usize] = mask & (1 << i) != 0;
        }
        let value = bits[cond_bits[pos] as usize];
        let slot = branch_of(inst, &bits).unwrap_or(branches);
        seen[slot] = Some(match seen[slot] {
            None => Some(value),
            Some(Some(v)) if v == value => Some(value),
            _ => None,
        });
    }
    seen
}

/// Rebuild derived operand lists after editing blocks, the same way the
/// circuit builders do.
fn refresh_operands(inst: &mut Instruction) {
    let mut qubits = BTreeSet::new();
    let mut clbits = BTreeSet::new();
    if let Some(cond) = &inst.condition {
        clbits.extend(cond.clbits());
    }
    for block in &inst.blocks {
        qubits.extend(block.qubits_used());
        clbits.extend(block.clbits_used());
    }
    inst.qubits = qubits.into_iter().collect();
    inst.clbits = clbits.into_iter().collect();
}

fn prepend(block: &Circuit, head: &[Instruction]) -> Result<Circuit, TranspileError> {
    if head.is_empty() {
        return Ok(block.clone());
    }
    let mut instructions = head.to_vec();
    instructions.extend_from_slice(block.instructions());
    block
        .with_instructions(instructions)
        .map_err(TranspileError::Circuit)
}

/// A correction that only applies when `bit` reads 1, for branches that do
/// not pin the bit to a single value.
fn conditional_fix(
    template: &Circuit,
    bit: u32,
    fixes: &[Instruction],
) -> Result<Instruction, TranspileError> {
    let block = prepend(template, fixes)?;
    let mut clbits: BTreeSet<u32> = block.clbits_used();
    clbits.insert(bit);
    Ok(Instruction {
        op: OpKind::IfElse,
        params: Vec::new(),
        qubits: block.qubits_used().into_iter().collect(),
        clbits: clbits.into_iter().collect(),
        condition: Some(ClassicalExpr::bit(bit)),
        blocks: vec![block],
        case_values: Vec::new(),
        has_default: false,
    })
}

impl CompensateCrosstalk {
    /// Rewrite one branching instruction, inserting corrections where the
    /// window phase is determined.
    fn compensate(
        &self,
        inst: &Instruction,
        origin: &BTreeMap<u32, u32>,
        num_clbits: u32,
        target: &Target,
    ) -> Result<Instruction, TranspileError> {
        let Some(cond) = inst.condition.as_ref() else {
            return Ok(inst.clone());
        };
        let cond_bits = cond.clbits();
        if cond_bits.len() > MAX_CONDITION_BITS {
            return Ok(inst.clone());
        }
        // Ancilla bits: condition bits whose source qubit is untouched
        // since its measurement and has coupled neighbours.
        let ancillas: Vec<(u32, u32)> = cond_bits
            .iter()
            .filter_map(|&c| origin.get(&c).map(|&q| (c, q)))
            .filter(|&(_, q)| !self.noise.neighbours(q).is_empty())
            .collect();
        if ancillas.is_empty() {
            return Ok(inst.clone());
        }

        let mut inst = inst.clone();
        // A multi-value switch arm can leave an ancilla bit undetermined
        // even though each individual value determines it; split such arms.
        if matches!(inst.op, OpKind::Switch) {
            let needs_split = |inst: &Instruction| {
                ancillas.iter().any(|&(c, _)| {
                    let by_branch =
                        consensus(inst, &cond_bits, num_clbits, c, inst.blocks.len());
                    inst.case_values.iter().enumerate().any(|(i, values)| {
                        values.len() > 1 && matches!(by_branch[i], Some(None))
                    })
                })
            };
            let total_values: usize = inst.case_values.iter().map(Vec::len).sum();
            if total_values <= 64 && needs_split(&inst) {
                let mut case_values = Vec::new();
                let mut blocks = Vec::new();
                for (values, block) in inst.case_values.iter().zip(&inst.blocks) {
                    for &v in values {
                        case_values.push(vec![v]);
                        blocks.push(block.clone());
                    }
                }
                if inst.has_default {
                    blocks.push(inst.blocks.last().expect("default block").clone());
                }
                inst.case_values = case_values;
                inst.blocks = blocks;
            }
        }

        let branches = inst.blocks.len();
        if branches == 0 {
            return Ok(inst);
        }
        let template = inst.blocks[0].empty_like();
        let ff = target.feedforward_dt() as f64;
        // insertions[b] for existing blocks; the last slot is the missing
        // else/default branch.
        let mut insertions: Vec<Vec<Instruction>> = vec![Vec::new(); branches + 1];
        for &(c, q) in &ancillas {
            let by_branch = consensus(&inst, &cond_bits, num_clbits, c, branches);
            for (slot, state) in by_branch.iter().enumerate() {
                let fixes: Vec<Instruction> = self
                    .noise
                    .neighbours(q)
                    .into_iter()
                    .map(|(nb, nu)| rz_on(2.0 * nu * ff, nb))
                    .collect();
                match state {
                    Some(Some(true)) => insertions[slot].extend(fixes),
                    // The branch mixes both readings of the bit, so the fix
                    // must re-test it at run time.
                    Some(None) => {
                        insertions[slot].push(conditional_fix(&template, c, &fixes)?)
                    }
                    _ => {}
                }
            }
        }

        let mut changed = insertions.iter().any(|i| !i.is_empty());
        if !changed {
            return Ok(inst);
        }
        for (b, head) in insertions[..branches].iter().enumerate() {
            inst.blocks[b] = prepend(&inst.blocks[b], head)?;
        }
        if !insertions[branches].is_empty() {
            // The correction applies on a path with no block: add one.
            let filler = prepend(&template, &insertions[branches])?;
            match inst.op {
                OpKind::IfElse => inst.blocks.push(filler),
                OpKind::Switch => {
                    inst.blocks.push(filler);
                    inst.has_default = true;
                }
                _ => changed = false,
            }
        }
        if changed {
            refresh_operands(&mut inst);
        }
        Ok(inst)
    }
}

impl Pass for CompensateCrosstalk {
    fn name(&self) -> &str {
        "compensate_crosstalk"
    }

    fn run(
        &self,
        dag: DagCircuit,
        target: &Target,
        _properties: &mut PropertySet,
    ) -> Result<DagCircuit, TranspileError> {
        let circuit = dag.to_circuit().map_err(TranspileError::Circuit)?;
        // clbit -> qubit whose post-measurement state the bit still mirrors.
        let mut origin: BTreeMap<u32, u32> = BTreeMap::new();
        let mut out = Vec::with_capacity(circuit.len());
        for inst in circuit.instructions() {
            match &inst.op {
                OpKind::Measure => {
                    origin.insert(inst.clbits[0], inst.qubits[0]);
                    out.push(inst.clone());
                }
                OpKind::Barrier | OpKind::Delay => out.push(inst.clone()),
                OpKind::Gate(_) | OpKind::Reset | OpKind::Init => {
                    origin.retain(|_, q| !inst.qubits.contains(q));
                    out.push(inst.clone());
                }
                OpKind::IfElse | OpKind::Switch => {
                    let rewritten =
                        self.compensate(inst, &origin, circuit.num_clbits(), target)?;
                    origin.retain(|c, q| {
                        !rewritten.qubits.contains(q) && !rewritten.clbits.contains(c)
                    });
                    out.push(rewritten);
                }
                OpKind::ForLoop { .. } | OpKind::While => {
                    origin.retain(|c, q| {
                        !inst.qubits.contains(q) && !inst.clbits.contains(c)
                    });
                    out.push(inst.clone());
                }
            }
        }
        let rebuilt = circuit
            .with_instructions(out)
            .map_err(TranspileError::Circuit)?;
        Ok(DagCircuit::from_circuit(&rebuilt))
    }
}
