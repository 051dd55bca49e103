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

//! Quantum circuit intermediate representation.
//!
//! A [`Circuit`] is an ordered list of [`Instruction`]s over a fixed set of
//! qubits and classical bits.  Control-flow blocks are themselves circuits
//! that reference the bits of their parent directly, so a block always has
//! the same width as the circuit containing it.  Circuits are built by
//! appending and treated as immutable afterwards: every transformation in
//! the toolkit returns a new circuit.

mod expr;
mod gates;
pub mod library;
mod params;

pub use expr::{BinOp, ClassicalExpr};
pub use gates::{StandardGate, PI, PI2, PI4, PI8};
pub use params::{ParamExpr, ParamValue, Parameter};

use std::collections::{BTreeMap, BTreeSet};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CircuitError {
    #[error("{kind} index {index} out of range for size {size}")]
    IndexOutOfRange {
        kind: &'static str,
        index: u32,
        size: u32,
    },
    #[error("operation {op} expects {expected} operands, got {got}")]
    ArityMismatch {
        op: String,
        expected: u32,
        got: u32,
    },
    #[error("operation {op} expects {expected} parameters, got {got}")]
    BadParamCount {
        op: String,
        expected: u32,
        got: u32,
    },
    #[error("duplicate operand q{0} in one instruction")]
    DuplicateOperand(u32),
    #[error("delay durations must be non-negative integer dt, got {0}")]
    NonIntegerDelay(f64),
    #[error("control-flow block must match parent width ({parent_qubits}q/{parent_clbits}c), got {block_qubits}q/{block_clbits}c")]
    BlockShapeMismatch {
        parent_qubits: u32,
        parent_clbits: u32,
        block_qubits: u32,
        block_clbits: u32,
    },
    #[error("switch case value {0} appears more than once")]
    OverlappingCases(u64),
    #[error("unknown parameter {0}")]
    UnknownParameter(String),
    #[error("parameter {0} is unbound")]
    UnboundParameter(String),
    #[error("bit map has wrong length: expected {expected}, got {got}")]
    SizeMismatch { expected: u32, got: u32 },
    #[error("bit map sends two bits to index {0}")]
    MapCollision(u32),
    #[error("invalid lattice description: {0}")]
    BadLattice(String),
    #[error("{0}")]
    Invalid(String),
}

/// A contiguous run of bits with a name, used for declarations and text IO.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Register {
    pub name: String,
    pub start: u32,
    pub size: u32,
}

impl Register {
    pub fn contains(&self, index: u32) -> bool {
        index >= self.start && index < self.start + self.size
    }
}

/// The operation an instruction performs.
#[derive(Clone, Debug, PartialEq)]
pub enum OpKind {
    Gate(StandardGate),
    Barrier,
    /// One-qubit wait; `params[0]` holds the duration in integer dt.
    Delay,
    Measure,
    Reset,
    Init,
    /// `condition` holds the test, `blocks[0]` the then branch and
    /// `blocks[1]` the optional else branch.
    IfElse,
    /// `condition` holds the scrutinee; `case_values[i]` lists the values
    /// selecting `blocks[i]`, and when `has_default` is set the final block
    /// runs for unlisted values.
    Switch,
    /// Statically counted loop; the induction variable is symbolic only.
    ForLoop {
        var: String,
        start: i64,
        count: u64,
    },
    While,
}

impl OpKind {
    pub fn name(&self) -> &str {
        match self {
            OpKind::Gate(g) => g.name(),
            OpKind::Barrier => "barrier",
            OpKind::Delay => "delay",
            OpKind::Measure => "measure",
            OpKind::Reset => "reset",
            OpKind::Init => "init",
            OpKind::IfElse => "if_else",
            OpKind::Switch => "switch",
            OpKind::ForLoop { .. } => "for",
            OpKind::While => "while",
        }
    }

    pub fn is_gate(&self) -> bool {
        matches!(self, OpKind::Gate(_))
    }

    pub fn is_control_flow(&self) -> bool {
        matches!(
            self,
            OpKind::IfElse | OpKind::Switch | OpKind::ForLoop { .. } | OpKind::While
        )
    }

    /// Control flow whose branch choice depends on runtime values.
    pub fn is_runtime_control_flow(&self) -> bool {
        matches!(self, OpKind::IfElse | OpKind::Switch | OpKind::While)
    }
}

/// One operation in a circuit.
#[derive(Clone, Debug, PartialEq)]
pub struct Instruction {
    pub op: OpKind,
    pub params: Vec<ParamValue>,
    pub qubits: Vec<u32>,
    pub clbits: Vec<u32>,
    pub condition: Option<ClassicalExpr>,
    pub blocks: Vec<Circuit>,
    pub case_values: Vec<Vec<u64>>,
    pub has_default: bool,
}

impl Instruction {
    pub fn gate(gate: StandardGate, params: Vec<ParamValue>, qubits: Vec<u32>) -> Self {
        Instruction {
            op: OpKind::Gate(gate),
            params,
            qubits,
            clbits: Vec::new(),
            condition: None,
            blocks: Vec::new(),
            case_values: Vec::new(),
            has_default: false,
        }
    }

    fn bare(op: OpKind, qubits: Vec<u32>) -> Self {
        Instruction {
            op,
            params: Vec::new(),
            qubits,
            clbits: Vec::new(),
            condition: None,
            blocks: Vec::new(),
            case_values: Vec::new(),
            has_default: false,
        }
    }

    pub fn is_gate(&self) -> bool {
        self.op.is_gate()
    }

    /// Bound parameter values; fails on the first symbolic parameter.
    pub fn bound_params(&self) -> Result<Vec<f64>, CircuitError> {
        self.params
            .iter()
            .map(|p| match p {
                ParamValue::Real(v) => Ok(*v),
                ParamValue::Expr(e) => {
                    Err(CircuitError::UnboundParameter(e.parameter.name().to_string()))
                }
            })
            .collect()
    }

    /// Delay duration in dt for delay instructions.
    pub fn delay_dt(&self) -> Option<u64> {
        if matches!(self.op, OpKind::Delay) {
            self.params.first().and_then(|p| p.value()).map(|v| v as u64)
        } else {
            None
        }
    }

    /// The switch blocks paired with their selecting values (`None` for the
    /// default block).
    pub fn switch_arms(&self) -> impl Iterator<Item = (Option<&[u64]>, &Circuit)> {
        let cases = self.case_values.len();
        self.blocks.iter().enumerate().map(move |(i, block)| {
            if i < cases {
                (Some(self.case_values[i].as_slice()), block)
            } else {
                (None, block)
            }
        })
    }
}

/// An ordered quantum circuit over named qubit and clbit registers.
#[derive(Clone, Debug)]
pub struct Circuit {
    name: String,
    qregs: Vec<Register>,
    cregs: Vec<Register>,
    num_qubits: u32,
    num_clbits: u32,
    instructions: Vec<Instruction>,
    metadata: BTreeMap<String, String>,
}

/// Equality is structural: registers and instructions.  Names and metadata
/// are bookkeeping and do not participate.
impl PartialEq for Circuit {
    fn eq(&self, other: &Self) -> bool {
        self.qregs == other.qregs
            && self.cregs == other.cregs
            && self.instructions == other.instructions
    }
}

impl Circuit {
    pub fn new(num_qubits: u32, num_clbits: u32) -> Self {
        let mut qregs = Vec::new();
        if num_qubits > 0 {
            qregs.push(Register {
                name: "q".to_string(),
                start: 0,
                size: num_qubits,
            });
        }
        let mut cregs = Vec::new();
        if num_clbits > 0 {
            cregs.push(Register {
                name: "c".to_string(),
                start: 0,
                size: num_clbits,
            });
        }
        Circuit {
            name: "circuit".to_string(),
            qregs,
            cregs,
            num_qubits,
            num_clbits,
            instructions: Vec::new(),
            metadata: BTreeMap::new(),
        }
    }

    /// Build a circuit from explicit register declarations.
    pub fn with_registers(
        qregs: Vec<(String, u32)>,
        cregs: Vec<(String, u32)>,
    ) -> Result<Self, CircuitError> {
        let mut qs = Vec::new();
        let mut start = 0u32;
        for (name, size) in qregs {
            if qs.iter().any(|r: &Register| r.name == name) {
                return Err(CircuitError::Invalid(format!("duplicate register {name}")));
            }
            qs.push(Register { name, start, size });
            start += size;
        }
        let num_qubits = start;
        let mut cs = Vec::new();
        let mut cstart = 0u32;
        for (name, size) in cregs {
            if cs.iter().any(|r: &Register| r.name == name) {
                return Err(CircuitError::Invalid(format!("duplicate register {name}")));
            }
            cs.push(Register {
                name,
                start: cstart,
                size,
            });
            cstart += size;
        }
        Ok(Circuit {
            name: "circuit".to_string(),
            qregs: qs,
            cregs: cs,
            num_qubits,
            num_clbits: cstart,
            instructions: Vec::new(),
            metadata: BTreeMap::new(),
        })
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn num_qubits(&self) -> u32 {
        self.num_qubits
    }

    pub fn num_clbits(&self) -> u32 {
        self.num_clbits
    }

    pub fn qregs(&self) -> &[Register] {
        &self.qregs
    }

    pub fn cregs(&self) -> &[Register] {
        &self.cregs
    }

    pub fn instructions(&self) -> &[Instruction] {
        &self.instructions
    }

    pub fn len(&self) -> usize {
        self.instructions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.instructions.is_empty()
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }

    pub fn set_metadata(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.metadata.insert(key.into(), value.into());
    }

    pub fn metadata_value(&self, key: &str) -> Option<&str> {
        self.metadata.get(key).map(|s| s.as_str())
    }

    /// Resolve `(register name, offset)` to a flat qubit index.
    pub fn qubit_index(&self, reg: &str, offset: u32) -> Option<u32> {
        self.qregs
            .iter()
            .find(|r| r.name == reg)
            .filter(|r| offset < r.size)
            .map(|r| r.start + offset)
    }

    pub fn clbit_index(&self, reg: &str, offset: u32) -> Option<u32> {
        self.cregs
            .iter()
            .find(|r| r.name == reg)
            .filter(|r| offset < r.size)
            .map(|r| r.start + offset)
    }

    fn check_qubit(&self, q: u32) -> Result<(), CircuitError> {
        if q >= self.num_qubits {
            return Err(CircuitError::IndexOutOfRange {
                kind: "qubit",
                index: q,
                size: self.num_qubits,
            });
        }
        Ok(())
    }

    fn check_clbit(&self, c: u32) -> Result<(), CircuitError> {
        if c >= self.num_clbits {
            return Err(CircuitError::IndexOutOfRange {
                kind: "clbit",
                index: c,
                size: self.num_clbits,
            });
        }
        Ok(())
    }

    fn check_block(&self, block: &Circuit) -> Result<(), CircuitError> {
        if block.num_qubits != self.num_qubits || block.num_clbits != self.num_clbits {
            return Err(CircuitError::BlockShapeMismatch {
                parent_qubits: self.num_qubits,
                parent_clbits: self.num_clbits,
                block_qubits: block.num_qubits,
                block_clbits: block.num_clbits,
            });
        }
        Ok(())
    }

    /// Append a fully formed instruction after validating it.
    pub fn append(&mut self, inst: Instruction) -> Result<(), CircuitError> {
        match &inst.op {
            OpKind::Gate(g) => {
                if inst.qubits.len() != g.num_qubits() as usize {
                    return Err(CircuitError::ArityMismatch {
                        op: g.name().to_string(),
                        expected: g.num_qubits(),
                        got: inst.qubits.len() as u32,
                    });
                }
                if inst.params.len() != g.num_params() as usize {
                    return Err(CircuitError::BadParamCount {
                        op: g.name().to_string(),
                        expected: g.num_params(),
                        got: inst.params.len() as u32,
                    });
                }
            }
            OpKind::Delay => {
                if inst.qubits.len() != 1 {
                    return Err(CircuitError::ArityMismatch {
                        op: "delay".to_string(),
                        expected: 1,
                        got: inst.qubits.len() as u32,
                    });
                }
                match inst.params.first() {
                    Some(ParamValue::Real(v)) if *v >= 0.0 && v.fract() == 0.0 => {}
                    Some(ParamValue::Real(v)) => return Err(CircuitError::NonIntegerDelay(*v)),
                    _ => {
                        return Err(CircuitError::BadParamCount {
                            op: "delay".to_string(),
                            expected: 1,
                            got: inst.params.len() as u32,
                        })
                    }
                }
            }
            OpKind::Measure => {
                if inst.qubits.len() != 1 || inst.clbits.len() != 1 {
                    return Err(CircuitError::ArityMismatch {
                        op: "measure".to_string(),
                        expected: 1,
                        got: inst.qubits.len().max(inst.clbits.len()) as u32,
                    });
                }
            }
            OpKind::Reset | OpKind::Init => {
                if inst.qubits.len() != 1 {
                    return Err(CircuitError::ArityMismatch {
                        op: inst.op.name().to_string(),
                        expected: 1,
                        got: inst.qubits.len() as u32,
                    });
                }
            }
            OpKind::Barrier => {}
            OpKind::IfElse | OpKind::Switch | OpKind::ForLoop { .. } | OpKind::While => {
                for block in &inst.blocks {
                    self.check_block(block)?;
                }
                if matches!(inst.op, OpKind::Switch) {
                    let mut seen = BTreeSet::new();
                    for values in &inst.case_values {
                        for v in values {
                            if !seen.insert(*v) {
                                return Err(CircuitError::OverlappingCases(*v));
                            }
                        }
                    }
                }
            }
        }
        let mut seen = BTreeSet::new();
        for &q in &inst.qubits {
            self.check_qubit(q)?;
            if !seen.insert(q) {
                return Err(CircuitError::DuplicateOperand(q));
            }
        }
        for &c in &inst.clbits {
            self.check_clbit(c)?;
        }
        if let Some(cond) = &inst.condition {
            for c in cond.clbits() {
                self.check_clbit(c)?;
            }
        }
        self.instructions.push(inst);
        Ok(())
    }

    fn push_gate(
        &mut self,
        gate: StandardGate,
        params: Vec<ParamValue>,
        qubits: Vec<u32>,
    ) -> Result<(), CircuitError> {
        self.append(Instruction::gate(gate, params, qubits))
    }

    pub fn id(&mut self, q: u32) -> Result<(), CircuitError> {
        self.push_gate(StandardGate::I, vec![], vec![q])
    }

    pub fn x(&mut self, q: u32) -> Result<(), CircuitError> {
        self.push_gate(StandardGate::X, vec![], vec![q])
    }

    pub fn y(&mut self, q: u32) -> Result<(), CircuitError> {
        self.push_gate(StandardGate::Y, vec![], vec![q])
    }

    pub fn z(&mut self, q: u32) -> Result<(), CircuitError> {
        self.push_gate(StandardGate::Z, vec![], vec![q])
    }

    pub fn h(&mut self, q: u32) -> Result<(), CircuitError> {
        self.push_gate(StandardGate::H, vec![], vec![q])
    }

    pub fn s(&mut self, q: u32) -> Result<(), CircuitError> {
        self.push_gate(StandardGate::S, vec![], vec![q])
    }

    pub fn sdg(&mut self, q: u32) -> Result<(), CircuitError> {
        self.push_gate(StandardGate::Sdg, vec![], vec![q])
    }

    pub fn t(&mut self, q: u32) -> Result<(), CircuitError> {
        self.push_gate(StandardGate::T, vec![], vec![q])
    }

    pub fn tdg(&mut self, q: u32) -> Result<(), CircuitError> {
        self.push_gate(StandardGate::Tdg, vec![], vec![q])
    }

    pub fn sx(&mut self, q: u32) -> Result<(), CircuitError> {
        self.push_gate(StandardGate::SX, vec![], vec![q])
    }

    pub fn rx(&mut self, theta: impl Into<ParamValue>, q: u32) -> Result<(), CircuitError> {
        self.push_gate(StandardGate::RX, vec![theta.into()], vec![q])
    }

    pub fn ry(&mut self, theta: impl Into<ParamValue>, q: u32) -> Result<(), CircuitError> {
        self.push_gate(StandardGate::RY, vec![theta.into()], vec![q])
    }

    pub fn rz(&mut self, theta: impl Into<ParamValue>, q: u32) -> Result<(), CircuitError> {
        self.push_gate(StandardGate::RZ, vec![theta.into()], vec![q])
    }

    pub fn rzz(
        &mut self,
        theta: impl Into<ParamValue>,
        a: u32,
        b: u32,
    ) -> Result<(), CircuitError> {
        self.push_gate(StandardGate::RZZ, vec![theta.into()], vec![a, b])
    }

    pub fn rzx(
        &mut self,
        theta: impl Into<ParamValue>,
        control: u32,
        target: u32,
    ) -> Result<(), CircuitError> {
        self.push_gate(StandardGate::RZX, vec![theta.into()], vec![control, target])
    }

    pub fn cx(&mut self, control: u32, target: u32) -> Result<(), CircuitError> {
        self.push_gate(StandardGate::CX, vec![], vec![control, target])
    }

    pub fn cz(&mut self, a: u32, b: u32) -> Result<(), CircuitError> {
        self.push_gate(StandardGate::CZ, vec![], vec![a, b])
    }

    pub fn ecr(&mut self, control: u32, target: u32) -> Result<(), CircuitError> {
        self.push_gate(StandardGate::ECR, vec![], vec![control, target])
    }

    pub fn swap(&mut self, a: u32, b: u32) -> Result<(), CircuitError> {
        self.push_gate(StandardGate::Swap, vec![], vec![a, b])
    }

    pub fn barrier(&mut self, qubits: &[u32]) -> Result<(), CircuitError> {
        self.append(Instruction::bare(OpKind::Barrier, qubits.to_vec()))
    }

    pub fn barrier_all(&mut self) -> Result<(), CircuitError> {
        let qubits: Vec<u32> = (0..self.num_qubits).collect();
        self.barrier(&qubits)
    }

    pub fn delay(&mut self, duration_dt: u64, q: u32) -> Result<(), CircuitError> {
        let mut inst = Instruction::bare(OpKind::Delay, vec![q]);
        inst.params.push(ParamValue::Real(duration_dt as f64));
        self.append(inst)
    }

    pub fn measure(&mut self, q: u32, c: u32) -> Result<(), CircuitError> {
        let mut inst = Instruction::bare(OpKind::Measure, vec![q]);
        inst.clbits.push(c);
        self.append(inst)
    }

    pub fn reset(&mut self, q: u32) -> Result<(), CircuitError> {
        self.append(Instruction::bare(OpKind::Reset, vec![q]))
    }

    pub fn init(&mut self, q: u32) -> Result<(), CircuitError> {
        self.append(Instruction::bare(OpKind::Init, vec![q]))
    }

    fn control_flow_operands(
        condition: Option<&ClassicalExpr>,
        blocks: &[Circuit],
    ) -> (Vec<u32>, Vec<u32>) {
        let mut qubits = BTreeSet::new();
        let mut clbits = BTreeSet::new();
        if let Some(cond) = condition {
            clbits.extend(cond.clbits());
        }
        for block in blocks {
            qubits.extend(block.qubits_used());
            clbits.extend(block.clbits_used());
        }
        (qubits.into_iter().collect(), clbits.into_iter().collect())
    }

    pub fn if_test(&mut self, condition: ClassicalExpr, then: Circuit) -> Result<(), CircuitError> {
        self.if_else_internal(condition, then, None)
    }

    pub fn if_else(
        &mut self,
        condition: ClassicalExpr,
        then: Circuit,
        otherwise: Circuit,
    ) -> Result<(), CircuitError> {
        self.if_else_internal(condition, then, Some(otherwise))
    }

    fn if_else_internal(
        &mut self,
        condition: ClassicalExpr,
        then: Circuit,
        otherwise: Option<Circuit>,
    ) -> Result<(), CircuitError> {
        let mut blocks = vec![then];
        if let Some(e) = otherwise {
            blocks.push(e);
        }
        let (qubits, clbits) = Self::control_flow_operands(Some(&condition), &blocks);
        self.append(Instruction {
            op: OpKind::IfElse,
            params: Vec::new(),
            qubits,
            clbits,
            condition: Some(condition),
            blocks,
            case_values: Vec::new(),
            has_default: false,
        })
    }

    pub fn switch(
        &mut self,
        scrutinee: ClassicalExpr,
        cases: Vec<(Vec<u64>, Circuit)>,
        default: Option<Circuit>,
    ) -> Result<(), CircuitError> {
        let mut case_values = Vec::new();
        let mut blocks = Vec::new();
        for (values, block) in cases {
            case_values.push(values);
            blocks.push(block);
        }
        let has_default = default.is_some();
        if let Some(d) = default {
            blocks.push(d);
        }
        let (qubits, clbits) = Self::control_flow_operands(Some(&scrutinee), &blocks);
        self.append(Instruction {
            op: OpKind::Switch,
            params: Vec::new(),
            qubits,
            clbits,
            condition: Some(scrutinee),
            blocks,
            case_values,
            has_default,
        })
    }

    pub fn for_loop(
        &mut self,
        var: impl Into<String>,
        start: i64,
        count: u64,
        body: Circuit,
    ) -> Result<(), CircuitError> {
        let blocks = vec![body];
        let (qubits, clbits) = Self::control_flow_operands(None, &blocks);
        self.append(Instruction {
            op: OpKind::ForLoop {
                var: var.into(),
                start,
                count,
            },
            params: Vec::new(),
            qubits,
            clbits,
            condition: None,
            blocks,
            case_values: Vec::new(),
            has_default: false,
        })
    }

    pub fn while_loop(
        &mut self,
        condition: ClassicalExpr,
        body: Circuit,
    ) -> Result<(), CircuitError> {
        let blocks = vec![body];
        let (qubits, clbits) = Self::control_flow_operands(Some(&condition), &blocks);
        self.append(Instruction {
            op: OpKind::While,
            params: Vec::new(),
            qubits,
            clbits,
            condition: Some(condition),
            blocks,
            case_values: Vec::new(),
            has_default: false,
        })
    }

    /// Qubits referenced by any instruction, including nested blocks.
    pub fn qubits_used(&self) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        for inst in &self.instructions {
            out.extend(inst.qubits.iter().copied());
            for block in &inst.blocks {
                out.extend(block.qubits_used());
            }
        }
        out
    }

    /// Clbits referenced by any instruction, including nested blocks.
    pub fn clbits_used(&self) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        for inst in &self.instructions {
            out.extend(inst.clbits.iter().copied());
            if let Some(cond) = &inst.condition {
                out.extend(cond.clbits());
            }
            for block in &inst.blocks {
                out.extend(block.clbits_used());
            }
        }
        out
    }

    /// Qubits touched by an operation other than a barrier.
    pub fn active_qubits(&self) -> BTreeSet<u32> {
        let mut out = BTreeSet::new();
        for inst in &self.instructions {
            if matches!(inst.op, OpKind::Barrier) {
                continue;
            }
            out.extend(inst.qubits.iter().copied());
            for block in &inst.blocks {
                out.extend(block.active_qubits());
            }
        }
        out
    }

    /// Names of unbound parameters anywhere in the circuit.
    pub fn free_parameters(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.collect_parameters(&mut out);
        out
    }

    fn collect_parameters(&self, out: &mut BTreeSet<String>) {
        for inst in &self.instructions {
            for p in &inst.params {
                if let Some(name) = p.parameter_name() {
                    out.insert(name.to_string());
                }
            }
            for block in &inst.blocks {
                block.collect_parameters(out);
            }
        }
    }

    /// Substitute parameter values, returning a new circuit.
    ///
    /// Bindings for parameters the circuit never mentions are rejected;
    /// parameters missing from `bindings` stay symbolic.
    pub fn bind_parameters(
        &self,
        bindings: &BTreeMap<String, f64>,
    ) -> Result<Circuit, CircuitError> {
        let known = self.free_parameters();
        for name in bindings.keys() {
            if !known.contains(name) {
                return Err(CircuitError::UnknownParameter(name.clone()));
            }
        }
        Ok(self.bind_unchecked(bindings))
    }

    fn bind_unchecked(&self, bindings: &BTreeMap<String, f64>) -> Circuit {
        let mut out = self.clone();
        for inst in &mut out.instructions {
            for p in &mut inst.params {
                *p = p.bind(bindings);
            }
            for block in &mut inst.blocks {
                *block = block.bind_unchecked(bindings);
            }
        }
        out
    }

    /// Append `other`'s instructions with its bits rerouted through the
    /// given maps (`other` bit `i` lands on `qubit_map[i]` / `clbit_map[i]`).
    pub fn compose(
        &self,
        other: &Circuit,
        qubit_map: &[u32],
        clbit_map: &[u32],
    ) -> Result<Circuit, CircuitError> {
        if qubit_map.len() != other.num_qubits as usize {
            return Err(CircuitError::SizeMismatch {
                expected: other.num_qubits,
                got: qubit_map.len() as u32,
            });
        }
        if clbit_map.len() != other.num_clbits as usize {
            return Err(CircuitError::SizeMismatch {
                expected: other.num_clbits,
                got: clbit_map.len() as u32,
            });
        }
        let mut seen = BTreeSet::new();
        for &q in qubit_map {
            self.check_qubit(q)?;
            if !seen.insert(q) {
                return Err(CircuitError::MapCollision(q));
            }
        }
        let mut seen = BTreeSet::new();
        for &c in clbit_map {
            self.check_clbit(c)?;
            if !seen.insert(c) {
                return Err(CircuitError::MapCollision(c));
            }
        }
        let mut out = self.clone();
        for inst in &other.instructions {
            let remapped = remap_instruction(inst, self, qubit_map, clbit_map);
            out.append(remapped)?;
        }
        Ok(out)
    }

    /// Longest dependency chain counting every non-barrier operation.
    pub fn depth(&self) -> u64 {
        self.depth_filtered(&|_| true)
    }

    /// Longest dependency chain counting only instructions accepted by the
    /// filter.  Unmatched operations and barriers still order their bits but
    /// contribute no weight.  Control-flow blocks contribute their own
    /// filtered depth, multiplied by the trip count for counted loops.
    pub fn depth_filtered(&self, filter: &dyn Fn(&Instruction) -> bool) -> u64 {
        let mut qlevel = vec![0u64; self.num_qubits as usize];
        let mut clevel = vec![0u64; self.num_clbits as usize];
        let mut best = 0u64;
        for inst in &self.instructions {
            let weight = match &inst.op {
                OpKind::Barrier => 0,
                OpKind::IfElse | OpKind::Switch | OpKind::While => inst
                    .blocks
                    .iter()
                    .map(|b| b.depth_filtered(filter))
                    .max()
                    .unwrap_or(0),
                OpKind::ForLoop { count, .. } => {
                    count * inst.blocks[0].depth_filtered(filter)
                }
                _ => filter(inst) as u64,
            };
            let mut level = 0u64;
            for &q in &inst.qubits {
                level = level.max(qlevel[q as usize]);
            }
            for &c in &inst.clbits {
                level = level.max(clevel[c as usize]);
            }
            if let Some(cond) = &inst.condition {
                for c in cond.clbits() {
                    level = level.max(clevel[c as usize]);
                }
            }
            level += weight;
            for &q in &inst.qubits {
                qlevel[q as usize] = level;
            }
            for &c in &inst.clbits {
                clevel[c as usize] = level;
            }
            best = best.max(level);
        }
        best
    }

    /// Depth counting only two-qubit gates.
    pub fn twoq_depth(&self) -> u64 {
        self.depth_filtered(&|inst| inst.is_gate() && inst.qubits.len() == 2)
    }

    /// Total two-qubit gate applications, expanding counted loops.
    pub fn twoq_count(&self) -> u64 {
        let mut total = 0u64;
        for inst in &self.instructions {
            match &inst.op {
                OpKind::Gate(g) if g.num_qubits() == 2 => total += 1,
                OpKind::ForLoop { count, .. } => {
                    total += count * inst.blocks[0].twoq_count();
                }
                _ => {
                    for block in &inst.blocks {
                        total += block.twoq_count();
                    }
                }
            }
        }
        total
    }

    /// Operation counts by name, expanding counted loops.
    pub fn count_ops(&self) -> BTreeMap<String, u64> {
        let mut out = BTreeMap::new();
        self.count_ops_into(&mut out, 1);
        out
    }

    fn count_ops_into(&self, out: &mut BTreeMap<String, u64>, multiplier: u64) {
        if multiplier == 0 {
            return;
        }
        for inst in &self.instructions {
            *out.entry(inst.op.name().to_string()).or_insert(0) += multiplier;
            let inner = match &inst.op {
                OpKind::ForLoop { count, .. } => multiplier * count,
                _ => multiplier,
            };
            for block in &inst.blocks {
                block.count_ops_into(out, inner);
            }
        }
    }

    /// True if any instruction is non-unitary (measurement, reset, init or
    /// control flow).
    pub fn has_nonunitary_ops(&self) -> bool {
        self.instructions.iter().any(|inst| {
            matches!(
                inst.op,
                OpKind::Measure | OpKind::Reset | OpKind::Init
            ) || inst.op.is_control_flow()
        })
    }

    pub fn has_control_flow(&self) -> bool {
        self.instructions.iter().any(|i| i.op.is_control_flow())
    }

    pub fn has_measurements(&self) -> bool {
        self.instructions.iter().any(|inst| {
            matches!(inst.op, OpKind::Measure)
                || inst.blocks.iter().any(|b| b.has_measurements())
        })
    }

    /// Replace the instruction list wholesale, revalidating each entry.
    /// Registers and metadata are preserved.
    pub fn with_instructions(&self, instructions: Vec<Instruction>) -> Result<Circuit, CircuitError> {
        let mut out = self.clone();
        out.instructions.clear();
        for inst in instructions {
            out.append(inst)?;
        }
        Ok(out)
    }

    /// An empty copy: same registers and metadata, no instructions.
    pub fn empty_like(&self) -> Circuit {
        let mut out = self.clone();
        out.instructions.clear();
        out
    }
}

/// Rebuild an instruction of some other circuit in `template`'s bit space.
pub(crate) fn remap_instruction(
    inst: &Instruction,
    template: &Circuit,
    qubit_map: &[u32],
    clbit_map: &[u32],
) -> Instruction {
    let qubits = inst.qubits.iter().map(|q| qubit_map[*q as usize]).collect();
    let clbits = inst.clbits.iter().map(|c| clbit_map[*c as usize]).collect();
    let condition = inst
        .condition
        .as_ref()
        .map(|cond| cond.remap_clbits(&|c| clbit_map[c as usize]));
    let blocks = inst
        .blocks
        .iter()
        .map(|block| {
            let mut rebuilt = template.empty_like();
            rebuilt.metadata.clear();
            for binst in &block.instructions {
                let mapped = remap_instruction(binst, template, qubit_map, clbit_map);
                rebuilt
                    .append(mapped)
                    .expect("remapped block instruction must stay valid");
            }
            rebuilt
        })
        .collect();
    Instruction {
        op: inst.op.clone(),
        params: inst.params.clone(),
        qubits,
        clbits,
        condition,
        blocks,
        case_values: inst.case_values.clone(),
        has_default: inst.has_default,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn append_validates_operands() {
        let mut c = Circuit::new(2, 1);
        assert!(c.h(0).is_ok());
        assert!(matches!(
            c.h(5),
            Err(CircuitError::IndexOutOfRange { .. })
        ));
        assert!(matches!(c.cx(1, 1), Err(CircuitError::DuplicateOperand(1))));
        let err = c.append(Instruction::gate(StandardGate::CX, vec![], vec![0]));
        assert!(matches!(err, Err(CircuitError::ArityMismatch { .. })));
        let err = c.append(Instruction::gate(
            StandardGate::H,
            vec![ParamValue::Real(1.0)],
            vec![0],
        ));
        assert!(matches!(err, Err(CircuitError::BadParamCount { .. })));
    }

    #[test]
    fn fractional_delay_is_rejected() {
        let mut c = Circuit::new(1, 0);
        let mut inst = Instruction::bare(OpKind::Delay, vec![0]);
        inst.params.push(ParamValue::Real(2.5));
        assert_eq!(c.append(inst), Err(CircuitError::NonIntegerDelay(2.5)));
        assert!(c.delay(4, 0).is_ok());
    }

    #[test]
    fn ghz_depth_counts_the_chain() {
        let n = 5;
        let mut c = Circuit::new(n, 0);
        c.h(0).unwrap();
        for q in 0..n - 1 {
            c.cx(q, q + 1).unwrap();
        }
        assert_eq!(c.depth(), n as u64);
        // Only the CX chain when filtered.
        let twoq = c.depth_filtered(&|i| i.is_gate() && i.qubits.len() == 2);
        assert_eq!(twoq, (n - 1) as u64);
    }

    #[test]
    fn disjoint_gates_share_a_level() {
        let mut c = Circuit::new(4, 0);
        c.cx(0, 1).unwrap();
        c.cx(2, 3).unwrap();
        assert_eq!(c.depth(), 1);
    }

    #[test]
    fn barriers_order_but_do_not_count() {
        let mut c = Circuit::new(2, 0);
        c.h(0).unwrap();
        c.barrier(&[0, 1]).unwrap();
        c.h(1).unwrap();
        // h(1) is pushed after the barrier which saw h(0)'s level.
        assert_eq!(c.depth(), 2);
        let mut d = Circuit::new(2, 0);
        d.barrier(&[0, 1]).unwrap();
        assert_eq!(d.depth(), 0);
    }

    #[test]
    fn empty_for_loop_runs_zero_times() {
        let mut body = Circuit::new(1, 0);
        body.x(0).unwrap();
        let mut c = Circuit::new(1, 0);
        c.for_loop("i", 0, 0, body).unwrap();
        assert_eq!(c.depth(), 0);
        assert_eq!(c.count_ops().get("x"), None);
    }

    #[test]
    fn for_loop_multiplies_counts() {
        let mut body = Circuit::new(2, 0);
        body.cx(0, 1).unwrap();
        let mut c = Circuit::new(2, 0);
        c.for_loop("i", 0, 3, body).unwrap();
        assert_eq!(c.twoq_count(), 3);
        assert_eq!(c.count_ops()["cx"], 3);
    }

    #[test]
    fn block_width_must_match_parent() {
        let block = Circuit::new(1, 0);
        let mut c = Circuit::new(2, 1);
        let err = c.if_test(ClassicalExpr::equals(ClassicalExpr::Bit(0), 1), block);
        assert!(matches!(err, Err(CircuitError::BlockShapeMismatch { .. })));
    }

    #[test]
    fn switch_rejects_overlapping_cases() {
        let block = Circuit::new(1, 1);
        let mut c = Circuit::new(1, 1);
        let err = c.switch(
            ClassicalExpr::Bit(0),
            vec![(vec![0, 1], block.clone()), (vec![1], block)],
            None,
        );
        assert_eq!(err, Err(CircuitError::OverlappingCases(1)));
    }

    #[test]
    fn binding_is_partial_and_checked() {
        let theta = Parameter::new("theta");
        let mut c = Circuit::new(1, 0);
        c.rx(theta.clone(), 0).unwrap();
        c.rz(theta.scaled(2.0, 0.5), 0).unwrap();

        let mut wrong = BTreeMap::new();
        wrong.insert("phi".to_string(), 1.0);
        assert_eq!(
            c.bind_parameters(&wrong),
            Err(CircuitError::UnknownParameter("phi".to_string()))
        );

        let mut right = BTreeMap::new();
        right.insert("theta".to_string(), 0.25);
        let bound = c.bind_parameters(&right).unwrap();
        assert!(bound.free_parameters().is_empty());
        assert_eq!(bound.instructions()[0].params[0], ParamValue::Real(0.25));
        assert_eq!(bound.instructions()[1].params[0], ParamValue::Real(1.0));
        // The original is untouched.
        assert_eq!(c.free_parameters().len(), 1);
    }

    #[test]
    fn compose_remaps_and_rejects_collisions() {
        let mut inner = Circuit::new(2, 1);
        inner.cx(0, 1).unwrap();
        inner.measure(1, 0).unwrap();
        let base = Circuit::new(3, 2);
        let out = base.compose(&inner, &[2, 0], &[1]).unwrap();
        assert_eq!(out.instructions()[0].qubits, vec![2, 0]);
        assert_eq!(out.instructions()[1].clbits, vec![1]);
        assert!(matches!(
            base.compose(&inner, &[1, 1], &[0]),
            Err(CircuitError::MapCollision(1))
        ));
        assert!(matches!(
            base.compose(&inner, &[0], &[0]),
            Err(CircuitError::SizeMismatch { .. })
        ));
    }

    #[test]
    fn measurement_levels_flow_through_clbits() {
        let mut c = Circuit::new(2, 1);
        c.measure(0, 0).unwrap();
        let mut body = Circuit::new(2, 1);
        body.x(1).unwrap();
        c.if_test(ClassicalExpr::equals(ClassicalExpr::Bit(0), 1), body)
            .unwrap();
        // The conditional depends on the measurement through c[0].
        assert_eq!(c.depth(), 2);
    }

    #[test]
    fn control_flow_operands_are_derived_from_blocks() {
        let mut body = Circuit::new(3, 2);
        body.x(2).unwrap();
        body.measure(2, 1).unwrap();
        let mut c = Circuit::new(3, 2);
        c.if_test(ClassicalExpr::equals(ClassicalExpr::Bit(0), 1), body)
            .unwrap();
        let inst = &c.instructions()[0];
        assert_eq!(inst.qubits, vec![2]);
        assert_eq!(inst.clbits, vec![0, 1]);
    }
}
