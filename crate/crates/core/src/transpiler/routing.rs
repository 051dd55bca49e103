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

//! Swap insertion for two-qubit gates on non-adjacent qubits.
//!
//! The router walks the instruction list keeping a wire-to-physical map.
//! Every swap it inserts strictly shortens the distance of the pending
//! two-qubit gate, so it always makes progress; among distance-reducing
//! swaps it prefers the one that also helps upcoming gates (discounted
//! one-step lookahead).  Control-flow blocks are routed recursively and
//! unwound - their inserted swaps are replayed in reverse at the block end
//! so a conditionally executed block never changes the wire map.

use super::{Layout, Pass, PropertySet, TranspileError, LAYOUT_FINAL_KEY, LAYOUT_INITIAL_KEY, LAYOUT_ROUTING_KEY};
use crate::circuit::{Instruction, OpKind, StandardGate};
use crate::dag::DagCircuit;
use crate::target::{CouplingMap, Target};

/// Discount applied to each successive lookahead gate.
const LOOKAHEAD_WEIGHT: f64 = 0.5;
/// How many upcoming two-qubit gates the tie-break considers.
const LOOKAHEAD_DEPTH: usize = 5;

pub struct RouteCircuit;

impl RouteCircuit {
    pub fn new() -> Self {
        RouteCircuit
    }
}

impl Default for RouteCircuit {
    fn default() -> Self {
        RouteCircuit::new()
    }
}

struct Router<'a> {
    coupling: &'a CouplingMap,
    distances: Vec<Vec<u32>>,
    /// Wire -> physical qubit currently holding its state.
    pos: Vec<u32>,
    /// Physical qubit -> wire (inverse of `pos`).
    inv: Vec<u32>,
    swaps: usize,
}

impl<'a> Router<'a> {
    fn new(coupling: &'a CouplingMap, width: u32) -> Self {
        Router {
            coupling,
            distances: coupling.distance_matrix(),
            pos: (0..width).collect(),
            inv: (0..width).collect(),
            swaps: 0,
        }
    }

    fn apply_swap(&mut self, a: u32, b: u32) {
        let wa = self.inv[a as usize];
        let wb = self.inv[b as usize];
        self.pos[wa as usize] = b;
        self.pos[wb as usize] = a;
        self.inv[a as usize] = wb;
        self.inv[b as usize] = wa;
    }

    fn swap_instruction(a: u32, b: u32) -> Instruction {
        Instruction {
            op: OpKind::Gate(StandardGate::Swap),
            params: vec![],
            qubits: vec![a, b],
            clbits: vec![],
            condition: None,
            blocks: vec![],
            case_values: vec![],
            has_default: false,
        }
    }

    /// Score a hypothetical swap against upcoming two-qubit gates.
    fn lookahead_cost(&self, swap: (u32, u32), future: &[(u32, u32)]) -> f64 {
        let mut cost = 0.0;
        let mut weight = LOOKAHEAD_WEIGHT;
        for &(wa, wb) in future {
            let mut pa = self.pos[wa as usize];
            let mut pb = self.pos[wb as usize];
            for p in [&mut pa, &mut pb] {
                if *p == swap.0 {
                    *p = swap.1;
                } else if *p == swap.1 {
                    *p = swap.0;
                }
            }
            cost += weight * self.distances[pa as usize][pb as usize] as f64;
            weight *= LOOKAHEAD_WEIGHT;
        }
        cost
    }

    /// Bring the contents of wires `wa` and `wb` adjacent, appending the
    /// needed swaps to `out`, and return the physical pair.
    fn make_adjacent(
        &mut self,
        wa: u32,
        wb: u32,
        future: &[(u32, u32)],
        out: &mut Vec<Instruction>,
        trace: &mut Vec<(u32, u32)>,
    ) -> Result<(u32, u32), TranspileError> {
        loop {
            let pa = self.pos[wa as usize];
            let pb = self.pos[wb as usize];
            let d = self.distances[pa as usize][pb as usize];
            if d == u32::MAX {
                return Err(TranspileError::RoutingFailed(format!(
                    "qubits {pa} and {pb} are not connected on the target"
                )));
            }
            if d <= 1 {
                return Ok((pa, pb));
            }
            // Candidate swaps that strictly reduce the distance.
            let mut best: Option<((u32, u32), f64)> = None;
            for (fixed, moving) in [(pb, pa), (pa, pb)] {
                for &n in self.coupling.neighbors(moving) {
                    if self.distances[n as usize][fixed as usize] >= d {
                        continue;
                    }
                    let pair = (moving.min(n), moving.max(n));
                    let cost = self.lookahead_cost(pair, future);
                    let better = match best {
                        None => true,
                        Some((bp, bc)) => cost < bc - 1e-12 || (cost <= bc + 1e-12 && pair < bp),
                    };
                    if better {
                        best = Some((pair, cost));
                    }
                }
            }
            let ((a, b), _) = best.ok_or_else(|| {
                TranspileError::RoutingFailed("no distance-reducing swap".to_string())
            })?;
            out.push(Self::swap_instruction(a, b));
            trace.push((a, b));
            self.apply_swap(a, b);
            self.swaps += 1;
        }
    }

    /// Route a block; when `restore` is set, replay inserted swaps in
    /// reverse so the wire map is unchanged at the end.
    fn route_block(
        &mut self,
        instructions: &[Instruction],
        restore: bool,
    ) -> Result<Vec<Instruction>, TranspileError> {
        let mut out = Vec::with_capacity(instructions.len());
        let mut trace: Vec<(u32, u32)> = Vec::new();
        // Wire pairs of upcoming two-qubit gates, for the lookahead.
        let mut upcoming: Vec<(usize, (u32, u32))> = instructions
            .iter()
            .enumerate()
            .filter(|(_, inst)| inst.op.is_gate() && inst.qubits.len() == 2)
            .map(|(i, inst)| (i, (inst.qubits[0], inst.qubits[1])))
            .collect();
        upcoming.reverse();
        for (i, inst) in instructions.iter().enumerate() {
            while let Some(&(j, _)) = upcoming.last() {
                if j <= i {
                    upcoming.pop();
                } else {
                    break;
                }
            }
            if !inst.blocks.is_empty() {
                let mut blocks = Vec::with_capacity(inst.blocks.len());
                for block in &inst.blocks {
                    let routed = self.route_block(block.instructions(), true)?;
                    blocks.push(block.empty_like().with_instructions(routed)?);
                }
                let qubits: Vec<u32> = blocks
                    .iter()
                    .flat_map(|b| b.qubits_used())
                    .collect::<std::collections::BTreeSet<u32>>()
                    .into_iter()
                    .collect();
                out.push(Instruction {
                    op: inst.op.clone(),
                    params: inst.params.clone(),
                    qubits,
                    clbits: inst.clbits.clone(),
                    condition: inst.condition.clone(),
                    blocks,
                    case_values: inst.case_values.clone(),
                    has_default: inst.has_default,
                });
                continue;
            }
            if inst.op.is_gate() && inst.qubits.len() == 2 {
                let future: Vec<(u32, u32)> = upcoming
                    .iter()
                    .rev()
                    .take(LOOKAHEAD_DEPTH)
                    .map(|&(_, pair)| pair)
                    .collect();
                let (pa, pb) =
                    self.make_adjacent(inst.qubits[0], inst.qubits[1], &future, &mut out, &mut trace)?;
                let mut gate = inst.clone();
                gate.qubits = vec![pa, pb];
                out.push(gate);
                continue;
            }
            // Anything else: rewrite operands through the wire map.
            let mut mapped = inst.clone();
            mapped.qubits = inst.qubits.iter().map(|&q| self.pos[q as usize]).collect();
            out.push(mapped);
        }
        if restore {
            for &(a, b) in trace.iter().rev() {
                out.push(Self::swap_instruction(a, b));
                self.apply_swap(a, b);
                self.swaps += 1;
            }
        }
        Ok(out)
    }
}

impl Pass for RouteCircuit {
    fn name(&self) -> &str {
        "route"
    }

    fn run(
        &self,
        dag: DagCircuit,
        target: &Target,
        properties: &mut PropertySet,
    ) -> Result<DagCircuit, TranspileError> {
        let circuit = dag.to_circuit()?;
        if circuit.num_qubits() > target.num_qubits() {
            return Err(TranspileError::WidthExceeded {
                circuit: circuit.num_qubits(),
                target: target.num_qubits(),
            });
        }
        let coupling = target.coupling_map();
        let mut router = Router::new(&coupling, circuit.num_qubits());
        let routed = router.route_block(circuit.instructions(), false)?;
        let mut out = circuit.empty_like().with_instructions(routed)?;
        let routing = Layout::new(router.pos.clone());
        let initial = match circuit.metadata_value(LAYOUT_INITIAL_KEY) {
            Some(text) => Layout::from_metadata(text)?,
            None => Layout::identity(circuit.num_qubits()),
        };
        out.set_metadata(LAYOUT_ROUTING_KEY, routing.to_metadata());
        out.set_metadata(LAYOUT_FINAL_KEY, initial.then(&routing).to_metadata());
        properties.set("routing.swaps", router.swaps.to_string());
        Ok(DagCircuit::from_circuit(&out))
    }
}
