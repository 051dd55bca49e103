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

//! Dependency-graph view of a circuit.
//!
//! Every qubit and clbit is a wire running from an input node to an output
//! node through the operations that touch it.  Peephole passes use the
//! graph to find adjacent cancelling gates, maximal single-qubit runs and
//! two-qubit blocks, and splice in replacements without re-walking the
//! whole instruction list.

use crate::circuit::{Circuit, CircuitError, Instruction};
use petgraph::dot::Dot;
use petgraph::graph::NodeIndex;
use petgraph::stable_graph::StableDiGraph;
use petgraph::visit::EdgeRef;
use petgraph::Direction;
use std::collections::{BinaryHeap, HashMap, HashSet};
use std::cmp::Reverse;
use std::fmt;

/// A node in the dependency graph.
#[derive(Clone, Debug)]
pub enum DagNode {
    QubitIn(u32),
    QubitOut(u32),
    ClbitIn(u32),
    ClbitOut(u32),
    Op(Instruction),
}

impl fmt::Display for DagNode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DagNode::QubitIn(q) => write!(f, "q{q} in"),
            DagNode::QubitOut(q) => write!(f, "q{q} out"),
            DagNode::ClbitIn(c) => write!(f, "c{c} in"),
            DagNode::ClbitOut(c) => write!(f, "c{c} out"),
            DagNode::Op(inst) => write!(f, "{}", inst.op.name()),
        }
    }
}

/// Edge label: which wire a dependency travels along.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Wire {
    Qubit(u32),
    Clbit(u32),
}

impl fmt::Display for Wire {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Wire::Qubit(q) => write!(f, "q{q}"),
            Wire::Clbit(c) => write!(f, "c{c}"),
        }
    }
}

/// Dependency graph of one circuit.
#[derive(Clone, Debug)]
pub struct DagCircuit {
    graph: StableDiGraph<DagNode, Wire>,
    qubit_io: Vec<(NodeIndex, NodeIndex)>,
    /// Registers, name and metadata of the source circuit, kept so the
    /// graph can be lowered back without loss.
    template: Circuit,
}

fn instruction_wires(inst: &Instruction) -> Vec<Wire> {
    let mut wires: Vec<Wire> = inst.qubits.iter().map(|&q| Wire::Qubit(q)).collect();
    wires.extend(inst.clbits.iter().map(|&c| Wire::Clbit(c)));
    wires
}

impl DagCircuit {
    pub fn from_circuit(circuit: &Circuit) -> DagCircuit {
        let mut graph = StableDiGraph::new();
        let mut last: HashMap<Wire, NodeIndex> = HashMap::new();
        let mut qubit_io = Vec::with_capacity(circuit.num_qubits() as usize);
        for q in 0..circuit.num_qubits() {
            let input = graph.add_node(DagNode::QubitIn(q));
            let output = graph.add_node(DagNode::QubitOut(q));
            qubit_io.push((input, output));
            last.insert(Wire::Qubit(q), input);
        }
        let mut clbit_io = Vec::with_capacity(circuit.num_clbits() as usize);
        for c in 0..circuit.num_clbits() {
            let input = graph.add_node(DagNode::ClbitIn(c));
            let output = graph.add_node(DagNode::ClbitOut(c));
            clbit_io.push((input, output));
            last.insert(Wire::Clbit(c), input);
        }
        for inst in circuit.instructions() {
            let node = graph.add_node(DagNode::Op(inst.clone()));
            for wire in instruction_wires(inst) {
                let prev = last[&wire];
                graph.add_edge(prev, node, wire);
                last.insert(wire, node);
            }
        }
        for q in 0..circuit.num_qubits() {
            let wire = Wire::Qubit(q);
            graph.add_edge(last[&wire], qubit_io[q as usize].1, wire);
        }
        for c in 0..circuit.num_clbits() {
            let wire = Wire::Clbit(c);
            graph.add_edge(last[&wire], clbit_io[c as usize].1, wire);
        }
        DagCircuit {
            graph,
            qubit_io,
            template: circuit.empty_like(),
        }
    }

    pub fn num_qubits(&self) -> u32 {
        self.template.num_qubits()
    }

    pub fn num_clbits(&self) -> u32 {
        self.template.num_clbits()
    }

    pub fn name(&self) -> &str {
        self.template.name()
    }

    pub fn metadata_value(&self, key: &str) -> Option<&str> {
        self.template.metadata_value(key)
    }

    pub fn set_metadata(&mut self, key: impl Into<String>, value: impl Into<String>) {
        self.template.set_metadata(key, value);
    }

    pub fn instruction(&self, node: NodeIndex) -> Option<&Instruction> {
        match self.graph.node_weight(node) {
            Some(DagNode::Op(inst)) => Some(inst),
            _ => None,
        }
    }

    pub fn num_ops(&self) -> usize {
        self.graph
            .node_weights()
            .filter(|n| matches!(n, DagNode::Op(_)))
            .count()
    }

    /// Operation nodes in topological order.  Ties are broken by node
    /// creation order, so a freshly converted circuit reads back in its
    /// original instruction order.
    pub fn topological_op_nodes(&self) -> Vec<NodeIndex> {
        let mut in_degree: HashMap<NodeIndex, usize> = HashMap::new();
        let mut ready = BinaryHeap::new();
        for node in self.graph.node_indices() {
            let degree = self
                .graph
                .edges_directed(node, Direction::Incoming)
                .count();
            if degree == 0 {
                ready.push(Reverse(node));
            }
            in_degree.insert(node, degree);
        }
        let mut order = Vec::new();
        while let Some(Reverse(node)) = ready.pop() {
            if matches!(self.graph[node], DagNode::Op(_)) {
                order.push(node);
            }
            for edge in self.graph.edges_directed(node, Direction::Outgoing) {
                let next = edge.target();
                let entry = in_degree.get_mut(&next).expect("node counted");
                *entry -= 1;
                if *entry == 0 {
                    ready.push(Reverse(next));
                }
            }
        }
        order
    }

    /// Lower back to a circuit in topological order.
    pub fn to_circuit(&self) -> Result<Circuit, CircuitError> {
        let instructions = self
            .topological_op_nodes()
            .into_iter()
            .map(|n| match &self.graph[n] {
                DagNode::Op(inst) => inst.clone(),
                _ => unreachable!("topological_op_nodes returns only ops"),
            })
            .collect();
        self.template.with_instructions(instructions)
    }

    /// The operation (if any) that consumes `wire` right after `node`.
    pub fn successor_on_wire(&self, node: NodeIndex, wire: Wire) -> Option<NodeIndex> {
        self.graph
            .edges_directed(node, Direction::Outgoing)
            .find(|e| *e.weight() == wire)
            .map(|e| e.target())
            .filter(|&n| matches!(self.graph[n], DagNode::Op(_)))
    }

    /// The operation (if any) that produced `wire` right before `node`.
    pub fn predecessor_on_wire(&self, node: NodeIndex, wire: Wire) -> Option<NodeIndex> {
        self.graph
            .edges_directed(node, Direction::Incoming)
            .find(|e| *e.weight() == wire)
            .map(|e| e.source())
            .filter(|&n| matches!(self.graph[n], DagNode::Op(_)))
    }

    fn upstream_endpoint(&self, node: NodeIndex, wire: Wire) -> NodeIndex {
        self.graph
            .edges_directed(node, Direction::Incoming)
            .find(|e| *e.weight() == wire)
            .map(|e| e.source())
            .expect("wire enters the node")
    }

    fn downstream_endpoint(&self, node: NodeIndex, wire: Wire) -> NodeIndex {
        self.graph
            .edges_directed(node, Direction::Outgoing)
            .find(|e| *e.weight() == wire)
            .map(|e| e.target())
            .expect("wire leaves the node")
    }

    /// Splice `replacement` in place of `nodes`.
    ///
    /// The nodes must be contiguous on every wire they touch (no outside
    /// operation sits between two of them on a shared wire), listed in
    /// topological order, and the replacement may only use wires the
    /// removed nodes used.
    pub fn replace_block(
        &mut self,
        nodes: &[NodeIndex],
        replacement: Vec<Instruction>,
    ) -> Result<(), CircuitError> {
        let node_set: HashSet<NodeIndex> = nodes.iter().copied().collect();
        if node_set.len() != nodes.len() {
            return Err(CircuitError::Invalid("duplicate node in block".to_string()));
        }
        // Wires the block touches, and the first/last block node on each.
        let mut wires: Vec<Wire> = Vec::new();
        let mut first_on: HashMap<Wire, NodeIndex> = HashMap::new();
        let mut last_on: HashMap<Wire, NodeIndex> = HashMap::new();
        for &node in nodes {
            let inst = self
                .instruction(node)
                .ok_or_else(|| CircuitError::Invalid("block node is not an op".to_string()))?;
            for wire in instruction_wires(inst) {
                if !first_on.contains_key(&wire) {
                    wires.push(wire);
                    first_on.insert(wire, node);
                }
                last_on.insert(wire, node);
            }
        }
        for inst in &replacement {
            for wire in instruction_wires(inst) {
                if !first_on.contains_key(&wire) {
                    return Err(CircuitError::Invalid(format!(
                        "replacement uses wire {wire} outside the block"
                    )));
                }
            }
        }
        let mut entry: HashMap<Wire, NodeIndex> = HashMap::new();
        let mut exit: HashMap<Wire, NodeIndex> = HashMap::new();
        for &wire in &wires {
            let mut head = first_on[&wire];
            // Walk upstream while still inside the block, then record the
            // boundary endpoints.
            loop {
                let prev = self.upstream_endpoint(head, wire);
                if node_set.contains(&prev) {
                    head = prev;
                } else {
                    entry.insert(wire, prev);
                    break;
                }
            }
            let mut tail = last_on[&wire];
            loop {
                let next = self.downstream_endpoint(tail, wire);
                if node_set.contains(&next) {
                    tail = next;
                } else {
                    exit.insert(wire, next);
                    break;
                }
            }
        }
        for &node in nodes {
            self.graph.remove_node(node);
        }
        let mut cursor = entry;
        for inst in replacement {
            let inst_wires = instruction_wires(&inst);
            let node = self.graph.add_node(DagNode::Op(inst));
            for wire in inst_wires {
                let prev = cursor[&wire];
                self.graph.add_edge(prev, node, wire);
                cursor.insert(wire, node);
            }
        }
        for &wire in &wires {
            self.graph.add_edge(cursor[&wire], exit[&wire], wire);
        }
        Ok(())
    }

    /// Maximal runs of single-qubit gates, per qubit wire, in order.
    pub fn collect_1q_runs(&self) -> Vec<Vec<NodeIndex>> {
        let mut runs = Vec::new();
        for q in 0..self.num_qubits() {
            let wire = Wire::Qubit(q);
            let mut run: Vec<NodeIndex> = Vec::new();
            let mut node = self.qubit_io[q as usize].0;
            loop {
                let next = self.downstream_endpoint(node, wire);
                let is_1q_gate = match self.graph.node_weight(next) {
                    Some(DagNode::Op(inst)) => inst.op.is_gate() && inst.qubits.len() == 1,
                    _ => false,
                };
                if is_1q_gate {
                    run.push(next);
                } else if !run.is_empty() {
                    runs.push(std::mem::take(&mut run));
                }
                if matches!(self.graph.node_weight(next), Some(DagNode::QubitOut(_))) {
                    break;
                }
                node = next;
            }
        }
        runs
    }

    /// Maximal blocks of gates confined to one qubit pair, in topological
    /// order.  Single-qubit gates between the pair's two-qubit gates are
    /// absorbed into the block; any other operation on either qubit closes
    /// it.  Only blocks containing at least one two-qubit gate are
    /// returned.
    pub fn collect_2q_blocks(&self) -> Vec<Vec<NodeIndex>> {
        #[derive(Default)]
        struct Open {
            nodes: Vec<NodeIndex>,
            twoq: usize,
        }
        let mut blocks: Vec<Vec<NodeIndex>> = Vec::new();
        let mut open: HashMap<(u32, u32), Open> = HashMap::new();
        let mut pending: HashMap<u32, Vec<NodeIndex>> = HashMap::new();
        let close_touching = |open: &mut HashMap<(u32, u32), Open>,
                                  blocks: &mut Vec<Vec<NodeIndex>>,
                                  qubits: &[u32]| {
            let pairs: Vec<(u32, u32)> = open
                .keys()
                .filter(|(a, b)| qubits.contains(a) || qubits.contains(b))
                .copied()
                .collect();
            for pair in pairs {
                let block = open.remove(&pair).expect("pair is open");
                if block.twoq > 0 {
                    blocks.push(block.nodes);
                }
            }
        };
        for node in self.topological_op_nodes() {
            let inst = self.instruction(node).expect("op node");
            let is_plain_gate = inst.op.is_gate() && inst.clbits.is_empty();
            if is_plain_gate && inst.qubits.len() == 1 {
                pending.entry(inst.qubits[0]).or_default().push(node);
                continue;
            }
            if is_plain_gate && inst.qubits.len() == 2 {
                let (a, b) = (inst.qubits[0], inst.qubits[1]);
                let pair = (a.min(b), a.max(b));
                // A gate on a new pair closes open blocks sharing a qubit.
                let overlapping: Vec<(u32, u32)> = open
                    .keys()
                    .filter(|&&p| p != pair && (p.0 == a || p.0 == b || p.1 == a || p.1 == b))
                    .copied()
                    .collect();
                for other in overlapping {
                    let block = open.remove(&other).expect("pair is open");
                    if block.twoq > 0 {
                        blocks.push(block.nodes);
                    }
                }
                let slot = open.entry(pair).or_default();
                for q in [pair.0, pair.1] {
                    if let Some(buffered) = pending.remove(&q) {
                        slot.nodes.extend(buffered);
                    }
                }
                slot.nodes.push(node);
                slot.twoq += 1;
                continue;
            }
            // Anything else (wider gates, barriers, measures, control flow)
            // interrupts blocks and strands buffered 1q gates in place.
            close_touching(&mut open, &mut blocks, &inst.qubits);
            for &q in &inst.qubits {
                pending.remove(&q);
            }
        }
        for (_, block) in open {
            if block.twoq > 0 {
                blocks.push(block.nodes);
            }
        }
        blocks
    }

    /// Graphviz rendering of the dependency structure.
    pub fn dot(&self) -> String {
        format!("{}", Dot::new(&self.graph))
    }
}
