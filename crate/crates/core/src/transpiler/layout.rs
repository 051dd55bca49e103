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

//! Initial placement of circuit qubits onto physical qubits.

use super::{Layout, Pass, PropertySet, TranspileError, LAYOUT_INITIAL_KEY};
use crate::circuit::{Circuit, Instruction};
use crate::dag::DagCircuit;
use crate::target::{CouplingMap, Target};
use std::collections::BTreeMap;

fn accumulate_pairs(inst: &Instruction, weight: usize, pairs: &mut BTreeMap<(u32, u32), usize>) {
    if inst.op.is_gate() && inst.qubits.len() == 2 {
        let (a, b) = (inst.qubits[0], inst.qubits[1]);
        *pairs.entry((a.min(b), a.max(b))).or_insert(0) += weight;
    }
    let multiplier = match &inst.op {
        crate::circuit::OpKind::ForLoop { count, .. } => *count as usize,
        _ => 1,
    };
    for block in &inst.blocks {
        for nested in block.instructions() {
            accumulate_pairs(nested, weight * multiplier, pairs);
        }
    }
}

/// Interaction weights between circuit qubit pairs.
fn interaction_pairs(circuit: &Circuit) -> BTreeMap<(u32, u32), usize> {
    let mut pairs = BTreeMap::new();
    for inst in circuit.instructions() {
        accumulate_pairs(inst, 1, &mut pairs);
    }
    pairs
}

/// Greedy connectivity-aware placement: heavily interacting qubits go to
/// adjacent physical qubits where possible.
fn greedy_layout(circuit: &Circuit, coupling: &CouplingMap) -> Vec<u32> {
    let n = circuit.num_qubits();
    let pairs = interaction_pairs(circuit);
    let mut strength: Vec<usize> = vec![0; n as usize];
    for (&(a, b), &w) in &pairs {
        strength[a as usize] += w;
        strength[b as usize] += w;
    }
    let mut placed: Vec<Option<u32>> = vec![None; n as usize];
    let mut used = vec![false; coupling.num_qubits() as usize];
    let distances = coupling.distance_matrix();
    loop {
        // Next logical: most strongly attached to already-placed ones, or
        // the busiest remaining when nothing is attached yet.
        let mut best: Option<(usize, usize, u32)> = None;
        for l in 0..n {
            if placed[l as usize].is_some() {
                continue;
            }
            let attached: usize = pairs
                .iter()
                .filter(|(&(a, b), _)| {
                    (a == l && placed[b as usize].is_some())
                        || (b == l && placed[a as usize].is_some())
                })
                .map(|(_, &w)| w)
                .sum();
            let key = (attached, strength[l as usize], l);
            let better = match best {
                None => true,
                Some((ba, bs, bl)) => {
                    (attached, strength[l as usize]) > (ba, bs)
                        || ((attached, strength[l as usize]) == (ba, bs) && l < bl)
                }
            };
            if better {
                best = Some(key);
            }
        }
        let Some((attached, _, logical)) = best else {
            break;
        };
        let physical = if attached == 0 {
            // Seed: highest-degree free physical qubit.
            (0..coupling.num_qubits())
                .filter(|&p| !used[p as usize])
                .max_by_key(|&p| (coupling.degree(p), std::cmp::Reverse(p)))
                .expect("target is wide enough")
        } else {
            // Minimize the weighted distance to placed partners.
            let partners: Vec<(u32, usize)> = pairs
                .iter()
                .filter_map(|(&(a, b), &w)| {
                    if a == logical {
                        placed[b as usize].map(|p| (p, w))
                    } else if b == logical {
                        placed[a as usize].map(|p| (p, w))
                    } else {
                        None
                    }
                })
                .collect();
            (0..coupling.num_qubits())
                .filter(|&p| !used[p as usize])
                .min_by_key(|&p| {
                    let cost: u64 = partners
                        .iter()
                        .map(|&(partner, w)| {
                            let d = distances[p as usize][partner as usize];
                            (d as u64).saturating_mul(w as u64)
                        })
                        .sum();
                    (cost, p)
                })
                .expect("target is wide enough")
        };
        placed[logical as usize] = Some(physical);
        used[physical as usize] = true;
    }
    placed.into_iter().map(|p| p.expect("all placed")).collect()
}

/// Choose the initial layout and publish it to the property set.
pub struct ChooseLayout {
    explicit: Option<Vec<u32>>,
}

impl ChooseLayout {
    pub fn new(explicit: Option<Vec<u32>>) -> Self {
        ChooseLayout { explicit }
    }
}

impl Pass for ChooseLayout {
    fn name(&self) -> &str {
        "choose_layout"
    }

    fn run(
        &self,
        dag: DagCircuit,
        target: &Target,
        properties: &mut PropertySet,
    ) -> Result<DagCircuit, TranspileError> {
        let n = dag.num_qubits();
        if n > target.num_qubits() {
            return Err(TranspileError::WidthExceeded {
                circuit: n,
                target: target.num_qubits(),
            });
        }
        let layout = match &self.explicit {
            Some(mapping) => {
                if mapping.len() != n as usize {
                    return Err(TranspileError::BadLayout(format!(
                        "layout has {} entries for {} qubits",
                        mapping.len(),
                        n
                    )));
                }
                for (pos, &p) in mapping.iter().enumerate() {
                    if p >= target.num_qubits() {
                        return Err(TranspileError::BadLayout(format!(
                            "physical qubit {p} outside the target"
                        )));
                    }
                    if mapping[..pos].contains(&p) {
                        return Err(TranspileError::BadLayout(format!(
                            "physical qubit {p} assigned twice"
                        )));
                    }
                }
                mapping.clone()
            }
            None => greedy_layout(&dag.to_circuit()?, &target.coupling_map()),
        };
        properties.set(LAYOUT_INITIAL_KEY, Layout::new(layout).to_metadata());
        Ok(dag)
    }
}

/// Rewrite the circuit onto the full physical register using the layout
/// chosen earlier, recording it in the circuit metadata.
pub struct ApplyLayout;

impl Pass for ApplyLayout {
    fn name(&self) -> &str {
        "apply_layout"
    }

    fn run(
        &self,
        dag: DagCircuit,
        target: &Target,
        properties: &mut PropertySet,
    ) -> Result<DagCircuit, TranspileError> {
        let text = properties
            .get(LAYOUT_INITIAL_KEY)
            .ok_or_else(|| TranspileError::BadLayout("no layout chosen".to_string()))?;
        let layout = Layout::from_metadata(text)?;
        let circuit = dag.to_circuit()?;
        if layout.len() != circuit.num_qubits() as usize {
            return Err(TranspileError::BadLayout(
                "layout width does not match the circuit".to_string(),
            ));
        }
        let base = Circuit::with_registers(
            vec![("q".to_string(), target.num_qubits())],
            vec![("c".to_string(), circuit.num_clbits())],
        )?
        .with_name(circuit.name());
        let clbit_map: Vec<u32> = (0..circuit.num_clbits()).collect();
        let mut physical = base.compose(&circuit, layout.as_slice(), &clbit_map)?;
        for (key, value) in circuit.metadata() {
            physical.set_metadata(key.clone(), value.clone());
        }
        physical.set_metadata(LAYOUT_INITIAL_KEY, layout.to_metadata());
        Ok(DagCircuit::from_circuit(&physical))
    }
}
