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

//! As-late-as-possible scheduling with explicit idle padding.

use super::{Pass, PropertySet, TranspileError};
use crate::circuit::{Circuit, Instruction, OpKind, ParamValue, StandardGate};
use crate::dag::DagCircuit;
use crate::target::Target;

/// Schedule every operation as late as data dependencies allow, then make
/// idle time explicit as delay instructions.  With `dd` set, idle windows
/// between operations long enough for an X-X echo get a dynamical-decoupling
/// sequence instead of a bare delay.
pub struct ScheduleAlap {
    pub dd: bool,
}

impl ScheduleAlap {
    pub fn new() -> Self {
        ScheduleAlap { dd: false }
    }

    pub fn with_dd() -> Self {
        ScheduleAlap { dd: true }
    }
}

impl Default for ScheduleAlap {
    fn default() -> Self {
        Self::new()
    }
}

fn delay_inst(duration: u64, q: u32) -> Instruction {
    Instruction {
        op: OpKind::Delay,
        params: vec![ParamValue::Real(duration as f64)],
        qubits: vec![q],
        clbits: vec![],
        condition: None,
        blocks: vec![],
        case_values: vec![],
        has_default: false,
    }
}

fn x_inst(q: u32) -> Instruction {
    Instruction {
        op: OpKind::Gate(StandardGate::X),
        params: vec![],
        qubits: vec![q],
        clbits: vec![],
        condition: None,
        blocks: vec![],
        case_values: vec![],
        has_default: false,
    }
}

/// The instruction rebuilt with scheduled blocks, plus its duration in dt.
fn timed_instruction(
    inst: &Instruction,
    target: &Target,
    dd: bool,
) -> Result<(Instruction, u64), TranspileError> {
    match &inst.op {
        OpKind::Gate(_) | OpKind::Measure | OpKind::Reset | OpKind::Init => {
            let dur = target.duration(inst.op.name(), &inst.qubits).ok_or_else(|| {
                TranspileError::SchedulingFailed(format!(
                    "no duration for `{}` on {:?}",
                    inst.op.name(),
                    inst.qubits
                ))
            })?;
            Ok((inst.clone(), dur))
        }
        OpKind::Barrier => Ok((inst.clone(), 0)),
        OpKind::Delay => {
            let dur = inst.delay_dt().ok_or_else(|| {
                TranspileError::SchedulingFailed("delay without a duration".to_string())
            })?;
            Ok((inst.clone(), dur))
        }
        OpKind::IfElse | OpKind::Switch => {
            let mut blocks = Vec::with_capacity(inst.blocks.len());
            let mut longest = 0;
            for block in &inst.blocks {
                let (scheduled, dur) = schedule_circuit(block, target, dd)?;
                longest = longest.max(dur);
                blocks.push(scheduled);
            }
            let mut out = inst.clone();
            out.blocks = blocks;
            Ok((out, target.feedforward_dt() + longest))
        }
        OpKind::ForLoop { count, .. } => {
            let (scheduled, dur) = schedule_circuit(&inst.blocks[0], target, dd)?;
            let mut out = inst.clone();
            out.blocks = vec![scheduled];
            Ok((out, dur * count))
        }
        // No static bound exists for a while loop.
        OpKind::While => Err(TranspileError::SchedulingFailed(
            "while loops have no static duration".to_string(),
        )),
    }
}

/// One scheduled occupation of a wire.
struct Event {
    start: u64,
    end: u64,
    index: usize,
    barrier: bool,
}

/// ALAP-schedule a circuit and pad its idle windows; returns the padded
/// circuit and the total duration in dt.
fn schedule_circuit(
    circuit: &Circuit,
    target: &Target,
    dd: bool,
) -> Result<(Circuit, u64), TranspileError> {
    let timed: Vec<(Instruction, u64)> = circuit
        .instructions()
        .iter()
        .map(|inst| timed_instruction(inst, target, dd))
        .collect::<Result<_, _>>()?;

    // Reverse pass: distance from the circuit end to each start.
    let nq = circuit.num_qubits() as usize;
    let nc = circuit.num_clbits() as usize;
    let mut rev_q = vec![0u64; nq];
    let mut rev_c = vec![0u64; nc];
    let mut rev_end = vec![0u64; timed.len()];
    for (i, (inst, dur)) in timed.iter().enumerate().rev() {
        let mut start = 0;
        for &q in &inst.qubits {
            start = start.max(rev_q[q as usize]);
        }
        for &c in &inst.clbits {
            start = start.max(rev_c[c as usize]);
        }
        let end = start + dur;
        for &q in &inst.qubits {
            rev_q[q as usize] = end;
        }
        for &c in &inst.clbits {
            rev_c[c as usize] = end;
        }
        rev_end[i] = end;
    }
    let total = rev_end.iter().copied().max().unwrap_or(0);

    // Absolute per-qubit timelines.
    let mut timelines: Vec<Vec<Event>> = (0..nq).map(|_| Vec::new()).collect();
    for (i, (inst, dur)) in timed.iter().enumerate() {
        let start = total - rev_end[i];
        for &q in &inst.qubits {
            timelines[q as usize].push(Event {
                start,
                end: start + dur,
                index: i,
                barrier: matches!(inst.op, OpKind::Barrier),
            });
        }
    }

    // Sort key: start time, then the op the filler precedes, then emission
    // order within one filler sequence.
    let mut ordered: Vec<(u64, usize, usize, Instruction)> = timed
        .iter()
        .enumerate()
        .map(|(i, (inst, _))| (total - rev_end[i], i, usize::MAX, inst.clone()))
        .collect();

    for (q, events_raw) in timelines.iter_mut().enumerate() {
        events_raw.sort_by_key(|e| (e.start, e.index));
        if !events_raw.iter().any(|e| !e.barrier) {
            continue; // wire only crossed by barriers: leave it idle
        }
        let q = q as u32;
        let can_echo = dd && target.instruction_supported("x", &[q]);
        let x_dur = target.duration("x", &[q]).unwrap_or(0);
        let mut cursor = 0u64;
        let mut previous: Option<&Event> = None;
        for event in events_raw.iter() {
            let gap = event.start.saturating_sub(cursor);
            if gap > 0 {
                let interior = previous.is_some();
                if interior && can_echo && gap >= 2 * x_dur {
                    let slack = gap - 2 * x_dur;
                    let splits = [slack / 4, slack / 2, slack - slack / 4 - slack / 2];
                    let mut t = cursor;
                    let mut sub = 0;
                    let mut piece = |start: u64, inst: Instruction, sub: &mut usize| {
                        ordered.push((start, event.index, *sub, inst));
                        *sub += 1;
                    };
                    if splits[0] > 0 {
                        piece(t, delay_inst(splits[0], q), &mut sub);
                    }
                    t += splits[0];
                    piece(t, x_inst(q), &mut sub);
                    t += x_dur;
                    if splits[1] > 0 {
                        piece(t, delay_inst(splits[1], q), &mut sub);
                    }
                    t += splits[1];
                    piece(t, x_inst(q), &mut sub);
                    t += x_dur;
                    if splits[2] > 0 {
                        piece(t, delay_inst(splits[2], q), &mut sub);
                    }
                } else {
                    ordered.push((cursor, event.index, 0, delay_inst(gap, q)));
                }
            }
            cursor = event.end.max(cursor);
            previous = Some(event);
        }
        if cursor < total {
            ordered.push((cursor, usize::MAX, q as usize, delay_inst(total - cursor, q)));
        }
    }

    ordered.sort_by(|a, b| (a.0, a.1, a.2).cmp(&(b.0, b.1, b.2)));
    let instructions = ordered.into_iter().map(|(_, _, _, inst)| inst).collect();
    let padded = circuit
        .with_instructions(instructions)
        .map_err(TranspileError::Circuit)?;
    Ok((padded, total))
}

pub const SCHEDULE_DURATION_KEY: &str = "schedule.duration_dt";

impl Pass for ScheduleAlap {
    fn name(&self) -> &str {
        "schedule_alap"
    }

    fn run(
        &self,
        dag: DagCircuit,
        target: &Target,
        properties: &mut PropertySet,
    ) -> Result<DagCircuit, TranspileError> {
        let circuit = dag.to_circuit().map_err(TranspileError::Circuit)?;
        let (mut padded, total) = schedule_circuit(&circuit, target, self.dd)?;
        padded.set_metadata(SCHEDULE_DURATION_KEY, total.to_string());
        properties.set(SCHEDULE_DURATION_KEY, &total.to_string());
        Ok(DagCircuit::from_circuit(&padded))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum_info::{circuit_to_unitary, phase_aligned_distance};
    use crate::target::presets::{
        heron_custom, HERON_1Q_DT, HERON_CZ_DT, HERON_FEEDFORWARD_DT, HERON_MEASURE_DT,
    };
    use crate::transpiler::{PassPipeline, PipelineItem, Stage};

    fn schedule(circuit: &Circuit, dd: bool) -> (Circuit, u64) {
        let target = heron_custom("sched", 4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let pass = ScheduleAlap { dd };
        let mut pipeline = PassPipeline::new();
        pipeline.push(Stage::Scheduling, PipelineItem::pass(pass));
        let result = pipeline.run(circuit, &target).unwrap();
        let total: u64 = result
            .properties
            .get(SCHEDULE_DURATION_KEY)
            .unwrap()
            .parse()
            .unwrap();
        (result.circuit, total)
    }

    fn occupation(circuit: &Circuit, target: &Target, q: u32) -> u64 {
        circuit
            .instructions()
            .iter()
            .filter(|inst| inst.qubits.contains(&q))
            .map(|inst| match inst.op {
                OpKind::Delay => inst.delay_dt().unwrap(),
                _ => target.duration(inst.op.name(), &inst.qubits).unwrap_or(0),
            })
            .sum()
    }

    #[test]
    fn idle_time_becomes_explicit_delay() {
        let mut c = Circuit::new(2, 0);
        c.sx(0).unwrap();
        c.sx(0).unwrap();
        c.sx(1).unwrap();
        c.cz(0, 1).unwrap();
        let (out, total) = schedule(&c, false);
        assert_eq!(total, 2 * HERON_1Q_DT + HERON_CZ_DT);
        let target = heron_custom("sched", 4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        for q in [0, 1] {
            assert_eq!(occupation(&out, &target, q), total, "qubit {q} not packed");
        }
        // ALAP: the lone sx on qubit 1 floats late, so its delay leads.
        let q1_ops: Vec<&Instruction> = out
            .instructions()
            .iter()
            .filter(|i| i.qubits == vec![1])
            .collect();
        assert_eq!(q1_ops.len(), 2);
        assert!(matches!(q1_ops[0].op, OpKind::Delay));
        assert_eq!(q1_ops[0].delay_dt(), Some(HERON_1Q_DT));
    }

    #[test]
    fn measurement_dominates_duration() {
        let mut c = Circuit::new(1, 1);
        c.sx(0).unwrap();
        c.measure(0, 0).unwrap();
        let (_, total) = schedule(&c, false);
        assert_eq!(total, HERON_1Q_DT + HERON_MEASURE_DT);
    }

    #[test]
    fn untouched_qubits_stay_unpadded() {
        let mut c = Circuit::new(3, 0);
        c.sx(0).unwrap();
        let (out, _) = schedule(&c, false);
        assert!(out.instructions().iter().all(|i| !i.qubits.contains(&2)));
    }

    #[test]
    fn branch_duration_includes_feedforward() {
        let mut then = Circuit::new(2, 1);
        then.sx(1).unwrap();
        let mut c = Circuit::new(2, 1);
        c.measure(0, 0).unwrap();
        c.if_test(crate::circuit::ClassicalExpr::bit(0), then).unwrap();
        let (_, total) = schedule(&c, false);
        assert_eq!(
            total,
            HERON_MEASURE_DT + HERON_FEEDFORWARD_DT + HERON_1Q_DT
        );
    }

    #[test]
    fn for_loop_duration_scales_with_count() {
        let mut body = Circuit::new(1, 0);
        body.sx(0).unwrap();
        let mut c = Circuit::new(1, 0);
        c.for_loop("i", 0, 5, body).unwrap();
        let (_, total) = schedule(&c, false);
        assert_eq!(total, 5 * HERON_1Q_DT);
    }

    #[test]
    fn while_loops_cannot_be_scheduled() {
        let mut body = Circuit::new(1, 1);
        body.measure(0, 0).unwrap();
        let mut c = Circuit::new(1, 1);
        c.measure(0, 0).unwrap();
        c.while_loop(crate::circuit::ClassicalExpr::bit(0), body).unwrap();
        let target = heron_custom("sched", 4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        let mut pipeline = PassPipeline::new();
        pipeline.push(Stage::Scheduling, PipelineItem::pass(ScheduleAlap::new()));
        assert!(matches!(
            pipeline.run(&c, &target).unwrap_err(),
            TranspileError::SchedulingFailed(_)
        ));
    }

    #[test]
    fn dd_fills_long_interior_gaps_with_echo_pairs() {
        // The leading barrier pins qubit 0 at time zero, so the
        // measurement-length idle window before its gates is interior.
        let mut c = Circuit::new(2, 1);
        c.barrier(&[0, 1]).unwrap();
        c.sx(0).unwrap();
        c.measure(1, 0).unwrap();
        c.barrier(&[0, 1]).unwrap();
        c.sx(0).unwrap();
        let (out, total) = schedule(&c, true);
        let xs: Vec<&Instruction> = out
            .instructions()
            .iter()
            .filter(|i| matches!(i.op, OpKind::Gate(StandardGate::X)))
            .collect();
        assert_eq!(xs.len(), 2, "one echo pair on the idle qubit");
        assert!(xs.iter().all(|i| i.qubits == vec![0]));
        let target = heron_custom("sched", 4, &[(0, 1), (1, 2), (2, 3)]).unwrap();
        assert_eq!(occupation(&out, &target, 0), total);
        // The echo pair is inert.
        let (plain, _) = schedule(&c, false);
        let strip = |c: &Circuit| {
            let kept: Vec<Instruction> = c
                .instructions()
                .iter()
                .filter(|i| !matches!(i.op, OpKind::Measure))
                .cloned()
                .collect();
            let mut bare = Circuit::new(c.num_qubits(), 0);
            for mut inst in kept {
                inst.clbits.clear();
                bare.append(inst).unwrap();
            }
            bare
        };
        let u_dd = circuit_to_unitary(&strip(&out)).unwrap();
        let u_plain = circuit_to_unitary(&strip(&plain)).unwrap();
        assert!(phase_aligned_distance(&u_dd, &u_plain) < 1e-9);
    }

    #[test]
    fn short_gaps_stay_plain_delays_under_dd() {
        let mut c = Circuit::new(2, 0);
        c.sx(0).unwrap();
        c.cz(0, 1).unwrap();
        let (out, _) = schedule(&c, true);
        assert!(!out
            .instructions()
            .iter()
            .any(|i| matches!(i.op, OpKind::Gate(StandardGate::X))));
    }

    #[test]
    fn scheduling_preserves_semantics() {
        let mut c = Circuit::new(3, 0);
        c.sx(0).unwrap();
        c.cz(0, 1).unwrap();
        c.rz(0.3, 1).unwrap();
        c.cz(1, 2).unwrap();
        c.sx(2).unwrap();
        let (out, _) = schedule(&c, false);
        let ua = circuit_to_unitary(&c).unwrap();
        let ub = circuit_to_unitary(&out).unwrap();
        assert!(phase_aligned_distance(&ua, &ub) < 1e-12);
    }
}
