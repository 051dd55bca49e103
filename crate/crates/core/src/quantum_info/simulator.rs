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

//! Exact dynamic-circuit simulation.
//!
//! The exact engine enumerates every measurement outcome as an unnormalized
//! branch, so a distribution is a list of `(state, clbits)` pairs whose
//! squared norms sum to one.  The sampling engine draws classical shots,
//! either per-trajectory or - when every measurement commutes to the end of
//! the circuit - by sampling the final distribution directly.
//!
//! When a noise model and a target are supplied, the engine replays the
//! as-soon-as-possible schedule of the circuit and accrues always-on ZZ
//! phases for every interval in which both qubits of a coupled pair sit
//! idle, including the classical feedforward window charged by runtime
//! control flow.

use crate::circuit::{Circuit, Instruction, OpKind};
use crate::quantum_info::noise::NoiseModel;
use crate::quantum_info::pauli::PauliObservable;
use crate::quantum_info::unitary::apply_matrix;
use crate::quantum_info::SimError;
use crate::target::Target;
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::{BTreeMap, VecDeque};

/// Widest circuit the dense engines accept.
pub const MAX_SIM_QUBITS: u32 = 16;

/// One measurement-outcome branch with an unnormalized state.
#[derive(Clone, Debug)]
pub struct Branch {
    /// Unnormalized amplitudes; the squared norm is the branch probability.
    pub amplitudes: Vec<Complex64>,
    pub clbits: Vec<bool>,
    /// The sequence of collapse outcomes (and recorded readout values when
    /// readout error splits a branch) that selects this branch.
    pub outcomes: Vec<u8>,
}

impl Branch {
    pub fn probability(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalized_amplitudes(&self) -> Vec<Complex64> {
        let norm = self.probability().sqrt();
        if norm == 0.0 {
            return self.amplitudes.clone();
        }
        self.amplitudes.iter().map(|a| a / norm).collect()
    }

    pub fn clbit_string(&self) -> String {
        clbit_key(&self.clbits)
    }
}

/// Render clbits with bit 0 rightmost.
pub(crate) fn clbit_key(clbits: &[bool]) -> String {
    clbits
        .iter()
        .rev()
        .map(|&b| if b { '1' } else { '0' })
        .collect()
}

/// The full set of branches produced by an exact run.
#[derive(Clone, Debug)]
pub struct BranchDistribution {
    pub num_qubits: u32,
    pub num_clbits: u32,
    pub branches: Vec<Branch>,
}

impl BranchDistribution {
    pub fn num_branches(&self) -> usize {
        self.branches.len()
    }

    pub fn total_probability(&self) -> f64 {
        self.branches.iter().map(|b| b.probability()).sum()
    }

    /// Probability of each classical bitstring (bit 0 rightmost).
    pub fn clbit_probabilities(&self) -> BTreeMap<String, f64> {
        let mut out = BTreeMap::new();
        for b in &self.branches {
            *out.entry(b.clbit_string()).or_insert(0.0) += b.probability();
        }
        out
    }

    /// Probability-weighted expectation over all branches.
    pub fn expectation(&self, obs: &PauliObservable) -> Result<f64, SimError> {
        let mut total = 0.0;
        for b in &self.branches {
            total += obs.expectation_state(&b.amplitudes)?;
        }
        Ok(total)
    }

    /// `<ideal| rho |ideal>` of the branch mixture against a pure state on
    /// the full register.
    pub fn fidelity_with_pure(&self, ideal: &[Complex64]) -> Result<f64, SimError> {
        if ideal.len() != 1usize << self.num_qubits {
            return Err(SimError::BadState(
                "ideal state width does not match the distribution".to_string(),
            ));
        }
        let mut total = 0.0;
        for b in &self.branches {
            let overlap: Complex64 = ideal
                .iter()
                .zip(&b.amplitudes)
                .map(|(i, a)| i.conj() * a)
                .sum();
            total += overlap.norm_sqr();
        }
        Ok(total)
    }

    /// `<ideal| rho_keep |ideal>` where `rho_keep` is the mixture reduced to
    /// the listed qubits (first listed = low bit of `ideal`'s index space).
    pub fn subsystem_fidelity(&self, keep: &[u32], ideal: &[Complex64]) -> Result<f64, SimError> {
        if ideal.len() != 1usize << keep.len() {
            return Err(SimError::BadState(
                "ideal state width does not match the kept qubits".to_string(),
            ));
        }
        let env: Vec<u32> = (0..self.num_qubits).filter(|q| !keep.contains(q)).collect();
        let mut total = 0.0;
        for b in &self.branches {
            for e in 0..1usize << env.len() {
                let mut base = 0usize;
                for (j, &q) in env.iter().enumerate() {
                    if e >> j & 1 == 1 {
                        base |= 1usize << q;
                    }
                }
                let mut overlap = Complex64::new(0.0, 0.0);
                for (i, iv) in ideal.iter().enumerate() {
                    let mut idx = base;
                    for (j, &q) in keep.iter().enumerate() {
                        if i >> j & 1 == 1 {
                            idx |= 1usize << q;
                        }
                    }
                    overlap += iv.conj() * b.amplitudes[idx];
                }
                total += overlap.norm_sqr();
            }
        }
        Ok(total)
    }
}

/// Per-branch execution context.
#[derive(Clone)]
struct Ctx {
    state: Vec<Complex64>,
    clbits: Vec<bool>,
    outcomes: Vec<u8>,
    /// Earliest start time per qubit, advanced by gates, delays, barriers
    /// and control-flow synchronisation.
    avail: Vec<u64>,
    /// When each qubit last became free; delays and barriers leave it
    /// untouched so idle intervals keep accruing.
    idle_from: Vec<u64>,
}

/// Exact and sampling simulation engines.
#[derive(Clone)]
pub struct Simulator<'a> {
    noise: Option<(&'a NoiseModel, &'a Target)>,
    pub max_branches: usize,
    pub while_cap: u64,
    pub prune_threshold: f64,
    /// Keep zero-probability branches so runs on different inputs stay
    /// branch-aligned (used when reconstructing channels).
    pub enumerate_all: bool,
    pub initial_clbits: Option<Vec<bool>>,
}

impl Default for Simulator<'_> {
    fn default() -> Self {
        Simulator::new()
    }
}

impl<'a> Simulator<'a> {
    pub fn new() -> Self {
        Simulator {
            noise: None,
            max_branches: 1 << 16,
            while_cap: 1000,
            prune_threshold: 1e-14,
            enumerate_all: false,
            initial_clbits: None,
        }
    }

    /// Replay always-on ZZ and readout noise; the target supplies the
    /// instruction durations and the feedforward latency.
    pub fn with_noise(noise: &'a NoiseModel, target: &'a Target) -> Self {
        let mut sim = Simulator::new();
        sim.noise = Some((noise, target));
        sim
    }

    pub fn enumerating_all(mut self) -> Self {
        self.enumerate_all = true;
        self
    }

    fn duration_of(&self, name: &str, qargs: &[u32]) -> u64 {
        match self.noise {
            Some((_, target)) => target.duration(name, qargs).unwrap_or(0),
            None => 0,
        }
    }

    /// Run from the all-zeros state.
    pub fn evolve(&self, circuit: &Circuit) -> Result<BranchDistribution, SimError> {
        let n = circuit.num_qubits();
        if n > MAX_SIM_QUBITS {
            return Err(SimError::TooLarge {
                qubits: n,
                max: MAX_SIM_QUBITS,
            });
        }
        let mut state = vec![Complex64::new(0.0, 0.0); 1usize << n];
        state[0] = Complex64::new(1.0, 0.0);
        self.evolve_from(circuit, state)
    }

    /// Run from an arbitrary dense initial state.
    pub fn evolve_from(
        &self,
        circuit: &Circuit,
        initial: Vec<Complex64>,
    ) -> Result<BranchDistribution, SimError> {
        let n = circuit.num_qubits();
        if n > MAX_SIM_QUBITS {
            return Err(SimError::TooLarge {
                qubits: n,
                max: MAX_SIM_QUBITS,
            });
        }
        if initial.len() != 1usize << n {
            return Err(SimError::BadState(format!(
                "initial state has {} amplitudes for {} qubits",
                initial.len(),
                n
            )));
        }
        let clbits = match &self.initial_clbits {
            Some(bits) => {
                if bits.len() != circuit.num_clbits() as usize {
                    return Err(SimError::BadState(
                        "initial clbits do not match circuit".to_string(),
                    ));
                }
                bits.clone()
            }
            None => vec![false; circuit.num_clbits() as usize],
        };
        let ctx = Ctx {
            state: initial,
            clbits,
            outcomes: Vec::new(),
            avail: vec![0; n as usize],
            idle_from: vec![0; n as usize],
        };
        let mut ctxs = self.exec_block(vec![ctx], circuit.instructions())?;
        // Flush idle ZZ accrual up to the end of the circuit.
        if self.noise.is_some() {
            for ctx in &mut ctxs {
                let end = ctx.avail.iter().copied().max().unwrap_or(0);
                self.accrue_all_pairs(ctx, end);
            }
        }
        Ok(BranchDistribution {
            num_qubits: n,
            num_clbits: circuit.num_clbits(),
            branches: ctxs
                .into_iter()
                .map(|c| Branch {
                    amplitudes: c.state,
                    clbits: c.clbits,
                    outcomes: c.outcomes,
                })
                .collect(),
        })
    }

    /// Advance the schedule clock for an operation on `qubits`, accruing ZZ
    /// phase for every coupled pair that was idle until its start time.
    fn advance(&self, ctx: &mut Ctx, qubits: &[u32], duration: u64) {
        let Some((noise, _)) = self.noise else {
            return;
        };
        let start = qubits
            .iter()
            .map(|&q| ctx.avail[q as usize])
            .max()
            .unwrap_or(0);
        for coupling in noise.couplings_touching(qubits) {
            let (a, b) = coupling.qubits;
            let idle = ctx.idle_from[a as usize].max(ctx.idle_from[b as usize]);
            if start > idle {
                apply_zz_phase(&mut ctx.state, a, b, coupling.nu, (start - idle) as f64);
            }
        }
        for &q in qubits {
            ctx.avail[q as usize] = start + duration;
            ctx.idle_from[q as usize] = start + duration;
        }
    }

    fn accrue_all_pairs(&self, ctx: &mut Ctx, now: u64) {
        let Some((noise, _)) = self.noise else {
            return;
        };
        for coupling in &noise.zz {
            let (a, b) = coupling.qubits;
            let idle = ctx.idle_from[a as usize].max(ctx.idle_from[b as usize]);
            if now > idle {
                apply_zz_phase(&mut ctx.state, a, b, coupling.nu, (now - idle) as f64);
            }
        }
    }

    /// Runtime branch decisions synchronise the whole device and charge the
    /// feedforward window, during which every coupled pair accrues.
    fn control_sync(&self, ctx: &mut Ctx) {
        let Some((noise, target)) = self.noise else {
            return;
        };
        let now = ctx.avail.iter().copied().max().unwrap_or(0);
        self.accrue_all_pairs(ctx, now);
        let ff = target.feedforward_dt();
        if ff > 0 {
            for coupling in &noise.zz {
                let (a, b) = coupling.qubits;
                apply_zz_phase(&mut ctx.state, a, b, coupling.nu, ff as f64);
            }
        }
        for q in 0..ctx.avail.len() {
            ctx.avail[q] = now + ff;
            ctx.idle_from[q] = now + ff;
        }
    }

    fn check_branch_count(&self, count: usize) -> Result<(), SimError> {
        if count > self.max_branches {
            Err(SimError::TooManyBranches(self.max_branches))
        } else {
            Ok(())
        }
    }

    fn exec_block(&self, mut ctxs: Vec<Ctx>, insts: &[Instruction]) -> Result<Vec<Ctx>, SimError> {
        for inst in insts {
            ctxs = self.exec_instruction(ctxs, inst)?;
            self.check_branch_count(ctxs.len())?;
        }
        Ok(ctxs)
    }

    fn exec_instruction(
        &self,
        mut ctxs: Vec<Ctx>,
        inst: &Instruction,
    ) -> Result<Vec<Ctx>, SimError> {
        match &inst.op {
            OpKind::Barrier => {
                if self.noise.is_some() {
                    for ctx in &mut ctxs {
                        let sync = inst
                            .qubits
                            .iter()
                            .map(|&q| ctx.avail[q as usize])
                            .max()
                            .unwrap_or(0);
                        for &q in &inst.qubits {
                            ctx.avail[q as usize] = sync;
                        }
                    }
                }
                Ok(ctxs)
            }
            OpKind::Delay => {
                if self.noise.is_some() {
                    let dur = inst.delay_dt().unwrap_or(0);
                    for ctx in &mut ctxs {
                        let q = inst.qubits[0] as usize;
                        ctx.avail[q] += dur;
                    }
                }
                Ok(ctxs)
            }
            OpKind::Gate(g) => {
                let params = inst.bound_params()?;
                let mat = g.matrix(&params);
                let dur = self.duration_of(g.name(), &inst.qubits);
                for ctx in &mut ctxs {
                    self.advance(ctx, &inst.qubits, dur);
                    apply_matrix(&mut ctx.state, &mat, &inst.qubits);
                }
                Ok(ctxs)
            }
            OpKind::Measure => {
                let q = inst.qubits[0];
                let c = inst.clbits[0] as usize;
                let dur = self.duration_of("measure", &inst.qubits);
                let readout = self.noise.map(|(n, _)| n.readout_of(q)).unwrap_or((0.0, 0.0));
                let mut out = Vec::with_capacity(ctxs.len() * 2);
                for mut ctx in ctxs {
                    self.advance(&mut ctx, &inst.qubits, dur);
                    for (m, state) in split_on(&ctx.state, q) {
                        let p: f64 = state.iter().map(|a| a.norm_sqr()).sum();
                        if !self.enumerate_all && p <= self.prune_threshold {
                            continue;
                        }
                        let flip = if m == 0 { readout.0 } else { readout.1 };
                        if flip == 0.0 {
                            let mut next = ctx.clone();
                            next.state = state;
                            next.clbits[c] = m == 1;
                            next.outcomes.push(m);
                            out.push(next);
                        } else {
                            for r in 0..2u8 {
                                let w = if r == m { 1.0 - flip } else { flip };
                                if !self.enumerate_all && w * p <= self.prune_threshold {
                                    continue;
                                }
                                let scale = w.sqrt();
                                let mut next = ctx.clone();
                                next.state = state.iter().map(|a| a * scale).collect();
                                next.clbits[c] = r == 1;
                                next.outcomes.push(m);
                                next.outcomes.push(r);
                                out.push(next);
                            }
                        }
                        self.check_branch_count(out.len())?;
                    }
                }
                Ok(out)
            }
            OpKind::Reset | OpKind::Init => {
                let q = inst.qubits[0];
                let dur = self.duration_of(inst.op.name(), &inst.qubits);
                let x_mat = crate::circuit::StandardGate::X.matrix(&[]);
                let mut out = Vec::with_capacity(ctxs.len() * 2);
                for mut ctx in ctxs {
                    self.advance(&mut ctx, &inst.qubits, dur);
                    for (m, mut state) in split_on(&ctx.state, q) {
                        let p: f64 = state.iter().map(|a| a.norm_sqr()).sum();
                        if !self.enumerate_all && p <= self.prune_threshold {
                            continue;
                        }
                        if m == 1 {
                            apply_matrix(&mut state, &x_mat, &[q]);
                        }
                        let mut next = ctx.clone();
                        next.state = state;
                        next.outcomes.push(m);
                        out.push(next);
                        self.check_branch_count(out.len())?;
                    }
                }
                Ok(out)
            }
            OpKind::IfElse => {
                let cond = inst.condition.as_ref().expect("if carries a condition");
                let mut out = Vec::with_capacity(ctxs.len());
                for mut ctx in ctxs {
                    self.control_sync(&mut ctx);
                    let taken = cond.evaluate_bool(&ctx.clbits);
                    let block = if taken {
                        Some(&inst.blocks[0])
                    } else {
                        inst.blocks.get(1)
                    };
                    match block {
                        Some(b) => out.extend(self.exec_block(vec![ctx], b.instructions())?),
                        None => out.push(ctx),
                    }
                }
                Ok(out)
            }
            OpKind::Switch => {
                let scrutinee = inst.condition.as_ref().expect("switch carries a scrutinee");
                let mut out = Vec::with_capacity(ctxs.len());
                for mut ctx in ctxs {
                    self.control_sync(&mut ctx);
                    let value = scrutinee.evaluate(&ctx.clbits);
                    let mut chosen = None;
                    for (values, block) in inst.switch_arms() {
                        match values {
                            Some(vs) if vs.contains(&value) => {
                                chosen = Some(block);
                                break;
                            }
                            None => chosen = Some(block),
                            _ => {}
                        }
                    }
                    match chosen {
                        Some(b) => out.extend(self.exec_block(vec![ctx], b.instructions())?),
                        None => out.push(ctx),
                    }
                }
                Ok(out)
            }
            OpKind::ForLoop { count, .. } => {
                let body = &inst.blocks[0];
                for _ in 0..*count {
                    ctxs = self.exec_block(ctxs, body.instructions())?;
                }
                Ok(ctxs)
            }
            OpKind::While => {
                let cond = inst.condition.as_ref().expect("while carries a condition");
                let body = &inst.blocks[0];
                let mut done = Vec::new();
                let mut queue: VecDeque<(Ctx, u64)> =
                    ctxs.into_iter().map(|c| (c, 0)).collect();
                while let Some((mut ctx, iteration)) = queue.pop_front() {
                    self.control_sync(&mut ctx);
                    if !cond.evaluate_bool(&ctx.clbits) {
                        done.push(ctx);
                        continue;
                    }
                    if iteration >= self.while_cap {
                        return Err(SimError::TooManyIterations(self.while_cap));
                    }
                    for next in self.exec_block(vec![ctx], body.instructions())? {
                        queue.push_back((next, iteration + 1));
                    }
                    self.check_branch_count(done.len() + queue.len())?;
                }
                Ok(done)
            }
        }
    }

    /// Sample classical shot counts.  Uses one dense evolution plus
    /// distribution sampling when every measurement commutes to the end of
    /// the circuit, per-shot trajectories otherwise.
    pub fn sample(
        &self,
        circuit: &Circuit,
        shots: u64,
        seed: u64,
    ) -> Result<BTreeMap<String, u64>, SimError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.sample_with_rng(circuit, shots, &mut rng)
    }

    pub fn sample_with_rng(
        &self,
        circuit: &Circuit,
        shots: u64,
        rng: &mut ChaCha8Rng,
    ) -> Result<BTreeMap<String, u64>, SimError> {
        let n = circuit.num_qubits();
        if n > MAX_SIM_QUBITS {
            return Err(SimError::TooLarge {
                qubits: n,
                max: MAX_SIM_QUBITS,
            });
        }
        if let Some(plan) = static_measure_plan(circuit) {
            return self.sample_static(circuit, &plan, shots, rng);
        }
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        for _ in 0..shots {
            let clbits = self.run_trajectory(circuit, rng)?;
            *counts.entry(clbit_key(&clbits)).or_insert(0) += 1;
        }
        Ok(counts)
    }

    /// Evolve a static circuit with measurements deferred: a measure only
    /// contributes its scheduling window, never a collapse.
    fn evolve_deferred(&self, circuit: &Circuit) -> Result<Vec<Complex64>, SimError> {
        let n = circuit.num_qubits();
        let mut state = vec![Complex64::new(0.0, 0.0); 1usize << n];
        state[0] = Complex64::new(1.0, 0.0);
        let mut ctx = Ctx {
            state,
            clbits: Vec::new(),
            outcomes: Vec::new(),
            avail: vec![0; n as usize],
            idle_from: vec![0; n as usize],
        };
        for inst in circuit.instructions() {
            match &inst.op {
                OpKind::Barrier => {
                    if self.noise.is_some() {
                        let sync = inst
                            .qubits
                            .iter()
                            .map(|&q| ctx.avail[q as usize])
                            .max()
                            .unwrap_or(0);
                        for &q in &inst.qubits {
                            ctx.avail[q as usize] = sync;
                        }
                    }
                }
                OpKind::Delay => {
                    if self.noise.is_some() {
                        ctx.avail[inst.qubits[0] as usize] += inst.delay_dt().unwrap_or(0);
                    }
                }
                OpKind::Gate(g) => {
                    let params = inst.bound_params()?;
                    let mat = g.matrix(&params);
                    self.advance(&mut ctx, &inst.qubits, self.duration_of(g.name(), &inst.qubits));
                    apply_matrix(&mut ctx.state, &mat, &inst.qubits);
                }
                OpKind::Measure => {
                    self.advance(&mut ctx, &inst.qubits, self.duration_of("measure", &inst.qubits));
                }
                other => {
                    return Err(SimError::BadState(format!(
                        "deferred evolution hit a non-static op `{}`",
                        other.name()
                    )));
                }
            }
        }
        if self.noise.is_some() {
            let end = ctx.avail.iter().copied().max().unwrap_or(0);
            self.accrue_all_pairs(&mut ctx, end);
        }
        Ok(ctx.state)
    }

    fn sample_static(
        &self,
        circuit: &Circuit,
        plan: &[(u32, u32)],
        shots: u64,
        rng: &mut ChaCha8Rng,
    ) -> Result<BTreeMap<String, u64>, SimError> {
        let state = self.evolve_deferred(circuit)?;
        let probs: Vec<f64> = state.iter().map(|a| a.norm_sqr()).collect();
        let mut cumulative = Vec::with_capacity(probs.len());
        let mut acc = 0.0;
        for p in &probs {
            acc += p;
            cumulative.push(acc);
        }
        let total = acc.max(f64::MIN_POSITIVE);
        let readout: Vec<(f64, f64)> = (0..circuit.num_qubits())
            .map(|q| {
                self.noise
                    .map(|(nm, _)| nm.readout_of(q))
                    .unwrap_or((0.0, 0.0))
            })
            .collect();
        let mut counts: BTreeMap<String, u64> = BTreeMap::new();
        let mut clbits = vec![false; circuit.num_clbits() as usize];
        for _ in 0..shots {
            let draw: f64 = rng.gen::<f64>() * total;
            let idx = cumulative.partition_point(|&c| c < draw).min(probs.len() - 1);
            for bit in clbits.iter_mut() {
                *bit = false;
            }
            for &(q, c) in plan {
                let mut value = idx >> q & 1 == 1;
                let (p01, p10) = readout[q as usize];
                let flip = if value { p10 } else { p01 };
                if flip > 0.0 && rng.gen::<f64>() < flip {
                    value = !value;
                }
                clbits[c as usize] = value;
            }
            *counts.entry(clbit_key(&clbits)).or_insert(0) += 1;
        }
        Ok(counts)
    }

    fn run_trajectory(
        &self,
        circuit: &Circuit,
        rng: &mut ChaCha8Rng,
    ) -> Result<Vec<bool>, SimError> {
        let n = circuit.num_qubits();
        let mut state = vec![Complex64::new(0.0, 0.0); 1usize << n];
        state[0] = Complex64::new(1.0, 0.0);
        let clbits = match &self.initial_clbits {
            Some(bits) => bits.clone(),
            None => vec![false; circuit.num_clbits() as usize],
        };
        let mut ctx = Ctx {
            state,
            clbits,
            outcomes: Vec::new(),
            avail: vec![0; n as usize],
            idle_from: vec![0; n as usize],
        };
        self.trajectory_block(&mut ctx, circuit.instructions(), rng)?;
        Ok(ctx.clbits)
    }

    fn trajectory_collapse(
        &self,
        ctx: &mut Ctx,
        q: u32,
        rng: &mut ChaCha8Rng,
    ) -> u8 {
        let m = 1usize << q;
        let p1: f64 = ctx
            .state
            .iter()
            .enumerate()
            .filter(|(x, _)| x & m != 0)
            .map(|(_, a)| a.norm_sqr())
            .sum();
        let norm: f64 = ctx.state.iter().map(|a| a.norm_sqr()).sum();
        let outcome = if norm > 0.0 && rng.gen::<f64>() < p1 / norm {
            1u8
        } else {
            0u8
        };
        let keep_set = outcome == 1;
        for (x, a) in ctx.state.iter_mut().enumerate() {
            if (x & m != 0) != keep_set {
                *a = Complex64::new(0.0, 0.0);
            }
        }
        let remaining: f64 = ctx.state.iter().map(|a| a.norm_sqr()).sum();
        if remaining > 0.0 {
            let scale = remaining.sqrt();
            for a in ctx.state.iter_mut() {
                *a /= scale;
            }
        }
        outcome
    }

    fn trajectory_block(
        &self,
        ctx: &mut Ctx,
        insts: &[Instruction],
        rng: &mut ChaCha8Rng,
    ) -> Result<(), SimError> {
        for inst in insts {
            match &inst.op {
                OpKind::Barrier => {
                    if self.noise.is_some() {
                        let sync = inst
                            .qubits
                            .iter()
                            .map(|&q| ctx.avail[q as usize])
                            .max()
                            .unwrap_or(0);
                        for &q in &inst.qubits {
                            ctx.avail[q as usize] = sync;
                        }
                    }
                }
                OpKind::Delay => {
                    if self.noise.is_some() {
                        ctx.avail[inst.qubits[0] as usize] += inst.delay_dt().unwrap_or(0);
                    }
                }
                OpKind::Gate(g) => {
                    let params = inst.bound_params()?;
                    let mat = g.matrix(&params);
                    self.advance(ctx, &inst.qubits, self.duration_of(g.name(), &inst.qubits));
                    apply_matrix(&mut ctx.state, &mat, &inst.qubits);
                }
                OpKind::Measure => {
                    let q = inst.qubits[0];
                    self.advance(ctx, &inst.qubits, self.duration_of("measure", &inst.qubits));
                    let m = self.trajectory_collapse(ctx, q, rng);
                    let mut value = m == 1;
                    if let Some((noise, _)) = self.noise {
                        let (p01, p10) = noise.readout_of(q);
                        let flip = if value { p10 } else { p01 };
                        if flip > 0.0 && rng.gen::<f64>() < flip {
                            value = !value;
                        }
                    }
                    ctx.clbits[inst.clbits[0] as usize] = value;
                }
                OpKind::Reset | OpKind::Init => {
                    let q = inst.qubits[0];
                    self.advance(
                        ctx,
                        &inst.qubits,
                        self.duration_of(inst.op.name(), &inst.qubits),
                    );
                    let m = self.trajectory_collapse(ctx, q, rng);
                    if m == 1 {
                        let x_mat = crate::circuit::StandardGate::X.matrix(&[]);
                        apply_matrix(&mut ctx.state, &x_mat, &[q]);
                    }
                }
                OpKind::IfElse => {
                    let cond = inst.condition.as_ref().expect("if carries a condition");
                    self.control_sync(ctx);
                    let block = if cond.evaluate_bool(&ctx.clbits) {
                        Some(&inst.blocks[0])
                    } else {
                        inst.blocks.get(1)
                    };
                    if let Some(b) = block {
                        self.trajectory_block(ctx, b.instructions(), rng)?;
                    }
                }
                OpKind::Switch => {
                    let scrutinee =
                        inst.condition.as_ref().expect("switch carries a scrutinee");
                    self.control_sync(ctx);
                    let value = scrutinee.evaluate(&ctx.clbits);
                    let mut chosen = None;
                    for (values, block) in inst.switch_arms() {
                        match values {
                            Some(vs) if vs.contains(&value) => {
                                chosen = Some(block);
                                break;
                            }
                            None => chosen = Some(block),
                            _ => {}
                        }
                    }
                    if let Some(b) = chosen {
                        self.trajectory_block(ctx, b.instructions(), rng)?;
                    }
                }
                OpKind::ForLoop { count, .. } => {
                    for _ in 0..*count {
                        self.trajectory_block(ctx, inst.blocks[0].instructions(), rng)?;
                    }
                }
                OpKind::While => {
                    let cond = inst.condition.as_ref().expect("while carries a condition");
                    let mut iterations = 0u64;
                    loop {
                        self.control_sync(ctx);
                        if !cond.evaluate_bool(&ctx.clbits) {
                            break;
                        }
                        if iterations >= self.while_cap {
                            return Err(SimError::TooManyIterations(self.while_cap));
                        }
                        self.trajectory_block(ctx, inst.blocks[0].instructions(), rng)?;
                        iterations += 1;
                    }
                }
            }
        }
        Ok(())
    }
}

/// Split a state on one qubit into the outcome-0 and outcome-1 projections
/// (unnormalized).
fn split_on(state: &[Complex64], q: u32) -> [(u8, Vec<Complex64>); 2] {
    let m = 1usize << q;
    let mut s0 = state.to_vec();
    let mut s1 = state.to_vec();
    for x in 0..state.len() {
        if x & m == 0 {
            s1[x] = Complex64::new(0.0, 0.0);
        } else {
            s0[x] = Complex64::new(0.0, 0.0);
        }
    }
    [(0, s0), (1, s1)]
}

/// `exp(-i (nu/2) (ZZ - IZ - ZI) tau)` on a coupled pair: the interaction
/// is diagonal with entry 3 on `|11>` and -1 elsewhere.
fn apply_zz_phase(state: &mut [Complex64], a: u32, b: u32, nu: f64, tau: f64) {
    let ma = 1usize << a;
    let mb = 1usize << b;
    let minus = Complex64::from_polar(1.0, 0.5 * nu * tau);
    let plus = Complex64::from_polar(1.0, -1.5 * nu * tau);
    for (x, amp) in state.iter_mut().enumerate() {
        if x & ma != 0 && x & mb != 0 {
            *amp *= plus;
        } else {
            *amp *= minus;
        }
    }
}

/// The measurement plan `(qubit, clbit)` of a circuit whose measurements
/// all defer to the end: no control flow, no reset or init, and nothing
/// but barriers and delays touching a qubit after it is measured.
fn static_measure_plan(circuit: &Circuit) -> Option<Vec<(u32, u32)>> {
    let mut plan: Vec<(u32, u32)> = Vec::new();
    let mut measured = vec![false; circuit.num_qubits() as usize];
    for inst in circuit.instructions() {
        match &inst.op {
            OpKind::Barrier | OpKind::Delay => continue,
            OpKind::Gate(_) => {
                if inst.qubits.iter().any(|&q| measured[q as usize]) {
                    return None;
                }
            }
            OpKind::Measure => {
                let q = inst.qubits[0];
                if measured[q as usize] {
                    return None;
                }
                measured[q as usize] = true;
                plan.push((q, inst.clbits[0]));
            }
            _ => return None,
        }
    }
    Some(plan)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::library::mbzz_gadget;
    use crate::circuit::{ClassicalExpr, PI2, PI4};
    use crate::target::presets::{heron_custom, HERON_FEEDFORWARD_DT};

    fn bell() -> Circuit {
        let mut c = Circuit::new(2, 2);
        c.h(0).unwrap();
        c.cx(0, 1).unwrap();
        c.measure(0, 0).unwrap();
        c.measure(1, 1).unwrap();
        c
    }

    #[test]
    fn bell_measurement_branches() {
        let dist = Simulator::new().evolve(&bell()).unwrap();
        assert_eq!(dist.num_branches(), 2);
        assert!((dist.total_probability() - 1.0).abs() < 1e-12);
        let probs = dist.clbit_probabilities();
        assert!((probs["00"] - 0.5).abs() < 1e-12);
        assert!((probs["11"] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn conditional_correction_is_deterministic() {
        // Teleport-like: flip qubit 1 whenever qubit 0 reads one.
        let mut c = Circuit::new(2, 1);
        c.h(0).unwrap();
        c.cx(0, 1).unwrap();
        c.measure(0, 0).unwrap();
        let mut fix = Circuit::new(2, 1);
        fix.x(1).unwrap();
        c.if_test(ClassicalExpr::equals(ClassicalExpr::Bit(0), 1), fix)
            .unwrap();
        let dist = Simulator::new().evolve(&c).unwrap();
        assert_eq!(dist.num_branches(), 2);
        // Qubit 1 ends in |0> on both branches.
        for b in &dist.branches {
            for (x, amp) in b.amplitudes.iter().enumerate() {
                if x & 0b10 != 0 {
                    assert!(amp.norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn pruning_keeps_deterministic_measurements_single_branch() {
        let mut c = Circuit::new(1, 1);
        c.x(0).unwrap();
        c.measure(0, 0).unwrap();
        let dist = Simulator::new().evolve(&c).unwrap();
        assert_eq!(dist.num_branches(), 1);
        assert_eq!(dist.branches[0].clbits, vec![true]);
        let all = Simulator::new().enumerating_all().evolve(&c).unwrap();
        assert_eq!(all.num_branches(), 2);
    }

    #[test]
    fn mbzz_gadget_applies_the_rotation_on_both_branches() {
        let angle = 0.73;
        // Prepare the data pair away from a Z eigenstate first.
        let mut prep = Circuit::new(3, 1);
        prep.ry(0.4, 0).unwrap();
        prep.ry(1.1, 1).unwrap();
        let mut circuit = prep.clone();
        for inst in mbzz_gadget(angle).instructions() {
            circuit.append(inst.clone()).unwrap();
        }
        let dist = Simulator::new().evolve(&circuit).unwrap();
        assert_eq!(dist.num_branches(), 2);
        for b in &dist.branches {
            assert!((b.probability() - 0.5).abs() < 1e-10);
        }
        // Reference: the same preparation followed by a plain RZZ.
        let mut reference = prep.clone();
        reference.rzz(angle, 0, 1).unwrap();
        let ideal = Simulator::new().evolve(&reference).unwrap();
        let ideal_data: Vec<Complex64> = (0..4)
            .map(|i| ideal.branches[0].amplitudes[i])
            .collect();
        // Each branch matches on the data pair and parks the ancilla in 0.
        let fid = dist.subsystem_fidelity(&[0, 1], &ideal_data).unwrap();
        assert!((fid - 1.0).abs() < 1e-10, "fidelity {fid}");
    }

    #[test]
    fn for_loop_repeats_in_simulation() {
        let mut body = Circuit::new(1, 0);
        body.rz(PI4, 0).unwrap();
        let mut c = Circuit::new(1, 0);
        c.h(0).unwrap();
        c.for_loop("i", 0, 4, body).unwrap();
        let dist = Simulator::new().evolve(&c).unwrap();
        // Four eighth-turns is a Z: |+> -> |->.
        let amp0 = dist.branches[0].amplitudes[0];
        let amp1 = dist.branches[0].amplitudes[1];
        assert!((amp0.norm() - amp1.norm()).abs() < 1e-12);
        assert!(((amp1 / amp0).re + 1.0).abs() < 1e-10);
    }

    #[test]
    fn while_loop_repeats_until_condition_clears() {
        // Coin-flip until heads: geometric branch weights.
        let mut c = Circuit::new(1, 1);
        c.h(0).unwrap();
        c.measure(0, 0).unwrap();
        let mut body = Circuit::new(1, 1);
        body.reset(0).unwrap();
        body.h(0).unwrap();
        body.measure(0, 0).unwrap();
        c.while_loop(ClassicalExpr::equals(ClassicalExpr::Bit(0), 0), body)
            .unwrap();
        let dist = Simulator::new().evolve(&c).unwrap();
        assert!((dist.total_probability() - 1.0).abs() < 1e-9);
        for b in &dist.branches {
            assert_eq!(b.clbits, vec![true]);
        }
        let first = dist.branches.iter().map(|b| b.probability()).fold(0.0, f64::max);
        assert!((first - 0.5).abs() < 1e-9);
    }

    #[test]
    fn while_loop_cap_triggers() {
        let mut c = Circuit::new(1, 1);
        let mut body = Circuit::new(1, 1);
        body.x(0).unwrap();
        c.while_loop(ClassicalExpr::Int(1), body).unwrap();
        let err = Simulator::new().evolve(&c);
        assert_eq!(err.unwrap_err(), SimError::TooManyIterations(1000));
    }

    #[test]
    fn readout_error_splits_recorded_bits() {
        let mut noise = NoiseModel::new();
        noise.add_readout(0, 0.1, 0.0);
        let target = heron_custom("t", 1, &[]).unwrap();
        let mut c = Circuit::new(1, 1);
        c.measure(0, 0).unwrap();
        let dist = Simulator::with_noise(&noise, &target).evolve(&c).unwrap();
        let probs = dist.clbit_probabilities();
        assert!((probs["0"] - 0.9).abs() < 1e-12);
        assert!((probs["1"] - 0.1).abs() < 1e-12);
    }

    #[test]
    fn idle_zz_accrues_between_operations() {
        let nu = 1e-3;
        let noise = NoiseModel::uniform_zz(&[(0, 1)], nu);
        let target = heron_custom("t", 2, &[(0, 1)]).unwrap();
        let mut c = Circuit::new(2, 0);
        c.sx(0).unwrap();
        c.sx(1).unwrap();
        c.delay(1000, 0).unwrap();
        c.delay(1000, 1).unwrap();
        c.sx(0).unwrap();
        let dist = Simulator::with_noise(&noise, &target).evolve(&c).unwrap();
        // Reference: same unitaries with the pair phase inserted by hand
        // for the 1000 dt shared idle window.
        let mut state = vec![Complex64::new(0.0, 0.0); 4];
        state[0] = Complex64::new(1.0, 0.0);
        let sx = crate::circuit::StandardGate::SX.matrix(&[]);
        apply_matrix(&mut state, &sx, &[0]);
        apply_matrix(&mut state, &sx, &[1]);
        apply_zz_phase(&mut state, 0, 1, nu, 1000.0);
        apply_matrix(&mut state, &sx, &[0]);
        for (a, b) in dist.branches[0].amplitudes.iter().zip(&state) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn feedforward_window_dephasing_is_cancelled_by_compensation() {
        let nu = 2e-4;
        let noise = NoiseModel::uniform_zz(&[(0, 1)], nu);
        let target = heron_custom("t", 2, &[(0, 1)]).unwrap();
        let build = |compensate: bool| {
            let mut c = Circuit::new(2, 1);
            c.sx(0).unwrap(); // data superposition
            c.x(1).unwrap(); // ancilla deterministically |1>
            c.measure(1, 0).unwrap();
            let mut body = Circuit::new(2, 1);
            if compensate {
                let theta = 2.0 * nu * HERON_FEEDFORWARD_DT as f64;
                body.rz(theta, 0).unwrap();
            }
            body.x(1).unwrap();
            c.if_test(ClassicalExpr::equals(ClassicalExpr::Bit(0), 1), body)
                .unwrap();
            c
        };
        let ideal = Simulator::new().evolve(&build(false)).unwrap();
        let ideal_state = ideal.branches[0].normalized_amplitudes();
        let noisy = Simulator::with_noise(&noise, &target);
        let plain = noisy.evolve(&build(false)).unwrap();
        let fixed = noisy.evolve(&build(true)).unwrap();
        let f_plain = plain.fidelity_with_pure(&ideal_state).unwrap();
        let f_fixed = fixed.fidelity_with_pure(&ideal_state).unwrap();
        assert!(f_plain < 0.999, "uncorrected fidelity {f_plain}");
        assert!((f_fixed - 1.0).abs() < 1e-9, "corrected fidelity {f_fixed}");
    }

    #[test]
    fn sampling_matches_exact_distribution() {
        let counts = Simulator::new().sample(&bell(), 40000, 7).unwrap();
        let total: u64 = counts.values().sum();
        assert_eq!(total, 40000);
        assert!(counts.keys().all(|k| k == "00" || k == "11"));
        let p00 = counts["00"] as f64 / 40000.0;
        assert!((p00 - 0.5).abs() < 0.02);
    }

    #[test]
    fn sampling_is_seed_deterministic() {
        let a = Simulator::new().sample(&bell(), 500, 42).unwrap();
        let b = Simulator::new().sample(&bell(), 500, 42).unwrap();
        let c = Simulator::new().sample(&bell(), 500, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn dynamic_circuits_sample_by_trajectory() {
        // Measurement feeds a conditional, so the static plan is rejected.
        let mut c = Circuit::new(2, 2);
        c.h(0).unwrap();
        c.measure(0, 0).unwrap();
        let mut fix = Circuit::new(2, 2);
        fix.x(1).unwrap();
        c.if_test(ClassicalExpr::equals(ClassicalExpr::Bit(0), 1), fix)
            .unwrap();
        c.measure(1, 1).unwrap();
        assert!(static_measure_plan(&c).is_none());
        let counts = Simulator::new().sample(&c, 2000, 11).unwrap();
        // Bits always agree.
        for key in counts.keys() {
            assert!(key == "00" || key == "11");
        }
    }

    #[test]
    fn mid_circuit_gate_on_measured_qubit_defeats_the_fast_path() {
        let mut c = Circuit::new(1, 1);
        c.h(0).unwrap();
        c.measure(0, 0).unwrap();
        c.h(0).unwrap();
        assert!(static_measure_plan(&c).is_none());
        let mut fine = Circuit::new(2, 2);
        fine.h(0).unwrap();
        fine.measure(0, 0).unwrap();
        fine.h(1).unwrap();
        fine.measure(1, 1).unwrap();
        assert!(static_measure_plan(&fine).is_some());
    }

    #[test]
    fn branch_cap_is_enforced() {
        let mut c = Circuit::new(4, 4);
        for q in 0..4 {
            c.h(q).unwrap();
            c.measure(q, q).unwrap();
        }
        let mut sim = Simulator::new();
        sim.max_branches = 8;
        assert_eq!(
            sim.evolve(&c).unwrap_err(),
            SimError::TooManyBranches(8)
        );
        sim.max_branches = 16;
        assert_eq!(sim.evolve(&c).unwrap().num_branches(), 16);
    }

    #[test]
    fn measurement_probabilities_follow_born_rule() {
        let mut c = Circuit::new(1, 1);
        c.ry(2.0 * (0.3f64).sqrt().asin(), 0).unwrap(); // P(1) = 0.3
        c.measure(0, 0).unwrap();
        let dist = Simulator::new().evolve(&c).unwrap();
        let probs = dist.clbit_probabilities();
        assert!((probs["1"] - 0.3).abs() < 1e-10);
        assert!((probs["0"] - 0.7).abs() < 1e-10);
        let _ = PI2;
    }
}
