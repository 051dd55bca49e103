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

//! Rewrite `rzz` rotations onto a calibrated echoed `rzx` pulse pair.
//!
//! Targets that expose a native `rzx(phi)` at one fixed angle per edge can
//! realise `rzz(theta)` for any `|theta| <= 2*phi` as two echoed pulses with
//! single-qubit dressing:
//!
//! ```text
//! q0: --[rx rz(a) rx]--#--[rx rz(b) rx]--#--[rx rz(c) rx]--(z?)--
//! q1: --[rz rx' rz ]--#------------------#--[rz rx' rz ]--------
//!                    rzx(phi)           rzx(phi)
//! ```
//!
//! The middle angle has a closed form: conjugating the echo core shows its
//! interaction strength obeys `sin(theta/2) = sin(b/2) * sin(phi)`, so
//! `b = 2*asin(sin(|theta|/2)/sin(phi))`.  The outer angles are fitted
//! numerically and every rewrite is verified against the exact `rzz`
//! unitary before being committed.

use super::{Pass, PropertySet, TranspileError};
use crate::circuit::{Circuit, Instruction, OpKind, StandardGate, PI, PI2};
use crate::dag::DagCircuit;
use crate::quantum_info::circuit_to_unitary;
use crate::target::Target;
use ndarray::Array2;
use num_complex::Complex64;
use std::collections::HashMap;

/// Largest acceptable deviation `1 - |tr(T' R)|/4` for a fitted template.
const FIT_TOLERANCE: f64 = 1e-10;

pub struct RzzToRzx;

#[derive(Clone, Copy, Debug)]
struct Fit {
    a: f64,
    b: f64,
    c: f64,
    trailing_z: bool,
}

type FitCache = HashMap<(u64, u64), Option<Fit>>;

/// The two-pulse template over local qubits 0 (Z side) and 1 (X side).
fn template(phi: f64, fit: &Fit) -> Circuit {
    let mut c = Circuit::new(2, 0);
    let dress0 = |c: &mut Circuit, angle: f64| {
        c.rx(PI2, 0).unwrap();
        c.rz(angle, 0).unwrap();
        c.rx(PI2, 0).unwrap();
    };
    let dress1 = |c: &mut Circuit| {
        c.rz(PI2, 1).unwrap();
        c.rx(-PI2, 1).unwrap();
        c.rz(PI2, 1).unwrap();
    };
    dress0(&mut c, fit.a);
    dress1(&mut c);
    c.rzx(phi, 0, 1).unwrap();
    dress0(&mut c, fit.b);
    c.rzx(phi, 0, 1).unwrap();
    dress1(&mut c);
    dress0(&mut c, fit.c);
    if fit.trailing_z {
        c.z(0).unwrap();
    }
    c
}

/// `1 - |tr(T^dag R)| / 4`, zero iff `T ~ R` up to global phase.
fn misalignment(t: &Array2<Complex64>, r: &Array2<Complex64>) -> f64 {
    let mut trace = Complex64::new(0.0, 0.0);
    for i in 0..4 {
        for j in 0..4 {
            trace += t[[i, j]].conj() * r[[i, j]];
        }
    }
    1.0 - trace.norm() / 4.0
}

/// Downhill-simplex minimisation, small and dependency-free.
fn nelder_mead(
    f: &dyn Fn(&[f64]) -> f64,
    seed: &[f64],
    step: f64,
    iterations: usize,
) -> (Vec<f64>, f64) {
    let n = seed.len();
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((seed.to_vec(), f(seed)));
    for i in 0..n {
        let mut p = seed.to_vec();
        p[i] += step;
        let v = f(&p);
        simplex.push((p, v));
    }
    for _ in 0..iterations {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        if simplex[0].1 < 1e-16 {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|d| simplex[..n].iter().map(|(p, _)| p[d]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let blend = |t: f64| -> Vec<f64> {
            (0..n)
                .map(|d| centroid[d] + t * (worst.0[d] - centroid[d]))
                .collect()
        };
        let reflected = blend(-1.0);
        let fr = f(&reflected);
        if fr < simplex[0].1 {
            let expanded = blend(-2.0);
            let fe = f(&expanded);
            simplex[n] = if fe < fr { (expanded, fe) } else { (reflected, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (reflected, fr);
        } else {
            let contracted = blend(0.5);
            let fc = f(&contracted);
            if fc < worst.1 {
                simplex[n] = (contracted, fc);
            } else {
                let best = simplex[0].0.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let shrunk: Vec<f64> = entry
                        .0
                        .iter()
                        .zip(&best)
                        .map(|(x, b)| b + 0.5 * (x - b))
                        .collect();
                    entry.1 = f(&shrunk);
                    entry.0 = shrunk;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    simplex.swap_remove(0)
}

/// Map an angle to `(-pi, pi]`.
fn principal(theta: f64) -> f64 {
    let tau = 2.0 * PI;
    let mut t = theta.rem_euclid(tau);
    if t > PI {
        t -= tau;
    }
    t
}

fn solve(theta: f64, phi: f64) -> Option<Fit> {
    let th = principal(theta);
    let ratio = (th.abs() / 2.0).sin() / phi.sin();
    if !(0.0..=1.0 + 1e-12).contains(&ratio) {
        return None;
    }
    let b0 = 2.0 * ratio.min(1.0).asin();
    let reference = StandardGate::RZZ.matrix(&[th]);
    let mut best: Option<(Fit, f64)> = None;
    for b in [b0, -b0] {
        for trailing_z in [false, true] {
            let objective = |v: &[f64]| {
                let fit = Fit {
                    a: v[0],
                    b: if v.len() > 2 { v[2] } else { b },
                    c: v[1],
                    trailing_z,
                };
                misalignment(&circuit_to_unitary(&template(phi, &fit)).unwrap(), &reference)
            };
            // Coarse seed over the outer angles, then refine.
            let mut seeds: Vec<([f64; 2], f64)> = Vec::new();
            for i in 0..8 {
                for j in 0..8 {
                    let p = [i as f64 * PI / 4.0, j as f64 * PI / 4.0];
                    seeds.push((p, objective(&p)));
                }
            }
            seeds.sort_by(|x, y| x.1.total_cmp(&y.1));
            for (seed, _) in seeds.iter().take(4) {
                let (v, score) = nelder_mead(&objective, seed, 0.4, 250);
                let (v, score) = if score > 1e-13 {
                    nelder_mead(&objective, &[v[0], v[1], b], 0.05, 300)
                } else {
                    (v, score)
                };
                let fit = Fit {
                    a: v[0],
                    b: if v.len() > 2 { v[2] } else { b },
                    c: v[1],
                    trailing_z,
                };
                if best.as_ref().map_or(true, |(_, s)| score < *s) {
                    best = Some((fit, score));
                }
                if score <= 1e-14 {
                    break;
                }
            }
            if matches!(best, Some((_, s)) if s <= 1e-14) {
                break;
            }
        }
        if matches!(best, Some((_, s)) if s <= 1e-14) {
            break;
        }
    }
    match best {
        Some((fit, score)) if score <= FIT_TOLERANCE => Some(fit),
        _ => None,
    }
}

/// The template instantiated on physical qubits, in circuit order.
fn emit(phi: f64, fit: &Fit, q0: u32, q1: u32) -> Vec<Instruction> {
    template(phi, fit)
        .instructions()
        .iter()
        .map(|inst| {
            let mut out = inst.clone();
            out.qubits = inst
                .qubits
                .iter()
                .map(|&q| if q == 0 { q0 } else { q1 })
                .collect();
            out
        })
        .collect()
}

fn rewrite_instruction(
    inst: &Instruction,
    target: &Target,
    cache: &mut FitCache,
) -> Result<Vec<Instruction>, TranspileError> {
    if inst.op.is_control_flow() {
        let mut out = inst.clone();
        let mut blocks = Vec::with_capacity(inst.blocks.len());
        for block in &inst.blocks {
            blocks.push(rewrite_block(block, target, cache)?);
        }
        out.blocks = blocks;
        return Ok(vec![out]);
    }
    if !matches!(inst.op, OpKind::Gate(StandardGate::RZZ)) {
        return Ok(vec![inst.clone()]);
    }
    let Some(theta) = inst.params[0].value() else {
        return Ok(vec![inst.clone()]); // symbolic angles keep the generic path
    };
    let (qa, qb) = (inst.qubits[0], inst.qubits[1]);
    let oriented = [(qa, qb), (qb, qa)]
        .into_iter()
        .find(|&(z, x)| target.instruction_supported("rzx", &[z, x]));
    let Some((q0, q1)) = oriented else {
        return Ok(vec![inst.clone()]);
    };
    let Some(&[phi, ..]) = target.fixed_params("rzx", &[q0, q1]) else {
        return Ok(vec![inst.clone()]);
    };
    if principal(theta).abs() < 1e-12 {
        return Ok(vec![]); // identity rotation
    }
    let key = (principal(theta).to_bits(), phi.to_bits());
    let fit = *cache
        .entry(key)
        .or_insert_with(|| solve(theta, phi));
    match fit {
        Some(fit) => Ok(emit(phi, &fit, q0, q1)),
        None => Ok(vec![inst.clone()]),
    }
}

fn rewrite_block(
    circuit: &Circuit,
    target: &Target,
    cache: &mut FitCache,
) -> Result<Circuit, TranspileError> {
    let mut out = Vec::with_capacity(circuit.len());
    for inst in circuit.instructions() {
        out.extend(rewrite_instruction(inst, target, cache)?);
    }
    circuit.with_instructions(out).map_err(TranspileError::Circuit)
}

impl Pass for RzzToRzx {
    fn name(&self) -> &str {
        "rzz_to_rzx"
    }

    fn run(
        &self,
        dag: DagCircuit,
        target: &Target,
        _properties: &mut PropertySet,
    ) -> Result<DagCircuit, TranspileError> {
        if !target.has_instruction("rzx") {
            return Ok(dag);
        }
        let circuit = dag.to_circuit().map_err(TranspileError::Circuit)?;
        let mut cache = FitCache::new();
        let rewritten = rewrite_block(&circuit, target, &mut cache)?;
        Ok(DagCircuit::from_circuit(&rewritten))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum_info::phase_aligned_distance;
    use crate::target::presets::{heron_custom, with_rzx};
    use crate::transpiler::{PassPipeline, PipelineItem, Stage};
    use std::f64::consts::FRAC_PI_4;

    fn rzx_target(phi: f64) -> Target {
        let base = heron_custom("echo", 3, &[(0, 1), (1, 2)]).unwrap();
        with_rzx(&base, phi).unwrap()
    }

    fn run_pass(circuit: &Circuit, target: &Target) -> Circuit {
        let mut pipeline = PassPipeline::new();
        pipeline.push(Stage::Translation, PipelineItem::pass(RzzToRzx));
        pipeline.run(circuit, target).unwrap().circuit
    }

    #[test]
    fn angle_sweep_matches_the_exact_rotation() {
        let phi = FRAC_PI_4;
        let target = rzx_target(phi);
        for theta in [
            0.05, 0.3, 0.8, 1.2, PI2 - 0.01, PI2, -0.3, -1.1, -PI2,
        ] {
            let mut c = Circuit::new(2, 0);
            c.rzz(theta, 0, 1).unwrap();
            let out = run_pass(&c, &target);
            assert!(
                !out.count_ops().contains_key("rzz"),
                "rzz(({theta}) should be rewritten"
            );
            assert_eq!(out.count_ops().get("rzx"), Some(&2));
            let u = circuit_to_unitary(&out).unwrap();
            let r = circuit_to_unitary(&c).unwrap();
            let d = phase_aligned_distance(&u, &r);
            assert!(d < 1e-6, "theta={theta}: distance {d}");
        }
    }

    #[test]
    fn echo_angle_follows_the_calibrated_pulse() {
        // A different calibrated angle still reproduces the rotation.
        let phi = 0.55;
        let target = rzx_target(phi);
        let mut c = Circuit::new(2, 0);
        c.rzz(0.9, 0, 1).unwrap();
        let out = run_pass(&c, &target);
        for inst in out.instructions() {
            if matches!(inst.op, OpKind::Gate(StandardGate::RZX)) {
                assert_eq!(inst.params[0].value(), Some(phi));
            }
        }
        let u = circuit_to_unitary(&out).unwrap();
        let r = circuit_to_unitary(&c).unwrap();
        assert!(phase_aligned_distance(&u, &r) < 1e-6);
    }

    #[test]
    fn rotations_beyond_the_pulse_domain_are_left_alone() {
        let target = rzx_target(FRAC_PI_4);
        let mut c = Circuit::new(2, 0);
        c.rzz(2.2, 0, 1).unwrap(); // |theta| > 2*phi
        let out = run_pass(&c, &target);
        assert_eq!(out, c);
    }

    #[test]
    fn operand_order_is_immaterial() {
        let target = rzx_target(FRAC_PI_4);
        let mut c = Circuit::new(2, 0);
        c.rzz(0.7, 1, 0).unwrap();
        let out = run_pass(&c, &target);
        assert!(!out.count_ops().contains_key("rzz"));
        let u = circuit_to_unitary(&out).unwrap();
        let r = circuit_to_unitary(&c).unwrap();
        assert!(phase_aligned_distance(&u, &r) < 1e-6);
    }

    #[test]
    fn identity_rotations_vanish() {
        let target = rzx_target(FRAC_PI_4);
        let mut c = Circuit::new(2, 0);
        c.rzz(0.0, 0, 1).unwrap();
        let out = run_pass(&c, &target);
        assert_eq!(out.len(), 0);
    }

    #[test]
    fn blocks_are_rewritten_too() {
        let target = rzx_target(FRAC_PI_4);
        let mut body = Circuit::new(3, 1);
        body.rzz(0.4, 0, 1).unwrap();
        let mut c = Circuit::new(3, 1);
        c.measure(2, 0).unwrap();
        c.if_test(crate::circuit::ClassicalExpr::bit(0), body).unwrap();
        let out = run_pass(&c, &target);
        assert!(!out.count_ops().contains_key("rzz"));
        assert_eq!(out.count_ops().get("rzx"), Some(&2));
    }

    #[test]
    fn targets_without_rzx_are_untouched() {
        let target = heron_custom("plain", 3, &[(0, 1), (1, 2)]).unwrap();
        let mut c = Circuit::new(2, 0);
        c.rzz(0.4, 0, 1).unwrap();
        let out = run_pass(&c, &target);
        assert_eq!(out, c);
    }
}
