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

//! Quantum-channel reconstruction for dynamic circuits.
//!
//! A circuit with measurements, feedforward and ancillas still acts as a
//! linear channel on a chosen subsystem once the other qubits and the
//! measurement record are traced out.  [`channel_of`] rebuilds that channel
//! as a dense superoperator (column-stacking convention) by evolving every
//! basis input with full branch enumeration, so gadget constructions can be
//! checked against the unitary they are meant to implement.

use crate::circuit::Circuit;
use crate::quantum_info::simulator::{BranchDistribution, Simulator};
use crate::quantum_info::SimError;
use ndarray::Array2;
use num_complex::Complex64;

/// Scatter subsystem index `i` and environment index `e` onto the full
/// register: bit `j` of `i` lands on `system[j]`, bit `j` of `e` on `env[j]`.
fn scatter(i: usize, system: &[u32], e: usize, env: &[u32]) -> usize {
    let mut idx = 0usize;
    for (j, &q) in system.iter().enumerate() {
        if i >> j & 1 == 1 {
            idx |= 1usize << q;
        }
    }
    for (j, &q) in env.iter().enumerate() {
        if e >> j & 1 == 1 {
            idx |= 1usize << q;
        }
    }
    idx
}

/// The superoperator of `circuit` acting on the listed `system` qubits,
/// with every other qubit starting in `|0>` and traced out along with the
/// measurement record.
///
/// `S[i + D*j][k + D*l]` maps `rho[k][l]` to `rho'[i][j]` where bit `m` of
/// a subsystem index belongs to `system[m]`.
pub fn channel_of(
    circuit: &Circuit,
    system: &[u32],
    sim: &Simulator,
) -> Result<Array2<Complex64>, SimError> {
    let n = circuit.num_qubits();
    for (pos, &q) in system.iter().enumerate() {
        if q >= n {
            return Err(SimError::BadState(format!(
                "system qubit {q} outside circuit of width {n}"
            )));
        }
        if system[..pos].contains(&q) {
            return Err(SimError::BadState(format!("system qubit {q} repeated")));
        }
    }
    let env: Vec<u32> = (0..n).filter(|q| !system.contains(q)).collect();
    let d = 1usize << system.len();
    let mut aligned = sim.clone();
    aligned.enumerate_all = true;
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let mut runs: Vec<BranchDistribution> = Vec::with_capacity(d);
    for l in 0..d {
        let mut initial = vec![zero; 1usize << n];
        initial[scatter(l, system, 0, &env)] = one;
        runs.push(aligned.evolve_from(circuit, initial)?);
    }
    let branches = runs[0].num_branches();
    if runs.iter().any(|r| r.num_branches() != branches) {
        return Err(SimError::BadState(
            "branch enumeration diverged across basis inputs".to_string(),
        ));
    }
    let mut superop = Array2::from_elem((d * d, d * d), zero);
    let mut kraus = vec![zero; d * d];
    for b in 0..branches {
        for e in 0..1usize << env.len() {
            // Kraus operator for (branch, environment outcome): column k is
            // the system block of the branch state grown from input |k>.
            for (k, run) in runs.iter().enumerate() {
                let amps = &run.branches[b].amplitudes;
                for i in 0..d {
                    kraus[i * d + k] = amps[scatter(i, system, e, &env)];
                }
            }
            for i in 0..d {
                for j in 0..d {
                    for k in 0..d {
                        let left = kraus[i * d + k];
                        if left == zero {
                            continue;
                        }
                        for l in 0..d {
                            superop[[i + d * j, k + d * l]] +=
                                left * kraus[j * d + l].conj();
                        }
                    }
                }
            }
        }
    }
    Ok(superop)
}

/// The superoperator `conj(U) ⊗ U` of a unitary, in the same convention as
/// [`channel_of`].
pub fn unitary_superop(u: &Array2<Complex64>) -> Array2<Complex64> {
    let d = u.nrows();
    let mut superop = Array2::from_elem((d * d, d * d), Complex64::new(0.0, 0.0));
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                for l in 0..d {
                    superop[[i + d * j, k + d * l]] = u[[i, k]] * u[[j, l]].conj();
                }
            }
        }
    }
    superop
}

/// Reduced density matrix of a branch mixture on the listed qubits (first
/// listed qubit = low bit of the row index).
pub fn reduced_density(
    dist: &BranchDistribution,
    keep: &[u32],
) -> Result<Array2<Complex64>, SimError> {
    let d = 1usize << keep.len();
    let env: Vec<u32> = (0..dist.num_qubits).filter(|q| !keep.contains(q)).collect();
    for &q in keep {
        if q >= dist.num_qubits {
            return Err(SimError::BadState(format!("kept qubit {q} out of range")));
        }
    }
    let mut rho = Array2::from_elem((d, d), Complex64::new(0.0, 0.0));
    for branch in &dist.branches {
        for e in 0..1usize << env.len() {
            for i in 0..d {
                let ai = branch.amplitudes[scatter(i, keep, e, &env)];
                for j in 0..d {
                    let aj = branch.amplitudes[scatter(j, keep, e, &env)];
                    rho[[i, j]] += ai * aj.conj();
                }
            }
        }
    }
    Ok(rho)
}

/// Reduced density matrix of a pure state on the listed qubits.
pub fn reduced_density_pure(
    state: &[Complex64],
    num_qubits: u32,
    keep: &[u32],
) -> Result<Array2<Complex64>, SimError> {
    if state.len() != 1usize << num_qubits {
        return Err(SimError::BadState(
            "state length does not match qubit count".to_string(),
        ));
    }
    let dist = BranchDistribution {
        num_qubits,
        num_clbits: 0,
        branches: vec![crate::quantum_info::simulator::Branch {
            amplitudes: state.to_vec(),
            clbits: Vec::new(),
            outcomes: Vec::new(),
        }],
    };
    reduced_density(&dist, keep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::library::mbzz_gadget;
    use crate::quantum_info::unitary::circuit_to_unitary;

    fn max_abs_diff(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn unitary_circuit_channel_matches_superop_oracle() {
        let mut c = Circuit::new(2, 0);
        c.h(0).unwrap();
        c.rx(0.3, 1).unwrap();
        c.cx(0, 1).unwrap();
        c.rz(1.2, 0).unwrap();
        let u = circuit_to_unitary(&c).unwrap();
        let expected = unitary_superop(&u);
        let got = channel_of(&c, &[0, 1], &Simulator::new()).unwrap();
        assert!(max_abs_diff(&got, &expected) < 1e-12);
    }

    #[test]
    fn copy_to_environment_dephases_the_control() {
        // CX copying qubit 0 into a traced-out ancilla kills its coherences.
        let mut c = Circuit::new(2, 0);
        c.cx(0, 1).unwrap();
        let s = channel_of(&c, &[0], &Simulator::new()).unwrap();
        // rho00 and rho11 pass through; rho01 and rho10 are destroyed.
        assert!((s[[0, 0]].re - 1.0).abs() < 1e-12);
        assert!((s[[3, 3]].re - 1.0).abs() < 1e-12);
        assert!(s[[1, 1]].norm() < 1e-12);
        assert!(s[[2, 2]].norm() < 1e-12);
    }

    #[test]
    fn measurement_channel_is_z_dephasing() {
        let mut with_meas = Circuit::new(1, 1);
        with_meas.measure(0, 0).unwrap();
        let s = channel_of(&with_meas, &[0], &Simulator::new()).unwrap();
        let mut dephase = Circuit::new(2, 0);
        dephase.cx(0, 1).unwrap();
        let expected = channel_of(&dephase, &[0], &Simulator::new()).unwrap();
        assert!(max_abs_diff(&s, &expected) < 1e-12);
    }

    #[test]
    fn reset_channel_sends_everything_to_zero() {
        let mut c = Circuit::new(1, 0);
        c.reset(0).unwrap();
        let s = channel_of(&c, &[0], &Simulator::new()).unwrap();
        // vec(rho') = vec(|0><0|) * tr(rho): S[0][0] = S[0][3] = 1, rest 0.
        for row in 0..4 {
            for col in 0..4 {
                let expected = if row == 0 && (col == 0 || col == 3) {
                    1.0
                } else {
                    0.0
                };
                assert!((s[[row, col]] - Complex64::new(expected, 0.0)).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn channels_preserve_trace() {
        let c = mbzz_gadget(0.4);
        let s = channel_of(&c, &[0, 1], &Simulator::new()).unwrap();
        let d = 4;
        for k in 0..d {
            for l in 0..d {
                let mut trace = Complex64::new(0.0, 0.0);
                for i in 0..d {
                    trace += s[[i + d * i, k + d * l]];
                }
                let expected = if k == l { 1.0 } else { 0.0 };
                assert!((trace - Complex64::new(expected, 0.0)).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn measured_gadget_reconstructs_the_two_qubit_rotation() {
        // The measurement-plus-feedforward gadget acts on its data pair as
        // exactly the RZZ unitary, despite branching mid-circuit.
        let angle = 0.9;
        let gadget = mbzz_gadget(angle);
        let got = channel_of(&gadget, &[0, 1], &Simulator::new()).unwrap();
        let mut direct = Circuit::new(2, 0);
        direct.rzz(angle, 0, 1).unwrap();
        let expected = unitary_superop(&circuit_to_unitary(&direct).unwrap());
        assert!(max_abs_diff(&got, &expected) < 1e-10);
    }

    #[test]
    fn bell_state_reduces_to_maximally_mixed() {
        let mut c = Circuit::new(2, 0);
        c.h(0).unwrap();
        c.cx(0, 1).unwrap();
        let dist = Simulator::new().evolve(&c).unwrap();
        let rho = reduced_density(&dist, &[0]).unwrap();
        assert!((rho[[0, 0]].re - 0.5).abs() < 1e-12);
        assert!((rho[[1, 1]].re - 0.5).abs() < 1e-12);
        assert!(rho[[0, 1]].norm() < 1e-12);
        let pure =
            reduced_density_pure(&dist.branches[0].amplitudes, 2, &[1]).unwrap();
        assert!((pure[[0, 0]].re - 0.5).abs() < 1e-12);
    }
}
