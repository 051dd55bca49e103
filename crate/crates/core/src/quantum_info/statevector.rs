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

//! Dense pure states.

use crate::circuit::{Circuit, StandardGate};
use crate::quantum_info::pauli::PauliObservable;
use crate::quantum_info::unitary::{apply_matrix, apply_to_columns};
use crate::quantum_info::SimError;
use ndarray::Array2;
use num_complex::Complex64;

/// A dense state over `2^n` amplitudes, basis bit `k` = qubit `k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Statevector {
    num_qubits: u32,
    amps: Vec<Complex64>,
}

impl Statevector {
    /// The all-zeros computational basis state.
    pub fn zero(num_qubits: u32) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << num_qubits];
        amps[0] = Complex64::new(1.0, 0.0);
        Statevector { num_qubits, amps }
    }

    /// The computational basis state with the given index.
    pub fn basis(num_qubits: u32, index: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << num_qubits];
        amps[index] = Complex64::new(1.0, 0.0);
        Statevector { num_qubits, amps }
    }

    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self, SimError> {
        let len = amps.len();
        if len == 0 || len & (len - 1) != 0 {
            return Err(SimError::BadState(format!(
                "amplitude count {len} is not a power of two"
            )));
        }
        Ok(Statevector {
            num_qubits: len.trailing_zeros(),
            amps,
        })
    }

    pub fn num_qubits(&self) -> u32 {
        self.num_qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn into_amplitudes(self) -> Vec<Complex64> {
        self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn normalize(&mut self) {
        let n = self.norm();
        if n > 0.0 {
            for a in &mut self.amps {
                *a /= n;
            }
        }
    }

    pub fn apply_gate(&mut self, gate: StandardGate, params: &[f64], qubits: &[u32]) {
        let mat = gate.matrix(params);
        apply_matrix(&mut self.amps, &mat, qubits);
    }

    pub fn apply_matrix(&mut self, mat: &Array2<Complex64>, qubits: &[u32]) {
        apply_matrix(&mut self.amps, mat, qubits);
    }

    /// Run a measurement-free circuit over this state in place.
    pub fn evolve(&mut self, circuit: &Circuit) -> Result<(), SimError> {
        if circuit.num_qubits() != self.num_qubits {
            return Err(SimError::BadState(format!(
                "circuit width {} does not match state width {}",
                circuit.num_qubits(),
                self.num_qubits
            )));
        }
        let mut cols = [std::mem::take(&mut self.amps)];
        let res = apply_to_columns(&mut cols, circuit);
        self.amps = std::mem::take(&mut cols[0]);
        res
    }

    pub fn probabilities(&self) -> Vec<f64> {
        self.amps.iter().map(|a| a.norm_sqr()).collect()
    }

    pub fn inner(&self, other: &Statevector) -> Complex64 {
        self.amps
            .iter()
            .zip(&other.amps)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &Statevector) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn expectation(&self, obs: &PauliObservable) -> Result<f64, SimError> {
        obs.expectation_state(&self.amps)
    }
}
