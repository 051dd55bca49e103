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

//! Sparse Pauli observables.

use crate::quantum_info::SimError;
use num_complex::Complex64;
use std::collections::BTreeSet;
use std::fmt;

/// One weighted Pauli string on an explicit qubit subset.  Character `k` of
/// `paulis` acts on `qubits[k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliTerm {
    pub paulis: String,
    pub qubits: Vec<u32>,
    pub coeff: f64,
}

/// A real linear combination of Pauli strings over `num_qubits` qubits.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliObservable {
    num_qubits: u32,
    terms: Vec<PauliTerm>,
}

impl PauliObservable {
    pub fn new(num_qubits: u32) -> Self {
        PauliObservable {
            num_qubits,
            terms: Vec::new(),
        }
    }

    /// Build from `(paulis, qubits, coeff)` triples.
    pub fn from_terms(
        num_qubits: u32,
        terms: impl IntoIterator<Item = (String, Vec<u32>, f64)>,
    ) -> Result<Self, SimError> {
        let mut obs = PauliObservable::new(num_qubits);
        for (paulis, qubits, coeff) in terms {
            obs.add_term(&paulis, &qubits, coeff)?;
        }
        Ok(obs)
    }

    /// The average magnetization `(1/n) sum_i Z_i`.
    pub fn mean_magnetization(num_qubits: u32) -> Self {
        let mut obs = PauliObservable::new(num_qubits);
        for q in 0..num_qubits {
            obs.add_term("Z", &[q], 1.0 / num_qubits as f64).unwrap();
        }
        obs
    }

    pub fn add_term(&mut self, paulis: &str, qubits: &[u32], coeff: f64) -> Result<(), SimError> {
        if paulis.len() != qubits.len() {
            return Err(SimError::BadObservable(format!(
                "string {paulis} has {} characters for {} qubits",
                paulis.len(),
                qubits.len()
            )));
        }
        if let Some(bad) = paulis.chars().find(|c| !matches!(c, 'I' | 'X' | 'Y' | 'Z')) {
            return Err(SimError::BadObservable(format!(
                "unknown Pauli character {bad:?}"
            )));
        }
        let mut seen = BTreeSet::new();
        for &q in qubits {
            if q >= self.num_qubits {
                return Err(SimError::BadObservable(format!(
                    "qubit {q} outside {} qubits",
                    self.num_qubits
                )));
            }
            if !seen.insert(q) {
                return Err(SimError::BadObservable(format!(
                    "qubit {q} repeated within one term"
                )));
            }
        }
        self.terms.push(PauliTerm {
            paulis: paulis.to_string(),
            qubits: qubits.to_vec(),
            coeff,
        });
        Ok(())
    }

    pub fn num_qubits(&self) -> u32 {
        self.num_qubits
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    /// Reindex every term through `layout` (`q -> layout[q]`) onto a device
    /// of `new_num_qubits` qubits.
    pub fn apply_layout(&self, layout: &[u32], new_num_qubits: u32) -> Result<Self, SimError> {
        if layout.len() != self.num_qubits as usize {
            return Err(SimError::BadObservable(format!(
                "layout length {} does not match {} qubits",
                layout.len(),
                self.num_qubits
            )));
        }
        let mut out = PauliObservable::new(new_num_qubits);
        for term in &self.terms {
            let qubits: Vec<u32> = term.qubits.iter().map(|q| layout[*q as usize]).collect();
            out.add_term(&term.paulis, &qubits, term.coeff)?;
        }
        Ok(out)
    }

    /// `<psi|O|psi>` for a dense state; the caller keeps `psi` normalized.
    pub fn expectation_state(&self, amps: &[Complex64]) -> Result<f64, SimError> {
        if amps.len() != 1usize << self.num_qubits {
            return Err(SimError::BadState(format!(
                "state of {} amplitudes for {} qubit observable",
                amps.len(),
                self.num_qubits
            )));
        }
        let mut total = 0.0;
        for term in &self.terms {
            total += term.coeff * pauli_expectation(amps, &term.paulis, &term.qubits);
        }
        Ok(total)
    }
}

impl fmt::Display for PauliObservable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for t in &self.terms {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "{}*{}{:?}", t.coeff, t.paulis, t.qubits)?;
        }
        if first {
            write!(f, "0")?;
        }
        Ok(())
    }
}

/// Apply one Pauli string to a copy of `amps` and take `<amps|P|amps>`.
fn pauli_expectation(amps: &[Complex64], paulis: &str, qubits: &[u32]) -> f64 {
    let mut y: Vec<Complex64> = amps.to_vec();
    for (ch, &q) in paulis.chars().zip(qubits) {
        let m = 1usize << q;
        match ch {
            'I' => {}
            'Z' => {
                for (x, v) in y.iter_mut().enumerate() {
                    if x & m != 0 {
                        *v = -*v;
                    }
                }
            }
            'X' => {
                for x in 0..y.len() {
                    if x & m == 0 {
                        y.swap(x, x | m);
                    }
                }
            }
            'Y' => {
                let i = Complex64::new(0.0, 1.0);
                for x in 0..y.len() {
                    if x & m == 0 {
                        let lo = y[x];
                        let hi = y[x | m];
                        y[x] = -i * hi;
                        y[x | m] = i * lo;
                    }
                }
            }
            _ => unreachable!("terms are validated on construction"),
        }
    }
    amps.iter()
        .zip(&y)
        .map(|(a, b)| (a.conj() * b).re)
        .sum()
}
