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

//! Commonly used circuit constructions.

use super::{Circuit, CircuitError, ClassicalExpr, ParamValue, PI};

/// GHZ state preparation on `n` qubits using a CX chain.
pub fn ghz(n: u32) -> Circuit {
    let mut c = Circuit::new(n, 0).with_name("ghz");
    if n == 0 {
        return c;
    }
    c.h(0).unwrap();
    for q in 0..n.saturating_sub(1) {
        c.cx(q, q + 1).unwrap();
    }
    c
}

/// Controlled phase of angle `lambda`, written with RZ and RZZ only.  The
/// realisation carries a global phase of `exp(-i lambda / 4)`.
fn controlled_phase(c: &mut Circuit, lambda: f64, a: u32, b: u32) {
    c.rz(lambda / 2.0, a).unwrap();
    c.rz(lambda / 2.0, b).unwrap();
    c.rzz(-lambda / 2.0, a, b).unwrap();
}

/// Quantum Fourier transform on `n` qubits, final bit-reversal swaps
/// included.  Equal to the discrete Fourier transform of size `2^n` up to a
/// deterministic global phase, because the controlled-phase rotations are
/// built from RZ and RZZ.
pub fn qft(n: u32) -> Circuit {
    let mut c = Circuit::new(n, 0).with_name("qft");
    for j in (0..n).rev() {
        c.h(j).unwrap();
        for k in (0..j).rev() {
            controlled_phase(&mut c, PI / f64::powi(2.0, (j - k) as i32), k, j);
        }
    }
    for i in 0..n / 2 {
        c.swap(i, n - 1 - i).unwrap();
    }
    c
}

/// Validate an edge-colouring for use as parallel interaction layers: all
/// endpoints in range, no self-loops, and no qubit repeated within a colour.
fn check_layers(num_qubits: u32, edges_by_color: &[Vec<(u32, u32)>]) -> Result<(), CircuitError> {
    for layer in edges_by_color {
        let mut used = std::collections::BTreeSet::new();
        for &(a, b) in layer {
            if a >= num_qubits || b >= num_qubits {
                return Err(CircuitError::BadLattice(format!(
                    "edge ({a}, {b}) outside {num_qubits} qubits"
                )));
            }
            if a == b {
                return Err(CircuitError::BadLattice(format!("self-loop on qubit {a}")));
            }
            if !used.insert(a) || !used.insert(b) {
                return Err(CircuitError::BadLattice(format!(
                    "edge ({a}, {b}) shares a qubit with another edge of its colour"
                )));
            }
        }
    }
    Ok(())
}

/// First-order Trotter circuit for the kicked transverse-field Ising model.
///
/// Each step applies one RX(`theta`) kick to every qubit followed by
/// RZZ(`zz_angle`) on every edge, one colour layer at a time so that gates
/// within a layer act on disjoint qubits.  A final RX kick closes the
/// sequence, so `steps = 0` yields a single kick layer.  Barriers separate
/// the layers to keep scheduling honest.
pub fn trotter_kicked_ising(
    num_qubits: u32,
    edges_by_color: &[Vec<(u32, u32)>],
    zz_angle: impl Into<ParamValue>,
    theta: impl Into<ParamValue>,
    steps: u32,
) -> Result<Circuit, CircuitError> {
    check_layers(num_qubits, edges_by_color)?;
    let zz_angle = zz_angle.into();
    let theta = theta.into();
    let mut c = Circuit::new(num_qubits, 0).with_name("kicked_ising");
    let kick = |c: &mut Circuit| -> Result<(), CircuitError> {
        for q in 0..num_qubits {
            c.rx(theta.clone(), q)?;
        }
        Ok(())
    };
    for _ in 0..steps {
        kick(&mut c)?;
        c.barrier_all()?;
        for layer in edges_by_color {
            for &(a, b) in layer {
                c.rzz(zz_angle.clone(), a, b)?;
            }
        }
        c.barrier_all()?;
    }
    kick(&mut c)?;
    Ok(c)
}

/// Measurement-based ZZ rotation gadget on three qubits.
///
/// Qubits 0 and 1 are the data pair and qubit 2 is a fresh ancilla; the
/// single clbit records the ancilla measurement.  The data pair experiences
/// exactly RZZ(`angle`) on both outcomes once the conditional Z corrections
/// fire, and the ancilla is returned to |0>.  Both outcomes occur with
/// probability 1/2 independent of the data state.
pub fn mbzz_gadget(angle: impl Into<ParamValue>) -> Circuit {
    let mut c = Circuit::new(3, 1).with_name("mbzz");
    c.cx(0, 2).unwrap();
    c.cx(1, 2).unwrap();
    c.rz(angle.into(), 2).unwrap();
    c.h(2).unwrap();
    c.measure(2, 0).unwrap();
    let mut fix = Circuit::new(3, 1);
    fix.z(0).unwrap();
    fix.z(1).unwrap();
    let cond = ClassicalExpr::equals(ClassicalExpr::Bit(0), 1);
    c.if_test(cond.clone(), fix).unwrap();
    let mut flip = Circuit::new(3, 1);
    flip.x(2).unwrap();
    c.if_test(cond, flip).unwrap();
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ghz_shape() {
        let c = ghz(4);
        assert_eq!(c.count_ops()["h"], 1);
        assert_eq!(c.count_ops()["cx"], 3);
        assert_eq!(c.depth(), 4);
    }

    #[test]
    fn qft_gate_count_grows_quadratically() {
        let c = qft(5);
        assert_eq!(c.count_ops()["h"], 5);
        assert_eq!(c.count_ops()["rzz"], 10);
        assert_eq!(c.count_ops()["swap"], 2);
    }

    #[test]
    fn trotter_rejects_clashing_layers() {
        let layers = vec![vec![(0, 1), (1, 2)]];
        let err = trotter_kicked_ising(3, &layers, 0.1, 0.2, 1);
        assert!(matches!(err, Err(CircuitError::BadLattice(_))));
        let err = trotter_kicked_ising(2, &[vec![(0, 5)]], 0.1, 0.2, 1);
        assert!(matches!(err, Err(CircuitError::BadLattice(_))));
    }

    #[test]
    fn trotter_layer_structure() {
        let layers = vec![vec![(0, 1)], vec![(1, 2)]];
        let c = trotter_kicked_ising(3, &layers, 0.3, 0.7, 2).unwrap();
        let ops = c.count_ops();
        assert_eq!(ops["rx"], 9); // three kicks of three qubits
        assert_eq!(ops["rzz"], 4); // two layers twice
        assert_eq!(ops["barrier"], 4);
        let zero = trotter_kicked_ising(3, &layers, 0.3, 0.7, 0).unwrap();
        assert_eq!(zero.count_ops()["rx"], 3);
        assert_eq!(zero.count_ops().get("rzz"), None);
    }

    #[test]
    fn mbzz_uses_one_measurement_and_two_conditionals() {
        let c = mbzz_gadget(0.5);
        let ops = c.count_ops();
        assert_eq!(ops["measure"], 1);
        assert_eq!(ops["if_else"], 2);
        assert_eq!(ops["cx"], 2);
    }
}
