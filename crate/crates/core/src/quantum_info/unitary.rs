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

//! Dense unitary construction and comparison.

use crate::circuit::{Circuit, OpKind};
use crate::quantum_info::SimError;
use ndarray::Array2;
use num_complex::Complex64;

/// Largest circuit width `circuit_to_unitary` will materialise.
pub const MAX_UNITARY_QUBITS: u32 = 12;

/// Apply a `2^k x 2^k` matrix to the listed qubits of a dense state.
/// The first listed qubit is the low bit of the matrix index space.
pub fn apply_matrix(state: &mut [Complex64], mat: &Array2<Complex64>, qubits: &[u32]) {
    match qubits {
        [q] => {
            let m = 1usize << *q;
            let a = mat[[0, 0]];
            let b = mat[[0, 1]];
            let c = mat[[1, 0]];
            let d = mat[[1, 1]];
            for x in 0..state.len() {
                if x & m == 0 {
                    let lo = state[x];
                    let hi = state[x | m];
                    state[x] = a * lo + b * hi;
                    state[x | m] = c * lo + d * hi;
                }
            }
        }
        _ => {
            let k = qubits.len();
            let dim = 1usize << k;
            let mask: usize = qubits.iter().map(|q| 1usize << *q).sum();
            // scatter[d] spreads the k matrix-index bits onto the qubits.
            let scatter: Vec<usize> = (0..dim)
                .map(|d| {
                    qubits
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| d >> j & 1 == 1)
                        .map(|(_, q)| 1usize << *q)
                        .sum()
                })
                .collect();
            let mut sub = vec![Complex64::new(0.0, 0.0); dim];
            for x in 0..state.len() {
                if x & mask != 0 {
                    continue;
                }
                for d in 0..dim {
                    sub[d] = state[x | scatter[d]];
                }
                for i in 0..dim {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for j in 0..dim {
                        acc += mat[[i, j]] * sub[j];
                    }
                    state[x | scatter[i]] = acc;
                }
            }
        }
    }
}

/// Run the unitary portion of a circuit over a set of states in lockstep.
/// Barriers and delays are skipped; anything non-unitary is an error.
pub(crate) fn apply_to_columns(
    cols: &mut [Vec<Complex64>],
    circuit: &Circuit,
) -> Result<(), SimError> {
    for inst in circuit.instructions() {
        match &inst.op {
            OpKind::Barrier | OpKind::Delay => continue,
            OpKind::Gate(g) => {
                let params = inst.bound_params()?;
                let mat = g.matrix(&params);
                for col in cols.iter_mut() {
                    apply_matrix(col, &mat, &inst.qubits);
                }
            }
            other => return Err(SimError::NotUnitary(other.name().to_string())),
        }
    }
    Ok(())
}

/// The full unitary of a measurement-free circuit, up to 12 qubits.
pub fn circuit_to_unitary(circuit: &Circuit) -> Result<Array2<Complex64>, SimError> {
    let n = circuit.num_qubits();
    if n > MAX_UNITARY_QUBITS {
        return Err(SimError::TooLarge {
            qubits: n,
            max: MAX_UNITARY_QUBITS,
        });
    }
    let dim = 1usize << n;
    let mut cols: Vec<Vec<Complex64>> = (0..dim)
        .map(|j| {
            let mut col = vec![Complex64::new(0.0, 0.0); dim];
            col[j] = Complex64::new(1.0, 0.0);
            col
        })
        .collect();
    apply_to_columns(&mut cols, circuit)?;
    let mut u = Array2::zeros((dim, dim));
    for (j, col) in cols.iter().enumerate() {
        for (i, amp) in col.iter().enumerate() {
            u[[i, j]] = *amp;
        }
    }
    Ok(u)
}

/// Embed a small unitary on the listed qubits into an `n` qubit identity.
pub fn embed_unitary(mat: &Array2<Complex64>, qubits: &[u32], n: u32) -> Array2<Complex64> {
    let dim = 1usize << n;
    let mut out = Array2::zeros((dim, dim));
    let mut cols: Vec<Vec<Complex64>> = (0..dim)
        .map(|j| {
            let mut col = vec![Complex64::new(0.0, 0.0); dim];
            col[j] = Complex64::new(1.0, 0.0);
            col
        })
        .collect();
    for col in cols.iter_mut() {
        apply_matrix(col, mat, qubits);
    }
    for (j, col) in cols.iter().enumerate() {
        for (i, amp) in col.iter().enumerate() {
            out[[i, j]] = *amp;
        }
    }
    out
}

/// Permutation matrix sending input bit `q` to output bit `perm[q]`.
pub fn permutation_unitary(perm: &[u32]) -> Array2<Complex64> {
    let n = perm.len();
    let dim = 1usize << n;
    let mut p = Array2::zeros((dim, dim));
    for x in 0..dim {
        let mut y = 0usize;
        for (q, target) in perm.iter().enumerate() {
            if x >> q & 1 == 1 {
                y |= 1usize << *target;
            }
        }
        p[[y, x]] = Complex64::new(1.0, 0.0);
    }
    p
}

/// Largest entrywise deviation after aligning the global phase of `a` to
/// `b` at `a`'s largest-magnitude entry.
pub fn phase_aligned_distance(a: &Array2<Complex64>, b: &Array2<Complex64>) -> f64 {
    if a.dim() != b.dim() {
        return f64::INFINITY;
    }
    let mut best = 0.0f64;
    let mut pivot = (0usize, 0usize);
    for ((i, j), v) in a.indexed_iter() {
        if v.norm() > best {
            best = v.norm();
            pivot = (i, j);
        }
    }
    let phase = if best > 0.0 {
        let r = b[[pivot.0, pivot.1]] / a[[pivot.0, pivot.1]];
        if r.norm() > 0.0 {
            r / r.norm()
        } else {
            Complex64::new(1.0, 0.0)
        }
    } else {
        Complex64::new(1.0, 0.0)
    };
    let mut max_diff = 0.0f64;
    for ((i, j), v) in a.indexed_iter() {
        max_diff = max_diff.max((v * phase - b[[i, j]]).norm());
    }
    max_diff
}

/// Whether two matrices agree up to a single global phase factor.
pub fn equiv_up_to_global_phase(a: &Array2<Complex64>, b: &Array2<Complex64>, tol: f64) -> bool {
    phase_aligned_distance(a, b) <= tol
}
