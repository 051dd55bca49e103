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

//! Dense simulation and quantum-information utilities.
//!
//! Everything here uses one amplitude ordering: basis index bit `k` is the
//! state of qubit `k`, so `|q1 q0> = |01>` is index 1 when qubit 0 is in
//! `|1>`.  Gate matrices follow the same rule with the first operand of a
//! gate as the low bit of the gate's own index space.

pub mod channel;
pub mod noise;
pub mod pauli;
pub mod simulator;
pub mod statevector;
pub mod unitary;

pub use channel::{channel_of, reduced_density, reduced_density_pure, unitary_superop};
pub use noise::{NoiseModel, ReadoutError, ZzCoupling};
pub use pauli::{PauliObservable, PauliTerm};
pub use simulator::{Branch, BranchDistribution, Simulator};
pub use statevector::Statevector;
pub use unitary::{
    circuit_to_unitary, embed_unitary, equiv_up_to_global_phase, permutation_unitary,
    phase_aligned_distance,
};

use crate::circuit::CircuitError;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("{qubits} qubits exceed the dense limit of {max}")]
    TooLarge { qubits: u32, max: u32 },
    #[error("operation {0} has no unitary action")]
    NotUnitary(String),
    #[error("measurement branching exceeded {0} branches")]
    TooManyBranches(usize),
    #[error("while loop exceeded {0} iterations")]
    TooManyIterations(u64),
    #[error("invalid observable: {0}")]
    BadObservable(String),
    #[error("invalid state: {0}")]
    BadState(String),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}
