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

//! Compiler and simulation toolkit for fixed-frequency superconducting
//! quantum devices with heavy-hex connectivity.
//!
//! The crate is organised as a stack:
//!
//! * [`circuit`]: the circuit intermediate representation (gates, classical
//!   expressions, control flow) plus a small library of circuit builders.
//! * [`quantum_info`]: dense statevector simulation, measurement-branch
//!   enumeration, Pauli observables, channels and a simple noise model.
//! * [`dag`]: dependency-graph view of a circuit used by peephole passes.
//! * [`target`]: descriptions of hardware targets (instruction properties,
//!   coupling maps, lattice generators, edge coloring, device presets).
//! * [`transpiler`]: the staged pass pipeline and the concrete passes
//!   (layout, routing, basis translation, optimization, scheduling).
//! * [`primitives`]: estimator and sampler execution on ISA circuits.
//! * [`qasm`]: parser and emitter for a small OpenQASM 3 subset.
//! * [`kicked_ising`]: end-to-end kicked-Ising demonstration workflows.

pub mod circuit;
pub mod dag;
pub mod qasm;
pub mod quantum_info;
pub mod target;
pub mod transpiler;

pub use circuit::{Circuit, CircuitError, Instruction, OpKind, ParamValue, Parameter, StandardGate};
pub use quantum_info::{BranchDistribution, NoiseModel, PauliObservable, Simulator, Statevector};
pub use target::{CouplingMap, Target};
pub use transpiler::{Layout, PassPipeline, PropertySet, TranspileError, TranspileOptions};
