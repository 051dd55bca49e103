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

//! The standard gate library.
//!
//! Matrix conventions: basis states are indexed so that qubit `k` of a gate
//! occupies bit `k` of the index, with the first operand of an instruction
//! being gate qubit 0.  A two-qubit matrix therefore acts on amplitudes
//! ordered `|q1 q0>` = `|00>, |01>, |10>, |11>` where `q0` is the first
//! operand.  Rotation gates follow `R_P(theta) = exp(-i * theta / 2 * P)`.

use ndarray::Array2;
use num_complex::Complex64;

pub const PI: f64 = std::f64::consts::PI;
pub const PI2: f64 = PI / 2.0;
pub const PI4: f64 = PI / 4.0;
pub const PI8: f64 = PI / 8.0;

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Gates with fixed definitions known to every part of the toolkit.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum StandardGate {
    I,
    X,
    Y,
    Z,
    H,
    S,
    Sdg,
    T,
    Tdg,
    SX,
    RX,
    RY,
    RZ,
    RZZ,
    RZX,
    CX,
    CZ,
    ECR,
    Swap,
}

impl StandardGate {
    pub const ALL: [StandardGate; 19] = [
        StandardGate::I,
        StandardGate::X,
        StandardGate::Y,
        StandardGate::Z,
        StandardGate::H,
        StandardGate::S,
        StandardGate::Sdg,
        StandardGate::T,
        StandardGate::Tdg,
        StandardGate::SX,
        StandardGate::RX,
        StandardGate::RY,
        StandardGate::RZ,
        StandardGate::RZZ,
        StandardGate::RZX,
        StandardGate::CX,
        StandardGate::CZ,
        StandardGate::ECR,
        StandardGate::Swap,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            StandardGate::I => "id",
            StandardGate::X => "x",
            StandardGate::Y => "y",
            StandardGate::Z => "z",
            StandardGate::H => "h",
            StandardGate::S => "s",
            StandardGate::Sdg => "sdg",
            StandardGate::T => "t",
            StandardGate::Tdg => "tdg",
            StandardGate::SX => "sx",
            StandardGate::RX => "rx",
            StandardGate::RY => "ry",
            StandardGate::RZ => "rz",
            StandardGate::RZZ => "rzz",
            StandardGate::RZX => "rzx",
            StandardGate::CX => "cx",
            StandardGate::CZ => "cz",
            StandardGate::ECR => "ecr",
            StandardGate::Swap => "swap",
        }
    }

    pub fn from_name(name: &str) -> Option<StandardGate> {
        StandardGate::ALL.iter().copied().find(|g| g.name() == name)
    }

    pub fn num_qubits(&self) -> u32 {
        match self {
            StandardGate::RZZ
            | StandardGate::RZX
            | StandardGate::CX
            | StandardGate::CZ
            | StandardGate::ECR
            | StandardGate::Swap => 2,
            _ => 1,
        }
    }

    pub fn num_params(&self) -> u32 {
        match self {
            StandardGate::RX
            | StandardGate::RY
            | StandardGate::RZ
            | StandardGate::RZZ
            | StandardGate::RZX => 1,
            _ => 0,
        }
    }

    /// Whether the gate is its own inverse.
    pub fn self_inverse(&self) -> bool {
        matches!(
            self,
            StandardGate::I
                | StandardGate::X
                | StandardGate::Y
                | StandardGate::Z
                | StandardGate::H
                | StandardGate::CX
                | StandardGate::CZ
                | StandardGate::ECR
                | StandardGate::Swap
        )
    }

    /// The matrix of the gate for the given bound parameters.
    ///
    /// Panics if the parameter count is wrong; callers validate arity when
    /// instructions are appended.
    pub fn matrix(&self, params: &[f64]) -> Array2<Complex64> {
        assert_eq!(
            params.len(),
            self.num_params() as usize,
            "wrong parameter count for {}",
            self.name()
        );
        match self {
            StandardGate::I => mat2([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]]),
            StandardGate::X => mat2([[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]]),
            StandardGate::Y => mat2([[c(0.0, 0.0), c(0.0, -1.0)], [c(0.0, 1.0), c(0.0, 0.0)]]),
            StandardGate::Z => mat2([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(-1.0, 0.0)]]),
            StandardGate::H => mat2([
                [c(FRAC_1_SQRT_2, 0.0), c(FRAC_1_SQRT_2, 0.0)],
                [c(FRAC_1_SQRT_2, 0.0), c(-FRAC_1_SQRT_2, 0.0)],
            ]),
            StandardGate::S => mat2([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, 1.0)]]),
            StandardGate::Sdg => mat2([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(0.0, -1.0)]]),
            StandardGate::T => mat2([
                [c(1.0, 0.0), c(0.0, 0.0)],
                [c(0.0, 0.0), c(FRAC_1_SQRT_2, FRAC_1_SQRT_2)],
            ]),
            StandardGate::Tdg => mat2([
                [c(1.0, 0.0), c(0.0, 0.0)],
                [c(0.0, 0.0), c(FRAC_1_SQRT_2, -FRAC_1_SQRT_2)],
            ]),
            // Principal square root of X: SX * SX == X exactly.
            StandardGate::SX => mat2([
                [c(0.5, 0.5), c(0.5, -0.5)],
                [c(0.5, -0.5), c(0.5, 0.5)],
            ]),
            StandardGate::RX => {
                let (s, co) = (params[0] / 2.0).sin_cos();
                mat2([[c(co, 0.0), c(0.0, -s)], [c(0.0, -s), c(co, 0.0)]])
            }
            StandardGate::RY => {
                let (s, co) = (params[0] / 2.0).sin_cos();
                mat2([[c(co, 0.0), c(-s, 0.0)], [c(s, 0.0), c(co, 0.0)]])
            }
            StandardGate::RZ => {
                let (s, co) = (params[0] / 2.0).sin_cos();
                mat2([[c(co, -s), c(0.0, 0.0)], [c(0.0, 0.0), c(co, s)]])
            }
            StandardGate::RZZ => {
                let (s, co) = (params[0] / 2.0).sin_cos();
                let m = c(co, -s);
                let p = c(co, s);
                let z = c(0.0, 0.0);
                mat4([
                    [m, z, z, z],
                    [z, p, z, z],
                    [z, z, p, z],
                    [z, z, z, m],
                ])
            }
            // exp(-i theta/2 Z(q0) X(q1)): Z on the first operand (the
            // "control"), X on the second (the "target").
            StandardGate::RZX => {
                let (s, co) = (params[0] / 2.0).sin_cos();
                let d = c(co, 0.0);
                let ms = c(0.0, -s);
                let ps = c(0.0, s);
                let z = c(0.0, 0.0);
                mat4([
                    [d, z, ms, z],
                    [z, d, z, ps],
                    [ms, z, d, z],
                    [z, ps, z, d],
                ])
            }
            // Control is the first operand (bit 0 of the index).
            StandardGate::CX => {
                let o = c(1.0, 0.0);
                let z = c(0.0, 0.0);
                mat4([
                    [o, z, z, z],
                    [z, z, z, o],
                    [z, z, o, z],
                    [z, o, z, z],
                ])
            }
            StandardGate::CZ => {
                let o = c(1.0, 0.0);
                let z = c(0.0, 0.0);
                mat4([
                    [o, z, z, z],
                    [z, o, z, z],
                    [z, z, o, z],
                    [z, z, z, -o],
                ])
            }
            // Frozen product RZX(pi/4) . X(q0) . RZX(-pi/4); the derivation
            // is re-checked against the rotation definitions in the tests.
            StandardGate::ECR => {
                let r = FRAC_1_SQRT_2;
                let z = c(0.0, 0.0);
                mat4([
                    [z, c(r, 0.0), z, c(0.0, -r)],
                    [c(r, 0.0), z, c(0.0, r), z],
                    [z, c(0.0, -r), z, c(r, 0.0)],
                    [c(0.0, r), z, c(r, 0.0), z],
                ])
            }
            StandardGate::Swap => {
                let o = c(1.0, 0.0);
                let z = c(0.0, 0.0);
                mat4([
                    [o, z, z, z],
                    [z, z, o, z],
                    [z, o, z, z],
                    [z, z, z, o],
                ])
            }
        }
    }
}

fn mat2(rows: [[Complex64; 2]; 2]) -> Array2<Complex64> {
    Array2::from_shape_vec((2, 2), rows.concat()).unwrap()
}

fn mat4(rows: [[Complex64; 4]; 4]) -> Array2<Complex64> {
    Array2::from_shape_vec((4, 4), rows.concat()).unwrap()
}
