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

//! Device noise description: always-on ZZ coupling between idle neighbours
//! and classical readout bit flips.

use serde::{Deserialize, Serialize};

/// Always-on ZZ interaction between a pair of coupled qubits.
///
/// While both qubits sit idle for `tau` dt the pair accrues the phase
/// `exp(-i (nu/2) (ZZ - IZ - ZI) tau)`, i.e. `nu` is the interaction angle
/// per dt of shared idle time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZzCoupling {
    pub qubits: (u32, u32),
    pub nu: f64,
}

/// Classical readout confusion for one qubit: `p01` is the probability of
/// recording 1 when the qubit was 0, `p10` the reverse.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReadoutError {
    pub qubit: u32,
    pub p01: f64,
    pub p10: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    #[serde(default)]
    pub zz: Vec<ZzCoupling>,
    #[serde(default)]
    pub readout: Vec<ReadoutError>,
}

impl NoiseModel {
    pub fn new() -> Self {
        NoiseModel::default()
    }

    pub fn add_zz(&mut self, a: u32, b: u32, nu: f64) {
        self.zz.push(ZzCoupling { qubits: (a, b), nu });
    }

    pub fn add_readout(&mut self, qubit: u32, p01: f64, p10: f64) {
        self.readout.push(ReadoutError { qubit, p01, p10 });
    }

    /// The same coupling strength on every listed edge.
    pub fn uniform_zz(edges: &[(u32, u32)], nu: f64) -> Self {
        let mut model = NoiseModel::new();
        for &(a, b) in edges {
            model.add_zz(a, b, nu);
        }
        model
    }

    pub fn is_trivial(&self) -> bool {
        self.zz.is_empty() && !self.has_readout_error()
    }

    pub fn has_readout_error(&self) -> bool {
        self.readout.iter().any(|r| r.p01 != 0.0 || r.p10 != 0.0)
    }

    /// Couplings touching any of the given qubits.
    pub fn couplings_touching<'a>(
        &'a self,
        qubits: &'a [u32],
    ) -> impl Iterator<Item = &'a ZzCoupling> {
        self.zz
            .iter()
            .filter(move |c| qubits.contains(&c.qubits.0) || qubits.contains(&c.qubits.1))
    }

    /// ZZ neighbours of one qubit.
    pub fn neighbours(&self, q: u32) -> Vec<(u32, f64)> {
        let mut out = Vec::new();
        for c in &self.zz {
            if c.qubits.0 == q {
                out.push((c.qubits.1, c.nu));
            } else if c.qubits.1 == q {
                out.push((c.qubits.0, c.nu));
            }
        }
        out
    }

    /// `(p01, p10)` for a qubit, zero when unlisted.
    pub fn readout_of(&self, q: u32) -> (f64, f64) {
        self.readout
            .iter()
            .find(|r| r.qubit == q)
            .map(|r| (r.p01, r.p10))
            .unwrap_or((0.0, 0.0))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("noise model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}
