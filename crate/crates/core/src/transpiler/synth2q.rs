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

//! Two-qubit block resynthesis through the magic-basis (Weyl) decomposition.
//!
//! Runs of gates confined to one qubit pair are collapsed into their joint
//! unitary, which is split as `(k1l⊗k1r)·exp(i(a·XX+b·YY+c·ZZ))·(k2l⊗k2r)`
//! with canonical coordinates in the Weyl chamber.  The coordinates decide
//! how many CX gates the block really needs (0, 1, 2 or 3); the matching
//! closed-form expansion is emitted and a rewrite is only committed once the
//! rebuilt matrix reproduces the original one.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4, PI, TAU};

use ndarray::{array, Array2};
use num_complex::Complex64;
use petgraph::stable_graph::NodeIndex;

use super::optimize::{zsx_sequence, zyz_angles};
use super::{Pass, PropertySet, TranspileError};
use crate::circuit::{Circuit, Instruction, StandardGate};
use crate::dag::DagCircuit;
use crate::quantum_info::{circuit_to_unitary, phase_aligned_distance};
use crate::target::Target;

/// Blocks with fewer two-qubit gates than this are left alone; they cannot
/// beat the three-CX worst case by enough to pay for the churn.
const MIN_TWO_QUBIT_GATES: usize = 4;

/// Accuracy demanded of the rebuilt block, as a phase-aligned distance.
const REBUILD_TOLERANCE: f64 = 1e-9;

/// Trace-fidelity deficit below which an entangler count qualifies.  A
/// cheaper expansion picked on the strength of this bound still has to pass
/// the rebuild check before it replaces anything.
const FIDELITY_SLACK: f64 = 1e-12;

type C = Complex64;

fn cplx(re: f64, im: f64) -> C {
    C::new(re, im)
}

/// `hi ⊗ lo` for 2×2 factors, `hi` acting on qubit 1 and `lo` on qubit 0.
fn kron2(hi: &Array2<C>, lo: &Array2<C>) -> Array2<C> {
    Array2::from_shape_fn((4, 4), |(i, j)| hi[[i / 2, j / 2]] * lo[[i % 2, j % 2]])
}

fn eye2() -> Array2<C> {
    Array2::eye(2)
}

fn det2(m: &Array2<C>) -> C {
    m[[0, 0]] * m[[1, 1]] - m[[0, 1]] * m[[1, 0]]
}

fn dagger(m: &Array2<C>) -> Array2<C> {
    m.t().mapv(|z| z.conj())
}

/// Determinant of a 4×4 complex matrix by pivoted elimination.
fn det4(m: &Array2<C>) -> C {
    let mut a = m.clone();
    let mut det = cplx(1.0, 0.0);
    for k in 0..4 {
        let pivot = (k..4)
            .max_by(|&i, &j| a[[i, k]].norm().total_cmp(&a[[j, k]].norm()))
            .expect("nonempty range");
        if a[[pivot, k]].norm() < 1e-300 {
            return cplx(0.0, 0.0);
        }
        if pivot != k {
            for j in 0..4 {
                let held = a[[k, j]];
                a[[k, j]] = a[[pivot, j]];
                a[[pivot, j]] = held;
            }
            det = -det;
        }
        det *= a[[k, k]];
        for i in k + 1..4 {
            let factor = a[[i, k]] / a[[k, k]];
            for j in k..4 {
                let head = a[[k, j]];
                a[[i, j]] = a[[i, j]] - factor * head;
            }
        }
    }
    det
}

/// The normalised magic-basis change.  Its columns are Bell-like states in
/// which real orthogonal matrices correspond exactly to local gate pairs.
fn magic() -> Array2<C> {
    let r = cplx(FRAC_1_SQRT_2, 0.0);
    let i = cplx(0.0, FRAC_1_SQRT_2);
    let z = cplx(0.0, 0.0);
    array![[r, i, z, z], [z, z, i, r], [z, z, i, -r], [r, -i, z, z]]
}

fn ipx() -> Array2<C> {
    array![[cplx(0.0, 0.0), cplx(0.0, 1.0)], [cplx(0.0, 1.0), cplx(0.0, 0.0)]]
}

fn ipy() -> Array2<C> {
    array![[cplx(0.0, 0.0), cplx(1.0, 0.0)], [cplx(-1.0, 0.0), cplx(0.0, 0.0)]]
}

fn ipz() -> Array2<C> {
    array![[cplx(0.0, 1.0), cplx(0.0, 0.0)], [cplx(0.0, 0.0), cplx(0.0, -1.0)]]
}

fn rz_mat(theta: f64) -> Array2<C> {
    StandardGate::RZ.matrix(&[theta])
}

/// Eigenvectors of a real symmetric 4×4 matrix by cyclic Jacobi rotations.
fn jacobi4(mut a: [[f64; 4]; 4]) -> [[f64; 4]; 4] {
    let mut v = [[0.0; 4]; 4];
    for k in 0..4 {
        v[k][k] = 1.0;
    }
    for _ in 0..64 {
        let mut off = 0.0;
        for p in 0..4 {
            for q in 0..4 {
                if p != q {
                    off += a[p][q] * a[p][q];
                }
            }
        }
        if off < 1e-28 {
            break;
        }
        for p in 0..3 {
            for q in p + 1..4 {
                if a[p][q].abs() < 1e-18 {
                    continue;
                }
                let spread = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = spread.signum() / (spread.abs() + (spread * spread + 1.0).sqrt());
                let cs = 1.0 / (t * t + 1.0).sqrt();
                let sn = t * cs;
                for k in 0..4 {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = cs * akp - sn * akq;
                    a[k][q] = sn * akp + cs * akq;
                }
                for k in 0..4 {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = cs * apk - sn * aqk;
                    a[q][k] = sn * apk + cs * aqk;
                }
                for k in 0..4 {
                    let vkp = v[k][p];
                    let vkq = v[k][q];
                    v[k][p] = cs * vkp - sn * vkq;
                    v[k][q] = sn * vkp + cs * vkq;
                }
            }
        }
    }
    v
}

/// Split a tensor-product unitary into determinant-one factors
/// `g = e^{iφ}·(l ⊗ r)`, `l` acting on qubit 1 and `r` on qubit 0.
fn product_split(g: &Array2<C>) -> Option<(Array2<C>, Array2<C>, f64)> {
    // One factor shows up, rescaled, in a 2×2 sub-block; which block is
    // usable depends on where the other factor is nonsingular.
    let mut r = Array2::from_shape_fn((2, 2), |(i, j)| g[[i, j]]);
    if det2(&r).norm() < 0.1 {
        r = Array2::from_shape_fn((2, 2), |(i, j)| g[[i + 2, j]]);
    }
    let det_r = det2(&r);
    if det_r.norm() < 0.1 {
        return None;
    }
    let r = r.mapv(|z| z / det_r.sqrt());
    let peeled = g.dot(&kron2(&eye2(), &dagger(&r)));
    let mut l = Array2::from_shape_fn((2, 2), |(i, j)| peeled[[2 * i, 2 * j]]);
    let det_l = det2(&l);
    if det_l.norm() < 0.9 {
        return None;
    }
    l = l.mapv(|z| z / det_l.sqrt());
    let phase = det_l.arg() / 2.0;
    if phase_aligned_distance(&kron2(&l, &r), g) > 1e-7 {
        return None;
    }
    Some((l, r, phase))
}

/// The factors of a two-qubit unitary in canonical form,
/// `u = e^{iφ}·(k1l⊗k1r)·exp(i(a·XX+b·YY+c·ZZ))·(k2l⊗k2r)`
/// with `π/4 ≥ a ≥ b ≥ |c|`; [`weyl`] reports the global phase `φ`
/// alongside.  The `l` factors act on qubit 1 and the `r` factors on
/// qubit 0.
struct Weyl {
    a: f64,
    b: f64,
    c: f64,
    k1l: Array2<C>,
    k1r: Array2<C>,
    k2l: Array2<C>,
    k2r: Array2<C>,
}

fn weyl(u: &Array2<C>) -> Option<(Weyl, f64)> {
    let det = det4(u);
    if (det.norm() - 1.0).abs() > 1e-8 {
        return None;
    }
    let su = u.mapv(|z| z * det.powf(-0.25));
    let mut phase = det.arg() / 4.0;
    let bmat = magic();
    let bd = dagger(&bmat);
    let u_p = bd.dot(&su).dot(&bmat);
    let m2 = u_p.t().dot(&u_p);

    // M2 is complex symmetric with commuting real and imaginary parts, so a
    // generic real mixing of the two is diagonalised by the same orthogonal
    // matrix as M2 itself.  Retry with different weights in case a mixing
    // happens to be degenerate.
    let mut split = None;
    for (wa, wb) in [
        (1.2602066112249388, 0.22317849046722027),
        (1.0, 0.0),
        (0.0, 1.0),
        (0.341, 1.0),
        (2.173, -0.64),
        (0.618, 5.077),
    ] {
        let mut mixed = [[0.0; 4]; 4];
        for i in 0..4 {
            for j in 0..4 {
                let z = (m2[[i, j]] + m2[[j, i]]) / 2.0;
                mixed[i][j] = wa * z.re + wb * z.im;
            }
        }
        let p = jacobi4(mixed);
        let pc = Array2::from_shape_fn((4, 4), |(i, j)| cplx(p[i][j], 0.0));
        let lam = pc.t().dot(&m2).dot(&pc);
        let diag = Array2::from_shape_fn((4, 4), |(i, j)| {
            if i == j {
                lam[[i, i]]
            } else {
                cplx(0.0, 0.0)
            }
        });
        let rebuilt = pc.dot(&diag).dot(&pc.t());
        let err = rebuilt
            .iter()
            .zip(m2.iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max);
        if err < 1e-12 {
            split = Some((p, [lam[[0, 0]], lam[[1, 1]], lam[[2, 2]], lam[[3, 3]]]));
            break;
        }
    }
    let (p, lam) = split?;

    let mut d = [0.0; 4];
    for k in 0..4 {
        d[k] = -lam[k].arg() / 2.0;
    }
    d[3] = -d[0] - d[1] - d[2];
    let mut cs = [0.0; 3];
    for i in 0..3 {
        cs[i] = ((d[i] + d[3]) / 2.0).rem_euclid(TAU);
    }

    // Order the coordinates by their folded distance to the nearest lattice
    // point, so the eventual chamber coordinates come out sorted.
    let fold = |x: f64| {
        let r = x.rem_euclid(FRAC_PI_2);
        r.min(FRAC_PI_2 - r)
    };
    let mut order = [0usize, 1, 2];
    order.sort_by(|&i, &j| fold(cs[i]).total_cmp(&fold(cs[j])));
    let order = [order[1], order[2], order[0]];
    cs = [cs[order[0]], cs[order[1]], cs[order[2]]];
    let d = [d[order[0]], d[order[1]], d[order[2]], d[3]];
    let mut cols = [[0.0; 4]; 4];
    for (slot, &src) in order.iter().enumerate() {
        for row in 0..4 {
            cols[row][slot] = p[row][src];
        }
    }
    for row in 0..4 {
        cols[row][3] = p[row][3];
    }
    let mut pc = Array2::from_shape_fn((4, 4), |(i, j)| cplx(cols[i][j], 0.0));
    if det4(&pc).re < 0.0 {
        for row in 0..4 {
            cols[row][3] = -cols[row][3];
        }
        pc = Array2::from_shape_fn((4, 4), |(i, j)| cplx(cols[i][j], 0.0));
    }

    let temp = Array2::from_shape_fn((4, 4), |(i, j)| {
        if i == j {
            C::from_polar(1.0, d[i])
        } else {
            cplx(0.0, 0.0)
        }
    });
    let k1 = bmat.dot(&u_p.dot(&pc).dot(&temp)).dot(&bd);
    let k2 = bmat.dot(&pc.t()).dot(&bd);
    let (mut k1l, mut k1r, phase_l) = product_split(&k1)?;
    let (k2l, mut k2r, phase_r) = product_split(&k2)?;
    phase += phase_l + phase_r;

    // Reflect the raw coordinates into the Weyl chamber, compensating each
    // reflection with ±iX/±iY/±iZ factors on the local gates.
    let mut cs = [cs[0], cs[1], cs[2]];
    if cs[0] > FRAC_PI_2 {
        cs[0] -= 3.0 * FRAC_PI_2;
        k1l = k1l.dot(&ipy());
        k1r = k1r.dot(&ipy());
        phase += FRAC_PI_2;
    }
    if cs[1] > FRAC_PI_2 {
        cs[1] -= 3.0 * FRAC_PI_2;
        k1l = k1l.dot(&ipx());
        k1r = k1r.dot(&ipx());
        phase += FRAC_PI_2;
    }
    let mut conjs = 0;
    if cs[0] > FRAC_PI_4 {
        cs[0] = FRAC_PI_2 - cs[0];
        k1l = k1l.dot(&ipy());
        k2r = ipy().dot(&k2r);
        conjs += 1;
        phase -= FRAC_PI_2;
    }
    if cs[1] > FRAC_PI_4 {
        cs[1] = FRAC_PI_2 - cs[1];
        k1l = k1l.dot(&ipx());
        k2r = ipx().dot(&k2r);
        conjs += 1;
        phase += FRAC_PI_2;
        if conjs == 1 {
            phase -= PI;
        }
    }
    if cs[2] > FRAC_PI_2 {
        cs[2] -= 3.0 * FRAC_PI_2;
        k1l = k1l.dot(&ipz());
        k1r = k1r.dot(&ipz());
        phase += FRAC_PI_2;
        if conjs == 1 {
            phase -= PI;
        }
    }
    if conjs == 1 {
        cs[2] = FRAC_PI_2 - cs[2];
        k1l = k1l.dot(&ipz());
        k2r = ipz().dot(&k2r);
        phase += FRAC_PI_2;
    }
    if cs[2] > FRAC_PI_4 {
        cs[2] -= FRAC_PI_2;
        k1l = k1l.dot(&ipz());
        k1r = k1r.dot(&ipz());
        phase -= FRAC_PI_2;
    }

    Some((
        Weyl {
            a: cs[1],
            b: cs[0],
            c: cs[2],
            k1l,
            k1r,
            k2l,
            k2r,
        },
        phase,
    ))
}

/// Closed-form expansion pieces around the CX basis gate.  The fixed 2×2
/// factors come from expanding gates equivalent to the basis as
/// `Ui = Ki1·CX·Ki2`, so that interleaving them with coordinate-dependent
/// RZ rotations telescopes into any wanted canonical form.
struct CxBasis {
    b: f64,
    k1ld: Array2<C>,
    k1rd: Array2<C>,
    k2ld: Array2<C>,
    k2rd: Array2<C>,
    u0l: Array2<C>,
    u0r: Array2<C>,
    u1l: Array2<C>,
    u1ra: Array2<C>,
    u1rb: Array2<C>,
    u2la: Array2<C>,
    u2lb: Array2<C>,
    u2ra: Array2<C>,
    u2rb: Array2<C>,
    u3l: Array2<C>,
    u3r: Array2<C>,
    q0l: Array2<C>,
    q0r: Array2<C>,
    q1la: Array2<C>,
    q1lb: Array2<C>,
    q1ra: Array2<C>,
    q1rb: Array2<C>,
    q2l: Array2<C>,
    q2r: Array2<C>,
}

impl CxBasis {
    fn new() -> Option<CxBasis> {
        let (basis, _) = weyl(&StandardGate::CX.matrix(&[]))?;
        let b = basis.b;
        let s = FRAC_1_SQRT_2;
        let im = cplx(0.0, 1.0);
        let mim = cplx(0.0, -1.0);
        let e_b = C::from_polar(1.0, b);
        let e_mb = C::from_polar(1.0, -b);
        let e_2b = C::from_polar(1.0, 2.0 * b);
        let e_m2b = C::from_polar(1.0, -2.0 * b);

        let half_m = cplx(0.5, -0.5);
        let k11l = array![
            [half_m * (mim * e_mb), half_m * e_mb],
            [half_m * (mim * e_b), half_m * (-e_b)],
        ];
        let k11r = array![
            [im * e_mb * s, -e_mb * s],
            [e_b * s, mim * e_b * s],
        ];
        let k12l = array![
            [cplx(0.5, 0.5), cplx(0.5, 0.5)],
            [cplx(-0.5, 0.5), cplx(0.5, -0.5)],
        ];
        let k12r = array![
            [cplx(0.0, s), cplx(s, 0.0)],
            [cplx(-s, 0.0), cplx(0.0, -s)],
        ];
        let k32l_k21l = array![
            [cplx(1.0, (2.0 * b).cos()) * s, cplx(0.0, (2.0 * b).sin()) * s],
            [cplx(0.0, (2.0 * b).sin()) * s, cplx(1.0, -(2.0 * b).cos()) * s],
        ];
        let half_p = cplx(0.5, 0.5);
        let k21r = array![
            [half_p * (mim * e_m2b), half_p * e_m2b],
            [half_p * (im * e_2b), half_p * e_2b],
        ];
        let k22l = array![
            [cplx(s, 0.0), cplx(-s, 0.0)],
            [cplx(s, 0.0), cplx(s, 0.0)],
        ];
        let k22r = array![
            [cplx(0.0, 0.0), cplx(1.0, 0.0)],
            [cplx(-1.0, 0.0), cplx(0.0, 0.0)],
        ];
        let k31l = array![
            [e_mb * s, e_mb * s],
            [-e_b * s, e_b * s],
        ];
        let k31r = array![
            [im * e_b, cplx(0.0, 0.0)],
            [cplx(0.0, 0.0), mim * e_mb],
        ];
        let k32r = array![
            [half_p * e_b, half_p * (-e_mb)],
            [half_p * (mim * e_b), half_p * (mim * e_mb)],
        ];

        let k1ld = dagger(&basis.k1l);
        let k1rd = dagger(&basis.k1r);
        let k2ld = dagger(&basis.k2l);
        let k2rd = dagger(&basis.k2r);

        Some(CxBasis {
            b,
            u0l: k31l.dot(&k1ld),
            u0r: k31r.dot(&k1rd),
            u1l: k2ld.dot(&k32l_k21l).dot(&k1ld),
            u1ra: k2rd.dot(&k32r),
            u1rb: k21r.dot(&k1rd),
            u2la: k2ld.dot(&k22l),
            u2lb: k11l.dot(&k1ld),
            u2ra: k2rd.dot(&k22r),
            u2rb: k11r.dot(&k1rd),
            u3l: k2ld.dot(&k12l),
            u3r: k2rd.dot(&k12r),
            q0l: dagger(&k12l).dot(&k1ld),
            q0r: dagger(&k12r).dot(&ipz()).dot(&k1rd),
            q1la: k2ld.dot(&dagger(&k11l)),
            q1lb: k11l.dot(&k1ld),
            q1ra: k2rd.dot(&ipz()).dot(&dagger(&k11r)),
            q1rb: k11r.dot(&k1rd),
            q2l: k2ld.dot(&k12l),
            q2r: k2rd.dot(&k12r),
            k1ld,
            k1rd,
            k2ld,
            k2rd,
        })
    }

    /// Expected traces of the synthesis error operator when the target is
    /// rebuilt with 0, 1, 2 or 3 CX gates; |trace| = 4 means exact.
    fn trace_ladder(&self, t: &Weyl) -> [C; 4] {
        [
            cplx(
                t.a.cos() * t.b.cos() * t.c.cos(),
                t.a.sin() * t.b.sin() * t.c.sin(),
            ) * 4.0,
            cplx(
                (FRAC_PI_4 - t.a).cos() * (self.b - t.b).cos() * t.c.cos(),
                (FRAC_PI_4 - t.a).sin() * (self.b - t.b).sin() * t.c.sin(),
            ) * 4.0,
            cplx(4.0 * t.c.cos(), 0.0),
            cplx(4.0, 0.0),
        ]
    }

    /// Interleaved single-qubit factors for an `n`-CX expansion, listed in
    /// circuit order as (qubit-0, qubit-1) pairs around each CX.
    fn layers(&self, n: usize, t: &Weyl) -> Vec<Array2<C>> {
        match n {
            0 => vec![t.k1r.dot(&t.k2r), t.k1l.dot(&t.k2l)],
            1 => vec![
                self.k2rd.dot(&t.k2r),
                self.k2ld.dot(&t.k2l),
                t.k1r.dot(&self.k1rd),
                t.k1l.dot(&self.k1ld),
            ],
            2 => vec![
                self.q2r.dot(&t.k2r),
                self.q2l.dot(&t.k2l),
                self.q1ra.dot(&rz_mat(2.0 * t.b)).dot(&self.q1rb),
                self.q1la.dot(&rz_mat(-2.0 * t.a)).dot(&self.q1lb),
                t.k1r.dot(&self.q0r),
                t.k1l.dot(&self.q0l),
            ],
            _ => vec![
                self.u3r.dot(&t.k2r),
                self.u3l.dot(&t.k2l),
                self.u2ra.dot(&rz_mat(2.0 * t.b)).dot(&self.u2rb),
                self.u2la.dot(&rz_mat(-2.0 * t.a)).dot(&self.u2lb),
                self.u1ra.dot(&rz_mat(-2.0 * t.c)).dot(&self.u1rb),
                self.u1l.clone(),
                t.k1r.dot(&self.u0r),
                t.k1l.dot(&self.u0l),
            ],
        }
    }
}

/// Average-gate fidelity implied by a rebuild trace.
fn trace_fidelity(tr: C) -> f64 {
    (4.0 + tr.norm_sqr()) / 20.0
}

/// Emit a single-qubit unitary as native rz/sx gates.
fn emit_local(g: &Array2<C>, q: u32, out: &mut Vec<Instruction>) {
    let (theta, phi, lambda) = zyz_angles(g);
    out.extend(zsx_sequence(theta, phi, lambda, q));
}

/// Interleave the single-qubit layers with `n` CX gates and verify the
/// product against the original unitary before accepting it.
fn assemble(u: &Array2<C>, n: usize, layers: &[Array2<C>]) -> Option<Vec<Instruction>> {
    let mut insts = Vec::new();
    for i in 0..n {
        emit_local(&layers[2 * i], 0, &mut insts);
        emit_local(&layers[2 * i + 1], 1, &mut insts);
        insts.push(Instruction::gate(StandardGate::CX, vec![], vec![0, 1]));
    }
    emit_local(&layers[2 * n], 0, &mut insts);
    emit_local(&layers[2 * n + 1], 1, &mut insts);
    let mut check = Circuit::new(2, 0);
    for inst in &insts {
        check.append(inst.clone()).ok()?;
    }
    let rebuilt = circuit_to_unitary(&check).ok()?;
    if phase_aligned_distance(&rebuilt, u) > REBUILD_TOLERANCE {
        return None;
    }
    Some(insts)
}

/// Cheapest faithful realisation of a two-qubit unitary, if one is found.
fn resynthesize(u: &Array2<C>) -> Option<(Vec<Instruction>, usize)> {
    let basis = CxBasis::new()?;
    let (t, _) = weyl(u)?;
    let traces = basis.trace_ladder(&t);
    for n in 0..4 {
        if trace_fidelity(traces[n]) < 1.0 - FIDELITY_SLACK {
            continue;
        }
        let layers = basis.layers(n, &t);
        if let Some(insts) = assemble(u, n, &layers) {
            return Some((insts, n));
        }
    }
    None
}

fn block_pair(dag: &DagCircuit, nodes: &[NodeIndex]) -> Option<(u32, u32)> {
    for &n in nodes {
        let inst = dag.instruction(n)?;
        if inst.qubits.len() == 2 {
            return Some((inst.qubits[0], inst.qubits[1]));
        }
    }
    None
}

fn block_unitary(dag: &DagCircuit, nodes: &[NodeIndex], pair: (u32, u32)) -> Option<Array2<C>> {
    let mut local = Circuit::new(2, 0);
    for &n in nodes {
        let inst = dag.instruction(n)?;
        inst.bound_params().ok()?;
        let mut remapped = inst.clone();
        remapped.qubits = inst
            .qubits
            .iter()
            .map(|&q| if q == pair.0 { 0 } else { 1 })
            .collect();
        local.append(remapped).ok()?;
    }
    circuit_to_unitary(&local).ok()
}

/// Rebuild heavyweight two-qubit runs from at most three entangling gates.
pub struct Resynth2qBlocks;

impl Pass for Resynth2qBlocks {
    fn name(&self) -> &str {
        "resynth_2q"
    }

    fn run(
        &self,
        dag: DagCircuit,
        _target: &Target,
        _properties: &mut PropertySet,
    ) -> Result<DagCircuit, TranspileError> {
        let mut dag = dag;
        for nodes in dag.collect_2q_blocks() {
            let twoq = nodes
                .iter()
                .filter(|&&n| {
                    dag.instruction(n)
                        .map(|inst| inst.qubits.len() == 2)
                        .unwrap_or(false)
                })
                .count();
            if twoq < MIN_TWO_QUBIT_GATES {
                continue;
            }
            let Some(pair) = block_pair(&dag, &nodes) else {
                continue;
            };
            let Some(u) = block_unitary(&dag, &nodes, pair) else {
                continue;
            };
            let Some((insts, _)) = resynthesize(&u) else {
                continue;
            };
            let physical: Vec<Instruction> = insts
                .into_iter()
                .map(|mut inst| {
                    inst.qubits = inst
                        .qubits
                        .iter()
                        .map(|&q| if q == 0 { pair.0 } else { pair.1 })
                        .collect();
                    inst
                })
                .collect();
            dag.replace_block(&nodes, physical)
                .map_err(TranspileError::Circuit)?;
        }
        Ok(dag)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::Parameter;
    use crate::target::presets::heron_custom;
    use crate::transpiler::{PassPipeline, PipelineItem, Stage};

    fn run_pass(circuit: &Circuit) -> Circuit {
        let target = heron_custom("syn", 3, &[(0, 1), (1, 2)]).unwrap();
        let mut pipeline = PassPipeline::new();
        pipeline.push(Stage::Optimization, PipelineItem::pass(Resynth2qBlocks));
        pipeline.run(circuit, &target).unwrap().circuit
    }

    fn twoq_count(circuit: &Circuit) -> usize {
        circuit
            .instructions()
            .iter()
            .filter(|inst| inst.qubits.len() == 2)
            .count()
    }

    fn assert_equiv(a: &Circuit, b: &Circuit) {
        let ua = circuit_to_unitary(a).unwrap();
        let ub = circuit_to_unitary(b).unwrap();
        assert!(
            phase_aligned_distance(&ua, &ub) < 1e-8,
            "circuits differ: {}",
            phase_aligned_distance(&ua, &ub)
        );
    }

    /// `exp(i(a·XX + b·YY + c·ZZ))` written out entrywise, as an
    /// independent closed form for the canonical factor.
    fn interaction_matrix(a: f64, b: f64, c: f64) -> Array2<C> {
        let ei = |t: f64| C::from_polar(1.0, t);
        let re = |x: f64| cplx(x, 0.0);
        let im = |x: f64| cplx(0.0, x);
        array![
            [
                ei(c) * re((a - b).cos()),
                cplx(0.0, 0.0),
                cplx(0.0, 0.0),
                ei(c) * im((a - b).sin())
            ],
            [
                cplx(0.0, 0.0),
                ei(-c) * re((a + b).cos()),
                ei(-c) * im((a + b).sin()),
                cplx(0.0, 0.0)
            ],
            [
                cplx(0.0, 0.0),
                ei(-c) * im((a + b).sin()),
                ei(-c) * re((a + b).cos()),
                cplx(0.0, 0.0)
            ],
            [
                ei(c) * im((a - b).sin()),
                cplx(0.0, 0.0),
                cplx(0.0, 0.0),
                ei(c) * re((a - b).cos())
            ],
        ]
    }

    fn max_abs_diff(a: &Array2<C>, b: &Array2<C>) -> f64 {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| (x - y).norm())
            .fold(0.0, f64::max)
    }

    #[test]
    fn interaction_closed_form_matches_conjugated_rotations() {
        // Each axis of the closed form should agree, exactly and including
        // phase, with the corresponding CX-conjugated rotation circuit.
        let (a, b, c) = (0.37, -0.62, 1.13);
        let mut xx = Circuit::new(2, 0);
        xx.cx(0, 1).unwrap();
        xx.rx(-2.0 * a, 0).unwrap();
        xx.cx(0, 1).unwrap();
        assert!(max_abs_diff(&circuit_to_unitary(&xx).unwrap(), &interaction_matrix(a, 0.0, 0.0)) < 1e-12);

        let mut yy = Circuit::new(2, 0);
        yy.sdg(0).unwrap();
        yy.sdg(1).unwrap();
        yy.cx(0, 1).unwrap();
        yy.rx(-2.0 * b, 0).unwrap();
        yy.cx(0, 1).unwrap();
        yy.s(0).unwrap();
        yy.s(1).unwrap();
        assert!(max_abs_diff(&circuit_to_unitary(&yy).unwrap(), &interaction_matrix(0.0, b, 0.0)) < 1e-12);

        let mut zz = Circuit::new(2, 0);
        zz.cx(0, 1).unwrap();
        zz.rz(-2.0 * c, 1).unwrap();
        zz.cx(0, 1).unwrap();
        assert!(max_abs_diff(&circuit_to_unitary(&zz).unwrap(), &interaction_matrix(0.0, 0.0, c)) < 1e-12);

        let product = circuit_to_unitary(&xx)
            .unwrap()
            .dot(&circuit_to_unitary(&yy).unwrap())
            .dot(&circuit_to_unitary(&zz).unwrap());
        assert!(max_abs_diff(&product, &interaction_matrix(a, b, c)) < 1e-12);
    }

    #[test]
    fn decomposition_reconstructs_known_gates() {
        let corpus = vec![
            StandardGate::CX.matrix(&[]),
            StandardGate::CZ.matrix(&[]),
            StandardGate::Swap.matrix(&[]),
            StandardGate::ECR.matrix(&[]),
            StandardGate::RZZ.matrix(&[0.7]),
            StandardGate::RZX.matrix(&[1.3]),
            kron2(
                &StandardGate::RX.matrix(&[0.4]),
                &StandardGate::RY.matrix(&[1.2]),
            ),
        ];
        for u in corpus {
            let w = weyl(&u).expect("decomposition succeeds");
            assert!(w.a <= FRAC_PI_4 + 1e-9, "a out of chamber: {}", w.a);
            assert!(w.b <= w.a + 1e-9, "b out of order: {} > {}", w.b, w.a);
            assert!(w.c.abs() <= w.b + 1e-9, "c out of order: {} > {}", w.c, w.b);
            let rebuilt = kron2(&w.k1l, &w.k1r)
                .dot(&interaction_matrix(w.a, w.b, w.c))
                .dot(&kron2(&w.k2l, &w.k2r))
                .mapv(|z| z * C::from_polar(1.0, w.phase));
            assert!(
                max_abs_diff(&rebuilt, &u) < 1e-9,
                "reconstruction off by {}",
                max_abs_diff(&rebuilt, &u)
            );
        }
    }

    #[test]
    fn canonical_coordinates_match_known_classes() {
        let cases: Vec<(Array2<C>, [f64; 3])> = vec![
            (StandardGate::CX.matrix(&[]), [FRAC_PI_4, 0.0, 0.0]),
            (StandardGate::CZ.matrix(&[]), [FRAC_PI_4, 0.0, 0.0]),
            (StandardGate::ECR.matrix(&[]), [FRAC_PI_4, 0.0, 0.0]),
            (StandardGate::RZZ.matrix(&[0.7]), [0.35, 0.0, 0.0]),
            (
                interaction_matrix(0.3, 0.2, 0.1),
                [0.3, 0.2, 0.1],
            ),
        ];
        for (u, want) in cases {
            let w = weyl(&u).expect("decomposition succeeds");
            assert!(
                (w.a - want[0]).abs() < 1e-9
                    && (w.b - want[1]).abs() < 1e-9
                    && (w.c - want[2]).abs() < 1e-9,
                "got ({}, {}, {}), want {:?}",
                w.a,
                w.b,
                w.c,
                want
            );
        }
        let swap = weyl(&StandardGate::Swap.matrix(&[])).expect("decomposition succeeds");
        assert!((swap.a - FRAC_PI_4).abs() < 1e-9);
        assert!((swap.b - FRAC_PI_4).abs() < 1e-9);
        assert!((swap.c.abs() - FRAC_PI_4).abs() < 1e-9);
    }

    #[test]
    fn decomposition_matches_interaction_closed_form() {
        for (a, b, c) in [
            (0.3, 0.2, 0.1),
            (FRAC_PI_4, FRAC_PI_4, FRAC_PI_4),
            (1.1, 0.0, -0.4),
            (0.0, 0.9, 0.0),
            (-0.8, 0.5, 0.25),
        ] {
            let u = interaction_matrix(a, b, c);
            let (insts, twoq) = resynthesize(&u).expect("resynthesis succeeds");
            assert!(twoq <= 3);
            let mut circ = Circuit::new(2, 0);
            for inst in insts {
                circ.append(inst).unwrap();
            }
            let m = circuit_to_unitary(&circ).unwrap();
            assert!(phase_aligned_distance(&m, &u) < 1e-8);
        }
    }

    #[test]
    fn basis_uses_follow_class() {
        let local = kron2(
            &StandardGate::RX.matrix(&[0.4]),
            &StandardGate::RY.matrix(&[1.2]),
        );
        assert_eq!(resynthesize(&local).expect("local").1, 0);
        assert_eq!(
            resynthesize(&StandardGate::ECR.matrix(&[])).expect("one entangler").1,
            1
        );
        assert_eq!(
            resynthesize(&interaction_matrix(0.5, 0.3, 0.0)).expect("two entanglers").1,
            2
        );
        assert_eq!(
            resynthesize(&interaction_matrix(0.3, 0.2, 0.1)).expect("three entanglers").1,
            3
        );
    }

    #[test]
    fn product_split_recovers_factors() {
        let hi = StandardGate::RY.matrix(&[0.77]);
        let lo = StandardGate::RZ.matrix(&[-1.21]);
        let g = kron2(&hi, &lo);
        let (h, l, _phase) = product_split(&g).expect("split succeeds");
        assert!(phase_aligned_distance(&kron2(&h, &l), &g) < 1e-10);
        assert!(phase_aligned_distance(&h, &hi) < 1e-10);
        assert!(phase_aligned_distance(&l, &lo) < 1e-10);
    }

    #[test]
    fn dense_block_is_compressed() {
        let mut circ = Circuit::new(3, 0);
        circ.cz(0, 1).unwrap();
        circ.h(0).unwrap();
        circ.rzz(0.4, 0, 1).unwrap();
        circ.s(1).unwrap();
        circ.cx(0, 1).unwrap();
        circ.rx(0.3, 0).unwrap();
        circ.cx(1, 0).unwrap();
        circ.cz(0, 1).unwrap();
        let out = run_pass(&circ);
        assert!(twoq_count(&out) <= 3, "got {} two-qubit gates", twoq_count(&out));
        assert!(out
            .count_ops()
            .keys()
            .all(|name| ["rz", "sx", "cx"].contains(&name.as_str())));
        assert_equiv(&out, &circ);
    }

    #[test]
    fn swap_class_needs_three_entanglers() {
        let mut circ = Circuit::new(2, 0);
        circ.cx(0, 1).unwrap();
        circ.cx(1, 0).unwrap();
        circ.cx(0, 1).unwrap();
        circ.cz(0, 1).unwrap();
        circ.cz(0, 1).unwrap();
        let out = run_pass(&circ);
        assert_eq!(twoq_count(&out), 3);
        assert_equiv(&out, &circ);
    }

    #[test]
    fn single_axis_block_needs_two_entanglers() {
        let mut circ = Circuit::new(2, 0);
        circ.rzz(0.3, 0, 1).unwrap();
        circ.rzz(0.4, 0, 1).unwrap();
        circ.rzz(0.2, 0, 1).unwrap();
        circ.rzz(0.6, 0, 1).unwrap();
        let out = run_pass(&circ);
        assert!(twoq_count(&out) <= 2, "got {} two-qubit gates", twoq_count(&out));
        assert_equiv(&out, &circ);
    }

    #[test]
    fn cancelling_block_collapses_to_locals() {
        let mut circ = Circuit::new(2, 0);
        circ.cx(0, 1).unwrap();
        circ.cx(0, 1).unwrap();
        circ.cz(0, 1).unwrap();
        circ.cz(0, 1).unwrap();
        let out = run_pass(&circ);
        assert_eq!(twoq_count(&out), 0);
        assert_equiv(&out, &circ);
    }

    #[test]
    fn entangler_class_collapses_to_one_gate() {
        // The net unitary is X₀·CX: the cancelling pairs drop out and one
        // entangler remains.
        let mut circ = Circuit::new(2, 0);
        circ.cx(0, 1).unwrap();
        circ.x(0).unwrap();
        circ.cz(0, 1).unwrap();
        circ.cz(0, 1).unwrap();
        circ.cx(0, 1).unwrap();
        circ.cx(0, 1).unwrap();
        let out = run_pass(&circ);
        assert_eq!(twoq_count(&out), 1);
        assert_equiv(&out, &circ);
    }

    #[test]
    fn double_entangler_runs_shrink() {
        // Two alternating CX pairs compose to an iSWAP-like permutation,
        // whose class sits on a degenerate eigenvalue boundary.
        let mut circ = Circuit::new(2, 0);
        circ.cx(0, 1).unwrap();
        circ.cx(1, 0).unwrap();
        circ.cx(0, 1).unwrap();
        circ.cx(1, 0).unwrap();
        let out = run_pass(&circ);
        assert!(twoq_count(&out) <= 2, "got {} two-qubit gates", twoq_count(&out));
        assert_equiv(&out, &circ);
    }

    #[test]
    fn small_blocks_are_untouched() {
        let mut circ = Circuit::new(2, 0);
        circ.cx(0, 1).unwrap();
        circ.h(0).unwrap();
        circ.cx(0, 1).unwrap();
        let out = run_pass(&circ);
        assert_eq!(out, circ);
    }

    #[test]
    fn symbolic_parameters_disable_the_rewrite() {
        let theta = Parameter::new("t");
        let mut circ = Circuit::new(2, 0);
        circ.cx(0, 1).unwrap();
        circ.cx(0, 1).unwrap();
        circ.rz(theta, 0).unwrap();
        circ.cx(0, 1).unwrap();
        circ.cx(0, 1).unwrap();
        let out = run_pass(&circ);
        assert_eq!(out, circ);
    }
}
