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

//! Reading and writing circuits as OpenQASM 3 text.
//!
//! The dialect is the subset the rest of the toolkit produces and consumes:
//! register declarations, the standard gate set, measurement into bits,
//! `reset` and `init`, timed delays (`delay(4dt) q[0];`), barriers, and the
//! four control-flow forms (`if`/`else`, `switch`/`case`/`default`, ranged
//! `for` with an inclusive `[start:end]` range, and `while`).  Conditions are
//! built from single bits, whole registers, integer literals, comparisons,
//! the bitwise connectives (`&&`/`||` are read as `&`/`|`, which agree on the
//! 0/1 values conditions take here) and a `parity(...)` reduction; a bundle
//! of bits that is not a whole register prints as `bits(...)`.  Free
//! parameters are declared with `input float` and appear in gate angles as
//! affine expressions such as `2e0*theta - 1e0`.  A bare `barrier;` fences
//! every declared qubit.
//!
//! Emission is canonical: a circuit always renders to the same bytes, angles
//! print with seventeen significant digits so every `f64` survives the trip
//! through text, and `parse` of an emitted circuit reproduces the original
//! structure exactly.  The `OPENQASM 3;` header is always written and is
//! optional when reading.

mod emit;
mod lex;
mod parse;

use thiserror::Error;

pub use emit::{emit, emit_with_params};
pub use parse::parse;

/// Failures while reading or writing circuit text.
#[derive(Clone, Debug, PartialEq, Error)]
pub enum QasmError {
    /// The text does not fit the grammar; positions are 1-based.
    #[error("line {line}, column {column}: {message}")]
    Parse {
        line: u32,
        column: u32,
        message: String,
    },
    /// The text uses a language feature outside the supported subset.
    #[error("line {line}, column {column}: unsupported construct: {construct}")]
    Unsupported {
        line: u32,
        column: u32,
        construct: String,
    },
    /// The circuit contains something with no text form.
    #[error("cannot express in text: {0}")]
    Unrepresentable(String),
    /// `emit` requires every parameter bound; see `emit_with_params`.
    #[error("parameter `{0}` is unbound")]
    UnboundParameter(String),
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::library;
    use crate::circuit::{
        BinOp, Circuit, ClassicalExpr, Instruction, OpKind, ParamValue, Parameter, StandardGate,
    };
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn or(lhs: ClassicalExpr, rhs: ClassicalExpr) -> ClassicalExpr {
        ClassicalExpr::binary(BinOp::Or, lhs, rhs)
    }

    #[test]
    fn gate_measure_and_delay_statements_parse() {
        let circuit = parse(
            "OPENQASM 3;\n\
             qubit[2] q;\n\
             bit[2] c;\n\
             rz(0.5) q[0];\n\
             sx q[1];\n\
             cz q[0], q[1];\n\
             delay(4dt) q[0];\n\
             c[0] = measure q[0];\n",
        )
        .unwrap();
        assert_eq!(circuit.num_qubits(), 2);
        assert_eq!(circuit.num_clbits(), 2);
        let insts = circuit.instructions();
        assert_eq!(insts[0].op, OpKind::Gate(StandardGate::RZ));
        assert_eq!(insts[0].params, vec![ParamValue::Real(0.5)]);
        assert_eq!(insts[2].qubits, vec![0, 1]);
        assert_eq!(insts[3].delay_dt(), Some(4));
        assert_eq!(insts[4].op, OpKind::Measure);
        assert_eq!((insts[4].qubits[0], insts[4].clbits[0]), (0, 0));
    }

    #[test]
    fn control_flow_statements_parse() {
        let circuit = parse(
            "qubit[2] q;\n\
             bit[2] c;\n\
             if (c[0] || c[1] == 1) {\n\
               x q[1];\n\
             }\n\
             switch (c) {\n\
               case 0 {\n\
               }\n\
               case 1, 2 {\n\
                 x q[0];\n\
               }\n\
               default {\n\
                 sx q[0];\n\
               }\n\
             }\n\
             for i in [0:3] {\n\
               sx q[0];\n\
             }\n\
             for j in [-2:-1] {\n\
             }\n\
             while (c[0]) {\n\
               reset q[0];\n\
             }\n",
        )
        .unwrap();
        let insts = circuit.instructions();
        assert_eq!(
            insts[0].condition,
            Some(or(
                ClassicalExpr::bit(0),
                ClassicalExpr::equals(ClassicalExpr::bit(1), 1)
            ))
        );
        assert_eq!(insts[1].op, OpKind::Switch);
        assert_eq!(insts[1].condition, Some(ClassicalExpr::Bits(vec![0, 1])));
        assert_eq!(insts[1].case_values, vec![vec![0], vec![1, 2]]);
        assert!(insts[1].has_default);
        assert_eq!(insts[1].blocks.len(), 3);
        assert_eq!(
            insts[2].op,
            OpKind::ForLoop {
                var: "i".into(),
                start: 0,
                count: 4
            }
        );
        assert_eq!(
            insts[3].op,
            OpKind::ForLoop {
                var: "j".into(),
                start: -2,
                count: 2
            }
        );
        assert_eq!(insts[4].op, OpKind::While);
    }

    #[test]
    fn header_is_optional_and_bare_barrier_covers_all_qubits() {
        let circuit = parse("qubit[3] q;\nbarrier;\ninit q[2];\n").unwrap();
        assert_eq!(circuit.instructions()[0].op, OpKind::Barrier);
        assert_eq!(circuit.instructions()[0].qubits, vec![0, 1, 2]);
        assert_eq!(circuit.instructions()[1].op, OpKind::Init);
    }

    #[test]
    fn unknown_operations_error_with_their_position() {
        let err = parse("qubit[2] q;\nxx q[0];\n").unwrap_err();
        assert_eq!(
            err,
            QasmError::Parse {
                line: 2,
                column: 1,
                message: "unknown operation `xx`".into()
            }
        );
    }

    #[test]
    fn out_of_range_operands_are_rejected() {
        let err = parse("qubit[2] q;\nx q[5];\n").unwrap_err();
        let QasmError::Parse { line, message, .. } = err else {
            panic!("expected a parse error, got {err:?}");
        };
        assert_eq!(line, 2);
        assert!(message.contains("no qubit `q[5]`"), "{message}");
    }

    #[test]
    fn wrong_language_version_is_unsupported() {
        let err = parse("OPENQASM 2;\nqubit[1] q;\n").unwrap_err();
        assert_eq!(
            err,
            QasmError::Unsupported {
                line: 1,
                column: 10,
                construct: "language version 2".into()
            }
        );
    }

    #[test]
    fn gate_definitions_are_unsupported() {
        let err = parse("qubit[1] q;\ngate foo a { }\n").unwrap_err();
        assert!(matches!(err, QasmError::Unsupported { line: 2, .. }), "{err:?}");
    }

    #[test]
    fn emitted_text_has_a_stable_canonical_shape() {
        let mut c = Circuit::new(3, 2);
        c.h(0).unwrap();
        c.cx(0, 1).unwrap();
        c.rz(0.5, 2).unwrap();
        c.delay(4, 2).unwrap();
        c.barrier(&[0, 2]).unwrap();
        c.measure(0, 0).unwrap();
        c.measure(1, 1).unwrap();
        let mut then = c.empty_like();
        then.x(2).unwrap();
        let mut otherwise = c.empty_like();
        otherwise.z(2).unwrap();
        c.if_else(
            or(
                ClassicalExpr::bit(0),
                ClassicalExpr::equals(ClassicalExpr::bit(1), 1),
            ),
            then,
            otherwise,
        )
        .unwrap();
        let mut hit = c.empty_like();
        hit.sx(0).unwrap();
        c.switch(
            ClassicalExpr::Bits(vec![0, 1]),
            vec![(vec![0], c.empty_like()), (vec![1, 2], hit)],
            Some(c.empty_like()),
        )
        .unwrap();
        let mut body = c.empty_like();
        body.rx(-0.25, 1).unwrap();
        c.for_loop("i", 0, 3, body).unwrap();
        let mut wait = c.empty_like();
        wait.reset(2).unwrap();
        c.while_loop(ClassicalExpr::bit(0), wait).unwrap();

        let expected = "\
OPENQASM 3;
qubit[3] q;
bit[2] c;
h q[0];
cx q[0], q[1];
rz(5.0000000000000000e-1) q[2];
delay(4dt) q[2];
barrier q[0], q[2];
c[0] = measure q[0];
c[1] = measure q[1];
if (c[0] | (c[1] == 1)) {
  x q[2];
} else {
  z q[2];
}
switch (c) {
  case 0 {
  }
  case 1, 2 {
    sx q[0];
  }
  default {
  }
}
for i in [0:2] {
  rx(-2.5000000000000000e-1) q[1];
}
while (c[0]) {
  reset q[2];
}
";
        let text = emit(&c).unwrap();
        assert_eq!(text, expected);
        assert_eq!(parse(&text).unwrap(), c);
        assert_eq!(emit(&parse(&text).unwrap()).unwrap(), text);
    }

    #[test]
    fn library_circuits_round_trip() {
        for circuit in [library::ghz(5), library::qft(4)] {
            let text = emit(&circuit).unwrap();
            assert_eq!(parse(&text).unwrap(), circuit, "{text}");
        }
    }

    #[test]
    fn angles_survive_the_trip_bit_for_bit() {
        let values = [
            0.1 + 0.2,
            std::f64::consts::PI,
            -std::f64::consts::FRAC_PI_3,
            1e-300,
            5e-324,
            -0.0,
            1234567.890123456,
        ];
        let mut c = Circuit::new(1, 0);
        for &v in &values {
            c.rz(v, 0).unwrap();
        }
        let parsed = parse(&emit(&c).unwrap()).unwrap();
        for (inst, &v) in parsed.instructions().iter().zip(&values) {
            let ParamValue::Real(got) = inst.params[0] else {
                panic!("angle came back symbolic");
            };
            assert_eq!(got.to_bits(), v.to_bits(), "{v:e} came back as {got:e}");
        }
    }

    #[test]
    fn unbound_parameters_are_rejected_by_emit() {
        let theta = Parameter::new("theta");
        let mut c = Circuit::new(1, 0);
        c.rz(theta, 0).unwrap();
        assert_eq!(emit(&c), Err(QasmError::UnboundParameter("theta".into())));
    }

    #[test]
    fn symbolic_angles_round_trip_through_input_declarations() {
        let theta = Parameter::new("theta");
        let phi = Parameter::new("phi");
        let mut c = Circuit::new(2, 0);
        c.rz(theta.clone(), 0).unwrap();
        c.rx(theta.scaled(2.0, -0.5), 1).unwrap();
        c.ry(phi.scaled(-1.0, 0.25), 0).unwrap();
        c.rzz(0.75, 0, 1).unwrap();
        let text = emit_with_params(&c).unwrap();
        assert!(text.contains("input float phi;\n"), "{text}");
        assert!(text.contains("input float theta;\n"), "{text}");
        let parsed = parse(&text).unwrap();
        assert_eq!(parsed, c, "{text}");
        assert_eq!(emit_with_params(&parsed).unwrap(), text);
    }

    #[test]
    fn bit_bundles_and_parity_conditions_round_trip() {
        let mut c = Circuit::new(2, 3);
        let mut flip = c.empty_like();
        flip.x(0).unwrap();
        c.if_test(
            ClassicalExpr::equals(ClassicalExpr::Bits(vec![2, 0]), 3),
            flip,
        )
        .unwrap();
        let mut flip = c.empty_like();
        flip.z(1).unwrap();
        c.if_test(
            ClassicalExpr::XorReduce(Box::new(ClassicalExpr::Bits(vec![0, 1, 2]))),
            flip,
        )
        .unwrap();
        let text = emit(&c).unwrap();
        assert!(text.contains("bits(c[2], c[0])"), "{text}");
        assert!(text.contains("parity(c)"), "{text}");
        assert_eq!(parse(&text).unwrap(), c);
    }

    fn random_condition(rng: &mut ChaCha8Rng) -> ClassicalExpr {
        match rng.gen_range(0..5) {
            0 => ClassicalExpr::bit(rng.gen_range(0..3)),
            1 => ClassicalExpr::equals(ClassicalExpr::Bits(vec![0, 1]), rng.gen_range(0..4)),
            2 => ClassicalExpr::binary(
                BinOp::And,
                ClassicalExpr::bit(rng.gen_range(0..3)),
                ClassicalExpr::bit(rng.gen_range(0..3)),
            ),
            3 => ClassicalExpr::XorReduce(Box::new(ClassicalExpr::Bits(vec![0, 2]))),
            _ => ClassicalExpr::binary(
                BinOp::Ge,
                ClassicalExpr::Bits(vec![1, 2]),
                ClassicalExpr::Int(rng.gen_range(0..4)),
            ),
        }
    }

    fn random_block(rng: &mut ChaCha8Rng, shape: &Circuit, depth: u32) -> Circuit {
        let mut block = shape.empty_like();
        for _ in 0..rng.gen_range(0..4) {
            random_statement(rng, &mut block, depth);
        }
        block
    }

    fn random_statement(rng: &mut ChaCha8Rng, out: &mut Circuit, depth: u32) {
        let top = if depth > 0 { 11 } else { 10 };
        match rng.gen_range(0..top) {
            0..=5 => {
                let gate = StandardGate::ALL[rng.gen_range(0..StandardGate::ALL.len())];
                let params: Vec<ParamValue> = (0..gate.num_params())
                    .map(|_| ParamValue::Real(rng.gen_range(-3.2..3.2)))
                    .collect();
                let q0 = rng.gen_range(0..4);
                let qubits = if gate.num_qubits() == 2 {
                    vec![q0, (q0 + rng.gen_range(1..4)) % 4]
                } else {
                    vec![q0]
                };
                out.append(Instruction::gate(gate, params, qubits)).unwrap();
            }
            6 => out
                .measure(rng.gen_range(0..4), rng.gen_range(0..3))
                .unwrap(),
            7 => out.delay(rng.gen_range(0..100), rng.gen_range(0..4)).unwrap(),
            8 => {
                let qubits: Vec<u32> = (0..4).filter(|_| rng.gen_bool(0.5)).collect();
                if qubits.is_empty() {
                    out.barrier_all().unwrap();
                } else {
                    out.barrier(&qubits).unwrap();
                }
            }
            9 => {
                if rng.gen_bool(0.5) {
                    out.reset(rng.gen_range(0..4)).unwrap();
                } else {
                    out.init(rng.gen_range(0..4)).unwrap();
                }
            }
            _ => {
                let cond = random_condition(rng);
                match rng.gen_range(0..5) {
                    0 => {
                        let then = random_block(rng, out, depth - 1);
                        out.if_test(cond, then).unwrap();
                    }
                    1 => {
                        let then = random_block(rng, out, depth - 1);
                        let otherwise = random_block(rng, out, depth - 1);
                        out.if_else(cond, then, otherwise).unwrap();
                    }
                    2 => {
                        let boundary = rng.gen_range(1..4);
                        let mut cases = vec![(
                            (0..boundary).collect::<Vec<u64>>(),
                            random_block(rng, out, depth - 1),
                        )];
                        if rng.gen_bool(0.7) {
                            cases.push((
                                (boundary..4).collect(),
                                random_block(rng, out, depth - 1),
                            ));
                        }
                        let default = rng
                            .gen_bool(0.5)
                            .then(|| random_block(rng, out, depth - 1));
                        out.switch(ClassicalExpr::Bits(vec![0, 1]), cases, default)
                            .unwrap();
                    }
                    3 => {
                        let body = random_block(rng, out, depth - 1);
                        out.for_loop("i", rng.gen_range(-2..3), rng.gen_range(0..4), body)
                            .unwrap();
                    }
                    _ => {
                        let body = random_block(rng, out, depth - 1);
                        out.while_loop(cond, body).unwrap();
                    }
                }
            }
        }
    }

    #[test]
    fn random_circuits_round_trip_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(90210);
        for _ in 0..60 {
            let mut circuit = Circuit::new(4, 3);
            for _ in 0..rng.gen_range(1..12) {
                random_statement(&mut rng, &mut circuit, 2);
            }
            let text = emit(&circuit).unwrap();
            let parsed = parse(&text).unwrap();
            assert_eq!(parsed, circuit, "emitted text:\n{text}");
            assert_eq!(emit(&parsed).unwrap(), text);
        }
    }
}
