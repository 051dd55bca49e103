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

//! Recursive-descent parser producing [`Circuit`] values.

use super::lex::{tokenize, Tok, Token};
use super::QasmError;
use crate::circuit::{
    Circuit, CircuitError, ClassicalExpr, Instruction, ParamValue, Parameter, StandardGate,
};
use std::collections::BTreeMap;

/// Parse a source text.  The `OPENQASM 3;` header is optional; declarations
/// must precede all statements.
pub fn parse(text: &str) -> Result<Circuit, QasmError> {
    let tokens = tokenize(text)?;
    Parser::new(&tokens).program()
}

struct Parser<'t> {
    tokens: &'t [Token],
    pos: usize,
    params: BTreeMap<String, Parameter>,
}

impl<'t> Parser<'t> {
    fn new(tokens: &'t [Token]) -> Self {
        Parser {
            tokens,
            pos: 0,
            params: BTreeMap::new(),
        }
    }

    fn peek(&self) -> &Tok {
        &self.tokens[self.pos].tok
    }

    fn peek_at(&self, ahead: usize) -> &Tok {
        let idx = (self.pos + ahead).min(self.tokens.len() - 1);
        &self.tokens[idx].tok
    }

    fn here(&self) -> (u32, u32) {
        let t = &self.tokens[self.pos];
        (t.line, t.column)
    }

    fn bump(&mut self) -> Tok {
        let tok = self.tokens[self.pos].tok.clone();
        if self.pos + 1 < self.tokens.len() {
            self.pos += 1;
        }
        tok
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T, QasmError> {
        let (line, column) = self.here();
        Err(QasmError::Parse {
            line,
            column,
            message: message.into(),
        })
    }

    fn expect(&mut self, want: Tok) -> Result<(), QasmError> {
        if *self.peek() == want {
            self.bump();
            Ok(())
        } else {
            self.fail(format!("expected {want}, found {}", self.peek()))
        }
    }

    fn expect_ident(&mut self, what: &str) -> Result<String, QasmError> {
        match self.peek().clone() {
            Tok::Ident(name) => {
                self.bump();
                Ok(name)
            }
            other => self.fail(format!("expected {what}, found {other}")),
        }
    }

    fn expect_int(&mut self, what: &str) -> Result<u64, QasmError> {
        match *self.peek() {
            Tok::Int(v) => {
                self.bump();
                Ok(v)
            }
            ref other => self.fail(format!("expected {what}, found {other}")),
        }
    }

    /// Rewrap a circuit-construction error with the current source position.
    fn at<T>(&self, spot: (u32, u32), result: Result<T, CircuitError>) -> Result<T, QasmError> {
        result.map_err(|err| QasmError::Parse {
            line: spot.0,
            column: spot.1,
            message: err.to_string(),
        })
    }

    fn program(&mut self) -> Result<Circuit, QasmError> {
        if *self.peek() == Tok::Ident("OPENQASM".into()) {
            self.bump();
            let spot = self.here();
            let major = match self.bump() {
                Tok::Int(v) => v,
                Tok::Float(v) => v.trunc() as u64,
                other => {
                    return Err(QasmError::Parse {
                        line: spot.0,
                        column: spot.1,
                        message: format!("expected version number, found {other}"),
                    })
                }
            };
            if major != 3 {
                return Err(QasmError::Unsupported {
                    line: spot.0,
                    column: spot.1,
                    construct: format!("language version {major}"),
                });
            }
            self.expect(Tok::Semi)?;
        }
        let mut qregs = Vec::new();
        let mut cregs = Vec::new();
        loop {
            match self.peek() {
                Tok::Ident(name) if name == "qubit" || name == "bit" => {
                    let quantum = name == "qubit";
                    self.bump();
                    let size = if *self.peek() == Tok::LBracket {
                        self.bump();
                        let size = self.expect_int("register size")?;
                        self.expect(Tok::RBracket)?;
                        size
                    } else {
                        1
                    };
                    let reg = self.expect_ident("register name")?;
                    self.expect(Tok::Semi)?;
                    let Ok(size) = u32::try_from(size) else {
                        return self.fail("register size out of range");
                    };
                    if quantum {
                        qregs.push((reg, size));
                    } else {
                        cregs.push((reg, size));
                    }
                }
                Tok::Ident(name) if name == "input" => {
                    self.bump();
                    let kind = self.expect_ident("parameter type")?;
                    if kind != "float" {
                        return self.fail(format!("unsupported input type `{kind}`"));
                    }
                    if *self.peek() == Tok::LBracket {
                        self.bump();
                        self.expect_int("float width")?;
                        self.expect(Tok::RBracket)?;
                    }
                    let name = self.expect_ident("parameter name")?;
                    self.expect(Tok::Semi)?;
                    self.params.insert(name.clone(), Parameter::new(name));
                }
                _ => break,
            }
        }
        let spot = self.here();
        let mut circuit = self.at(spot, Circuit::with_registers(qregs, cregs))?;
        while *self.peek() != Tok::Eof {
            self.statement_into(&mut circuit)?;
        }
        Ok(circuit)
    }

    /// Parse a `{ ... }` block as a circuit over the same registers.
    fn block(&mut self, shape: &Circuit) -> Result<Circuit, QasmError> {
        self.expect(Tok::LBrace)?;
        let mut block = shape.empty_like();
        while *self.peek() != Tok::RBrace {
            if *self.peek() == Tok::Eof {
                return self.fail("unclosed block");
            }
            self.statement_into(&mut block)?;
        }
        self.bump();
        Ok(block)
    }

    fn statement_into(&mut self, out: &mut Circuit) -> Result<(), QasmError> {
        let spot = self.here();
        let head = match self.peek().clone() {
            Tok::Ident(name) => name,
            other => return self.fail(format!("expected a statement, found {other}")),
        };
        match head.as_str() {
            "if" => {
                self.bump();
                self.expect(Tok::LParen)?;
                let cond = self.expr(out)?;
                self.expect(Tok::RParen)?;
                let then = self.block(out)?;
                if *self.peek() == Tok::Ident("else".into()) {
                    self.bump();
                    let otherwise = self.block(out)?;
                    self.at(spot, out.if_else(cond, then, otherwise))
                } else {
                    self.at(spot, out.if_test(cond, then))
                }
            }
            "while" => {
                self.bump();
                self.expect(Tok::LParen)?;
                let cond = self.expr(out)?;
                self.expect(Tok::RParen)?;
                let body = self.block(out)?;
                self.at(spot, out.while_loop(cond, body))
            }
            "for" => {
                self.bump();
                let var = self.expect_ident("loop variable")?;
                let in_kw = self.expect_ident("`in`")?;
                if in_kw != "in" {
                    return self.fail(format!("expected `in`, found `{in_kw}`"));
                }
                self.expect(Tok::LBracket)?;
                let start = self.signed_int()?;
                self.expect(Tok::Colon)?;
                let end = self.signed_int()?;
                self.expect(Tok::RBracket)?;
                let count = if end >= start {
                    (end - start + 1) as u64
                } else {
                    0
                };
                let body = self.block(out)?;
                self.at(spot, out.for_loop(var, start, count, body))
            }
            "switch" => {
                self.bump();
                self.expect(Tok::LParen)?;
                let scrutinee = self.expr(out)?;
                self.expect(Tok::RParen)?;
                self.expect(Tok::LBrace)?;
                let mut cases = Vec::new();
                let mut default = None;
                loop {
                    match self.peek().clone() {
                        Tok::Ident(kw) if kw == "case" => {
                            if default.is_some() {
                                return self.fail("`default` must be the last arm");
                            }
                            self.bump();
                            let mut values = vec![self.expect_int("case value")?];
                            while *self.peek() == Tok::Comma {
                                self.bump();
                                values.push(self.expect_int("case value")?);
                            }
                            cases.push((values, self.block(out)?));
                        }
                        Tok::Ident(kw) if kw == "default" => {
                            if default.is_some() {
                                return self.fail("duplicate `default` arm");
                            }
                            self.bump();
                            default = Some(self.block(out)?);
                        }
                        Tok::RBrace => {
                            self.bump();
                            break;
                        }
                        other => {
                            return self.fail(format!(
                                "expected `case`, `default` or `}}`, found {other}"
                            ))
                        }
                    }
                }
                self.at(spot, out.switch(scrutinee, cases, default))
            }
            "barrier" => {
                self.bump();
                let mut qubits = Vec::new();
                if *self.peek() != Tok::Semi {
                    qubits.push(self.qubit_operand(out)?);
                    while *self.peek() == Tok::Comma {
                        self.bump();
                        qubits.push(self.qubit_operand(out)?);
                    }
                }
                self.expect(Tok::Semi)?;
                if qubits.is_empty() {
                    // A bare `barrier;` fences every qubit in scope.
                    self.at(spot, out.barrier_all())
                } else {
                    self.at(spot, out.barrier(&qubits))
                }
            }
            "delay" => {
                self.bump();
                self.expect(Tok::LParen)?;
                let duration = self.expect_int("duration in `dt` units")?;
                let unit = self.expect_ident("`dt`")?;
                if unit != "dt" {
                    return self.fail(format!("unsupported duration unit `{unit}`"));
                }
                self.expect(Tok::RParen)?;
                let qubit = self.qubit_operand(out)?;
                self.expect(Tok::Semi)?;
                self.at(spot, out.delay(duration, qubit))
            }
            "reset" => {
                self.bump();
                let qubit = self.qubit_operand(out)?;
                self.expect(Tok::Semi)?;
                self.at(spot, out.reset(qubit))
            }
            "init" => {
                self.bump();
                let qubit = self.qubit_operand(out)?;
                self.expect(Tok::Semi)?;
                self.at(spot, out.init(qubit))
            }
            "measure" => self.fail("measurement must assign to a bit, as in `c[0] = measure q[0];`"),
            "gate" | "def" | "cal" | "defcal" | "gphase" | "pragma" | "include" | "extern" => {
                Err(QasmError::Unsupported {
                    line: spot.0,
                    column: spot.1,
                    construct: format!("`{head}` statement"),
                })
            }
            _ if *self.peek_at(1) == Tok::LBracket => {
                // `c[i] = measure q[j];`
                self.bump();
                self.expect(Tok::LBracket)?;
                let offset = self.expect_int("bit index")?;
                self.expect(Tok::RBracket)?;
                let clbit = self.clbit_ref(out, &head, offset)?;
                self.expect(Tok::Assign)?;
                let kw = self.expect_ident("`measure`")?;
                if kw != "measure" {
                    return self.fail(format!("expected `measure`, found `{kw}`"));
                }
                let qubit = self.qubit_operand(out)?;
                self.expect(Tok::Semi)?;
                self.at(spot, out.measure(qubit, clbit))
            }
            _ => {
                let Some(gate) = StandardGate::from_name(&head) else {
                    return self.fail(format!("unknown operation `{head}`"));
                };
                self.bump();
                let mut angles: Vec<ParamValue> = Vec::new();
                if *self.peek() == Tok::LParen {
                    self.bump();
                    if *self.peek() != Tok::RParen {
                        angles.push(self.angle()?);
                        while *self.peek() == Tok::Comma {
                            self.bump();
                            angles.push(self.angle()?);
                        }
                    }
                    self.expect(Tok::RParen)?;
                }
                let mut qubits = vec![self.qubit_operand(out)?];
                while *self.peek() == Tok::Comma {
                    self.bump();
                    qubits.push(self.qubit_operand(out)?);
                }
                self.expect(Tok::Semi)?;
                self.at(spot, out.append(Instruction::gate(gate, angles, qubits)))
            }
        }
    }

    fn signed_int(&mut self) -> Result<i64, QasmError> {
        let negative = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        let magnitude = self.expect_int("an integer")?;
        let Ok(magnitude) = i64::try_from(magnitude) else {
            return self.fail("integer out of range");
        };
        Ok(if negative { -magnitude } else { magnitude })
    }

    fn qubit_operand(&mut self, shape: &Circuit) -> Result<u32, QasmError> {
        let name = self.expect_ident("a qubit operand")?;
        self.expect(Tok::LBracket)?;
        let offset = self.expect_int("qubit index")?;
        self.expect(Tok::RBracket)?;
        let Ok(offset) = u32::try_from(offset) else {
            return self.fail("qubit index out of range");
        };
        match shape.qubit_index(&name, offset) {
            Some(q) => Ok(q),
            None => self.fail(format!("no qubit `{name}[{offset}]`")),
        }
    }

    fn clbit_ref(&mut self, shape: &Circuit, name: &str, offset: u64) -> Result<u32, QasmError> {
        let Ok(offset) = u32::try_from(offset) else {
            return self.fail("bit index out of range");
        };
        match shape.clbit_index(name, offset) {
            Some(c) => Ok(c),
            None => self.fail(format!("no bit `{name}[{offset}]`")),
        }
    }

    /// A gate angle: a literal, or an affine form of one declared parameter
    /// such as `theta`, `2e0*theta` or `theta - 1.5e0`.
    fn angle(&mut self) -> Result<ParamValue, QasmError> {
        let negative = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        let sign = if negative { -1.0 } else { 1.0 };
        match self.peek().clone() {
            Tok::Int(v) => {
                self.bump();
                let value = sign * v as f64;
                if *self.peek() == Tok::Star {
                    self.bump();
                    self.scaled_parameter(value)
                } else {
                    Ok(ParamValue::Real(value))
                }
            }
            Tok::Float(v) => {
                self.bump();
                let value = sign * v;
                if *self.peek() == Tok::Star {
                    self.bump();
                    self.scaled_parameter(value)
                } else {
                    Ok(ParamValue::Real(value))
                }
            }
            Tok::Ident(_) => self.scaled_parameter(sign),
            other => self.fail(format!("expected an angle, found {other}")),
        }
    }

    fn scaled_parameter(&mut self, scale: f64) -> Result<ParamValue, QasmError> {
        let name = self.expect_ident("a parameter name")?;
        let Some(parameter) = self.params.get(&name).cloned() else {
            return self.fail(format!("parameter `{name}` is not declared as an input"));
        };
        let mut offset = 0.0;
        let offset_sign = match *self.peek() {
            Tok::Plus => Some(1.0),
            Tok::Minus => Some(-1.0),
            _ => None,
        };
        if let Some(s) = offset_sign {
            self.bump();
            offset = s * match self.peek().clone() {
                Tok::Int(v) => {
                    self.bump();
                    v as f64
                }
                Tok::Float(v) => {
                    self.bump();
                    v
                }
                other => return self.fail(format!("expected a number, found {other}")),
            };
        }
        Ok(ParamValue::Expr(parameter.scaled(scale, offset)))
    }

    /// Classical expression with precedence `|` < `^` < `&` < comparisons.
    fn expr(&mut self, shape: &Circuit) -> Result<ClassicalExpr, QasmError> {
        let mut lhs = self.xor_expr(shape)?;
        while *self.peek() == Tok::Pipe {
            self.bump();
            let rhs = self.xor_expr(shape)?;
            lhs = ClassicalExpr::binary(crate::circuit::BinOp::Or, lhs, rhs);
        }
        Ok(lhs)
    }

    fn xor_expr(&mut self, shape: &Circuit) -> Result<ClassicalExpr, QasmError> {
        let mut lhs = self.and_expr(shape)?;
        while *self.peek() == Tok::Caret {
            self.bump();
            let rhs = self.and_expr(shape)?;
            lhs = ClassicalExpr::binary(crate::circuit::BinOp::Xor, lhs, rhs);
        }
        Ok(lhs)
    }

    fn and_expr(&mut self, shape: &Circuit) -> Result<ClassicalExpr, QasmError> {
        let mut lhs = self.cmp_expr(shape)?;
        while *self.peek() == Tok::Amp {
            self.bump();
            let rhs = self.cmp_expr(shape)?;
            lhs = ClassicalExpr::binary(crate::circuit::BinOp::And, lhs, rhs);
        }
        Ok(lhs)
    }

    fn cmp_expr(&mut self, shape: &Circuit) -> Result<ClassicalExpr, QasmError> {
        use crate::circuit::BinOp;
        let lhs = self.primary_expr(shape)?;
        let op = match *self.peek() {
            Tok::EqEq => BinOp::Eq,
            Tok::NotEq => BinOp::Ne,
            Tok::GreaterEq => BinOp::Ge,
            Tok::LessEq => BinOp::Le,
            Tok::Greater => BinOp::Gt,
            Tok::Less => BinOp::Lt,
            _ => return Ok(lhs),
        };
        self.bump();
        let rhs = self.primary_expr(shape)?;
        Ok(ClassicalExpr::binary(op, lhs, rhs))
    }

    fn primary_expr(&mut self, shape: &Circuit) -> Result<ClassicalExpr, QasmError> {
        match self.peek().clone() {
            Tok::LParen => {
                self.bump();
                let inner = self.expr(shape)?;
                self.expect(Tok::RParen)?;
                Ok(inner)
            }
            Tok::Int(v) => {
                self.bump();
                Ok(ClassicalExpr::Int(v))
            }
            Tok::Ident(name) if name == "parity" => {
                self.bump();
                self.expect(Tok::LParen)?;
                let inner = self.expr(shape)?;
                self.expect(Tok::RParen)?;
                Ok(ClassicalExpr::XorReduce(Box::new(inner)))
            }
            Tok::Ident(name) if name == "bits" => {
                self.bump();
                self.expect(Tok::LParen)?;
                let mut bits = Vec::new();
                loop {
                    let reg = self.expect_ident("a bit reference")?;
                    self.expect(Tok::LBracket)?;
                    let offset = self.expect_int("bit index")?;
                    self.expect(Tok::RBracket)?;
                    bits.push(self.clbit_ref(shape, &reg, offset)?);
                    if *self.peek() == Tok::Comma {
                        self.bump();
                    } else {
                        break;
                    }
                }
                self.expect(Tok::RParen)?;
                Ok(ClassicalExpr::Bits(bits))
            }
            Tok::Ident(name) => {
                self.bump();
                if *self.peek() == Tok::LBracket {
                    self.bump();
                    let offset = self.expect_int("bit index")?;
                    self.expect(Tok::RBracket)?;
                    Ok(ClassicalExpr::Bit(self.clbit_ref(shape, &name, offset)?))
                } else {
                    match shape.cregs().iter().find(|r| r.name == name) {
                        Some(reg) => Ok(ClassicalExpr::Bits(
                            (reg.start..reg.start + reg.size).collect(),
                        )),
                        None => self.fail(format!("no classical register `{name}`")),
                    }
                }
            }
            other => self.fail(format!("expected a classical expression, found {other}")),
        }
    }
}
