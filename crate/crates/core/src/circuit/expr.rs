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

//! Classical expressions over measurement bits.
//!
//! Expressions evaluate to unsigned integers; comparisons produce 0 or 1.
//! Bit bundles pack classical bits little-endian (entry 0 is the least
//! significant bit), matching how integers are read out of registers.

/// Binary operators usable in classical conditions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BinOp {
    Eq,
    Ne,
    Ge,
    Le,
    Gt,
    Lt,
    And,
    Or,
    Xor,
}

impl BinOp {
    pub fn symbol(&self) -> &'static str {
        match self {
            BinOp::Eq => "==",
            BinOp::Ne => "!=",
            BinOp::Ge => ">=",
            BinOp::Le => "<=",
            BinOp::Gt => ">",
            BinOp::Lt => "<",
            BinOp::And => "&",
            BinOp::Or => "|",
            BinOp::Xor => "^",
        }
    }
}

/// An expression over classical bits.
#[derive(Clone, Debug, PartialEq)]
pub enum ClassicalExpr {
    /// A single classical bit (0 or 1).
    Bit(u32),
    /// A little-endian bundle of classical bits read as an integer.
    Bits(Vec<u32>),
    /// An integer literal.
    Int(u64),
    /// A binary operation.
    Binary {
        op: BinOp,
        lhs: Box<ClassicalExpr>,
        rhs: Box<ClassicalExpr>,
    },
    /// Parity (xor reduction) of the bits of the operand's value.
    XorReduce(Box<ClassicalExpr>),
}

impl ClassicalExpr {
    pub fn bit(index: u32) -> Self {
        ClassicalExpr::Bit(index)
    }

    pub fn binary(op: BinOp, lhs: ClassicalExpr, rhs: ClassicalExpr) -> Self {
        ClassicalExpr::Binary {
            op,
            lhs: Box::new(lhs),
            rhs: Box::new(rhs),
        }
    }

    /// `expr == literal`, the most common condition shape.
    pub fn equals(lhs: ClassicalExpr, value: u64) -> Self {
        ClassicalExpr::binary(BinOp::Eq, lhs, ClassicalExpr::Int(value))
    }

    /// Evaluate against a full assignment of classical bits.
    pub fn evaluate(&self, bits: &[bool]) -> u64 {
        match self {
            ClassicalExpr::Bit(i) => bits.get(*i as usize).copied().unwrap_or(false) as u64,
            ClassicalExpr::Bits(indices) => {
                let mut value = 0u64;
                for (pos, idx) in indices.iter().enumerate() {
                    if bits.get(*idx as usize).copied().unwrap_or(false) {
                        value |= 1 << pos;
                    }
                }
                value
            }
            ClassicalExpr::Int(v) => *v,
            ClassicalExpr::Binary { op, lhs, rhs } => {
                let a = lhs.evaluate(bits);
                let b = rhs.evaluate(bits);
                match op {
                    BinOp::Eq => (a == b) as u64,
                    BinOp::Ne => (a != b) as u64,
                    BinOp::Ge => (a >= b) as u64,
                    BinOp::Le => (a <= b) as u64,
                    BinOp::Gt => (a > b) as u64,
                    BinOp::Lt => (a < b) as u64,
                    BinOp::And => a & b,
                    BinOp::Or => a | b,
                    BinOp::Xor => a ^ b,
                }
            }
            ClassicalExpr::XorReduce(inner) => (inner.evaluate(bits).count_ones() % 2) as u64,
        }
    }

    /// Truthiness of the expression as a condition.
    pub fn evaluate_bool(&self, bits: &[bool]) -> bool {
        self.evaluate(bits) != 0
    }

    /// All classical bits the expression reads, ascending and deduplicated.
    pub fn clbits(&self) -> Vec<u32> {
        let mut out = Vec::new();
        self.collect_clbits(&mut out);
        out.sort_unstable();
        out.dedup();
        out
    }

    fn collect_clbits(&self, out: &mut Vec<u32>) {
        match self {
            ClassicalExpr::Bit(i) => out.push(*i),
            ClassicalExpr::Bits(indices) => out.extend_from_slice(indices),
            ClassicalExpr::Int(_) => {}
            ClassicalExpr::Binary { lhs, rhs, .. } => {
                lhs.collect_clbits(out);
                rhs.collect_clbits(out);
            }
            ClassicalExpr::XorReduce(inner) => inner.collect_clbits(out),
        }
    }

    /// Rewrite every referenced clbit through `map` (new index per old).
    pub fn remap_clbits(&self, map: &dyn Fn(u32) -> u32) -> ClassicalExpr {
        match self {
            ClassicalExpr::Bit(i) => ClassicalExpr::Bit(map(*i)),
            ClassicalExpr::Bits(indices) => {
                ClassicalExpr::Bits(indices.iter().map(|i| map(*i)).collect())
            }
            ClassicalExpr::Int(v) => ClassicalExpr::Int(*v),
            ClassicalExpr::Binary { op, lhs, rhs } => ClassicalExpr::Binary {
                op: *op,
                lhs: Box::new(lhs.remap_clbits(map)),
                rhs: Box::new(rhs.remap_clbits(map)),
            },
            ClassicalExpr::XorReduce(inner) => {
                ClassicalExpr::XorReduce(Box::new(inner.remap_clbits(map)))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundle_is_little_endian() {
        // bits [c1, c3] with c3 set reads as binary 10 = 2
        let e = ClassicalExpr::Bits(vec![1, 3]);
        let bits = [false, false, false, true];
        assert_eq!(e.evaluate(&bits), 2);
    }

    #[test]
    fn comparison_and_bitwise_operators() {
        let bits = [true, false, true];
        let c0 = ClassicalExpr::Bit(0);
        let c1 = ClassicalExpr::Bit(1);
        let c2 = ClassicalExpr::Bit(2);
        let xor = ClassicalExpr::binary(BinOp::Xor, c0.clone(), c2.clone());
        assert_eq!(xor.evaluate(&bits), 0);
        let or = ClassicalExpr::binary(BinOp::Or, c0.clone(), c1.clone());
        assert_eq!(or.evaluate(&bits), 1);
        let cmp = ClassicalExpr::equals(ClassicalExpr::binary(BinOp::And, c0, c2), 1);
        assert!(cmp.evaluate_bool(&bits));
        assert!(!ClassicalExpr::equals(c1, 1).evaluate_bool(&bits));
    }

    #[test]
    fn xor_reduce_is_parity() {
        let e = ClassicalExpr::XorReduce(Box::new(ClassicalExpr::Bits(vec![0, 1, 2])));
        assert_eq!(e.evaluate(&[true, true, true]), 1);
        assert_eq!(e.evaluate(&[true, true, false]), 0);
    }

    #[test]
    fn clbits_are_sorted_and_unique() {
        let e = ClassicalExpr::binary(
            BinOp::Or,
            ClassicalExpr::Bit(3),
            ClassicalExpr::binary(BinOp::Xor, ClassicalExpr::Bit(1), ClassicalExpr::Bit(3)),
        );
        assert_eq!(e.clbits(), vec![1, 3]);
    }
}
