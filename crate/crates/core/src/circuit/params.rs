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

//! Symbolic gate parameters.
//!
//! A parameter is a named placeholder for a rotation angle.  Parameter
//! expressions are deliberately restricted to the affine form `a * p + b`
//! over a single parameter, which is all the batching workflow needs.

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

/// A named symbolic parameter.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Parameter {
    name: Arc<str>,
}

impl Parameter {
    pub fn new(name: impl Into<String>) -> Self {
        Parameter {
            name: Arc::from(name.into().as_str()),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// The affine expression `scale * self + offset`.
    pub fn scaled(&self, scale: f64, offset: f64) -> ParamExpr {
        ParamExpr {
            parameter: self.clone(),
            scale,
            offset,
        }
    }
}

impl fmt::Display for Parameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

/// Affine expression `scale * parameter + offset` over a single parameter.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamExpr {
    pub parameter: Parameter,
    pub scale: f64,
    pub offset: f64,
}

impl ParamExpr {
    pub fn evaluate(&self, value: f64) -> f64 {
        self.scale * value + self.offset
    }
}

/// A gate angle: either a bound real number or a symbolic expression.
#[derive(Clone, Debug, PartialEq)]
pub enum ParamValue {
    Real(f64),
    Expr(ParamExpr),
}

impl ParamValue {
    pub fn expr(parameter: Parameter) -> Self {
        ParamValue::Expr(parameter.scaled(1.0, 0.0))
    }

    pub fn is_bound(&self) -> bool {
        matches!(self, ParamValue::Real(_))
    }

    /// The bound value, if any.
    pub fn value(&self) -> Option<f64> {
        match self {
            ParamValue::Real(v) => Some(*v),
            ParamValue::Expr(_) => None,
        }
    }

    /// The parameter name referenced by this value, if unbound.
    pub fn parameter_name(&self) -> Option<&str> {
        match self {
            ParamValue::Real(_) => None,
            ParamValue::Expr(e) => Some(e.parameter.name()),
        }
    }

    /// The same angle shifted by a constant.
    pub fn offset_by(&self, delta: f64) -> ParamValue {
        match self {
            ParamValue::Real(v) => ParamValue::Real(v + delta),
            ParamValue::Expr(e) => ParamValue::Expr(ParamExpr {
                parameter: e.parameter.clone(),
                scale: e.scale,
                offset: e.offset + delta,
            }),
        }
    }

    /// Substitute parameters present in `bindings`, leaving others symbolic.
    pub fn bind(&self, bindings: &BTreeMap<String, f64>) -> ParamValue {
        match self {
            ParamValue::Real(v) => ParamValue::Real(*v),
            ParamValue::Expr(e) => match bindings.get(e.parameter.name()) {
                Some(v) => ParamValue::Real(e.evaluate(*v)),
                None => self.clone(),
            },
        }
    }
}

impl From<f64> for ParamValue {
    fn from(v: f64) -> Self {
        ParamValue::Real(v)
    }
}

impl From<Parameter> for ParamValue {
    fn from(p: Parameter) -> Self {
        ParamValue::expr(p)
    }
}

impl From<ParamExpr> for ParamValue {
    fn from(e: ParamExpr) -> Self {
        ParamValue::Expr(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_binding() {
        let theta = Parameter::new("theta");
        let expr = theta.scaled(2.0, -0.5);
        let mut bindings = BTreeMap::new();
        bindings.insert("theta".to_string(), 0.75);
        let bound = ParamValue::Expr(expr).bind(&bindings);
        assert_eq!(bound, ParamValue::Real(1.0));
    }

    #[test]
    fn unbound_parameters_survive_partial_binding() {
        let theta = Parameter::new("theta");
        let v = ParamValue::expr(theta);
        let bound = v.bind(&BTreeMap::new());
        assert_eq!(bound.parameter_name(), Some("theta"));
    }
}
