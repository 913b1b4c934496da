//! Real unary operations and their derivatives.

use super::ast::Expr;

/// How the derivative of an operation is expressed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Derivative {
    /// Another entry of the table.
    Op(&'static str),
    /// `-1.0 * recip(x) * recip(x)`, built from table entries.
    NegRecipSquared,
}

#[derive(Debug, Clone, Copy)]
pub struct UnaryOp {
    pub name: &'static str,
    pub eval: fn(f64) -> f64,
    pub derivative: Derivative,
}

fn neg_sin(x: f64) -> f64 {
    -libm::sin(x)
}

fn neg_cos(x: f64) -> f64 {
    -libm::cos(x)
}

fn recip(x: f64) -> f64 {
    1.0 / x
}

/// The table is closed: every derivative names an entry or is built from entries.
pub const UNARY_OPS: &[UnaryOp] = &[
    UnaryOp { name: "sin", eval: libm::sin, derivative: Derivative::Op("cos") },
    UnaryOp { name: "cos", eval: libm::cos, derivative: Derivative::Op("neg_sin") },
    UnaryOp { name: "neg_sin", eval: neg_sin, derivative: Derivative::Op("neg_cos") },
    UnaryOp { name: "neg_cos", eval: neg_cos, derivative: Derivative::Op("sin") },
    UnaryOp { name: "exp", eval: libm::exp, derivative: Derivative::Op("exp") },
    UnaryOp { name: "log", eval: libm::log, derivative: Derivative::Op("recip") },
    UnaryOp { name: "recip", eval: recip, derivative: Derivative::NegRecipSquared },
];

pub fn lookup_op(name: &str) -> Option<&'static UnaryOp> {
    UNARY_OPS.iter().find(|op| op.name == name)
}

pub fn is_op_name(name: &str) -> bool {
    lookup_op(name).is_some()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OpError {
    #[error("unknown unary operation `{0}`")]
    Unknown(alloc::string::String),
    #[error("derivative of `{0}` is a composite expression, not a single operation")]
    Composite(&'static str),
}

/// Name of the operation computing the derivative of `name`.
pub fn derivative_op(name: &str) -> Result<&'static str, OpError> {
    let op = lookup_op(name).ok_or_else(|| OpError::Unknown(name.into()))?;
    match op.derivative {
        Derivative::Op(d) => Ok(d),
        Derivative::NegRecipSquared => Err(OpError::Composite(op.name)),
    }
}

/// `op'(arg)` as an expression.
pub fn derivative_expr(name: &str, arg: Expr) -> Result<Expr, OpError> {
    let op = lookup_op(name).ok_or_else(|| OpError::Unknown(name.into()))?;
    Ok(match op.derivative {
        Derivative::Op(d) => Expr::unary(d, arg),
        Derivative::NegRecipSquared => Expr::mul(
            Expr::mul(Expr::Real(-1.0), Expr::unary("recip", arg.clone())),
            Expr::unary("recip", arg),
        ),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_is_closed_under_differentiation() {
        for op in UNARY_OPS {
            if let Derivative::Op(d) = op.derivative {
                assert!(is_op_name(d), "{} -> {}", op.name, d);
            }
        }
    }

    #[test]
    fn named_derivatives() {
        assert_eq!(derivative_op("sin"), Ok("cos"));
        assert_eq!(derivative_op("exp"), Ok("exp"));
        assert_eq!(derivative_op("log"), Ok("recip"));
        assert!(matches!(derivative_op("tan"), Err(OpError::Unknown(_))));
    }

    #[test]
    fn derivatives_match_finite_differences() {
        let x = 0.7;
        let h = 1e-6;
        for op in UNARY_OPS {
            let fd = ((op.eval)(x + h) - (op.eval)(x - h)) / (2.0 * h);
            let exact = match op.derivative {
                Derivative::Op(d) => (lookup_op(d).unwrap().eval)(x),
                Derivative::NegRecipSquared => -1.0 / (x * x),
            };
            assert!((fd - exact).abs() < 1e-6, "{}: {} vs {}", op.name, fd, exact);
        }
    }
}
