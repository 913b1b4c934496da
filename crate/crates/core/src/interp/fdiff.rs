//! Central-difference Jacobians, the oracle for differentiated programs.

use alloc::sync::Arc;
use alloc::vec::Vec;

use super::eval::{compile, Env, EvalError, Stats};
use super::value::Value;
use crate::lang::Expr;

pub const DEFAULT_EPS: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FdError {
    #[error("finite-difference step must be positive, got {0}")]
    BadStep(f64),
    #[error("`{0}` is not an input")]
    NotInput(alloc::string::String),
    #[error("`{0}` must hold a real or a tensor")]
    NotTensor(alloc::string::String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Key paths of the stored real leaves of `v`; `[[]]` for a scalar.
pub fn coordinates(v: &Value) -> Vec<Vec<i64>> {
    let mut out = Vec::new();
    collect(v, &mut Vec::new(), &mut out);
    out
}

fn collect(v: &Value, path: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
    match v {
        Value::Real(_) => out.push(path.clone()),
        Value::Dict(m) => {
            for (k, x) in m.iter() {
                path.push(*k);
                collect(x, path, out);
                path.pop();
            }
        }
        _ => {}
    }
}

fn leaf(v: &Value, path: &[i64]) -> f64 {
    match path.split_first() {
        None => v.as_real().unwrap_or(0.0),
        Some((k, rest)) => v.get(*k).map_or(0.0, |x| leaf(&x, rest)),
    }
}

fn with_leaf(v: &Value, path: &[i64], x: f64) -> Value {
    match path.split_first() {
        None => Value::Real(x),
        Some((k, rest)) => {
            let mut m = match v {
                Value::Dict(m) => (**m).clone(),
                _ => Default::default(),
            };
            let child = m.get(k).cloned().unwrap_or_else(Value::empty);
            let new = with_leaf(&child, rest, x);
            if new.is_zero() {
                m.remove(k);
            } else {
                m.insert(*k, new);
            }
            Value::Dict(Arc::new(m))
        }
    }
}

/// `{path[0] -> ... {path[n-1] -> 1.0}}`.
pub fn unit(path: &[i64]) -> Value {
    path.iter()
        .rev()
        .fold(Value::Real(1.0), |acc, k| Value::singleton(*k, acc))
}

/// Jacobian of `e` with respect to `wrt`, laid out as `type(e) ⊗ type(wrt)`,
/// perturbing each stored coordinate of `wrt`.
pub fn finite_diff(env: &Env, e: &Expr, wrt: &str, eps: f64) -> Result<Value, FdError> {
    let support = env.get(wrt).ok_or_else(|| FdError::NotInput(wrt.into()))?.clone();
    finite_diff_on(env, e, wrt, eps, &coordinates(&support))
}

/// Like [`finite_diff`], perturbing the given coordinates instead.
pub fn finite_diff_on(
    env: &Env,
    e: &Expr,
    wrt: &str,
    eps: f64,
    coords: &[Vec<i64>],
) -> Result<Value, FdError> {
    if eps <= 0.0 || eps.is_nan() {
        return Err(FdError::BadStep(eps));
    }
    let ty = env.type_of(wrt).ok_or_else(|| FdError::NotInput(wrt.into()))?;
    if !ty.is_tensor() {
        return Err(FdError::NotTensor(wrt.into()));
    }
    let program = compile(env.types(), e)?;
    let slot = program
        .inputs()
        .iter()
        .position(|n| n == wrt)
        .ok_or_else(|| FdError::NotInput(wrt.into()))?;
    let mut inputs: Vec<Value> = program
        .inputs()
        .iter()
        .map(|n| env.get(n).cloned().ok_or_else(|| EvalError::Unbound(n.clone())))
        .collect::<Result<_, _>>()?;
    let base = inputs[slot].clone();
    let mut stats = Stats::default();
    let mut jac = Value::empty();
    for c in coords {
        let x = leaf(&base, c);
        inputs[slot] = with_leaf(&base, c, x + eps);
        let plus = program.run(&inputs, &mut stats)?;
        inputs[slot] = with_leaf(&base, c, x - eps);
        let minus = program.run(&inputs, &mut stats)?;
        let diff = plus
            .add(Value::Real(-1.0).mul(&minus).map_err(EvalError::from)?)
            .map_err(EvalError::from)?;
        let d = Value::Real(1.0 / (2.0 * eps)).mul(&diff).map_err(EvalError::from)?;
        let term = d.mul(&unit(c)).map_err(EvalError::from)?;
        jac.add_assign(term).map_err(EvalError::from)?;
    }
    Ok(jac.normalized())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::value::{approx_eq, Tolerance};
    use crate::interp::parse_value;
    use crate::lang::{parse, Mode, Type};

    fn close(a: &Value, b: &Value) -> bool {
        approx_eq(a, b, Tolerance::default())
    }

    #[test]
    fn square() {
        let env = Env::new().with("x", Type::Real, Value::Real(3.0));
        let e = parse("x * x", Mode::Logical).unwrap();
        let g = finite_diff(&env, &e, "x", DEFAULT_EPS).unwrap();
        assert!((g.as_real().unwrap() - 6.0).abs() < 1e-6);
    }

    #[test]
    fn dot_product_gradient_is_other_vector() {
        let env = Env::new()
            .with("V1", Type::tensor(1), Value::vector(&[1.0, 2.0]))
            .with("V2", Type::tensor(1), Value::vector(&[3.0, 4.0]));
        let e = parse("sum(<i, a> in V1) a * V2(i)", Mode::Logical).unwrap();
        let g = finite_diff(&env, &e, "V1", DEFAULT_EPS).unwrap();
        assert!(close(&g, &Value::vector(&[3.0, 4.0])), "{}", g);
    }

    #[test]
    fn trace_gradient_is_identity_pattern() {
        let m = parse_value("{0 -> {0 -> 1.0, 1 -> 2.0}, 1 -> {0 -> 0.5, 1 -> 4.0}}").unwrap();
        let env = Env::new().with("M", Type::tensor(2), m);
        let e = parse("sum(<i, r> in M) r(i)", Mode::Logical).unwrap();
        let g = finite_diff(&env, &e, "M", DEFAULT_EPS).unwrap();
        let expected = parse_value("{0 -> {0 -> 1.0}, 1 -> {1 -> 1.0}}").unwrap();
        assert!(close(&g, &expected), "{}", g);
    }

    #[test]
    fn vector_output_gives_order_two() {
        let env = Env::new()
            .with("s", Type::Real, Value::Real(2.0))
            .with("V", Type::tensor(1), Value::vector(&[3.0]));
        let e = parse("sum(<i, v> in V) { i -> v * s * s }", Mode::Logical).unwrap();
        let g = finite_diff(&env, &e, "s", DEFAULT_EPS).unwrap();
        assert!(close(&g, &Value::vector(&[12.0])), "{}", g);
    }

    #[test]
    fn rejects_bad_step() {
        let env = Env::new().with("x", Type::Real, Value::Real(3.0));
        let e = parse("x", Mode::Logical).unwrap();
        assert_eq!(finite_diff(&env, &e, "x", 0.0), Err(FdError::BadStep(0.0)));
    }
}
