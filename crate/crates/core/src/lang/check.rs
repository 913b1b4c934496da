//! Typechecker.

use alloc::string::String;

use super::ast::Expr;
use super::ops::is_op_name;
use super::types::{otimes, Type, TypeEnv};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum TypeError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("`{0}` is not a tensor type")]
    NotTensor(Type),
    #[error("expected a dictionary, found `{0}`")]
    NotDict(Type),
    #[error("expected an index, found `{0}`")]
    NotIndex(Type),
    #[error("{context}: expected `{expected}`, found `{found}`")]
    Mismatch {
        context: &'static str,
        expected: Type,
        found: Type,
    },
    #[error("`=` needs discrete operands of the same kind, found `{0}` and `{1}`")]
    BadEquality(Type, Type),
    #[error("`+` is not defined on `{0}`")]
    NotAdditive(Type),
    #[error("unknown unary operation `{0}`")]
    UnknownOp(String),
    #[error("sum binds `{0}` as both key and value")]
    DuplicateBinder(String),
}

fn expect(context: &'static str, expected: Type, found: Type) -> Result<(), TypeError> {
    if expected.compatible(&found) {
        Ok(())
    } else {
        Err(TypeError::Mismatch {
            context,
            expected,
            found,
        })
    }
}

/// Type of `e` under `env`. The environment is restored on return.
pub fn typecheck(env: &mut TypeEnv, e: &Expr) -> Result<Type, TypeError> {
    match e {
        Expr::Var(x) => env.get(x).cloned().ok_or_else(|| TypeError::Unbound(x.clone())),
        Expr::Int(_) => Ok(Type::Int),
        Expr::Real(_) => Ok(Type::Real),
        Expr::Bool(_) => Ok(Type::Bool),
        Expr::EmptyDict => Ok(Type::Empty),
        Expr::Sum {
            key,
            val,
            range,
            body,
        } => {
            if key == val && key != "_" {
                return Err(TypeError::DuplicateBinder(key.clone()));
            }
            let (kt, vt) = match typecheck(env, range)? {
                Type::Dict(k, v) => (*k, *v),
                Type::Empty => (Type::Int, Type::Empty),
                other => return Err(TypeError::NotDict(other)),
            };
            let mark = env.len();
            env.push(key.clone(), kt);
            env.push(val.clone(), vt);
            let bt = typecheck(env, body);
            env.truncate(mark);
            let bt = bt?;
            if !bt.is_additive() {
                return Err(TypeError::NotAdditive(bt));
            }
            Ok(bt)
        }
        Expr::Singleton { key, val } => {
            let kt = typecheck(env, key)?;
            if !kt.is_index() {
                return Err(TypeError::NotIndex(kt));
            }
            let vt = typecheck(env, val)?;
            Ok(Type::dict(Type::Int, vt))
        }
        Expr::Lookup { dict, key } => {
            let dt = typecheck(env, dict)?;
            let kt = typecheck(env, key)?;
            match dt {
                Type::Dict(k, v) => {
                    expect("lookup key", *k, kt)?;
                    Ok(*v)
                }
                Type::Empty if kt.is_index() => Ok(Type::Empty),
                other => Err(TypeError::NotDict(other)),
            }
        }
        Expr::Let { var, bound, body } => {
            let bt = typecheck(env, bound)?;
            env.push(var.clone(), bt);
            let r = typecheck(env, body);
            env.pop();
            r
        }
        Expr::Not(a) => {
            let t = typecheck(env, a)?;
            expect("`not` operand", Type::Bool, t)?;
            Ok(Type::Bool)
        }
        Expr::If { cond, then } => {
            let ct = typecheck(env, cond)?;
            expect("`if` condition", Type::Bool, ct)?;
            let tt = typecheck(env, then)?;
            if !tt.is_additive() {
                return Err(TypeError::NotAdditive(tt));
            }
            Ok(tt)
        }
        Expr::Add(a, b) => {
            let at = typecheck(env, a)?;
            let bt = typecheck(env, b)?;
            if !at.is_additive() {
                return Err(TypeError::NotAdditive(at));
            }
            expect("`+` operand", at.clone(), bt.clone())?;
            Ok(at.join(&bt))
        }
        Expr::Mul(a, b) => {
            let at = typecheck(env, a)?;
            let bt = typecheck(env, b)?;
            if at.is_index() && bt.is_index() {
                return Ok(Type::Int);
            }
            otimes(&at.logical(), &bt.logical())
        }
        Expr::Eq(a, b) => {
            let at = typecheck(env, a)?;
            let bt = typecheck(env, b)?;
            if at.is_discrete() && at.compatible(&bt) {
                Ok(Type::Bool)
            } else {
                Err(TypeError::BadEquality(at, bt))
            }
        }
        Expr::Unary { op, arg } => {
            if !is_op_name(op) {
                return Err(TypeError::UnknownOp(op.clone()));
            }
            let t = typecheck(env, arg)?;
            expect("unary operand", Type::Real, t)?;
            Ok(Type::Real)
        }
        Expr::Range { start, end } => {
            for x in [start, end] {
                let t = typecheck(env, x)?;
                if !t.is_index() {
                    return Err(TypeError::NotIndex(t));
                }
            }
            Ok(Type::dict(Type::DenseInt, Type::Int))
        }
        Expr::SubArray { arr, start, end } => {
            let at = typecheck(env, arr)?;
            match &at {
                Type::Dict(k, _) if k.is_index() => {}
                Type::Empty => {}
                _ => return Err(TypeError::NotDict(at)),
            }
            for x in [start, end] {
                let t = typecheck(env, x)?;
                if !t.is_index() {
                    return Err(TypeError::NotIndex(t));
                }
            }
            Ok(at)
        }
        Expr::Unique(a) => typecheck(env, a),
    }
}

/// Convenience wrapper taking the environment by reference.
pub fn type_of(env: &TypeEnv, e: &Expr) -> Result<Type, TypeError> {
    typecheck(&mut env.clone(), e)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse::{parse, Mode};

    fn check(env: &TypeEnv, src: &str) -> Result<Type, TypeError> {
        type_of(env, &parse(src, Mode::Physical).unwrap())
    }

    fn vectors() -> TypeEnv {
        TypeEnv::new()
            .with("V1", Type::tensor(1))
            .with("V2", Type::tensor(1))
            .with("M", Type::tensor(2))
            .with("x", Type::Real)
    }

    #[test]
    fn dot_product_is_real() {
        assert_eq!(check(&vectors(), "sum(<i, a> in V1) a * V2(i)"), Ok(Type::Real));
    }

    #[test]
    fn scaling_keeps_shape() {
        assert_eq!(check(&vectors(), "x * V1"), Ok(Type::tensor(1)));
        assert_eq!(check(&vectors(), "V1 * x"), Ok(Type::tensor(1)));
    }

    #[test]
    fn outer_product_adds_orders() {
        assert_eq!(check(&vectors(), "V1 * M"), Ok(Type::tensor(3)));
    }

    #[test]
    fn singleton_and_lookup() {
        assert_eq!(check(&vectors(), "{ 3 -> x }"), Ok(Type::tensor(1)));
        assert_eq!(check(&vectors(), "M(1)(2)"), Ok(Type::Real));
        assert!(matches!(check(&vectors(), "x(1)"), Err(TypeError::NotDict(_))));
    }

    #[test]
    fn unbound_and_mismatch() {
        assert_eq!(check(&vectors(), "y"), Err(TypeError::Unbound("y".into())));
        assert!(matches!(check(&vectors(), "V1 + x"), Err(TypeError::Mismatch { .. })));
        assert!(matches!(check(&vectors(), "x = x"), Err(TypeError::BadEquality(..))));
    }

    #[test]
    fn empty_dict_takes_the_other_operand_type() {
        assert_eq!(check(&vectors(), "{ } + M"), Ok(Type::tensor(2)));
        assert_eq!(check(&vectors(), "let z = { } in z(1)(2) + x"), Ok(Type::Real));
        assert_eq!(check(&vectors(), "{ } * x"), Ok(Type::Empty));
    }

    #[test]
    fn if_condition_must_be_bool() {
        assert_eq!(check(&vectors(), "if 1 = 2 then x"), Ok(Type::Real));
        assert!(check(&vectors(), "if x then x").is_err());
    }

    #[test]
    fn physical_arrays() {
        let env = TypeEnv::new()
            .with("len", Type::Int)
            .with("row", Type::dict(Type::DenseInt, Type::Int))
            .with("val", Type::dict(Type::DenseInt, Type::Real));
        assert_eq!(
            check(&env, "sum(<_, i> in (0:len)) { unique(row(i)) -> val(i) }"),
            Ok(Type::tensor(1))
        );
        assert_eq!(
            check(&env, "row(0:len)"),
            Ok(Type::dict(Type::DenseInt, Type::Int))
        );
    }

    #[test]
    fn environment_is_restored() {
        let mut env = vectors();
        let before = env.clone();
        let _ = typecheck(&mut env, &parse("sum(<i, a> in V1) let b = a in b * y", Mode::Logical).unwrap());
        assert_eq!(env, before);
    }
}
