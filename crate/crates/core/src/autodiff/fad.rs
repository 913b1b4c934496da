//! Forward-mode differentiation of ANF terms.
//!
//! `F[e]` computes only the tangent part; primal values are read from the
//! ANF bindings, so no pairs are ever built. The tangent of `x` is the
//! variable `x'`.

use alloc::format;
use alloc::vec::Vec;

use super::anf::is_anf;
use crate::lang::ops::{derivative_expr, OpError};
use crate::lang::subst::FreshNamer;
use crate::lang::{otimes, type_of, zero_of, Expr, Name, Type, TypeEnv, TypeError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FadError {
    #[error("input is not in A-normal form")]
    NotAnf,
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Op(#[from] OpError),
    #[error("`{0}` cannot be differentiated; it only occurs in physical programs")]
    Physical(&'static str),
    #[error("tangent type `{0}` is not a tensor type")]
    BadTangent(Type),
    #[error("`{0}` is not a free variable of the term")]
    NotFree(Name),
    #[error("`{0}` has type `{1}`, which is not a tensor type")]
    NotTensor(Name, Type),
}

/// Name of the tangent of `x`.
pub fn tangent(x: &str) -> Name {
    format!("{}'", x)
}

/// `F_τ[T]`: `T ⊗ τ` for tensor types, `real` for discrete ones.
pub fn tangent_type(t: &Type, tau: &Type) -> Result<Type, FadError> {
    if t.is_discrete() {
        return Ok(Type::Real);
    }
    Ok(otimes(&t.logical(), tau)?)
}

/// `F_τ[Γ]`: every `x: T` followed by `x': F_τ[T]`.
pub fn tangent_env(env: &TypeEnv, tau: &Type) -> Result<TypeEnv, FadError> {
    let mut out = TypeEnv::new();
    for (x, t) in env.iter() {
        out.push(x.clone(), t.clone());
        out.push(tangent(x), tangent_type(t, tau)?);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct FadConfig {
    /// Type of the tangent seed; `real` gives scalar forward mode.
    pub tau: Type,
}

impl FadConfig {
    pub fn new(tau: Type) -> Result<Self, FadError> {
        if !tau.is_tensor() || tau.is_partial() {
            return Err(FadError::BadTangent(tau));
        }
        Ok(FadConfig { tau })
    }
}

/// Scalar forward mode: every tangent has the type of its primal.
pub fn fad_scalar(env: &TypeEnv, e: &Expr) -> Result<Expr, FadError> {
    if !is_anf(e) {
        return Err(FadError::NotAnf);
    }
    scalar(&mut env.clone(), e)
}

fn discrete(env: &TypeEnv, e: &Expr) -> Result<bool, FadError> {
    Ok(type_of(env, e)?.is_discrete())
}

fn scalar(env: &mut TypeEnv, e: &Expr) -> Result<Expr, FadError> {
    Ok(match e {
        Expr::Var(x) => Expr::Var(tangent(x)),
        Expr::Real(_) | Expr::Int(_) | Expr::Bool(_) | Expr::Eq(..) | Expr::Not(_) => Expr::Real(0.0),
        _ if !matches!(e, Expr::Sum { .. } | Expr::Let { .. }) && discrete(env, e)? => Expr::Real(0.0),
        Expr::EmptyDict => Expr::EmptyDict,
        Expr::Sum {
            key,
            val,
            range,
            body,
        } => {
            let (kt, vt) = binder_types(env, range)?;
            let mark = env.len();
            env.push(key.clone(), kt);
            let dv = scalar(env, &Expr::lookup((**range).clone(), Expr::Var(key.clone())));
            env.push(val.clone(), vt);
            let db = scalar(env, body);
            env.truncate(mark);
            let (dv, db) = (dv?, db?);
            Expr::sum(
                key.clone(),
                val.clone(),
                (**range).clone(),
                Expr::let_in(tangent(key), Expr::Real(0.0), Expr::let_in(tangent(val), dv, db)),
            )
        }
        Expr::Let { var, bound, body } => {
            let db = scalar(env, bound)?;
            env.push(var.clone(), type_of(env, bound)?);
            let dbody = scalar(env, body);
            env.pop();
            Expr::let_in(var.clone(), (**bound).clone(), Expr::let_in(tangent(var), db, dbody?))
        }
        Expr::If { cond, then } => Expr::if_then((**cond).clone(), scalar(env, then)?),
        Expr::Lookup { dict, key } => Expr::lookup(scalar(env, dict)?, (**key).clone()),
        Expr::Singleton { key, val } => Expr::singleton((**key).clone(), scalar(env, val)?),
        Expr::Add(a, b) => Expr::add(scalar(env, a)?, scalar(env, b)?),
        Expr::Mul(a, b) => Expr::add(
            Expr::mul((**a).clone(), scalar(env, b)?),
            Expr::mul(scalar(env, a)?, (**b).clone()),
        ),
        Expr::Unary { op, arg } => Expr::mul(derivative_expr(op, (**arg).clone())?, scalar(env, arg)?),
        Expr::Range { .. } => return Err(FadError::Physical("range")),
        Expr::SubArray { .. } => return Err(FadError::Physical("subarray")),
        Expr::Unique(_) => return Err(FadError::Physical("unique")),
    })
}

fn binder_types(env: &TypeEnv, range: &Expr) -> Result<(Type, Type), FadError> {
    Ok(match type_of(env, range)? {
        Type::Dict(k, v) => (*k, *v),
        Type::Empty => (Type::Int, Type::Empty),
        other => return Err(TypeError::NotDict(other).into()),
    })
}

/// Tensorized forward mode: tangents of `T` have type `T ⊗ τ`.
pub fn fad_tensor(cfg: &FadConfig, env: &TypeEnv, e: &Expr) -> Result<Expr, FadError> {
    if !is_anf(e) {
        return Err(FadError::NotAnf);
    }
    let mut namer = FreshNamer::avoiding(e);
    for (x, _) in env.iter() {
        namer.reserve(x);
    }
    let mut t = Tensorized {
        tau: &cfg.tau,
        namer,
    };
    t.fad(&mut env.clone(), e)
}

struct Tensorized<'a> {
    tau: &'a Type,
    namer: FreshNamer,
}

impl Tensorized<'_> {
    fn fad(&mut self, env: &mut TypeEnv, e: &Expr) -> Result<Expr, FadError> {
        Ok(match e {
            Expr::Var(x) => Expr::Var(tangent(x)),
            Expr::Int(_) | Expr::Bool(_) | Expr::Eq(..) | Expr::Not(_) => Expr::Real(0.0),
            Expr::Real(_) => zero_of(self.tau)?,
            _ if !matches!(e, Expr::Sum { .. } | Expr::Let { .. }) && discrete(env, e)? => {
                Expr::Real(0.0)
            }
            Expr::EmptyDict => Expr::EmptyDict,
            Expr::Sum {
                key,
                val,
                range,
                body,
            } => {
                let (kt, vt) = binder_types(env, range)?;
                let mark = env.len();
                env.push(key.clone(), kt.clone());
                env.push(tangent(key), Type::Real);
                let dv = self.fad(env, &Expr::lookup((**range).clone(), Expr::Var(key.clone())));
                let dv = match dv {
                    Ok(dv) => dv,
                    Err(err) => {
                        env.truncate(mark);
                        return Err(err);
                    }
                };
                env.push(val.clone(), vt.clone());
                env.push(tangent(val), tangent_type(&vt, self.tau)?);
                let db = self.fad(env, body);
                env.truncate(mark);
                Expr::sum(
                    key.clone(),
                    val.clone(),
                    (**range).clone(),
                    Expr::let_in(tangent(key), Expr::Real(0.0), Expr::let_in(tangent(val), dv, db?)),
                )
            }
            Expr::Let { var, bound, body } => {
                let db = self.fad(env, bound)?;
                let bt = type_of(env, bound)?;
                env.push(var.clone(), bt.clone());
                env.push(tangent(var), tangent_type(&bt, self.tau)?);
                let dbody = self.fad(env, body);
                env.pop();
                env.pop();
                Expr::let_in(var.clone(), (**bound).clone(), Expr::let_in(tangent(var), db, dbody?))
            }
            Expr::If { cond, then } => Expr::if_then((**cond).clone(), self.fad(env, then)?),
            Expr::Lookup { dict, key } => Expr::lookup(self.fad(env, dict)?, (**key).clone()),
            Expr::Singleton { key, val } => Expr::singleton((**key).clone(), self.fad(env, val)?),
            Expr::Add(a, b) => Expr::add(self.fad(env, a)?, self.fad(env, b)?),
            Expr::Mul(a, b) => {
                let left = Expr::mul((**a).clone(), self.fad(env, b)?);
                let da = self.fad(env, a)?;
                let right = self.odot(env, a, da, b)?;
                Expr::add(left, right)
            }
            Expr::Unary { op, arg } => {
                Expr::mul(derivative_expr(op, (**arg).clone())?, self.fad(env, arg)?)
            }
            Expr::Range { .. } => return Err(FadError::Physical("range")),
            Expr::SubArray { .. } => return Err(FadError::Physical("subarray")),
            Expr::Unique(_) => return Err(FadError::Physical("unique")),
        })
    }

    /// `F[e1] ⊙τ e2`: moves the `τ` indices of `F[e1]` past those of `e2`.
    fn odot(&mut self, env: &TypeEnv, e1: &Expr, de1: Expr, e2: &Expr) -> Result<Expr, FadError> {
        if *self.tau == Type::Real {
            return Ok(Expr::mul(de1, e2.clone()));
        }
        let t2 = type_of(env, e2)?;
        match type_of(env, e1)?.order() {
            None => Ok(Expr::mul(de1, e2.clone())),
            Some(0) if t2 == Type::Real => Ok(Expr::mul(de1, e2.clone())),
            Some(0) => Ok(Expr::mul(e2.clone(), de1)),
            Some(m) => {
                let keys: Vec<Name> = (0..m).map(|_| self.namer.fresh_with("i")).collect();
                let vals: Vec<Name> = (0..m).map(|_| self.namer.fresh_with("r")).collect();
                let unit = keys
                    .iter()
                    .rev()
                    .fold(Expr::Real(1.0), |acc, k| Expr::singleton(Expr::Var(k.clone()), acc));
                let leaf = Expr::mul(Expr::mul(unit, e2.clone()), Expr::Var(vals[m - 1].clone()));
                let mut body = leaf;
                for level in (0..m).rev() {
                    let range = if level == 0 {
                        de1.clone()
                    } else {
                        Expr::Var(vals[level - 1].clone())
                    };
                    body = Expr::sum(keys[level].clone(), vals[level].clone(), range, body);
                }
                Ok(body)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::anf::to_anf;
    use crate::lang::subst::alpha_eq;
    use crate::lang::{parse, Mode};

    fn p(s: &str) -> Expr {
        parse(s, Mode::Logical).unwrap()
    }

    fn reals(names: &[&str]) -> TypeEnv {
        names.iter().map(|n| (*n, Type::Real)).collect()
    }

    #[test]
    fn unrolled_dot_product_pairs() {
        let env = reals(&["x1", "x2", "y1", "y2"]);
        let e = p("let t1 = x1*y1 in let t2 = x2*y2 in let t3 = t1+t2 in t3");
        let d = fad_scalar(&env, &e).unwrap();
        let expected = p(
            "let <t1, t1'> = <x1*y1, x1*y1' + x1'*y1> in
             let <t2, t2'> = <x2*y2, x2*y2' + x2'*y2> in
             let <t3, t3'> = <t1+t2, t1'+t2'> in
             t3'",
        );
        assert!(alpha_eq(&d, &expected), "{}", d);
    }

    #[test]
    fn constants() {
        let env = TypeEnv::new();
        assert_eq!(fad_scalar(&env, &Expr::Real(5.0)).unwrap(), Expr::Real(0.0));
        let cfg = FadConfig::new(Type::tensor(2)).unwrap();
        assert_eq!(fad_tensor(&cfg, &env, &Expr::Real(5.0)).unwrap(), Expr::EmptyDict);
        assert_eq!(fad_tensor(&cfg, &env, &Expr::Int(5)).unwrap(), Expr::Real(0.0));
    }

    #[test]
    fn vector_dot_product() {
        let env: TypeEnv = [("V1", Type::tensor(1)), ("V2", Type::tensor(1))].into_iter().collect();
        let e = p("sum(<i,a> in V2) V1(i) * a");
        let expected = p("sum(<i,a> in V2) let <i',a'> = <0.0, V2'(i)> in V1(i) * a' + V1'(i) * a");
        let d = fad_scalar(&env, &e).unwrap();
        assert!(alpha_eq(&d, &expected), "{}", d);
        let cfg = FadConfig::new(Type::tensor(1)).unwrap();
        let dt = fad_tensor(&cfg, &env, &e).unwrap();
        assert!(alpha_eq(&dt, &expected), "{}", dt);
        let tenv = tangent_env(&env, &cfg.tau).unwrap();
        assert_eq!(tenv.get("V1'"), Some(&Type::tensor(2)));
        assert_eq!(type_of(&tenv, &dt), Ok(Type::tensor(1)));
    }

    #[test]
    fn trace() {
        let env: TypeEnv = [("M", Type::tensor(2))].into_iter().collect();
        let cfg = FadConfig::new(Type::tensor(2)).unwrap();
        let d = fad_tensor(&cfg, &env, &p("sum(<i,r> in M) r(i)")).unwrap();
        let expected = p("sum(<i,r> in M) let <i',r'> = <0.0, M'(i)> in r'(i)");
        assert!(alpha_eq(&d, &expected), "{}", d);
    }

    #[test]
    fn odot_reorders_indices() {
        // F[V * s] with V: tensor 1 and τ = tensor 1.
        let env: TypeEnv = [("V", Type::tensor(1)), ("s", Type::Real)].into_iter().collect();
        let cfg = FadConfig::new(Type::tensor(1)).unwrap();
        let d = fad_tensor(&cfg, &env, &p("V * s")).unwrap();
        let expected = p("V * s' + sum(<i1, r1> in V') ({ i1 -> 1.0 } * s) * r1");
        assert!(alpha_eq(&d, &expected), "{}", d);
        let tenv = tangent_env(&env, &cfg.tau).unwrap();
        assert_eq!(type_of(&tenv, &d), Ok(Type::tensor(2)));
    }

    #[test]
    fn unary_uses_derivative_table() {
        let env = reals(&["x"]);
        let d = fad_scalar(&env, &p("sin(x)")).unwrap();
        assert_eq!(d, p("cos(x) * x'"));
    }

    #[test]
    fn if_keeps_primal_condition() {
        let env: TypeEnv = [("n", Type::Int), ("x", Type::Real)].into_iter().collect();
        let e = to_anf(&p("if n = 3 then x"));
        let d = fad_scalar(&env, &e).unwrap();
        assert!(alpha_eq(&d, &p("let t1 = n = 3 in let t1' = 0.0 in if t1 then x'")), "{}", d);
    }

    #[test]
    fn rejects_non_anf() {
        let env = reals(&["x"]);
        assert_eq!(fad_scalar(&env, &p("x * x * x")), Err(FadError::NotAnf));
    }
}
