//! Multiplication normalization.
//!
//! Rewrites every tensor product into loops over its operands so that only
//! products of scalars remain, which the backend maps to machine arithmetic.
//! Scalars are pushed into `sum`, singleton, `let`, `if` and `+` bodies; any
//! other tensor operand is expanded into a nested loop over its entries.

use alloc::boxed::Box;

use crate::lang::subst::{uniquify, FreshNamer};
use crate::lang::{typecheck, Expr, Type, TypeEnv, TypeError};

/// Rewrites `e` so that every `*` multiplies two scalars.
pub fn normalize_mult(env: &TypeEnv, e: &Expr) -> Result<Expr, TypeError> {
    let e = uniquify(e, &mut FreshNamer::new());
    let mut namer = FreshNamer::avoiding(&e);
    for (x, _) in env.iter() {
        namer.reserve(x);
    }
    let mut n = Normalizer {
        env: env.clone(),
        namer,
    };
    n.expr(&e)
}

/// True when every `*` in `e` multiplies two scalars.
pub fn only_scalar_mults(env: &TypeEnv, e: &Expr) -> Result<bool, TypeError> {
    fn go(env: &mut TypeEnv, e: &Expr) -> Result<bool, TypeError> {
        match e {
            Expr::Mul(a, b) => {
                let scalar = |t: Type| t == Type::Real || t.is_index();
                Ok(scalar(typecheck(env, a)?) && scalar(typecheck(env, b)?) && go(env, a)? && go(env, b)?)
            }
            Expr::Sum {
                key,
                val,
                range,
                body,
            } => {
                let (kt, vt) = entry_types(typecheck(env, range)?);
                let ok = go(env, range)?;
                let mark = env.len();
                env.push(key.clone(), kt);
                env.push(val.clone(), vt);
                let r = go(env, body);
                env.truncate(mark);
                Ok(ok && r?)
            }
            Expr::Let { var, bound, body } => {
                let t = typecheck(env, bound)?;
                let ok = go(env, bound)?;
                env.push(var.clone(), t);
                let r = go(env, body);
                env.pop();
                Ok(ok && r?)
            }
            other => {
                for c in other.children() {
                    if !go(env, c)? {
                        return Ok(false);
                    }
                }
                Ok(true)
            }
        }
    }
    go(&mut env.clone(), e)
}

fn entry_types(t: Type) -> (Type, Type) {
    match t {
        Type::Dict(k, v) => (*k, *v),
        _ => (Type::Int, Type::Empty),
    }
}

fn is_scalar(t: &Type) -> bool {
    *t == Type::Real || t.is_index()
}

struct Normalizer {
    env: TypeEnv,
    namer: FreshNamer,
}

impl Normalizer {
    fn ty(&mut self, e: &Expr) -> Result<Type, TypeError> {
        typecheck(&mut self.env, e)
    }

    /// Runs `f` with `x: t` in scope.
    fn scoped<R>(&mut self, binds: &[(&str, Type)], f: impl FnOnce(&mut Self) -> R) -> R {
        let mark = self.env.len();
        for (x, t) in binds {
            self.env.push(*x, t.clone());
        }
        let r = f(self);
        self.env.truncate(mark);
        r
    }

    fn expr(&mut self, e: &Expr) -> Result<Expr, TypeError> {
        match e {
            Expr::Sum {
                key,
                val,
                range,
                body,
            } => {
                let range = self.expr(range)?;
                let (kt, vt) = entry_types(self.ty(&range)?);
                let body = self.scoped(&[(key, kt), (val, vt)], |s| s.expr(body))?;
                Ok(Expr::sum(key.clone(), val.clone(), range, body))
            }
            Expr::Let { var, bound, body } => {
                let bound = self.expr(bound)?;
                let t = self.ty(&bound)?;
                let body = self.scoped(&[(var, t)], |s| s.expr(body))?;
                Ok(Expr::let_in(var.clone(), bound, body))
            }
            Expr::Mul(a, b) => {
                let (a, b) = (self.expr(a)?, self.expr(b)?);
                self.mul(a, b)
            }
            other => {
                let mut err = None;
                let out = other.clone().map_children(&mut |c| match self.expr(&c) {
                    Ok(c) => c,
                    Err(e) => {
                        err.get_or_insert(e);
                        c
                    }
                });
                err.map_or(Ok(out), Err)
            }
        }
    }

    /// `a * b` for normalized operands.
    fn mul(&mut self, a: Expr, b: Expr) -> Result<Expr, TypeError> {
        let (ta, tb) = (self.ty(&a)?, self.ty(&b)?);
        if ta == Type::Empty || tb == Type::Empty {
            return Ok(Expr::EmptyDict);
        }
        match (is_scalar(&ta), is_scalar(&tb)) {
            (true, true) => Ok(scalar_mul(a, b, ta == Type::Real)),
            (true, false) => self.scale(a, b),
            _ => self.outer(a, b),
        }
    }

    /// Runs `f` on an atom equal to `x`, let-binding `x` if it is compound.
    fn with_atom(
        &mut self,
        x: Expr,
        f: impl FnOnce(&mut Self, Expr) -> Result<Expr, TypeError>,
    ) -> Result<Expr, TypeError> {
        if x.is_atom() {
            return f(self, x);
        }
        let t = self.namer.fresh();
        let tx = self.ty(&x)?;
        let body = self.scoped(&[(&t, tx)], |s| f(s, Expr::var(t.clone())))?;
        Ok(Expr::let_in(t, x, body))
    }

    /// Scalar `a` times tensor `b`. `a` is bound first when it would be
    /// evaluated more than once.
    fn scale(&mut self, a: Expr, b: Expr) -> Result<Expr, TypeError> {
        match b {
            Expr::EmptyDict => Ok(Expr::EmptyDict),
            Expr::Singleton { key, val } => Ok(Expr::singleton(*key, self.mul(a, *val)?)),
            Expr::If { cond, then } => Ok(Expr::if_then(*cond, self.mul(a, *then)?)),
            Expr::Let { .. } => self.under_binders(b, |s, body| s.mul(a, body)),
            Expr::Add(p, q) => self.with_atom(a, |s, a| Ok(Expr::add(s.mul(a.clone(), *p)?, s.mul(a, *q)?))),
            Expr::Sum { .. } => self.with_atom(a, |s, a| s.under_binders(b, |s, body| s.mul(a, body))),
            other => self.with_atom(a, |s, a| s.entries(other, |s, v| s.mul(a, v))),
        }
    }

    /// Tensor `a` times `b`, binding `b` when it would be evaluated more than once.
    fn outer(&mut self, a: Expr, b: Expr) -> Result<Expr, TypeError> {
        match a {
            Expr::EmptyDict => Ok(Expr::EmptyDict),
            Expr::Singleton { key, val } => Ok(Expr::singleton(*key, self.mul(*val, b)?)),
            Expr::If { cond, then } => Ok(Expr::if_then(*cond, self.mul(*then, b)?)),
            Expr::Let { .. } => self.under_binders(a, |s, body| s.mul(body, b)),
            Expr::Add(p, q) => self.with_atom(b, |s, b| Ok(Expr::add(s.mul(*p, b.clone())?, s.mul(*q, b)?))),
            Expr::Sum { .. } => self.with_atom(b, |s, b| s.under_binders(a, |s, body| s.mul(body, b))),
            other => self.with_atom(b, |s, b| s.entries(other, |s, v| s.mul(v, b))),
        }
    }

    /// Applies `f` to the body of a `sum` or `let`, keeping its binders.
    fn under_binders(
        &mut self,
        e: Expr,
        f: impl FnOnce(&mut Self, Expr) -> Result<Expr, TypeError>,
    ) -> Result<Expr, TypeError> {
        match e {
            Expr::Sum {
                key,
                val,
                range,
                body,
            } => {
                let (kt, vt) = entry_types(self.ty(&range)?);
                let body = self.scoped(&[(&key, kt), (&val, vt)], |s| f(s, *body))?;
                Ok(Expr::Sum {
                    key,
                    val,
                    range,
                    body: Box::new(body),
                })
            }
            Expr::Let { var, bound, body } => {
                let t = self.ty(&bound)?;
                let body = self.scoped(&[(&var, t)], |s| f(s, *body))?;
                Ok(Expr::Let {
                    var,
                    bound,
                    body: Box::new(body),
                })
            }
            other => f(self, other),
        }
    }

    /// `sum(<i, v> in x) { i -> f(v) }`.
    fn entries(
        &mut self,
        x: Expr,
        f: impl FnOnce(&mut Self, Expr) -> Result<Expr, TypeError>,
    ) -> Result<Expr, TypeError> {
        let (kt, vt) = entry_types(self.ty(&x)?);
        let (i, v) = (self.namer.fresh_with("i"), self.namer.fresh_with("v"));
        let body = self.scoped(&[(&i, kt), (&v, vt)], |s| f(s, Expr::var(v.clone())))?;
        Ok(Expr::sum(i.clone(), v, x, Expr::singleton(Expr::var(i), body)))
    }
}

/// Scalar product with real factors associated to the left.
fn scalar_mul(a: Expr, b: Expr, real: bool) -> Expr {
    match b {
        Expr::Mul(b1, b2) if real => Expr::mul(scalar_mul(a, *b1, real), *b2),
        b => Expr::mul(a, b),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::subst::alpha_eq;
    use crate::lang::{parse, Mode};

    fn p(s: &str) -> Expr {
        parse(s, Mode::Physical).unwrap()
    }

    fn env() -> TypeEnv {
        [
            ("s", Type::Real),
            ("t", Type::Real),
            ("V", Type::tensor(1)),
            ("W", Type::tensor(1)),
            ("A", Type::tensor(2)),
        ]
        .into_iter()
        .collect()
    }

    fn check(src: &str, expected: &str) {
        let r = normalize_mult(&env(), &p(src)).unwrap();
        assert!(alpha_eq(&r, &p(expected)), "{} gave {}", src, r);
        assert!(only_scalar_mults(&env(), &r).unwrap(), "{}", r);
    }

    #[test]
    fn scalars_are_pushed_inside() {
        check("s * V", "sum(<i1, v1> in V) { i1 -> s * v1 }");
        check("V * s", "sum(<i1, v1> in V) { i1 -> v1 * s }");
        check("s * { 0 -> t }", "{ 0 -> s * t }");
        check(
            "s * sum(<i, a> in V) { i -> a }",
            "sum(<i, a> in V) { i -> s * a }",
        );
        check("s * (t * s)", "(s * t) * s");
        check("s * { }", "{ }");
    }

    #[test]
    fn tensor_products_become_loops() {
        check(
            "V * W",
            "sum(<i1, v1> in V) { i1 -> sum(<i2, v2> in W) { i2 -> v1 * v2 } }",
        );
        check("{ 0 -> 2.0 } * { 0 -> 3.0 }", "{ 0 -> { 0 -> 2.0 * 3.0 } }");
        check("{ 0 -> s * t } * V", "{ 0 -> let t1 = s * t in sum(<i1, v1> in V) { i1 -> t1 * v1 } }");
        check(
            "(s * t) * A",
            "let t1 = s * t in sum(<i1, v1> in A) { i1 -> sum(<i2, v2> in v1) { i2 -> t1 * v2 } }",
        );
        check(
            "V * (W + W)",
            "let t1 = W + W in sum(<i1, v1> in V) { i1 -> sum(<i2, v2> in t1) { i2 -> v1 * v2 } }",
        );
    }

    #[test]
    fn detects_tensor_products() {
        assert!(!only_scalar_mults(&env(), &p("sum(<i, r> in A) r * s")).unwrap());
        assert!(only_scalar_mults(&env(), &p("sum(<i, r> in A) r(i) * s")).unwrap());
    }
}
