//! Sparsity propagation: pushes syntactic zeros through a term.
//!
//! The seven rules:
//!
//! ```text
//! zero * e  ~> zero        e * zero ~> zero
//! e + zero  ~> e           zero + e ~> e
//! zero(e)   ~> zero        let x = zero in e ~> e[x := zero]
//! sum(<k, v> in zero) e ~> zero
//! ```
//!
//! Every zero is re-typed at the type of the node it replaces, so the
//! result typechecks at the same type as the input.

use crate::lang::subst::substitute;
use crate::lang::{type_of, zero_of, Expr, Type, TypeEnv, TypeError};

/// Fixpoint of the sparsity rules.
pub fn propagate_sparsity(env: &TypeEnv, e: &Expr) -> Result<Expr, TypeError> {
    let mut env = env.clone();
    let mut cur = e.clone();
    loop {
        let next = pass(&mut env, &cur)?;
        if next == cur {
            return Ok(next);
        }
        cur = next;
    }
}

fn zero_like(env: &TypeEnv, e: &Expr) -> Result<Expr, TypeError> {
    zero_of(&type_of(env, e)?)
}

fn pass(env: &mut TypeEnv, e: &Expr) -> Result<Expr, TypeError> {
    Ok(match e {
        Expr::Sum {
            key,
            val,
            range,
            body,
        } => {
            let range = pass(env, range)?;
            let (kt, vt) = match type_of(env, &range)? {
                Type::Dict(k, v) => (*k, *v),
                _ => (Type::Int, Type::Empty),
            };
            let mark = env.len();
            env.push(key.clone(), kt);
            env.push(val.clone(), vt);
            let body = pass(env, body);
            env.truncate(mark);
            let s = Expr::sum(key.clone(), val.clone(), range, body?);
            match &s {
                Expr::Sum { range, .. } if range.is_zero_literal() => zero_like(env, &s)?,
                _ => s,
            }
        }
        Expr::Let { var, bound, body } => {
            let bound = pass(env, bound)?;
            if bound.is_zero_literal() {
                return pass(env, &substitute(body, var, &bound));
            }
            env.push(var.clone(), type_of(env, &bound)?);
            let body = pass(env, body);
            env.pop();
            Expr::let_in(var.clone(), bound, body?)
        }
        Expr::Mul(a, b) => {
            let m = Expr::mul(pass(env, a)?, pass(env, b)?);
            match &m {
                Expr::Mul(a, b) if a.is_zero_literal() || b.is_zero_literal() => zero_like(env, &m)?,
                _ => m,
            }
        }
        Expr::Add(a, b) => {
            let (a, b) = (pass(env, a)?, pass(env, b)?);
            if b.is_zero_literal() {
                a
            } else if a.is_zero_literal() {
                b
            } else {
                Expr::add(a, b)
            }
        }
        Expr::Lookup { dict, key } => {
            let l = Expr::lookup(pass(env, dict)?, pass(env, key)?);
            match &l {
                Expr::Lookup { dict, .. } if dict.is_zero_literal() => zero_like(env, &l)?,
                _ => l,
            }
        }
        other => pass_children(env, other)?,
    })
}

/// Applies the pass to the children of a node without binders.
fn pass_children(env: &mut TypeEnv, e: &Expr) -> Result<Expr, TypeError> {
    let mut err = None;
    let out = e.clone().map_children(&mut |c| match pass(env, &c) {
        Ok(c) => c,
        Err(e) => {
            err.get_or_insert(e);
            c
        }
    });
    err.map_or(Ok(out), Err)
}
