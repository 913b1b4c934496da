//! A-normal form.
//!
//! Operands of every operator, `sum` ranges and `if` conditions become atoms
//! (see [`Expr::is_atom`]); compound operands are let-bound to fresh
//! temporaries `t1, t2, ...`. The tail expression is not bound.

use alloc::vec::Vec;

use crate::lang::subst::{uniquify, FreshNamer};
use crate::lang::{typecheck, Expr, Name, Type, TypeEnv};

/// Converts `e` to A-normal form. Idempotent.
pub fn to_anf(e: &Expr) -> Expr {
    let e = uniquify(e, &mut FreshNamer::new());
    let mut n = Normalizer {
        namer: FreshNamer::avoiding(&e),
        env: None,
    };
    n.term(&e)
}

/// A-normal form that only binds compound operands of scalar type.
///
/// Dictionary-valued operands stay in place, so the backend can still write
/// them straight into their destination.
pub fn to_scalar_anf(env: &TypeEnv, e: &Expr) -> Expr {
    let e = uniquify(e, &mut FreshNamer::new());
    let mut namer = FreshNamer::avoiding(&e);
    for (x, _) in env.iter() {
        namer.reserve(x);
    }
    let mut n = Normalizer {
        namer,
        env: Some(env.clone()),
    };
    n.term(&e)
}

/// True when `e` is in the shape produced by [`to_anf`].
pub fn is_anf(e: &Expr) -> bool {
    match e {
        Expr::Let { bound, body, .. } => is_simple(bound) && is_anf(body),
        _ => is_simple(e),
    }
}

fn is_simple(e: &Expr) -> bool {
    match e {
        Expr::Sum { range, body, .. } => range.is_atom() && is_anf(body),
        Expr::If { cond, then } => cond.is_atom() && is_anf(then),
        Expr::Let { .. } => false,
        _ if e.is_atom() => true,
        _ => e.children().into_iter().all(Expr::is_atom),
    }
}

struct Normalizer {
    namer: FreshNamer,
    /// Types in scope when only scalar operands are bound.
    env: Option<TypeEnv>,
}

impl Normalizer {
    fn term(&mut self, e: &Expr) -> Expr {
        let mark = self.env.as_ref().map_or(0, TypeEnv::len);
        let mut binds = Vec::new();
        let tail = self.simple(e, &mut binds);
        if let Some(env) = &mut self.env {
            env.truncate(mark);
        }
        wrap(binds, tail)
    }

    /// Type of `e`, when types are tracked and `e` typechecks.
    fn ty(&mut self, e: &Expr) -> Option<Type> {
        self.env.as_mut().and_then(|env| typecheck(env, e).ok())
    }

    fn bind(&mut self, x: &Name, e: &Expr) {
        if let Some(t) = self.ty(e) {
            self.env.as_mut().unwrap().push(x.clone(), t);
        }
    }

    /// An atom equal to `e`, after pushing the bindings it needs.
    fn atom(&mut self, e: &Expr, binds: &mut Vec<(Name, Expr)>) -> Expr {
        let s = self.simple(e, binds);
        if s.is_atom() {
            return s;
        }
        if self.env.is_some() && !matches!(self.ty(&s), Some(Type::Real | Type::Int | Type::DenseInt | Type::Bool)) {
            return s;
        }
        let t = self.namer.fresh();
        self.bind(&t, &s);
        binds.push((t.clone(), s));
        Expr::Var(t)
    }

    /// A simple expression equal to `e`, after pushing the bindings it needs.
    fn simple(&mut self, e: &Expr, binds: &mut Vec<(Name, Expr)>) -> Expr {
        match e {
            _ if e.is_atom() => e.clone(),
            Expr::Let { var, bound, body } => {
                let b = self.simple(bound, binds);
                self.bind(var, &b);
                binds.push((var.clone(), b));
                self.simple(body, binds)
            }
            Expr::Sum {
                key,
                val,
                range,
                body,
            } => {
                let range = self.atom(range, binds);
                let mark = self.env.as_ref().map_or(0, TypeEnv::len);
                if let Some(Type::Dict(kt, vt)) = self.ty(&range) {
                    let env = self.env.as_mut().unwrap();
                    env.push(key.clone(), *kt);
                    env.push(val.clone(), *vt);
                }
                let body = self.term(body);
                if let Some(env) = &mut self.env {
                    env.truncate(mark);
                }
                Expr::sum(key.clone(), val.clone(), range, body)
            }
            Expr::If { cond, then } => {
                let cond = self.atom(cond, binds);
                Expr::if_then(cond, self.term(then))
            }
            Expr::Unique(a) => Expr::unique(self.atom(a, binds)),
            other => other.clone().map_children(&mut |c| self.atom(&c, binds)),
        }
    }
}

fn wrap(binds: Vec<(Name, Expr)>, tail: Expr) -> Expr {
    binds
        .into_iter()
        .rev()
        .fold(tail, |body, (x, b)| Expr::let_in(x, b, body))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::subst::alpha_eq;
    use crate::lang::{parse, Mode};

    fn p(s: &str) -> Expr {
        parse(s, Mode::Logical).unwrap()
    }

    #[test]
    fn unrolled_dot_product() {
        let r = to_anf(&p("x1 * y1 + x2 * y2"));
        let expected = p("let t1 = x1 * y1 in let t2 = x2 * y2 in t1 + t2");
        assert!(alpha_eq(&r, &expected), "{}", r);
    }

    #[test]
    fn atoms_are_unchanged() {
        assert_eq!(to_anf(&p("x")), p("x"));
        let dot = p("sum(<i, a> in V1) a * V2(i)");
        assert_eq!(to_anf(&dot), dot);
    }

    #[test]
    fn idempotent() {
        for src in [
            "x1 * y1 + x2 * y2",
            "sum(<i, r> in A) sum(<j, v> in r) { j -> (beta * v) * X(j) }",
            "let x = (let y = 2.0 in y * y) in x + (let y = 3.0 in y)",
            "(sum(<i, a> in V) { i -> a })(3) * sin(x * x)",
        ] {
            let once = to_anf(&p(src));
            assert!(is_anf(&once), "{}", once);
            assert_eq!(to_anf(&once), once, "{}", src);
        }
    }

    #[test]
    fn hoisting_does_not_capture() {
        let r = to_anf(&p("y + (let y = 1.0 in y * 2.0)"));
        let expected = p("let y_2 = 1.0 in let t1 = y_2 * 2.0 in y + t1");
        assert!(alpha_eq(&r, &expected), "{}", r);
    }

    #[test]
    fn scalar_anf_keeps_dictionary_operands() {
        let env: TypeEnv = [("V", Type::tensor(1)), ("s", Type::Real)].into_iter().collect();
        let e = p("sum(<i, a> in V) { i -> sum(<j, b> in V) { j -> s * a * b } }");
        let r = to_scalar_anf(&env, &e);
        let expected = p("sum(<i, a> in V) { i -> sum(<j, b> in V) let t1 = s * a in let t2 = t1 * b in { j -> t2 } }");
        assert!(alpha_eq(&r, &expected), "{}", r);
        let r = to_scalar_anf(&env, &p("(V + V)(0) * sin(s * s)"));
        assert!(alpha_eq(&r, &p("let t1 = (V + V)(0) in let t2 = s * s in let t3 = sin(t2) in t1 * t3")), "{}", r);
    }

    #[test]
    fn ranges_become_atoms() {
        let r = to_anf(&p("sum(<i, a> in V1 + V2) a"));
        assert!(alpha_eq(&r, &p("let t1 = V1 + V2 in sum(<i, a> in t1) a")), "{}", r);
    }
}
