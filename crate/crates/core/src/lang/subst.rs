//! Free variables, fresh names and capture-avoiding substitution.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec::Vec;

use super::ast::{Expr, Name};

/// Free variables in sorted order.
pub fn free_vars(e: &Expr) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    collect_free(e, &mut Vec::new(), &mut out);
    out
}

fn collect_free(e: &Expr, bound: &mut Vec<Name>, out: &mut BTreeSet<Name>) {
    match e {
        Expr::Var(x) => {
            if !bound.iter().any(|b| b == x) {
                out.insert(x.clone());
            }
        }
        Expr::Sum {
            key,
            val,
            range,
            body,
        } => {
            collect_free(range, bound, out);
            bound.push(key.clone());
            bound.push(val.clone());
            collect_free(body, bound, out);
            bound.truncate(bound.len() - 2);
        }
        Expr::Let { var, bound: b, body } => {
            collect_free(b, bound, out);
            bound.push(var.clone());
            collect_free(body, bound, out);
            bound.pop();
        }
        _ => {
            for c in e.children() {
                collect_free(c, bound, out);
            }
        }
    }
}

pub fn occurs_free(x: &str, e: &Expr) -> bool {
    count_free(x, e) > 0
}

/// Number of free occurrences of `x` in `e`.
pub fn count_free(x: &str, e: &Expr) -> usize {
    match e {
        Expr::Var(y) => usize::from(x == y),
        Expr::Sum {
            key,
            val,
            range,
            body,
        } => {
            count_free(x, range)
                + if key == x || val == x {
                    0
                } else {
                    count_free(x, body)
                }
        }
        Expr::Let { var, bound, body } => {
            count_free(x, bound) + if var == x { 0 } else { count_free(x, body) }
        }
        _ => e.children().into_iter().map(|c| count_free(x, c)).sum(),
    }
}

/// Every name in `e`, bound or free.
pub fn all_names(e: &Expr) -> BTreeSet<Name> {
    let mut out = BTreeSet::new();
    collect_names(e, &mut out);
    out
}

fn collect_names(e: &Expr, out: &mut BTreeSet<Name>) {
    match e {
        Expr::Var(x) => {
            out.insert(x.clone());
        }
        Expr::Sum { key, val, .. } => {
            out.insert(key.clone());
            out.insert(val.clone());
        }
        Expr::Let { var, .. } => {
            out.insert(var.clone());
        }
        _ => {}
    }
    for c in e.children() {
        collect_names(c, out);
    }
}

/// Supplies names that clash with nothing seen so far.
#[derive(Debug, Clone, Default)]
pub struct FreshNamer {
    taken: BTreeSet<Name>,
    counter: usize,
}

impl FreshNamer {
    pub fn new() -> Self {
        Self::default()
    }

    /// A namer avoiding every name occurring in `e`.
    pub fn avoiding(e: &Expr) -> Self {
        FreshNamer {
            taken: all_names(e),
            counter: 0,
        }
    }

    pub fn reserve(&mut self, name: &str) {
        self.taken.insert(name.into());
    }

    pub fn reserve_all(&mut self, e: &Expr) {
        self.taken.extend(all_names(e));
    }

    /// `t1`, `t2`, ... skipping anything taken.
    pub fn fresh(&mut self) -> Name {
        self.fresh_with("t")
    }

    pub fn fresh_with(&mut self, prefix: &str) -> Name {
        loop {
            self.counter += 1;
            let name = format!("{}{}", prefix, self.counter);
            if self.taken.insert(name.clone()) {
                return name;
            }
        }
    }

    /// `base` itself when free, otherwise `base_2`, `base_3`, ...
    pub fn variant(&mut self, base: &str) -> Name {
        if self.taken.insert(base.into()) {
            return base.into();
        }
        let stem = base.trim_end_matches('\'');
        let primes = &base[stem.len()..];
        (2..)
            .map(|n| format!("{}_{}{}", stem, n, primes))
            .find(|name| self.taken.insert(name.clone()))
            .unwrap()
    }
}

/// `e[x := v]`, renaming binders that would capture free variables of `v`.
pub fn substitute(e: &Expr, x: &str, v: &Expr) -> Expr {
    let fv = free_vars(v);
    let mut namer = FreshNamer::avoiding(e);
    namer.taken.extend(fv.iter().cloned());
    namer.reserve(x);
    subst_rec(e, x, v, &fv, &mut namer)
}

fn subst_rec(e: &Expr, x: &str, v: &Expr, fv: &BTreeSet<Name>, namer: &mut FreshNamer) -> Expr {
    match e {
        Expr::Var(y) if y == x => v.clone(),
        Expr::Sum {
            key,
            val,
            range,
            body,
        } => {
            let range = subst_rec(range, x, v, fv, namer);
            if key == x || val == x || !occurs_free(x, body) {
                return Expr::Sum {
                    key: key.clone(),
                    val: val.clone(),
                    range: range.into(),
                    body: body.clone(),
                };
            }
            let mut body = (**body).clone();
            let mut names = [key.clone(), val.clone()];
            for n in names.iter_mut() {
                if fv.contains(n) && n != "_" {
                    let fresh = namer.variant(n);
                    body = rename_free(&body, n, &fresh);
                    *n = fresh;
                }
            }
            let [key, val] = names;
            Expr::Sum {
                key,
                val,
                range: range.into(),
                body: subst_rec(&body, x, v, fv, namer).into(),
            }
        }
        Expr::Let { var, bound, body } => {
            let bound = subst_rec(bound, x, v, fv, namer);
            if var == x || !occurs_free(x, body) {
                return Expr::Let {
                    var: var.clone(),
                    bound: bound.into(),
                    body: body.clone(),
                };
            }
            let (var, body) = if fv.contains(var) {
                let fresh = namer.variant(var);
                let body = rename_free(body, var, &fresh);
                (fresh, body)
            } else {
                (var.clone(), (**body).clone())
            };
            Expr::Let {
                var,
                bound: bound.into(),
                body: subst_rec(&body, x, v, fv, namer).into(),
            }
        }
        other => other
            .clone()
            .map_children(&mut |c| subst_rec(&c, x, v, fv, namer)),
    }
}

/// Renames free occurrences of `from` to `to`; `to` must not be bound in `e`.
pub fn rename_free(e: &Expr, from: &str, to: &str) -> Expr {
    match e {
        Expr::Var(y) if y == from => Expr::Var(to.into()),
        Expr::Sum {
            key,
            val,
            range,
            body,
        } => Expr::Sum {
            key: key.clone(),
            val: val.clone(),
            range: rename_free(range, from, to).into(),
            body: if key == from || val == from {
                body.clone()
            } else {
                rename_free(body, from, to).into()
            },
        },
        Expr::Let { var, bound, body } => Expr::Let {
            var: var.clone(),
            bound: rename_free(bound, from, to).into(),
            body: if var == from {
                body.clone()
            } else {
                rename_free(body, from, to).into()
            },
        },
        other => other.clone().map_children(&mut |c| rename_free(&c, from, to)),
    }
}

/// Renames every binder to a fresh name so no two binders share a name and no
/// binder shadows a free variable.
pub fn uniquify(e: &Expr, namer: &mut FreshNamer) -> Expr {
    for x in free_vars(e) {
        namer.reserve(&x);
    }
    uniq_rec(e, &mut Vec::new(), namer)
}

fn uniq_rec(e: &Expr, scope: &mut Vec<(Name, Name)>, namer: &mut FreshNamer) -> Expr {
    let lookup = |scope: &Vec<(Name, Name)>, x: &str| {
        scope
            .iter()
            .rev()
            .find(|(from, _)| from == x)
            .map(|(_, to)| to.clone())
    };
    match e {
        Expr::Var(x) => Expr::Var(lookup(scope, x).unwrap_or_else(|| x.clone())),
        Expr::Sum {
            key,
            val,
            range,
            body,
        } => {
            let range = uniq_rec(range, scope, namer);
            let k = if key == "_" { key.clone() } else { namer.variant(key) };
            let v = if val == "_" { val.clone() } else { namer.variant(val) };
            scope.push((key.clone(), k.clone()));
            scope.push((val.clone(), v.clone()));
            let body = uniq_rec(body, scope, namer);
            scope.truncate(scope.len() - 2);
            Expr::sum(k, v, range, body)
        }
        Expr::Let { var, bound, body } => {
            let bound = uniq_rec(bound, scope, namer);
            let x = namer.variant(var);
            scope.push((var.clone(), x.clone()));
            let body = uniq_rec(body, scope, namer);
            scope.pop();
            Expr::let_in(x, bound, body)
        }
        other => other.clone().map_children(&mut |c| uniq_rec(&c, scope, namer)),
    }
}

/// Structural equality up to renaming of bound variables.
pub fn alpha_eq(a: &Expr, b: &Expr) -> bool {
    alpha_rec(a, b, &mut Vec::new())
}

fn alpha_rec(a: &Expr, b: &Expr, env: &mut Vec<(Name, Name)>) -> bool {
    match (a, b) {
        (Expr::Var(x), Expr::Var(y)) => {
            for (l, r) in env.iter().rev() {
                if l == x || r == y {
                    return l == x && r == y;
                }
            }
            x == y
        }
        (
            Expr::Sum {
                key: k1,
                val: v1,
                range: r1,
                body: b1,
            },
            Expr::Sum {
                key: k2,
                val: v2,
                range: r2,
                body: b2,
            },
        ) => {
            if !alpha_rec(r1, r2, env) {
                return false;
            }
            env.push((k1.clone(), k2.clone()));
            env.push((v1.clone(), v2.clone()));
            let ok = alpha_rec(b1, b2, env);
            env.truncate(env.len() - 2);
            ok
        }
        (
            Expr::Let {
                var: x1,
                bound: e1,
                body: b1,
            },
            Expr::Let {
                var: x2,
                bound: e2,
                body: b2,
            },
        ) => {
            if !alpha_rec(e1, e2, env) {
                return false;
            }
            env.push((x1.clone(), x2.clone()));
            let ok = alpha_rec(b1, b2, env);
            env.pop();
            ok
        }
        (Expr::Unary { op: o1, arg: a1 }, Expr::Unary { op: o2, arg: a2 }) => {
            o1 == o2 && alpha_rec(a1, a2, env)
        }
        (Expr::Int(x), Expr::Int(y)) => x == y,
        (Expr::Real(x), Expr::Real(y)) => x == y,
        (Expr::Bool(x), Expr::Bool(y)) => x == y,
        (Expr::EmptyDict, Expr::EmptyDict) => true,
        _ => {
            if core::mem::discriminant(a) != core::mem::discriminant(b) {
                return false;
            }
            let (ca, cb) = (a.children(), b.children());
            ca.len() == cb.len() && ca.into_iter().zip(cb).all(|(x, y)| alpha_rec(x, y, env))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse::{parse, Mode};

    fn p(s: &str) -> Expr {
        parse(s, Mode::Physical).unwrap()
    }

    #[test]
    fn free_vars_are_sorted_and_exclude_binders() {
        let fv = free_vars(&p("sum(<i, a> in V2) let t = a in t * V1(i) * beta"));
        assert_eq!(fv.into_iter().collect::<Vec<_>>(), ["V1", "V2", "beta"]);
    }

    #[test]
    fn substitution_avoids_capture() {
        let e = p("sum(<i, a> in V) a * x");
        let r = substitute(&e, "x", &p("a + 1.0"));
        assert!(alpha_eq(&r, &p("sum(<i, b> in V) b * (a + 1.0)")), "{:?}", r);
    }

    #[test]
    fn substitution_respects_shadowing() {
        let e = p("let x = 2.0 in x");
        assert_eq!(substitute(&e, "x", &p("y")), e);
        let e = p("x + (let x = 2.0 in x)");
        assert!(alpha_eq(&substitute(&e, "x", &p("y")), &p("y + (let x = 2.0 in x)")));
    }

    #[test]
    fn alpha_equivalence() {
        assert!(alpha_eq(&p("sum(<i, a> in V) a"), &p("sum(<j, b> in V) b")));
        assert!(!alpha_eq(&p("sum(<i, a> in V) a"), &p("sum(<j, b> in V) a")));
        assert!(!alpha_eq(&p("sum(<i, a> in V) i"), &p("sum(<i, a> in V) a")));
    }

    #[test]
    fn fresh_names_avoid_existing() {
        let mut n = FreshNamer::avoiding(&p("t1 + t2"));
        assert_eq!(n.fresh(), "t3");
        assert_eq!(n.variant("x'"), "x'");
        assert_eq!(n.variant("x'"), "x_2'");
    }

    #[test]
    fn uniquify_makes_binders_distinct() {
        let e = p("(sum(<i, a> in V) a) + (sum(<i, a> in V) a * i)");
        let u = uniquify(&e, &mut FreshNamer::new());
        assert!(alpha_eq(&e, &u));
        let Expr::Add(l, r) = &u else { panic!() };
        let (Expr::Sum { key: k1, .. }, Expr::Sum { key: k2, .. }) = (&**l, &**r) else { panic!() };
        assert_ne!(k1, k2);
    }
}
