//! Rewrite rules over the e-graph.
//!
//! Each rule is a matcher that inspects one e-node of a class and proposes
//! right-hand sides equal to that class. Side conditions read the class
//! analyses: types, avoidable free variables and strictness.

use alloc::collections::BTreeSet;
use alloc::vec;
use alloc::vec::Vec;

use super::egraph::{EGraph, ENode, Id, Op};
use super::extract::Extractor;
use crate::lang::subst::substitute;
use crate::lang::{Expr, Name, Type};

/// A right-hand side: existing classes glued together by new nodes.
#[derive(Debug, Clone)]
pub enum Rhs {
    Class(Id),
    Node(Op, Vec<Rhs>),
    Term(Expr),
}

fn c(id: Id) -> Rhs {
    Rhs::Class(id)
}

fn n(op: Op, kids: Vec<Rhs>) -> Rhs {
    Rhs::Node(op, kids)
}

/// What a rule may consult besides the graph.
pub struct Ctx<'a> {
    pub g: &'a EGraph,
    /// Tensors known to store every key of their dimension.
    pub dense: &'a BTreeSet<Name>,
    pub best: &'a Extractor<'a>,
}

impl Ctx<'_> {
    fn nodes(&self, id: Id) -> &[ENode] {
        &self.g.class(id).nodes
    }

    fn with_op<'s>(&'s self, id: Id, pred: impl Fn(&Op) -> bool + 's) -> impl Iterator<Item = &'s ENode> + 's {
        self.nodes(id).iter().filter(move |n| pred(&n.op))
    }

    fn has_var(&self, id: Id, x: &str) -> bool {
        self.nodes(id).iter().any(|n| matches!(&n.op, Op::Var(y) if y == x))
    }

    fn avoids(&self, id: Id, names: &[&Name]) -> bool {
        let fv = &self.g.data(id).fv;
        names.iter().all(|x| !fv.contains(*x))
    }

    fn ty(&self, id: Id) -> Option<&Type> {
        self.g.ty(id)
    }

    fn is_real(&self, id: Id) -> bool {
        self.ty(id) == Some(&Type::Real)
    }

    fn is_zero(&self, id: Id) -> bool {
        self.nodes(id).iter().any(|n| n.op == Op::Empty || n.op == Op::Real(0))
    }

    fn real(&self, id: Id) -> Option<f64> {
        self.nodes(id).iter().find_map(|n| n.op.as_real())
    }

    fn int(&self, id: Id) -> Option<i64> {
        self.nodes(id).iter().find_map(|n| match n.op {
            Op::Int(k) => Some(k),
            _ => None,
        })
    }

    /// `zero` at the type of class `id`.
    fn zero(&self, id: Id) -> Option<Rhs> {
        Some(match self.ty(id)? {
            Type::Real => n(Op::real(0.0), vec![]),
            Type::Int | Type::DenseInt => n(Op::Int(0), vec![]),
            Type::Dict(..) | Type::Empty => n(Op::Empty, vec![]),
            Type::Bool => return None,
        })
    }

    /// The key with any `unique` annotation peeled off.
    fn unwrap_unique(&self, id: Id) -> Id {
        self.with_op(id, |o| *o == Op::Unique)
            .next()
            .map_or(id, |u| u.children[0])
    }

    fn is_unique(&self, id: Id) -> bool {
        self.with_op(id, |o| *o == Op::Unique).next().is_some()
    }

    /// True for a dictionary whose keys cover its whole dimension.
    fn is_dense(&self, id: Id) -> bool {
        self.nodes(id).iter().any(|n| match &n.op {
            Op::Var(x) => self.dense.contains(x),
            Op::Range => true,
            _ => false,
        })
    }

    /// Sparse logical tensor: int keys, no array view behind it.
    fn is_logical_tensor(&self, id: Id) -> bool {
        matches!(self.ty(id), Some(t @ Type::Dict(k, _)) if **k == Type::Int && t.order().is_some())
    }
}

pub type Search = fn(&Ctx, Id, &ENode, &mut Vec<Rhs>);

#[derive(Clone, Copy)]
pub struct Rule {
    pub name: &'static str,
    pub search: Search,
    /// Fire at most once per matched node.
    pub once: bool,
}

const fn rule(name: &'static str, search: Search) -> Rule {
    Rule {
        name,
        search,
        once: false,
    }
}

fn let_var(cx: &Ctx, _: Id, node: &ENode, out: &mut Vec<Rhs>) {
    if let Op::Let(x) = &node.op {
        if cx.has_var(node.children[1], x) {
            out.push(c(node.children[0]));
        }
    }
}

fn let_dead(cx: &Ctx, _: Id, node: &ENode, out: &mut Vec<Rhs>) {
    if let Op::Let(x) = &node.op {
        if cx.avoids(node.children[1], &[x]) {
            out.push(c(node.children[1]));
        }
    }
}

/// Substitutes the current best bound into the current best body.
fn let_inline(cx: &Ctx, _: Id, node: &ENode, out: &mut Vec<Rhs>) {
    if let Op::Let(x) = &node.op {
        let (Some(a), Some(b)) = (cx.best.best_expr(node.children[0]), cx.best.best_expr(node.children[1])) else {
            return;
        };
        out.push(Rhs::Term(substitute(&b, x, &a)));
    }
}

fn lookup_rules(cx: &Ctx, id: Id, node: &ENode, out: &mut Vec<Rhs>) {
    if node.op != Op::Lookup {
        return;
    }
    let (d, k) = (node.children[0], node.children[1]);
    if cx.is_zero(d) {
        if let Some(z) = cx.zero(id) {
            out.push(z);
        }
    }
    for m in cx.nodes(d) {
        let kids = &m.children;
        match &m.op {
            Op::Sum(s, v) if cx.avoids(k, &[s, v]) => out.push(n(
                m.op.clone(),
                vec![c(kids[0]), n(Op::Lookup, vec![c(kids[1]), c(k)])],
            )),
            Op::Singleton => {
                let key = cx.unwrap_unique(kids[0]);
                if cx.g.find(key) == cx.g.find(k) {
                    out.push(c(kids[1]));
                } else {
                    out.push(n(Op::If, vec![n(Op::Eq, vec![c(key), c(k)]), c(kids[1])]));
                }
            }
            Op::Let(x) if cx.avoids(k, &[x]) => out.push(n(
                m.op.clone(),
                vec![c(kids[0]), n(Op::Lookup, vec![c(kids[1]), c(k)])],
            )),
            Op::If => out.push(n(Op::If, vec![c(kids[0]), n(Op::Lookup, vec![c(kids[1]), c(k)])])),
            Op::Add => out.push(n(
                Op::Add,
                vec![n(Op::Lookup, vec![c(kids[0]), c(k)]), n(Op::Lookup, vec![c(kids[1]), c(k)])],
            )),
            // Keys are assumed to lie inside the range.
            Op::Range => out.push(c(k)),
            _ => {}
        }
    }
}

/// `sum(<k, v> in R) if k = e then b ~> let k = e in let v = R(e) in b`
/// when `R` stores every key.
fn dense_collapse(cx: &Ctx, _: Id, node: &ENode, out: &mut Vec<Rhs>) {
    let Op::Sum(k, v) = &node.op else { return };
    let (r, body) = (node.children[0], node.children[1]);
    if !cx.is_dense(r) {
        return;
    }
    for m in cx.with_op(body, |o| *o == Op::If) {
        for eq in cx.with_op(m.children[0], |o| *o == Op::Eq) {
            let (a, b) = (eq.children[0], eq.children[1]);
            for (var, e) in [(a, b), (b, a)] {
                if !cx.has_var(var, k) || !cx.avoids(e, &[k, v]) {
                    continue;
                }
                let then = m.children[1];
                let inner = if v == "_" || cx.avoids(then, &[v]) {
                    c(then)
                } else {
                    n(Op::Let(v.clone()), vec![n(Op::Lookup, vec![c(r), c(e)]), c(then)])
                };
                out.push(n(Op::Let(k.clone()), vec![c(e), inner]));
            }
        }
    }
}

fn sum_rules(cx: &Ctx, id: Id, node: &ENode, out: &mut Vec<Rhs>) {
    let Op::Sum(k, v) = &node.op else { return };
    let (r, body) = (node.children[0], node.children[1]);
    let bound = [k, v];
    if cx.is_zero(r) || cx.is_zero(body) {
        if let Some(z) = cx.zero(id) {
            out.push(z);
        }
    }
    let resum = |b: Rhs| n(node.op.clone(), vec![c(r), b]);
    for m in cx.nodes(body) {
        let kids = &m.children;
        match &m.op {
            Op::If if cx.avoids(kids[0], &bound) => {
                out.push(n(Op::If, vec![c(kids[0]), resum(c(kids[1]))]));
            }
            Op::Singleton if cx.avoids(kids[0], &bound) => {
                out.push(n(Op::Singleton, vec![c(kids[0]), resum(c(kids[1]))]));
            }
            Op::Singleton if cx.has_var(kids[0], k) && cx.is_logical_tensor(r) => {
                let val = kids[1];
                if cx.has_var(val, v) {
                    out.push(c(r));
                }
                for mul in cx.with_op(val, |o| *o == Op::Mul) {
                    let (a, b) = (mul.children[0], mul.children[1]);
                    if cx.has_var(b, v) && cx.is_real(a) && cx.avoids(a, &bound) {
                        out.push(n(Op::Mul, vec![c(a), c(r)]));
                    }
                    if cx.has_var(a, v) && cx.avoids(b, &bound) {
                        out.push(n(Op::Mul, vec![c(r), c(b)]));
                    }
                }
            }
            Op::Mul => {
                let (a, b) = (kids[0], kids[1]);
                if cx.avoids(a, &bound) {
                    out.push(n(Op::Mul, vec![c(a), resum(c(b))]));
                }
                if cx.avoids(b, &bound) {
                    out.push(n(Op::Mul, vec![resum(c(a)), c(b)]));
                }
            }
            _ => {}
        }
    }
    for m in cx.nodes(r) {
        let kids = &m.children;
        match &m.op {
            Op::Let(x) if cx.avoids(body, &[x]) => {
                out.push(n(m.op.clone(), vec![c(kids[0]), n(node.op.clone(), vec![c(kids[1]), c(body)])]));
            }
            Op::If => out.push(n(Op::If, vec![c(kids[0]), n(node.op.clone(), vec![c(kids[1]), c(body)])])),
            _ => {}
        }
    }
}

/// Vertical loop fusion:
/// `sum(<k, v> in sum(<k2, v2> in R) { f -> g }) b ~> sum(<k2, v2> in R) let k = f in let v = g in b`.
///
/// The keys `f` must be pairwise distinct, either by a `unique` promise or
/// because `f` is the key of the inner loop. `b` must vanish when `v` is zero,
/// since the inner dictionary elides zero values.
fn fusion(cx: &Ctx, _: Id, node: &ENode, out: &mut Vec<Rhs>) {
    let Op::Sum(k, v) = &node.op else { return };
    let (s, body) = (node.children[0], node.children[1]);
    if v != "_" && !cx.g.data(body).strict.holds(v) {
        return;
    }
    if v == "_" && !cx.g.data(body).strict.all {
        return;
    }
    for inner in cx.with_op(s, |o| matches!(o, Op::Sum(..))) {
        let Op::Sum(k2, v2) = &inner.op else { continue };
        if !cx.avoids(body, &[k2, v2]) {
            continue;
        }
        let (r, ib) = (inner.children[0], inner.children[1]);
        let rebuild = |key: Id, val: Id| {
            let key = cx.unwrap_unique(key);
            let b = if v == "_" {
                c(body)
            } else {
                n(Op::Let(v.clone()), vec![c(val), c(body)])
            };
            if k == "_" {
                b
            } else {
                n(Op::Let(k.clone()), vec![c(key), b])
            }
        };
        let licensed = |key: Id| cx.is_unique(key) || cx.has_var(key, k2);
        for m in cx.nodes(ib) {
            match &m.op {
                Op::Singleton if licensed(m.children[0]) => {
                    out.push(n(inner.op.clone(), vec![c(r), rebuild(m.children[0], m.children[1])]));
                }
                Op::If => {
                    for sg in cx.with_op(m.children[1], |o| *o == Op::Singleton) {
                        if licensed(sg.children[0]) {
                            out.push(n(
                                inner.op.clone(),
                                vec![c(r), n(Op::If, vec![c(m.children[0]), rebuild(sg.children[0], sg.children[1])])],
                            ));
                        }
                    }
                }
                _ => {}
            }
        }
    }
}

fn mul_rules(cx: &Ctx, _: Id, node: &ENode, out: &mut Vec<Rhs>) {
    if node.op != Op::Mul {
        return;
    }
    let (a, b) = (node.children[0], node.children[1]);
    for m in cx.with_op(a, |o| *o == Op::Singleton) {
        out.push(n(Op::Singleton, vec![c(m.children[0]), n(Op::Mul, vec![c(m.children[1]), c(b)])]));
    }
    if cx.is_real(a) {
        for m in cx.with_op(b, |o| *o == Op::Singleton) {
            out.push(n(Op::Singleton, vec![c(m.children[0]), n(Op::Mul, vec![c(a), c(m.children[1])])]));
        }
    }
    for m in cx.with_op(a, |o| *o == Op::Mul) {
        out.push(n(Op::Mul, vec![c(m.children[0]), n(Op::Mul, vec![c(m.children[1]), c(b)])]));
    }
    for m in cx.with_op(b, |o| *o == Op::Mul) {
        out.push(n(Op::Mul, vec![n(Op::Mul, vec![c(a), c(m.children[0])]), c(m.children[1])]));
    }
    let scalar = |id| matches!(cx.ty(id), Some(Type::Real | Type::Int));
    if scalar(a) && cx.ty(a) == cx.ty(b) {
        out.push(n(Op::Mul, vec![c(b), c(a)]));
    }
}

/// Pulls a real factor out of a singleton, `let` or `if`.
fn factor_rules(cx: &Ctx, _: Id, node: &ENode, out: &mut Vec<Rhs>) {
    let (wrap, inner): (fn(&ENode, Rhs) -> Rhs, Id) = match &node.op {
        Op::Singleton => (|nd, b| n(Op::Singleton, vec![c(nd.children[0]), b]), node.children[1]),
        Op::Let(_) => (|nd, b| n(nd.op.clone(), vec![c(nd.children[0]), b]), node.children[1]),
        Op::If => (|nd, b| n(Op::If, vec![c(nd.children[0]), b]), node.children[1]),
        _ => return,
    };
    let bound = node.op.binders();
    for m in cx.with_op(inner, |o| *o == Op::Mul) {
        let (a, b) = (m.children[0], m.children[1]);
        let movable = match node.op {
            Op::Singleton => cx.is_real(a),
            _ => true,
        };
        if movable && cx.avoids(a, &bound) {
            out.push(n(Op::Mul, vec![c(a), wrap(node, c(b))]));
        }
    }
}

fn if_rules(cx: &Ctx, id: Id, node: &ENode, out: &mut Vec<Rhs>) {
    if node.op != Op::If {
        return;
    }
    let (cond, then) = (node.children[0], node.children[1]);
    for m in cx.nodes(cond) {
        match m.op {
            Op::Bool(true) => out.push(c(then)),
            Op::Bool(false) => out.extend(cx.zero(id)),
            _ => {}
        }
    }
    if cx.is_zero(then) {
        out.extend(cx.zero(id));
    }
    for m in cx.with_op(then, |o| *o == Op::Singleton) {
        out.push(n(Op::Singleton, vec![c(m.children[0]), n(Op::If, vec![c(cond), c(m.children[1])])]));
    }
}

fn fold_rules(cx: &Ctx, id: Id, node: &ENode, out: &mut Vec<Rhs>) {
    let kids = &node.children;
    match &node.op {
        Op::Add | Op::Mul | Op::Eq => {
            let (a, b) = (kids[0], kids[1]);
            let lit = match (&node.op, cx.real(a), cx.real(b), cx.int(a), cx.int(b)) {
                (Op::Add, Some(x), Some(y), ..) => Some(Op::real(x + y)),
                (Op::Mul, Some(x), Some(y), ..) => Some(Op::real(x * y)),
                (Op::Add, _, _, Some(x), Some(y)) => x.checked_add(y).map(Op::Int),
                (Op::Mul, _, _, Some(x), Some(y)) => x.checked_mul(y).map(Op::Int),
                (Op::Eq, _, _, Some(x), Some(y)) => Some(Op::Bool(x == y)),
                _ => None,
            };
            if let Some(op) = lit {
                out.push(n(op, vec![]));
            }
            match node.op {
                Op::Add => {
                    if cx.is_zero(b) {
                        out.push(c(a));
                    }
                    if cx.is_zero(a) {
                        out.push(c(b));
                    }
                }
                Op::Mul => {
                    if cx.real(a) == Some(1.0) {
                        out.push(c(b));
                    }
                    if cx.real(b) == Some(1.0) {
                        out.push(c(a));
                    }
                    if cx.is_zero(a) || cx.is_zero(b) {
                        out.extend(cx.zero(id));
                    }
                }
                _ => {
                    if cx.g.find(a) == cx.g.find(b) {
                        out.push(n(Op::Bool(true), vec![]));
                    }
                    out.push(n(Op::Eq, vec![c(b), c(a)]));
                }
            }
        }
        Op::Not => {
            for m in cx.nodes(kids[0]) {
                if let Op::Bool(b) = m.op {
                    out.push(n(Op::Bool(!b), vec![]));
                }
            }
        }
        _ => {}
    }
}

/// Pushes a real factor into a `sum`, the inverse of factoring.
fn push_rules(cx: &Ctx, _: Id, node: &ENode, out: &mut Vec<Rhs>) {
    if node.op != Op::Mul || !cx.is_real(node.children[0]) {
        return;
    }
    let (a, b) = (node.children[0], node.children[1]);
    for m in cx.nodes(b) {
        match &m.op {
            Op::Sum(k, v) if cx.avoids(a, &[k, v]) => out.push(n(
                m.op.clone(),
                vec![c(m.children[0]), n(Op::Mul, vec![c(a), c(m.children[1])])],
            )),
            Op::Let(x) if cx.avoids(a, &[x]) => out.push(n(
                m.op.clone(),
                vec![c(m.children[0]), n(Op::Mul, vec![c(a), c(m.children[1])])],
            )),
            _ => {}
        }
    }
}

/// Rules for saturation before storage composition and after it.
pub fn algebraic() -> Vec<Rule> {
    vec![
        rule("let-var", let_var),
        rule("let-dead", let_dead),
        Rule {
            name: "let-inline",
            search: let_inline,
            once: true,
        },
        rule("lookup", lookup_rules),
        rule("dense-collapse", dense_collapse),
        rule("sum", sum_rules),
        rule("fusion", fusion),
        rule("mul", mul_rules),
        rule("factor", factor_rules),
        rule("if", if_rules),
        rule("fold", fold_rules),
    ]
}

/// Rules for the clean-up after multiplication normalization: no rule here
/// reintroduces a non-scalar product.
pub fn cleanup() -> Vec<Rule> {
    vec![
        rule("let-var", let_var),
        rule("let-dead", let_dead),
        Rule {
            name: "let-inline",
            search: let_inline,
            once: true,
        },
        rule("lookup", lookup_rules),
        rule("dense-collapse", dense_collapse),
        rule("fusion", fusion),
        rule("if", if_rules),
        rule("fold", fold_rules),
        rule("push", push_rules),
    ]
}
