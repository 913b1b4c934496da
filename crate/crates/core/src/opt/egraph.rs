//! An e-graph over SDQLite terms.
//!
//! Binders keep their names. Inputs are uniquified first, so each binder name
//! identifies one binding site and carries one type. Every equality the rules
//! add holds for all values of the free variables involved, which makes
//! sharing a class across scopes harmless. Extraction is scope-aware, so no
//! variable is ever read outside its binder.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::lang::{typecheck, Expr, Name, Type, TypeEnv, TypeError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Id(u32);

impl Id {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for Id {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

/// Operator of an e-node. The declaration order is the tie-break order of
/// extraction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Op {
    Var(Name),
    Real(u64),
    Int(i64),
    Bool(bool),
    Empty,
    Lookup,
    Singleton,
    Mul,
    Add,
    Eq,
    Not,
    Unary(Name),
    If,
    Range,
    SubArray,
    Unique,
    Let(Name),
    Sum(Name, Name),
}

impl Op {
    pub fn real(r: f64) -> Op {
        // One representation for both zeros.
        Op::Real(if r == 0.0 { 0 } else { r.to_bits() })
    }

    pub fn as_real(&self) -> Option<f64> {
        match self {
            Op::Real(bits) => Some(f64::from_bits(*bits)),
            _ => None,
        }
    }

    pub fn arity(&self) -> usize {
        match self {
            Op::Var(_) | Op::Real(_) | Op::Int(_) | Op::Bool(_) | Op::Empty => 0,
            Op::Not | Op::Unary(_) | Op::Unique => 1,
            Op::SubArray => 3,
            _ => 2,
        }
    }

    /// Names bound over the last child.
    pub fn binders(&self) -> Vec<&Name> {
        match self {
            Op::Let(x) => alloc::vec![x],
            Op::Sum(k, v) => alloc::vec![k, v],
            _ => Vec::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ENode {
    pub op: Op,
    pub children: Vec<Id>,
}

impl ENode {
    pub fn new(op: Op, children: Vec<Id>) -> Self {
        debug_assert_eq!(op.arity(), children.len());
        ENode { op, children }
    }

    pub fn leaf(op: Op) -> Self {
        ENode::new(op, Vec::new())
    }

    /// Builds the term for this node from terms for its children.
    pub fn to_expr(&self, mut kids: Vec<Expr>) -> Expr {
        let mut next = || kids.remove(0);
        match &self.op {
            Op::Var(x) => Expr::Var(x.clone()),
            Op::Real(_) => Expr::Real(self.op.as_real().unwrap()),
            Op::Int(n) => Expr::Int(*n),
            Op::Bool(b) => Expr::Bool(*b),
            Op::Empty => Expr::EmptyDict,
            Op::Lookup => {
                let d = next();
                Expr::lookup(d, next())
            }
            Op::Singleton => {
                let k = next();
                Expr::singleton(k, next())
            }
            Op::Mul => {
                let a = next();
                Expr::mul(a, next())
            }
            Op::Add => {
                let a = next();
                Expr::add(a, next())
            }
            Op::Eq => {
                let a = next();
                Expr::eq(a, next())
            }
            Op::Not => Expr::not(next()),
            Op::Unary(op) => Expr::unary(op.clone(), next()),
            Op::If => {
                let c = next();
                Expr::if_then(c, next())
            }
            Op::Range => {
                let s = next();
                Expr::range(s, next())
            }
            Op::SubArray => {
                let a = next();
                let s = next();
                Expr::sub_array(a, s, next())
            }
            Op::Unique => Expr::unique(next()),
            Op::Let(x) => {
                let b = next();
                Expr::let_in(x.clone(), b, next())
            }
            Op::Sum(k, v) => {
                let r = next();
                Expr::sum(k.clone(), v.clone(), r, next())
            }
        }
    }
}

/// Splits a term into its operator and children.
pub fn op_of(e: &Expr) -> (Op, Vec<&Expr>) {
    let op = match e {
        Expr::Var(x) => Op::Var(x.clone()),
        Expr::Real(r) => Op::real(*r),
        Expr::Int(n) => Op::Int(*n),
        Expr::Bool(b) => Op::Bool(*b),
        Expr::EmptyDict => Op::Empty,
        Expr::Lookup { .. } => Op::Lookup,
        Expr::Singleton { .. } => Op::Singleton,
        Expr::Mul(..) => Op::Mul,
        Expr::Add(..) => Op::Add,
        Expr::Eq(..) => Op::Eq,
        Expr::Not(_) => Op::Not,
        Expr::Unary { op, .. } => Op::Unary(op.clone()),
        Expr::If { .. } => Op::If,
        Expr::Range { .. } => Op::Range,
        Expr::SubArray { .. } => Op::SubArray,
        Expr::Unique(_) => Op::Unique,
        Expr::Let { var, .. } => Op::Let(var.clone()),
        Expr::Sum { key, val, .. } => Op::Sum(key.clone(), val.clone()),
    };
    (op, e.children())
}

/// Variables whose zero makes the class zero; `all` when the class is zero.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Strict {
    pub all: bool,
    pub vars: BTreeSet<Name>,
}

impl Strict {
    pub fn holds(&self, x: &str) -> bool {
        self.all || self.vars.contains(x)
    }

    fn zero() -> Self {
        Strict {
            all: true,
            vars: BTreeSet::new(),
        }
    }

    fn var(x: &str) -> Self {
        Strict {
            all: false,
            vars: [String::from(x)].into_iter().collect(),
        }
    }
}

/// Per-class analysis.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Data {
    /// `None` until every child has a type.
    pub ty: Option<Type>,
    /// Intersection over members: a variable outside this set can be avoided.
    pub fv: BTreeSet<Name>,
    pub strict: Strict,
}

impl Data {
    /// Merges `other` in; true when `self` changed.
    fn merge(&mut self, other: &Data) -> bool {
        let old = self.clone();
        self.ty = match (self.ty.take(), &other.ty) {
            (None, t) => t.clone(),
            // A zero class can hold `{k -> self}`; refining by partial types
            // only from `empty` keeps its type from growing on every rebuild.
            (Some(a), Some(b)) if a.compatible(b) && (!b.is_partial() || a == Type::Empty) => Some(a.join(b)),
            (a, _) => a,
        };
        self.fv = self.fv.intersection(&other.fv).cloned().collect();
        self.strict.all |= other.strict.all;
        self.strict.vars.extend(other.strict.vars.iter().cloned());
        *self != old
    }
}

#[derive(Debug, Clone)]
pub struct EClass {
    pub nodes: Vec<ENode>,
    parents: Vec<(ENode, Id)>,
    pub data: Data,
}

#[derive(Debug, Clone, Default)]
pub struct EGraph {
    uf: Vec<u32>,
    classes: Vec<Option<EClass>>,
    memo: BTreeMap<ENode, Id>,
    pending: Vec<Id>,
    analysis_pending: Vec<Id>,
    vars: BTreeMap<Name, Type>,
    nodes: usize,
}

impl EGraph {
    /// An empty graph whose free variables have the given types.
    pub fn new(env: &TypeEnv) -> Self {
        let mut g = EGraph::default();
        for (x, t) in env.iter() {
            g.vars.insert(x.clone(), t.clone());
        }
        g
    }

    pub fn find(&self, mut id: Id) -> Id {
        while self.uf[id.index()] != id.0 {
            id = Id(self.uf[id.index()]);
        }
        id
    }

    fn find_mut(&mut self, id: Id) -> Id {
        let root = self.find(id);
        let mut cur = id;
        while cur != root {
            let next = Id(self.uf[cur.index()]);
            self.uf[cur.index()] = root.0;
            cur = next;
        }
        root
    }

    pub fn class(&self, id: Id) -> &EClass {
        self.classes[self.find(id).index()].as_ref().expect("canonical class")
    }

    pub fn data(&self, id: Id) -> &Data {
        &self.class(id).data
    }

    pub fn ty(&self, id: Id) -> Option<&Type> {
        self.data(id).ty.as_ref()
    }

    /// Canonical ids of all classes.
    pub fn class_ids(&self) -> impl Iterator<Item = Id> + '_ {
        self.classes
            .iter()
            .enumerate()
            .filter(|(_, c)| c.is_some())
            .map(|(i, _)| Id(i as u32))
    }

    pub fn num_classes(&self) -> usize {
        self.classes.iter().filter(|c| c.is_some()).count()
    }

    /// Number of distinct e-nodes ever added.
    pub fn num_nodes(&self) -> usize {
        self.nodes
    }

    pub fn var_type(&self, x: &str) -> Option<&Type> {
        self.vars.get(x)
    }

    pub fn canonicalize(&self, node: &ENode) -> ENode {
        ENode {
            op: node.op.clone(),
            children: node.children.iter().map(|c| self.find(*c)).collect(),
        }
    }

    /// The class of `node`, if it is already present.
    pub fn lookup(&self, node: &ENode) -> Option<Id> {
        self.memo.get(&self.canonicalize(node)).map(|id| self.find(*id))
    }

    /// The class of term `e`, if every node of it is present.
    pub fn lookup_expr(&self, e: &Expr) -> Option<Id> {
        let (op, kids) = op_of(e);
        let children = kids
            .into_iter()
            .map(|k| self.lookup_expr(k))
            .collect::<Option<Vec<_>>>()?;
        self.lookup(&ENode::new(op, children))
    }

    pub fn add(&mut self, node: ENode) -> Id {
        let node = self.canonicalize(&node);
        if let Some(id) = self.memo.get(&node) {
            return self.find(*id);
        }
        let id = Id(self.uf.len() as u32);
        self.uf.push(id.0);
        let data = self.make(&node);
        for c in &node.children {
            self.classes[c.index()]
                .as_mut()
                .expect("canonical child")
                .parents
                .push((node.clone(), id));
        }
        self.classes.push(Some(EClass {
            nodes: alloc::vec![node.clone()],
            parents: Vec::new(),
            data,
        }));
        self.memo.insert(node, id);
        self.nodes += 1;
        id
    }

    /// Records the type of a binder introduced by a rule or a term.
    pub fn declare(&mut self, x: &str, ty: Type) {
        if x != "_" {
            self.vars.entry(x.into()).or_insert(ty);
        }
    }

    /// Adds a term, declaring its binders.
    pub fn add_expr(&mut self, e: &Expr) -> Result<Id, TypeError> {
        match e {
            Expr::Sum {
                key,
                val,
                range,
                body,
            } => {
                let r = self.add_expr(range)?;
                match self.ty(r).cloned() {
                    Some(Type::Dict(k, v)) => {
                        self.declare(key, *k);
                        self.declare(val, *v);
                    }
                    Some(Type::Empty) => {
                        self.declare(key, Type::Int);
                        self.declare(val, Type::Empty);
                    }
                    Some(other) => return Err(TypeError::NotDict(other)),
                    None => {}
                }
                let b = self.add_expr(body)?;
                Ok(self.add(ENode::new(Op::Sum(key.clone(), val.clone()), alloc::vec![r, b])))
            }
            Expr::Let { var, bound, body } => {
                let a = self.add_expr(bound)?;
                if let Some(t) = self.ty(a).cloned() {
                    self.declare(var, t);
                }
                let b = self.add_expr(body)?;
                Ok(self.add(ENode::new(Op::Let(var.clone()), alloc::vec![a, b])))
            }
            _ => {
                let (op, kids) = op_of(e);
                let children = kids
                    .into_iter()
                    .map(|k| self.add_expr(k))
                    .collect::<Result<Vec<_>, _>>()?;
                if let Op::Var(x) = &op {
                    if !self.vars.contains_key(x) {
                        return Err(TypeError::Unbound(x.clone()));
                    }
                }
                Ok(self.add(ENode::new(op, children)))
            }
        }
    }

    /// Merges two classes; true when they were distinct.
    pub fn union(&mut self, a: Id, b: Id) -> bool {
        let (mut a, mut b) = (self.find_mut(a), self.find_mut(b));
        if a == b {
            return false;
        }
        let size = |g: &Self, id: Id| g.classes[id.index()].as_ref().unwrap().parents.len();
        if size(self, a) < size(self, b) {
            core::mem::swap(&mut a, &mut b);
        }
        self.uf[b.index()] = a.0;
        let from = self.classes[b.index()].take().unwrap();
        let to = self.classes[a.index()].as_mut().unwrap();
        let a_changed = to.data.merge(&from.data);
        let b_changed = to.data != from.data;
        to.nodes.extend(from.nodes);
        to.parents.extend(from.parents);
        self.pending.push(a);
        if a_changed || b_changed {
            self.analysis_pending.push(a);
        }
        true
    }

    /// Restores congruence closure and the analysis invariants.
    pub fn rebuild(&mut self) {
        // Queues are deduplicated per batch: a class with many parents is
        // repaired once per batch, not once per union that touched it.
        while !self.pending.is_empty() || !self.analysis_pending.is_empty() {
            while !self.pending.is_empty() {
                let batch = core::mem::take(&mut self.pending);
                for id in self.canonical_batch(batch) {
                    self.repair(id);
                }
            }
            let batch = core::mem::take(&mut self.analysis_pending);
            for id in self.canonical_batch(batch) {
                let parents = self.classes[id.index()].as_ref().unwrap().parents.clone();
                for (node, pid) in parents {
                    let node = self.canonicalize(&node);
                    let pid = self.find(pid);
                    let fresh = self.make(&node);
                    let class = self.classes[pid.index()].as_mut().unwrap();
                    if class.data.merge(&fresh) {
                        self.analysis_pending.push(pid);
                    }
                }
            }
        }
        for i in 0..self.classes.len() {
            if let Some(mut class) = self.classes[i].take() {
                let mut nodes: Vec<ENode> = class.nodes.iter().map(|n| self.canonicalize(n)).collect();
                nodes.sort();
                nodes.dedup();
                class.nodes = nodes;
                self.classes[i] = Some(class);
            }
        }
    }

    fn canonical_batch(&self, ids: Vec<Id>) -> Vec<Id> {
        let mut ids: Vec<Id> = ids.into_iter().map(|id| self.find(id)).collect();
        ids.sort();
        ids.dedup();
        ids
    }

    fn repair(&mut self, id: Id) {
        let id = self.find(id);
        let Some(class) = self.classes[id.index()].as_mut() else {
            return;
        };
        let parents = core::mem::take(&mut class.parents);
        for (node, _) in &parents {
            self.memo.remove(node);
        }
        let mut kept: BTreeMap<ENode, Id> = BTreeMap::new();
        for (node, pid) in parents {
            let node = self.canonicalize(&node);
            let pid = self.find(pid);
            if let Some(other) = kept.get(&node).copied() {
                self.union(other, pid);
            }
            if let Some(other) = self.memo.get(&node).copied() {
                self.union(other, pid);
            }
            let pid = self.find(pid);
            self.memo.insert(node.clone(), pid);
            kept.insert(node, pid);
        }
        let id = self.find(id);
        let class = self.classes[id.index()].as_mut().unwrap();
        class.parents.extend(kept);
        self.analysis_pending.push(id);
    }

    fn make(&self, node: &ENode) -> Data {
        let kid = |i: usize| self.data(node.children[i]);
        let mut fv = BTreeSet::new();
        for (i, c) in node.children.iter().enumerate() {
            let bound = if i + 1 == node.children.len() {
                node.op.binders()
            } else {
                Vec::new()
            };
            fv.extend(self.data(*c).fv.iter().filter(|x| !bound.contains(x)).cloned());
        }
        if let Op::Var(x) = &node.op {
            fv.insert(x.clone());
        }
        let strict = match &node.op {
            Op::Var(x) => Strict::var(x),
            Op::Empty => Strict::zero(),
            Op::Real(0) => Strict::zero(),
            Op::Mul => {
                let (a, b) = (&kid(0).strict, &kid(1).strict);
                if a.all || b.all {
                    Strict::zero()
                } else {
                    Strict {
                        all: false,
                        vars: a.vars.union(&b.vars).cloned().collect(),
                    }
                }
            }
            Op::Add => {
                let (a, b) = (&kid(0).strict, &kid(1).strict);
                match (a.all, b.all) {
                    (true, _) => b.clone(),
                    (_, true) => a.clone(),
                    _ => Strict {
                        all: false,
                        vars: a.vars.intersection(&b.vars).cloned().collect(),
                    },
                }
            }
            Op::Singleton | Op::If => kid(1).strict.clone(),
            Op::Lookup | Op::Unique => kid(0).strict.clone(),
            Op::Sum(k, v) => {
                let (r, b) = (&kid(0).strict, &kid(1).strict);
                if r.all || b.all {
                    Strict::zero()
                } else {
                    let mut vars = r.vars.clone();
                    vars.extend(b.vars.iter().filter(|x| *x != k && *x != v).cloned());
                    Strict { all: false, vars }
                }
            }
            Op::Let(x) => {
                let (a, b) = (&kid(0).strict, &kid(1).strict);
                if b.all {
                    Strict::zero()
                } else {
                    let mut vars: BTreeSet<Name> = b.vars.iter().filter(|y| *y != x).cloned().collect();
                    if b.vars.contains(x) {
                        if a.all {
                            return Data {
                                ty: self.node_type(node),
                                fv,
                                strict: Strict::zero(),
                            };
                        }
                        vars.extend(a.vars.iter().cloned());
                    }
                    Strict { all: false, vars }
                }
            }
            _ => Strict::default(),
        };
        Data {
            ty: self.node_type(node),
            fv,
            strict,
        }
    }

    /// Type of a node from the types of its children, reusing the checker on a
    /// stub term whose children are placeholder variables.
    fn node_type(&self, node: &ENode) -> Option<Type> {
        if let Op::Var(x) = &node.op {
            return self.vars.get(x).cloned();
        }
        let mut env = TypeEnv::new();
        let mut kids = Vec::new();
        for (i, c) in node.children.iter().enumerate() {
            let name = alloc::format!("#{}", i);
            env.push(name.clone(), self.ty(*c)?.clone());
            kids.push(Expr::Var(name));
        }
        typecheck(&mut env, &node.to_expr(kids)).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse, Mode};

    fn p(s: &str) -> Expr {
        parse(s, Mode::Physical).unwrap()
    }

    fn env() -> TypeEnv {
        [("x", Type::Real), ("y", Type::Real), ("V", Type::tensor(1))]
            .into_iter()
            .collect()
    }

    #[test]
    fn hashcons_shares_subterms() {
        let mut g = EGraph::new(&env());
        let a = g.add_expr(&p("x * y + x * y")).unwrap();
        assert_eq!(g.num_classes(), 4);
        assert_eq!(g.ty(a), Some(&Type::Real));
    }

    #[test]
    fn congruence_after_union() {
        let mut g = EGraph::new(&env());
        let fx = g.add_expr(&p("sin(x)")).unwrap();
        let fy = g.add_expr(&p("sin(y)")).unwrap();
        let x = g.lookup_expr(&p("x")).unwrap();
        let y = g.lookup_expr(&p("y")).unwrap();
        assert_ne!(g.find(fx), g.find(fy));
        g.union(x, y);
        g.rebuild();
        assert_eq!(g.find(fx), g.find(fy));
    }

    #[test]
    fn free_variables_intersect_on_merge() {
        let mut g = EGraph::new(&env());
        let a = g.add_expr(&p("x * { }")).unwrap();
        let z = g.add_expr(&p("{ }")).unwrap();
        assert!(g.data(a).fv.contains("x"));
        g.union(a, z);
        g.rebuild();
        assert!(g.data(a).fv.is_empty());
    }

    #[test]
    fn strictness() {
        let mut g = EGraph::new(&env());
        let s = g.add_expr(&p("sum(<i, a> in V) { i -> a * x }")).unwrap();
        assert!(g.data(s).strict.holds("V"));
        assert!(g.data(s).strict.holds("x"));
        let t = g.add_expr(&p("x + y")).unwrap();
        assert!(!g.data(t).strict.holds("x"));
        let u = g.add_expr(&p("let z = x in z * y")).unwrap();
        assert!(g.data(u).strict.holds("x"));
    }

    #[test]
    fn binder_types_are_declared() {
        let mut g = EGraph::new(&env());
        g.add_expr(&p("sum(<i, a> in V) a")).unwrap();
        assert_eq!(g.var_type("i"), Some(&Type::Int));
        assert_eq!(g.var_type("a"), Some(&Type::Real));
    }
}
