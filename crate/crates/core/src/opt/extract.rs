//! Minimum-cost extraction.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use super::cost::CostModel;
use super::egraph::{EGraph, ENode, Id, Op};
use crate::lang::{Expr, Name};

/// Cost, size and operator: the extraction order.
type Key = (u64, usize, Op);

/// Best node of every class, computed bottom-up to a fixpoint.
pub struct Extractor<'a> {
    g: &'a EGraph,
    best: BTreeMap<Id, (Key, ENode)>,
}

impl<'a> Extractor<'a> {
    pub fn new(g: &'a EGraph, cost: &dyn CostModel) -> Self {
        let mut best: BTreeMap<Id, (Key, ENode)> = BTreeMap::new();
        loop {
            let mut changed = false;
            for id in g.class_ids() {
                for node in &g.class(id).nodes {
                    let Some(key) = node_key(g, cost, &best, node) else {
                        continue;
                    };
                    if best.get(&id).is_none_or(|(k, _)| key < *k) {
                        best.insert(id, (key, node.clone()));
                        changed = true;
                    }
                }
            }
            if !changed {
                break;
            }
        }
        Extractor { g, best }
    }

    pub fn cost(&self, id: Id) -> Option<u64> {
        self.best.get(&self.g.find(id)).map(|(k, _)| k.0)
    }

    /// Cheapest term of the class, ignoring scopes.
    pub fn best_expr(&self, id: Id) -> Option<Expr> {
        let (_, node) = self.best.get(&self.g.find(id))?;
        let kids = node
            .children
            .iter()
            .map(|c| self.best_expr(*c))
            .collect::<Option<Vec<_>>>()?;
        Some(node.to_expr(kids))
    }

    /// Cheapest term of the class whose free variables all lie in `scope`,
    /// trying the members of each class in cost order.
    pub fn scoped_expr(&self, id: Id, scope: &BTreeSet<Name>, cost: &dyn CostModel) -> Option<Expr> {
        let mut s = Scoped {
            x: self,
            cost,
            memo: BTreeMap::new(),
            active: BTreeSet::new(),
        };
        s.go(self.g.find(id), scope)
    }
}

fn node_key(g: &EGraph, cost: &dyn CostModel, best: &BTreeMap<Id, (Key, ENode)>, node: &ENode) -> Option<Key> {
    let mut costs = Vec::with_capacity(node.children.len());
    let mut size = 1usize;
    for c in &node.children {
        let ((k, s, _), _) = best.get(&g.find(*c))?;
        costs.push(*k);
        size = size.saturating_add(*s);
    }
    Some((cost.node_cost(g, node, &costs), size, node.op.clone()))
}

struct Scoped<'x, 'a> {
    x: &'x Extractor<'a>,
    cost: &'x dyn CostModel,
    memo: BTreeMap<(Id, BTreeSet<Name>), Option<Expr>>,
    active: BTreeSet<(Id, BTreeSet<Name>)>,
}

impl Scoped<'_, '_> {
    fn go(&mut self, id: Id, scope: &BTreeSet<Name>) -> Option<Expr> {
        let key = (id, scope.clone());
        if let Some(e) = self.memo.get(&key) {
            return e.clone();
        }
        if !self.active.insert(key.clone()) {
            return None;
        }
        let g = self.x.g;
        let mut nodes: Vec<(Key, &ENode)> = g
            .class(id)
            .nodes
            .iter()
            .filter_map(|n| node_key(g, self.cost, &self.x.best, n).map(|k| (k, n)))
            .collect();
        nodes.sort_by(|a, b| a.0.cmp(&b.0));
        let mut found = None;
        'nodes: for (_, node) in nodes {
            if let Op::Var(x) = &node.op {
                if !scope.contains(x) {
                    continue;
                }
            }
            let mut kids = Vec::new();
            for (i, c) in node.children.iter().enumerate() {
                let inner;
                let sc = if i + 1 == node.children.len() && !node.op.binders().is_empty() {
                    let mut s = scope.clone();
                    s.extend(node.op.binders().into_iter().cloned());
                    inner = s;
                    &inner
                } else {
                    scope
                };
                match self.go(g.find(*c), sc) {
                    Some(e) => kids.push(e),
                    None => continue 'nodes,
                }
            }
            found = Some(node.to_expr(kids));
            break;
        }
        self.active.remove(&key);
        // Failures may stem from a cycle through an active class, so only
        // successes are remembered.
        if found.is_some() {
            self.memo.insert(key, found.clone());
        }
        found
    }
}
