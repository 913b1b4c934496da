//! The equality-saturation driver.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use super::cost::CostModel;
use super::egraph::{EGraph, ENode, Id, Op};
use super::extract::Extractor;
use super::rules::{Ctx, Rhs, Rule};
use super::simplify::inline_lets;
use crate::lang::subst::{free_vars, uniquify, FreshNamer};
use crate::lang::{Expr, Name, Type, TypeEnv, TypeError};

#[derive(Debug, Clone)]
pub struct SaturationConfig {
    pub iter_limit: usize,
    pub node_limit: usize,
    /// Inputs stored densely: lookups into them can be resolved by key.
    pub dense: BTreeSet<Name>,
}

impl Default for SaturationConfig {
    fn default() -> Self {
        SaturationConfig {
            iter_limit: 24,
            node_limit: 50_000,
            dense: BTreeSet::new(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Saturated {
    pub expr: Expr,
    /// False when a budget ran out before a fixpoint was reached.
    pub complete: bool,
    pub iterations: usize,
    pub nodes: usize,
    pub classes: usize,
    pub cost_before: u64,
    pub cost_after: u64,
    /// Name of every rule that added a new equality, with a count.
    pub fired: BTreeMap<&'static str, usize>,
}

fn build(g: &mut EGraph, rhs: &Rhs) -> Result<Id, TypeError> {
    match rhs {
        Rhs::Class(id) => Ok(*id),
        Rhs::Term(e) => g.add_expr(e),
        Rhs::Node(op, kids) => {
            let ids = kids.iter().map(|k| build(g, k)).collect::<Result<Vec<_>, _>>()?;
            match op {
                Op::Let(x) => {
                    if let Some(t) = g.ty(ids[0]).cloned() {
                        g.declare(x, t);
                    }
                }
                Op::Sum(k, v) => {
                    if let Some(Type::Dict(kt, vt)) = g.ty(ids[0]).cloned() {
                        g.declare(k, *kt);
                        g.declare(v, *vt);
                    }
                }
                _ => {}
            }
            Ok(g.add(ENode::new(op.clone(), ids)))
        }
    }
}

/// Cost of a term under `cost`, or `None` if it does not typecheck.
pub fn term_cost(env: &TypeEnv, e: &Expr, cost: &dyn CostModel) -> Option<u64> {
    let e = uniquify(e, &mut FreshNamer::new());
    let mut g = EGraph::new(env);
    let root = g.add_expr(&e).ok()?;
    Extractor::new(&g, cost).cost(root)
}

/// Saturates `e` under `rules` and extracts the cheapest equivalent term.
pub fn saturate(
    env: &TypeEnv,
    e: &Expr,
    rules: &[Rule],
    cost: &dyn CostModel,
    cfg: &SaturationConfig,
) -> Result<Saturated, TypeError> {
    let start = inline_lets(&uniquify(e, &mut FreshNamer::new()));
    let mut g = EGraph::new(env);
    let root = g.add_expr(&start)?;
    let cost_before = term_cost(env, e, cost).unwrap_or(u64::MAX);
    let mut applied: BTreeSet<(usize, ENode)> = BTreeSet::new();
    let mut fired = BTreeMap::new();
    let mut complete = false;
    let mut iterations = 0;
    while iterations < cfg.iter_limit {
        iterations += 1;
        let mut found: Vec<(usize, Id, Rhs)> = Vec::new();
        // Matches are capped like nodes, so one explosive iteration cannot
        // exhaust memory before the node limit is checked.
        let mut capped = false;
        'search: {
            let best = Extractor::new(&g, cost);
            let cx = Ctx {
                g: &g,
                dense: &cfg.dense,
                best: &best,
            };
            for id in g.class_ids() {
                for node in &g.class(id).nodes {
                    for (ri, rule) in rules.iter().enumerate() {
                        if rule.once && !applied.insert((ri, node.clone())) {
                            continue;
                        }
                        let mut out = Vec::new();
                        (rule.search)(&cx, id, node, &mut out);
                        found.extend(out.into_iter().map(|r| (ri, id, r)));
                        if found.len() >= cfg.node_limit {
                            capped = true;
                            break 'search;
                        }
                    }
                }
            }
        }
        let before = (g.num_nodes(), g.num_classes());
        let mut changed = false;
        let mut over = false;
        for (ri, id, rhs) in found {
            let new = build(&mut g, &rhs)?;
            let compatible = match (g.ty(id), g.ty(new)) {
                (Some(a), Some(b)) => a.compatible(b),
                _ => true,
            };
            if compatible && g.union(id, new) {
                changed = true;
                *fired.entry(rules[ri].name).or_insert(0) += 1;
            }
            if g.num_nodes() > cfg.node_limit {
                over = true;
                break;
            }
        }
        g.rebuild();
        if over || capped {
            break;
        }
        if !changed && before == (g.num_nodes(), g.num_classes()) {
            complete = true;
            break;
        }
    }
    let best = Extractor::new(&g, cost);
    let scope: BTreeSet<Name> = free_vars(&start);
    let mut expr = best.scoped_expr(root, &scope, cost).unwrap_or_else(|| start.clone());
    let mut cost_after = best.cost(root).unwrap_or(u64::MAX);
    if let Some(c) = term_cost(env, &expr, cost) {
        cost_after = c;
    }
    if cost_after >= cost_before {
        expr = e.clone();
        cost_after = cost_before;
    }
    Ok(Saturated {
        expr,
        complete,
        iterations,
        nodes: g.num_nodes(),
        classes: g.num_classes(),
        cost_before,
        cost_after,
        fired,
    })
}
