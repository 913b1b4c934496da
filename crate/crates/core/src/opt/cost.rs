//! Cost model for extraction.
//!
//! Iterating a dictionary multiplies the cost of its body, so fused and
//! allocation-free terms win. The constants only need to order candidates
//! the right way; their absolute values carry no meaning.

use super::egraph::{EGraph, ENode, Op};
use crate::lang::Type;

pub trait CostModel {
    /// Cost of `node` given the costs of its children. Must be monotone in
    /// the child costs.
    fn node_cost(&self, g: &EGraph, node: &ENode, kids: &[u64]) -> u64;
}

/// The default model.
#[derive(Debug, Clone, Copy)]
pub struct SparseCost {
    pub scalar_op: u64,
    pub tensor_op: u64,
    pub hash_lookup: u64,
    pub range_lookup: u64,
    pub singleton: u64,
    /// Symbolic number of iterations of a `sum`.
    pub iteration: u64,
    /// Extra per-element cost of walking a hashed dictionary rather than an array.
    pub dict_iteration: u64,
    /// Penalty for materializing a dictionary in a `let`.
    pub dict_let: u64,
}

impl Default for SparseCost {
    fn default() -> Self {
        SparseCost {
            scalar_op: 1,
            tensor_op: 10,
            hash_lookup: 2,
            range_lookup: 1,
            singleton: 5,
            iteration: 10,
            dict_iteration: 4,
            dict_let: 3,
        }
    }
}

fn is_scalar(t: Option<&Type>) -> bool {
    matches!(t, Some(Type::Real | Type::Int | Type::DenseInt | Type::Bool))
}

/// Dense-keyed dictionaries are arrays or ranges.
fn is_array(t: Option<&Type>) -> bool {
    matches!(t, Some(Type::Dict(k, _)) if **k == Type::DenseInt)
}

impl CostModel for SparseCost {
    fn node_cost(&self, g: &EGraph, node: &ENode, kids: &[u64]) -> u64 {
        let sum = kids.iter().fold(0u64, |a, b| a.saturating_add(*b));
        let ty = |i: usize| g.ty(node.children[i]);
        let own = match &node.op {
            Op::Var(_) | Op::Real(_) | Op::Int(_) | Op::Bool(_) | Op::Empty => 1,
            Op::Unique => 0,
            Op::Mul | Op::Add => {
                if is_scalar(ty(0)) && is_scalar(ty(1)) {
                    self.scalar_op
                } else {
                    self.tensor_op
                }
            }
            Op::Lookup => {
                if is_array(ty(0)) {
                    self.range_lookup
                } else {
                    self.hash_lookup
                }
            }
            Op::Singleton => self.singleton,
            Op::Sum(..) => {
                let per = if is_array(ty(0)) { 0 } else { self.dict_iteration };
                return 1u64
                    .saturating_add(kids[0])
                    .saturating_add(self.iteration.saturating_mul(kids[1].saturating_add(per)));
            }
            Op::Let(_) => {
                let penalty = if ty(0).is_some_and(Type::is_dict) {
                    self.dict_let
                } else {
                    0
                };
                1 + penalty
            }
            _ => self.scalar_op,
        };
        own.saturating_add(sum)
    }
}
