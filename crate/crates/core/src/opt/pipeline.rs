//! The full optimization pipeline from a logical kernel to a normalized
//! physical term.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::vec::Vec;

use super::cost::SparseCost;
use super::normalize::normalize_mult;
use super::rules::{algebraic, cleanup, Rule};
use super::saturate::{saturate, SaturationConfig};
use super::sparsity::propagate_sparsity;
use super::storage::{compose_storage, StorageError, StorageSpec};
use crate::autodiff::{expand_gradient, tangent_type, to_anf, to_scalar_anf, FadError};
use crate::lang::subst::free_vars;
use crate::lang::{type_of, zero_of, Expr, Name, TypeEnv, TypeError};

/// Stage names in pipeline order.
pub const STAGES: [&str; 11] = [
    "input",
    "pre-saturation",
    "anf",
    "ad",
    "sparsity",
    "post-ad",
    "storage",
    "storage-saturation",
    "normalize",
    "cleanup",
    "final-anf",
];

#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Input to differentiate against; `None` skips the gradient stages.
    pub wrt: Option<Name>,
    /// Storage formats; `None` keeps every tensor as nested dictionaries.
    pub specs: Option<Vec<StorageSpec>>,
    pub iter_limit: usize,
    pub node_limit: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let s = SaturationConfig::default();
        PipelineConfig {
            wrt: None,
            specs: None,
            iter_limit: s.iter_limit,
            node_limit: s.node_limit,
        }
    }
}

/// Statistics of one saturation run.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SaturationStats {
    pub complete: bool,
    pub iterations: usize,
    pub nodes: usize,
    pub cost_before: u64,
    pub cost_after: u64,
    pub fired: BTreeMap<&'static str, usize>,
}

#[derive(Debug, Clone)]
pub struct Stage {
    pub name: &'static str,
    pub expr: Expr,
    /// Types of the free variables of `expr`.
    pub env: TypeEnv,
    pub saturation: Option<SaturationStats>,
}

#[derive(Debug, Clone)]
pub struct Optimized {
    pub stages: Vec<Stage>,
}

impl Optimized {
    pub fn last(&self) -> &Stage {
        self.stages.last().expect("pipeline records at least the input")
    }

    pub fn result(&self) -> &Expr {
        &self.last().expr
    }

    /// Types of the physical inputs of the result.
    pub fn env(&self) -> &TypeEnv {
        &self.last().env
    }

    pub fn stage(&self, name: &str) -> Option<&Stage> {
        self.stages.iter().find(|s| s.name == name)
    }

    /// Saturation stages that hit a budget before reaching a fixpoint.
    pub fn incomplete(&self) -> Vec<&'static str> {
        self.stages
            .iter()
            .filter(|s| s.saturation.as_ref().is_some_and(|t| !t.complete))
            .map(|s| s.name)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Fad(#[from] FadError),
    #[error(transparent)]
    Storage(#[from] StorageError),
}

struct Run<'a> {
    cfg: &'a PipelineConfig,
    dense: BTreeSet<Name>,
    stages: Vec<Stage>,
}

impl Run<'_> {
    fn push(&mut self, name: &'static str, expr: Expr, env: &TypeEnv) -> Result<(), TypeError> {
        type_of(env, &expr)?;
        self.stages.push(Stage {
            name,
            expr,
            env: env.clone(),
            saturation: None,
        });
        Ok(())
    }

    fn saturate(&mut self, name: &'static str, env: &TypeEnv, rules: &[Rule], dense: bool) -> Result<(), TypeError> {
        let cfg = SaturationConfig {
            iter_limit: self.cfg.iter_limit,
            node_limit: self.cfg.node_limit,
            dense: if dense { self.dense.clone() } else { BTreeSet::new() },
        };
        let input = self.current().clone();
        let r = saturate(env, &input, rules, &SparseCost::default(), &cfg)?;
        self.push(name, r.expr, env)?;
        self.stages.last_mut().unwrap().saturation = Some(SaturationStats {
            complete: r.complete,
            iterations: r.iterations,
            nodes: r.nodes,
            cost_before: r.cost_before,
            cost_after: r.cost_after,
            fired: r.fired,
        });
        Ok(())
    }

    fn current(&self) -> &Expr {
        &self.stages.last().unwrap().expr
    }
}

/// Runs every stage on `e`, recording each intermediate term.
pub fn optimize_pipeline(env: &TypeEnv, e: &Expr, cfg: &PipelineConfig) -> Result<Optimized, PipelineError> {
    let mut run = Run {
        cfg,
        dense: cfg
            .specs
            .iter()
            .flatten()
            .filter(|s| s.is_dense())
            .map(|s| s.tensor.clone())
            .collect(),
        stages: Vec::new(),
    };
    if let Some(wrt) = &cfg.wrt {
        if !free_vars(e).contains(wrt) {
            return Err(FadError::NotFree(wrt.clone()).into());
        }
    }
    run.push("input", e.clone(), env)?;
    let logical = algebraic();
    run.saturate("pre-saturation", env, &logical, true)?;
    if let Some(wrt) = &cfg.wrt {
        let anf = to_anf(run.current());
        run.push("anf", anf, env)?;
        // Simplification can remove `wrt` entirely, leaving a zero gradient.
        let grad = if free_vars(run.current()).contains(wrt) {
            expand_gradient(run.current(), wrt, env)?
        } else {
            let tau = env.get(wrt).ok_or_else(|| TypeError::Unbound(wrt.clone()))?;
            zero_of(&tangent_type(&type_of(env, run.current())?, &tau.logical())?)?
        };
        run.push("ad", grad, env)?;
        let sparse = propagate_sparsity(env, run.current())?;
        run.push("sparsity", sparse, env)?;
        run.saturate("post-ad", env, &logical, true)?;
    }
    let physical = match &cfg.specs {
        Some(specs) => {
            let c = compose_storage(env, run.current(), specs)?;
            run.push("storage", c.expr, &c.env)?;
            run.saturate("storage-saturation", &c.env, &logical, false)?;
            c.env
        }
        None => env.clone(),
    };
    let normal = normalize_mult(&physical, run.current())?;
    run.push("normalize", normal, &physical)?;
    run.saturate("cleanup", &physical, &cleanup(), false)?;
    let fin = to_scalar_anf(&physical, &run.current().clone().strip_unique());
    run.push("final-anf", fin, &physical)?;
    Ok(Optimized { stages: run.stages })
}
