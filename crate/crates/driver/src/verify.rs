//! Checks compiled gradients against central finite differences of the source term.

use std::collections::BTreeMap;

use serde::Serialize;
use sdqlite::backend::{execute, Dps, ExecError};
use sdqlite::interp::fdiff::coordinates;
use sdqlite::interp::{compare, eval, finite_diff_on, Discrepancy, EvalError, FdError, Tolerance, Value, DEFAULT_EPS};
use sdqlite::lang::Name;
use sdqlite::opt::StorageSpec;

use crate::catalog::KernelEntry;
use crate::run::{physical_env, GradSupport, InstanceConfig, Program, RunError};

/// Agreement required between the compiled gradient and the loop IR.
pub const IR_TOLERANCE: Tolerance = Tolerance { abs: 1e-12, rel: 1e-12 };

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("evaluating the optimized gradient: {0}")]
    Eval(#[from] EvalError),
    #[error("finite differences: {0}")]
    Fd(#[from] FdError),
    #[error("running the loop IR: {0}")]
    Exec(#[from] ExecError),
}

#[derive(Debug, Clone)]
pub struct VerifyConfig {
    pub dim: usize,
    pub density: f64,
    pub seed: u64,
    pub support: GradSupport,
    pub eps: f64,
    pub tol: Tolerance,
    pub dps: Dps,
    /// Storage formats; the kernel's defaults when `None`.
    pub specs: Option<Vec<StorageSpec>>,
    /// Loaded tensors with their shapes, used in place of generated ones.
    pub loaded: Vec<(Name, Value, Vec<usize>)>,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            dim: 8,
            density: 0.25,
            seed: 0,
            support: GradSupport::Dense,
            eps: DEFAULT_EPS,
            tol: Tolerance::default(),
            dps: Dps::On,
            specs: None,
            loaded: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerifyReport {
    pub kernel: String,
    pub wrt: String,
    pub dim: usize,
    pub density: f64,
    pub seed: u64,
    pub support: GradSupport,
    pub eps: f64,
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub nnz: BTreeMap<String, usize>,
    /// Coordinates of `wrt` perturbed by finite differences.
    pub perturbed: usize,
    /// Gradient coordinates compared.
    pub compared: usize,
    pub failures: usize,
    pub max_abs: f64,
    pub max_rel: f64,
    pub shape_mismatch: bool,
    /// The loop IR reproduced the optimized term.
    pub ir_agrees: bool,
    /// Saturation stages that stopped at a limit.
    pub incomplete: Vec<&'static str>,
    pub passed: bool,
    #[serde(skip)]
    pub gradient: Value,
    #[serde(skip)]
    pub expected: Value,
}

pub fn verify_kernel(k: &KernelEntry, wrt: &str, cfg: &VerifyConfig) -> Result<VerifyReport, VerifyError> {
    verify(&Program::from_kernel(k)?, wrt, cfg)
}

/// Compiles `p` for `wrt`, runs it on a generated instance in physical form
/// and compares with finite differences on the logical inputs. Without specs
/// the term runs on nested dictionaries.
pub fn verify(p: &Program, wrt: &str, cfg: &VerifyConfig) -> Result<VerifyReport, VerifyError> {
    let specs = cfg.specs.clone().or_else(|| p.specs.clone());
    let compiled = p.compile(Some(wrt), specs.clone(), cfg.dps)?;
    let specs = specs.unwrap_or_default();
    let mut inst = p.instance(
        wrt,
        &specs,
        InstanceConfig {
            dim: cfg.dim,
            density: cfg.density,
            seed: cfg.seed,
            support: cfg.support,
        },
    )?;
    for (name, value, shape) in &cfg.loaded {
        inst.replace(name, value.clone(), shape.clone())?;
    }
    let phys = physical_env(&inst.logical, &inst.shapes, &specs)?;
    let gradient = eval(&phys, compiled.optimized.result())?.normalized();
    let (ir_value, _) = execute(&compiled.ir, &compiled.signature, &phys)?;
    let ir_agrees = compare(&ir_value, &gradient, IR_TOLERANCE).within();

    let target = inst.logical.get(wrt).expect("wrt is an input");
    let coords = coordinates(target);
    let expected = finite_diff_on(&inst.logical, &p.term, wrt, cfg.eps, &coords)?;
    let d: Discrepancy = compare(&gradient, &expected, cfg.tol);
    Ok(VerifyReport {
        kernel: p.name.clone(),
        wrt: wrt.into(),
        dim: cfg.dim,
        density: cfg.density,
        seed: cfg.seed,
        support: cfg.support,
        eps: cfg.eps,
        tol_abs: cfg.tol.abs,
        tol_rel: cfg.tol.rel,
        nnz: inst.nnz.into_iter().collect(),
        perturbed: coords.len(),
        compared: d.coords,
        failures: d.failures,
        max_abs: d.max_abs,
        max_rel: d.max_rel,
        shape_mismatch: d.shape_mismatch,
        ir_agrees,
        incomplete: compiled.optimized.incomplete(),
        passed: d.within() && ir_agrees,
        gradient,
        expected,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::CATALOG;

    #[test]
    fn every_kernel_verifies_at_small_size() {
        for k in &CATALOG {
            for support in [GradSupport::Dense, GradSupport::Stored] {
                let cfg = VerifyConfig {
                    dim: 5,
                    density: 0.5,
                    seed: 3,
                    support,
                    ..Default::default()
                };
                let r = verify_kernel(k, k.wrt, &cfg).unwrap();
                assert!(r.passed, "{} {:?}: {:?}\n got {}\nwant {}", k.name, support, r, r.gradient, r.expected);
                assert!(r.perturbed > 0);
            }
        }
    }
}
