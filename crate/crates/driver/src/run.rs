//! Compiling kernels and running them on generated instances.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sdqlite::backend::{kernel_name, lower_dps, Dps, ImpStmt, KernelError, KernelSignature, LowerError};
use sdqlite::interp::{Env, Value};
use sdqlite::lang::{Expr, Name, Type, TypeEnv};
use sdqlite::opt::{optimize_pipeline, Optimized, PipelineConfig, PipelineError, StorageError, StorageSpec};

use crate::catalog::{KernelEntry, BETA};
use crate::data::{gen_sparse, DataError};

/// Which coordinates of the gradient target carry values, and so which
/// coordinates finite differences perturb.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum, serde::Serialize)]
#[serde(rename_all = "lowercase")]
pub enum GradSupport {
    /// The target is fully populated.
    #[default]
    Dense,
    /// The target has the sampled sparsity and only its stored coordinates are perturbed.
    Stored,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Pipeline(#[from] PipelineError),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Lower(#[from] LowerError),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("cannot generate a value for input `{0}` of type `{1}`; only reals and tensors are supported")]
    Input(Name, Type),
    #[error("no input `{0}` of order {1} to load into")]
    Replace(Name, usize),
}

/// A kernel taken through the optimizer and lowered to the loop IR.
#[derive(Debug, Clone)]
pub struct Compiled {
    pub optimized: Optimized,
    pub signature: KernelSignature,
    pub ir: ImpStmt,
}

pub fn compile(
    name: &str,
    env: &TypeEnv,
    e: &Expr,
    wrt: Option<&str>,
    specs: Option<Vec<StorageSpec>>,
    dps: Dps,
) -> Result<Compiled, RunError> {
    let cfg = PipelineConfig {
        wrt: wrt.map(Name::from),
        specs,
        ..Default::default()
    };
    let optimized = optimize_pipeline(env, e, &cfg)?;
    let signature = KernelSignature::for_term(kernel_name(name, wrt), optimized.env(), optimized.result())?;
    let ir = lower_dps(optimized.result(), &signature, dps)?;
    Ok(Compiled {
        optimized,
        signature,
        ir,
    })
}

/// A generated input set for a catalog kernel.
#[derive(Debug, Clone)]
pub struct Instance {
    pub logical: Env,
    /// Shape of each tensor input.
    pub shapes: BTreeMap<Name, Vec<usize>>,
    /// Stored coordinates per tensor input.
    pub nnz: BTreeMap<Name, usize>,
}

impl Instance {
    /// Replaces a generated tensor with a loaded one of the given shape.
    pub fn replace(&mut self, name: &str, value: Value, shape: Vec<usize>) -> Result<(), RunError> {
        let ty = self
            .logical
            .type_of(name)
            .filter(|t| t.order() == Some(shape.len()))
            .cloned()
            .ok_or_else(|| RunError::Replace(name.into(), shape.len()))?;
        self.nnz.insert(name.into(), value.nnz());
        self.shapes.insert(name.into(), shape);
        self.logical.bind(name, ty, value);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InstanceConfig {
    pub dim: usize,
    pub density: f64,
    pub seed: u64,
    pub support: GradSupport,
}

/// A term to differentiate: a catalog kernel or a user source.
#[derive(Debug, Clone)]
pub struct Program {
    pub name: String,
    pub term: Expr,
    pub env: TypeEnv,
    /// Storage used when the caller gives none.
    pub specs: Option<Vec<StorageSpec>>,
    /// Scalars with fixed values in generated instances.
    pub fixed: Vec<(Name, f64)>,
}

impl Program {
    pub fn from_kernel(k: &KernelEntry) -> Result<Program, RunError> {
        Ok(Program {
            name: k.name.into(),
            term: k.term(),
            env: k.env(),
            specs: Some(k.default_specs()?),
            fixed: if k.name == "BATAX" { vec![("beta".into(), BETA)] } else { vec![] },
        })
    }

    pub fn instance(&self, wrt: &str, specs: &[StorageSpec], cfg: InstanceConfig) -> Result<Instance, RunError> {
        let fixed: Vec<(&str, f64)> = self.fixed.iter().map(|(n, v)| (n.as_str(), *v)).collect();
        random_instance(&self.env, wrt, specs, &fixed, cfg)
    }

    pub fn compile(&self, wrt: Option<&str>, specs: Option<Vec<StorageSpec>>, dps: Dps) -> Result<Compiled, RunError> {
        compile(&self.name, &self.env, &self.term, wrt, specs, dps)
    }
}

/// Inputs for `k`; BATAX's `beta` is fixed at [`BETA`].
pub fn kernel_instance(
    k: &KernelEntry,
    wrt: &str,
    specs: &[StorageSpec],
    cfg: InstanceConfig,
) -> Result<Instance, RunError> {
    let fixed: &[(&str, f64)] = if k.name == "BATAX" { &[("beta", BETA)] } else { &[] };
    random_instance(&k.env(), wrt, specs, fixed, cfg)
}

/// Inputs for `env`: tensors of side `dim`, sparse at `density` unless their
/// storage is dense or they are a dense gradient target. Scalars are drawn
/// from `[0.5, 1.5)` unless listed in `fixed`.
pub fn random_instance(
    env: &TypeEnv,
    wrt: &str,
    specs: &[StorageSpec],
    fixed: &[(&str, f64)],
    cfg: InstanceConfig,
) -> Result<Instance, RunError> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut inst = Instance {
        logical: Env::new(),
        shapes: BTreeMap::new(),
        nnz: BTreeMap::new(),
    };
    for (x, t) in env.iter() {
        let sub_seed: u64 = rng.gen();
        match t.order() {
            Some(0) => {
                let drawn = rng.gen_range(0.5..1.5);
                let v = fixed.iter().find(|(n, _)| n == x).map_or(drawn, |&(_, v)| v);
                inst.logical.bind(x.clone(), t.clone(), Value::Real(v));
            }
            Some(n) => {
                let dense = (x == wrt && cfg.support == GradSupport::Dense)
                    || specs.iter().any(|s| &s.tensor == x && s.is_dense());
                let shape = vec![cfg.dim; n];
                let s = gen_sparse(&shape, if dense { 1.0 } else { cfg.density }, sub_seed)?;
                inst.nnz.insert(x.clone(), s.nnz);
                inst.shapes.insert(x.clone(), shape);
                inst.logical.bind(x.clone(), t.clone(), s.value);
            }
            None => return Err(RunError::Input(x.clone(), t.clone())),
        }
    }
    Ok(inst)
}

/// Binds the backing arrays of every spec and keeps the other inputs as they are.
pub fn physical_env(logical: &Env, shapes: &BTreeMap<Name, Vec<usize>>, specs: &[StorageSpec]) -> Result<Env, RunError> {
    let mut env = Env::new();
    for name in logical.names() {
        let spec = specs.iter().find(|s| &s.tensor == name);
        let value = logical.get(name).expect("listed name");
        let ty = logical.type_of(name).expect("listed name");
        match (spec, shapes.get(name)) {
            (Some(spec), Some(shape)) => {
                for (n, t, v) in spec.materialize(value, shape)? {
                    env.bind(n, t, v);
                }
            }
            _ => env.bind(name.clone(), ty.clone(), value.clone()),
        }
    }
    Ok(env)
}

/// Shapes inferred from the largest stored key in each dimension.
pub fn infer_shapes(env: &Env) -> BTreeMap<Name, Vec<usize>> {
    fn walk(v: &Value, depth: usize, dims: &mut Vec<usize>) {
        for (k, x) in v.entries() {
            if dims.len() <= depth {
                dims.push(0);
            }
            dims[depth] = dims[depth].max(k as usize + 1);
            walk(&x, depth + 1, dims);
        }
    }
    let mut out = BTreeMap::new();
    for name in env.names() {
        if let Some(n) = env.type_of(name).and_then(Type::order).filter(|&n| n > 0) {
            let mut dims = Vec::new();
            walk(env.get(name).unwrap(), 0, &mut dims);
            dims.resize(n, 1);
            for d in &mut dims {
                *d = (*d).max(1);
            }
            out.insert(name.clone(), dims);
        }
    }
    out
}
