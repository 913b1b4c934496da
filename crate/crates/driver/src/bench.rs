//! Timing sweeps and instrumented operation counts.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use sdqlite::backend::{execute, Dps};
use sdqlite::interp::fdiff::coordinates;
use sdqlite::interp::{eval, eval_with_stats, Env, Value};
use sdqlite::lang::Type;
use sdqlite::opt::StorageSpec;

use crate::catalog::KernelEntry;
use crate::data::gen_with_nnz;
use crate::run::{physical_env, Compiled, GradSupport, InstanceConfig, Program};
use crate::verify::VerifyError;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    /// The sweep is the grid `dims × densities`.
    pub dims: Vec<usize>,
    pub densities: Vec<f64>,
    pub seed: u64,
    pub reps: usize,
    pub dps: Dps,
    pub support: GradSupport,
    pub specs: Option<Vec<StorageSpec>>,
    /// Run sweep cells on the rayon pool; timings then share the machine.
    pub parallel: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            dims: vec![16, 32, 64],
            densities: vec![1.0 / 16.0],
            seed: 0,
            reps: 5,
            dps: Dps::On,
            support: GradSupport::Dense,
            specs: None,
            parallel: false,
        }
    }
}

/// One sweep cell. Times are in milliseconds; the `_ms` fields are medians.
#[derive(Debug, Clone, Serialize)]
pub struct BenchRow {
    pub kernel: String,
    pub wrt: String,
    pub dim: usize,
    pub density: f64,
    /// Stored coordinates over all tensor inputs.
    pub nnz: usize,
    /// Compiling the gradient through every optimizer stage and lowering.
    pub pipeline_ms: f64,
    /// Unoptimized gradient term, interpreted on nested dictionaries.
    pub naive_ms: f64,
    /// Optimized term, interpreted on the storage arrays.
    pub optimized_ms: f64,
    /// Lowered loop IR.
    pub ir_ms: f64,
    /// Every timing of the optimized term.
    pub optimized_samples: Vec<f64>,
    pub naive_ops: u64,
    pub optimized_ops: u64,
    /// Sum of the gradient's stored values.
    pub checksum: f64,
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    assert!(!xs.is_empty(), "median of nothing");
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2.0
    }
}

fn samples_ms<T>(reps: usize, mut f: impl FnMut() -> T) -> Vec<f64> {
    (0..reps.max(1))
        .map(|_| {
            let t = Instant::now();
            std::hint::black_box(f());
            t.elapsed().as_secs_f64() * 1e3
        })
        .collect()
}

fn time_ms<T>(reps: usize, f: impl FnMut() -> T) -> f64 {
    median(samples_ms(reps, f))
}

pub fn checksum(v: &Value) -> f64 {
    coordinates(v)
        .iter()
        .map(|p| p.iter().try_fold(v.clone(), |d, &k| d.get(k)).and_then(|x| x.as_real()).unwrap_or(0.0))
        .sum()
}

pub fn bench_kernel(k: &KernelEntry, wrt: &str, cfg: &BenchConfig) -> Result<Vec<BenchRow>, VerifyError> {
    bench(&Program::from_kernel(k)?, wrt, cfg)
}

/// Times `p` on every cell of the sweep; the pipeline runs once.
pub fn bench(p: &Program, wrt: &str, cfg: &BenchConfig) -> Result<Vec<BenchRow>, VerifyError> {
    let specs = cfg.specs.clone().or_else(|| p.specs.clone());
    let t = Instant::now();
    let c = p.compile(Some(wrt), specs.clone(), cfg.dps)?;
    let specs = specs.unwrap_or_default();
    let pipeline_ms = t.elapsed().as_secs_f64() * 1e3;
    let cells: Vec<(usize, f64)> = cfg
        .dims
        .iter()
        .flat_map(|&d| cfg.densities.iter().map(move |&p| (d, p)))
        .collect();
    let run = |&(dim, density): &(usize, f64)| bench_cell(p, wrt, &c, &specs, cfg, dim, density, pipeline_ms);
    if cfg.parallel {
        cells.par_iter().map(run).collect()
    } else {
        cells.iter().map(run).collect()
    }
}

#[allow(clippy::too_many_arguments)]
fn bench_cell(
    p: &Program,
    wrt: &str,
    c: &Compiled,
    specs: &[StorageSpec],
    cfg: &BenchConfig,
    dim: usize,
    density: f64,
    pipeline_ms: f64,
) -> Result<BenchRow, VerifyError> {
    let naive = &c.optimized.stage("ad").expect("gradient stage").expr;
    let inst = p.instance(
        wrt,
        specs,
        InstanceConfig {
            dim,
            density,
            seed: cfg.seed,
            support: cfg.support,
        },
    )?;
    let phys = physical_env(&inst.logical, &inst.shapes, specs)?;
    let (grad, opt_stats) = eval_with_stats(&phys, c.optimized.result())?;
    let (_, naive_stats) = eval_with_stats(&inst.logical, naive)?;
    let optimized_samples = samples_ms(cfg.reps, || eval(&phys, c.optimized.result()));
    Ok(BenchRow {
        kernel: p.name.clone(),
        wrt: wrt.into(),
        dim,
        density,
        nnz: inst.nnz.values().sum(),
        pipeline_ms,
        naive_ms: time_ms(cfg.reps, || eval(&inst.logical, naive)),
        optimized_ms: median(optimized_samples.clone()),
        ir_ms: time_ms(cfg.reps, || execute(&c.ir, &c.signature, &phys)),
        optimized_samples,
        naive_ops: naive_stats.total(),
        optimized_ops: opt_stats.total(),
        checksum: checksum(&grad),
    })
}

/// Least-squares line through `(xs, ys)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Fit {
    pub slope: f64,
    pub intercept: f64,
    pub r2: f64,
}

pub fn linear_fit(xs: &[f64], ys: &[f64]) -> Fit {
    assert!(xs.len() == ys.len() && xs.len() >= 2, "need at least two points");
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let syy: f64 = ys.iter().map(|y| (y - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = xs.iter().zip(ys).map(|(x, y)| (y - slope * x - intercept).powi(2)).sum();
    let r2 = if syy == 0.0 { 1.0 } else { 1.0 - ss_res / syy };
    Fit { slope, intercept, r2 }
}

/// Operation count of a compiled gradient on inputs where every tensor has
/// side `dim` and exactly `nnz` stored coordinates.
pub fn op_count(k: &KernelEntry, c: &Compiled, specs: &[StorageSpec], dim: usize, nnz: usize, seed: u64) -> Result<u64, VerifyError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut logical = Env::new();
    let mut shapes = std::collections::BTreeMap::new();
    for (x, t) in k.env().iter() {
        match t.order() {
            Some(0) => logical.bind(x.clone(), Type::Real, Value::Real(rng.gen_range(0.5..1.5))),
            Some(n) => {
                let shape = vec![dim; n];
                let s = gen_with_nnz(&shape, nnz, rng.gen()).map_err(crate::run::RunError::from)?;
                logical.bind(x.clone(), t.clone(), s.value);
                shapes.insert(x.clone(), shape);
            }
            None => unreachable!("catalog inputs are tensors"),
        }
    }
    let phys = physical_env(&logical, &shapes, specs)?;
    let (_, stats) = eval_with_stats(&phys, c.optimized.result())?;
    Ok(stats.total())
}
