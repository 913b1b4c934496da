use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;
use sdqlite::backend::{emit_file, Dps, EmitOptions};
use sdqlite::interp::{eval_with_stats, Tolerance, DEFAULT_EPS};
use sdqlite::lang::{parse_source, parse_type, pretty_block, type_of, Mode, TypeEnv};
use sdqlite::opt::StorageSpec;
use sdqlite_driver::bench::{bench, BenchConfig};
use sdqlite_driver::catalog::{check_catalog, lookup, CATALOG};
use sdqlite_driver::fixtures::emit_runtime_fixtures;
use sdqlite_driver::json::{expr_json, value_json};
use sdqlite_driver::mtx::load_matrix_market;
use sdqlite_driver::run::{physical_env, GradSupport, InstanceConfig, Program};
use sdqlite_driver::verify::{verify, VerifyConfig, VerifyReport};

/// Differentiate, optimize and lower sparse tensor programs.
#[derive(Parser)]
#[command(name = "sdql", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a program and print it back, or its syntax tree with --json.
    Parse {
        #[command(flatten)]
        target: Target,
        /// Accept ranges and sub-arrays.
        #[arg(long)]
        physical: bool,
        #[arg(long)]
        json: bool,
    },
    /// Print the type of a program.
    Typecheck {
        #[command(flatten)]
        target: Target,
        #[arg(long)]
        json: bool,
    },
    /// Build the gradient and optimize it; optionally dump stages, run it or emit C++.
    Grad {
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        opts: GradOpts,
        /// Print the term after a pipeline stage (`all` for every stage). Repeatable.
        #[arg(long, value_name = "STAGE")]
        dump_stage: Vec<String>,
        /// Print the lowered kernel as C++.
        #[arg(long)]
        emit_cpp: bool,
        /// With --emit-cpp, also emit a `main` reading SDG1 inputs.
        #[arg(long)]
        main: bool,
        /// Evaluate the gradient on a generated instance.
        #[arg(long)]
        run: bool,
        /// Write the primary output to a file instead of stdout.
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Compare the optimized gradient with central finite differences.
    Verify {
        #[command(flatten)]
        target: OptionalTarget,
        #[command(flatten)]
        opts: GradOpts,
        /// Finite-difference step.
        #[arg(long, default_value_t = DEFAULT_EPS)]
        eps: f64,
        #[arg(long, default_value_t = Tolerance::default().abs)]
        abs_tol: f64,
        #[arg(long, default_value_t = Tolerance::default().rel)]
        rel_tol: f64,
    },
    /// Time the naive and optimized gradients over a grid of sizes and densities.
    Bench {
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        opts: GradOpts,
        /// Tensor side lengths; `--dims` alone gives an empty sweep.
        #[arg(long, value_delimiter = ',', num_args = 0.., default_values_t = [16, 32, 64])]
        dims: Vec<usize>,
        #[arg(long, value_delimiter = ',', num_args = 0.., default_values_t = [0.0625])]
        densities: Vec<f64>,
        /// Timing samples per cell.
        #[arg(long, default_value_t = 5)]
        reps: usize,
        /// Run cells concurrently.
        #[arg(long)]
        parallel: bool,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Write the C++ runtime header, fixture kernels, SDG1 inputs and expected outputs.
    EmitRuntimeFixtures { dir: PathBuf },
}

#[derive(Args)]
struct Target {
    /// A catalog kernel (BATAX, SMMM, SMVM, VVA, VVD, VSM) or a source file.
    target: String,
    /// Read TARGET as program text instead.
    #[arg(short = 'e', long = "expr")]
    inline: bool,
    /// Input types of a source program, e.g. "V: tensor 1; s: real".
    #[arg(long)]
    env: Option<String>,
}

#[derive(Args)]
struct OptionalTarget {
    /// A catalog kernel or a source file.
    target: Option<String>,
    #[arg(short = 'e', long = "expr")]
    inline: bool,
    #[arg(long)]
    env: Option<String>,
    /// Every catalog kernel with respect to its default target.
    #[arg(long, conflicts_with = "target")]
    all: bool,
}

#[derive(Args)]
struct GradOpts {
    /// Input to differentiate with respect to; catalog kernels have a default.
    #[arg(long)]
    wrt: Option<String>,
    /// Storage formats, e.g. "V1 = dense, V2 = coo".
    #[arg(long)]
    spec: Option<String>,
    #[arg(long, value_enum, default_value_t = DpsArg::On)]
    dps: DpsArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Side length of generated tensors.
    #[arg(long)]
    dim: Option<usize>,
    /// Fraction of coordinates stored in generated sparse tensors.
    #[arg(long, default_value_t = 0.25)]
    density: f64,
    #[arg(long, value_enum, default_value_t = GradSupport::Dense)]
    grad_support: GradSupport,
    /// Load a matrix input from a Matrix Market file. Repeatable.
    #[arg(long, value_name = "NAME=PATH")]
    matrix: Vec<String>,
    #[arg(long)]
    json: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum DpsArg {
    On,
    Off,
}

impl From<DpsArg> for Dps {
    fn from(d: DpsArg) -> Dps {
        match d {
            DpsArg::On => Dps::On,
            DpsArg::Off => Dps::Off,
        }
    }
}

/// Outcome of a command that ran to completion.
enum Outcome {
    Ok,
    VerificationFailed,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    if let Err(e) = check_catalog() {
        eprintln!("error: built-in catalog is inconsistent: {}", e);
        return ExitCode::from(1);
    }
    match run(cli.command) {
        Ok(Outcome::Ok) => ExitCode::SUCCESS,
        Ok(Outcome::VerificationFailed) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {:#}", e);
            ExitCode::from(1)
        }
    }
}

fn parse_env(src: &str) -> Result<TypeEnv> {
    src.split(';')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|b| {
            let (x, t) = b.split_once(':').ok_or_else(|| anyhow!("binding `{}` is not `name: type`", b))?;
            Ok((x.trim().to_string(), parse_type(t.trim()).with_context(|| format!("type of `{}`", x.trim()))?))
        })
        .collect()
}

fn program(target: &str, inline: bool, env: Option<&str>, mode: Mode) -> Result<(Program, Option<&'static str>)> {
    if !inline {
        if let Ok(k) = lookup(target) {
            if env.is_some() {
                bail!("--env applies to source programs; {} has fixed inputs", k.name);
            }
            return Ok((Program::from_kernel(k)?, Some(k.wrt)));
        }
    }
    let (name, text) = if inline {
        ("expr".to_string(), target.to_string())
    } else {
        let path = PathBuf::from(target);
        let text = fs::read_to_string(&path).with_context(|| {
            format!("`{}` is neither a catalog kernel ({}) nor a readable file", target, catalog_names())
        })?;
        let stem = path.file_stem().map_or("kernel".into(), |s| s.to_string_lossy().into_owned());
        (stem, text)
    };
    let term = parse_source(&text, mode)?;
    let env = env.map(parse_env).transpose()?.unwrap_or_default();
    Ok((
        Program {
            name,
            term,
            env,
            specs: None,
            fixed: Vec::new(),
        },
        None,
    ))
}

fn catalog_names() -> String {
    CATALOG.iter().map(|k| k.name).collect::<Vec<_>>().join(", ")
}

fn specs_of(opts: &GradOpts) -> Result<Option<Vec<StorageSpec>>> {
    Ok(opts.spec.as_deref().map(StorageSpec::parse_list).transpose()?)
}

fn wrt_of(opts: &GradOpts, default: Option<&str>) -> Result<String> {
    opts.wrt
        .clone()
        .or_else(|| default.map(String::from))
        .ok_or_else(|| anyhow!("--wrt is required for source programs"))
}

/// Matrices named by `--matrix`, with the side length they imply.
fn load_matrices(opts: &GradOpts) -> Result<(Vec<(String, sdqlite::interp::Value, Vec<usize>)>, usize)> {
    let mut out = Vec::new();
    let mut side = 0;
    for m in &opts.matrix {
        let (name, path) = m.split_once('=').ok_or_else(|| anyhow!("--matrix `{}` is not NAME=PATH", m))?;
        let mm = load_matrix_market(path.trim()).with_context(|| format!("loading {}", path.trim()))?;
        side = side.max(mm.rows).max(mm.cols);
        out.push((name.trim().to_string(), mm.to_value(), vec![mm.rows, mm.cols]));
    }
    Ok((out, side))
}

fn write_output(path: Option<&PathBuf>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            print!("{}", text);
            Ok(())
        }
    }
}

fn run(cmd: Command) -> Result<Outcome> {
    match cmd {
        Command::Parse { target, physical, json } => {
            let mode = if physical { Mode::Physical } else { Mode::Logical };
            let (p, _) = program(&target.target, target.inline, target.env.as_deref(), mode)?;
            if json {
                println!("{}", serde_json::to_string_pretty(&expr_json(&p.term))?);
            } else {
                println!("{}", pretty_block(&p.term));
            }
        }
        Command::Typecheck { target, json } => {
            let (p, _) = program(&target.target, target.inline, target.env.as_deref(), Mode::Physical)?;
            let t = type_of(&p.env, &p.term)?;
            if json {
                println!("{}", json!({"program": p.name, "type": t.to_string()}));
            } else {
                println!("{}", t);
            }
        }
        Command::Grad {
            target,
            opts,
            dump_stage,
            emit_cpp,
            main,
            run,
            output,
        } => return grad(target, opts, dump_stage, emit_cpp, main, run, output),
        Command::Verify {
            target,
            opts,
            eps,
            abs_tol,
            rel_tol,
        } => {
            let programs = if target.all {
                CATALOG
                    .iter()
                    .map(|k| Ok((Program::from_kernel(k)?, Some(k.wrt))))
                    .collect::<Result<Vec<_>>>()?
            } else {
                let t = target.target.ok_or_else(|| anyhow!("give a kernel or source, or --all"))?;
                vec![program(&t, target.inline, target.env.as_deref(), Mode::Logical)?]
            };
            let (loaded, side) = load_matrices(&opts)?;
            let mut reports: Vec<VerifyReport> = Vec::new();
            for (p, default_wrt) in &programs {
                let wrt = wrt_of(&opts, *default_wrt)?;
                let cfg = VerifyConfig {
                    dim: opts.dim.unwrap_or(if side > 0 { side } else { 8 }),
                    density: opts.density,
                    seed: opts.seed,
                    support: opts.grad_support,
                    eps,
                    tol: Tolerance { abs: abs_tol, rel: rel_tol },
                    dps: opts.dps.into(),
                    specs: specs_of(&opts)?,
                    loaded: loaded.clone(),
                };
                reports.push(verify(p, &wrt, &cfg)?);
            }
            if opts.json {
                println!("{}", serde_json::to_string_pretty(&reports)?);
            } else {
                for r in &reports {
                    println!(
                        "{} {} wrt {}: {} coordinates, max abs {:.3e}, max rel {:.3e}, IR {}",
                        if r.passed { "PASS" } else { "FAIL" },
                        r.kernel,
                        r.wrt,
                        r.compared,
                        r.max_abs,
                        r.max_rel,
                        if r.ir_agrees { "agrees" } else { "disagrees" }
                    );
                }
            }
            if reports.iter().any(|r| !r.passed) {
                return Ok(Outcome::VerificationFailed);
            }
        }
        Command::Bench {
            target,
            opts,
            dims,
            densities,
            reps,
            parallel,
            output,
        } => {
            let (p, default_wrt) = program(&target.target, target.inline, target.env.as_deref(), Mode::Logical)?;
            let wrt = wrt_of(&opts, default_wrt)?;
            let cfg = BenchConfig {
                dims,
                densities,
                seed: opts.seed,
                reps,
                dps: opts.dps.into(),
                support: opts.grad_support,
                specs: specs_of(&opts)?,
                parallel,
            };
            let rows = bench(&p, &wrt, &cfg)?;
            let text = if opts.json || output.is_some() {
                format!("{}\n", serde_json::to_string_pretty(&rows)?)
            } else {
                let mut s = String::from("kernel  dim  density  nnz  pipeline_ms  naive_ms  optimized_ms  ir_ms  naive_ops  optimized_ops  checksum\n");
                for r in &rows {
                    s.push_str(&format!(
                        "{} {} {} {} {:.3} {:.3} {:.3} {:.3} {} {} {:.6}\n",
                        r.kernel, r.dim, r.density, r.nnz, r.pipeline_ms, r.naive_ms, r.optimized_ms, r.ir_ms, r.naive_ops, r.optimized_ops, r.checksum
                    ));
                }
                s
            };
            write_output(output.as_ref(), &text)?;
        }
        Command::EmitRuntimeFixtures { dir } => {
            for f in emit_runtime_fixtures(&dir)? {
                println!("{} {}", f.kernel, f.source.display());
            }
        }
    }
    Ok(Outcome::Ok)
}

fn grad(
    target: Target,
    opts: GradOpts,
    dump_stage: Vec<String>,
    emit_cpp: bool,
    main: bool,
    run: bool,
    output: Option<PathBuf>,
) -> Result<Outcome> {
    let (p, default_wrt) = program(&target.target, target.inline, target.env.as_deref(), Mode::Logical)?;
    let wrt = wrt_of(&opts, default_wrt)?;
    let specs = specs_of(&opts)?.or_else(|| p.specs.clone());
    let c = p.compile(Some(&wrt), specs.clone(), opts.dps.into())?;
    let mut report = serde_json::Map::new();
    let mut text = String::new();
    report.insert("program".into(), json!(p.name));
    report.insert("wrt".into(), json!(wrt));

    let mut dumped = serde_json::Map::new();
    for name in &dump_stage {
        let stages: Vec<_> = if name == "all" {
            c.optimized.stages.iter().collect()
        } else {
            let s = c.optimized.stage(name).ok_or_else(|| {
                let have: Vec<&str> = c.optimized.stages.iter().map(|s| s.name).collect();
                anyhow!("no stage `{}`; this run has {}", name, have.join(", "))
            })?;
            vec![s]
        };
        for s in stages {
            text.push_str(&format!("== {} ==\n{}\n", s.name, pretty_block(&s.expr)));
            dumped.insert(s.name.into(), json!(s.expr.to_string()));
        }
    }
    if !dump_stage.is_empty() {
        report.insert("stages".into(), dumped.into());
    }
    if emit_cpp {
        let src = emit_file(&c.ir, &c.signature, EmitOptions { main });
        text.push_str(&src);
        report.insert("cpp".into(), json!(src));
    }
    if run {
        let (loaded, side) = load_matrices(&opts)?;
        let specs = specs.clone().unwrap_or_default();
        let mut inst = p.instance(
            &wrt,
            &specs,
            InstanceConfig {
                dim: opts.dim.unwrap_or(if side > 0 { side } else { 8 }),
                density: opts.density,
                seed: opts.seed,
                support: opts.grad_support,
            },
        )?;
        for (name, value, shape) in loaded {
            inst.replace(&name, value, shape)?;
        }
        let phys = physical_env(&inst.logical, &inst.shapes, &specs)?;
        let (value, stats) = eval_with_stats(&phys, c.optimized.result())?;
        let value = value.normalized();
        text.push_str(&format!("{}\n", value));
        report.insert("value".into(), value_json(&value));
        report.insert(
            "inputs".into(),
            inst.logical
                .names()
                .map(|n| (n.clone(), value_json(inst.logical.get(n).unwrap())))
                .collect::<serde_json::Map<_, _>>()
                .into(),
        );
        report.insert(
            "ops".into(),
            json!({"visits": stats.visits, "accumulations": stats.accumulations, "lookups": stats.lookups}),
        );
    }
    if dump_stage.is_empty() && !emit_cpp && !run {
        text.push_str(&format!("{}\n", pretty_block(c.optimized.result())));
        report.insert("result".into(), json!(c.optimized.result().to_string()));
    }
    if !c.optimized.incomplete().is_empty() {
        eprintln!("note: saturation hit its budget in {}", c.optimized.incomplete().join(", "));
    }
    if opts.json {
        text = format!("{}\n", serde_json::to_string_pretty(&serde_json::Value::Object(report))?);
    }
    write_output(output.as_ref(), &text)?;
    Ok(Outcome::Ok)
}
