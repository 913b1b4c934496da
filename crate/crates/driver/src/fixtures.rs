//! Kernels, inputs and expected outputs for exercising the C++ runtime.

use std::fs;
use std::path::{Path, PathBuf};

use sdqlite::backend::{emit_file, Dps, EmitOptions, RUNTIME_HEADER, RUNTIME_HEADER_SOURCE};
use sdqlite::interp::eval;

use crate::catalog::lookup;
use crate::run::{physical_env, GradSupport, InstanceConfig, Program};
use crate::sdg1::{write_sdg1, Record};

/// Kernels with fixtures, each differentiated with respect to its catalog target.
pub const FIXTURE_KERNELS: [&str; 3] = ["VVD", "SMVM", "BATAX"];

/// Instance used for every fixture.
pub const FIXTURE_INSTANCE: InstanceConfig = InstanceConfig {
    dim: 8,
    density: 0.5,
    seed: 1,
    support: GradSupport::Dense,
};

/// Files written for one kernel.
#[derive(Debug, Clone)]
pub struct Fixture {
    pub kernel: &'static str,
    /// Translation unit with a `main` that reads the SDG1 inputs.
    pub source: PathBuf,
    pub inputs: PathBuf,
    /// Interpreter result as a value literal.
    pub expected: PathBuf,
}

/// Writes the runtime header and, per kernel, `<K>.cpp`, `<K>.sdg1` and `<K>.expected` into `dir`.
pub fn emit_runtime_fixtures(dir: &Path) -> anyhow::Result<Vec<Fixture>> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(RUNTIME_HEADER), RUNTIME_HEADER_SOURCE)?;
    let mut out = Vec::new();
    for name in FIXTURE_KERNELS {
        let k = lookup(name)?;
        let p = Program::from_kernel(k)?;
        let specs = p.specs.clone().unwrap_or_default();
        let c = p.compile(Some(k.wrt), Some(specs.clone()), Dps::On)?;
        let inst = p.instance(k.wrt, &specs, FIXTURE_INSTANCE)?;
        let phys = physical_env(&inst.logical, &inst.shapes, &specs)?;
        let expected = eval(&phys, c.optimized.result())?.normalized();
        let records = c
            .signature
            .inputs()
            .iter()
            .map(|param| {
                let v = phys.get(&param.name).ok_or_else(|| anyhow::anyhow!("no value for `{}`", param.name))?;
                let t = phys.type_of(&param.name).expect("bound with a type");
                Ok((param.name.clone(), Record::from_value(&param.name, v, t)?))
            })
            .collect::<anyhow::Result<Vec<_>>>()?;
        let f = Fixture {
            kernel: name,
            source: dir.join(format!("{}.cpp", name)),
            inputs: dir.join(format!("{}.sdg1", name)),
            expected: dir.join(format!("{}.expected", name)),
        };
        fs::write(&f.source, emit_file(&c.ir, &c.signature, EmitOptions { main: true }))?;
        write_sdg1(fs::File::create(&f.inputs)?, &records)?;
        fs::write(&f.expected, format!("{}\n", expected))?;
        out.push(f);
    }
    Ok(out)
}
