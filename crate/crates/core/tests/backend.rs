use sdqlite::backend::{
    emit_file, execute, kernel_name, lower_dps, Dps, EmitOptions, IExpr, ImpStmt, KernelSignature, LValue, RUNTIME_HEADER,
    RUNTIME_HEADER_SOURCE,
};
use sdqlite::interp::{compare, eval, Env, Tolerance, Value};
use sdqlite::lang::{parse, Expr, Mode, Type, TypeEnv};
use sdqlite::opt::{optimize_pipeline, Optimized, PipelineConfig, StorageSpec};

fn p(s: &str) -> Expr {
    parse(s, Mode::Physical).unwrap()
}

struct Kernel {
    name: &'static str,
    src: &'static str,
    wrt: &'static str,
    specs: &'static str,
}

const KERNELS: [Kernel; 6] = [
    Kernel {
        name: "BATAX",
        src: "sum(<i, r> in A) sum(<j, v1> in r) sum(<k, v2> in r) { j -> ((beta * v1) * v2) * X(k) }",
        wrt: "X",
        specs: "A = csr, X = dense",
    },
    Kernel {
        name: "SMMM",
        src: "sum(<i, r> in A) sum(<k, v> in r) sum(<j, w> in B(k)) v * w",
        wrt: "B",
        specs: "A = csr, B = csr",
    },
    Kernel {
        name: "SMVM",
        src: "sum(<i, r> in A) sum(<j, v> in r) v * X(j)",
        wrt: "X",
        specs: "A = csr, X = dense",
    },
    Kernel { name: "VVA", src: "V1 + V2", wrt: "V1", specs: "V1 = coo, V2 = coo" },
    Kernel { name: "VVD", src: "sum(<i, a> in V2) V1(i) * a", wrt: "V1", specs: "V1 = dense, V2 = coo" },
    Kernel { name: "VSM", src: "sum(<i, v> in V) { i -> v * s * s }", wrt: "s", specs: "V = coo" },
];

const N: usize = 7;

fn logical_env() -> Env {
    let mat = |seed: usize| {
        Value::dict((0..N as i64).filter(|i| !(*i as usize + seed).is_multiple_of(3)).map(|i| {
            let row = (0..N as i64).filter(|j| (i + j + seed as i64) % 2 == 0);
            (i, Value::dict(row.map(|j| (j, Value::Real(0.25 + (i * 3 + j) as f64 / 10.0)))))
        }))
    };
    let sparse = |seed: i64| Value::dict((0..N as i64).filter(|i| (i + seed) % 3 != 1).map(|i| (i, Value::Real(1.0 + i as f64 / 4.0 + seed as f64))));
    let full = Value::vector(&(0..N).map(|i| 0.5 + i as f64).collect::<Vec<_>>());
    Env::new()
        .with("A", Type::tensor(2), mat(0))
        .with("B", Type::tensor(2), mat(1))
        .with("X", Type::tensor(1), full.clone())
        .with("V", Type::tensor(1), sparse(0))
        .with("V1", Type::tensor(1), full)
        .with("V2", Type::tensor(1), sparse(2))
        .with("beta", Type::Real, Value::Real(1.5))
        .with("s", Type::Real, Value::Real(-0.75))
}

fn optimize(k: &Kernel, logical: &TypeEnv) -> Optimized {
    let cfg = PipelineConfig {
        wrt: Some(k.wrt.into()),
        specs: Some(StorageSpec::parse_list(k.specs).unwrap()),
        ..Default::default()
    };
    optimize_pipeline(logical, &p(k.src), &cfg).unwrap()
}

fn physical_env(logical: &Env, specs: &str) -> Env {
    let mut env = Env::new();
    for name in logical.names() {
        if logical.type_of(name) == Some(&Type::Real) {
            env.bind(name.clone(), Type::Real, logical.get(name).unwrap().clone());
        }
    }
    for spec in StorageSpec::parse_list(specs).unwrap() {
        let order = logical.type_of(&spec.tensor).unwrap().order().unwrap();
        for (n, t, x) in spec.materialize(logical.get(&spec.tensor).unwrap(), &vec![N; order]).unwrap() {
            env.bind(n, t, x);
        }
    }
    env
}

fn signature(k: &Kernel, r: &Optimized) -> KernelSignature {
    KernelSignature::for_term(kernel_name(k.name, Some(k.wrt)), r.env(), r.result()).unwrap()
}

#[test]
fn lowered_kernels_match_the_evaluator() {
    let logical = logical_env();
    for k in &KERNELS {
        let r = optimize(k, logical.types());
        let phys = physical_env(&logical, k.specs);
        let want = eval(&phys, r.result()).unwrap();
        let sig = signature(k, &r);
        for dps in [Dps::On, Dps::Off] {
            let body = lower_dps(r.result(), &sig, dps).unwrap();
            let (got, _) = execute(&body, &sig, &phys).unwrap();
            let d = compare(&got, &want, Tolerance { abs: 1e-12, rel: 1e-12 });
            assert!(d.within(), "{} {:?}: {:?}\n{:#?}", k.name, dps, d, body);
        }
    }
}

#[test]
fn destination_passing_removes_loop_allocations() {
    let logical = logical_env();
    for k in &KERNELS {
        let r = optimize(k, logical.types());
        let sig = signature(k, &r);
        let on = lower_dps(r.result(), &sig, Dps::On).unwrap();
        assert_eq!(on.dict_decls_in_loops(), 0, "{}: {:#?}", k.name, on);
        if k.name == "BATAX" {
            let off = lower_dps(r.result(), &sig, Dps::Off).unwrap();
            assert!(off.dict_decls_in_loops() >= 1, "{:#?}", off);
        }
    }
}

#[test]
fn dot_product_gradient_is_one_loop() {
    let logical = logical_env();
    let k = &KERNELS[4];
    let r = optimize(k, logical.types());
    let body = lower_dps(r.result(), &signature(k, &r), Dps::On).unwrap();
    let want = ImpStmt::Seq(vec![
        ImpStmt::ForRange {
            idx: "i".into(),
            lo: IExpr::Int(0),
            hi: IExpr::var("V2_len"),
            body: vec![ImpStmt::AccumAdd {
                target: LValue::new("result").at(IExpr::index(IExpr::var("V2_VRow"), IExpr::var("i"), 0)),
                value: IExpr::index(IExpr::var("V2_VVal"), IExpr::var("i"), 0),
            }],
        },
        ImpStmt::Return("result".into()),
    ]);
    assert_eq!(body, want);
}

fn emitted(k: &Kernel, dps: Dps, main: bool) -> String {
    let r = optimize(k, logical_env().types());
    let sig = signature(k, &r);
    emit_file(&lower_dps(r.result(), &sig, dps).unwrap(), &sig, EmitOptions { main })
}

#[test]
fn dot_product_gradient_emits_the_scatter_loop() {
    let src = emitted(&KERNELS[4], Dps::On, false);
    let want = "void VVD_wrt_V1(const arr_type<size_t>& V2_VRow, const arr_type<double>& V2_VVal, size_t V2_len, dict_type<size_t, double>& result) {
    for(size_t i = 0; i < V2_len; i++) {
        result[V2_VRow[i]] += V2_VVal[i];
    }
}
";
    assert!(src.ends_with(want), "{}", src);
    assert!(src.starts_with("#include \"sdqlite_runtime.hpp\""));
}

#[test]
fn emission_is_deterministic() {
    for k in &KERNELS {
        assert_eq!(emitted(k, Dps::On, true), emitted(k, Dps::On, true));
    }
}

/// Every kernel, in both lowering modes and with its `main`, compiles without
/// warnings against the runtime header. Skipped when no C++ compiler is installed.
#[test]
fn emitted_kernels_compile_cleanly() {
    let Some(cxx) = ["g++", "clang++"].into_iter().find(|c| std::process::Command::new(c).arg("--version").output().is_ok()) else {
        eprintln!("no C++ compiler found; skipping");
        return;
    };
    let dir = std::env::temp_dir().join(format!("sdqlite-emit-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    std::fs::write(dir.join(RUNTIME_HEADER), RUNTIME_HEADER_SOURCE).unwrap();
    for k in &KERNELS {
        for dps in [Dps::On, Dps::Off] {
            let file = dir.join(format!("{}_{:?}.cpp", k.name, dps));
            std::fs::write(&file, emitted(k, dps, true)).unwrap();
            let out = std::process::Command::new(cxx)
                .args(["-std=c++17", "-fsyntax-only", "-Wall", "-Wextra", "-Wpedantic", "-Werror"])
                .arg(&file)
                .output()
                .unwrap();
            assert!(out.status.success(), "{}\n{}", std::fs::read_to_string(&file).unwrap(), String::from_utf8_lossy(&out.stderr));
        }
    }
    std::fs::remove_dir_all(&dir).ok();
}
