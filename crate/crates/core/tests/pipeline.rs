use proptest::prelude::*;
use sdqlite::autodiff::expand_gradient;
use sdqlite::interp::{compare, eval, Env, Tolerance, Value};
use sdqlite::lang::subst::alpha_eq;
use sdqlite::lang::{parse, Expr, Mode, Type, TypeEnv};
use sdqlite::opt::{only_scalar_mults, optimize_pipeline, Optimized, PipelineConfig, StorageSpec};

fn p(s: &str) -> Expr {
    parse(s, Mode::Physical).unwrap()
}

fn run(env: &TypeEnv, src: &str, wrt: &str, specs: &str) -> Optimized {
    let cfg = PipelineConfig {
        wrt: Some(wrt.into()),
        specs: Some(StorageSpec::parse_list(specs).unwrap()),
        ..Default::default()
    };
    optimize_pipeline(env, &p(src), &cfg).unwrap()
}

fn assert_stage(r: &Optimized, stage: &str, expected: &str) {
    let got = &r.stage(stage).unwrap().expr;
    assert!(alpha_eq(got, &p(expected)), "{}: {}", stage, got);
}

#[test]
fn dot_product_stages() {
    let env: TypeEnv = [("V1", Type::tensor(1)), ("V2", Type::tensor(1))].into_iter().collect();
    let r = run(
        &env,
        "sum(<i, a> in V2) V1(i) * a",
        "V1",
        "V1 = dense(len=V1_len, arr=V1_V); V2 = coo(len=V2_len, row=V2_row, val=V2_val)",
    );
    assert_stage(
        &r,
        "ad",
        "let V1' = sum(<i, _> in V1) { i -> { i -> 1.0 } } in let V2' = { } in
         sum(<i, a> in V2) let i' = 0.0 in let a' = V2'(i) in V1(i) * a' + V1'(i) * a",
    );
    assert_stage(
        &r,
        "sparsity",
        "let V1' = sum(<i, _> in V1) { i -> { i -> 1.0 } } in sum(<i, a> in V2) V1'(i) * a",
    );
    assert_stage(&r, "post-ad", "V2");
    assert_stage(
        &r,
        "storage",
        "let V1 = sum(<_, i> in (0:V1_len)) { unique(i) -> V1_V(i) } in
         let V2 = sum(<_, i> in (0:V2_len)) { unique(V2_row(i)) -> V2_val(i) } in V2",
    );
    assert_stage(&r, "final-anf", "sum(<_, i> in (0:V2_len)) { V2_row(i) -> V2_val(i) }");
    assert!(r.incomplete().is_empty());
}

#[test]
fn batax_normalizes_to_scalar_products() {
    let env: TypeEnv = [("A", Type::tensor(2)), ("X", Type::tensor(1)), ("beta", Type::Real)]
        .into_iter()
        .collect();
    let src = "sum(<i, r> in A) sum(<j, v1> in r) sum(<k, v2> in r) { j -> ((beta * v1) * v2) * X(k) }";
    let r = run(&env, src, "X", "A = csr, X = dense");
    assert_stage(&r, "post-ad", "beta * (sum(<i, r> in A) r * r)");
    assert!(!only_scalar_mults(&r.stage("storage-saturation").unwrap().env, &r.stage("storage-saturation").unwrap().expr).unwrap());
    for stage in ["normalize", "cleanup", "final-anf"] {
        let s = r.stage(stage).unwrap();
        assert!(only_scalar_mults(&s.env, &s.expr).unwrap(), "{}: {}", stage, s.expr);
    }
    assert!(r.incomplete().is_empty());
}

#[test]
fn without_gradient_or_storage() {
    let env: TypeEnv = [("V", Type::tensor(1)), ("s", Type::Real)].into_iter().collect();
    let r = optimize_pipeline(&env, &p("V * s"), &PipelineConfig::default()).unwrap();
    assert!(r.stage("ad").is_none() && r.stage("storage").is_none());
    assert_stage(&r, "normalize", "sum(<i, v> in V) { i -> v * s }");
}

fn mixed_env() -> TypeEnv {
    [("s", 0), ("t", 0), ("V", 1), ("W", 1), ("A", 2), ("B", 2)]
        .into_iter()
        .map(|(x, n)| (x, Type::tensor(n)))
        .collect()
}

#[test]
fn input_removed_by_simplification_has_zero_gradient() {
    let r = run(&mixed_env(), "if 0 = 2 then if 3 = 2 then sum(<i, v> in V) A", "V", "V = coo, A = csr");
    assert_stage(&r, "ad", "{ }");
    let none = PipelineConfig { wrt: Some("W".into()), ..Default::default() };
    assert!(optimize_pipeline(&mixed_env(), &p("V"), &none).is_err());
}

#[test]
fn explosive_saturation_stays_within_budget() {
    // Each of these once exhausted time or memory inside a single saturation iteration.
    for (src, wrt) in [
        ("sum(<i, v> in t * V) t * B * (if not (i = 0) then v)", "B"),
        ("(if not (3 = 2) then s * t) * (sum(<i, v> in A) t)", "s"),
    ] {
        let r = run(&mixed_env(), src, wrt, "V = coo, W = dense, A = csr, B = dense_col");
        assert!(r.stage("final-anf").is_some(), "{}", src);
    }
}

fn sparse_vector(len: i64) -> impl Strategy<Value = Value> {
    prop::collection::btree_map(0..len, -2.0f64..2.0, 1..len as usize)
        .prop_map(|m| Value::dict(m.into_iter().map(|(k, x)| (k, Value::Real(x)))))
}

fn sparse_matrix(n: i64) -> impl Strategy<Value = Value> {
    prop::collection::btree_map(0..n, sparse_vector(n), 1..n as usize).prop_map(Value::dict)
}

/// Every coordinate stored, as dense formats assume.
fn full_tensor(n: usize, order: usize) -> impl Strategy<Value = Value> {
    prop::collection::vec(prop_oneof![-2.0f64..-0.1, 0.1f64..2.0], n.pow(order as u32)).prop_map(move |xs| {
        match order {
            1 => Value::vector(&xs),
            _ => Value::dict(xs.chunks(n).enumerate().map(|(i, row)| (i as i64, Value::vector(row)))),
        }
    })
}

const N: i64 = 6;

/// Logical tensors, each with its storage spec.
struct Case {
    src: &'static str,
    wrt: &'static str,
    specs: &'static str,
}

const CASES: [Case; 8] = [
    Case { src: "sum(<i, a> in V2) V1(i) * a", wrt: "V1", specs: "V1 = dense, V2 = coo" },
    Case { src: "sum(<i, a> in V2) V1(i) * a", wrt: "V2", specs: "V1 = coo, V2 = dense" },
    Case { src: "V1 + V2", wrt: "V1", specs: "V1 = coo, V2 = dense" },
    Case { src: "sum(<i, v> in V1) { i -> v * s }", wrt: "V1", specs: "V1 = coo" },
    Case { src: "sum(<i, r> in A) { i -> sum(<j, v> in r) v * X(j) }", wrt: "X", specs: "A = csr, X = dense" },
    Case { src: "sum(<i, r> in A) { i -> sum(<j, v> in r) v * X(j) }", wrt: "A", specs: "A = csc, X = coo" },
    Case {
        src: "sum(<i, r> in A) { i -> sum(<k, v> in r) sum(<j, w> in B(k)) { j -> v * w } }",
        wrt: "B",
        specs: "A = csr, B = dense_row",
    },
    Case {
        src: "sum(<i, r> in A) sum(<j, v1> in r) sum(<k, v2> in r) { j -> ((s * v1) * v2) * X(k) }",
        wrt: "X",
        specs: "A = dense_col, X = dense",
    },
];

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    /// The optimized physical term on stored arrays computes the gradient term
    /// on the logical tensors.
    #[test]
    fn optimized_kernels_match_gradients(
        v1 in sparse_vector(N), v2 in sparse_vector(N), x in sparse_vector(N),
        a in sparse_matrix(N), b in sparse_matrix(N), s in -2.0f64..2.0,
        dv in full_tensor(N as usize, 1), dm in full_tensor(N as usize, 2),
    ) {
        let sparse = [("V1", v1), ("V2", v2), ("X", x), ("A", a), ("B", b)];
        for case in &CASES {
            let specs = StorageSpec::parse_list(case.specs).unwrap();
            let mut logical = Env::new().with("s", Type::Real, Value::Real(s));
            for (name, v) in &sparse {
                let order = if name.starts_with(['A', 'B']) { 2 } else { 1 };
                let dense = specs.iter().any(|sp| sp.tensor == *name && sp.is_dense());
                let v = match (dense, order) {
                    (false, _) => v.clone(),
                    (true, 1) => dv.clone(),
                    _ => dm.clone(),
                };
                logical.bind(*name, Type::tensor(order), v);
            }
            let r = run(logical.types(), case.src, case.wrt, case.specs);
            let want = eval(&logical, &expand_gradient(&p(case.src), case.wrt, logical.types()).unwrap()).unwrap();
            let mut physical = Env::new().with("s", Type::Real, Value::Real(s));
            for spec in specs {
                let v = logical.get(&spec.tensor).unwrap();
                let shape = vec![N as usize; logical.type_of(&spec.tensor).unwrap().order().unwrap()];
                for (n, t, x) in spec.materialize(v, &shape).unwrap() {
                    physical.bind(n, t, x);
                }
            }
            let got = eval(&physical, r.result()).unwrap();
            let d = compare(&got, &want, Tolerance { abs: 1e-9, rel: 1e-9 });
            prop_assert!(d.within(), "{} wrt {}: {:?}\n{}", case.src, case.wrt, d, r.result());
        }
    }
}
