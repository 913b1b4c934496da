use std::collections::BTreeSet;

use sdqlite::autodiff::expand_gradient;
use sdqlite::lang::subst::alpha_eq;
use sdqlite::lang::{parse, Expr, Mode, Type, TypeEnv};
use sdqlite::opt::rules::algebraic;
use sdqlite::opt::{compose_storage, propagate_sparsity, saturate, SaturationConfig, SparseCost, StorageSpec};

fn p(s: &str) -> Expr {
    parse(s, Mode::Physical).unwrap()
}

fn post_ad(src: &str, wrt: &str, env: &TypeEnv, dense: &[&str]) -> Expr {
    let g = expand_gradient(&p(src), wrt, env).unwrap();
    let s = propagate_sparsity(env, &g).unwrap();
    let cfg = SaturationConfig {
        dense: dense.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>(),
        ..Default::default()
    };
    let r = saturate(env, &s, &algebraic(), &SparseCost::default(), &cfg).unwrap();
    eprintln!("{:?} iters={} nodes={} complete={}", r.fired, r.iterations, r.nodes, r.complete);
    r.expr
}

#[test]
fn dot_product_with_dense_v1() {
    let env: TypeEnv = [("V1", Type::tensor(1)), ("V2", Type::tensor(1))].into_iter().collect();
    let e = post_ad("sum(<i, a> in V2) V1(i) * a", "V1", &env, &["V1"]);
    assert!(alpha_eq(&e, &p("V2")), "{}", e);
}

#[test]
fn batax_post_ad() {
    let env: TypeEnv = [("A", Type::tensor(2)), ("X", Type::tensor(1)), ("beta", Type::Real)]
        .into_iter()
        .collect();
    let src = "sum(<i, r> in A) sum(<j, v1> in r) sum(<k, v2> in r) { j -> ((beta * v1) * v2) * X(k) }";
    let e = post_ad(src, "X", &env, &["X"]);
    assert!(alpha_eq(&e, &p("beta * (sum(<i, r> in A) r * r)")), "{}", e);
}

fn storage_saturate(src: &str, env: &TypeEnv, specs: &str) -> Expr {
    let specs = StorageSpec::parse_list(specs).unwrap();
    let c = compose_storage(env, &p(src), &specs).unwrap();
    let r = saturate(&c.env, &c.expr, &algebraic(), &SparseCost::default(), &SaturationConfig::default()).unwrap();
    eprintln!("{:?} iters={} nodes={} complete={}", r.fired, r.iterations, r.nodes, r.complete);
    r.expr.strip_unique()
}

#[test]
fn coo_storage_fuses_into_one_loop() {
    let env: TypeEnv = [("V1", Type::tensor(1)), ("V2", Type::tensor(1))].into_iter().collect();
    let specs = "V1 = dense(len=V1_len, arr=V1_V); V2 = coo(len=V2_len, row=V2_row, val=V2_val)";
    let expected = p("sum(<_, i> in (0:V2_len)) { V2_row(i) -> V2_val(i) }");
    for src in ["V2", "sum(<i, a> in V2) { i -> a }"] {
        let e = storage_saturate(src, &env, specs);
        assert!(alpha_eq(&e, &expected), "{}", e);
    }
}
