use proptest::prelude::*;
use sdqlite::autodiff::{expand_gradient, fad_scalar, fad_tensor, tangent, to_anf, FadConfig};
use sdqlite::interp::{approx_eq, compare, eval, finite_diff, Env, Tolerance, Value, DEFAULT_EPS};
use sdqlite::lang::{parse, typecheck, Expr, Mode, Type};

fn p(s: &str) -> Expr {
    parse(s, Mode::Logical).unwrap()
}

fn tol() -> Tolerance {
    Tolerance {
        abs: 1e-5,
        rel: 1e-4,
    }
}

fn sparse_vector(len: i64) -> impl Strategy<Value = Value> {
    prop::collection::btree_map(0..len, -2.0f64..2.0, 1..len as usize)
        .prop_map(|m| Value::dict(m.into_iter().map(|(k, x)| (k, Value::Real(x)))))
}

fn sparse_matrix(rows: i64, cols: i64) -> impl Strategy<Value = Value> {
    prop::collection::btree_map(0..rows, sparse_vector(cols), 1..rows as usize)
        .prop_map(Value::dict)
}

/// Gradient term versus central differences on the stored coordinates of `wrt`.
fn check(env: &Env, src: &str, wrt: &str) {
    let e = p(src);
    let g = expand_gradient(&e, wrt, env.types()).unwrap();
    let mut tenv = env.types().clone();
    typecheck(&mut tenv, &g).unwrap();
    let got = eval(env, &g).unwrap();
    let want = finite_diff(env, &e, wrt, DEFAULT_EPS).unwrap();
    let d = compare(&got, &want, tol());
    assert!(d.within(), "{} wrt {}: {:?}\n got {}\nwant {}", src, wrt, d, got, want);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn vector_kernels(v1 in sparse_vector(12), v2 in sparse_vector(12), s in -2.0f64..2.0) {
        let env = Env::new()
            .with("V1", Type::tensor(1), v1)
            .with("V2", Type::tensor(1), v2)
            .with("s", Type::Real, Value::Real(s));
        check(&env, "sum(<i,a> in V2) V1(i) * a", "V1");
        check(&env, "sum(<i,a> in V2) V1(i) * a", "V2");
        check(&env, "V1 + V2", "V1");
        check(&env, "sum(<i,v> in V1) { i -> (v * s) * s }", "s");
        check(&env, "sum(<i,v> in V1) { i -> (v * s) * s }", "V1");
        check(&env, "sum(<i,v> in V1) sin(v) * exp(V2(i) * s)", "V2");
        check(&env, "let w = V1 * s in sum(<i,v> in w) v * v", "V1");
        check(&env, "V1 * s", "V1");
        check(&env, "sum(<i,v> in V1) if i = 3 then v * v", "V1");
    }

    #[test]
    fn matrix_kernels(a in sparse_matrix(6, 6), b in sparse_matrix(6, 5), x in sparse_vector(6)) {
        let env = Env::new()
            .with("A", Type::tensor(2), a)
            .with("B", Type::tensor(2), b)
            .with("X", Type::tensor(1), x)
            .with("beta", Type::Real, Value::Real(1.5));
        check(&env, "sum(<i,r> in A) sum(<j,a> in r) a * X(j)", "X");
        check(&env, "sum(<i,r> in A) sum(<j,a> in r) a * X(j)", "A");
        check(&env, "sum(<i,row> in A) sum(<k,a> in row) sum(<j,b> in B(k)) a * b", "B");
        check(
            &env,
            "sum(<i, r> in A) sum(<j, v1> in r) sum(<k, v2> in r) { j -> ((beta * v1) * v2) * X(k) }",
            "X",
        );
        check(
            &env,
            "sum(<i, r> in A) sum(<j, v1> in r) sum(<k, v2> in r) { j -> ((beta * v1) * v2) * X(k) }",
            "A",
        );
        check(&env, "sum(<i, r> in A) r(i)", "A");
        check(&env, "sum(<i, r> in A) { i -> r * X }", "X");
    }

    /// Scalar and tensorized forward mode agree when the seed is `real`.
    #[test]
    fn scalar_and_tensor_modes_agree(v1 in sparse_vector(10), v2 in sparse_vector(10), s in -2.0f64..2.0, ds in -1.0f64..1.0) {
        let srcs = [
            "sum(<i,a> in V2) V1(i) * a * s",
            "sum(<i,v> in V1) { i -> sin(v * s) }",
            "let w = V1 + V2 in w * (s * s)",
        ];
        for src in srcs {
            let e = to_anf(&p(src));
            let types = [("V1", Type::tensor(1)), ("V2", Type::tensor(1)), ("s", Type::Real)]
                .into_iter()
                .collect();
            let sc = fad_scalar(&types, &e).unwrap();
            let tn = fad_tensor(&FadConfig::new(Type::Real).unwrap(), &types, &e).unwrap();
            let env = Env::new()
                .with("V1", Type::tensor(1), v1.clone())
                .with("V2", Type::tensor(1), v2.clone())
                .with("s", Type::Real, Value::Real(s))
                .with(tangent("V1"), Type::tensor(1), v2.clone())
                .with(tangent("V2"), Type::tensor(1), Value::empty())
                .with(tangent("s"), Type::Real, Value::Real(ds));
            let a = eval(&env, &sc).unwrap();
            let b = eval(&env, &tn).unwrap();
            prop_assert!(approx_eq(&a, &b, tol()), "{}: {} vs {}", src, a, b);
        }
    }
}

#[test]
fn scalar_mode_is_a_directional_derivative() {
    let env = Env::new()
        .with("x", Type::Real, Value::Real(0.7))
        .with("y", Type::Real, Value::Real(-1.3))
        .with(tangent("x"), Type::Real, Value::Real(1.0))
        .with(tangent("y"), Type::Real, Value::Real(0.0));
    let e = to_anf(&p("sin(x * y) + exp(x) * recip(y) + log(x)"));
    let d = fad_scalar(env.types(), &e).unwrap();
    let got = eval(&env, &d).unwrap().as_real().unwrap();
    let (x, y) = (0.7f64, -1.3f64);
    let want = y * (x * y).cos() + x.exp() / y + 1.0 / x;
    assert!((got - want).abs() < 1e-9, "{} vs {}", got, want);
}
