//! JSON forms of terms and values for `--json` output.

use serde_json::{json, Map, Value as Json};
use sdqlite::interp::Value;
use sdqlite::lang::Expr;

/// The syntax tree as nested objects tagged by `kind`.
pub fn expr_json(e: &Expr) -> Json {
    let b = |e: &Expr| expr_json(e);
    match e {
        Expr::Sum { key, val, range, body } => {
            json!({"kind": "sum", "key": key, "val": val, "range": b(range), "body": b(body)})
        }
        Expr::Singleton { key, val } => json!({"kind": "singleton", "key": b(key), "val": b(val)}),
        Expr::EmptyDict => json!({"kind": "empty"}),
        Expr::Lookup { dict, key } => json!({"kind": "lookup", "dict": b(dict), "key": b(key)}),
        Expr::Let { var, bound, body } => json!({"kind": "let", "var": var, "bound": b(bound), "body": b(body)}),
        Expr::Var(x) => json!({"kind": "var", "name": x}),
        Expr::Not(a) => json!({"kind": "not", "arg": b(a)}),
        Expr::If { cond, then } => json!({"kind": "if", "cond": b(cond), "then": b(then)}),
        Expr::Add(l, r) => json!({"kind": "add", "lhs": b(l), "rhs": b(r)}),
        Expr::Mul(l, r) => json!({"kind": "mul", "lhs": b(l), "rhs": b(r)}),
        Expr::Eq(l, r) => json!({"kind": "eq", "lhs": b(l), "rhs": b(r)}),
        Expr::Int(n) => json!({"kind": "int", "value": n}),
        Expr::Real(x) => json!({"kind": "real", "value": x}),
        Expr::Bool(x) => json!({"kind": "bool", "value": x}),
        Expr::Unary { op, arg } => json!({"kind": "unary", "op": op, "arg": b(arg)}),
        Expr::Range { start, end } => json!({"kind": "range", "start": b(start), "end": b(end)}),
        Expr::SubArray { arr, start, end } => {
            json!({"kind": "subarray", "arr": b(arr), "start": b(start), "end": b(end)})
        }
        Expr::Unique(a) => json!({"kind": "unique", "arg": b(a)}),
    }
}

/// Reals and integers as numbers, dictionaries as objects keyed by the decimal key.
pub fn value_json(v: &Value) -> Json {
    match v {
        Value::Real(x) => json!(x),
        Value::Int(n) => json!(n),
        Value::Bool(x) => json!(x),
        _ => Json::Object(v.entries().into_iter().map(|(k, x)| (k.to_string(), value_json(&x))).collect::<Map<_, _>>()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use sdqlite::interp::parse_value;
    use sdqlite::lang::{parse, Mode};

    #[test]
    fn tree_and_values() {
        let e = parse("sum(<i, a> in V) { i -> 2.0 * a }", Mode::Logical).unwrap();
        let j = expr_json(&e);
        assert_eq!(j["kind"], "sum");
        assert_eq!(j["body"]["val"]["lhs"]["value"], 2.0);
        let v = parse_value("{0 -> {1 -> 2.5}}").unwrap();
        assert_eq!(value_json(&v), json!({"0": {"1": 2.5}}));
    }
}
