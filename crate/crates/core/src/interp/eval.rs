//! Reference evaluator.
//!
//! Terms are first compiled to a tree whose variables are stack slots and
//! whose zero-producing nodes carry the zero of their type; the compiled form
//! can then be run many times against different inputs.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use super::value::{Value, ValueError};
use crate::lang::{type_of, Expr, Name, Type, TypeEnv, TypeError};
use crate::lang::ops::lookup_op;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Value(#[from] ValueError),
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("{op} expects {expected}, got {found}")]
    Kind {
        op: &'static str,
        expected: &'static str,
        found: &'static str,
    },
    #[error("sub-array bounds {start}:{end} outside array of length {len}")]
    Bounds { start: i64, end: i64, len: usize },
}

/// Inputs: each variable has a declared type and a value.
#[derive(Debug, Clone, Default)]
pub struct Env {
    types: TypeEnv,
    values: Vec<(Name, Value)>,
}

impl Env {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: impl Into<Name>, ty: Type, value: Value) -> Self {
        self.bind(name, ty, value);
        self
    }

    /// Adds or replaces a binding.
    pub fn bind(&mut self, name: impl Into<Name>, ty: Type, value: Value) {
        let name = name.into();
        if let Some(slot) = self.values.iter_mut().find(|(n, _)| *n == name) {
            slot.1 = value;
            self.types.set(name, ty);
            return;
        }
        self.types.push(name.clone(), ty);
        self.values.push((name, value));
    }

    pub fn types(&self) -> &TypeEnv {
        &self.types
    }

    pub fn get(&self, name: &str) -> Option<&Value> {
        self.values.iter().find(|(n, _)| n == name).map(|(_, v)| v)
    }

    pub fn type_of(&self, name: &str) -> Option<&Type> {
        self.types.get(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &Name> {
        self.values.iter().map(|(n, _)| n)
    }

    pub fn values(&self) -> impl Iterator<Item = &Value> {
        self.values.iter().map(|(_, v)| v)
    }
}

/// Work counters of one evaluation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Stats {
    /// Bindings visited by `sum` loops.
    pub visits: u64,
    /// Scalar leaves added into `sum` accumulators.
    pub accumulations: u64,
    /// Dictionary and array lookups.
    pub lookups: u64,
}

impl Stats {
    pub fn total(&self) -> u64 {
        self.visits + self.accumulations + self.lookups
    }
}

#[derive(Debug, Clone)]
enum Node {
    Slot(usize),
    Const(Value),
    Sum {
        range: Box<Node>,
        body: Box<Node>,
        zero: Value,
    },
    Singleton(Box<Node>, Box<Node>),
    Lookup {
        dict: Box<Node>,
        key: Box<Node>,
        zero: Value,
    },
    Let(Box<Node>, Box<Node>),
    Not(Box<Node>),
    If {
        cond: Box<Node>,
        then: Box<Node>,
        zero: Value,
    },
    Add(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Eq(Box<Node>, Box<Node>),
    Unary(fn(f64) -> f64, Box<Node>),
    Range(Box<Node>, Box<Node>),
    SubArray(Box<Node>, Box<Node>, Box<Node>),
}

/// A term compiled against the variable order of an [`Env`].
#[derive(Debug, Clone)]
pub struct Compiled {
    root: Node,
    inputs: Vec<Name>,
    result_type: Type,
}

impl Compiled {
    pub fn result_type(&self) -> &Type {
        &self.result_type
    }

    /// Input names, in slot order.
    pub fn inputs(&self) -> &[Name] {
        &self.inputs
    }

    /// Runs with one value per input, in slot order.
    pub fn run(&self, inputs: &[Value], stats: &mut Stats) -> Result<Value, EvalError> {
        let mut stack: Vec<Value> = inputs.to_vec();
        run(&self.root, &mut stack, stats)
    }

    pub fn run_env(&self, env: &Env, stats: &mut Stats) -> Result<Value, EvalError> {
        let inputs = self
            .inputs
            .iter()
            .map(|n| env.get(n).cloned().ok_or_else(|| EvalError::Unbound(n.clone())))
            .collect::<Result<Vec<_>, _>>()?;
        self.run(&inputs, stats)
    }
}

/// Compiles `e` against the variables of `types`, in their order.
pub fn compile(types: &TypeEnv, e: &Expr) -> Result<Compiled, EvalError> {
    let result_type = type_of(types, e)?;
    let mut tenv = types.clone();
    let mut scope: Vec<Name> = types.iter().map(|(n, _)| n.clone()).collect();
    let inputs = scope.clone();
    let root = compile_rec(e, &mut tenv, &mut scope)?;
    Ok(Compiled {
        root,
        inputs,
        result_type,
    })
}

fn slot_of(scope: &[Name], x: &str) -> Result<usize, EvalError> {
    scope
        .iter()
        .rposition(|n| n == x)
        .ok_or_else(|| EvalError::Unbound(x.into()))
}

fn compile_rec(e: &Expr, tenv: &mut TypeEnv, scope: &mut Vec<Name>) -> Result<Node, EvalError> {
    let sub = |c: &Expr, tenv: &mut TypeEnv, scope: &mut Vec<Name>| -> Result<Box<Node>, EvalError> {
        Ok(Box::new(compile_rec(c, tenv, scope)?))
    };
    Ok(match e {
        Expr::Var(x) => Node::Slot(slot_of(scope, x)?),
        Expr::Int(n) => Node::Const(Value::Int(*n)),
        Expr::Real(r) => Node::Const(Value::Real(*r)),
        Expr::Bool(b) => Node::Const(Value::Bool(*b)),
        Expr::EmptyDict => Node::Const(Value::empty()),
        Expr::Sum {
            key,
            val,
            range,
            body,
        } => {
            let zero = Value::zero_of(&type_of(tenv, e)?);
            let (kt, vt) = match type_of(tenv, range)? {
                Type::Dict(k, v) => (*k, *v),
                _ => (Type::Int, Type::Empty),
            };
            let range = sub(range, tenv, scope)?;
            tenv.push(key.clone(), kt);
            tenv.push(val.clone(), vt);
            scope.push(key.clone());
            scope.push(val.clone());
            let body = sub(body, tenv, scope);
            tenv.pop();
            tenv.pop();
            scope.truncate(scope.len() - 2);
            Node::Sum {
                range,
                body: body?,
                zero,
            }
        }
        Expr::Singleton { key, val } => Node::Singleton(sub(key, tenv, scope)?, sub(val, tenv, scope)?),
        Expr::Lookup { dict, key } => Node::Lookup {
            zero: Value::zero_of(&type_of(tenv, e)?),
            dict: sub(dict, tenv, scope)?,
            key: sub(key, tenv, scope)?,
        },
        Expr::Let { var, bound, body } => {
            let bt = type_of(tenv, bound)?;
            let bound = sub(bound, tenv, scope)?;
            tenv.push(var.clone(), bt);
            scope.push(var.clone());
            let body = sub(body, tenv, scope);
            tenv.pop();
            scope.pop();
            Node::Let(bound, body?)
        }
        Expr::Not(a) => Node::Not(sub(a, tenv, scope)?),
        Expr::If { cond, then } => Node::If {
            zero: Value::zero_of(&type_of(tenv, then)?),
            cond: sub(cond, tenv, scope)?,
            then: sub(then, tenv, scope)?,
        },
        Expr::Add(a, b) => Node::Add(sub(a, tenv, scope)?, sub(b, tenv, scope)?),
        Expr::Mul(a, b) => Node::Mul(sub(a, tenv, scope)?, sub(b, tenv, scope)?),
        Expr::Eq(a, b) => Node::Eq(sub(a, tenv, scope)?, sub(b, tenv, scope)?),
        Expr::Unary { op, arg } => {
            let f = lookup_op(op)
                .ok_or_else(|| EvalError::Type(TypeError::UnknownOp(op.clone())))?
                .eval;
            Node::Unary(f, sub(arg, tenv, scope)?)
        }
        Expr::Range { start, end } => Node::Range(sub(start, tenv, scope)?, sub(end, tenv, scope)?),
        Expr::SubArray { arr, start, end } => Node::SubArray(
            sub(arr, tenv, scope)?,
            sub(start, tenv, scope)?,
            sub(end, tenv, scope)?,
        ),
        Expr::Unique(a) => compile_rec(a, tenv, scope)?,
    })
}

fn index(v: &Value, op: &'static str) -> Result<i64, EvalError> {
    v.as_int().ok_or(EvalError::Kind {
        op,
        expected: "an index",
        found: v.kind(),
    })
}

fn run(node: &Node, stack: &mut Vec<Value>, stats: &mut Stats) -> Result<Value, EvalError> {
    match node {
        Node::Slot(i) => Ok(stack[*i].clone()),
        Node::Const(v) => Ok(v.clone()),
        Node::Sum { range, body, zero } => {
            let r = run(range, stack, stats)?;
            let mut acc = zero.clone();
            let mut step = |k: i64, v: Value, stack: &mut Vec<Value>, acc: &mut Value| {
                stats.visits += 1;
                stack.push(Value::Int(k));
                stack.push(v);
                let b = run(body, stack, stats);
                stack.truncate(stack.len() - 2);
                let b = b?;
                if !b.is_zero() {
                    stats.accumulations += b.nnz().max(1) as u64;
                    acc.add_assign(b)?;
                }
                Ok::<(), EvalError>(())
            };
            match &r {
                Value::Dict(m) => {
                    for (k, v) in m.iter() {
                        step(*k, v.clone(), stack, &mut acc)?;
                    }
                }
                Value::Range { start, end } => {
                    for i in *start..*end {
                        step(i, Value::Int(i), stack, &mut acc)?;
                    }
                }
                Value::Array(view) => {
                    for p in view.start..view.end {
                        let v = view.data.get(p).expect("view within array");
                        step(p as i64, v, stack, &mut acc)?;
                    }
                }
                other => {
                    return Err(EvalError::Kind {
                        op: "sum",
                        expected: "a dictionary",
                        found: other.kind(),
                    })
                }
            }
            Ok(acc)
        }
        Node::Singleton(k, v) => {
            let k = index(&run(k, stack, stats)?, "singleton key")?;
            let v = run(v, stack, stats)?;
            Ok(Value::singleton(k, v))
        }
        Node::Lookup { dict, key, zero } => {
            let d = run(dict, stack, stats)?;
            let k = index(&run(key, stack, stats)?, "lookup key")?;
            stats.lookups += 1;
            match &d {
                Value::Dict(_) | Value::Range { .. } => Ok(d.get(k).unwrap_or_else(|| zero.clone())),
                Value::Array(view) => {
                    if k < 0 || k as usize >= view.data.len() {
                        return Err(EvalError::Bounds {
                            start: k,
                            end: k + 1,
                            len: view.data.len(),
                        });
                    }
                    Ok(view.data.get(k as usize).expect("checked bound"))
                }
                // The zero of any type, standing in for an unknown shape.
                Value::Real(r) if *r == 0.0 => Ok(zero.clone()),
                other => Err(EvalError::Kind {
                    op: "lookup",
                    expected: "a dictionary",
                    found: other.kind(),
                }),
            }
        }
        Node::Let(bound, body) => {
            let b = run(bound, stack, stats)?;
            stack.push(b);
            let r = run(body, stack, stats);
            stack.pop();
            r
        }
        Node::Not(a) => match run(a, stack, stats)? {
            Value::Bool(b) => Ok(Value::Bool(!b)),
            other => Err(EvalError::Kind {
                op: "not",
                expected: "a boolean",
                found: other.kind(),
            }),
        },
        Node::If { cond, then, zero } => match run(cond, stack, stats)? {
            Value::Bool(true) => run(then, stack, stats),
            Value::Bool(false) => Ok(zero.clone()),
            other => Err(EvalError::Kind {
                op: "if",
                expected: "a boolean",
                found: other.kind(),
            }),
        },
        Node::Add(a, b) => {
            let a = run(a, stack, stats)?;
            let b = run(b, stack, stats)?;
            Ok(a.add(b)?)
        }
        Node::Mul(a, b) => {
            let a = run(a, stack, stats)?;
            let b = run(b, stack, stats)?;
            Ok(a.mul(&b)?)
        }
        Node::Eq(a, b) => {
            let a = run(a, stack, stats)?;
            let b = run(b, stack, stats)?;
            match (&a, &b) {
                (Value::Int(x), Value::Int(y)) => Ok(Value::Bool(x == y)),
                (Value::Bool(x), Value::Bool(y)) => Ok(Value::Bool(x == y)),
                _ => Err(EvalError::Kind {
                    op: "=",
                    expected: "discrete operands",
                    found: a.kind(),
                }),
            }
        }
        Node::Unary(f, a) => {
            let a = run(a, stack, stats)?;
            let x = a.as_real().ok_or(EvalError::Kind {
                op: "unary operation",
                expected: "a real",
                found: a.kind(),
            })?;
            Ok(Value::Real(f(x)))
        }
        Node::Range(s, e) => {
            let start = index(&run(s, stack, stats)?, "range start")?;
            let end = index(&run(e, stack, stats)?, "range end")?;
            Ok(Value::Range { start, end })
        }
        Node::SubArray(arr, s, e) => {
            let arr = run(arr, stack, stats)?;
            let start = index(&run(s, stack, stats)?, "sub-array start")?;
            let end = index(&run(e, stack, stats)?, "sub-array end")?;
            match arr {
                Value::Array(mut view) => {
                    let len = view.data.len();
                    if start < 0 || end < start || end as usize > len {
                        return Err(EvalError::Bounds { start, end, len });
                    }
                    view.start = start as usize;
                    view.end = end as usize;
                    Ok(Value::Array(view))
                }
                Value::Range { start: s0, end: e0 } => Ok(Value::Range {
                    start: start.max(s0),
                    end: end.min(e0).max(start.max(s0)),
                }),
                other => Err(EvalError::Kind {
                    op: "sub-array",
                    expected: "an array",
                    found: other.kind(),
                }),
            }
        }
    }
}

/// Evaluates `e` under `env`.
pub fn eval(env: &Env, e: &Expr) -> Result<Value, EvalError> {
    eval_with_stats(env, e).map(|(v, _)| v)
}

/// Evaluates `e` and reports the work performed.
pub fn eval_with_stats(env: &Env, e: &Expr) -> Result<(Value, Stats), EvalError> {
    let compiled = compile(env.types(), e)?;
    let mut stats = Stats::default();
    let v = compiled.run_env(env, &mut stats)?;
    Ok((v.normalized(), stats))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::{parse, Mode};

    fn vec1(xs: &[f64]) -> Value {
        Value::vector(xs)
    }

    fn dot_env() -> Env {
        Env::new()
            .with("V1", Type::tensor(1), vec1(&[1.0, 2.0]))
            .with("V2", Type::tensor(1), vec1(&[3.0, 4.0]))
    }

    fn run_src(env: &Env, src: &str) -> Value {
        eval(env, &parse(src, Mode::Physical).unwrap()).unwrap()
    }

    #[test]
    fn dot_product() {
        assert_eq!(run_src(&dot_env(), "sum(<i, a> in V1) a * V2(i)"), Value::Real(11.0));
    }

    #[test]
    fn missing_key_is_zero() {
        let env = Env::new().with("D", Type::tensor(1), Value::dict([(0, Value::Real(5.0))]));
        assert_eq!(run_src(&env, "D(7)"), Value::Real(0.0));
    }

    #[test]
    fn sum_over_empty() {
        let env = Env::new().with("E", Type::tensor(1), Value::empty());
        assert_eq!(run_src(&env, "sum(<i, a> in E) { i -> a }"), Value::empty());
    }

    #[test]
    fn false_condition_yields_zero() {
        assert_eq!(run_src(&Env::new(), "if 1 = 2 then { 0 -> 3.0 }"), Value::empty());
        assert_eq!(run_src(&Env::new(), "if not (1 = 2) then 3.0"), Value::Real(3.0));
    }

    #[test]
    fn lookup_singleton_law() {
        assert_eq!(run_src(&Env::new(), "{ 2 -> 4.0 }(2)"), Value::Real(4.0));
        assert_eq!(run_src(&Env::new(), "{ 2 -> 4.0 }(3)"), Value::Real(0.0));
    }

    #[test]
    fn coo_storage_definition() {
        let env = Env::new()
            .with("len", Type::Int, Value::Int(2))
            .with("row", Type::dict(Type::DenseInt, Type::Int), Value::int_array(alloc::vec![1, 4]))
            .with("val", Type::dict(Type::DenseInt, Type::Real), Value::real_array(alloc::vec![2.0, 3.0]));
        let v = run_src(&env, "sum(<_, i> in (0:len)) { unique(row(i)) -> val(i) }");
        assert_eq!(v, Value::dict([(1, Value::Real(2.0)), (4, Value::Real(3.0))]));
    }

    #[test]
    fn subarray_keys_are_positions() {
        let env = Env::new().with(
            "idx",
            Type::dict(Type::DenseInt, Type::Int),
            Value::int_array(alloc::vec![7, 8, 9]),
        );
        let v = run_src(&env, "sum(<p, j> in idx(1:3)) { j -> p }");
        assert_eq!(v, Value::dict([(8, Value::Int(1)), (9, Value::Int(2))]));
        assert!(matches!(
            eval(&env, &parse("sum(<p, j> in idx(1:5)) j", Mode::Physical).unwrap()),
            Err(EvalError::Bounds { .. })
        ));
    }

    #[test]
    fn stats_count_visits() {
        let e = parse("sum(<i, a> in V1) a * V2(i)", Mode::Logical).unwrap();
        let (_, stats) = eval_with_stats(&dot_env(), &e).unwrap();
        assert_eq!(stats.visits, 2);
        assert_eq!(stats.lookups, 2);
    }

    #[test]
    fn shadowing_resolves_innermost() {
        assert_eq!(
            run_src(&Env::new(), "let x = 1.0 in let x = 2.0 in x"),
            Value::Real(2.0)
        );
    }

    #[test]
    fn unary_ops() {
        let env = Env::new().with("x", Type::Real, Value::Real(0.0));
        assert_eq!(run_src(&env, "exp(x) + cos(x)"), Value::Real(2.0));
    }
}
