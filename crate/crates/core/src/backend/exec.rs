//! Reference interpreter for the imperative IR.

use alloc::collections::BTreeMap;
use alloc::string::String;

use super::imp::{IExpr, ImpStmt, KernelSignature, LValue, ParamKind, ScalarKind};
use crate::interp::{Env, Value};
use crate::lang::ops::lookup_op;
use crate::lang::Name;

/// Work counters of one execution.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ExecStats {
    pub iterations: u64,
    pub accumulations: u64,
    pub lookups: u64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExecError {
    #[error("kernel parameter `{0}` has no value")]
    MissingInput(Name),
    #[error("unbound name `{0}`")]
    Unbound(Name),
    #[error("{0}")]
    Value(#[from] crate::interp::value::ValueError),
    #[error("ill-typed operation: {0}")]
    Type(String),
    #[error("kernel body does not return")]
    NoReturn,
}

/// Runs a lowered kernel on the values bound in `inputs`.
pub fn execute(body: &ImpStmt, sig: &KernelSignature, inputs: &Env) -> Result<(Value, ExecStats), ExecError> {
    let mut m = Machine {
        vars: BTreeMap::new(),
        stats: ExecStats::default(),
    };
    for p in sig.inputs() {
        let v = inputs.get(&p.name).ok_or_else(|| ExecError::MissingInput(p.name.clone()))?;
        m.vars.insert(p.name.clone(), v.clone());
    }
    let r = sig.result();
    let zero = match r.kind {
        ParamKind::ResultScalar(k) => scalar_zero(k),
        _ => Value::empty(),
    };
    m.vars.insert(r.name.clone(), zero);
    match m.stmt(body)? {
        Some(v) => Ok((v.normalized(), m.stats)),
        None => Err(ExecError::NoReturn),
    }
}

fn scalar_zero(k: ScalarKind) -> Value {
    match k {
        ScalarKind::Real => Value::Real(0.0),
        ScalarKind::Int => Value::Int(0),
        ScalarKind::Bool => Value::Bool(false),
    }
}

fn ill(what: &str, v: &Value) -> ExecError {
    ExecError::Type(alloc::format!("{} on {}", what, v.kind()))
}

struct Machine {
    vars: BTreeMap<Name, Value>,
    stats: ExecStats,
}

impl Machine {
    fn var(&self, x: &str) -> Result<&Value, ExecError> {
        self.vars.get(x).ok_or_else(|| ExecError::Unbound(x.into()))
    }

    fn block(&mut self, body: &[ImpStmt]) -> Result<Option<Value>, ExecError> {
        for s in body {
            if let Some(v) = self.stmt(s)? {
                return Ok(Some(v));
            }
        }
        Ok(None)
    }

    fn stmt(&mut self, s: &ImpStmt) -> Result<Option<Value>, ExecError> {
        match s {
            ImpStmt::ForRange { idx, lo, hi, body } => {
                let (lo, hi) = (self.int(lo)?, self.int(hi)?);
                for i in lo..hi {
                    self.stats.iterations += 1;
                    self.vars.insert(idx.clone(), Value::Int(i));
                    if let Some(v) = self.block(body)? {
                        return Ok(Some(v));
                    }
                }
            }
            ImpStmt::ForEach { key, val, dict, body, .. } => {
                let d = self.expr(dict)?;
                for (k, v) in d.entries() {
                    self.stats.iterations += 1;
                    self.vars.insert(key.clone(), Value::Int(k));
                    self.vars.insert(val.clone(), v);
                    if let Some(v) = self.block(body)? {
                        return Ok(Some(v));
                    }
                }
            }
            ImpStmt::DeclDict { name, .. } => {
                self.vars.insert(name.clone(), Value::empty());
            }
            ImpStmt::DeclScalar { name, init, .. } => {
                let v = self.expr(init)?;
                self.vars.insert(name.clone(), v);
            }
            ImpStmt::AccumAdd { target, value } => {
                let v = self.expr(value)?;
                self.accum(target, v)?;
            }
            ImpStmt::If { cond, body } => {
                if self.bool(cond)? {
                    return self.block(body);
                }
            }
            ImpStmt::Seq(body) => return self.block(body),
            ImpStmt::Return(x) => return Ok(Some(self.var(x)?.clone())),
        }
        Ok(None)
    }

    fn accum(&mut self, target: &LValue, v: Value) -> Result<(), ExecError> {
        self.stats.accumulations += 1;
        let mut keys = alloc::vec::Vec::with_capacity(target.path.len());
        for k in &target.path {
            keys.push(self.int(k)?);
        }
        let v = keys.into_iter().rev().fold(v, |acc, k| Value::singleton(k, acc));
        let slot = self
            .vars
            .get_mut(&target.name)
            .ok_or_else(|| ExecError::Unbound(target.name.clone()))?;
        slot.add_assign(v)?;
        Ok(())
    }

    fn int(&mut self, e: &IExpr) -> Result<i64, ExecError> {
        match self.expr(e)? {
            Value::Int(n) => Ok(n),
            v => Err(ill("integer use", &v)),
        }
    }

    fn bool(&mut self, e: &IExpr) -> Result<bool, ExecError> {
        match self.expr(e)? {
            Value::Bool(b) => Ok(b),
            v => Err(ill("condition", &v)),
        }
    }

    fn expr(&mut self, e: &IExpr) -> Result<Value, ExecError> {
        Ok(match e {
            IExpr::Var(x) => self.var(x)?.clone(),
            IExpr::Real(r) => Value::Real(*r),
            IExpr::Int(n) => Value::Int(*n),
            IExpr::Bool(b) => Value::Bool(*b),
            IExpr::Index { base, key, depth } => {
                let k = self.int(key)?;
                self.stats.lookups += 1;
                let b = self.expr(base)?;
                match b.get(k) {
                    Some(v) => v,
                    None if *depth == 0 => Value::Real(0.0),
                    None => Value::empty(),
                }
            }
            IExpr::Add(a, b) => match (self.expr(a)?, self.expr(b)?) {
                (Value::Real(x), Value::Real(y)) => Value::Real(x + y),
                (Value::Int(x), Value::Int(y)) => Value::Int(x + y),
                (x, _) => return Err(ill("addition", &x)),
            },
            IExpr::Mul(a, b) => match (self.expr(a)?, self.expr(b)?) {
                (Value::Real(x), Value::Real(y)) => Value::Real(x * y),
                (Value::Int(x), Value::Int(y)) => Value::Int(x * y),
                (x, _) => return Err(ill("multiplication", &x)),
            },
            IExpr::Eq(a, b) => match (self.expr(a)?, self.expr(b)?) {
                (Value::Int(x), Value::Int(y)) => Value::Bool(x == y),
                (Value::Bool(x), Value::Bool(y)) => Value::Bool(x == y),
                (Value::Real(x), Value::Real(y)) => Value::Bool(x == y),
                (x, _) => return Err(ill("equality", &x)),
            },
            IExpr::Not(a) => Value::Bool(!self.bool(a)?),
            IExpr::Unary(op, a) => {
                let f = lookup_op(op).ok_or_else(|| ExecError::Type(alloc::format!("unknown operation `{}`", op)))?;
                match self.expr(a)? {
                    Value::Real(x) => Value::Real((f.eval)(x)),
                    v => return Err(ill(op, &v)),
                }
            }
            IExpr::Select(c, v) => {
                if self.bool(c)? {
                    self.expr(v)?
                } else {
                    Value::Real(0.0)
                }
            }
        })
    }
}
