//! Lowering of normalized Physical SDQLite to the imperative IR.
//!
//! Every term is compiled against a destination: `accum(e, d)` emits code
//! performing `d += e`. Sums become loops over the same destination and a
//! singleton `{k -> v}` extends the destination path with `k`, so with
//! destination passing all writes land in the innermost loop. Without it,
//! dictionary-valued singleton values and nested sums are first built in
//! temporaries and then added to their destination.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::imp::{dict_depth, IExpr, ImpStmt, KernelSignature, KeyKind, LValue, ScalarKind, RESULT};
use crate::lang::subst::{all_names, free_vars, FreshNamer};
use crate::lang::{pretty, typecheck, Expr, Name, Type, TypeEnv, TypeError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Dps {
    #[default]
    On,
    Off,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum LowerError {
    #[error("product of non-scalar operands survives normalization: `{0}`")]
    TensorProduct(String),
    #[error("free variable `{0}` is not a kernel parameter")]
    Unbound(Name),
    #[error("cannot lower `{0}`: {1}")]
    Unsupported(String, &'static str),
    #[error(transparent)]
    Type(#[from] TypeError),
}

/// Lowers `e` into a kernel body accumulating into the result parameter.
pub fn lower_dps(e: &Expr, sig: &KernelSignature, dps: Dps) -> Result<ImpStmt, LowerError> {
    let mut env = TypeEnv::new();
    let inputs = param_types(sig);
    for x in free_vars(e) {
        match inputs.iter().find(|(n, _)| *n == x) {
            Some((_, t)) => env.push(x, t.clone()),
            None => return Err(LowerError::Unbound(x)),
        }
    }
    let mut namer = FreshNamer::new();
    for n in all_names(e) {
        namer.reserve(&n);
    }
    for p in &sig.params {
        namer.reserve(&p.name);
    }
    let mut l = Lowerer {
        env,
        namer,
        dps,
        loops: 0,
        aliases: BTreeMap::new(),
    };
    let mut out = Vec::new();
    l.accum(e, &LValue::new(RESULT), &mut out)?;
    out.push(ImpStmt::Return(RESULT.into()));
    Ok(ImpStmt::Seq(out))
}

/// Types the parameters stand for in the lowered term.
fn param_types(sig: &KernelSignature) -> Vec<(Name, Type)> {
    use super::imp::ParamKind::*;
    let nest = |d: usize| (0..d).fold(Type::Real, |acc, _| Type::dict(Type::Int, acc));
    sig.inputs()
        .iter()
        .map(|p| {
            let t = match p.kind {
                Scalar(ScalarKind::Real) | ResultScalar(ScalarKind::Real) => Type::Real,
                Scalar(ScalarKind::Int) | ResultScalar(ScalarKind::Int) => Type::Int,
                Scalar(ScalarKind::Bool) | ResultScalar(ScalarKind::Bool) => Type::Bool,
                IndexArray => Type::dict(Type::DenseInt, Type::Int),
                ValueArray => Type::dict(Type::DenseInt, Type::Real),
                Dict(d) | ResultDict(d) => nest(d),
            };
            (p.name.clone(), t)
        })
        .collect()
}

struct Lowerer {
    env: TypeEnv,
    namer: FreshNamer,
    dps: Dps,
    /// Number of loops around the statement being emitted.
    loops: usize,
    /// `let`-bound names standing for dictionary atoms.
    aliases: BTreeMap<Name, IExpr>,
}

fn is_scalar(t: &Type) -> bool {
    ScalarKind::of(t).is_some()
}

fn unsupported(e: &Expr, why: &'static str) -> LowerError {
    LowerError::Unsupported(pretty(e), why)
}

impl Lowerer {
    fn ty(&mut self, e: &Expr) -> Result<Type, LowerError> {
        Ok(typecheck(&mut self.env, e)?)
    }

    fn depth_of(&mut self, e: &Expr) -> Result<usize, LowerError> {
        match self.ty(e)? {
            Type::Empty => Ok(1),
            t => dict_depth(&t).ok_or_else(|| unsupported(e, "dictionary with non-real leaves")),
        }
    }

    /// Emits `dest += e`.
    fn accum(&mut self, e: &Expr, dest: &LValue, out: &mut Vec<ImpStmt>) -> Result<(), LowerError> {
        self.accum_at(e, dest, out, true)
    }

    /// `own` is false when `dest` is a temporary created for `e` itself.
    fn accum_at(&mut self, e: &Expr, dest: &LValue, out: &mut Vec<ImpStmt>, own: bool) -> Result<(), LowerError> {
        if e.is_zero_literal() {
            return Ok(());
        }
        match e {
            Expr::Sum { .. } if own && self.dps == Dps::Off && self.loops > 0 && !is_scalar(&self.ty(e)?) => {
                let tmp = self.materialize(e, out)?;
                out.push(ImpStmt::AccumAdd {
                    target: dest.clone(),
                    value: tmp,
                });
                Ok(())
            }
            Expr::Sum {
                key,
                val,
                range,
                body,
            } => self.for_each(key, val, range, out, |l, out| l.accum(body, dest, out)),
            Expr::Singleton { key, val } => {
                let k = self.expr(key, out)?;
                if self.dps == Dps::Off && !is_scalar(&self.ty(val)?) {
                    let tmp = self.materialize(val, out)?;
                    out.push(ImpStmt::AccumAdd {
                        target: dest.at(k),
                        value: tmp,
                    });
                    return Ok(());
                }
                self.accum(val, &dest.at(k), out)
            }
            Expr::Let { var, bound, body } => {
                let mark = self.env.len();
                self.bind(var, bound, out)?;
                let r = self.accum(body, dest, out);
                self.env.truncate(mark);
                r
            }
            Expr::If { cond, then } => {
                let c = self.expr(cond, out)?;
                let mut inner = Vec::new();
                self.accum(then, dest, &mut inner)?;
                if !inner.is_empty() {
                    out.push(ImpStmt::If { cond: c, body: inner });
                }
                Ok(())
            }
            Expr::Add(a, b) if !is_scalar(&self.ty(e)?) => {
                self.accum(a, dest, out)?;
                self.accum(b, dest, out)
            }
            Expr::Unique(a) => self.accum_at(a, dest, out, own),
            _ => {
                let value = self.expr(e, out)?;
                out.push(ImpStmt::AccumAdd {
                    target: dest.clone(),
                    value,
                });
                Ok(())
            }
        }
    }

    /// Builds `e` in a fresh dictionary or scalar and returns a reference to it.
    fn materialize(&mut self, e: &Expr, out: &mut Vec<ImpStmt>) -> Result<IExpr, LowerError> {
        let t = self.ty(e)?;
        let name = self.namer.fresh_with("tmp");
        match ScalarKind::of(&t) {
            Some(kind) => out.push(ImpStmt::DeclScalar {
                name: name.clone(),
                kind,
                init: zero_of(kind),
            }),
            None => out.push(ImpStmt::DeclDict {
                name: name.clone(),
                key_kind: KeyKind::Sparse,
                depth: self.depth_of(e)?,
            }),
        }
        self.accum_at(e, &LValue::new(name.clone()), out, false)?;
        Ok(IExpr::Var(name))
    }

    fn bind(&mut self, x: &Name, bound: &Expr, out: &mut Vec<ImpStmt>) -> Result<(), LowerError> {
        let t = self.ty(bound)?;
        match ScalarKind::of(&t) {
            Some(kind) if matches!(bound, Expr::Sum { .. } | Expr::Let { .. }) => {
                out.push(ImpStmt::DeclScalar {
                    name: x.clone(),
                    kind,
                    init: zero_of(kind),
                });
                self.accum(bound, &LValue::new(x.clone()), out)?;
            }
            Some(kind) => {
                let init = self.expr(bound, out)?;
                out.push(ImpStmt::DeclScalar {
                    name: x.clone(),
                    kind,
                    init,
                });
            }
            None if bound.is_atom() => {
                let a = self.expr(bound, out)?;
                self.aliases.insert(x.clone(), a);
            }
            None => {
                out.push(ImpStmt::DeclDict {
                    name: x.clone(),
                    key_kind: KeyKind::Sparse,
                    depth: self.depth_of(bound)?,
                });
                self.accum(bound, &LValue::new(x.clone()), out)?;
            }
        }
        self.env.push(x.clone(), t);
        Ok(())
    }

    /// Emits a loop over the bindings of `range`, with `body` inside.
    fn for_each(
        &mut self,
        key: &Name,
        val: &Name,
        range: &Expr,
        out: &mut Vec<ImpStmt>,
        body: impl FnOnce(&mut Self, &mut Vec<ImpStmt>) -> Result<(), LowerError>,
    ) -> Result<(), LowerError> {
        let mark = self.env.len();
        let mut inner = Vec::new();
        let stmt = match range {
            Expr::Range { start, end } => {
                let (lo, hi) = (self.expr(start, out)?, self.expr(end, out)?);
                let idx = self.loop_name(val, key, "i");
                for x in [key, val] {
                    if x != "_" && *x != idx {
                        inner.push(ImpStmt::DeclScalar {
                            name: x.clone(),
                            kind: ScalarKind::Int,
                            init: IExpr::var(idx.clone()),
                        });
                    }
                }
                self.env.push(idx.clone(), Type::Int);
                self.env.push(key.clone(), Type::Int);
                self.env.push(val.clone(), Type::Int);
                ImpStmt::ForRange {
                    idx,
                    lo,
                    hi,
                    body: Vec::new(),
                }
            }
            Expr::SubArray { arr, start, end } => {
                let elem = match self.ty(arr)? {
                    Type::Dict(_, v) => *v,
                    _ => return Err(unsupported(range, "sub-array of a non-array")),
                };
                let a = self.expr(arr, out)?;
                let (lo, hi) = (self.expr(start, out)?, self.expr(end, out)?);
                let idx = self.loop_name(key, "_", "p");
                if val != "_" {
                    let kind = ScalarKind::of(&elem).ok_or_else(|| unsupported(range, "array of dictionaries"))?;
                    inner.push(ImpStmt::DeclScalar {
                        name: val.clone(),
                        kind,
                        init: IExpr::index(a, IExpr::var(idx.clone()), 0),
                    });
                }
                self.env.push(idx.clone(), Type::Int);
                self.env.push(val.clone(), elem);
                ImpStmt::ForRange {
                    idx,
                    lo,
                    hi,
                    body: Vec::new(),
                }
            }
            _ => {
                let (kt, vt) = match self.ty(range)? {
                    Type::Dict(k, v) => (*k, *v),
                    Type::Empty => return Ok(()),
                    _ => return Err(unsupported(range, "sum over a non-dictionary")),
                };
                let dict = if range.is_atom() {
                    self.expr(range, out)?
                } else {
                    self.materialize(range, out)?
                };
                let layout = if kt == Type::DenseInt {
                    KeyKind::Dense
                } else {
                    KeyKind::Sparse
                };
                let k = self.loop_name(key, "_", "k");
                let v = self.loop_name(val, "_", "v");
                self.env.push(k.clone(), kt);
                self.env.push(v.clone(), vt);
                ImpStmt::ForEach {
                    key: k,
                    val: v,
                    dict,
                    layout,
                    body: Vec::new(),
                }
            }
        };
        self.loops += 1;
        let r = body(self, &mut inner);
        self.loops -= 1;
        self.env.truncate(mark);
        r?;
        let stmt = match stmt {
            ImpStmt::ForRange { idx, lo, hi, .. } => ImpStmt::ForRange { idx, lo, hi, body: inner },
            ImpStmt::ForEach {
                key, val, dict, layout, ..
            } => ImpStmt::ForEach {
                key,
                val,
                dict,
                layout,
                body: inner,
            },
            s => s,
        };
        out.push(stmt);
        Ok(())
    }

    /// `first` or `second` when one is a real binder, else a fresh name.
    fn loop_name(&mut self, first: &str, second: &str, prefix: &str) -> Name {
        if first != "_" {
            first.to_string()
        } else if second != "_" {
            second.to_string()
        } else {
            self.namer.fresh_with(prefix)
        }
    }

    /// A side-effect-free expression for scalar or atomic `e`, after emitting
    /// whatever statements it needs.
    fn expr(&mut self, e: &Expr, out: &mut Vec<ImpStmt>) -> Result<IExpr, LowerError> {
        Ok(match e {
            Expr::Var(x) => self.aliases.get(x).cloned().unwrap_or_else(|| IExpr::Var(x.clone())),
            Expr::Int(n) => IExpr::Int(*n),
            Expr::Real(r) => IExpr::Real(*r),
            Expr::Bool(b) => IExpr::Bool(*b),
            Expr::Unique(a) => self.expr(a, out)?,
            Expr::Lookup { dict, key } => {
                if let Expr::Range { .. } = dict.as_ref() {
                    return self.expr(key, out);
                }
                let depth = match self.ty(e)? {
                    t if is_scalar(&t) => 0,
                    _ => self.depth_of(e)?,
                };
                let d = if dict.is_atom() || matches!(dict.as_ref(), Expr::Lookup { .. }) {
                    self.expr(dict, out)?
                } else {
                    self.materialize(dict, out)?
                };
                IExpr::index(d, self.expr(key, out)?, depth)
            }
            Expr::Mul(a, b) => {
                if !is_scalar(&self.ty(a)?) || !is_scalar(&self.ty(b)?) {
                    return Err(LowerError::TensorProduct(pretty(e)));
                }
                IExpr::Mul(self.expr(a, out)?.into(), self.expr(b, out)?.into())
            }
            Expr::Add(a, b) if is_scalar(&self.ty(e)?) => {
                IExpr::Add(self.expr(a, out)?.into(), self.expr(b, out)?.into())
            }
            Expr::Eq(a, b) => IExpr::Eq(self.expr(a, out)?.into(), self.expr(b, out)?.into()),
            Expr::Not(a) => IExpr::Not(self.expr(a, out)?.into()),
            Expr::Unary { op, arg } => IExpr::Unary(op.clone(), self.expr(arg, out)?.into()),
            Expr::If { cond, then } if is_scalar(&self.ty(e)?) && is_pure_scalar(then) => {
                IExpr::Select(self.expr(cond, out)?.into(), self.expr(then, out)?.into())
            }
            Expr::Range { .. } | Expr::SubArray { .. } => {
                return Err(unsupported(e, "ranges only appear as loop domains"))
            }
            _ => self.materialize(e, out)?,
        })
    }
}

/// True when `e` lowers to an expression without statements.
fn is_pure_scalar(e: &Expr) -> bool {
    match e {
        Expr::Sum { .. } | Expr::Let { .. } | Expr::Singleton { .. } | Expr::EmptyDict => false,
        Expr::Lookup { dict, .. } => dict.is_atom() || matches!(dict.as_ref(), Expr::Lookup { .. }),
        other => other.children().into_iter().all(is_pure_scalar),
    }
}

fn zero_of(kind: ScalarKind) -> IExpr {
    match kind {
        ScalarKind::Real => IExpr::Real(0.0),
        ScalarKind::Int => IExpr::Int(0),
        ScalarKind::Bool => IExpr::Bool(false),
    }
}
