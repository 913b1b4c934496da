//! The imperative IR and kernel signatures.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::lang::subst::free_vars;
use crate::lang::{type_of, Expr, Name, Type, TypeEnv, TypeError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScalarKind {
    Real,
    Int,
    Bool,
}

impl ScalarKind {
    pub fn of(t: &Type) -> Option<ScalarKind> {
        match t {
            Type::Real => Some(ScalarKind::Real),
            Type::Int | Type::DenseInt => Some(ScalarKind::Int),
            Type::Bool => Some(ScalarKind::Bool),
            _ => None,
        }
    }
}

/// How a dictionary's keys are laid out.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KeyKind {
    /// Hashed keys.
    Sparse,
    /// Contiguous array positions.
    Dense,
}

/// Side-effect-free expressions.
#[derive(Debug, Clone, PartialEq)]
pub enum IExpr {
    Var(Name),
    Real(f64),
    Int(i64),
    Bool(bool),
    /// `base[key]`; a missing key reads as the zero of a dictionary nested
    /// `depth` levels deep, or `0.0` when `depth` is zero.
    Index { base: Box<IExpr>, key: Box<IExpr>, depth: usize },
    Add(Box<IExpr>, Box<IExpr>),
    Mul(Box<IExpr>, Box<IExpr>),
    Eq(Box<IExpr>, Box<IExpr>),
    Not(Box<IExpr>),
    Unary(Name, Box<IExpr>),
    /// `cond ? value : 0`.
    Select(Box<IExpr>, Box<IExpr>),
}

impl IExpr {
    pub fn var(x: impl Into<Name>) -> IExpr {
        IExpr::Var(x.into())
    }

    pub fn index(base: IExpr, key: IExpr, depth: usize) -> IExpr {
        IExpr::Index {
            base: base.into(),
            key: key.into(),
            depth,
        }
    }
}

/// A destination name followed by an index chain.
#[derive(Debug, Clone, PartialEq)]
pub struct LValue {
    pub name: Name,
    pub path: Vec<IExpr>,
}

impl LValue {
    pub fn new(name: impl Into<Name>) -> Self {
        LValue {
            name: name.into(),
            path: Vec::new(),
        }
    }

    pub fn at(&self, key: IExpr) -> Self {
        let mut path = self.path.clone();
        path.push(key);
        LValue {
            name: self.name.clone(),
            path,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ImpStmt {
    /// `for idx in lo..hi`.
    ForRange {
        idx: Name,
        lo: IExpr,
        hi: IExpr,
        body: Vec<ImpStmt>,
    },
    /// Visits every stored binding of a dictionary, or every position of an array.
    ForEach {
        key: Name,
        val: Name,
        dict: IExpr,
        layout: KeyKind,
        body: Vec<ImpStmt>,
    },
    /// A dictionary of `depth` nested levels over a real leaf, initially empty.
    DeclDict {
        name: Name,
        key_kind: KeyKind,
        depth: usize,
    },
    DeclScalar {
        name: Name,
        kind: ScalarKind,
        init: IExpr,
    },
    AccumAdd {
        target: LValue,
        value: IExpr,
    },
    If {
        cond: IExpr,
        body: Vec<ImpStmt>,
    },
    Seq(Vec<ImpStmt>),
    Return(Name),
}

impl ImpStmt {
    /// Visits every statement, passing the number of enclosing loops.
    pub fn walk(&self, f: &mut impl FnMut(&ImpStmt, usize)) {
        fn go(s: &ImpStmt, depth: usize, f: &mut impl FnMut(&ImpStmt, usize)) {
            f(s, depth);
            match s {
                ImpStmt::ForRange { body, .. } | ImpStmt::ForEach { body, .. } => {
                    body.iter().for_each(|b| go(b, depth + 1, f))
                }
                ImpStmt::If { body, .. } | ImpStmt::Seq(body) => body.iter().for_each(|b| go(b, depth, f)),
                _ => {}
            }
        }
        go(self, 0, f)
    }

    /// Number of `DeclDict` statements nested inside at least one loop.
    pub fn dict_decls_in_loops(&self) -> usize {
        let mut n = 0;
        self.walk(&mut |s, depth| {
            if depth > 0 && matches!(s, ImpStmt::DeclDict { .. }) {
                n += 1;
            }
        });
        n
    }

    pub fn count(&self, pred: impl Fn(&ImpStmt) -> bool) -> usize {
        let mut n = 0;
        self.walk(&mut |s, _| n += pred(s) as usize);
        n
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParamKind {
    Scalar(ScalarKind),
    IndexArray,
    ValueArray,
    /// A nested dictionary input of the given depth.
    Dict(usize),
    ResultScalar(ScalarKind),
    ResultDict(usize),
}

impl ParamKind {
    pub fn is_result(&self) -> bool {
        matches!(self, ParamKind::ResultScalar(_) | ParamKind::ResultDict(_))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Param {
    pub name: Name,
    pub kind: ParamKind,
}

/// Ordered kernel parameters; the caller-allocated result comes last.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KernelSignature {
    pub name: Name,
    pub params: Vec<Param>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SignatureError {
    #[error("input `{0}` has type `{1}`, which no kernel parameter kind can hold")]
    Input(Name, Type),
    #[error("kernel result of type `{0}` is neither a scalar nor a dictionary of reals")]
    Result(Type),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KernelError {
    #[error(transparent)]
    Type(#[from] TypeError),
    #[error(transparent)]
    Signature(#[from] SignatureError),
}

/// Depth of a `{int -> ... {int -> real}}` type with sparse or dense keys.
pub fn dict_depth(t: &Type) -> Option<usize> {
    match t {
        Type::Real => Some(0),
        Type::Dict(k, v) if k.is_index() => dict_depth(v).map(|d| d + 1),
        _ => None,
    }
}

impl KernelSignature {
    /// Parameters for `inputs` in order, then `result` of type `result_type`.
    pub fn new(name: impl Into<Name>, inputs: &TypeEnv, result_type: &Type) -> Result<Self, SignatureError> {
        let mut params = Vec::new();
        for (x, t) in inputs.iter() {
            let kind = match t {
                Type::Dict(k, v) if **k == Type::DenseInt && v.is_index() => ParamKind::IndexArray,
                Type::Dict(k, v) if **k == Type::DenseInt && **v == Type::Real => ParamKind::ValueArray,
                t => match (ScalarKind::of(t), dict_depth(t)) {
                    (Some(k), _) => ParamKind::Scalar(k),
                    (None, Some(d)) => ParamKind::Dict(d),
                    _ => return Err(SignatureError::Input(x.clone(), t.clone())),
                },
            };
            params.push(Param { name: x.clone(), kind });
        }
        let kind = match (ScalarKind::of(result_type), result_type) {
            (Some(k), _) => ParamKind::ResultScalar(k),
            (None, Type::Empty) => ParamKind::ResultDict(1),
            (None, t) => ParamKind::ResultDict(dict_depth(t).ok_or_else(|| SignatureError::Result(t.clone()))?),
        };
        params.push(Param {
            name: RESULT.into(),
            kind,
        });
        Ok(KernelSignature {
            name: name.into(),
            params,
        })
    }

    /// Signature of a kernel computing `e`: its free variables in `env` order,
    /// real scalars first, then the result.
    pub fn for_term(name: impl Into<Name>, env: &TypeEnv, e: &Expr) -> Result<Self, KernelError> {
        let free = free_vars(e);
        let used: Vec<(&Name, &Type)> = env.iter().filter(|(x, _)| free.contains(*x)).collect();
        let inputs: TypeEnv = used
            .iter()
            .filter(|(_, t)| **t == Type::Real)
            .chain(used.iter().filter(|(_, t)| **t != Type::Real))
            .map(|(x, t)| ((*x).clone(), (*t).clone()))
            .collect();
        let result = type_of(&inputs, e)?;
        Ok(KernelSignature::new(name, &inputs, &result)?)
    }

    pub fn result(&self) -> &Param {
        self.params.last().expect("signature has a result")
    }

    pub fn inputs(&self) -> &[Param] {
        &self.params[..self.params.len() - 1]
    }
}

/// Name of the destination parameter.
pub const RESULT: &str = "result";

impl fmt::Display for ScalarKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScalarKind::Real => "real",
            ScalarKind::Int => "int",
            ScalarKind::Bool => "bool",
        })
    }
}

/// Kernel names are identifiers built from the kernel and the gradient target.
pub fn kernel_name(kernel: &str, wrt: Option<&str>) -> String {
    let mut s: String = kernel.chars().map(|c| if c.is_alphanumeric() { c } else { '_' }).collect();
    if let Some(w) = wrt {
        s.push_str("_wrt_");
        s.extend(w.chars().map(|c| if c.is_alphanumeric() { c } else { '_' }));
    }
    s
}
