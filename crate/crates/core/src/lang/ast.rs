//! Abstract syntax of Logical and Physical SDQLite.

use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

/// Variable and operator names.
pub type Name = String;

/// One node per grammar production.
///
/// `Range`, `SubArray` and `Unique` belong to the physical fragment; everything
/// else is logical.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    /// `sum(<key, val> in range) body`
    Sum {
        key: Name,
        val: Name,
        range: Box<Expr>,
        body: Box<Expr>,
    },
    /// `{ key -> val }`
    Singleton { key: Box<Expr>, val: Box<Expr> },
    /// `{ }`
    EmptyDict,
    /// `dict(key)`
    Lookup { dict: Box<Expr>, key: Box<Expr> },
    /// `let var = bound in body`
    Let {
        var: Name,
        bound: Box<Expr>,
        body: Box<Expr>,
    },
    Var(Name),
    Not(Box<Expr>),
    /// `if cond then then`; a false condition yields the zero of the branch type.
    If { cond: Box<Expr>, then: Box<Expr> },
    Add(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Int(i64),
    Real(f64),
    Bool(bool),
    /// `op(arg)` for a real unary operation from the op table.
    Unary { op: Name, arg: Box<Expr> },
    Eq(Box<Expr>, Box<Expr>),
    /// `(start:end)`, the dense array of integers `start..end`.
    Range { start: Box<Expr>, end: Box<Expr> },
    /// `arr(start:end)`, positions `start..end` of a dense array.
    SubArray {
        arr: Box<Expr>,
        start: Box<Expr>,
        end: Box<Expr>,
    },
    /// `unique(e)`: promise that the keys produced here are pairwise distinct.
    Unique(Box<Expr>),
}

impl Expr {
    pub fn var(name: impl Into<Name>) -> Expr {
        Expr::Var(name.into())
    }

    pub fn sum(key: impl Into<Name>, val: impl Into<Name>, range: Expr, body: Expr) -> Expr {
        Expr::Sum {
            key: key.into(),
            val: val.into(),
            range: Box::new(range),
            body: Box::new(body),
        }
    }

    pub fn singleton(key: Expr, val: Expr) -> Expr {
        Expr::Singleton {
            key: Box::new(key),
            val: Box::new(val),
        }
    }

    pub fn lookup(dict: Expr, key: Expr) -> Expr {
        Expr::Lookup {
            dict: Box::new(dict),
            key: Box::new(key),
        }
    }

    pub fn let_in(var: impl Into<Name>, bound: Expr, body: Expr) -> Expr {
        Expr::Let {
            var: var.into(),
            bound: Box::new(bound),
            body: Box::new(body),
        }
    }

    pub fn if_then(cond: Expr, then: Expr) -> Expr {
        Expr::If {
            cond: Box::new(cond),
            then: Box::new(then),
        }
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::Add(Box::new(a), Box::new(b))
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::Mul(Box::new(a), Box::new(b))
    }

    pub fn eq(a: Expr, b: Expr) -> Expr {
        Expr::Eq(Box::new(a), Box::new(b))
    }

    pub fn not(a: Expr) -> Expr {
        Expr::Not(Box::new(a))
    }

    pub fn unary(op: impl Into<Name>, arg: Expr) -> Expr {
        Expr::Unary {
            op: op.into(),
            arg: Box::new(arg),
        }
    }

    pub fn range(start: Expr, end: Expr) -> Expr {
        Expr::Range {
            start: Box::new(start),
            end: Box::new(end),
        }
    }

    pub fn sub_array(arr: Expr, start: Expr, end: Expr) -> Expr {
        Expr::SubArray {
            arr: Box::new(arr),
            start: Box::new(start),
            end: Box::new(end),
        }
    }

    pub fn unique(e: Expr) -> Expr {
        Expr::Unique(Box::new(e))
    }

    /// Syntactic zero: `0.0` or `{ }`.
    pub fn is_zero_literal(&self) -> bool {
        matches!(self, Expr::EmptyDict) || matches!(self, Expr::Real(r) if *r == 0.0)
    }

    /// Variables, constants, and lookup chains rooted at a variable with atomic keys.
    ///
    /// Lookup chains such as `M(i)(j)` count as atoms: they are cheap, duplicable
    /// accesses and differentiate to the matching chain on the tangent variable.
    pub fn is_atom(&self) -> bool {
        match self {
            Expr::Var(_) | Expr::Int(_) | Expr::Real(_) | Expr::Bool(_) | Expr::EmptyDict => true,
            Expr::Lookup { dict, key } => dict.is_lookup_chain() && key.is_atom(),
            _ => false,
        }
    }

    fn is_lookup_chain(&self) -> bool {
        match self {
            Expr::Var(_) => true,
            Expr::Lookup { dict, key } => dict.is_lookup_chain() && key.is_atom(),
            _ => false,
        }
    }

    /// Immediate children in evaluation order.
    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Sum { range, body, .. } => alloc::vec![range.as_ref(), body.as_ref()],
            Expr::Singleton { key, val } => alloc::vec![key.as_ref(), val.as_ref()],
            Expr::Lookup { dict, key } => alloc::vec![dict.as_ref(), key.as_ref()],
            Expr::Let { bound, body, .. } => alloc::vec![bound.as_ref(), body.as_ref()],
            Expr::If { cond, then } => alloc::vec![cond.as_ref(), then.as_ref()],
            Expr::Add(a, b) | Expr::Mul(a, b) | Expr::Eq(a, b) => alloc::vec![a.as_ref(), b.as_ref()],
            Expr::Range { start, end } => alloc::vec![start.as_ref(), end.as_ref()],
            Expr::SubArray { arr, start, end } => {
                alloc::vec![arr.as_ref(), start.as_ref(), end.as_ref()]
            }
            Expr::Not(a) | Expr::Unique(a) | Expr::Unary { arg: a, .. } => alloc::vec![a.as_ref()],
            Expr::EmptyDict | Expr::Var(_) | Expr::Int(_) | Expr::Real(_) | Expr::Bool(_) => {
                Vec::new()
            }
        }
    }

    /// Number of nodes.
    pub fn size(&self) -> usize {
        1 + self.children().into_iter().map(Expr::size).sum::<usize>()
    }

    /// True when no physical-only construct occurs in the tree.
    pub fn is_logical(&self) -> bool {
        self.first_physical().is_none()
    }

    /// Name of the first physical-only construct, if any.
    pub fn first_physical(&self) -> Option<&'static str> {
        match self {
            Expr::Range { .. } => Some("range"),
            Expr::SubArray { .. } => Some("subarray"),
            _ => self.children().into_iter().find_map(Expr::first_physical),
        }
    }

    /// Human-readable node kind, also used as the `kind` field of the JSON dump.
    pub fn kind(&self) -> &'static str {
        match self {
            Expr::Sum { .. } => "sum",
            Expr::Singleton { .. } => "singleton",
            Expr::EmptyDict => "empty_dict",
            Expr::Lookup { .. } => "lookup",
            Expr::Let { .. } => "let",
            Expr::Var(_) => "var",
            Expr::Not(_) => "not",
            Expr::If { .. } => "if",
            Expr::Add(..) => "add",
            Expr::Mul(..) => "mul",
            Expr::Int(_) => "int",
            Expr::Real(_) => "real",
            Expr::Bool(_) => "bool",
            Expr::Unary { .. } => "unary",
            Expr::Eq(..) => "eq",
            Expr::Range { .. } => "range",
            Expr::SubArray { .. } => "subarray",
            Expr::Unique(_) => "unique",
        }
    }

    /// Removes every `unique` annotation.
    pub fn strip_unique(self) -> Expr {
        self.map_children(&mut |c| c.strip_unique()).unwrap_unique()
    }

    fn unwrap_unique(self) -> Expr {
        match self {
            Expr::Unique(e) => *e,
            e => e,
        }
    }

    /// Rebuilds the node with `f` applied to each immediate child.
    pub fn map_children(self, f: &mut impl FnMut(Expr) -> Expr) -> Expr {
        match self {
            Expr::Sum {
                key,
                val,
                range,
                body,
            } => Expr::Sum {
                key,
                val,
                range: Box::new(f(*range)),
                body: Box::new(f(*body)),
            },
            Expr::Singleton { key, val } => Expr::singleton(f(*key), f(*val)),
            Expr::Lookup { dict, key } => Expr::lookup(f(*dict), f(*key)),
            Expr::Let { var, bound, body } => Expr::Let {
                var,
                bound: Box::new(f(*bound)),
                body: Box::new(f(*body)),
            },
            Expr::Not(a) => Expr::not(f(*a)),
            Expr::If { cond, then } => Expr::if_then(f(*cond), f(*then)),
            Expr::Add(a, b) => Expr::add(f(*a), f(*b)),
            Expr::Mul(a, b) => Expr::mul(f(*a), f(*b)),
            Expr::Eq(a, b) => Expr::eq(f(*a), f(*b)),
            Expr::Unary { op, arg } => Expr::Unary {
                op,
                arg: Box::new(f(*arg)),
            },
            Expr::Range { start, end } => Expr::range(f(*start), f(*end)),
            Expr::SubArray { arr, start, end } => Expr::sub_array(f(*arr), f(*start), f(*end)),
            Expr::Unique(a) => Expr::unique(f(*a)),
            leaf => leaf,
        }
    }
}
