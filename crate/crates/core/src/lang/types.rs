use alloc::boxed::Box;
use alloc::vec::Vec;
use core::fmt;

use super::ast::{Expr, Name};
use super::check::TypeError;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Type {
    Real,
    Bool,
    Int,
    /// Dense integer key; only changes the backend layout.
    DenseInt,
    Dict(Box<Type>, Box<Type>),
    /// Type of `{ }` whose shape is not known: the zero of any additive type.
    Empty,
}

impl Type {
    pub fn dict(key: Type, val: Type) -> Type {
        Type::Dict(Box::new(key), Box::new(val))
    }

    /// `tensor n`: `n` nested int-keyed dictionaries over a real leaf.
    pub fn tensor(n: usize) -> Type {
        (0..n).fold(Type::Real, |acc, _| Type::dict(Type::Int, acc))
    }

    /// `n` such that the type is `tensor n` (keys of either index kind).
    pub fn order(&self) -> Option<usize> {
        match self {
            Type::Real => Some(0),
            Type::Dict(k, v) if k.is_index() => v.order().map(|n| n + 1),
            _ => None,
        }
    }

    pub fn is_index(&self) -> bool {
        matches!(self, Type::Int | Type::DenseInt)
    }

    pub fn is_discrete(&self) -> bool {
        matches!(self, Type::Int | Type::DenseInt | Type::Bool)
    }

    /// Member of the `D` grammar: `real` or a dictionary over `D`.
    pub fn is_tensor(&self) -> bool {
        match self {
            Type::Empty => true,
            Type::Dict(k, v) => k.is_index() && v.is_tensor(),
            t => t.order().is_some(),
        }
    }

    pub fn is_dict(&self) -> bool {
        matches!(self, Type::Dict(..) | Type::Empty)
    }

    /// Types that support `+` and a zero: reals, ints, and dictionaries of those.
    pub fn is_additive(&self) -> bool {
        match self {
            Type::Real | Type::Int | Type::DenseInt | Type::Empty => true,
            Type::Dict(k, v) => k.is_index() && v.is_additive(),
            Type::Bool => false,
        }
    }

    /// Forgets the dense/sparse key distinction.
    pub fn logical(&self) -> Type {
        match self {
            Type::DenseInt => Type::Int,
            Type::Dict(k, v) => Type::dict(k.logical(), v.logical()),
            t => t.clone(),
        }
    }

    /// Equality up to the dense/sparse key distinction, where `Empty` matches
    /// any additive type.
    pub fn compatible(&self, other: &Type) -> bool {
        match (self, other) {
            (Type::Empty, t) | (t, Type::Empty) => t.is_additive(),
            (Type::Dict(k1, v1), Type::Dict(k2, v2)) => k1.compatible(k2) && v1.compatible(v2),
            (a, b) => a.logical() == b.logical(),
        }
    }

    /// The more informative of two compatible types.
    pub fn join(&self, other: &Type) -> Type {
        match (self, other) {
            (Type::Empty, t) | (t, Type::Empty) => t.logical(),
            (Type::Dict(k, v1), Type::Dict(_, v2)) => Type::dict(k.logical(), v1.join(v2)),
            (a, _) => a.logical(),
        }
    }

    /// True when the type mentions `Empty`.
    pub fn is_partial(&self) -> bool {
        match self {
            Type::Empty => true,
            Type::Dict(k, v) => k.is_partial() || v.is_partial(),
            _ => false,
        }
    }
}

impl fmt::Display for Type {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Type::Real => f.write_str("real"),
            Type::Bool => f.write_str("bool"),
            Type::Int => f.write_str("int"),
            Type::DenseInt => f.write_str("dense_int"),
            Type::Dict(k, v) => write!(f, "{{{} -> {}}}", k, v),
            Type::Empty => f.write_str("empty"),
        }
    }
}

/// `D1 ⊗ D2`, the result type of `*`.
pub fn otimes(d1: &Type, d2: &Type) -> Result<Type, TypeError> {
    if !d2.is_tensor() {
        return Err(TypeError::NotTensor(d2.clone()));
    }
    match d1 {
        Type::Real => Ok(d2.clone()),
        Type::Empty => Ok(Type::Empty),
        Type::Dict(k, v) if k.is_index() => Ok(Type::Dict(k.clone(), Box::new(otimes(v, d2)?))),
        other => Err(TypeError::NotTensor(other.clone())),
    }
}

/// `zero[D]`: `0.0` for reals, `{ }` for dictionaries.
pub fn zero_of(d: &Type) -> Result<Expr, TypeError> {
    match d {
        Type::Real => Ok(Expr::Real(0.0)),
        Type::Int | Type::DenseInt => Ok(Expr::Int(0)),
        Type::Dict(..) | Type::Empty if d.is_additive() => Ok(Expr::EmptyDict),
        other => Err(TypeError::NotTensor(other.clone())),
    }
}

/// Ordered variable-to-type map; later bindings shadow earlier ones.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TypeEnv {
    entries: Vec<(Name, Type)>,
}

impl TypeEnv {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, name: impl Into<Name>, ty: Type) -> Self {
        self.push(name, ty);
        self
    }

    pub fn push(&mut self, name: impl Into<Name>, ty: Type) {
        self.entries.push((name.into(), ty));
    }

    /// Rebinds the innermost `name`, or adds it.
    pub fn set(&mut self, name: impl Into<Name>, ty: Type) {
        let name = name.into();
        match self.entries.iter_mut().rev().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = ty,
            None => self.entries.push((name, ty)),
        }
    }

    pub fn pop(&mut self) {
        self.entries.pop();
    }

    pub fn get(&self, name: &str) -> Option<&Type> {
        self.entries.iter().rev().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn truncate(&mut self, len: usize) {
        self.entries.truncate(len);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Name, &Type)> {
        self.entries.iter().map(|(n, t)| (n, t))
    }
}

impl<N: Into<Name>> FromIterator<(N, Type)> for TypeEnv {
    fn from_iter<I: IntoIterator<Item = (N, Type)>>(iter: I) -> Self {
        TypeEnv {
            entries: iter.into_iter().map(|(n, t)| (n.into(), t)).collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_orders() {
        assert_eq!(Type::tensor(0), Type::Real);
        assert_eq!(Type::tensor(2).order(), Some(2));
        assert_eq!(Type::dict(Type::DenseInt, Type::Real).order(), Some(1));
        assert_eq!(Type::dict(Type::Int, Type::Bool).order(), None);
    }

    #[test]
    fn otimes_appends_orders() {
        assert_eq!(otimes(&Type::tensor(1), &Type::tensor(2)), Ok(Type::tensor(3)));
        assert_eq!(otimes(&Type::Real, &Type::tensor(1)), Ok(Type::tensor(1)));
        assert!(otimes(&Type::Bool, &Type::Real).is_err());
    }

    #[test]
    fn empty_is_compatible_with_additive_types() {
        assert!(Type::Empty.compatible(&Type::tensor(2)));
        assert!(Type::tensor(2).compatible(&Type::dict(Type::Int, Type::Empty)));
        assert!(!Type::Empty.compatible(&Type::Bool));
        assert_eq!(Type::Empty.join(&Type::tensor(1)), Type::tensor(1));
    }

    #[test]
    fn zeros() {
        assert_eq!(zero_of(&Type::Real), Ok(Expr::Real(0.0)));
        assert_eq!(zero_of(&Type::tensor(3)), Ok(Expr::EmptyDict));
    }

    #[test]
    fn env_shadowing() {
        let mut env = TypeEnv::new().with("x", Type::Real);
        env.push("x", Type::Int);
        assert_eq!(env.get("x"), Some(&Type::Int));
        env.pop();
        assert_eq!(env.get("x"), Some(&Type::Real));
    }
}
