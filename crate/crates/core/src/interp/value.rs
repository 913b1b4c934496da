//! Runtime values: scalars and semi-ring dictionaries.

use alloc::collections::BTreeMap;
use alloc::sync::Arc;
use alloc::vec::Vec;

use crate::lang::Type;

/// Contents of a dense backing array.
#[derive(Debug, Clone, PartialEq)]
pub enum ArrayData {
    Int(Arc<[i64]>),
    Real(Arc<[f64]>),
}

impl ArrayData {
    pub fn len(&self) -> usize {
        match self {
            ArrayData::Int(a) => a.len(),
            ArrayData::Real(a) => a.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, i: usize) -> Option<Value> {
        match self {
            ArrayData::Int(a) => a.get(i).map(|&x| Value::Int(x)),
            ArrayData::Real(a) => a.get(i).map(|&x| Value::Real(x)),
        }
    }
}

/// A window `[start, end)` of a backing array. Keys are absolute positions.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayView {
    pub data: ArrayData,
    pub start: usize,
    pub end: usize,
}

impl ArrayView {
    pub fn whole(data: ArrayData) -> Self {
        let end = data.len();
        ArrayView {
            data,
            start: 0,
            end,
        }
    }
}

pub type DictMap = BTreeMap<i64, Value>;

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Real(f64),
    Int(i64),
    Bool(bool),
    /// Finite map without zero-valued bindings.
    Dict(Arc<DictMap>),
    /// `(start:end)`, materialized lazily.
    Range { start: i64, end: i64 },
    /// Dense backing array; entries are never elided.
    Array(ArrayView),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ValueError {
    #[error("cannot add {0} and {1}")]
    Add(&'static str, &'static str),
    #[error("cannot multiply {0} and {1}")]
    Mul(&'static str, &'static str),
}

impl Value {
    pub fn empty() -> Value {
        Value::Dict(Arc::new(DictMap::new()))
    }

    pub fn from_map(map: DictMap) -> Value {
        Value::Dict(Arc::new(map))
    }

    /// Builds a dictionary from bindings, dropping zeros and merging repeated keys.
    pub fn dict<I: IntoIterator<Item = (i64, Value)>>(entries: I) -> Value {
        let mut acc = Value::empty();
        for (k, v) in entries {
            acc.add_assign(Value::singleton(k, v))
                .expect("entries share one type");
        }
        acc
    }

    pub fn singleton(key: i64, val: Value) -> Value {
        if val.is_zero() {
            return Value::empty();
        }
        let mut m = DictMap::new();
        m.insert(key, val);
        Value::from_map(m)
    }

    /// Dense vector `{0 -> xs[0], 1 -> xs[1], ...}` with zeros dropped.
    pub fn vector(xs: &[f64]) -> Value {
        Value::dict(xs.iter().enumerate().map(|(i, &x)| (i as i64, Value::Real(x))))
    }

    pub fn int_array(xs: Vec<i64>) -> Value {
        Value::Array(ArrayView::whole(ArrayData::Int(xs.into())))
    }

    pub fn real_array(xs: Vec<f64>) -> Value {
        Value::Array(ArrayView::whole(ArrayData::Real(xs.into())))
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Value::Real(_) => "real",
            Value::Int(_) => "int",
            Value::Bool(_) => "bool",
            Value::Dict(_) => "dict",
            Value::Range { .. } => "range",
            Value::Array(_) => "array",
        }
    }

    /// Additive zero of a type.
    pub fn zero_of(t: &Type) -> Value {
        match t {
            Type::Real => Value::Real(0.0),
            Type::Int | Type::DenseInt => Value::Int(0),
            Type::Bool => Value::Bool(false),
            Type::Dict(..) | Type::Empty => Value::empty(),
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Value::Real(r) => *r == 0.0,
            Value::Int(n) => *n == 0,
            Value::Bool(_) => false,
            Value::Dict(m) => m.is_empty(),
            Value::Range { start, end } => end <= start,
            Value::Array(_) => false,
        }
    }

    pub fn as_real(&self) -> Option<f64> {
        match self {
            Value::Real(r) => Some(*r),
            // The empty dictionary doubles as the zero of any type.
            Value::Dict(m) if m.is_empty() => Some(0.0),
            _ => None,
        }
    }

    pub fn as_int(&self) -> Option<i64> {
        match self {
            Value::Int(n) => Some(*n),
            _ => None,
        }
    }

    /// Bindings in key order; ranges and arrays are materialized.
    pub fn entries(&self) -> Vec<(i64, Value)> {
        match self {
            Value::Dict(m) => m.iter().map(|(k, v)| (*k, v.clone())).collect(),
            Value::Range { start, end } => (*start..*end).map(|i| (i, Value::Int(i))).collect(),
            Value::Array(v) => (v.start..v.end)
                .map(|p| (p as i64, v.data.get(p).expect("view within array")))
                .collect(),
            _ => Vec::new(),
        }
    }

    /// The value as a zero-elided dictionary, when it is dictionary-like.
    pub fn to_dict(&self) -> Option<Arc<DictMap>> {
        match self {
            Value::Dict(m) => Some(m.clone()),
            Value::Range { .. } | Value::Array(_) => Some(Arc::new(
                self.entries().into_iter().filter(|(_, v)| !v.is_zero()).collect(),
            )),
            _ => None,
        }
    }

    /// `self(key)`, or `None` for a missing binding.
    pub fn get(&self, key: i64) -> Option<Value> {
        match self {
            Value::Dict(m) => m.get(&key).cloned(),
            Value::Range { start, end } => (*start <= key && key < *end).then_some(Value::Int(key)),
            Value::Array(v) => {
                if key < v.start as i64 || key >= v.end as i64 {
                    None
                } else {
                    v.data.get(key as usize)
                }
            }
            _ => None,
        }
    }

    /// Number of stored scalar leaves.
    pub fn nnz(&self) -> usize {
        match self {
            Value::Dict(m) => m.values().map(Value::nnz).sum(),
            Value::Range { start, end } => (end - start).max(0) as usize,
            Value::Array(v) => v.end - v.start,
            _ => usize::from(!self.is_zero()),
        }
    }

    /// In-place semi-ring addition.
    pub fn add_assign(&mut self, rhs: Value) -> Result<(), ValueError> {
        match (&mut *self, rhs) {
            (Value::Real(a), Value::Real(b)) => *a += b,
            (Value::Int(a), Value::Int(b)) => *a += b,
            (_, rhs) if rhs.is_zero() && !matches!(rhs, Value::Real(_) | Value::Int(_)) => {}
            (lhs, rhs) if lhs.is_zero() && !matches!(lhs, Value::Real(_) | Value::Int(_)) => {
                *lhs = normalize(rhs)
            }
            (Value::Dict(a), rhs) => {
                let b = rhs.to_dict().ok_or(ValueError::Add("dict", rhs.kind()))?;
                let map = Arc::make_mut(a);
                let b = Arc::try_unwrap(b).unwrap_or_else(|shared| (*shared).clone());
                for (k, v) in b {
                    match map.get_mut(&k) {
                        Some(slot) => {
                            slot.add_assign(v)?;
                            if slot.is_zero() {
                                map.remove(&k);
                            }
                        }
                        None => {
                            if !v.is_zero() {
                                map.insert(k, v);
                            }
                        }
                    }
                }
            }
            (lhs @ (Value::Range { .. } | Value::Array(_)), rhs) => {
                let mut d = Value::Dict(lhs.to_dict().expect("dictionary-like"));
                d.add_assign(rhs)?;
                *lhs = d;
            }
            (lhs, rhs) => return Err(ValueError::Add(lhs.kind(), rhs.kind())),
        }
        Ok(())
    }

    pub fn add(mut self, rhs: Value) -> Result<Value, ValueError> {
        self.add_assign(rhs)?;
        Ok(self)
    }

    /// Semi-ring multiplication: scalar product or outer product.
    pub fn mul(&self, rhs: &Value) -> Result<Value, ValueError> {
        match (self, rhs) {
            (Value::Real(a), Value::Real(b)) => Ok(Value::Real(a * b)),
            (Value::Int(a), Value::Int(b)) => Ok(Value::Int(a * b)),
            (a, _) if a.is_zero() && a.is_dict_like() => Ok(Value::empty()),
            (_, b) if b.is_zero() && b.is_dict_like() => Ok(Value::empty()),
            (Value::Real(a), b) if b.is_dict_like() => {
                if *a == 0.0 {
                    return Ok(Value::empty());
                }
                scale(b, *a)
            }
            (a, b) if a.is_dict_like() => {
                let mut out = DictMap::new();
                for (k, v) in a.entries() {
                    let p = v.mul(b)?;
                    if !p.is_zero() {
                        out.insert(k, p);
                    }
                }
                Ok(Value::from_map(out))
            }
            (a, b) => Err(ValueError::Mul(a.kind(), b.kind())),
        }
    }

    fn is_dict_like(&self) -> bool {
        matches!(self, Value::Dict(_) | Value::Range { .. } | Value::Array(_))
    }

    /// Canonical zero-elided form with ranges and arrays materialized.
    pub fn normalized(&self) -> Value {
        normalize(self.clone())
    }
}

fn normalize(v: Value) -> Value {
    match v {
        Value::Range { .. } | Value::Array(_) => Value::Dict(v.to_dict().expect("dictionary-like")),
        v => v,
    }
}

fn scale(b: &Value, s: f64) -> Result<Value, ValueError> {
    match b {
        Value::Real(x) => Ok(Value::Real(s * x)),
        Value::Int(_) | Value::Bool(_) => Err(ValueError::Mul("real", b.kind())),
        _ => {
            let mut out = DictMap::new();
            for (k, v) in b.entries() {
                let p = scale(&v, s)?;
                if !p.is_zero() {
                    out.insert(k, p);
                }
            }
            Ok(Value::from_map(out))
        }
    }
}

/// Tolerance used to compare reals: `|a - b| <= max(abs, rel * max(|a|, |b|))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance {
            abs: 1e-6,
            rel: 1e-4,
        }
    }
}

impl Tolerance {
    pub fn close(&self, a: f64, b: f64) -> bool {
        let diff = (a - b).abs();
        diff <= self.abs.max(self.rel * a.abs().max(b.abs())) || a == b
    }
}

/// Largest coordinatewise difference between two values.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Discrepancy {
    pub max_abs: f64,
    /// `|a - b| / max(|a|, |b|)` at the worst coordinate; 0 when both are 0.
    pub max_rel: f64,
    /// True when the values differ in kind (not a numeric difference).
    pub shape_mismatch: bool,
    /// Coordinates compared.
    pub coords: usize,
    /// Coordinates outside the tolerance.
    pub failures: usize,
}

impl Discrepancy {
    pub fn within(&self) -> bool {
        !self.shape_mismatch && self.failures == 0
    }
}

/// Compares two values coordinatewise after zero-elision.
pub fn compare(a: &Value, b: &Value, tol: Tolerance) -> Discrepancy {
    let mut d = Discrepancy::default();
    compare_rec(a, b, tol, &mut d);
    d
}

fn compare_rec(a: &Value, b: &Value, tol: Tolerance, d: &mut Discrepancy) {
    if let (Some(x), Some(y)) = (a.as_real(), b.as_real()) {
        d.coords += 1;
        let diff = (x - y).abs();
        let scale = x.abs().max(y.abs());
        d.max_abs = d.max_abs.max(diff);
        if scale > 0.0 {
            d.max_rel = d.max_rel.max(diff / scale);
        }
        if !tol.close(x, y) || x.is_nan() != y.is_nan() {
            d.failures += 1;
        }
        return;
    }
    match (a, b) {
        (Value::Int(x), Value::Int(y)) => {
            d.coords += 1;
            if x != y {
                d.failures += 1;
                d.max_abs = d.max_abs.max((x - y).abs() as f64);
            }
        }
        (Value::Bool(x), Value::Bool(y)) => {
            d.coords += 1;
            if x != y {
                d.failures += 1;
            }
        }
        _ => match (a.to_dict(), b.to_dict()) {
            (Some(x), Some(y)) => {
                let zero = zero_like(x.values().chain(y.values()).next());
                for (k, va) in x.iter() {
                    compare_rec(va, y.get(k).unwrap_or(&zero), tol, d);
                }
                for (k, vb) in y.iter() {
                    if !x.contains_key(k) {
                        compare_rec(&zero, vb, tol, d);
                    }
                }
            }
            (Some(x), None) | (None, Some(x)) if x.is_empty() => {
                // An empty dictionary against a non-real scalar.
                let other = if a.to_dict().is_some() { b } else { a };
                compare_rec(&zero_like(Some(other)), other, tol, d);
            }
            _ => d.shape_mismatch = true,
        },
    }
}

fn zero_like(v: Option<&Value>) -> Value {
    match v {
        Some(Value::Int(_)) => Value::Int(0),
        Some(Value::Bool(_)) => Value::Bool(false),
        _ => Value::empty(),
    }
}

/// Equality after zero-elision, within tolerance.
pub fn approx_eq(a: &Value, b: &Value, tol: Tolerance) -> bool {
    compare(a, b, tol).within()
}

/// Exact equality after zero-elision.
pub fn exact_eq(a: &Value, b: &Value) -> bool {
    approx_eq(a, b, Tolerance { abs: 0.0, rel: 0.0 })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(xs: &[(i64, f64)]) -> Value {
        Value::dict(xs.iter().map(|&(k, x)| (k, Value::Real(x))))
    }

    #[test]
    fn add_merges_pointwise() {
        let a = v(&[(0, 1.0)]);
        let b = v(&[(0, 2.0), (1, 3.0)]);
        assert_eq!(a.add(b).unwrap(), v(&[(0, 3.0), (1, 3.0)]));
    }

    #[test]
    fn add_elides_cancellation() {
        let r = v(&[(0, 1.0)]).add(v(&[(0, -1.0)])).unwrap();
        assert_eq!(r, Value::empty());
    }

    #[test]
    fn scalar_times_vector() {
        assert_eq!(Value::Real(2.0).mul(&v(&[(0, 3.0)])).unwrap(), v(&[(0, 6.0)]));
    }

    #[test]
    fn outer_product() {
        let r = v(&[(0, 1.0), (1, 2.0)]).mul(&v(&[(0, 3.0)])).unwrap();
        let expected = Value::dict([(0, v(&[(0, 3.0)])), (1, v(&[(0, 6.0)]))]);
        assert_eq!(r, expected);
    }

    #[test]
    fn zero_annihilates() {
        assert_eq!(Value::empty().mul(&v(&[(0, 3.0)])).unwrap(), Value::empty());
        assert_eq!(Value::Real(0.0).mul(&v(&[(0, 3.0)])).unwrap(), Value::empty());
    }

    #[test]
    fn singleton_of_zero_is_empty() {
        assert_eq!(Value::singleton(3, Value::Real(0.0)), Value::empty());
    }

    #[test]
    fn ranges_and_arrays_materialize() {
        let r = Value::Range { start: 1, end: 3 };
        assert_eq!(r.get(2), Some(Value::Int(2)));
        assert_eq!(r.get(3), None);
        let a = Value::real_array(alloc::vec![0.0, 2.0]);
        assert_eq!(a.normalized(), v(&[(1, 2.0)]));
    }

    #[test]
    fn comparison_treats_missing_as_zero() {
        let a = v(&[(0, 1.0)]);
        let b = Value::dict([(0, Value::Real(1.0)), (1, Value::Real(1e-9))]);
        assert!(approx_eq(&a, &b, Tolerance::default()));
        assert!(!exact_eq(&a, &b));
        assert!(approx_eq(&Value::empty(), &Value::Real(0.0), Tolerance::default()));
    }
}
