//! Storage formats and their composition with logical programs.
//!
//! Each format is a Physical SDQLite term that builds the logical tensor from
//! its backing arrays. Composing binds every declared tensor to its
//! definition, so equality saturation can fuse the definitions away.

use alloc::string::{String, ToString};
use alloc::vec::Vec;
use alloc::{format, vec};
use core::fmt;

use crate::interp::Value;
use crate::lang::subst::{free_vars, FreshNamer};
use crate::lang::{Expr, Name, Type, TypeEnv};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Format {
    /// Vector as `(len, row, val)` triplets.
    Coo { len: Name, row: Name, val: Name },
    Dense { len: Name, arr: Name },
    /// Rows `0..len`; row `i` occupies positions `pos(i)..pos(i+1)` of `idx`/`val`.
    Csr { len: Name, pos: Name, idx: Name, val: Name },
    /// Columns `0..len`, laid out like CSR.
    Csc { len: Name, pos: Name, idx: Name, val: Name },
    DenseRowMajor { rows: Name, cols: Name, arr: Name },
    DenseColMajor { rows: Name, cols: Name, arr: Name },
    /// Nested dictionaries passed as they are.
    Dict,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StorageSpec {
    pub tensor: Name,
    pub format: Format,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StorageError {
    #[error("no storage format given for tensor `{0}`")]
    MissingSpec(Name),
    #[error("`{tensor}` has type `{ty}` but format `{format}` stores a tensor of order {order}")]
    OrderMismatch {
        tensor: Name,
        ty: Type,
        format: &'static str,
        order: usize,
    },
    #[error("storage format given for unknown tensor `{0}`")]
    UnknownTensor(Name),
    #[error("format declared twice for `{0}`")]
    Duplicate(Name),
    #[error("backing array `{0}` clashes with an existing name")]
    NameClash(Name),
    #[error("bad storage spec `{spec}`: {msg}")]
    Syntax { spec: String, msg: String },
    #[error("value of `{0}` does not match the shape of its format")]
    Shape(Name),
    #[error("key {key} of `{tensor}` lies outside 0..{dim}")]
    OutOfBounds { tensor: Name, key: i64, dim: usize },
}

fn int_array() -> Type {
    Type::dict(Type::DenseInt, Type::Int)
}

fn real_array() -> Type {
    Type::dict(Type::DenseInt, Type::Real)
}

impl Format {
    pub fn name(&self) -> &'static str {
        match self {
            Format::Coo { .. } => "coo",
            Format::Dense { .. } => "dense",
            Format::Csr { .. } => "csr",
            Format::Csc { .. } => "csc",
            Format::DenseRowMajor { .. } => "dense_row",
            Format::DenseColMajor { .. } => "dense_col",
            Format::Dict => "dict",
        }
    }

    /// Order of the stored tensor; `None` for nested dictionaries of any order.
    pub fn order(&self) -> Option<usize> {
        match self {
            Format::Coo { .. } | Format::Dense { .. } => Some(1),
            Format::Dict => None,
            _ => Some(2),
        }
    }

    /// The format with its conventional backing-array names for `tensor`.
    pub fn default_for(kind: &str, tensor: &str) -> Option<Format> {
        let n = |suffix: &str| format!("{}_{}", tensor, suffix);
        Some(match kind {
            "coo" => Format::Coo {
                len: n("len"),
                row: n("VRow"),
                val: n("VVal"),
            },
            "dense" => Format::Dense {
                len: n("len"),
                arr: n("V"),
            },
            "csr" => Format::Csr {
                len: n("len"),
                pos: n("VRow"),
                idx: n("VCol"),
                val: n("VVal"),
            },
            "csc" => Format::Csc {
                len: n("len"),
                pos: n("CPos"),
                idx: n("CIdx"),
                val: n("CVal"),
            },
            "dense_row" | "row_major" => Format::DenseRowMajor {
                rows: n("rows"),
                cols: n("cols"),
                arr: n("M"),
            },
            "dense_col" | "col_major" => Format::DenseColMajor {
                rows: n("rows"),
                cols: n("cols"),
                arr: n("M"),
            },
            "dict" => Format::Dict,
            _ => return None,
        })
    }

    /// Field names accepted in the long spec syntax, in signature order.
    fn fields(&self) -> Vec<(&'static str, &Name)> {
        match self {
            Format::Coo { len, row, val } => vec![("row", row), ("val", val), ("len", len)],
            Format::Dense { len, arr } => vec![("arr", arr), ("len", len)],
            Format::Csr { len, pos, idx, val } | Format::Csc { len, pos, idx, val } => {
                vec![("pos", pos), ("idx", idx), ("val", val), ("len", len)]
            }
            Format::DenseRowMajor { rows, cols, arr } | Format::DenseColMajor { rows, cols, arr } => {
                vec![("arr", arr), ("rows", rows), ("cols", cols)]
            }
            Format::Dict => vec![],
        }
    }

    fn field_mut(&mut self, field: &str) -> Option<&mut Name> {
        match (self, field) {
            (Format::Coo { len, .. }, "len")
            | (Format::Dense { len, .. }, "len")
            | (Format::Csr { len, .. }, "len")
            | (Format::Csc { len, .. }, "len") => Some(len),
            (Format::Coo { row, .. }, "row") => Some(row),
            (Format::Coo { val, .. }, "val")
            | (Format::Csr { val, .. }, "val")
            | (Format::Csc { val, .. }, "val") => Some(val),
            (Format::Dense { arr, .. }, "arr" | "V")
            | (Format::DenseRowMajor { arr, .. }, "arr" | "M")
            | (Format::DenseColMajor { arr, .. }, "arr" | "M") => Some(arr),
            (Format::Csr { pos, .. }, "pos") | (Format::Csc { pos, .. }, "pos") => Some(pos),
            (Format::Csr { idx, .. }, "idx") | (Format::Csc { idx, .. }, "idx") => Some(idx),
            (Format::DenseRowMajor { rows, .. }, "rows") | (Format::DenseColMajor { rows, .. }, "rows") => {
                Some(rows)
            }
            (Format::DenseRowMajor { cols, .. }, "cols") | (Format::DenseColMajor { cols, .. }, "cols") => {
                Some(cols)
            }
            _ => None,
        }
    }
}

impl StorageSpec {
    pub fn new(tensor: impl Into<Name>, kind: &str) -> Option<Self> {
        let tensor = tensor.into();
        let format = Format::default_for(kind, &tensor)?;
        Some(StorageSpec { tensor, format })
    }

    /// True when every key of the dimension is stored.
    pub fn is_dense(&self) -> bool {
        matches!(
            self.format,
            Format::Dense { .. } | Format::DenseRowMajor { .. } | Format::DenseColMajor { .. }
        )
    }

    /// Backing arrays and lengths with their types, in signature order.
    pub fn inputs(&self) -> Vec<(Name, Type)> {
        self.format
            .fields()
            .into_iter()
            .map(|(f, name)| {
                let ty = match f {
                    "len" | "rows" | "cols" => Type::Int,
                    "row" | "pos" | "idx" => int_array(),
                    _ => real_array(),
                };
                (name.clone(), ty)
            })
            .collect()
    }

    /// The Physical SDQLite term building the tensor, with binders drawn from `namer`.
    pub fn definition(&self, namer: &mut FreshNamer) -> Option<Expr> {
        let v = |x: &Name| Expr::Var(x.clone());
        let at = |a: &Name, i: Expr| Expr::lookup(v(a), i);
        let upto = |n: &Name| Expr::range(Expr::Int(0), v(n));
        Some(match &self.format {
            Format::Dict => return None,
            Format::Coo { len, row, val } => {
                let i = namer.variant("i");
                Expr::sum(
                    "_",
                    i.clone(),
                    upto(len),
                    Expr::singleton(Expr::unique(at(row, v(&i))), at(val, v(&i))),
                )
            }
            Format::Dense { len, arr } => {
                let i = namer.variant("i");
                Expr::sum("_", i.clone(), upto(len), Expr::singleton(Expr::unique(v(&i)), at(arr, v(&i))))
            }
            Format::Csr { len, pos, idx, val } | Format::Csc { len, pos, idx, val } => {
                let (i, p, j) = (namer.variant("i"), namer.variant("p"), namer.variant("j"));
                let slice = Expr::sub_array(
                    v(idx),
                    at(pos, v(&i)),
                    at(pos, Expr::add(v(&i), Expr::Int(1))),
                );
                let leaf = at(val, v(&p));
                match self.format {
                    Format::Csr { .. } => Expr::sum(
                        "_",
                        i.clone(),
                        upto(len),
                        Expr::singleton(
                            Expr::unique(v(&i)),
                            Expr::sum(p, j.clone(), slice, Expr::singleton(Expr::unique(v(&j)), leaf)),
                        ),
                    ),
                    // Here `i` walks columns and `j` rows.
                    _ => Expr::sum(
                        "_",
                        i.clone(),
                        upto(len),
                        Expr::sum(
                            p,
                            j.clone(),
                            slice,
                            Expr::singleton(v(&j), Expr::singleton(Expr::unique(v(&i)), leaf)),
                        ),
                    ),
                }
            }
            Format::DenseRowMajor { rows, cols, arr } | Format::DenseColMajor { rows, cols, arr } => {
                let (i, j) = (namer.variant("i"), namer.variant("j"));
                let offset = match self.format {
                    Format::DenseRowMajor { .. } => Expr::add(Expr::mul(v(&i), v(cols)), v(&j)),
                    _ => Expr::add(Expr::mul(v(&j), v(rows)), v(&i)),
                };
                Expr::sum(
                    "_",
                    i.clone(),
                    upto(rows),
                    Expr::singleton(
                        Expr::unique(v(&i)),
                        Expr::sum(
                            "_",
                            j.clone(),
                            upto(cols),
                            Expr::singleton(Expr::unique(v(&j)), at(arr, offset)),
                        ),
                    ),
                )
            }
        })
    }

    /// Backing arrays holding `v` in this format, with their types. `shape`
    /// gives the extent of each dimension.
    pub fn materialize(&self, v: &Value, shape: &[usize]) -> Result<Vec<(Name, Type, Value)>, StorageError> {
        let bad = || StorageError::Shape(self.tensor.clone());
        let order = self.format.order().unwrap_or(shape.len());
        if shape.len() != order {
            return Err(bad());
        }
        let mut cells: Vec<(Vec<usize>, f64)> = Vec::new();
        collect_cells(v, &mut Vec::new(), &mut cells).ok_or_else(bad)?;
        for (path, _) in &cells {
            if path.len() != order {
                return Err(bad());
            }
            for (&k, &dim) in path.iter().zip(shape) {
                if k >= dim {
                    return Err(StorageError::OutOfBounds {
                        tensor: self.tensor.clone(),
                        key: k as i64,
                        dim,
                    });
                }
            }
        }
        let int = |n: usize| Value::Int(n as i64);
        let ints = |xs: Vec<usize>| Value::int_array(xs.into_iter().map(|x| x as i64).collect());
        let mut out: Vec<(Name, Value)> = Vec::new();
        match &self.format {
            Format::Dict => {
                return Ok(vec![(self.tensor.clone(), Type::tensor(order), v.clone())]);
            }
            Format::Coo { len, row, val } => {
                out.push((row.clone(), ints(cells.iter().map(|c| c.0[0]).collect())));
                out.push((val.clone(), Value::real_array(cells.iter().map(|c| c.1).collect())));
                out.push((len.clone(), int(cells.len())));
            }
            Format::Dense { len, arr } => {
                let mut a = vec![0.0; shape[0]];
                for (p, x) in &cells {
                    a[p[0]] = *x;
                }
                out.push((arr.clone(), Value::real_array(a)));
                out.push((len.clone(), int(shape[0])));
            }
            Format::Csr { len, pos, idx, val } | Format::Csc { len, pos, idx, val } => {
                let (outer, inner) = match self.format {
                    Format::Csr { .. } => (0, 1),
                    _ => (1, 0),
                };
                cells.sort_by_key(|(p, _)| (p[outer], p[inner]));
                let mut ps = vec![0usize; shape[outer] + 1];
                for (p, _) in &cells {
                    ps[p[outer] + 1] += 1;
                }
                for i in 0..shape[outer] {
                    ps[i + 1] += ps[i];
                }
                out.push((pos.clone(), ints(ps)));
                out.push((idx.clone(), ints(cells.iter().map(|c| c.0[inner]).collect())));
                out.push((val.clone(), Value::real_array(cells.iter().map(|c| c.1).collect())));
                out.push((len.clone(), int(shape[outer])));
            }
            Format::DenseRowMajor { rows, cols, arr } | Format::DenseColMajor { rows, cols, arr } => {
                let mut a = vec![0.0; shape[0] * shape[1]];
                let row_major = matches!(self.format, Format::DenseRowMajor { .. });
                for (p, x) in &cells {
                    let at = if row_major { p[0] * shape[1] + p[1] } else { p[1] * shape[0] + p[0] };
                    a[at] = *x;
                }
                out.push((arr.clone(), Value::real_array(a)));
                out.push((rows.clone(), int(shape[0])));
                out.push((cols.clone(), int(shape[1])));
            }
        }
        let types = self.inputs();
        Ok(out
            .into_iter()
            .map(|(n, v)| {
                let t = types.iter().find(|(m, _)| *m == n).map(|(_, t)| t.clone()).unwrap();
                (n, t, v)
            })
            .collect())
    }

    /// Parses `V2 = coo(len=V2_len, row=V2_row, val=V2_val)` or `V2=coo`.
    pub fn parse(src: &str) -> Result<StorageSpec, StorageError> {
        let err = |msg: &str| StorageError::Syntax {
            spec: src.to_string(),
            msg: msg.to_string(),
        };
        let (tensor, rhs) = src.split_once('=').ok_or_else(|| err("expected `name = format`"))?;
        let tensor = tensor.trim();
        if tensor.is_empty() || !tensor.chars().all(|c| c.is_alphanumeric() || c == '_') {
            return Err(err("bad tensor name"));
        }
        let rhs = rhs.trim();
        let (kind, args) = match rhs.split_once('(') {
            Some((k, rest)) => (
                k.trim(),
                Some(rest.strip_suffix(')').ok_or_else(|| err("missing `)`"))?),
            ),
            None => (rhs, None),
        };
        let mut format = Format::default_for(kind, tensor).ok_or_else(|| err("unknown format"))?;
        for arg in args.into_iter().flat_map(|a| a.split(',')).map(str::trim).filter(|a| !a.is_empty()) {
            let (field, name) = arg.split_once('=').ok_or_else(|| err("expected `field=name`"))?;
            let slot = format.field_mut(field.trim()).ok_or_else(|| err("unknown field"))?;
            *slot = name.trim().to_string();
        }
        Ok(StorageSpec {
            tensor: tensor.into(),
            format,
        })
    }

    /// Parses a list separated by `;` or by commas outside parentheses.
    pub fn parse_list(src: &str) -> Result<Vec<StorageSpec>, StorageError> {
        let mut out = Vec::new();
        let mut depth = 0usize;
        let mut start = 0;
        for (i, ch) in src.char_indices() {
            match ch {
                '(' => depth += 1,
                ')' => depth = depth.saturating_sub(1),
                ',' | ';' if depth == 0 => {
                    push_spec(&src[start..i], &mut out)?;
                    start = i + 1;
                }
                _ => {}
            }
        }
        push_spec(&src[start..], &mut out)?;
        Ok(out)
    }
}

/// Nonzero cells of a tensor value in key order; `None` on a non-tensor.
fn collect_cells(v: &Value, path: &mut Vec<usize>, out: &mut Vec<(Vec<usize>, f64)>) -> Option<()> {
    match v {
        Value::Real(x) => {
            if *x != 0.0 {
                out.push((path.clone(), *x));
            }
            Some(())
        }
        Value::Dict(m) => {
            for (k, x) in m.iter() {
                path.push(usize::try_from(*k).ok()?);
                collect_cells(x, path, out)?;
                path.pop();
            }
            Some(())
        }
        _ => None,
    }
}

fn push_spec(s: &str, out: &mut Vec<StorageSpec>) -> Result<(), StorageError> {
    if !s.trim().is_empty() {
        out.push(StorageSpec::parse(s.trim())?);
    }
    Ok(())
}

impl fmt::Display for StorageSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.tensor, self.format.name())?;
        let fields = self.format.fields();
        if !fields.is_empty() {
            let args: Vec<String> = fields.iter().map(|(k, v)| format!("{}={}", k, v)).collect();
            write!(f, "({})", args.join(", "))?;
        }
        Ok(())
    }
}

/// A composed program and the types of its physical inputs.
#[derive(Debug, Clone)]
pub struct Composed {
    pub expr: Expr,
    pub env: TypeEnv,
}

/// Binds each declared tensor to its format definition.
///
/// Every free tensor of `e` needs a spec. The resulting environment keeps the
/// scalars and `dict`-format tensors and adds the backing arrays.
pub fn compose_storage(env: &TypeEnv, e: &Expr, specs: &[StorageSpec]) -> Result<Composed, StorageError> {
    let free = free_vars(e);
    for x in &free {
        let ty = env.get(x).ok_or_else(|| StorageError::UnknownTensor(x.clone()))?;
        if ty.order().is_some_and(|n| n > 0) && !specs.iter().any(|s| &s.tensor == x) {
            return Err(StorageError::MissingSpec(x.clone()));
        }
    }
    let mut namer = FreshNamer::avoiding(e);
    let mut out_env = TypeEnv::new();
    let mut seen: Vec<&Name> = Vec::new();
    for spec in specs {
        if seen.contains(&&spec.tensor) {
            return Err(StorageError::Duplicate(spec.tensor.clone()));
        }
        seen.push(&spec.tensor);
        let ty = env
            .get(&spec.tensor)
            .ok_or_else(|| StorageError::UnknownTensor(spec.tensor.clone()))?;
        if let Some(order) = spec.format.order() {
            if ty.order() != Some(order) {
                return Err(StorageError::OrderMismatch {
                    tensor: spec.tensor.clone(),
                    ty: ty.clone(),
                    format: spec.format.name(),
                    order,
                });
            }
        }
        for (name, t) in spec.inputs() {
            if env.get(&name).is_some() || out_env.get(&name).is_some() {
                return Err(StorageError::NameClash(name));
            }
            namer.reserve(&name);
            out_env.push(name, t);
        }
    }
    for (x, t) in env.iter() {
        let composed = specs.iter().any(|s| &s.tensor == x && s.format != Format::Dict);
        if !composed {
            out_env.push(x.clone(), t.clone());
        }
    }
    let mut expr = e.clone();
    for spec in specs.iter().rev() {
        if let Some(def) = spec.definition(&mut namer) {
            expr = Expr::let_in(spec.tensor.clone(), def, expr);
        }
    }
    Ok(Composed { expr, env: out_env })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::subst::alpha_eq;
    use crate::lang::{parse, type_of, Mode};

    fn p(s: &str) -> Expr {
        parse(s, Mode::Physical).unwrap()
    }

    #[test]
    fn parses_both_syntaxes() {
        let s = StorageSpec::parse("V2 = coo(len=V2_len, row=V2_row, val=V2_val)").unwrap();
        assert_eq!(
            s.format,
            Format::Coo {
                len: "V2_len".into(),
                row: "V2_row".into(),
                val: "V2_val".into()
            }
        );
        let l = StorageSpec::parse_list("V1=dense,V2=coo").unwrap();
        assert_eq!(l.len(), 2);
        assert_eq!(
            l[0].format,
            Format::Dense {
                len: "V1_len".into(),
                arr: "V1_V".into()
            }
        );
        let l = StorageSpec::parse_list("A = csr(len=A_len, pos=A_VRow, idx=A_VCol, val=A_VVal); X = dense(len=X_len, arr=X_V)")
            .unwrap();
        assert_eq!(l[1].to_string(), "X = dense(arr=X_V, len=X_len)");
        assert!(StorageSpec::parse("V = blocked").is_err());
        assert!(StorageSpec::parse("V = coo(width=3)").is_err());
    }

    #[test]
    fn dot_product_composition() {
        let env: TypeEnv = [("V1", Type::tensor(1)), ("V2", Type::tensor(1))].into_iter().collect();
        let specs = StorageSpec::parse_list(
            "V1 = dense(len=V1_len, arr=V1_V); V2 = coo(len=V2_len, row=V2_row, val=V2_val)",
        )
        .unwrap();
        let c = compose_storage(&env, &p("sum(<i, a> in V2) { i -> a }"), &specs).unwrap();
        let expected = p(
            "let V1 = sum(<_, i> in (0:V1_len)) { unique(i) -> V1_V(i) } in
             let V2 = sum(<_, i> in (0:V2_len)) { unique(V2_row(i)) -> V2_val(i) } in
             sum(<i, a> in V2) { i -> a }",
        );
        assert!(alpha_eq(&c.expr, &expected), "{}", c.expr);
        assert_eq!(type_of(&c.env, &c.expr).map(|t| t.logical()), Ok(Type::tensor(1)));
    }

    #[test]
    fn csr_definition() {
        let env: TypeEnv = [("A", Type::tensor(2))].into_iter().collect();
        let specs = [StorageSpec::new("A", "csr").unwrap()];
        let c = compose_storage(&env, &p("A"), &specs).unwrap();
        let expected = p(
            "let A = sum(<_, i> in (0:A_len)) { unique(i) ->
                 sum(<p, j> in A_VCol(A_VRow(i):A_VRow(i + 1))) { unique(j) -> A_VVal(p) } } in A",
        );
        assert!(alpha_eq(&c.expr, &expected), "{}", c.expr);
        assert_eq!(type_of(&c.env, &c.expr).map(|t| t.logical()), Ok(Type::tensor(2)));
    }

    #[test]
    fn materialized_arrays_rebuild_the_tensor() {
        use crate::interp::{eval, exact_eq, Env};
        let m = Value::dict([
            (0, Value::dict([(1, Value::Real(2.0)), (3, Value::Real(-1.0))])),
            (2, Value::dict([(0, Value::Real(5.0))])),
        ]);
        let env: TypeEnv = [("A", Type::tensor(2))].into_iter().collect();
        for kind in ["csr", "csc", "dense_row", "dense_col", "dict"] {
            let spec = StorageSpec::new("A", kind).unwrap();
            let c = compose_storage(&env, &p("A"), core::slice::from_ref(&spec)).unwrap();
            let mut inputs = Env::new();
            for (n, t, v) in spec.materialize(&m, &[3, 4]).unwrap() {
                inputs.bind(n, t, v);
            }
            let r = eval(&inputs, &c.expr.strip_unique()).unwrap();
            assert!(exact_eq(&r, &m), "{}: {:?}", kind, r);
        }
        let v = Value::vector(&[0.0, 1.5, 0.0, 2.0]);
        let env: TypeEnv = [("V", Type::tensor(1))].into_iter().collect();
        for kind in ["coo", "dense"] {
            let spec = StorageSpec::new("V", kind).unwrap();
            let c = compose_storage(&env, &p("V"), core::slice::from_ref(&spec)).unwrap();
            let mut inputs = Env::new();
            for (n, t, x) in spec.materialize(&v, &[4]).unwrap() {
                inputs.bind(n, t, x);
            }
            assert!(exact_eq(&eval(&inputs, &c.expr).unwrap(), &v), "{}", kind);
        }
        let spec = StorageSpec::new("V", "dense").unwrap();
        assert!(matches!(spec.materialize(&v, &[2]), Err(StorageError::OutOfBounds { .. })));
    }

    #[test]
    fn errors() {
        let env: TypeEnv = [("A", Type::tensor(2)), ("s", Type::Real)].into_iter().collect();
        let e = p("A * s");
        assert_eq!(compose_storage(&env, &e, &[]).unwrap_err(), StorageError::MissingSpec("A".into()));
        let bad = [StorageSpec::new("A", "coo").unwrap()];
        assert!(matches!(compose_storage(&env, &e, &bad), Err(StorageError::OrderMismatch { .. })));
        let dict = [StorageSpec::new("A", "dict").unwrap()];
        assert_eq!(compose_storage(&env, &e, &dict).unwrap().expr, e);
        let none: TypeEnv = [("s", Type::Real)].into_iter().collect();
        assert_eq!(compose_storage(&none, &p("s * s"), &[]).unwrap().expr, p("s * s"));
    }
}
