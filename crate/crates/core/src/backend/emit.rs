//! C++ emission for lowered kernels.
//!
//! `int` and `real` become `size_t` and `double`, dictionaries become nested
//! `dict_type<size_t, ...>` and dense-keyed arrays become `arr_type<...>`, as
//! declared by the runtime header. Output depends only on the IR and the
//! signature, so identical inputs give byte-identical text.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::Write;

use super::imp::{IExpr, ImpStmt, KernelSignature, LValue, ParamKind, ScalarKind};
use crate::lang::Name;

/// File name of the runtime header generated code includes.
pub const RUNTIME_HEADER: &str = "sdqlite_runtime.hpp";

/// Source of the runtime header.
pub const RUNTIME_HEADER_SOURCE: &str = include_str!("../../runtime/sdqlite_runtime.hpp");

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EmitOptions {
    /// Also emit a `main` reading inputs from an SDG1 file.
    pub main: bool,
}

const KEYWORDS: &[&str] = &[
    "auto", "bool", "break", "case", "char", "class", "const", "continue", "default", "delete", "do", "double",
    "else", "enum", "extern", "false", "float", "for", "goto", "if", "inline", "int", "long", "new", "operator",
    "private", "public", "register", "return", "short", "signed", "sizeof", "static", "struct", "switch",
    "template", "this", "throw", "true", "try", "typedef", "union", "unsigned", "using", "virtual", "void",
    "volatile", "while", "main", "result_t", "runtime", "sdg1", "std",
];

/// C++ identifier for a source name.
pub fn mangle(x: &str) -> String {
    let mut s = x.replace('\'', "_d");
    if KEYWORDS.contains(&s.as_str()) {
        s.push('_');
    }
    s
}

fn scalar_type(k: ScalarKind) -> &'static str {
    match k {
        ScalarKind::Real => "double",
        ScalarKind::Int => "size_t",
        ScalarKind::Bool => "bool",
    }
}

/// `dict_type<size_t, ...>` nested `depth` levels over `double`.
pub fn dict_type(depth: usize) -> String {
    (0..depth).fold("double".to_string(), |acc, _| format!("dict_type<size_t, {}>", acc))
}

fn param_decl(name: &str, kind: ParamKind) -> String {
    let x = mangle(name);
    match kind {
        ParamKind::Scalar(ScalarKind::Real) | ParamKind::ResultScalar(ScalarKind::Real) => format!("double& {}", x),
        ParamKind::Scalar(k) => format!("{} {}", scalar_type(k), x),
        ParamKind::ResultScalar(k) => format!("{}& {}", scalar_type(k), x),
        ParamKind::IndexArray => format!("const arr_type<size_t>& {}", x),
        ParamKind::ValueArray => format!("const arr_type<double>& {}", x),
        ParamKind::Dict(d) => format!("const {}& {}", dict_type(d), x),
        ParamKind::ResultDict(d) => format!("{}& {}", dict_type(d), x),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarKind {
    Scalar,
    Array,
    Dict(usize),
}

struct Emitter {
    out: String,
    vars: BTreeMap<Name, VarKind>,
}

/// The kernel as one C++ function writing into its last parameter.
pub fn emit_kernel(body: &ImpStmt, sig: &KernelSignature) -> String {
    let mut e = Emitter {
        out: String::new(),
        vars: BTreeMap::new(),
    };
    for p in &sig.params {
        let k = match p.kind {
            ParamKind::IndexArray | ParamKind::ValueArray => VarKind::Array,
            ParamKind::Dict(d) | ParamKind::ResultDict(d) => VarKind::Dict(d),
            _ => VarKind::Scalar,
        };
        e.vars.insert(p.name.clone(), k);
    }
    let params: Vec<String> = sig.params.iter().map(|p| param_decl(&p.name, p.kind)).collect();
    let _ = writeln!(e.out, "void {}({}) {{", mangle(&sig.name), params.join(", "));
    e.stmt(body, 1);
    e.out.push_str("}\n");
    e.out
}

/// A `main` that loads every input from the SDG1 file named by its argument,
/// runs the kernel and prints the result as a value literal.
pub fn emit_main(sig: &KernelSignature) -> String {
    let mut s = String::new();
    s.push_str("int main(int argc, char** argv) {\n");
    s.push_str("    if (argc != 2) {\n");
    s.push_str("        std::fprintf(stderr, \"usage: %s INPUT.sdg1\\n\", argv[0]);\n");
    s.push_str("        return 1;\n");
    s.push_str("    }\n");
    s.push_str("    try {\n");
    s.push_str("        sdg1::File in = sdg1::load(argv[1]);\n");
    let mut args = Vec::new();
    for p in sig.inputs() {
        let x = mangle(&p.name);
        let load = match p.kind {
            ParamKind::Scalar(ScalarKind::Real) => format!("double {} = sdg1::real(in, \"{}\")", x, p.name),
            ParamKind::Scalar(ScalarKind::Int) => format!("size_t {} = sdg1::index(in, \"{}\")", x, p.name),
            ParamKind::Scalar(ScalarKind::Bool) => format!("bool {} = sdg1::index(in, \"{}\") != 0", x, p.name),
            ParamKind::IndexArray => format!("arr_type<size_t> {} = sdg1::index_array(in, \"{}\")", x, p.name),
            ParamKind::ValueArray => format!("arr_type<double> {} = sdg1::value_array(in, \"{}\")", x, p.name),
            ParamKind::Dict(d) => format!("{0} {1} = sdg1::dict<{0}>(in, \"{2}\")", dict_type(d), x, p.name),
            ParamKind::ResultScalar(_) | ParamKind::ResultDict(_) => unreachable!("inputs exclude the result"),
        };
        let _ = writeln!(s, "        {};", load);
        args.push(x);
    }
    let r = sig.result();
    let rt = match r.kind {
        ParamKind::ResultScalar(k) => format!("{} {} = 0", scalar_type(k), mangle(&r.name)),
        ParamKind::ResultDict(d) => format!("{} {}", dict_type(d), mangle(&r.name)),
        _ => unreachable!("the last parameter is the result"),
    };
    let _ = writeln!(s, "        {};", rt);
    args.push(mangle(&r.name));
    let _ = writeln!(s, "        {}({});", mangle(&sig.name), args.join(", "));
    let _ = writeln!(s, "        std::printf(\"%s\\n\", runtime::show({}).c_str());", mangle(&r.name));
    s.push_str("    } catch (const std::exception& e) {\n");
    s.push_str("        std::fprintf(stderr, \"%s\\n\", e.what());\n");
    s.push_str("        return 1;\n");
    s.push_str("    }\n");
    s.push_str("    return 0;\n");
    s.push_str("}\n");
    s
}

/// A complete translation unit: the runtime include, the kernel and optionally `main`.
pub fn emit_file(body: &ImpStmt, sig: &KernelSignature, opts: EmitOptions) -> String {
    let mut s = format!("#include \"{}\"\n\n", RUNTIME_HEADER);
    s.push_str(&emit_kernel(body, sig));
    if opts.main {
        s.push('\n');
        s.push_str(&emit_main(sig));
    }
    s
}

impl Emitter {
    fn line(&mut self, depth: usize, text: &str) {
        for _ in 0..depth {
            self.out.push_str("    ");
        }
        self.out.push_str(text);
        self.out.push('\n');
    }

    fn block(&mut self, body: &[ImpStmt], depth: usize) {
        for s in body {
            self.stmt(s, depth);
        }
    }

    fn stmt(&mut self, s: &ImpStmt, depth: usize) {
        match s {
            ImpStmt::Seq(body) => self.block(body, depth),
            ImpStmt::ForRange { idx, lo, hi, body } => {
                self.vars.insert(idx.clone(), VarKind::Scalar);
                let i = mangle(idx);
                let head = format!("for(size_t {0} = {1}; {0} < {2}; {0}++) {{", i, self.expr(lo), self.expr(hi));
                self.line(depth, &head);
                self.block(body, depth + 1);
                self.line(depth, "}");
            }
            ImpStmt::ForEach {
                key, val, dict, body, ..
            } => {
                let d = self.expr(dict);
                let vk = match self.kind(dict) {
                    VarKind::Dict(n) if n > 1 => VarKind::Dict(n - 1),
                    _ => VarKind::Scalar,
                };
                let (uses_k, uses_v) = (uses(body, key), uses(body, val));
                self.vars.insert(key.clone(), VarKind::Scalar);
                self.vars.insert(val.clone(), vk);
                let (k, v) = (mangle(key), mangle(val));
                if self.kind(dict) == VarKind::Array {
                    self.line(depth, &format!("for(size_t {0} = 0; {0} < {1}.size(); {0}++) {{", k, d));
                    if uses_v {
                        self.line(depth + 1, &format!("const auto& {} = {}[{}];", v, d, k));
                    }
                } else if uses_k {
                    let v = if uses_v { v } else { "_".to_string() + &k };
                    self.line(depth, &format!("for(const auto& [{}, {}] : {}) {{", k, v, d));
                    if !uses_v {
                        self.line(depth + 1, &format!("(void){};", v));
                    }
                } else {
                    let entry = format!("{}_entry", v);
                    self.line(depth, &format!("for(const auto& {} : {}) {{", entry, d));
                    if uses_v {
                        self.line(depth + 1, &format!("const auto& {} = {}.second;", v, entry));
                    } else {
                        self.line(depth + 1, &format!("(void){};", entry));
                    }
                }
                self.block(body, depth + 1);
                self.line(depth, "}");
            }
            ImpStmt::DeclDict { name, depth: d, .. } => {
                self.vars.insert(name.clone(), VarKind::Dict(*d));
                self.line(depth, &format!("{} {};", dict_type(*d), mangle(name)));
            }
            ImpStmt::DeclScalar { name, kind, init } => {
                let init = strip_parens(&self.expr(init)).to_string();
                self.vars.insert(name.clone(), VarKind::Scalar);
                self.line(depth, &format!("{} {} = {};", scalar_type(*kind), mangle(name), init));
            }
            ImpStmt::AccumAdd { target, value } => {
                let t = self.lvalue(target);
                let v = strip_parens(&self.expr(value)).to_string();
                if self.kind(value) == VarKind::Scalar {
                    self.line(depth, &format!("{} += {};", t, v));
                } else {
                    self.line(depth, &format!("runtime::add_to({}, {});", t, v));
                }
            }
            ImpStmt::If { cond, body } => {
                let c = self.expr(cond);
                self.line(depth, &format!("if ({}) {{", strip_parens(&c)));
                self.block(body, depth + 1);
                self.line(depth, "}");
            }
            // The destination is the caller's object, so there is nothing to return.
            ImpStmt::Return(_) => {}
        }
    }

    fn kind(&self, e: &IExpr) -> VarKind {
        match e {
            IExpr::Var(x) => self.vars.get(x).copied().unwrap_or(VarKind::Scalar),
            IExpr::Index { depth: 0, .. } => VarKind::Scalar,
            IExpr::Index { depth, .. } => VarKind::Dict(*depth),
            _ => VarKind::Scalar,
        }
    }

    fn lvalue(&self, l: &LValue) -> String {
        let mut s = mangle(&l.name);
        for k in &l.path {
            let _ = write!(s, "[{}]", self.expr(k));
        }
        s
    }

    fn expr(&self, e: &IExpr) -> String {
        match e {
            IExpr::Var(x) => mangle(x),
            IExpr::Real(r) => format!("{:?}", r),
            IExpr::Int(n) => n.to_string(),
            IExpr::Bool(b) => b.to_string(),
            IExpr::Index { base, key, .. } => {
                let (b, k) = (self.expr(base), strip_parens(&self.expr(key)).to_string());
                if self.kind(base) == VarKind::Array {
                    format!("{}[{}]", b, k)
                } else {
                    format!("runtime::get({}, {})", b, k)
                }
            }
            IExpr::Add(a, b) => format!("({} + {})", self.expr(a), self.expr(b)),
            IExpr::Mul(a, b) => format!("({} * {})", self.expr(a), self.expr(b)),
            IExpr::Eq(a, b) => format!("({} == {})", self.expr(a), self.expr(b)),
            IExpr::Not(a) => format!("!{}", self.expr(a)),
            IExpr::Unary(op, a) => {
                let f = match op.as_str() {
                    "sin" | "cos" | "exp" | "log" => format!("std::{}", op),
                    other => format!("runtime::{}", other),
                };
                format!("{}({})", f, strip_parens(&self.expr(a)))
            }
            IExpr::Select(c, v) => format!("({} ? {} : 0.0)", self.expr(c), self.expr(v)),
        }
    }
}

/// Drops one pair of outer parentheses when they enclose the whole text.
fn strip_parens(s: &str) -> &str {
    let Some(inner) = s.strip_prefix('(').and_then(|r| r.strip_suffix(')')) else {
        return s;
    };
    let mut depth = 0i32;
    for c in inner.chars() {
        match c {
            '(' => depth += 1,
            ')' => {
                depth -= 1;
                if depth < 0 {
                    return s;
                }
            }
            _ => {}
        }
    }
    inner
}

fn expr_uses(e: &IExpr, x: &str) -> bool {
    match e {
        IExpr::Var(y) => y == x,
        IExpr::Real(_) | IExpr::Int(_) | IExpr::Bool(_) => false,
        IExpr::Index { base, key, .. } => expr_uses(base, x) || expr_uses(key, x),
        IExpr::Add(a, b) | IExpr::Mul(a, b) | IExpr::Eq(a, b) | IExpr::Select(a, b) => {
            expr_uses(a, x) || expr_uses(b, x)
        }
        IExpr::Not(a) | IExpr::Unary(_, a) => expr_uses(a, x),
    }
}

/// True when any statement in `body` reads `x`.
fn uses(body: &[ImpStmt], x: &str) -> bool {
    let mut found = false;
    for s in body {
        s.walk(&mut |s, _| {
            found |= match s {
                ImpStmt::ForRange { lo, hi, .. } => expr_uses(lo, x) || expr_uses(hi, x),
                ImpStmt::ForEach { dict, .. } => expr_uses(dict, x),
                ImpStmt::DeclScalar { init, .. } => expr_uses(init, x),
                ImpStmt::AccumAdd { target, value } => {
                    target.name == x || target.path.iter().any(|k| expr_uses(k, x)) || expr_uses(value, x)
                }
                ImpStmt::If { cond, .. } => expr_uses(cond, x),
                ImpStmt::Return(y) => y == x,
                _ => false,
            }
        });
    }
    found
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mangles_primes_and_keywords() {
        assert_eq!(mangle("V1'"), "V1_d");
        assert_eq!(mangle("for"), "for_");
        assert_eq!(dict_type(2), "dict_type<size_t, dict_type<size_t, double>>");
    }

    #[test]
    fn strips_only_enclosing_parentheses() {
        assert_eq!(strip_parens("(a + b)"), "a + b");
        assert_eq!(strip_parens("(a) + (b)"), "(a) + (b)");
    }
}
