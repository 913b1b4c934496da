//! Printer producing text that [`parse`](super::parse::parse) reads back to
//! the same tree.

use alloc::string::String;
use core::fmt::{self, Write};

use super::ast::Expr;

// Binding strength; an expression printed where a stronger level is required
// gets parentheses.
const BINDER: u8 = 0;
const EQ: u8 = 1;
const ADD: u8 = 2;
const MUL: u8 = 3;
const PREFIX: u8 = 4;
const POSTFIX: u8 = 5;

fn level(e: &Expr) -> u8 {
    match e {
        Expr::Sum { .. } | Expr::Let { .. } | Expr::If { .. } => BINDER,
        Expr::Eq(..) => EQ,
        Expr::Add(..) => ADD,
        Expr::Mul(..) => MUL,
        Expr::Not(_) => PREFIX,
        _ => POSTFIX,
    }
}

/// Single-line rendering.
pub fn pretty(e: &Expr) -> String {
    let mut s = String::new();
    write_expr(&mut s, e, BINDER).expect("writing to a String cannot fail");
    s
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self, BINDER)
    }
}

fn write_real<W: Write>(w: &mut W, r: f64) -> fmt::Result {
    write!(w, "{:?}", r)
}

fn write_expr<W: Write>(w: &mut W, e: &Expr, min: u8) -> fmt::Result {
    // Binders extend to the right, so they need parentheses anywhere but the
    // rightmost position; callers pass `min > BINDER` for those positions.
    if level(e) < min {
        w.write_char('(')?;
        write_expr(w, e, BINDER)?;
        return w.write_char(')');
    }
    match e {
        Expr::Sum {
            key,
            val,
            range,
            body,
        } => {
            write!(w, "sum(<{}, {}> in ", key, val)?;
            write_expr(w, range, BINDER)?;
            w.write_str(") ")?;
            write_expr(w, body, BINDER)
        }
        Expr::Let { var, bound, body } => {
            write!(w, "let {} = ", var)?;
            write_expr(w, bound, BINDER)?;
            w.write_str(" in ")?;
            write_expr(w, body, BINDER)
        }
        Expr::If { cond, then } => {
            w.write_str("if ")?;
            write_expr(w, cond, BINDER)?;
            w.write_str(" then ")?;
            write_expr(w, then, BINDER)
        }
        Expr::Eq(a, b) => {
            write_expr(w, a, ADD)?;
            w.write_str(" = ")?;
            write_expr(w, b, ADD)
        }
        Expr::Add(a, b) => {
            write_expr(w, a, ADD)?;
            w.write_str(" + ")?;
            write_expr(w, b, MUL)
        }
        Expr::Mul(a, b) => {
            write_expr(w, a, MUL)?;
            w.write_str(" * ")?;
            write_expr(w, b, PREFIX)
        }
        Expr::Not(a) => {
            w.write_str("not ")?;
            write_expr(w, a, PREFIX)
        }
        Expr::Lookup { dict, key } => {
            write_expr(w, dict, POSTFIX)?;
            w.write_char('(')?;
            write_expr(w, key, BINDER)?;
            w.write_char(')')
        }
        Expr::SubArray { arr, start, end } => {
            write_expr(w, arr, POSTFIX)?;
            w.write_char('(')?;
            write_expr(w, start, BINDER)?;
            w.write_char(':')?;
            write_expr(w, end, BINDER)?;
            w.write_char(')')
        }
        Expr::Range { start, end } => {
            w.write_char('(')?;
            write_expr(w, start, BINDER)?;
            w.write_char(':')?;
            write_expr(w, end, BINDER)?;
            w.write_char(')')
        }
        Expr::Singleton { key, val } => {
            w.write_str("{ ")?;
            write_expr(w, key, BINDER)?;
            w.write_str(" -> ")?;
            write_expr(w, val, BINDER)?;
            w.write_str(" }")
        }
        Expr::EmptyDict => w.write_str("{ }"),
        Expr::Unary { op, arg } => {
            write!(w, "{}(", op)?;
            write_expr(w, arg, BINDER)?;
            w.write_char(')')
        }
        Expr::Unique(a) => {
            w.write_str("unique(")?;
            write_expr(w, a, BINDER)?;
            w.write_char(')')
        }
        Expr::Var(x) => w.write_str(x),
        Expr::Int(n) => write!(w, "{}", n),
        Expr::Real(r) => write_real(w, *r),
        Expr::Bool(b) => write!(w, "{}", b),
    }
}

/// Multi-line rendering with one binder per line, for dumps and listings.
pub fn pretty_block(e: &Expr) -> String {
    let mut s = String::new();
    block(&mut s, e, 0);
    s
}

fn block(s: &mut String, e: &Expr, indent: usize) {
    let pad = |s: &mut String, n: usize| {
        for _ in 0..n {
            s.push_str("  ");
        }
    };
    match e {
        Expr::Let { var, bound, body } => {
            pad(s, indent);
            let _ = write!(s, "let {} = ", var);
            if matches!(**bound, Expr::Sum { .. } | Expr::Let { .. }) {
                s.push('\n');
                block(s, bound, indent + 1);
                s.push('\n');
                pad(s, indent);
                s.push_str("in\n");
            } else {
                let _ = write_expr(s, bound, BINDER);
                s.push_str(" in\n");
            }
            block(s, body, indent);
        }
        Expr::Sum {
            key,
            val,
            range,
            body,
        } => {
            pad(s, indent);
            let _ = write!(s, "sum(<{}, {}> in ", key, val);
            let _ = write_expr(s, range, BINDER);
            s.push_str(")\n");
            block(s, body, indent + 1);
        }
        _ => {
            pad(s, indent);
            let _ = write_expr(s, e, BINDER);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lang::parse::{parse, Mode};

    fn round_trip(src: &str) {
        let e = parse(src, Mode::Physical).unwrap();
        let printed = pretty(&e);
        assert_eq!(parse(&printed, Mode::Physical).unwrap(), e, "{}", printed);
        let block = pretty_block(&e);
        assert_eq!(parse(&block, Mode::Physical).unwrap(), e, "{}", block);
    }

    #[test]
    fn scalar_product_prints_with_real_literal() {
        assert_eq!(pretty(&Expr::mul(Expr::var("x"), Expr::Real(2.0))), "x * 2.0");
        assert_eq!(pretty(&Expr::EmptyDict), "{ }");
    }

    #[test]
    fn dot_product_listing() {
        let e = parse("sum(<i,a> in V1) a*V2(i)", Mode::Logical).unwrap();
        assert_eq!(pretty(&e), "sum(<i, a> in V1) a * V2(i)");
    }

    #[test]
    fn parenthesizes_binders_on_the_left() {
        let e = Expr::mul(
            Expr::sum("i", "a", Expr::var("V"), Expr::var("a")),
            Expr::var("x"),
        );
        assert_eq!(pretty(&e), "(sum(<i, a> in V) a) * x");
        let e = Expr::mul(Expr::var("x"), Expr::add(Expr::var("y"), Expr::var("z")));
        assert_eq!(pretty(&e), "x * (y + z)");
    }

    #[test]
    fn round_trips() {
        for src in [
            "sum(<i, a> in V1) a * V2(i)",
            "let x = sum(<i, a> in V) a in x * x + 1.0",
            "a * (b * c) + (d + e)",
            "(sum(<i, a> in V) a) + (let y = 2.0 in y)",
            "if not (i = j) then { i -> { j -> -1.5e-7 } }",
            "sum(<_, i> in (0:V2_len)) { unique(V2_row(i)) -> V2_val(i) }",
            "sum(<p, j> in idx(pos(i):pos(i + 1))) sin(val(p)) * recip(x)",
            "{ }(3)",
            "(x * y)(2)",
            "not not true = false",
            "x + (sum(<i, a> in V) a) * y",
        ] {
            round_trip(src);
        }
    }
}
