//! Text syntax of SDQLite, following the listing notation.
//!
//! ```text
//! sum(<k, v> in e) e    { e -> e }    { }    e(e)    let x = e in e
//! let <x, y> = <e, e> in e    if e then e    not e    e + e    e * e    e = e
//! op(e)    (e:e)    e(e:e)    unique(e)    // line comment
//! ```

use alloc::boxed::Box;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::ast::{Expr, Name};
use super::ops::is_op_name;
use super::types::Type;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Rejects ranges and sub-arrays.
    Logical,
    Physical,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at {line}:{col}: {msg}")]
    Syntax { line: usize, col: usize, msg: String },
    #[error("{construct} at {line}:{col} is not allowed in a logical program")]
    NotLogical {
        construct: &'static str,
        line: usize,
        col: usize,
    },
    #[error("identifier `{name}` at {line}:{col} uses the reserved tangent suffix `'`")]
    ReservedName { name: String, line: usize, col: usize },
}

const KEYWORDS: &[&str] = &[
    "sum", "in", "let", "if", "then", "not", "true", "false", "unique",
];

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Int(i64),
    Real(f64),
    Kw(&'static str),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    let err = |line, col, msg: &str| ParseError::Syntax {
        line,
        col,
        msg: msg.to_string(),
    };
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || (c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            i += 1;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let mut real = false;
            if i + 1 < chars.len() && chars[i] == '.' && chars[i + 1].is_ascii_digit() {
                real = true;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    real = true;
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let tok = if real {
                Tok::Real(text.parse().map_err(|_| err(tl, tc, "bad real literal"))?)
            } else {
                Tok::Int(text.parse().map_err(|_| err(tl, tc, "bad integer literal"))?)
            };
            col += i - start;
            out.push(Token { tok, line: tl, col: tc });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            while i < chars.len() && chars[i] == '\'' {
                i += 1;
            }
            let text: String = chars[start..i].iter().collect();
            col += i - start;
            let tok = match KEYWORDS.iter().find(|k| **k == text) {
                Some(k) => Tok::Kw(k),
                None => Tok::Ident(text),
            };
            out.push(Token { tok, line: tl, col: tc });
            continue;
        }
        let sym = match c {
            '-' if chars.get(i + 1) == Some(&'>') => "->",
            '(' => "(",
            ')' => ")",
            '{' => "{",
            '}' => "}",
            '<' => "<",
            '>' => ">",
            ',' => ",",
            '=' => "=",
            '+' => "+",
            '*' => "*",
            ':' => ":",
            _ => return Err(err(tl, tc, &alloc::format!("unexpected character `{}`", c))),
        };
        i += sym.len();
        col += sym.len();
        out.push(Token {
            tok: Tok::Sym(sym),
            line: tl,
            col: tc,
        });
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    mode: Mode,
}

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn here(&self) -> (usize, usize) {
        let t = &self.toks[self.pos];
        (t.line, t.col)
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        let (line, col) = self.here();
        Err(ParseError::Syntax {
            line,
            col,
            msg: msg.into(),
        })
    }

    fn at_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Tok::Sym(x) if *x == s)
    }

    fn at_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Tok::Kw(x) if *x == k)
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.at_sym(s) {
            self.bump();
            Ok(())
        } else {
            self.error(alloc::format!("expected `{}`, found {}", s, describe(self.peek())))
        }
    }

    fn expect_kw(&mut self, k: &str) -> Result<(), ParseError> {
        if self.at_kw(k) {
            self.bump();
            Ok(())
        } else {
            self.error(alloc::format!("expected `{}`, found {}", k, describe(self.peek())))
        }
    }

    fn ident(&mut self) -> Result<Name, ParseError> {
        match self.peek().clone() {
            Tok::Ident(name) if !is_op_name(&name) => {
                self.bump();
                Ok(name)
            }
            other => self.error(alloc::format!("expected identifier, found {}", describe(&other))),
        }
    }

    fn physical(&self, construct: &'static str, at: (usize, usize)) -> Result<(), ParseError> {
        match self.mode {
            Mode::Physical => Ok(()),
            Mode::Logical => Err(ParseError::NotLogical {
                construct,
                line: at.0,
                col: at.1,
            }),
        }
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        if self.at_kw("sum") {
            self.bump();
            self.expect_sym("(")?;
            self.expect_sym("<")?;
            let at = self.here();
            let key = self.ident()?;
            self.expect_sym(",")?;
            let val = self.ident()?;
            if key == val && key != "_" {
                return Err(ParseError::Syntax {
                    line: at.0,
                    col: at.1,
                    msg: alloc::format!("sum binds `{}` twice", key),
                });
            }
            self.expect_sym(">")?;
            self.expect_kw("in")?;
            let range = self.expr()?;
            self.expect_sym(")")?;
            let body = self.expr()?;
            return Ok(Expr::sum(key, val, range, body));
        }
        if self.at_kw("let") {
            self.bump();
            if self.at_sym("<") {
                return self.tupled_let();
            }
            let var = self.ident()?;
            self.expect_sym("=")?;
            let bound = self.expr()?;
            if self.at_kw("in") {
                self.bump();
            }
            let body = self.expr()?;
            return Ok(Expr::let_in(var, bound, body));
        }
        if self.at_kw("if") {
            self.bump();
            let cond = self.expr()?;
            self.expect_kw("then")?;
            let then = self.expr()?;
            return Ok(Expr::if_then(cond, then));
        }
        self.equality()
    }

    fn tupled_let(&mut self) -> Result<Expr, ParseError> {
        self.expect_sym("<")?;
        let mut vars = alloc::vec![self.ident()?];
        while self.at_sym(",") {
            self.bump();
            vars.push(self.ident()?);
        }
        self.expect_sym(">")?;
        self.expect_sym("=")?;
        self.expect_sym("<")?;
        let mut bounds = alloc::vec![self.expr()?];
        while self.at_sym(",") {
            self.bump();
            bounds.push(self.expr()?);
        }
        self.expect_sym(">")?;
        if vars.len() != bounds.len() {
            return self.error(alloc::format!(
                "tupled let binds {} names to {} expressions",
                vars.len(),
                bounds.len()
            ));
        }
        if self.at_kw("in") {
            self.bump();
        }
        let body = self.expr()?;
        Ok(vars
            .into_iter()
            .zip(bounds)
            .rev()
            .fold(body, |acc, (v, b)| Expr::let_in(v, b, acc)))
    }

    fn equality(&mut self) -> Result<Expr, ParseError> {
        let lhs = self.additive()?;
        if self.at_sym("=") {
            self.bump();
            let rhs = self.additive()?;
            return Ok(Expr::eq(lhs, rhs));
        }
        Ok(lhs)
    }

    fn additive(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.multiplicative()?;
        while self.at_sym("+") {
            self.bump();
            let rhs = self.operand(Self::multiplicative)?;
            lhs = Expr::add(lhs, rhs);
        }
        Ok(lhs)
    }

    fn multiplicative(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.prefix()?;
        while self.at_sym("*") {
            self.bump();
            let rhs = self.operand(Self::prefix)?;
            lhs = Expr::mul(lhs, rhs);
        }
        Ok(lhs)
    }

    /// Right operands may be a binder, which then extends to the right.
    fn operand(&mut self, next: fn(&mut Self) -> Result<Expr, ParseError>) -> Result<Expr, ParseError> {
        if self.at_kw("sum") || self.at_kw("let") || self.at_kw("if") {
            self.expr()
        } else {
            next(self)
        }
    }

    fn prefix(&mut self) -> Result<Expr, ParseError> {
        if self.at_kw("not") {
            self.bump();
            let inner = self.operand(Self::prefix)?;
            return Ok(Expr::not(inner));
        }
        self.postfix()
    }

    fn postfix(&mut self) -> Result<Expr, ParseError> {
        let mut e = self.primary()?;
        while self.at_sym("(") {
            let at = self.here();
            self.bump();
            let first = self.expr()?;
            if self.at_sym(":") {
                self.physical("subarray", at)?;
                self.bump();
                let end = self.expr()?;
                self.expect_sym(")")?;
                e = Expr::sub_array(e, first, end);
            } else {
                self.expect_sym(")")?;
                e = Expr::lookup(e, first);
            }
        }
        Ok(e)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let at = self.here();
        match self.peek().clone() {
            Tok::Int(n) => {
                self.bump();
                Ok(Expr::Int(n))
            }
            Tok::Real(r) => {
                self.bump();
                Ok(Expr::Real(r))
            }
            Tok::Kw("true") => {
                self.bump();
                Ok(Expr::Bool(true))
            }
            Tok::Kw("false") => {
                self.bump();
                Ok(Expr::Bool(false))
            }
            Tok::Kw("unique") => {
                self.bump();
                self.expect_sym("(")?;
                let inner = self.expr()?;
                self.expect_sym(")")?;
                Ok(Expr::unique(inner))
            }
            Tok::Ident(name) => {
                self.bump();
                if is_op_name(&name) {
                    self.expect_sym("(")?;
                    let arg = self.expr()?;
                    self.expect_sym(")")?;
                    Ok(Expr::unary(name, arg))
                } else {
                    Ok(Expr::Var(name))
                }
            }
            Tok::Sym("{") => {
                self.bump();
                if self.at_sym("}") {
                    self.bump();
                    return Ok(Expr::EmptyDict);
                }
                let key = self.expr()?;
                self.expect_sym("->")?;
                let val = self.expr()?;
                self.expect_sym("}")?;
                Ok(Expr::singleton(key, val))
            }
            Tok::Sym("(") => {
                self.bump();
                let first = self.expr()?;
                if self.at_sym(":") {
                    self.physical("range", at)?;
                    self.bump();
                    let end = self.expr()?;
                    self.expect_sym(")")?;
                    return Ok(Expr::range(first, end));
                }
                self.expect_sym(")")?;
                Ok(first)
            }
            other => self.error(alloc::format!("expected an expression, found {}", describe(&other))),
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => alloc::format!("identifier `{}`", s),
        Tok::Int(n) => alloc::format!("integer `{}`", n),
        Tok::Real(r) => alloc::format!("real `{:?}`", r),
        Tok::Kw(k) => alloc::format!("keyword `{}`", k),
        Tok::Sym(s) => alloc::format!("`{}`", s),
        Tok::Eof => "end of input".into(),
    }
}

/// Parses a complete expression.
pub fn parse(source: &str, mode: Mode) -> Result<Expr, ParseError> {
    let mut p = Parser {
        toks: lex(source)?,
        pos: 0,
        mode,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::Eof {
        return p.error(alloc::format!("unexpected {} after expression", describe(p.peek())));
    }
    Ok(e)
}

/// Parses a user-written program: like [`parse`], but primed identifiers are
/// rejected since the `'` suffix is reserved for tangent variables.
pub fn parse_source(source: &str, mode: Mode) -> Result<Expr, ParseError> {
    for t in lex(source)? {
        if let Tok::Ident(name) = &t.tok {
            if name.contains('\'') {
                return Err(ParseError::ReservedName {
                    name: name.clone(),
                    line: t.line,
                    col: t.col,
                });
            }
        }
    }
    parse(source, mode)
}

/// Parses `real`, `int`, `bool`, `dense_int`, `{K -> V}` and `tensor n`.
pub fn parse_type(source: &str) -> Result<Type, ParseError> {
    let mut p = Parser {
        toks: lex(source)?,
        pos: 0,
        mode: Mode::Physical,
    };
    let t = type_expr(&mut p)?;
    if *p.peek() != Tok::Eof {
        return p.error("unexpected input after type");
    }
    Ok(t)
}

fn type_expr(p: &mut Parser) -> Result<Type, ParseError> {
    match p.bump() {
        Tok::Ident(s) if s == "real" => Ok(Type::Real),
        Tok::Ident(s) if s == "int" => Ok(Type::Int),
        Tok::Ident(s) if s == "bool" => Ok(Type::Bool),
        Tok::Ident(s) if s == "dense_int" => Ok(Type::DenseInt),
        Tok::Ident(s) if s == "tensor" => match p.bump() {
            Tok::Int(n) if n >= 0 => Ok(Type::tensor(n as usize)),
            _ => p.error("expected tensor order"),
        },
        Tok::Sym("{") => {
            let k = type_expr(p)?;
            p.expect_sym("->")?;
            let v = type_expr(p)?;
            p.expect_sym("}")?;
            Ok(Type::Dict(Box::new(k), Box::new(v)))
        }
        Tok::Sym("(") => {
            let t = type_expr(p)?;
            p.expect_sym(")")?;
            Ok(t)
        }
        _ => p.error("expected a type"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn logical(s: &str) -> Expr {
        parse(s, Mode::Logical).unwrap()
    }

    #[test]
    fn dot_product() {
        let e = logical("sum(<i, a> in V1) a * V2(i)");
        let expected = Expr::sum(
            "i",
            "a",
            Expr::var("V1"),
            Expr::mul(Expr::var("a"), Expr::lookup(Expr::var("V2"), Expr::var("i"))),
        );
        assert_eq!(e, expected);
    }

    #[test]
    fn empty_dict() {
        assert_eq!(logical("{ }"), Expr::EmptyDict);
        assert_eq!(logical("{}"), Expr::EmptyDict);
    }

    #[test]
    fn subarray_rejected_in_logical_mode() {
        match parse("arr(st:en)", Mode::Logical) {
            Err(ParseError::NotLogical { construct, .. }) => assert_eq!(construct, "subarray"),
            other => panic!("{:?}", other),
        }
        match parse("(0:n)", Mode::Logical) {
            Err(ParseError::NotLogical { construct, .. }) => assert_eq!(construct, "range"),
            other => panic!("{:?}", other),
        }
        assert!(parse("arr(st:en)", Mode::Physical).is_ok());
    }

    #[test]
    fn syntax_error_has_position() {
        match parse("sum(<i, a> in V1\n  a", Mode::Logical) {
            Err(ParseError::Syntax { line, col, .. }) => assert_eq!((line, col), (2, 3)),
            other => panic!("{:?}", other),
        }
    }

    #[test]
    fn tupled_let_expands_to_sequential_lets() {
        let e = logical("let <x, y> = <1.0, x> in y");
        assert_eq!(
            e,
            Expr::let_in("x", Expr::Real(1.0), Expr::let_in("y", Expr::var("x"), Expr::var("y")))
        );
    }

    #[test]
    fn let_without_in_keyword() {
        let e = logical("let V2' = {}\nsum(<i, a> in V1) a");
        assert!(matches!(e, Expr::Let { .. }));
    }

    #[test]
    fn reserved_suffix_rejected_in_sources() {
        assert!(matches!(
            parse_source("x' * 2.0", Mode::Logical),
            Err(ParseError::ReservedName { .. })
        ));
        assert!(parse("x' * 2.0", Mode::Logical).is_ok());
    }

    #[test]
    fn repeated_binder_rejected() {
        assert!(parse("sum(<i, i> in V) i", Mode::Logical).is_err());
        assert!(parse("sum(<_, _> in V) 1.0", Mode::Logical).is_ok());
    }

    #[test]
    fn precedence() {
        let e = logical("a + b * c = d");
        assert_eq!(
            e,
            Expr::eq(
                Expr::add(Expr::var("a"), Expr::mul(Expr::var("b"), Expr::var("c"))),
                Expr::var("d")
            )
        );
        let e = logical("beta * v1 * v2");
        assert_eq!(
            e,
            Expr::mul(Expr::mul(Expr::var("beta"), Expr::var("v1")), Expr::var("v2"))
        );
    }

    #[test]
    fn physical_constructs() {
        let e = parse(
            "sum(<p, j> in idx(pos(i):pos(i + 1))) { unique(j) -> val(p) }",
            Mode::Physical,
        )
        .unwrap();
        let Expr::Sum { range, .. } = e else { panic!() };
        assert!(matches!(*range, Expr::SubArray { .. }));
    }

    #[test]
    fn types() {
        assert_eq!(parse_type("tensor 2").unwrap(), Type::tensor(2));
        assert_eq!(parse_type("{int -> real}").unwrap(), Type::tensor(1));
        assert_eq!(
            parse_type("{dense_int -> int}").unwrap(),
            Type::dict(Type::DenseInt, Type::Int)
        );
    }
}
