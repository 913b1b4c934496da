//! Text form of values: `{0 -> {1 -> 2.0}}`, `3`, `1.5`, `true`, `{ }`.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt::{self, Write};

use super::value::Value;
use crate::lang::Type;

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Real(r) => write!(f, "{:?}", r),
            Value::Int(n) => write!(f, "{}", n),
            Value::Bool(b) => write!(f, "{}", b),
            Value::Dict(_) | Value::Range { .. } | Value::Array(_) => {
                let entries = self.entries();
                if entries.is_empty() {
                    return f.write_str("{ }");
                }
                f.write_char('{')?;
                for (i, (k, v)) in entries.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{} -> {}", k, v)?;
                }
                f.write_char('}')
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("bad value literal at offset {offset}: {msg}")]
pub struct LiteralError {
    pub offset: usize,
    pub msg: &'static str,
}

/// Parses the text form. Zero bindings are dropped and repeated keys summed.
pub fn parse_value(src: &str) -> Result<Value, LiteralError> {
    let mut p = Lit {
        s: src.as_bytes(),
        i: 0,
    };
    let v = p.value()?;
    p.ws();
    if p.i != p.s.len() {
        return Err(p.err("trailing input"));
    }
    Ok(v)
}

struct Lit<'a> {
    s: &'a [u8],
    i: usize,
}

impl Lit<'_> {
    fn err(&self, msg: &'static str) -> LiteralError {
        LiteralError {
            offset: self.i,
            msg,
        }
    }

    fn ws(&mut self) {
        while self.i < self.s.len() && self.s[self.i].is_ascii_whitespace() {
            self.i += 1;
        }
    }

    fn eat(&mut self, t: &str) -> bool {
        self.ws();
        if self.s[self.i..].starts_with(t.as_bytes()) {
            self.i += t.len();
            true
        } else {
            false
        }
    }

    fn value(&mut self) -> Result<Value, LiteralError> {
        if self.eat("{") {
            let mut entries = Vec::new();
            if self.eat("}") {
                return Ok(Value::empty());
            }
            loop {
                let k = match self.scalar()? {
                    Value::Int(k) => k,
                    _ => return Err(self.err("keys must be integers")),
                };
                if !self.eat("->") {
                    return Err(self.err("expected `->`"));
                }
                entries.push((k, self.value()?));
                if self.eat("}") {
                    break;
                }
                if !self.eat(",") {
                    return Err(self.err("expected `,` or `}`"));
                }
            }
            return Ok(Value::dict(entries));
        }
        self.scalar()
    }

    fn scalar(&mut self) -> Result<Value, LiteralError> {
        if self.eat("true") {
            return Ok(Value::Bool(true));
        }
        if self.eat("false") {
            return Ok(Value::Bool(false));
        }
        self.ws();
        let start = self.i;
        while self.i < self.s.len()
            && (self.s[self.i].is_ascii_alphanumeric() || b"+-.".contains(&self.s[self.i]))
        {
            // `->` ends a key.
            if self.s[self.i] == b'-' && self.s.get(self.i + 1) == Some(&b'>') {
                break;
            }
            self.i += 1;
        }
        let text = core::str::from_utf8(&self.s[start..self.i]).map_err(|_| self.err("not UTF-8"))?;
        if text.is_empty() {
            return Err(self.err("expected a value"));
        }
        if let Ok(n) = text.parse::<i64>() {
            return Ok(Value::Int(n));
        }
        text.parse::<f64>()
            .map(Value::Real)
            .map_err(|_| LiteralError {
                offset: start,
                msg: "expected a number",
            })
    }
}

/// Reads a literal at a known type, so that integer leaves become reals
/// where the type asks for them.
pub fn parse_value_at(src: &str, ty: &Type) -> Result<Value, LiteralError> {
    Ok(coerce(parse_value(src)?, ty))
}

fn coerce(v: Value, ty: &Type) -> Value {
    match (v, ty) {
        (Value::Int(n), Type::Real) => Value::Real(n as f64),
        (Value::Dict(m), Type::Dict(_, vt)) => {
            Value::dict(m.iter().map(|(k, x)| (*k, coerce(x.clone(), vt))))
        }
        (v, _) => v,
    }
}

/// Renders a value on one line.
pub fn show(v: &Value) -> String {
    let mut s = String::new();
    let _ = write!(s, "{}", v);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nested_round_trip() {
        let v = parse_value("{0 -> {1 -> 2.0}}").unwrap();
        assert_eq!(v, Value::dict([(0, Value::dict([(1, Value::Real(2.0))]))]));
        assert_eq!(show(&v), "{0 -> {1 -> 2.0}}");
        assert_eq!(parse_value(&show(&v)).unwrap(), v);
    }

    #[test]
    fn zeros_are_elided() {
        assert_eq!(parse_value("{0 -> 0.0, 1 -> { }}").unwrap(), Value::empty());
        assert_eq!(show(&Value::empty()), "{ }");
    }

    #[test]
    fn scalars() {
        assert_eq!(parse_value("-1.5e-3").unwrap(), Value::Real(-1.5e-3));
        assert_eq!(parse_value("3").unwrap(), Value::Int(3));
        assert_eq!(parse_value_at("{0 -> 3}", &Type::tensor(1)).unwrap(), Value::vector(&[3.0]));
    }

    #[test]
    fn errors() {
        assert!(parse_value("{0 -> }").is_err());
        assert!(parse_value("{1.5 -> 2.0}").is_err());
        assert!(parse_value("{0 -> 1.0").is_err());
    }
}
