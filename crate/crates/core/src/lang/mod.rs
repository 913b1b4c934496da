//! Syntax, types and static checks.

pub mod ast;
pub mod check;
pub mod ops;
pub mod parse;
pub mod pretty;
pub mod subst;
pub mod types;

pub use ast::{Expr, Name};
pub use check::{type_of, typecheck, TypeError};
pub use parse::{parse, parse_source, parse_type, Mode, ParseError};
pub use pretty::{pretty, pretty_block};
pub use types::{otimes, zero_of, Type, TypeEnv};
