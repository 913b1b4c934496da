//! Reference semantics: values, evaluation and finite differences.

pub mod eval;
pub mod fdiff;
pub mod literal;
pub mod value;

pub use eval::{compile, eval, eval_with_stats, Compiled, Env, EvalError, Stats};
pub use fdiff::{finite_diff, finite_diff_on, FdError, DEFAULT_EPS};
pub use literal::{parse_value, parse_value_at, show, LiteralError};
pub use value::{approx_eq, compare, exact_eq, ArrayData, ArrayView, Discrepancy, Tolerance, Value};
