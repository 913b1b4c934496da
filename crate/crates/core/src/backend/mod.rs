//! Destination-passing lowering to a loop IR, its interpreter, and C++ emission.

pub mod emit;
pub mod exec;
pub mod imp;
pub mod lower;

pub use emit::{emit_file, emit_kernel, emit_main, mangle, EmitOptions, RUNTIME_HEADER, RUNTIME_HEADER_SOURCE};
pub use exec::{execute, ExecError, ExecStats};
pub use imp::{kernel_name, IExpr, ImpStmt, KernelError, KernelSignature, KeyKind, LValue, Param, ParamKind, ScalarKind, SignatureError, RESULT};
pub use lower::{lower_dps, Dps, LowerError};
