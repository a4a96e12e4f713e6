//! The definition language: dictionary expressions, declarations and workspace loading.

pub mod ast;
pub mod eval;
mod parser;
pub mod workspace;

pub use ast::{Arith, ArithOp, AccumFn, ColumnRef, Decl, DictExpr, Formula, FormulaBody, InitDecl, InitKind, RuleDef, SeriesDef};
pub use eval::{Env, EvalError, Value};
pub use parser::{parse_expr, parse_file, Spanned, SyntaxError};
pub use workspace::{parse_workspace, pointwise_order, Diagnostic, Loaded, Source, Workspace};
