//! Guarded-command modeling language and CSL property language.

pub mod ast;
pub mod bind;
pub mod eval;
mod lexer;
pub mod parser;
pub mod props;

pub use ast::{Expr, ModelAst, Value};
pub use bind::{bind_constants, Bindings};
pub use parser::{parse_expr_str, parse_model};
pub use props::{parse_properties, parse_property, CslFormula, NumExpr, PathFormula, Property, PropertyFile, PropertyKind};
