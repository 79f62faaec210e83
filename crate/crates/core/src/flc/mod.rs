//! Frontend for FLC, a small feature-annotated imperative language.
//!
//! Source units are parsed with their `#if`/`#else`/`#endif` directive
//! structure intact ([`parse_unit`]); [`resolve_product`] then selects the code
//! of one product and lowers it to [`IrProgram`].

pub mod ast;
pub mod feature;
pub mod ir;
mod lexer;
mod lower;
mod parser;
mod pretty;
pub mod product;

use std::collections::BTreeSet;

use thiserror::Error;

pub use feature::FeatureExpr;
pub use ir::{
    InstKind, IrFunction, IrInstruction, IrProgram, MemoryObjectDecl, ObjRef, ObjectScope, Op, Operand, SrcLoc,
};
pub use lexer::DirectiveScope;
pub use lower::{resolve_product, LowerOptions, DEFAULT_LOOP_BOUND};
pub use parser::{has_instance_suffix, parse_unit};
pub use pretty::{expr_string, pretty_print};
pub use product::{parse_products, ProductDef};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum FlcError {
    #[error("lex error at {line}:{col}: {message}")]
    Lex { line: u32, col: u32, message: String },
    #[error("parse error at {line}:{col}: {message}")]
    Parse { line: u32, col: u32, message: String },
    #[error("unbalanced directive at line {line}")]
    UnbalancedDirective { line: u32 },
    #[error("bad feature expression `{text}` at column {column}: {message}")]
    FeatureExpr {
        text: String,
        column: usize,
        message: String,
    },
    #[error("unknown intrinsic or function `{name}` at line {line}")]
    UnknownIntrinsic { line: u32, name: String },
    #[error("undeclared feature `{name}` at line {line}")]
    UndeclaredFeature { line: u32, name: String },
    #[error("line {line}: {message}")]
    Semantic { line: u32, message: String },
    #[error("dangling callsite at line {line}: `{callee}` is not part of product `{product}`")]
    DanglingCall { line: u32, callee: String, product: String },
    #[error("recursion is not supported: {cycle}")]
    Recursion { cycle: String },
    #[error("loop bound must be positive, got {0}")]
    LoopBound(i64),
    #[error("line {line} out of range 1..={count}")]
    LineOutOfRange { line: u32, count: u32 },
    #[error("product `{product}` enables undeclared feature `{feature}`")]
    UnknownProductFeature { product: String, feature: String },
    #[error("product file line {line}: {message}")]
    ProductFile { line: u32, message: String },
    #[error("metadata variable `{name}` collides with an existing identifier")]
    NameCollision { name: String },
}

/// A parsed FLC source file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SourceUnit {
    pub path: String,
    pub line_count: u32,
    /// Declared features, in declaration order.
    pub features: Vec<String>,
    pub items: Vec<ast::Item>,
    /// Directive scopes, properly nested, sorted by first line.
    pub scopes: Vec<DirectiveScope>,
}

impl SourceUnit {
    /// Innermost enclosing presence condition of `line` (`True` at top level).
    pub fn presence_of(&self, line: u32) -> Result<FeatureExpr, FlcError> {
        if line < 1 || line > self.line_count {
            return Err(FlcError::LineOutOfRange {
                line,
                count: self.line_count,
            });
        }
        Ok(self
            .scopes
            .iter()
            .filter(|s| s.first_line <= line && line <= s.last_line)
            .min_by_key(|s| s.last_line - s.first_line)
            .map(|s| s.condition.clone())
            .unwrap_or(FeatureExpr::True))
    }

    pub fn declared_features(&self) -> BTreeSet<&str> {
        self.features.iter().map(String::as_str).collect()
    }

    pub fn function_names(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        ast::walk_functions(&self.items, &FeatureExpr::True, &mut |f, _| {
            out.insert(f.name.clone());
        });
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presence_of_nested_and_top_level() {
        let src = "features A, B;\nvoid main() {\nint x;\n#if A\nx = 1;\n#if B\nx = 2;\n#endif\n#endif\n}\n";
        let unit = parse_unit(src, "t.flc").unwrap();
        assert_eq!(unit.presence_of(3).unwrap(), FeatureExpr::True);
        assert_eq!(unit.presence_of(5).unwrap(), FeatureExpr::atom("A"));
        assert_eq!(
            unit.presence_of(7).unwrap(),
            FeatureExpr::And(vec![FeatureExpr::atom("A"), FeatureExpr::atom("B")])
        );
        assert!(matches!(unit.presence_of(0), Err(FlcError::LineOutOfRange { .. })));
        assert!(unit.presence_of(unit.line_count + 1).is_err());
    }

    #[test]
    fn ls_style_store_line_presence() {
        // Store guarded by two options, mirroring a timestamps/sort-file guard.
        let src = "\
features LS_RECURSIVE, LS_TIMESTAMPS, LS_SORTFILE;
int option_mask32;
void main() {
#if LS_RECURSIVE
  option_mask32 = option_mask32 - 4;
#endif
#if LS_TIMESTAMPS && LS_SORTFILE
  option_mask32 = option_mask32 + 8;
#endif
}
";
        let unit = parse_unit(src, "ls.flc").unwrap();
        assert_eq!(unit.presence_of(5).unwrap().to_string(), "LS_RECURSIVE");
        assert_eq!(unit.presence_of(8).unwrap().to_string(), "LS_TIMESTAMPS && LS_SORTFILE");
    }
}
