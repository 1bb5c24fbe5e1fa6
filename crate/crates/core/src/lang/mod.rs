//! The analyzed mini-language: syntax, name resolution, typing and printing.

pub mod ast;
pub mod check;
pub mod dump;
pub mod lexer;
pub mod library;
pub mod parser;
pub mod pretty;
pub mod types;

pub use ast::{
    BinaryOp, Expr, ExprKind, GlobalDecl, MethodDecl, Param, Program, RecordDecl, Span, Stmt, StmtKind,
    SwitchArm, UnaryOp,
};
pub use check::{check, CheckedProgram};
pub use library::{HeapRegion, LibFn};
pub use pretty::pretty_print;
pub use types::Ty;

#[derive(Clone, Debug, PartialEq, thiserror::Error)]
pub enum LangError {
    #[error("{span}: syntax error: {message}")]
    Syntax { span: Span, message: String },
    #[error("{span}: duplicate {what} `{name}`")]
    Duplicate { span: Span, what: &'static str, name: String },
    #[error("{span}: unresolved identifier `{name}`")]
    Unresolved { span: Span, name: String },
    #[error("{span}: type error: {message}")]
    Type { span: Span, message: String },
    #[error("{span}: `{name}` expects {expected} argument(s), found {found}")]
    Arity { span: Span, name: String, expected: usize, found: usize },
}

impl LangError {
    pub fn syntax(span: Span, message: impl Into<String>) -> Self {
        LangError::Syntax { span, message: message.into() }
    }

    pub fn span(&self) -> Option<Span> {
        match self {
            LangError::Syntax { span, .. }
            | LangError::Duplicate { span, .. }
            | LangError::Unresolved { span, .. }
            | LangError::Type { span, .. }
            | LangError::Arity { span, .. } => Some(*span),
        }
    }

    /// Short machine-readable category.
    pub fn kind(&self) -> &'static str {
        match self {
            LangError::Syntax { .. } => "syntax",
            LangError::Duplicate { .. } => "duplicate",
            LangError::Unresolved { .. } => "unresolved",
            LangError::Type { .. } => "type",
            LangError::Arity { .. } => "arity",
        }
    }
}

/// Parse and resolve names. Types are not checked yet.
pub fn parse_source(text: &str) -> Result<Program, LangError> {
    let mut program = parser::parse_program(text)?;
    check::resolve(&mut program)?;
    Ok(program)
}

/// Parse, resolve and type-check in one step.
pub fn load(text: &str) -> Result<CheckedProgram, LangError> {
    check(&parse_source(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_methods_and_unknown_names_fail_at_parse() {
        assert!(matches!(parse_source("void f(){} void f(){}"), Err(LangError::Duplicate { .. })));
        assert!(matches!(parse_source("void f(){ y = 1; }"), Err(LangError::Unresolved { .. })));
        assert!(matches!(parse_source("void f(){ g(); }"), Err(LangError::Unresolved { .. })));
    }

    #[test]
    fn double_if_around_draw() {
        let src = "record Node { Object children; }
            void draw(Object n) {}
            void visit(Object self) {
                if (self.children != null) { emit_int(1); }
                draw(self);
                if (self.children != null) { emit_int(2); }
            }";
        let p = parse_source(src).unwrap();
        let body = &p.method("visit").unwrap().body;
        let ifs = body.iter().filter(|s| matches!(s.kind, StmtKind::If { .. })).count();
        let calls = body.iter().filter(|s| matches!(&s.kind, StmtKind::Expr(e) if matches!(e.kind, ExprKind::Call { .. }))).count();
        assert_eq!((ifs, calls), (2, 1));
    }
}
