//! The block-structured model language: lexer, parser, scope validation and a
//! canonical printer.
//!
//! A model source is an `@model begin ... end` wrapper around per-concern
//! blocks (`@param`, `@random`, `@covariates`, `@pre`, `@init`, `@vars`,
//! `@dynamics`, `@derived`). Statements are line-based; `~` declares a
//! probabilistic statement, `=` and `:=` are deterministic (`:=` marks a
//! non-stored intermediate). Unicode identifiers are canonicalized to ASCII
//! (`σ` = `sigma`, `ω` = `omega`, `η` = `eta`, `Λ` = `Lambda`, ...), so either
//! spelling refers to the same name.
//!
//! The grammar is documented in EBNF in `docs/grammar.ebnf`.

mod ast;
mod lexer;
mod parser;
mod print;
mod validate;

pub use ast::{AssignStmt, BinOp, DerivedStmt, DynStmt, Expr, ModelAst, ParamStmt, UnaryOp};
pub use lexer::{canonical_name, tokenize, Token, TokenKind};
pub use parser::parse_model;
pub use print::print_model;
pub use validate::{validate, CheckedAst};

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DslError {
    #[error("lex error at {line}:{column}: {message}")]
    Lex { line: usize, column: usize, message: String },
    #[error("parse error at {line}:{column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("duplicate declaration of `{name}` at {line}:{column}")]
    DuplicateDeclaration { name: String, line: usize, column: usize },
    #[error("unknown or unsupported block `{name}` at {line}:{column}")]
    UnknownBlock { name: String, line: usize, column: usize },
    #[error("undefined identifier `{name}` at {line}:{column}")]
    UndefinedIdentifier { name: String, line: usize, column: usize },
    #[error("probabilistic assignment not allowed here at {line}:{column}")]
    IllegalProbabilisticAssignment { line: usize, column: usize },
    #[error("cyclic or forward reference to `{name}` at {line}:{column}")]
    CyclicDefinition { name: String, line: usize, column: usize },
}

impl DslError {
    pub fn location(&self) -> (usize, usize) {
        match self {
            DslError::Lex { line, column, .. }
            | DslError::Parse { line, column, .. }
            | DslError::DuplicateDeclaration { line, column, .. }
            | DslError::UnknownBlock { line, column, .. }
            | DslError::UndefinedIdentifier { line, column, .. }
            | DslError::IllegalProbabilisticAssignment { line, column }
            | DslError::CyclicDefinition { line, column, .. } => (*line, *column),
        }
    }
}

/// Parse and validate in one step.
pub fn parse_and_check(source: &str) -> Result<CheckedAst, DslError> {
    validate(parse_model(source)?)
}
