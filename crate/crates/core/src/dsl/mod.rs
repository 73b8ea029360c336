//! The `.dm` device-model language: lexing, parsing, printing, validation
//! and loop elision.

pub mod ast;
mod elide;
mod free_expr;
pub mod ir;
mod lexer;
mod parser;
mod printer;
mod validate;

use std::fmt;

use thiserror::Error;

pub use ast::{DeviceModel, Pos};
pub use elide::elide_loops;
pub use free_expr::{free_expr_term, FreeExprError};
pub use ir::HandlerKind;
pub use parser::parse_expr;
pub use validate::{validate_model, Rule, ValidatedModel, ValidationError};

/// Source text of one model file.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SourceUnit {
    pub path: String,
    pub text: String,
}

impl SourceUnit {
    pub fn new(path: impl Into<String>, text: impl Into<String>) -> Self {
        SourceUnit {
            path: path.into(),
            text: text.into(),
        }
    }

    /// Decodes raw bytes; invalid UTF-8 is reported at the offending byte.
    pub fn from_bytes(path: impl Into<String>, bytes: Vec<u8>) -> Result<Self, ParseError> {
        match String::from_utf8(bytes) {
            Ok(text) => Ok(SourceUnit::new(path, text)),
            Err(e) => {
                let good = &e.as_bytes()[..e.utf8_error().valid_up_to()];
                let good = std::str::from_utf8(good).unwrap_or_default();
                let line = good.matches('\n').count() as u32 + 1;
                let col = good.rsplit('\n').next().map_or(0, |l| l.chars().count()) as u32 + 1;
                Err(ParseError::new(Pos { line, col }, "invalid UTF-8", vec![]))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct ParseError {
    pub pos: Pos,
    pub message: String,
    /// Token descriptions that would have been accepted here, if known.
    pub expected: Vec<String>,
}

impl ParseError {
    pub(crate) fn new(pos: Pos, message: impl Into<String>, expected: Vec<String>) -> Self {
        ParseError {
            pos,
            message: message.into(),
            expected,
        }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.pos, self.message)
    }
}

pub fn parse_model(src: &SourceUnit) -> Result<DeviceModel, ParseError> {
    parser::Parser::new(&src.text)?.model()
}

/// Any failure on the way from source text to a loop-free model.
#[derive(Debug, Error)]
pub enum LoadError {
    #[error("{path}:{err}")]
    Parse { path: String, err: ParseError },
    #[error("{path}:{err}")]
    Validate { path: String, err: ValidationError },
}

/// parse, validate and elide in one step.
pub fn load_model(src: &SourceUnit, loop_bound: u32) -> Result<ValidatedModel, LoadError> {
    let ast = parse_model(src).map_err(|err| LoadError::Parse {
        path: src.path.clone(),
        err,
    })?;
    let wrap = |err| LoadError::Validate {
        path: src.path.clone(),
        err,
    };
    let vm = validate_model(&ast).map_err(wrap)?;
    elide_loops(&vm, loop_bound).map_err(wrap)
}
