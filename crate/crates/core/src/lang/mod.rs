//! Surface syntax, typing and normal form of the core language.

pub mod ast;
pub mod lexer;
pub mod normalize;
pub mod parser;
pub mod printer;
pub mod typeck;

pub use ast::*;
pub use normalize::{is_normal, normalize};
pub use parser::{parse, parse_expr};
pub use printer::{expr_to_string, print, print_stmt};
pub use typeck::{type_of, typecheck, Env, TypeError, TypedProgram};

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("parse error at {line}:{col}: expected {}, found {found}", expected.join(" or "))]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub expected: Vec<String>,
    pub found: String,
}

impl ParseError {
    pub fn new(line: usize, col: usize, expected: Vec<String>, found: &str) -> Self {
        ParseError {
            line,
            col,
            expected,
            found: found.to_string(),
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum FrontendError {
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("{}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n"))]
    Type(Vec<TypeError>),
}

/// Parse, typecheck and normalize.
pub fn load(src: &str) -> Result<TypedProgram, FrontendError> {
    let p = parse(src)?;
    let tp = typecheck(p).map_err(FrontendError::Type)?;
    Ok(normalize(tp))
}
