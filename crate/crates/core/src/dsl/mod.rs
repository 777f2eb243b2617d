//! Textual formats: the `.grid` network format, the `.scn` scenario format,
//! the IDR expression syntax, and lossless canonical serialization.
//!
//! Expression glyphs are plain ASCII: `.` is min-AND, `+` is max-OR, `^` is
//! new-XOR and `<-` is the dependency arrow. Precedence is min-AND over
//! max-OR over new-XOR, all left-associative, with parentheses overriding.
//! Comments run from `//` to the end of the line.

mod lexer;
mod parser;
mod writer;

use std::fmt;

use serde::{Deserialize, Serialize};

pub use lexer::{tokenize, Token, TokenKind};
pub use parser::{parse_expr, parse_network, parse_scenario};
pub use writer::{serialize_expr, serialize_network};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

/// A parse problem, pointing into the source text.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParseDiagnostic {
    pub message: String,
    pub line: u32,
    pub column: u32,
    pub severity: Severity,
}

impl ParseDiagnostic {
    pub fn error(message: impl Into<String>, line: u32, column: u32) -> Self {
        ParseDiagnostic {
            message: message.into(),
            line,
            column,
            severity: Severity::Error,
        }
    }

    pub fn warning(message: impl Into<String>, line: u32, column: u32) -> Self {
        ParseDiagnostic {
            message: message.into(),
            line,
            column,
            severity: Severity::Warning,
        }
    }
}

impl fmt::Display for ParseDiagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{}:{}: {tag}: {}", self.line, self.column, self.message)
    }
}

/// True when any diagnostic in the list is an error.
pub fn has_errors(diags: &[ParseDiagnostic]) -> bool {
    diags.iter().any(|d| d.severity == Severity::Error)
}
