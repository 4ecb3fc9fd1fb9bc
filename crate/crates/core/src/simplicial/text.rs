//! Plain-text complex format.
//!
//! One simplex per line, vertex ids in base 10, ascending, separated by a
//! single space. Lines starting with `#` are comments. Reading closes the
//! set under faces, so a file may list only facets.

use thiserror::Error;

use super::{Simplex, SimplexError, SimplicialComplex, VertexId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TextError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: {source}")]
    Simplex {
        line: usize,
        #[source]
        source: SimplexError,
    },
}

impl TextError {
    pub fn line(&self) -> usize {
        match self {
            TextError::Syntax { line, .. } | TextError::Simplex { line, .. } => *line,
        }
    }
}

/// Writes every member in canonical order.
pub fn write_complex(complex: &SimplicialComplex) -> String {
    let mut out = String::new();
    for s in complex.iter() {
        out.push_str(&s.to_string());
        out.push('\n');
    }
    out
}

pub fn parse_simplex_line(text: &str, line: usize) -> Result<Simplex, TextError> {
    let mut vertices = Vec::new();
    for tok in text.split(' ') {
        if tok.is_empty() {
            return Err(TextError::Syntax { line, message: "vertices must be separated by a single space".into() });
        }
        if !tok.bytes().all(|b| b.is_ascii_digit()) {
            return Err(TextError::Syntax { line, message: format!("`{tok}` is not a base-10 vertex id") });
        }
        let id: u32 = tok
            .parse()
            .map_err(|_| TextError::Syntax { line, message: format!("vertex id `{tok}` out of range") })?;
        vertices.push(VertexId(id));
    }
    Simplex::new(vertices).map_err(|source| TextError::Simplex { line, source })
}

pub fn read_complex(text: &str) -> Result<SimplicialComplex, TextError> {
    let mut complex = SimplicialComplex::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let s = parse_simplex_line(raw, line)?;
        complex.insert(&s).map_err(|source| TextError::Simplex { line, source })?;
    }
    Ok(complex)
}
