//! The structured output contract for scaled generations.
//!
//! A conforming generation looks like:
//!
//! ```text
//! assistantfinal
//! name: <SharedClassName>
//! scaling_paradigm: <extension|controlled modification>
//! summary: <2-3 short sentences on the upgrade>
//! ml_code: '''
//! <importable Python module that defines SharedClassName>
//! '''
//! qml_code: '''
//! <importable quantum Python module that defines SharedClassName>
//! '''
//! ```
//!
//! Anything before the sentinel line is discarded. Everything after it is
//! strict. A code block closes on the first line whose first non-blank
//! token is `'''`; a triple quote anywhere else in a line is payload.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const SENTINEL: &str = "assistantfinal";
const FENCE: &str = "'''";

/// The two paradigm values a single-reference generation may declare.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContractParadigm {
    Extension,
    ControlledModification,
}

impl ContractParadigm {
    /// The literal spelling used in the contract text.
    pub fn literal(self) -> &'static str {
        match self {
            ContractParadigm::Extension => "extension",
            ContractParadigm::ControlledModification => "controlled modification",
        }
    }

    fn from_literal(s: &str) -> Option<Self> {
        match s {
            "extension" => Some(ContractParadigm::Extension),
            "controlled modification" => Some(ContractParadigm::ControlledModification),
            _ => None,
        }
    }
}

impl fmt::Display for ContractParadigm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.literal())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContractRecord {
    pub name: String,
    pub scaling_paradigm: ContractParadigm,
    pub summary: String,
    pub ml_code: String,
    pub qml_code: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ContractError {
    #[error("line {line}: no `assistantfinal` sentinel line")]
    MissingSentinel { line: usize },
    #[error("line {line}: expected field `{field}`")]
    MissingField { field: &'static str, line: usize },
    #[error("line {line}: field `{field}` is empty")]
    EmptyField { field: &'static str, line: usize },
    #[error("line {line}: `{value}` is not a valid class name")]
    InvalidName { value: String, line: usize },
    #[error("line {line}: invalid scaling_paradigm `{value}`")]
    InvalidParadigm { value: String, line: usize },
    #[error("line {line}: code block `{field}` is not terminated")]
    UnterminatedCodeBlock { field: &'static str, line: usize },
    #[error("line {line}: unexpected content after the contract")]
    TrailingContent { line: usize },
}

impl ContractError {
    /// 1-based line where the failure was detected.
    pub fn line(&self) -> usize {
        match self {
            ContractError::MissingSentinel { line }
            | ContractError::MissingField { line, .. }
            | ContractError::EmptyField { line, .. }
            | ContractError::InvalidName { line, .. }
            | ContractError::InvalidParadigm { line, .. }
            | ContractError::UnterminatedCodeBlock { line, .. }
            | ContractError::TrailingContent { line } => *line,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SerializeError {
    #[error("{field} line {line} would be read as a closing delimiter")]
    UnserializablePayload { field: &'static str, line: usize },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
}

struct Lines<'a> {
    lines: Vec<&'a str>,
    pos: usize,
}

impl<'a> Lines<'a> {
    fn peek(&self) -> Option<&'a str> {
        self.lines.get(self.pos).copied()
    }

    fn next(&mut self) -> Option<&'a str> {
        let l = self.peek();
        if l.is_some() {
            self.pos += 1;
        }
        l
    }

    /// 1-based number of the line `peek` would return.
    fn line_no(&self) -> usize {
        self.pos + 1
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_alphabetic() || c == '_')
        && chars.all(|c| c.is_alphanumeric() || c == '_')
}

fn is_closing(line: &str) -> bool {
    line.trim_start().starts_with(FENCE)
}

/// Reads `key: value` on the current line.
fn field<'a>(lines: &mut Lines<'a>, key: &'static str) -> Result<(&'a str, usize), ContractError> {
    let line_no = lines.line_no();
    let line = lines.next().ok_or(ContractError::MissingField { field: key, line: line_no })?;
    let rest = line
        .strip_prefix(key)
        .and_then(|r| r.strip_prefix(':'))
        .ok_or(ContractError::MissingField { field: key, line: line_no })?;
    Ok((rest.strip_prefix(' ').unwrap_or(rest), line_no))
}

fn code_block(lines: &mut Lines<'_>, key: &'static str) -> Result<String, ContractError> {
    let (opener, line_no) = field(lines, key)?;
    if opener.trim() != FENCE {
        return Err(ContractError::MissingField { field: key, line: line_no });
    }
    let mut payload: Vec<&str> = Vec::new();
    loop {
        let close_no = lines.line_no();
        match lines.next() {
            None => return Err(ContractError::UnterminatedCodeBlock { field: key, line: line_no }),
            Some(l) if is_closing(l) => {
                let after = &l.trim_start()[FENCE.len()..];
                if !after.trim().is_empty() {
                    return Err(ContractError::TrailingContent { line: close_no });
                }
                break;
            }
            Some(l) => payload.push(l),
        }
    }
    if payload.is_empty() {
        return Err(ContractError::EmptyField { field: key, line: line_no });
    }
    Ok(payload.join("\n"))
}

/// Parses a generation against the output contract.
pub fn parse_contract(text: &str) -> Result<ContractRecord, ContractError> {
    let all: Vec<&str> = text.split('\n').collect();
    let start = all
        .iter()
        .position(|l| l.trim_end().ends_with(SENTINEL))
        .ok_or(ContractError::MissingSentinel { line: all.len() })?;
    let mut lines = Lines { lines: all, pos: start + 1 };

    let (name, name_line) = field(&mut lines, "name")?;
    let name = name.trim();
    if name.is_empty() {
        return Err(ContractError::EmptyField { field: "name", line: name_line });
    }
    if !is_identifier(name) {
        return Err(ContractError::InvalidName { value: name.to_string(), line: name_line });
    }

    let (paradigm, paradigm_line) = field(&mut lines, "scaling_paradigm")?;
    let paradigm = paradigm.trim();
    let scaling_paradigm = ContractParadigm::from_literal(paradigm).ok_or_else(|| {
        ContractError::InvalidParadigm { value: paradigm.to_string(), line: paradigm_line }
    })?;

    let (first, _) = field(&mut lines, "summary")?;
    let mut summary = vec![first];
    while let Some(l) = lines.peek() {
        if l.starts_with("ml_code:") {
            break;
        }
        summary.push(l);
        lines.next();
    }
    let summary = summary.join("\n");

    let ml_code = code_block(&mut lines, "ml_code")?;
    let qml_code = code_block(&mut lines, "qml_code")?;

    while let Some(l) = lines.peek() {
        if !l.trim().is_empty() {
            return Err(ContractError::TrailingContent { line: lines.line_no() });
        }
        lines.next();
    }

    Ok(ContractRecord {
        name: name.to_string(),
        scaling_paradigm,
        summary,
        ml_code,
        qml_code,
    })
}

/// Emits the exact contract shape; the inverse of [`parse_contract`].
pub fn serialize_contract(record: &ContractRecord) -> Result<String, SerializeError> {
    if !is_identifier(&record.name) {
        return Err(SerializeError::InvalidRecord(format!(
            "name `{}` is not an identifier",
            record.name
        )));
    }
    if record.summary.starts_with(' ') || record.summary.split('\n').skip(1).any(|l| l.starts_with("ml_code:")) {
        return Err(SerializeError::InvalidRecord(
            "summary would not survive a parse".into(),
        ));
    }
    for (field, code) in [("ml_code", &record.ml_code), ("qml_code", &record.qml_code)] {
        if code.is_empty() {
            return Err(SerializeError::InvalidRecord(format!("{field} is empty")));
        }
        if let Some(i) = code.split('\n').position(is_closing) {
            return Err(SerializeError::UnserializablePayload { field, line: i + 1 });
        }
    }
    Ok(format!(
        "{SENTINEL}\nname: {}\nscaling_paradigm: {}\nsummary: {}\nml_code: {FENCE}\n{}\n{FENCE}\nqml_code: {FENCE}\n{}\n{FENCE}\n",
        record.name,
        record.scaling_paradigm.literal(),
        record.summary,
        record.ml_code,
        record.qml_code,
    ))
}
