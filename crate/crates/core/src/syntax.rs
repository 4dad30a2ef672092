//! Lexical and structural validation of Python payloads.
//!
//! This is not a grammar. It catches the failures generated code actually
//! shows: unbalanced brackets, unterminated strings, broken indentation,
//! block headers without a colon, and dangling line continuations. For
//! full-fidelity checking an external command can be plugged in through
//! [`ExternalChecker`].
//!
//! Indentation follows the interpreter's own consistency test: widths are
//! computed with tabs advancing to the next multiple of 8 and, separately,
//! with tabs as one column; the two orderings must agree.

use std::fmt;
use std::io::Write;
use std::process::Command;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::CodePair;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    Brackets,
    Strings,
    Indentation,
    BlockHeader,
    File,
    Token,
    External,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub rule: Rule,
    pub severity: Severity,
    pub line: usize,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {:?}: {}", self.line, self.rule, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    fn from_findings(findings: Vec<Finding>) -> Self {
        let valid = !findings.iter().any(|f| f.severity == Severity::Error);
        Self { valid, findings }
    }

    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Name,
    Number,
    String,
    Op,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub line: usize,
    /// Offset of the first character, in chars.
    pub start: usize,
    /// Whether this token opens a logical line.
    pub line_start: bool,
}

const HEADER_KEYWORDS: &[&str] = &[
    "def", "class", "if", "elif", "else", "for", "while", "try", "with", "except", "finally",
];

const STRING_PREFIXES: &[&str] = &["r", "u", "b", "f", "br", "rb", "fr", "rf"];

const OPERATORS: &[&str] = &[
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "**", "//", ">>", "<<", "<=", ">=", "==", "!=",
    "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "@=", "+", "-", "*", "/", "%", "@", "&", "|",
    "^", "~", "<", ">", "(", ")", "[", "]", "{", "}", ",", ":", ";", ".", "=", "!",
];

#[derive(Clone, Copy)]
struct Indent {
    tab8: usize,
    tab1: usize,
}

fn measure_indent(ws: &[char]) -> Indent {
    let (mut tab8, mut tab1) = (0, 0);
    for &c in ws {
        match c {
            ' ' => {
                tab8 += 1;
                tab1 += 1;
            }
            '\t' => {
                tab8 = (tab8 / 8 + 1) * 8;
                tab1 += 1;
            }
            '\x0c' => {
                tab8 = 0;
                tab1 = 0;
            }
            _ => {}
        }
    }
    Indent { tab8, tab1 }
}

struct LogicalToken {
    kind: TokenKind,
    text: String,
    depth: usize,
}

struct Lexer<'a> {
    chars: &'a [char],
    pos: usize,
    line: usize,
    findings: Vec<Finding>,
    tokens: Vec<Token>,
    brackets: Vec<(char, usize)>,
    indents: Vec<Indent>,
    logical: Vec<LogicalToken>,
    logical_line: usize,
    expect_indent: Option<usize>,
}

impl<'a> Lexer<'a> {
    fn new(chars: &'a [char]) -> Self {
        Self {
            chars,
            pos: 0,
            line: 1,
            findings: Vec::new(),
            tokens: Vec::new(),
            brackets: Vec::new(),
            indents: vec![Indent { tab8: 0, tab1: 0 }],
            logical: Vec::new(),
            logical_line: 1,
            expect_indent: None,
        }
    }

    fn peek(&self, ahead: usize) -> Option<char> {
        self.chars.get(self.pos + ahead).copied()
    }

    fn error(&mut self, rule: Rule, line: usize, message: impl Into<String>) {
        self.findings.push(Finding {
            rule,
            severity: Severity::Error,
            line,
            message: message.into(),
        });
    }

    fn push_token(&mut self, kind: TokenKind, text: String, line: usize, start: usize) {
        let line_start = self.logical.is_empty();
        if line_start {
            self.logical_line = line;
        }
        self.logical.push(LogicalToken {
            kind,
            text: text.clone(),
            depth: self.brackets.len(),
        });
        self.tokens.push(Token {
            kind,
            text,
            line,
            start,
            line_start,
        });
    }

    fn run(mut self) -> (Vec<Token>, Vec<Finding>) {
        let mut at_line_start = true;
        while self.pos < self.chars.len() {
            if at_line_start && self.brackets.is_empty() {
                self.indentation();
                at_line_start = false;
                continue;
            }
            let c = self.chars[self.pos];
            match c {
                '\n' => {
                    self.pos += 1;
                    if self.brackets.is_empty() {
                        self.end_logical_line();
                        at_line_start = true;
                    }
                    self.line += 1;
                }
                ' ' | '\t' | '\r' | '\x0c' => self.pos += 1,
                '#' => {
                    while self.peek(0).is_some_and(|c| c != '\n') {
                        self.pos += 1;
                    }
                }
                '\\' => self.continuation(),
                '\'' | '"' => self.string(),
                c if c.is_ascii_digit() || (c == '.' && self.peek(1).is_some_and(|d| d.is_ascii_digit())) => {
                    self.number()
                }
                c if c.is_alphabetic() || c == '_' => self.name(),
                _ => self.operator(),
            }
        }
        self.end_logical_line();
        if let Some(line) = self.expect_indent.take() {
            self.error(Rule::Indentation, line, "expected an indented block before end of file");
        }
        for (open, line) in std::mem::take(&mut self.brackets) {
            self.error(Rule::Brackets, line, format!("`{open}` is never closed"));
        }
        (self.tokens, self.findings)
    }

    /// Handles the leading whitespace of a physical line that starts a new
    /// logical line.
    fn indentation(&mut self) {
        let start = self.pos;
        while matches!(self.peek(0), Some(' ' | '\t' | '\x0c')) {
            self.pos += 1;
        }
        match self.peek(0) {
            None | Some('\n') | Some('#') => return,
            Some('\r') if matches!(self.peek(1), None | Some('\n')) => return,
            _ => {}
        }
        let ws = &self.chars[start..self.pos];
        let indent = measure_indent(ws);
        let top = *self.indents.last().expect("indent stack never empty");
        let line = self.line;

        if let Some(header_line) = self.expect_indent.take() {
            if indent.tab8 <= top.tab8 {
                self.error(
                    Rule::Indentation,
                    line,
                    format!("expected an indented block after line {header_line}"),
                );
                return;
            }
        } else if indent.tab8 > top.tab8 {
            self.error(Rule::Indentation, line, "unexpected indent");
            return;
        }

        if indent.tab8 > top.tab8 {
            if indent.tab1 <= top.tab1 {
                self.error(Rule::Indentation, line, "inconsistent use of tabs and spaces");
            }
            self.indents.push(indent);
        } else {
            while self.indents.last().is_some_and(|t| indent.tab8 < t.tab8) {
                self.indents.pop();
            }
            let top = *self.indents.last().expect("indent stack never empty");
            if top.tab8 != indent.tab8 {
                self.error(
                    Rule::Indentation,
                    line,
                    "unindent does not match any outer indentation level",
                );
                self.indents.push(indent);
            } else if top.tab1 != indent.tab1 {
                self.error(Rule::Indentation, line, "inconsistent use of tabs and spaces");
            }
        }
    }

    fn continuation(&mut self) {
        let line = self.line;
        self.pos += 1;
        if self.peek(0) == Some('\r') {
            self.pos += 1;
        }
        match self.peek(0) {
            Some('\n') => {
                self.pos += 1;
                self.line += 1;
                let rest_blank = self.chars[self.pos..].iter().all(|c| c.is_whitespace());
                if rest_blank {
                    self.error(Rule::File, line, "line continuation at end of file");
                    self.pos = self.chars.len();
                }
            }
            None => self.error(Rule::File, line, "line continuation at end of file"),
            Some(_) => self.error(Rule::Token, line, "unexpected character after line continuation"),
        }
    }

    fn string(&mut self) {
        let start_line = self.line;
        let start = self.pos;
        let quote = self.chars[self.pos];
        let triple = self.peek(1) == Some(quote) && self.peek(2) == Some(quote);
        self.pos += if triple { 3 } else { 1 };
        loop {
            match self.peek(0) {
                None => {
                    let what = if triple { "triple-quoted string" } else { "string literal" };
                    self.error(Rule::Strings, start_line, format!("unterminated {what}"));
                    break;
                }
                Some('\\') => {
                    if self.peek(1) == Some('\n') {
                        self.line += 1;
                    }
                    self.pos += 2;
                }
                Some('\n') if !triple => {
                    self.error(Rule::Strings, start_line, "unterminated string literal");
                    break;
                }
                Some('\n') => {
                    self.line += 1;
                    self.pos += 1;
                }
                Some(c) if c == quote => {
                    if !triple {
                        self.pos += 1;
                        break;
                    }
                    if self.peek(1) == Some(quote) && self.peek(2) == Some(quote) {
                        self.pos += 3;
                        break;
                    }
                    self.pos += 1;
                }
                Some(_) => self.pos += 1,
            }
        }
        let end = self.pos.min(self.chars.len());
        let text: String = self.chars[start..end].iter().collect();
        self.push_token(TokenKind::String, text, start_line, start);
    }

    fn number(&mut self) {
        let start = self.pos;
        while let Some(c) = self.peek(0) {
            let exponent_sign = (c == '+' || c == '-')
                && matches!(self.chars[self.pos - 1], 'e' | 'E')
                && !self.chars[start..self.pos].iter().any(|c| matches!(c, 'x' | 'X'));
            if c.is_alphanumeric() || c == '_' || c == '.' || exponent_sign {
                self.pos += 1;
            } else {
                break;
            }
        }
        let text = self.chars[start..self.pos].iter().collect();
        self.push_token(TokenKind::Number, text, self.line, start);
    }

    fn name(&mut self) {
        let start = self.pos;
        while self.peek(0).is_some_and(|c| c.is_alphanumeric() || c == '_') {
            self.pos += 1;
        }
        let text: String = self.chars[start..self.pos].iter().collect();
        if matches!(self.peek(0), Some('\'' | '"'))
            && STRING_PREFIXES.contains(&text.to_ascii_lowercase().as_str())
        {
            // The prefix belongs to the string token.
            let line = self.line;
            self.string();
            let last = self.tokens.pop().expect("string token just pushed");
            self.logical.pop();
            self.push_token(TokenKind::String, format!("{text}{}", last.text), line, start);
            return;
        }
        self.push_token(TokenKind::Name, text, self.line, start);
    }

    fn operator(&mut self) {
        let line = self.line;
        let start = self.pos;
        let rest = &self.chars[self.pos..];
        let op = OPERATORS.iter().find(|op| {
            op.len() <= rest.len() && op.chars().zip(rest.iter()).all(|(a, &b)| a == b)
        });
        let Some(op) = op else {
            let c = self.chars[self.pos];
            self.error(Rule::Token, line, format!("invalid character `{c}`"));
            self.pos += 1;
            return;
        };
        self.pos += op.len();
        match *op {
            "(" | "[" | "{" => {
                self.push_token(TokenKind::Op, op.to_string(), line, start);
                self.brackets.push((op.chars().next().unwrap(), line));
                return;
            }
            ")" | "]" | "}" => {
                let close = op.chars().next().unwrap();
                let expected_open = match close {
                    ')' => '(',
                    ']' => '[',
                    _ => '{',
                };
                match self.brackets.pop() {
                    None => self.error(Rule::Brackets, line, format!("unmatched `{close}`")),
                    Some((open, open_line)) if open != expected_open => self.error(
                        Rule::Brackets,
                        line,
                        format!("`{close}` does not match `{open}` opened on line {open_line}"),
                    ),
                    Some(_) => {}
                }
            }
            _ => {}
        }
        self.push_token(TokenKind::Op, op.to_string(), line, start);
    }

    fn end_logical_line(&mut self) {
        let tokens = std::mem::take(&mut self.logical);
        let Some(first) = tokens.first() else {
            return;
        };
        let line = self.logical_line;
        let keyword = if first.kind == TokenKind::Name && first.text == "async" {
            tokens.get(1).filter(|t| t.kind == TokenKind::Name).map(|t| t.text.as_str())
        } else if first.kind == TokenKind::Name {
            Some(first.text.as_str())
        } else {
            None
        };
        if let Some(kw) = keyword.filter(|kw| HEADER_KEYWORDS.contains(kw)) {
            let has_colon = tokens
                .iter()
                .any(|t| t.kind == TokenKind::Op && t.text == ":" && t.depth == 0);
            if !has_colon {
                self.error(Rule::BlockHeader, line, format!("`{kw}` header does not end with `:`"));
                // Recover as if the colon were there so the body is not also flagged.
                self.expect_indent = Some(line);
                return;
            }
        }
        let last = tokens.last().expect("non-empty");
        if last.kind == TokenKind::Op && last.text == ":" && last.depth == 0 {
            self.expect_indent = Some(line);
        }
    }
}

/// Lexes `text`, returning tokens (names, numbers, strings, operators) and
/// any lexical findings.
pub fn tokenize(text: &str) -> (Vec<Token>, Vec<Finding>) {
    let chars: Vec<char> = text.chars().collect();
    Lexer::new(&chars).run()
}

/// Number of lexical tokens, the length measure used by corpus statistics.
pub fn lexical_token_count(text: &str) -> usize {
    tokenize(text).0.len()
}

/// Validates one Python source payload.
pub fn check_source(text: &str) -> ValidationReport {
    if text.trim().is_empty() {
        return ValidationReport::from_findings(vec![Finding {
            rule: Rule::File,
            severity: Severity::Error,
            line: 1,
            message: "empty source".into(),
        }]);
    }
    let (_, mut findings) = tokenize(text);
    if text.contains('\t') && text.lines().any(|l| l.starts_with(' ')) {
        let line = text.lines().position(|l| l.starts_with('\t')).map_or(1, |i| i + 1);
        findings.push(Finding {
            rule: Rule::Indentation,
            severity: Severity::Warning,
            line,
            message: "file indents with both tabs and spaces".into(),
        });
    }
    findings.sort_by_key(|f| f.line);
    ValidationReport::from_findings(findings)
}

#[derive(Debug, Error)]
pub enum HookError {
    #[error("external checker command is empty")]
    EmptyCommand,
    #[error("external checker could not run: {0}")]
    Io(#[from] std::io::Error),
    #[error("external checker terminated without an exit code")]
    Killed,
}

/// An external validator: `<cmd> ... {file} ...`, exit 0 meaning valid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExternalChecker {
    template: String,
}

impl ExternalChecker {
    /// `template` is split on whitespace; a `{file}` argument is replaced by
    /// the payload path, or the path is appended when no placeholder exists.
    pub fn new(template: impl Into<String>) -> Result<Self, HookError> {
        let template = template.into();
        if template.split_whitespace().next().is_none() {
            return Err(HookError::EmptyCommand);
        }
        Ok(Self { template })
    }

    pub fn template(&self) -> &str {
        &self.template
    }

    /// Returns whether the command accepted the payload.
    pub fn check(&self, source: &str) -> Result<bool, HookError> {
        let mut file = tempfile::Builder::new().suffix(".py").tempfile()?;
        file.write_all(source.as_bytes())?;
        file.flush()?;
        let path = file.path().to_string_lossy().into_owned();

        let mut parts = self.template.split_whitespace();
        let program = parts.next().ok_or(HookError::EmptyCommand)?;
        let mut args: Vec<String> = parts.map(|a| a.replace("{file}", &path)).collect();
        if !self.template.contains("{file}") {
            args.push(path);
        }
        let status = Command::new(program).args(&args).output()?.status;
        match status.code() {
            Some(code) => Ok(code == 0),
            None => Err(HookError::Killed),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Ml,
    Qml,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideFinding {
    pub side: Side,
    #[serde(flatten)]
    pub finding: Finding,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GateOutcome {
    pub pair: CodePair,
    pub findings: Vec<SideFinding>,
}

/// Sets `syntax_valid` from both payloads and the optional hook. Payloads are
/// never touched.
pub fn gate_pair(pair: &CodePair, external: Option<&ExternalChecker>) -> GateOutcome {
    let mut findings = Vec::new();
    let mut valid = true;
    for (side, code) in [(Side::Ml, &pair.ml_code), (Side::Qml, &pair.qml_code)] {
        let report = check_source(code);
        valid &= report.valid;
        findings.extend(report.findings.into_iter().map(|finding| SideFinding { side, finding }));
        if !report.valid {
            continue;
        }
        if let Some(hook) = external {
            let (ok, message) = match hook.check(code) {
                Ok(true) => (true, None),
                Ok(false) => (false, "external checker rejected the payload".to_string().into()),
                Err(e) => (false, Some(format!("external validator failure: {e}"))),
            };
            valid &= ok;
            if let Some(message) = message {
                findings.push(SideFinding {
                    side,
                    finding: Finding {
                        rule: Rule::External,
                        severity: Severity::Error,
                        line: 0,
                        message,
                    },
                });
            }
        }
    }
    let mut pair = pair.clone();
    pair.syntax_valid = valid;
    GateOutcome { pair, findings }
}

/// Curated Python snippets that must be accepted, and their single-edit
/// mutations that must be rejected.
pub mod suite {
    use super::{tokenize, TokenKind};

    const SNIPPETS: &str = include_str!("../data/syntax_snippets.py");
    const SEPARATOR: &str = "#%%\n";

    #[derive(Debug, Clone, Copy, PartialEq, Eq)]
    pub enum Mutation {
        DeleteBracket,
        BreakQuote,
        CorruptDedent,
    }

    pub fn snippets() -> Vec<&'static str> {
        SNIPPETS.split(SEPARATOR).collect()
    }

    /// Applies `mutation` at its first applicable site.
    pub fn mutate(source: &str, mutation: Mutation) -> Option<String> {
        let (tokens, _) = tokenize(source);
        let mut chars: Vec<char> = source.chars().collect();
        match mutation {
            Mutation::DeleteBracket => {
                let t = tokens
                    .iter()
                    .find(|t| t.kind == TokenKind::Op && matches!(t.text.as_str(), "(" | "[" | "{"))?;
                chars.remove(t.start);
            }
            Mutation::BreakQuote => {
                let t = tokens.iter().find(|t| t.kind == TokenKind::String)?;
                chars.remove(t.start + t.text.chars().count() - 1);
            }
            Mutation::CorruptDedent => {
                let lines: Vec<&str> = source.split('\n').collect();
                let indent = |line: usize| {
                    let l = lines[line - 1];
                    l.len() - l.trim_start_matches([' ', '\t']).len()
                };
                let mut previous = None;
                let mut target = None;
                for t in tokens.iter().filter(|t| t.line_start) {
                    let width = indent(t.line);
                    if previous.is_some_and(|p| width < p) {
                        target = Some(t.line);
                        break;
                    }
                    previous = Some(width);
                }
                let mut lines: Vec<String> = lines.iter().map(|l| l.to_string()).collect();
                lines[target? - 1].insert(0, ' ');
                return Some(lines.join("\n"));
            }
        }
        Some(chars.into_iter().collect())
    }

    /// One mutant per snippet, cycling through the mutation kinds and
    /// falling back to the next kind when a snippet has no site for it.
    pub fn mutants() -> Vec<(usize, Mutation, String)> {
        const ORDER: [Mutation; 3] = [
            Mutation::DeleteBracket,
            Mutation::BreakQuote,
            Mutation::CorruptDedent,
        ];
        snippets()
            .into_iter()
            .enumerate()
            .filter_map(|(i, src)| {
                (0..3)
                    .map(|k| ORDER[(i + k) % 3])
                    .find_map(|m| mutate(src, m).map(|text| (i, m, text)))
            })
            .collect()
    }
}
