//! Text format for constraint files.
//!
//! A constraint reads `body -> head ;` and may span several lines. Body
//! literals are `[NOT] table(col = value, ...)`, head actions begin with `+`
//! or `-`, values starting with `$` are variables, and constants are bare
//! tokens or single-quoted strings. Lines starting with `--` are comments.
//!
//! Preprocessed files wrap constraint blocks in `#PARTITION_BEGIN_n#` /
//! `#PARTITION_END#` markers and may list `X -> Y` lines (partition `Y`
//! precedes partition `X`) between `#DEPENDENCIES_BEGIN#` and
//! `#DEPENDENCIES_END#`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::model::{Aic, AicError, AtomPattern, Literal, Term, UpdateAction};

/// A parsed constraint together with its source text, when it came from a
/// file. Serialization reuses the source verbatim so that preprocessing
/// preserves the user's formatting; equality ignores it.
#[derive(Clone, Debug)]
pub struct AicEntry {
    pub aic: Aic,
    pub source: Option<String>,
}

impl AicEntry {
    pub fn new(aic: Aic) -> Self {
        AicEntry { aic, source: None }
    }

    pub fn text(&self) -> String {
        match &self.source {
            Some(s) => s.clone(),
            None => render_aic(&self.aic),
        }
    }
}

impl PartialEq for AicEntry {
    fn eq(&self, other: &Self) -> bool {
        self.aic == other.aic
    }
}

impl Eq for AicEntry {}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    pub id: u32,
    pub aics: Vec<AicEntry>,
}

/// A dependency line `from -> to`: partition `to` precedes partition `from`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Dependency {
    pub from: u32,
    pub to: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum AicDocument {
    Flat(Vec<AicEntry>),
    Annotated {
        partitions: Vec<Partition>,
        dependencies: Vec<Dependency>,
    },
}

impl AicDocument {
    pub fn entries(&self) -> Vec<&AicEntry> {
        match self {
            AicDocument::Flat(entries) => entries.iter().collect(),
            AicDocument::Annotated { partitions, .. } => {
                partitions.iter().flat_map(|p| p.aics.iter()).collect()
            }
        }
    }

    pub fn aics(&self) -> Vec<Aic> {
        self.entries().into_iter().map(|e| e.aic.clone()).collect()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("{line}:{col}: {message}")]
    Syntax { line: usize, col: usize, message: String },
    #[error("{line}:{col}: invalid constraint: {source}")]
    InvalidRule {
        line: usize,
        col: usize,
        #[source]
        source: AicError,
    },
    #[error("duplicate partition id {id}")]
    DuplicatePartition { id: u32 },
    #[error("dependency `{from} -> {to}` references undeclared partition {missing}")]
    DanglingDependency { from: u32, to: u32, missing: u32 },
    #[error("partition dependencies contain a cycle")]
    CyclicDependencies,
}

const PARTITION_BEGIN: &str = "#PARTITION_BEGIN_";
const PARTITION_END: &str = "#PARTITION_END#";
const DEPENDENCIES_BEGIN: &str = "#DEPENDENCIES_BEGIN#";
const DEPENDENCIES_END: &str = "#DEPENDENCIES_END#";

fn is_comment(line: &str) -> bool {
    line.trim_start().starts_with("--")
}

/// Parses a constraint document, flat or annotated.
pub fn parse(text: &str) -> Result<AicDocument, ParseError> {
    let annotated = text
        .lines()
        .any(|l| !is_comment(l) && l.trim().starts_with(PARTITION_BEGIN));
    if annotated {
        parse_annotated(text)
    } else {
        Ok(AicDocument::Flat(parse_aics(text, 0)?))
    }
}

fn parse_annotated(text: &str) -> Result<AicDocument, ParseError> {
    let lines: Vec<&str> = text.lines().collect();
    let mut partitions: Vec<Partition> = Vec::new();
    let mut dependencies: Vec<Dependency> = Vec::new();
    let mut seen_ids: BTreeSet<u32> = BTreeSet::new();
    let mut i = 0;
    while i < lines.len() {
        let line = lines[i];
        let trimmed = line.trim();
        if trimmed.is_empty() || is_comment(line) {
            i += 1;
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix(PARTITION_BEGIN) {
            let id: u32 = rest
                .strip_suffix('#')
                .and_then(|n| n.parse().ok())
                .filter(|n| *n > 0)
                .ok_or_else(|| ParseError::Syntax {
                    line: i + 1,
                    col: 1,
                    message: format!("malformed partition marker `{trimmed}`"),
                })?;
            if !seen_ids.insert(id) {
                return Err(ParseError::DuplicatePartition { id });
            }
            let start = i + 1;
            let end = (start..lines.len())
                .find(|&j| lines[j].trim() == PARTITION_END)
                .ok_or_else(|| ParseError::Syntax {
                    line: i + 1,
                    col: 1,
                    message: format!("partition {id} is not closed by {PARTITION_END}"),
                })?;
            let block = lines[start..end].join("\n");
            let aics = parse_aics(&block, start)?;
            partitions.push(Partition { id, aics });
            i = end + 1;
        } else if trimmed == DEPENDENCIES_BEGIN {
            let start = i + 1;
            let end = (start..lines.len())
                .find(|&j| lines[j].trim() == DEPENDENCIES_END)
                .ok_or_else(|| ParseError::Syntax {
                    line: i + 1,
                    col: 1,
                    message: format!("dependency section is not closed by {DEPENDENCIES_END}"),
                })?;
            for (j, raw) in lines.iter().enumerate().take(end).skip(start) {
                let dep = raw.trim();
                if dep.is_empty() || is_comment(raw) {
                    continue;
                }
                let parts: Vec<&str> = dep.split("->").map(str::trim).collect();
                let parsed = match parts.as_slice() {
                    [x, y] => x.parse::<u32>().ok().zip(y.parse::<u32>().ok()),
                    _ => None,
                };
                let (from, to) = parsed.ok_or_else(|| ParseError::Syntax {
                    line: j + 1,
                    col: 1,
                    message: format!("malformed dependency line `{dep}`"),
                })?;
                dependencies.push(Dependency { from, to });
            }
            i = end + 1;
        } else {
            return Err(ParseError::Syntax {
                line: i + 1,
                col: 1,
                message: format!("unexpected content outside partition markers: `{trimmed}`"),
            });
        }
    }
    for dep in &dependencies {
        for endpoint in [dep.from, dep.to] {
            if !seen_ids.contains(&endpoint) {
                return Err(ParseError::DanglingDependency {
                    from: dep.from,
                    to: dep.to,
                    missing: endpoint,
                });
            }
        }
    }
    check_acyclic(&seen_ids, &dependencies)?;
    Ok(AicDocument::Annotated { partitions, dependencies })
}

/// Kahn's algorithm over the precedes relation (`to` before `from`).
fn check_acyclic(ids: &BTreeSet<u32>, deps: &[Dependency]) -> Result<(), ParseError> {
    let mut incoming: BTreeMap<u32, usize> = ids.iter().map(|&id| (id, 0)).collect();
    let mut successors: BTreeMap<u32, Vec<u32>> = BTreeMap::new();
    for dep in deps {
        successors.entry(dep.to).or_default().push(dep.from);
        *incoming.get_mut(&dep.from).unwrap() += 1;
    }
    let mut ready: Vec<u32> = incoming
        .iter()
        .filter(|(_, &n)| n == 0)
        .map(|(&id, _)| id)
        .collect();
    let mut done = 0;
    while let Some(id) = ready.pop() {
        done += 1;
        for &next in successors.get(&id).into_iter().flatten() {
            let n = incoming.get_mut(&next).unwrap();
            *n -= 1;
            if *n == 0 {
                ready.push(next);
            }
        }
    }
    if done == ids.len() {
        Ok(())
    } else {
        Err(ParseError::CyclicDependencies)
    }
}

/// Serializes a document so that `parse(serialize(doc))` equals `doc`.
/// Annotated output uses the exact marker strings; constraints keep their
/// original text when they were parsed from a file.
pub fn serialize(doc: &AicDocument) -> String {
    let mut out = String::new();
    match doc {
        AicDocument::Flat(entries) => {
            for (i, entry) in entries.iter().enumerate() {
                if i > 0 {
                    out.push('\n');
                }
                out.push_str(&entry.text());
                out.push('\n');
            }
        }
        AicDocument::Annotated { partitions, dependencies } => {
            for partition in partitions {
                out.push_str(PARTITION_BEGIN);
                out.push_str(&partition.id.to_string());
                out.push_str("#\n");
                for entry in &partition.aics {
                    out.push_str(&entry.text());
                    out.push('\n');
                }
                out.push_str(PARTITION_END);
                out.push('\n');
            }
            if !dependencies.is_empty() {
                out.push_str(DEPENDENCIES_BEGIN);
                out.push('\n');
                for dep in dependencies {
                    out.push_str(&format!("{} -> {}\n", dep.from, dep.to));
                }
                out.push_str(DEPENDENCIES_END);
                out.push('\n');
            }
        }
    }
    out
}

/// Canonical single-line rendering of a constraint.
pub fn render_aic(aic: &Aic) -> String {
    let body: Vec<String> = aic.body().iter().map(|l| l.to_string()).collect();
    let head: Vec<String> = aic.head().iter().map(|a| a.to_string()).collect();
    format!("{} -> {};", body.join(", "), head.join(", "))
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Word(String),
    Quoted(String),
    Var(String),
    LParen,
    RParen,
    Comma,
    Semi,
    Eq,
    Arrow,
    Plus,
    Minus,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Word(w) => write!(f, "`{w}`"),
            Tok::Quoted(q) => write!(f, "'{q}'"),
            Tok::Var(v) => write!(f, "`${v}`"),
            Tok::LParen => write!(f, "`(`"),
            Tok::RParen => write!(f, "`)`"),
            Tok::Comma => write!(f, "`,`"),
            Tok::Semi => write!(f, "`;`"),
            Tok::Eq => write!(f, "`=`"),
            Tok::Arrow => write!(f, "`->`"),
            Tok::Plus => write!(f, "`+`"),
            Tok::Minus => write!(f, "`-`"),
        }
    }
}

#[derive(Clone, Debug)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
    start: usize,
    end: usize,
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

struct Lexer<'a> {
    text: &'a str,
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    line: usize,
    col: usize,
    line_base: usize,
    at_line_start: bool,
}

impl<'a> Lexer<'a> {
    fn new(text: &'a str, line_base: usize) -> Self {
        Lexer {
            text,
            chars: text.char_indices().peekable(),
            line: 1,
            col: 1,
            line_base,
            at_line_start: true,
        }
    }

    fn error(&self, line: usize, col: usize, message: String) -> ParseError {
        ParseError::Syntax { line: line + self.line_base, col, message }
    }

    fn bump(&mut self) -> Option<(usize, char)> {
        let next = self.chars.next();
        if let Some((_, c)) = next {
            if c == '\n' {
                self.line += 1;
                self.col = 1;
                self.at_line_start = true;
            } else {
                self.col += 1;
                if !c.is_whitespace() {
                    self.at_line_start = false;
                }
            }
        }
        next
    }

    fn tokenize(mut self) -> Result<Vec<Token>, ParseError> {
        let mut tokens = Vec::new();
        while let Some(&(pos, c)) = self.chars.peek() {
            if c.is_whitespace() {
                self.bump();
                continue;
            }
            if self.at_line_start && self.text[pos..].starts_with("--") {
                while let Some(&(_, c)) = self.chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
                continue;
            }
            let (line, col) = (self.line, self.col);
            let (start, c) = self.bump().unwrap();
            let tok = match c {
                '(' => Tok::LParen,
                ')' => Tok::RParen,
                ',' => Tok::Comma,
                ';' => Tok::Semi,
                '=' => Tok::Eq,
                '+' => Tok::Plus,
                '-' => {
                    if matches!(self.chars.peek(), Some(&(_, '>'))) {
                        self.bump();
                        Tok::Arrow
                    } else {
                        Tok::Minus
                    }
                }
                '$' => {
                    let name = self.take_word();
                    if name.is_empty() {
                        return Err(self.error(line, col, "expected variable name after `$`".into()));
                    }
                    Tok::Var(name)
                }
                '\'' => {
                    let mut value = String::new();
                    loop {
                        match self.bump() {
                            Some((_, '\'')) => {
                                // Doubled quote is an escaped quote.
                                if matches!(self.chars.peek(), Some(&(_, '\''))) {
                                    self.bump();
                                    value.push('\'');
                                } else {
                                    break;
                                }
                            }
                            Some((_, '\n')) | None => {
                                return Err(self.error(line, col, "unterminated quoted constant".into()));
                            }
                            Some((_, c)) => value.push(c),
                        }
                    }
                    Tok::Quoted(value)
                }
                c if is_word_char(c) => {
                    let mut word = String::from(c);
                    word.push_str(&self.take_word());
                    Tok::Word(word)
                }
                other => {
                    return Err(self.error(line, col, format!("unexpected character `{other}`")));
                }
            };
            let end = self
                .chars
                .peek()
                .map(|&(p, _)| p)
                .unwrap_or(self.text.len());
            tokens.push(Token { tok, line: line + self.line_base, col, start, end });
        }
        Ok(tokens)
    }

    fn take_word(&mut self) -> String {
        let mut word = String::new();
        while let Some(&(_, c)) = self.chars.peek() {
            if is_word_char(c) {
                word.push(c);
                self.bump();
            } else {
                break;
            }
        }
        word
    }
}

struct Parser<'a> {
    text: &'a str,
    tokens: Vec<Token>,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<&Token> {
        let t = self.tokens.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eof_error(&self, expected: &str) -> ParseError {
        let (line, col) = self
            .tokens
            .last()
            .map(|t| (t.line, t.col))
            .unwrap_or((1, 1));
        ParseError::Syntax { line, col, message: format!("expected {expected}, found end of input") }
    }

    fn expect(&mut self, tok: Tok) -> Result<(), ParseError> {
        match self.next() {
            Some(t) if t.tok == tok => Ok(()),
            Some(t) => Err(ParseError::Syntax {
                line: t.line,
                col: t.col,
                message: format!("expected {tok}, found {}", t.tok),
            }),
            None => Err(self.eof_error(&tok.to_string())),
        }
    }

    fn expect_word(&mut self, what: &str) -> Result<(String, usize, usize), ParseError> {
        match self.next() {
            Some(t) => match &t.tok {
                Tok::Word(w) => Ok((w.clone(), t.line, t.col)),
                other => Err(ParseError::Syntax {
                    line: t.line,
                    col: t.col,
                    message: format!("expected {what}, found {other}"),
                }),
            },
            None => Err(self.eof_error(what)),
        }
    }

    fn parse_atom(&mut self) -> Result<AtomPattern, ParseError> {
        let (table, _, _) = self.expect_word("table name")?;
        self.expect(Tok::LParen)?;
        let mut bindings: Vec<(String, Term)> = Vec::new();
        if matches!(self.peek().map(|t| &t.tok), Some(Tok::RParen)) {
            self.next();
            return Ok(AtomPattern::new(table, bindings));
        }
        loop {
            let (column, line, col) = self.expect_word("column name")?;
            self.expect(Tok::Eq)?;
            let term = match self.next() {
                Some(t) => match &t.tok {
                    Tok::Word(w) => Term::constant(w.clone()),
                    Tok::Quoted(q) => Term::constant(q.clone()),
                    Tok::Var(v) => Term::var(v.clone()),
                    other => {
                        return Err(ParseError::Syntax {
                            line: t.line,
                            col: t.col,
                            message: format!("expected value, found {other}"),
                        })
                    }
                },
                None => return Err(self.eof_error("value")),
            };
            if bindings.iter().any(|(c, _)| *c == column) {
                return Err(ParseError::Syntax {
                    line,
                    col,
                    message: format!("column `{column}` bound twice in `{table}`"),
                });
            }
            bindings.push((column, term));
            match self.next() {
                Some(t) if t.tok == Tok::Comma => continue,
                Some(t) if t.tok == Tok::RParen => break,
                Some(t) => {
                    return Err(ParseError::Syntax {
                        line: t.line,
                        col: t.col,
                        message: format!("expected `,` or `)`, found {}", t.tok),
                    })
                }
                None => return Err(self.eof_error("`,` or `)`")),
            }
        }
        Ok(AtomPattern::new(table, bindings))
    }

    fn parse_literal(&mut self) -> Result<Literal, ParseError> {
        let negated = match self.peek() {
            Some(t) if t.tok == Tok::Word("NOT".into()) => {
                self.next();
                true
            }
            _ => false,
        };
        let atom = self.parse_atom()?;
        Ok(if negated {
            Literal::negative(atom)
        } else {
            Literal::positive(atom)
        })
    }

    fn parse_action(&mut self) -> Result<UpdateAction, ParseError> {
        match self.next() {
            Some(t) if t.tok == Tok::Plus => Ok(UpdateAction::insert(self.parse_atom()?)),
            Some(t) if t.tok == Tok::Minus => Ok(UpdateAction::delete(self.parse_atom()?)),
            Some(t) => Err(ParseError::Syntax {
                line: t.line,
                col: t.col,
                message: format!("expected `+` or `-`, found {}", t.tok),
            }),
            None => Err(self.eof_error("`+` or `-`")),
        }
    }

    fn parse_aic(&mut self) -> Result<AicEntry, ParseError> {
        let start_tok = self.peek().expect("caller checked").clone();
        let mut body = vec![self.parse_literal()?];
        loop {
            match self.next() {
                Some(t) if t.tok == Tok::Comma => body.push(self.parse_literal()?),
                Some(t) if t.tok == Tok::Arrow => break,
                Some(t) => {
                    return Err(ParseError::Syntax {
                        line: t.line,
                        col: t.col,
                        message: format!("expected `,` or `->`, found {}", t.tok),
                    })
                }
                None => return Err(self.eof_error("`,` or `->`")),
            }
        }
        let mut head = vec![self.parse_action()?];
        let end = loop {
            match self.next() {
                Some(t) if t.tok == Tok::Comma => head.push(self.parse_action()?),
                Some(t) if t.tok == Tok::Semi => break t.end,
                Some(t) => {
                    return Err(ParseError::Syntax {
                        line: t.line,
                        col: t.col,
                        message: format!("expected `,` or `;`, found {}", t.tok),
                    })
                }
                None => return Err(self.eof_error("`,` or `;`")),
            }
        };
        let aic = Aic::new(body, head).map_err(|source| ParseError::InvalidRule {
            line: start_tok.line,
            col: start_tok.col,
            source,
        })?;
        let source = self.text[start_tok.start..end].to_string();
        Ok(AicEntry { aic, source: Some(source) })
    }
}

fn parse_aics(text: &str, line_base: usize) -> Result<Vec<AicEntry>, ParseError> {
    let tokens = Lexer::new(text, line_base).tokenize()?;
    let mut parser = Parser { text, tokens, pos: 0 };
    let mut entries = Vec::new();
    while parser.peek().is_some() {
        entries.push(parser.parse_aic()?);
    }
    Ok(entries)
}
