//! Text syntax for polynomials.
//!
//! ```text
//! expr     := term (('+' | '-') term)*
//! term     := factor ('*' factor)*
//! factor   := ['-'] atom ['^' uint]
//! atom     := rational | ident | '(' expr ')'
//! rational := int ['/' uint]
//! ident    := letter (letter | digit | '_')* ["'" ["'"]]
//! ```
//!
//! Unary minus binds looser than `^`, so `-f^2` is `-(f^2)`. There is no
//! implicit multiplication and `/` only appears inside rational literals.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::chart::JetChart;
use crate::expr::{Expr, Rational};

/// Largest accepted exponent after `^`.
pub const MAX_EXPONENT: u32 = 64;
const MAX_NESTING: usize = 256;
const MAX_POWER_TERMS: u64 = 20_000;

/// Upper bound on the term count of `base^e`: monomials of degree at most
/// `deg * e` in the variables of `base`.
fn power_too_large(base: &Expr, e: u32) -> bool {
    if base.num_terms() <= 1 || e <= 1 {
        return false;
    }
    let nvars = base.variables().len() as u64;
    let degree = base.total_degree() as u64 * e as u64;
    // C(nvars + degree, nvars), saturating.
    let mut bound: u64 = 1;
    for i in 1..=nvars {
        bound = bound.saturating_mul(degree + i) / i;
        if bound > MAX_POWER_TERMS {
            return true;
        }
    }
    false
}

/// Byte range into the parsed input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SourceSpan {
    pub begin: usize,
    pub end: usize,
}

impl SourceSpan {
    pub fn new(begin: usize, end: usize) -> Self {
        debug_assert!(begin <= end);
        SourceSpan { begin, end }
    }

    pub fn shifted(self, offset: usize) -> Self {
        SourceSpan::new(self.begin + offset, self.end + offset)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ParseErrorKind {
    UnexpectedToken,
    UnknownIdentifier,
    BadNumber,
    UnmatchedParenthesis,
    EmptyInput,
    // System-file level.
    MissingSection,
    UnknownSection,
    UnknownKey,
    DuplicateKey,
    DuplicateField,
    UnknownField,
    MissingGenerator,
    InvalidValue,
}

impl fmt::Display for ParseErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ParseErrorKind::UnexpectedToken => "unexpected token",
            ParseErrorKind::UnknownIdentifier => "unknown identifier",
            ParseErrorKind::BadNumber => "bad number",
            ParseErrorKind::UnmatchedParenthesis => "unmatched parenthesis",
            ParseErrorKind::EmptyInput => "empty input",
            ParseErrorKind::MissingSection => "missing section",
            ParseErrorKind::UnknownSection => "unknown section",
            ParseErrorKind::UnknownKey => "unknown key",
            ParseErrorKind::DuplicateKey => "duplicate key",
            ParseErrorKind::DuplicateField => "duplicate field",
            ParseErrorKind::UnknownField => "unknown field",
            ParseErrorKind::MissingGenerator => "missing generator",
            ParseErrorKind::InvalidValue => "invalid value",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{kind} at {}..{}: {message}", span.begin, span.end)]
pub struct ParseError {
    pub span: SourceSpan,
    pub kind: ParseErrorKind,
    pub message: String,
}

impl ParseError {
    pub fn new(kind: ParseErrorKind, span: SourceSpan, message: impl Into<String>) -> Self {
        ParseError {
            span,
            kind,
            message: message.into(),
        }
    }

    pub fn shifted(mut self, offset: usize) -> Self {
        self.span = self.span.shifted(offset);
        self
    }

    /// 1-based line and column of the span start within `source`.
    pub fn line_col(&self, source: &str) -> (usize, usize) {
        let upto = &source[..self.span.begin.min(source.len())];
        let line = upto.matches('\n').count() + 1;
        let col = upto.rfind('\n').map_or(upto.len(), |i| upto.len() - i - 1) + 1;
        (line, col)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Int(BigInt),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Int(n) => format!("number `{n}`"),
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
            Tok::Star => "`*`".into(),
            Tok::Slash => "`/`".into(),
            Tok::Caret => "`^`".into(),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn lex(text: &str) -> Result<Vec<(Tok, SourceSpan)>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let start = i;
        let single = match b {
            b'+' => Some(Tok::Plus),
            b'-' => Some(Tok::Minus),
            b'*' => Some(Tok::Star),
            b'/' => Some(Tok::Slash),
            b'^' => Some(Tok::Caret),
            b'(' => Some(Tok::LParen),
            b')' => Some(Tok::RParen),
            _ => None,
        };
        if let Some(tok) = single {
            out.push((tok, SourceSpan::new(i, i + 1)));
            i += 1;
            continue;
        }
        if b.is_ascii_whitespace() {
            i += 1;
        } else if b.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let n: BigInt = text[start..i].parse().expect("ascii digits");
            out.push((Tok::Int(n), SourceSpan::new(start, i)));
        } else if b.is_ascii_alphabetic() {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            let mut primes = 0;
            while i < bytes.len() && bytes[i] == b'\'' {
                primes += 1;
                if primes > 2 {
                    return Err(ParseError::new(
                        ParseErrorKind::UnexpectedToken,
                        SourceSpan::new(i, i + 1),
                        "at most two apostrophes (second jet) are supported",
                    ));
                }
                i += 1;
            }
            out.push((Tok::Ident(text[start..i].to_string()), SourceSpan::new(start, i)));
        } else {
            let ch = text[start..].chars().next().expect("non-empty remainder");
            let end = start + ch.len_utf8();
            return Err(ParseError::new(
                ParseErrorKind::UnexpectedToken,
                SourceSpan::new(start, end),
                format!("unexpected character {ch:?}"),
            ));
        }
    }
    out.push((Tok::Eof, SourceSpan::new(text.len(), text.len())));
    Ok(out)
}

struct Parser<'a> {
    toks: Vec<(Tok, SourceSpan)>,
    pos: usize,
    chart: &'a JetChart,
    depth: usize,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].0
    }

    fn span(&self) -> SourceSpan {
        self.toks[self.pos].1
    }

    fn bump(&mut self) -> (Tok, SourceSpan) {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn unexpected(&self, wanted: &str) -> ParseError {
        let tok = self.peek();
        let kind = if *tok == Tok::RParen {
            ParseErrorKind::UnmatchedParenthesis
        } else {
            ParseErrorKind::UnexpectedToken
        };
        ParseError::new(
            kind,
            self.span(),
            format!("expected {wanted}, found {}", tok.describe()),
        )
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    acc = acc + self.term()?;
                }
                Tok::Minus => {
                    self.bump();
                    acc = acc - self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut acc = self.factor()?;
        while *self.peek() == Tok::Star {
            self.bump();
            acc = acc * self.factor()?;
        }
        Ok(acc)
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        let negate = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        let mut base = self.atom()?;
        if *self.peek() == Tok::Caret {
            self.bump();
            let (tok, span) = self.bump();
            let n = match tok {
                Tok::Int(n) => n,
                other => {
                    return Err(ParseError::new(
                        ParseErrorKind::UnexpectedToken,
                        span,
                        format!("expected exponent, found {}", other.describe()),
                    ))
                }
            };
            let e = u32::try_from(&n).ok().filter(|&e| e <= MAX_EXPONENT).ok_or_else(|| {
                ParseError::new(
                    ParseErrorKind::BadNumber,
                    span,
                    format!("exponent {n} exceeds the limit of {MAX_EXPONENT}"),
                )
            })?;
            if power_too_large(&base, e) {
                return Err(ParseError::new(
                    ParseErrorKind::BadNumber,
                    span,
                    format!("power would exceed {MAX_POWER_TERMS} terms"),
                ));
            }
            base = base.pow(e);
        }
        Ok(if negate { -base } else { base })
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let span = self.span();
        match self.peek().clone() {
            Tok::Int(num) => {
                self.bump();
                if *self.peek() == Tok::Slash {
                    self.bump();
                    let (tok, dspan) = self.bump();
                    let den = match tok {
                        Tok::Int(d) => d,
                        other => {
                            return Err(ParseError::new(
                                ParseErrorKind::UnexpectedToken,
                                dspan,
                                format!("expected denominator, found {}", other.describe()),
                            ))
                        }
                    };
                    if den.is_zero() {
                        return Err(ParseError::new(
                            ParseErrorKind::BadNumber,
                            SourceSpan::new(span.begin, dspan.end),
                            "zero denominator",
                        ));
                    }
                    Ok(self.chart.constant(Rational::new(num, den)))
                } else {
                    Ok(self.chart.constant(Rational::from_integer(num)))
                }
            }
            Tok::Ident(name) => {
                self.bump();
                match self.chart.lookup(&name) {
                    Some(v) => Ok(self.chart.var(v)),
                    None => Err(ParseError::new(
                        ParseErrorKind::UnknownIdentifier,
                        span,
                        format!("unknown identifier `{name}`"),
                    )),
                }
            }
            Tok::LParen => {
                self.bump();
                self.depth += 1;
                if self.depth > MAX_NESTING {
                    return Err(ParseError::new(
                        ParseErrorKind::UnexpectedToken,
                        span,
                        "parentheses nested too deeply",
                    ));
                }
                let inner = self.expr()?;
                self.depth -= 1;
                if *self.peek() == Tok::RParen {
                    self.bump();
                    Ok(inner)
                } else {
                    Err(ParseError::new(
                        ParseErrorKind::UnmatchedParenthesis,
                        span,
                        "`(` is never closed",
                    ))
                }
            }
            _ => Err(self.unexpected("a number, identifier or `(`")),
        }
    }
}

/// Parses `text` against the variables of `chart`.
pub fn parse_expr(text: &str, chart: &JetChart) -> Result<Expr, ParseError> {
    if text.trim().is_empty() {
        return Err(ParseError::new(
            ParseErrorKind::EmptyInput,
            SourceSpan::new(0, text.len()),
            "expected an expression",
        ));
    }
    let toks = lex(text)?;
    let mut p = Parser {
        toks,
        pos: 0,
        chart,
        depth: 0,
    };
    let e = p.expr()?;
    if *p.peek() != Tok::Eof {
        return Err(p.unexpected("an operator or end of input"));
    }
    Ok(e)
}

fn write_rational(out: &mut String, r: &Rational) {
    out.push_str(&r.numer().to_string());
    if !r.denom().is_one() {
        out.push('/');
        out.push_str(&r.denom().to_string());
    }
}

/// Canonical text: terms in descending monomial order, coefficient first,
/// factors in variable order. Re-parses to the same expression.
pub fn render_expr(e: &Expr, chart: &JetChart) -> String {
    if e.is_zero() {
        return "0".to_string();
    }
    let mut out = String::new();
    for (i, (m, c)) in e.terms().rev().enumerate() {
        let negative = c.is_negative();
        match (i, negative) {
            (0, true) => out.push('-'),
            (0, false) => {}
            (_, true) => out.push_str(" - "),
            (_, false) => out.push_str(" + "),
        }
        let mag = c.abs();
        if m.is_one() {
            write_rational(&mut out, &mag);
            continue;
        }
        if !mag.is_one() {
            write_rational(&mut out, &mag);
            out.push('*');
        }
        for (k, &(v, exp)) in m.factors().iter().enumerate() {
            if k > 0 {
                out.push('*');
            }
            out.push_str(chart.name(v));
            if exp > 1 {
                out.push('^');
                out.push_str(&exp.to_string());
            }
        }
    }
    out
}
