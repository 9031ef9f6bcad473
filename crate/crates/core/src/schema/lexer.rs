//! Line-oriented tokenizer. Each non-blank line becomes its indentation width
//! plus a token list; `#` starts a comment outside string literals.

use super::{Span, SyntaxError};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Str(String),
    Int(i64),
    Float(f64),
    LParen,
    RParen,
    Comma,
    Dot,
    Colon,
    Eq,
    Plus,
    Minus,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Int(i) => format!("number {i}"),
            Tok::Float(f) => format!("number {f}"),
            Tok::LParen => "`(`".into(),
            Tok::RParen => "`)`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Dot => "`.`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Minus => "`-`".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub span: Span,
}

#[derive(Debug)]
pub(crate) struct Line {
    pub number: u32,
    pub indent: usize,
    pub tokens: Vec<Token>,
    /// Column just past the last token, for "expected X at end of line".
    pub end_col: u32,
}

fn is_ident_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_'
}

fn is_ident_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

/// Tokenizes the whole text, dropping blank and comment-only lines.
pub(crate) fn lex(text: &str) -> Result<Vec<Line>, SyntaxError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let number = i as u32 + 1;
        if let Some(line) = lex_line(raw, number)? {
            out.push(line);
        }
    }
    Ok(out)
}

pub(crate) fn lex_line(raw: &str, number: u32) -> Result<Option<Line>, SyntaxError> {
    let chars: Vec<char> = raw.chars().collect();
    let mut pos = 0;
    while pos < chars.len() && chars[pos] == ' ' {
        pos += 1;
    }
    let indent = pos;
    if chars.get(pos) == Some(&'\t') {
        return Err(SyntaxError::new(
            "tab character in indentation; indent with spaces",
            Span::new(number, pos as u32 + 1),
        ));
    }

    let mut tokens = Vec::new();
    while pos < chars.len() {
        let c = chars[pos];
        let span = Span::new(number, pos as u32 + 1);
        let simple = match c {
            ' ' | '\t' | '\r' => {
                pos += 1;
                continue;
            }
            '#' => break,
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            ',' => Some(Tok::Comma),
            '.' => Some(Tok::Dot),
            ':' => Some(Tok::Colon),
            '=' => Some(Tok::Eq),
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            _ => None,
        };
        if let Some(tok) = simple {
            tokens.push(Token { tok, span });
            pos += 1;
            continue;
        }

        if c == '"' {
            pos += 1;
            let mut s = String::new();
            loop {
                match chars.get(pos) {
                    None => return Err(SyntaxError::new("unterminated string literal", span)),
                    Some('"') => {
                        pos += 1;
                        break;
                    }
                    Some('\\') => match chars.get(pos + 1) {
                        Some(&e @ ('"' | '\\')) => {
                            s.push(e);
                            pos += 2;
                        }
                        Some(other) => {
                            return Err(SyntaxError::new(
                                format!("unknown escape `\\{other}` in string literal"),
                                Span::new(number, pos as u32 + 1),
                            ))
                        }
                        None => return Err(SyntaxError::new("unterminated string literal", span)),
                    },
                    Some(&ch) => {
                        s.push(ch);
                        pos += 1;
                    }
                }
            }
            tokens.push(Token { tok: Tok::Str(s), span });
            continue;
        }

        if c.is_ascii_digit() {
            let start = pos;
            while pos < chars.len() && chars[pos].is_ascii_digit() {
                pos += 1;
            }
            let mut is_float = false;
            if chars.get(pos) == Some(&'.') && chars.get(pos + 1).is_some_and(|d| d.is_ascii_digit()) {
                is_float = true;
                pos += 1;
                while pos < chars.len() && chars[pos].is_ascii_digit() {
                    pos += 1;
                }
            }
            if matches!(chars.get(pos), Some('e' | 'E')) {
                let mut p = pos + 1;
                if matches!(chars.get(p), Some('+' | '-')) {
                    p += 1;
                }
                if chars.get(p).is_some_and(|d| d.is_ascii_digit()) {
                    is_float = true;
                    pos = p;
                    while pos < chars.len() && chars[pos].is_ascii_digit() {
                        pos += 1;
                    }
                }
            }
            if chars.get(pos).is_some_and(|&ch| is_ident_char(ch)) {
                return Err(SyntaxError::new("malformed number", span));
            }
            let text: String = chars[start..pos].iter().collect();
            let tok = if is_float {
                Tok::Float(text.parse().map_err(|_| SyntaxError::new("malformed number", span))?)
            } else {
                Tok::Int(
                    text.parse()
                        .map_err(|_| SyntaxError::new("integer literal out of range", span))?,
                )
            };
            tokens.push(Token { tok, span });
            continue;
        }

        if is_ident_start(c) {
            let start = pos;
            while pos < chars.len() && is_ident_char(chars[pos]) {
                pos += 1;
            }
            tokens.push(Token {
                tok: Tok::Ident(chars[start..pos].iter().collect()),
                span,
            });
            continue;
        }

        return Err(SyntaxError::new(format!("unexpected character `{c}`"), span));
    }

    if tokens.is_empty() {
        return Ok(None);
    }
    let end_col = {
        let trimmed = raw.split('#').next().unwrap_or(raw);
        // Close enough for diagnostics even when a string holds a `#`.
        trimmed.trim_end().chars().count().max(indent) as u32 + 1
    };
    Ok(Some(Line {
        number,
        indent,
        tokens,
        end_col,
    }))
}
