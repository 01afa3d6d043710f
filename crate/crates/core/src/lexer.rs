//! Tokenizer shared by the model and scenario file formats.
//!
//! Both formats are whitespace-insensitive sequences of identifiers, numbers
//! and a handful of punctuation marks. `#` starts a comment that runs to the
//! end of the line.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum Tok {
    Ident(String),
    Number(f64),
    LBrace,
    RBrace,
    Eq,
    Arrow,
    Plus,
    Star,
    Comma,
    Colon,
    Dot,
}

impl Tok {
    pub(crate) fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("`{s}`"),
            Tok::Number(n) => format!("number {n}"),
            Tok::LBrace => "`{`".into(),
            Tok::RBrace => "`}`".into(),
            Tok::Eq => "`=`".into(),
            Tok::Arrow => "`->`".into(),
            Tok::Plus => "`+`".into(),
            Tok::Star => "`*`".into(),
            Tok::Comma => "`,`".into(),
            Tok::Colon => "`:`".into(),
            Tok::Dot => "`.`".into(),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Spanned {
    pub tok: Tok,
    pub line: usize,
    pub column: usize,
}

pub(crate) fn is_ident(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub(crate) fn tokenize(text: &str) -> Result<Vec<Spanned>> {
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line_no = lineno + 1;
        let chars: Vec<char> = line.chars().collect();
        let mut i = 0;
        while i < chars.len() {
            let c = chars[i];
            let column = i + 1;
            let push = |out: &mut Vec<Spanned>, tok| {
                out.push(Spanned {
                    tok,
                    line: line_no,
                    column,
                })
            };
            match c {
                '#' => break,
                c if c.is_whitespace() => i += 1,
                '{' => {
                    push(&mut out, Tok::LBrace);
                    i += 1;
                }
                '}' => {
                    push(&mut out, Tok::RBrace);
                    i += 1;
                }
                '=' => {
                    push(&mut out, Tok::Eq);
                    i += 1;
                }
                '+' => {
                    push(&mut out, Tok::Plus);
                    i += 1;
                }
                '*' => {
                    push(&mut out, Tok::Star);
                    i += 1;
                }
                ',' => {
                    push(&mut out, Tok::Comma);
                    i += 1;
                }
                ':' => {
                    push(&mut out, Tok::Colon);
                    i += 1;
                }
                '.' if !chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) => {
                    push(&mut out, Tok::Dot);
                    i += 1;
                }
                '-' if chars.get(i + 1) == Some(&'>') => {
                    push(&mut out, Tok::Arrow);
                    i += 2;
                }
                c if c.is_ascii_alphabetic() || c == '_' => {
                    let start = i;
                    while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                        i += 1;
                    }
                    push(&mut out, Tok::Ident(chars[start..i].iter().collect()));
                }
                c if c.is_ascii_digit() || c == '-' || c == '.' => {
                    let start = i;
                    i += 1;
                    while i < chars.len() {
                        let d = chars[i];
                        let exp_sign =
                            (d == '-' || d == '+') && matches!(chars[i - 1], 'e' | 'E');
                        if d.is_ascii_digit() || d == '.' || d == 'e' || d == 'E' || exp_sign {
                            i += 1;
                        } else {
                            break;
                        }
                    }
                    let lexeme: String = chars[start..i].iter().collect();
                    let value: f64 = lexeme.parse().map_err(|_| Error::Parse {
                        line: line_no,
                        column,
                        message: format!("malformed number `{lexeme}`"),
                    })?;
                    if !value.is_finite() {
                        return Err(Error::Parse {
                            line: line_no,
                            column,
                            message: format!("non-finite number `{lexeme}`"),
                        });
                    }
                    push(&mut out, Tok::Number(value));
                }
                other => {
                    return Err(Error::Parse {
                        line: line_no,
                        column,
                        message: format!("unexpected character `{other}`"),
                    })
                }
            }
        }
    }
    Ok(out)
}

/// Cursor over a token stream with positional error reporting.
pub(crate) struct Cursor {
    toks: Vec<Spanned>,
    pos: usize,
    eof_line: usize,
}

impl Cursor {
    pub(crate) fn new(text: &str) -> Result<Self> {
        let toks = tokenize(text)?;
        Ok(Self {
            toks,
            pos: 0,
            eof_line: text.lines().count().max(1),
        })
    }

    pub(crate) fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|s| &s.tok)
    }

    pub(crate) fn at_end(&self) -> bool {
        self.pos >= self.toks.len()
    }

    pub(crate) fn error_here(&self, message: impl Into<String>) -> Error {
        let (line, column) = match self.toks.get(self.pos) {
            Some(s) => (s.line, s.column),
            None => (self.eof_line, 1),
        };
        Error::Parse {
            line,
            column,
            message: message.into(),
        }
    }

    fn found(&self) -> String {
        self.peek()
            .map(Tok::describe)
            .unwrap_or_else(|| "end of input".into())
    }

    pub(crate) fn expect(&mut self, tok: Tok) -> Result<()> {
        if self.peek() == Some(&tok) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error_here(format!("expected {}, found {}", tok.describe(), self.found())))
        }
    }

    pub(crate) fn eat(&mut self, tok: &Tok) -> bool {
        if self.peek() == Some(tok) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub(crate) fn eat_keyword(&mut self, kw: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Ident(s)) if s == kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    pub(crate) fn ident(&mut self, what: &str) -> Result<String> {
        match self.peek() {
            Some(Tok::Ident(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            _ => Err(self.error_here(format!("expected {what}, found {}", self.found()))),
        }
    }

    /// Dotted state path such as `Phone.audio.AudioStandby`.
    pub(crate) fn qualified_ident(&mut self, what: &str) -> Result<String> {
        let mut name = self.ident(what)?;
        while self.eat(&Tok::Dot) {
            name.push('.');
            name.push_str(&self.ident(what)?);
        }
        Ok(name)
    }

    pub(crate) fn number(&mut self, what: &str) -> Result<f64> {
        match self.peek() {
            Some(Tok::Number(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(n)
            }
            _ => Err(self.error_here(format!("expected {what}, found {}", self.found()))),
        }
    }

    /// Position of the token about to be consumed, for semantic errors.
    pub(crate) fn position(&self) -> (usize, usize) {
        match self.toks.get(self.pos) {
            Some(s) => (s.line, s.column),
            None => (self.eof_line, 1),
        }
    }
}
