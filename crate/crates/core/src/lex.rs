//! Shared tokenizer for the textual formats: databases, queries,
//! constraints, Datalog programs, and decision payloads.

use std::fmt;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Ident(String),
    Int(i64),
    Str(String),
    /// `_name`, a marked null.
    Null(String),
    LParen,
    RParen,
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    Comma,
    Semi,
    Dot,
    Slash,
    Eq,
    Amp,
    Pipe,
    Bang,
    Minus,
    Arrow,
    ColonDash,
    Eof,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Ident(s) => write!(f, "identifier `{s}`"),
            TokenKind::Int(n) => write!(f, "integer `{n}`"),
            TokenKind::Str(s) => write!(f, "string {s:?}"),
            TokenKind::Null(s) => write!(f, "null `_{s}`"),
            TokenKind::LParen => write!(f, "`(`"),
            TokenKind::RParen => write!(f, "`)`"),
            TokenKind::LBrace => write!(f, "`{{`"),
            TokenKind::RBrace => write!(f, "`}}`"),
            TokenKind::LBracket => write!(f, "`[`"),
            TokenKind::RBracket => write!(f, "`]`"),
            TokenKind::Comma => write!(f, "`,`"),
            TokenKind::Semi => write!(f, "`;`"),
            TokenKind::Dot => write!(f, "`.`"),
            TokenKind::Slash => write!(f, "`/`"),
            TokenKind::Eq => write!(f, "`=`"),
            TokenKind::Amp => write!(f, "`&`"),
            TokenKind::Pipe => write!(f, "`|`"),
            TokenKind::Bang => write!(f, "`!`"),
            TokenKind::Minus => write!(f, "`-`"),
            TokenKind::Arrow => write!(f, "`->`"),
            TokenKind::ColonDash => write!(f, "`:-`"),
            TokenKind::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Token {
    pub kind: TokenKind,
    pub line: usize,
    pub col: usize,
}

/// A syntax error with a 1-based line/column position.
#[derive(Debug, Clone, thiserror::Error)]
#[error("syntax error at {line}:{col}: {msg}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub msg: String,
}

impl ParseError {
    pub fn new(line: usize, col: usize, msg: impl Into<String>) -> Self {
        ParseError {
            line,
            col,
            msg: msg.into(),
        }
    }
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut tokens = Vec::new();
    let mut chars = text.chars().peekable();
    let mut line = 1usize;
    let mut col = 1usize;

    macro_rules! push {
        ($kind:expr, $l:expr, $c:expr) => {
            tokens.push(Token {
                kind: $kind,
                line: $l,
                col: $c,
            })
        };
    }

    while let Some(&ch) = chars.peek() {
        let (tl, tc) = (line, col);
        match ch {
            '\n' => {
                chars.next();
                line += 1;
                col = 1;
            }
            c if c.is_whitespace() => {
                chars.next();
                col += 1;
            }
            '#' => {
                // comment to end of line
                while let Some(&c) = chars.peek() {
                    if c == '\n' {
                        break;
                    }
                    chars.next();
                    col += 1;
                }
            }
            '(' => {
                chars.next();
                col += 1;
                push!(TokenKind::LParen, tl, tc);
            }
            ')' => {
                chars.next();
                col += 1;
                push!(TokenKind::RParen, tl, tc);
            }
            '{' => {
                chars.next();
                col += 1;
                push!(TokenKind::LBrace, tl, tc);
            }
            '}' => {
                chars.next();
                col += 1;
                push!(TokenKind::RBrace, tl, tc);
            }
            '[' => {
                chars.next();
                col += 1;
                push!(TokenKind::LBracket, tl, tc);
            }
            ']' => {
                chars.next();
                col += 1;
                push!(TokenKind::RBracket, tl, tc);
            }
            ',' => {
                chars.next();
                col += 1;
                push!(TokenKind::Comma, tl, tc);
            }
            ';' => {
                chars.next();
                col += 1;
                push!(TokenKind::Semi, tl, tc);
            }
            '.' => {
                chars.next();
                col += 1;
                push!(TokenKind::Dot, tl, tc);
            }
            '/' => {
                chars.next();
                col += 1;
                push!(TokenKind::Slash, tl, tc);
            }
            '=' => {
                chars.next();
                col += 1;
                push!(TokenKind::Eq, tl, tc);
            }
            '&' => {
                chars.next();
                col += 1;
                push!(TokenKind::Amp, tl, tc);
            }
            '|' => {
                chars.next();
                col += 1;
                push!(TokenKind::Pipe, tl, tc);
            }
            '!' => {
                chars.next();
                col += 1;
                push!(TokenKind::Bang, tl, tc);
            }
            '-' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'>') {
                    chars.next();
                    col += 1;
                    push!(TokenKind::Arrow, tl, tc);
                } else {
                    push!(TokenKind::Minus, tl, tc);
                }
            }
            ':' => {
                chars.next();
                col += 1;
                if chars.peek() == Some(&'-') {
                    chars.next();
                    col += 1;
                    push!(TokenKind::ColonDash, tl, tc);
                } else {
                    return Err(ParseError::new(tl, tc, "expected `:-`"));
                }
            }
            '"' => {
                chars.next();
                col += 1;
                let mut s = String::new();
                loop {
                    match chars.next() {
                        Some('"') => {
                            col += 1;
                            break;
                        }
                        Some('\\') => {
                            col += 1;
                            match chars.next() {
                                Some('"') => {
                                    s.push('"');
                                    col += 1;
                                }
                                Some('\\') => {
                                    s.push('\\');
                                    col += 1;
                                }
                                other => {
                                    return Err(ParseError::new(
                                        line,
                                        col,
                                        format!("bad escape {other:?} in string literal"),
                                    ))
                                }
                            }
                        }
                        Some('\n') | None => {
                            return Err(ParseError::new(tl, tc, "unterminated string literal"))
                        }
                        Some(c) => {
                            s.push(c);
                            col += 1;
                        }
                    }
                }
                push!(TokenKind::Str(s), tl, tc);
            }
            '_' => {
                chars.next();
                col += 1;
                let mut name = String::new();
                while let Some(&c) = chars.peek() {
                    if c.is_ascii_alphanumeric() || c == '_' {
                        name.push(c);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                if name.is_empty() {
                    return Err(ParseError::new(tl, tc, "`_` must be followed by a null name"));
                }
                push!(TokenKind::Null(name), tl, tc);
            }
            c if c.is_ascii_digit() => {
                let mut n = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_digit() {
                        n.push(d);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                let value = n
                    .parse::<i64>()
                    .map_err(|_| ParseError::new(tl, tc, format!("integer `{n}` out of range")))?;
                push!(TokenKind::Int(value), tl, tc);
            }
            c if c.is_ascii_alphabetic() => {
                let mut name = String::new();
                while let Some(&d) = chars.peek() {
                    if d.is_ascii_alphanumeric() || d == '_' {
                        name.push(d);
                        chars.next();
                        col += 1;
                    } else {
                        break;
                    }
                }
                push!(TokenKind::Ident(name), tl, tc);
            }
            c => {
                return Err(ParseError::new(tl, tc, format!("unexpected character `{c}`")));
            }
        }
    }
    tokens.push(Token {
        kind: TokenKind::Eof,
        line,
        col,
    });
    Ok(tokens)
}

/// Cursor over a token stream with single-token lookahead.
pub struct Tokens {
    toks: Vec<Token>,
    pos: usize,
}

impl Tokens {
    pub fn new(toks: Vec<Token>) -> Self {
        Tokens { toks, pos: 0 }
    }

    pub fn peek(&self) -> &Token {
        &self.toks[self.pos.min(self.toks.len() - 1)]
    }

    pub fn next(&mut self) -> Token {
        let t = self.toks[self.pos.min(self.toks.len() - 1)].clone();
        if self.pos < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    pub fn at_eof(&self) -> bool {
        matches!(self.peek().kind, TokenKind::Eof)
    }

    pub fn expect(&mut self, kind: &TokenKind) -> Result<Token, ParseError> {
        let t = self.next();
        if &t.kind == kind {
            Ok(t)
        } else {
            Err(ParseError::new(
                t.line,
                t.col,
                format!("expected {kind}, found {}", t.kind),
            ))
        }
    }

    pub fn error(&self, msg: impl Into<String>) -> ParseError {
        let t = self.peek();
        ParseError::new(t.line, t.col, msg)
    }
}
