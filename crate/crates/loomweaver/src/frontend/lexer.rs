//! Hand-rolled tokenizer for the DSL. Whitespace-insensitive, `//`
//! line comments.

use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    Ident(String),
    Int(i64),
    Float(f64),
    Str(String),
    LBrace,
    RBrace,
    LBracket,
    RBracket,
    LParen,
    RParen,
    Semi,
    Comma,
    Colon,
    Dot,
    DotDot,
    Eq,
    PlusEq,
    Plus,
    Minus,
    Star,
    Slash,
    Eof,
}

impl fmt::Display for TokenKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TokenKind::Ident(s) => write!(f, "identifier `{s}`"),
            TokenKind::Int(v) => write!(f, "integer `{v}`"),
            TokenKind::Float(v) => write!(f, "float `{v}`"),
            TokenKind::Str(s) => write!(f, "string \"{s}\""),
            TokenKind::LBrace => write!(f, "`{{`"),
            TokenKind::RBrace => write!(f, "`}}`"),
            TokenKind::LBracket => write!(f, "`[`"),
            TokenKind::RBracket => write!(f, "`]`"),
            TokenKind::LParen => write!(f, "`(`"),
            TokenKind::RParen => write!(f, "`)`"),
            TokenKind::Semi => write!(f, "`;`"),
            TokenKind::Comma => write!(f, "`,`"),
            TokenKind::Colon => write!(f, "`:`"),
            TokenKind::Dot => write!(f, "`.`"),
            TokenKind::DotDot => write!(f, "`..`"),
            TokenKind::Eq => write!(f, "`=`"),
            TokenKind::PlusEq => write!(f, "`+=`"),
            TokenKind::Plus => write!(f, "`+`"),
            TokenKind::Minus => write!(f, "`-`"),
            TokenKind::Star => write!(f, "`*`"),
            TokenKind::Slash => write!(f, "`/`"),
            TokenKind::Eof => write!(f, "end of input"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    pub line: u32,
    pub col: u32,
}

#[derive(Debug)]
pub struct LexError {
    pub message: String,
    pub line: u32,
    pub col: u32,
}

pub fn lex(src: &str) -> Result<Vec<Token>, LexError> {
    let mut tokens = Vec::new();
    let bytes = src.as_bytes();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut col = 1u32;

    macro_rules! push {
        ($kind:expr, $l:expr, $c:expr) => {
            tokens.push(Token {
                kind: $kind,
                line: $l,
                col: $c,
            })
        };
    }

    while i < bytes.len() {
        let b = bytes[i];
        let (tl, tc) = (line, col);
        match b {
            b'\n' => {
                i += 1;
                line += 1;
                col = 1;
            }
            b' ' | b'\t' | b'\r' => {
                i += 1;
                col += 1;
            }
            b'/' if i + 1 < bytes.len() && bytes[i + 1] == b'/' => {
                while i < bytes.len() && bytes[i] != b'\n' {
                    i += 1;
                }
            }
            b'{' => {
                push!(TokenKind::LBrace, tl, tc);
                i += 1;
                col += 1;
            }
            b'}' => {
                push!(TokenKind::RBrace, tl, tc);
                i += 1;
                col += 1;
            }
            b'[' => {
                push!(TokenKind::LBracket, tl, tc);
                i += 1;
                col += 1;
            }
            b']' => {
                push!(TokenKind::RBracket, tl, tc);
                i += 1;
                col += 1;
            }
            b'(' => {
                push!(TokenKind::LParen, tl, tc);
                i += 1;
                col += 1;
            }
            b')' => {
                push!(TokenKind::RParen, tl, tc);
                i += 1;
                col += 1;
            }
            b';' => {
                push!(TokenKind::Semi, tl, tc);
                i += 1;
                col += 1;
            }
            b',' => {
                push!(TokenKind::Comma, tl, tc);
                i += 1;
                col += 1;
            }
            b':' => {
                push!(TokenKind::Colon, tl, tc);
                i += 1;
                col += 1;
            }
            b'*' => {
                push!(TokenKind::Star, tl, tc);
                i += 1;
                col += 1;
            }
            b'/' => {
                push!(TokenKind::Slash, tl, tc);
                i += 1;
                col += 1;
            }
            b'-' => {
                push!(TokenKind::Minus, tl, tc);
                i += 1;
                col += 1;
            }
            b'+' => {
                if i + 1 < bytes.len() && bytes[i + 1] == b'=' {
                    push!(TokenKind::PlusEq, tl, tc);
                    i += 2;
                    col += 2;
                } else {
                    push!(TokenKind::Plus, tl, tc);
                    i += 1;
                    col += 1;
                }
            }
            b'=' => {
                push!(TokenKind::Eq, tl, tc);
                i += 1;
                col += 1;
            }
            b'.' => {
                if i + 1 < bytes.len() && bytes[i + 1] == b'.' {
                    push!(TokenKind::DotDot, tl, tc);
                    i += 2;
                    col += 2;
                } else {
                    push!(TokenKind::Dot, tl, tc);
                    i += 1;
                    col += 1;
                }
            }
            b'"' => {
                let start = i + 1;
                let mut j = start;
                while j < bytes.len() && bytes[j] != b'"' && bytes[j] != b'\n' {
                    j += 1;
                }
                if j >= bytes.len() || bytes[j] != b'"' {
                    return Err(LexError {
                        message: "unterminated string literal".into(),
                        line: tl,
                        col: tc,
                    });
                }
                let s = String::from_utf8_lossy(&bytes[start..j]).into_owned();
                push!(TokenKind::Str(s), tl, tc);
                col += (j + 1 - i) as u32;
                i = j + 1;
            }
            b'0'..=b'9' => {
                let start = i;
                let mut j = i;
                while j < bytes.len() && bytes[j].is_ascii_digit() {
                    j += 1;
                }
                // `..` after an integer is a range, not a float.
                let is_float = j < bytes.len()
                    && bytes[j] == b'.'
                    && !(j + 1 < bytes.len() && bytes[j + 1] == b'.');
                if is_float {
                    j += 1;
                    while j < bytes.len() && bytes[j].is_ascii_digit() {
                        j += 1;
                    }
                    if j < bytes.len() && (bytes[j] == b'e' || bytes[j] == b'E') {
                        j += 1;
                        if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                            j += 1;
                        }
                        while j < bytes.len() && bytes[j].is_ascii_digit() {
                            j += 1;
                        }
                    }
                    let text = std::str::from_utf8(&bytes[start..j]).unwrap_or("");
                    let v: f64 = text.parse().map_err(|_| LexError {
                        message: format!("invalid float literal `{text}`"),
                        line: tl,
                        col: tc,
                    })?;
                    push!(TokenKind::Float(v), tl, tc);
                } else {
                    let text = std::str::from_utf8(&bytes[start..j]).unwrap_or("");
                    let v: i64 = text.parse().map_err(|_| LexError {
                        message: format!("integer literal `{text}` out of range"),
                        line: tl,
                        col: tc,
                    })?;
                    push!(TokenKind::Int(v), tl, tc);
                }
                col += (j - i) as u32;
                i = j;
            }
            b'A'..=b'Z' | b'a'..=b'z' | b'_' => {
                let start = i;
                let mut j = i;
                while j < bytes.len()
                    && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_')
                {
                    j += 1;
                }
                let s = std::str::from_utf8(&bytes[start..j]).unwrap().to_string();
                push!(TokenKind::Ident(s), tl, tc);
                col += (j - i) as u32;
                i = j;
            }
            _ => {
                return Err(LexError {
                    message: format!("unexpected character `{}`", b as char),
                    line: tl,
                    col: tc,
                });
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

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn range_is_not_a_float() {
        let toks = lex("0..32").unwrap();
        assert_eq!(toks[0].kind, TokenKind::Int(0));
        assert_eq!(toks[1].kind, TokenKind::DotDot);
        assert_eq!(toks[2].kind, TokenKind::Int(32));
    }

    #[test]
    fn float_literal() {
        let toks = lex("0.33333").unwrap();
        assert_eq!(toks[0].kind, TokenKind::Float(0.33333));
    }
}
