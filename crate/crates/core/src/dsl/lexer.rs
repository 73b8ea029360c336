use super::ast::Pos;
use super::ParseError;

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Tok {
    Ident(String),
    Int(u64),
    Str(String),
    /// `@elide`, `@unroll`
    Attr(String),
    Punct(&'static str),
    Eof,
}

impl Tok {
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(v) => format!("integer `{v}`"),
            Tok::Str(s) => format!("string {s:?}"),
            Tok::Attr(a) => format!("`@{a}`"),
            Tok::Punct(p) => format!("`{p}`"),
            Tok::Eof => "end of input".into(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

// Longest first.
const PUNCT: [&str; 27] = [
    "->", "==", "!=", "<=", ">=", "<<", ">>", "{", "}", "(", ")", "[", "]", ";", ":", ",", "=", "+", "-", "*", "&",
    "|", "^", "~", "!", "<", ">",
];

pub fn tokenize(text: &str) -> Result<Vec<Token>, ParseError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let advance = |i: &mut usize, line: &mut u32, col: &mut u32, n: usize| {
        for &b in &bytes[*i..*i + n] {
            if b == b'\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
        }
        *i += n;
    };
    while i < bytes.len() {
        let c = bytes[i];
        let pos = Pos { line, col };
        if c.is_ascii_whitespace() {
            advance(&mut i, &mut line, &mut col, 1);
            continue;
        }
        if text[i..].starts_with("//") {
            let n = text[i..].find('\n').unwrap_or(text.len() - i);
            advance(&mut i, &mut line, &mut col, n);
            continue;
        }
        if c.is_ascii_alphabetic() || c == b'_' || c == b'@' {
            let start = if c == b'@' { i + 1 } else { i };
            let mut j = start;
            while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                j += 1;
            }
            let word = &text[start..j];
            if c == b'@' && word.is_empty() {
                return Err(ParseError::new(pos, "expected attribute name after `@`", vec![]));
            }
            let tok = if c == b'@' {
                Tok::Attr(word.to_string())
            } else {
                Tok::Ident(word.to_string())
            };
            out.push(Token { tok, pos });
            let n = j - i;
            advance(&mut i, &mut line, &mut col, n);
            continue;
        }
        if c.is_ascii_digit() {
            let mut j = i;
            while j < bytes.len() && (bytes[j].is_ascii_alphanumeric() || bytes[j] == b'_') {
                j += 1;
            }
            let lit = text[i..j].replace('_', "");
            let parsed = if let Some(hex) = lit.strip_prefix("0x").or_else(|| lit.strip_prefix("0X")) {
                u64::from_str_radix(hex, 16)
            } else if let Some(bin) = lit.strip_prefix("0b") {
                u64::from_str_radix(bin, 2)
            } else {
                lit.parse()
            };
            let v = parsed
                .map_err(|_| ParseError::new(pos, format!("invalid integer literal `{}`", &text[i..j]), vec![]))?;
            out.push(Token { tok: Tok::Int(v), pos });
            let n = j - i;
            advance(&mut i, &mut line, &mut col, n);
            continue;
        }
        if c == b'"' {
            let Some(end) = text[i + 1..].find('"') else {
                return Err(ParseError::new(pos, "unterminated string", vec![]));
            };
            let s = text[i + 1..i + 1 + end].to_string();
            out.push(Token { tok: Tok::Str(s), pos });
            advance(&mut i, &mut line, &mut col, end + 2);
            continue;
        }
        match PUNCT.iter().find(|p| text[i..].starts_with(**p)) {
            Some(p) => {
                out.push(Token {
                    tok: Tok::Punct(p),
                    pos,
                });
                advance(&mut i, &mut line, &mut col, p.len());
            }
            None => {
                let ch = text[i..].chars().next().unwrap();
                return Err(ParseError::new(pos, format!("unexpected character `{ch}`"), vec![]));
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        pos: Pos { line, col },
    });
    Ok(out)
}
