use std::fmt;

use super::SyntaxError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Float(f64),
    Str(String),
    Keyword(&'static str),
    Punct(&'static str),
    Eof,
}

impl Tok {
    /// Short rendering used in "found" / "expected" diagnostics.
    pub fn describe(&self) -> String {
        match self {
            Tok::Ident(s) => format!("identifier `{s}`"),
            Tok::Int(i) => format!("integer {i}"),
            Tok::Float(f) => format!("float {f:?}"),
            Tok::Str(_) => "string literal".to_owned(),
            Tok::Keyword(k) | Tok::Punct(k) => format!("\"{k}\""),
            Tok::Eof => "end of input".to_owned(),
        }
    }
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub col: u32,
    /// Column just past the token's last character.
    pub end_col: u32,
    /// Column of the first token on this token's line.
    pub line_indent: u32,
}

pub const KEYWORDS: &[&str] = &[
    "node",
    "edge",
    "walker",
    "has",
    "can",
    "access",
    "take",
    "spawn",
    "here",
    "if",
    "else",
    "for",
    "in",
    "report",
    "disengage",
    "and",
    "or",
    "not",
    "true",
    "false",
    "null",
];

// longest first so that maximal munch works with a linear scan
const PUNCTS: &[&str] = &[
    "<-->", "-->", "<--", "++>", "<++", "==", "!=", "{", "}", "(", ")", "[", "]", ";", ",", ":",
    ".", "=", "<", ">", "+", "-", "*", "/",
];

pub fn is_keyword(s: &str) -> bool {
    KEYWORDS.contains(&s)
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, SyntaxError> {
    let chars: Vec<char> = source.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    let mut line = 1u32;
    let mut col = 1u32;
    let mut line_indent: Option<u32> = None;

    let lex_err = |line, col, expected: &str, found: String| SyntaxError {
        line,
        col,
        expected: vec![expected.to_owned()],
        found,
    };

    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            line_indent = None;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let start_col = col;
        let indent = *line_indent.get_or_insert(start_col);
        let start_line = line;
        let tok = if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            col += (i - start) as u32;
            match KEYWORDS.iter().find(|k| **k == word) {
                Some(k) => Tok::Keyword(k),
                None => Tok::Ident(word),
            }
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            let mut is_float = false;
            if chars.get(i) == Some(&'.') && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                is_float = true;
                i += 1;
                while i < chars.len() && chars[i].is_ascii_digit() {
                    i += 1;
                }
            }
            if matches!(chars.get(i), Some('e') | Some('E')) {
                let mut j = i + 1;
                if matches!(chars.get(j), Some('+') | Some('-')) {
                    j += 1;
                }
                if chars.get(j).is_some_and(|d| d.is_ascii_digit()) {
                    is_float = true;
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            col += (i - start) as u32;
            if is_float {
                let f: f64 = text
                    .parse()
                    .map_err(|_| lex_err(start_line, start_col, "number", text.clone()))?;
                Tok::Float(f)
            } else {
                let n: i64 = text.parse().map_err(|_| {
                    lex_err(start_line, start_col, "integer within 64-bit range", text.clone())
                })?;
                Tok::Int(n)
            }
        } else if c == '"' {
            i += 1;
            col += 1;
            let mut s = String::new();
            loop {
                match chars.get(i) {
                    None => {
                        return Err(lex_err(line, col, "\"\\\"\"", "end of input".into()));
                    }
                    Some('"') => {
                        i += 1;
                        col += 1;
                        break;
                    }
                    Some('\\') => {
                        let esc = match chars.get(i + 1) {
                            Some('n') => '\n',
                            Some('"') => '"',
                            Some('\\') => '\\',
                            other => {
                                return Err(lex_err(
                                    line,
                                    col,
                                    "escape sequence",
                                    format!("\\{}", other.map(|c| c.to_string()).unwrap_or_default()),
                                ));
                            }
                        };
                        s.push(esc);
                        i += 2;
                        col += 2;
                    }
                    Some('\n') => {
                        s.push('\n');
                        i += 1;
                        line += 1;
                        col = 1;
                    }
                    Some(&other) => {
                        s.push(other);
                        i += 1;
                        col += 1;
                    }
                }
            }
            Tok::Str(s)
        } else {
            let rest = &chars[i..];
            let punct = PUNCTS.iter().find(|p| {
                let pc: Vec<char> = p.chars().collect();
                rest.len() >= pc.len() && rest[..pc.len()] == pc[..]
            });
            match punct {
                Some(p) => {
                    i += p.len();
                    col += p.len() as u32;
                    Tok::Punct(p)
                }
                None => {
                    return Err(lex_err(line, col, "token", format!("character {c:?}")));
                }
            }
        };
        tokens.push(Token {
            tok,
            line: start_line,
            col: start_col,
            end_col: col,
            line_indent: indent,
        });
    }
    tokens.push(Token {
        tok: Tok::Eof,
        line,
        col,
        end_col: col,
        line_indent: line_indent.unwrap_or(col),
    });
    Ok(tokens)
}
