//! ISO 10303-21 tokenizer.
//!
//! Whitespace and `/* */` comments are discarded. Keywords are case-folded
//! to uppercase because exports vary in casing. String literals are
//! unescaped here (quote doubling plus the `\X\`, `\X2\`, `\X4\` and `\S\`
//! control sequences), so downstream code only ever sees plain text.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum TokenKind {
    /// `#123`
    Id(u64),
    /// `IFCWALL`, `FILE_SCHEMA`, `ISO-10303-21`, ... uppercased
    Keyword(String),
    /// `'...'` with escapes resolved
    Str(String),
    /// `.NAME.` without the dots (`.T.` / `.F.` stay enums until parsing)
    Enum(String),
    Real(f64),
    Integer(i64),
    /// `"0FF"` binary literal, kept as its raw hex text
    Binary(String),
    LParen,
    RParen,
    Comma,
    Semicolon,
    Equals,
    /// `$`
    Unset,
    /// `*`
    Derived,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    /// Byte offset of the token start in the source text.
    pub offset: usize,
}

/// Tokenize STEP source text.
pub fn tokenize(text: &str) -> Result<Vec<Token>> {
    let bytes = text.as_bytes();
    let len = bytes.len();
    let mut pos = 0usize;
    let mut tokens = Vec::new();

    while pos < len {
        let b = bytes[pos];
        if b.is_ascii_whitespace() {
            pos += 1;
            continue;
        }
        if b == b'/' && pos + 1 < len && bytes[pos + 1] == b'*' {
            pos += 2;
            while pos + 1 < len && !(bytes[pos] == b'*' && bytes[pos + 1] == b'/') {
                pos += 1;
            }
            pos = (pos + 2).min(len);
            continue;
        }

        let start = pos;
        let kind = match b {
            b'(' => {
                pos += 1;
                TokenKind::LParen
            }
            b')' => {
                pos += 1;
                TokenKind::RParen
            }
            b',' => {
                pos += 1;
                TokenKind::Comma
            }
            b';' => {
                pos += 1;
                TokenKind::Semicolon
            }
            b'=' => {
                pos += 1;
                TokenKind::Equals
            }
            b'$' => {
                pos += 1;
                TokenKind::Unset
            }
            b'*' => {
                pos += 1;
                TokenKind::Derived
            }
            b'#' => {
                pos += 1;
                let digits_start = pos;
                while pos < len && bytes[pos].is_ascii_digit() {
                    pos += 1;
                }
                if digits_start == pos {
                    return Err(Error::Syntax { offset: start, expected: "digits after '#'".into() });
                }
                let id: u64 = text[digits_start..pos]
                    .parse()
                    .map_err(|_| Error::Syntax { offset: start, expected: "entity id".into() })?;
                TokenKind::Id(id)
            }
            b'\'' => {
                let (s, next) = lex_string(text, pos)?;
                pos = next;
                TokenKind::Str(s)
            }
            b'"' => {
                pos += 1;
                let content_start = pos;
                while pos < len && bytes[pos] != b'"' {
                    pos += 1;
                }
                if pos >= len {
                    return Err(Error::UnterminatedString { offset: start });
                }
                let raw = text[content_start..pos].to_string();
                pos += 1;
                TokenKind::Binary(raw)
            }
            b'.' => {
                pos += 1;
                let name_start = pos;
                while pos < len && bytes[pos] != b'.' {
                    pos += 1;
                }
                if pos >= len || pos == name_start {
                    return Err(Error::Syntax { offset: start, expected: "enumeration value".into() });
                }
                let name = text[name_start..pos].to_uppercase();
                pos += 1;
                TokenKind::Enum(name)
            }
            c if c.is_ascii_digit() || c == b'-' || c == b'+' => {
                let (kind, next) = lex_number(text, pos)?;
                pos = next;
                kind
            }
            c if c.is_ascii_alphabetic() => {
                while pos < len
                    && (bytes[pos].is_ascii_alphanumeric() || bytes[pos] == b'_' || bytes[pos] == b'-')
                {
                    pos += 1;
                }
                TokenKind::Keyword(text[start..pos].to_uppercase())
            }
            other => {
                return Err(Error::Syntax {
                    offset: start,
                    expected: format!("token, found byte 0x{other:02x}"),
                });
            }
        };
        tokens.push(Token { kind, offset: start });
    }
    Ok(tokens)
}

fn lex_number(text: &str, start: usize) -> Result<(TokenKind, usize)> {
    let bytes = text.as_bytes();
    let len = bytes.len();
    let mut pos = start;
    if bytes[pos] == b'-' || bytes[pos] == b'+' {
        pos += 1;
    }
    let digits_start = pos;
    while pos < len && bytes[pos].is_ascii_digit() {
        pos += 1;
    }
    if pos == digits_start {
        return Err(Error::Syntax { offset: start, expected: "digits".into() });
    }
    let mut is_real = false;
    if pos < len && bytes[pos] == b'.' {
        is_real = true;
        pos += 1;
        while pos < len && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
    }
    if pos < len && (bytes[pos] == b'E' || bytes[pos] == b'e') {
        is_real = true;
        pos += 1;
        if pos < len && (bytes[pos] == b'+' || bytes[pos] == b'-') {
            pos += 1;
        }
        let exp_start = pos;
        while pos < len && bytes[pos].is_ascii_digit() {
            pos += 1;
        }
        if pos == exp_start {
            return Err(Error::Syntax { offset: start, expected: "exponent digits".into() });
        }
    }
    let lit = &text[start..pos];
    let kind = if is_real {
        let v: f64 = lit
            .parse()
            .map_err(|_| Error::Syntax { offset: start, expected: "real literal".into() })?;
        TokenKind::Real(v)
    } else {
        let v: i64 = lit
            .parse()
            .map_err(|_| Error::Syntax { offset: start, expected: "integer literal".into() })?;
        TokenKind::Integer(v)
    };
    Ok((kind, pos))
}

/// Lex a `'...'` literal starting at the opening quote; returns the decoded
/// text and the position just past the closing quote.
fn lex_string(text: &str, start: usize) -> Result<(String, usize)> {
    let bytes = text.as_bytes();
    let len = bytes.len();
    let mut pos = start + 1;
    let mut out = String::new();
    loop {
        if pos >= len {
            return Err(Error::UnterminatedString { offset: start });
        }
        match bytes[pos] {
            b'\'' => {
                if pos + 1 < len && bytes[pos + 1] == b'\'' {
                    out.push('\'');
                    pos += 2;
                } else {
                    pos += 1;
                    return Ok((out, pos));
                }
            }
            b'\\' => {
                pos = lex_escape(text, pos, &mut out)?;
            }
            _ => {
                // Multi-byte UTF-8 passes through untouched.
                let ch_len = utf8_len(bytes[pos]);
                if pos + ch_len > len {
                    return Err(Error::UnterminatedString { offset: start });
                }
                out.push_str(&text[pos..pos + ch_len]);
                pos += ch_len;
            }
        }
    }
}

fn utf8_len(first: u8) -> usize {
    match first {
        b if b < 0x80 => 1,
        b if b & 0xe0 == 0xc0 => 2,
        b if b & 0xf0 == 0xe0 => 3,
        _ => 4,
    }
}

/// Decode one backslash sequence at `pos`; returns the position after it.
/// A backslash that starts no recognized sequence passes through verbatim
/// (real-world exports embed Windows paths).
fn lex_escape(text: &str, pos: usize, out: &mut String) -> Result<usize> {
    let bytes = text.as_bytes();
    let rest = &text[pos..];
    if rest.starts_with("\\\\") {
        out.push('\\');
        return Ok(pos + 2);
    }
    if rest.starts_with("\\S\\") {
        // ISO 8859 high half: the page directive selects the part; only the
        // default Latin-1 mapping is implemented.
        let idx = pos + 3;
        if idx >= bytes.len() || bytes[idx] == b'\'' {
            return Err(Error::BadEscape { offset: pos });
        }
        let c = bytes[idx];
        out.push(char::from_u32(c as u32 + 0x80).ok_or(Error::BadEscape { offset: pos })?);
        return Ok(idx + 1);
    }
    if rest.starts_with("\\P") {
        // \PA\ .. \PI\ select the ISO 8859 part used by later \S\ sequences.
        if rest.len() >= 4 && rest.as_bytes()[2].is_ascii_uppercase() && rest.as_bytes()[3] == b'\\' {
            return Ok(pos + 4);
        }
        return Err(Error::BadEscape { offset: pos });
    }
    if rest.starts_with("\\X2\\") || rest.starts_with("\\X4\\") {
        let group = if rest.as_bytes()[2] == b'2' { 4 } else { 8 };
        let mut idx = pos + 4;
        loop {
            if text[idx..].starts_with("\\X0\\") {
                return Ok(idx + 4);
            }
            if idx + group > bytes.len() {
                return Err(Error::BadEscape { offset: pos });
            }
            let hex = &text[idx..idx + group];
            let code = u32::from_str_radix(hex, 16).map_err(|_| Error::BadEscape { offset: pos })?;
            out.push(char::from_u32(code).ok_or(Error::BadEscape { offset: pos })?);
            idx += group;
        }
    }
    if rest.starts_with("\\X\\") {
        let idx = pos + 3;
        if idx + 2 > bytes.len() {
            return Err(Error::BadEscape { offset: pos });
        }
        let code = u8::from_str_radix(&text[idx..idx + 2], 16)
            .map_err(|_| Error::BadEscape { offset: pos })?;
        out.push(char::from_u32(code as u32).ok_or(Error::BadEscape { offset: pos })?);
        return Ok(idx + 2);
    }
    if rest.starts_with("\\X") {
        // \X0\ outside a \X2\ block, or a truncated \X form.
        return Err(Error::BadEscape { offset: pos });
    }
    out.push('\\');
    Ok(pos + 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<TokenKind> {
        tokenize(text).unwrap().into_iter().map(|t| t.kind).collect()
    }

    #[test]
    fn wall_record() {
        assert_eq!(
            kinds("#12=IFCWALL('w1',$);"),
            vec![
                TokenKind::Id(12),
                TokenKind::Equals,
                TokenKind::Keyword("IFCWALL".into()),
                TokenKind::LParen,
                TokenKind::Str("w1".into()),
                TokenKind::Comma,
                TokenKind::Unset,
                TokenKind::RParen,
                TokenKind::Semicolon,
            ]
        );
    }

    #[test]
    fn quote_doubling() {
        assert_eq!(kinds("'it''s'"), vec![TokenKind::Str("it's".into())]);
    }

    #[test]
    fn enum_delimiters_stripped() {
        assert_eq!(kinds(".NOTDEFINED."), vec![TokenKind::Enum("NOTDEFINED".into())]);
    }

    #[test]
    fn numbers() {
        assert_eq!(kinds("42"), vec![TokenKind::Integer(42)]);
        assert_eq!(kinds("-7"), vec![TokenKind::Integer(-7)]);
        assert_eq!(kinds("3.14"), vec![TokenKind::Real(3.14)]);
        assert_eq!(kinds("0."), vec![TokenKind::Real(0.0)]);
        assert_eq!(kinds("1.5E-3"), vec![TokenKind::Real(1.5e-3)]);
        assert_eq!(kinds("2E5"), vec![TokenKind::Real(2e5)]);
    }

    #[test]
    fn keywords_case_folded() {
        assert_eq!(kinds("IfcWall"), vec![TokenKind::Keyword("IFCWALL".into())]);
    }

    #[test]
    fn comments_and_whitespace_dropped() {
        assert_eq!(
            kinds("/* header */ #1 /* x */ = IFCSITE"),
            vec![
                TokenKind::Id(1),
                TokenKind::Equals,
                TokenKind::Keyword("IFCSITE".into())
            ]
        );
    }

    #[test]
    fn x2_escape_decoded() {
        assert_eq!(kinds("'\\X2\\00E9\\X0\\tage'"), vec![TokenKind::Str("étage".into())]);
        assert_eq!(
            kinds("'\\X2\\4E2D6587\\X0\\'"),
            vec![TokenKind::Str("中文".into())]
        );
    }

    #[test]
    fn x_escape_decoded() {
        assert_eq!(kinds("'\\X\\E9'"), vec![TokenKind::Str("é".into())]);
        assert_eq!(kinds("'\\S\\i'"), vec![TokenKind::Str("é".into())]);
    }

    #[test]
    fn unterminated_string_reports_offset() {
        match tokenize("  'abc") {
            Err(Error::UnterminatedString { offset }) => assert_eq!(offset, 2),
            other => panic!("expected UnterminatedString, got {other:?}"),
        }
    }

    #[test]
    fn bad_escape_reports_offset() {
        match tokenize("'ab\\X2\\12ZZ\\X0\\'") {
            Err(Error::BadEscape { offset }) => assert_eq!(offset, 3),
            other => panic!("expected BadEscape, got {other:?}"),
        }
    }

    #[test]
    fn stray_backslash_passes_through() {
        assert_eq!(kinds("'C:\\temp'"), vec![TokenKind::Str("C:\\temp".into())]);
    }

    #[test]
    fn token_offsets_recorded() {
        let toks = tokenize("#1 = IFCWALL").unwrap();
        assert_eq!(toks[0].offset, 0);
        assert_eq!(toks[1].offset, 3);
        assert_eq!(toks[2].offset, 5);
    }
}
