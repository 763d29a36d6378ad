use num_bigint::BigInt;

use super::ParseError;

#[derive(Clone, Debug, PartialEq)]
pub enum TokKind {
    Ident(String),
    Int(BigInt),
    /// `\sum`, `\max`, ...
    Builtin(String),
    Lambda,
    Punct(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub kind: TokKind,
    pub line: usize,
    pub col: usize,
    /// A `/*NAME*/` comment that directly follows this token.
    pub marker_after: Option<String>,
}

impl Token {
    pub fn describe(&self) -> String {
        match &self.kind {
            TokKind::Ident(s) => format!("`{s}`"),
            TokKind::Int(v) => format!("`{v}`"),
            TokKind::Builtin(s) => format!("`\\{s}`"),
            TokKind::Lambda => "`lambda`".into(),
            TokKind::Punct(p) => format!("`{p}`"),
            TokKind::Eof => "end of input".into(),
        }
    }
}

const PUNCT: [&str; 24] = [
    "==", "!=", "<=", ">=", "&&", "||", "<", ">", "=", "!", "+", "-", "*", "/", "%", "(", ")",
    "{", "}", "[", "]", ";", ",", ".",
];

fn is_marker(text: &str) -> bool {
    let t = text.trim();
    !t.is_empty()
        && t.len() <= 16
        && t.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = src.chars().collect();
    let mut toks: Vec<Token> = Vec::new();
    let (mut pos, mut line, mut col) = (0usize, 1usize, 1usize);

    let advance = |pos: &mut usize, line: &mut usize, col: &mut usize, n: usize| {
        for _ in 0..n {
            if chars[*pos] == '\n' {
                *line += 1;
                *col = 1;
            } else {
                *col += 1;
            }
            *pos += 1;
        }
    };

    while pos < chars.len() {
        let c = chars[pos];
        if c.is_whitespace() {
            advance(&mut pos, &mut line, &mut col, 1);
            continue;
        }
        if c == '/' && chars.get(pos + 1) == Some(&'/') {
            while pos < chars.len() && chars[pos] != '\n' {
                advance(&mut pos, &mut line, &mut col, 1);
            }
            continue;
        }
        if c == '/' && chars.get(pos + 1) == Some(&'*') {
            let (sl, sc) = (line, col);
            let start = pos + 2;
            let mut end = start;
            while end + 1 < chars.len() && !(chars[end] == '*' && chars[end + 1] == '/') {
                end += 1;
            }
            if end + 1 >= chars.len() {
                return Err(ParseError::new(sl, sc, vec!["`*/`".into()], "end of input"));
            }
            let text: String = chars[start..end].iter().collect();
            if is_marker(&text) {
                if let Some(last) = toks.last_mut() {
                    last.marker_after = Some(text.trim().to_string());
                }
            }
            let n = end + 2 - pos;
            advance(&mut pos, &mut line, &mut col, n);
            continue;
        }
        let (tl, tc) = (line, col);
        let push = |toks: &mut Vec<Token>, kind| {
            toks.push(Token {
                kind,
                line: tl,
                col: tc,
                marker_after: None,
            })
        };
        if c.is_ascii_digit() {
            let mut end = pos;
            while end < chars.len() && chars[end].is_ascii_digit() {
                end += 1;
            }
            let text: String = chars[pos..end].iter().collect();
            push(&mut toks, TokKind::Int(text.parse().expect("digits")));
            let n = end - pos;
            advance(&mut pos, &mut line, &mut col, n);
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            if c == 'λ' {
                push(&mut toks, TokKind::Lambda);
                advance(&mut pos, &mut line, &mut col, 1);
                continue;
            }
            let mut end = pos;
            while end < chars.len() && (chars[end].is_alphanumeric() || chars[end] == '_') {
                end += 1;
            }
            let text: String = chars[pos..end].iter().collect();
            let kind = if text == "lambda" {
                TokKind::Lambda
            } else {
                TokKind::Ident(text)
            };
            push(&mut toks, kind);
            let n = end - pos;
            advance(&mut pos, &mut line, &mut col, n);
            continue;
        }
        if c == '?' && chars.get(pos + 1).is_some_and(|c| c.is_alphabetic()) {
            // Meta-variables of rewrite-rule schemas.
            let mut end = pos + 1;
            while end < chars.len() && (chars[end].is_alphanumeric() || chars[end] == '_') {
                end += 1;
            }
            let text: String = chars[pos..end].iter().collect();
            push(&mut toks, TokKind::Ident(text));
            let n = end - pos;
            advance(&mut pos, &mut line, &mut col, n);
            continue;
        }
        if c == '\\' {
            let mut end = pos + 1;
            while end < chars.len() && chars[end].is_ascii_alphabetic() {
                end += 1;
            }
            if end == pos + 1 {
                return Err(ParseError::new(tl, tc, vec!["builtin name".into()], "`\\`"));
            }
            let text: String = chars[pos + 1..end].iter().collect();
            push(&mut toks, TokKind::Builtin(text));
            let n = end - pos;
            advance(&mut pos, &mut line, &mut col, n);
            continue;
        }
        let rest: String = chars[pos..(pos + 2).min(chars.len())].iter().collect();
        match PUNCT.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                push(&mut toks, TokKind::Punct(p));
                advance(&mut pos, &mut line, &mut col, p.len());
            }
            None => {
                return Err(ParseError::new(
                    tl,
                    tc,
                    vec!["token".into()],
                    &format!("`{c}`"),
                ))
            }
        }
    }
    toks.push(Token {
        kind: TokKind::Eof,
        line,
        col,
        marker_after: None,
    });
    Ok(toks)
}
