use super::ast::Span;
use super::LangError;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(i64),
    Float(f64),
    /// Keywords and punctuation, stored verbatim.
    Sym(&'static str),
    Eof,
}

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub span: Span,
    /// True when no whitespace separates this token from the previous one.
    pub glued: bool,
}

const KEYWORDS: &[&str] = &[
    "int", "float", "bool", "Object", "char", "void", "if", "else", "for", "while", "switch", "case",
    "default", "return", "break", "true", "false", "null", "new", "record", "global", "const",
];

// Longest first so that `<=` wins over `<`.
const PUNCT: &[&str] = &[
    "<<", ">>", "<=", ">=", "==", "!=", "&&", "||", "++", "--", "+", "-", "*", "/", "<", ">", "=", "!",
    "&", "|", "(", ")", "{", "}", "[", "]", ";", ",", ".", ":",
];

pub fn tokenize(src: &str) -> Result<Vec<Token>, LangError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let mut glued = false;

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            bump!();
            glued = false;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            glued = false;
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            let start = Span::new(line, col);
            bump!();
            bump!();
            loop {
                if i >= chars.len() {
                    return Err(LangError::syntax(start, "unterminated block comment"));
                }
                if chars[i] == '*' && chars.get(i + 1) == Some(&'/') {
                    bump!();
                    bump!();
                    break;
                }
                bump!();
            }
            glued = false;
            continue;
        }

        let span = Span::new(line, col);
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                bump!();
            }
            let word: String = chars[start..i].iter().collect();
            let tok = match KEYWORDS.iter().find(|k| **k == word) {
                Some(k) => Tok::Sym(k),
                None => Tok::Ident(word),
            };
            out.push(Token { tok, span, glued });
        } else if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump!();
            }
            let mut is_float = false;
            if i < chars.len() && chars[i] == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit()) {
                is_float = true;
                bump!();
                while i < chars.len() && chars[i].is_ascii_digit() {
                    bump!();
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let save = (i, line, col);
                bump!();
                if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                    bump!();
                }
                if i < chars.len() && chars[i].is_ascii_digit() {
                    is_float = true;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        bump!();
                    }
                } else {
                    (i, line, col) = save;
                }
            }
            let text: String = chars[start..i].iter().collect();
            let tok = if is_float {
                Tok::Float(text.parse().map_err(|_| LangError::syntax(span, format!("bad float literal `{text}`")))?)
            } else {
                Tok::Int(text.parse().map_err(|_| LangError::syntax(span, format!("integer literal `{text}` out of range")))?)
            };
            out.push(Token { tok, span, glued });
        } else {
            let rest: String = chars[i..chars.len().min(i + 2)].iter().collect();
            let Some(p) = PUNCT.iter().find(|p| rest.starts_with(**p)) else {
                return Err(LangError::syntax(span, format!("unexpected character `{c}`")));
            };
            for _ in 0..p.len() {
                bump!();
            }
            out.push(Token { tok: Tok::Sym(p), span, glued });
        }
        glued = true;
    }
    out.push(Token { tok: Tok::Eof, span: Span::new(line, col), glued: false });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lexes_numbers_and_operators() {
        let toks = tokenize("x<=1.5e3 // c\n/* b */ y<<2").unwrap();
        let kinds: Vec<Tok> = toks.into_iter().map(|t| t.tok).collect();
        assert_eq!(
            kinds,
            vec![
                Tok::Ident("x".into()),
                Tok::Sym("<="),
                Tok::Float(1500.0),
                Tok::Ident("y".into()),
                Tok::Sym("<<"),
                Tok::Int(2),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn positions_are_tracked() {
        let toks = tokenize("a\n  bb").unwrap();
        assert_eq!((toks[1].span.line, toks[1].span.col), (2, 3));
    }

    #[test]
    fn rejects_stray_characters() {
        assert!(tokenize("a # b").is_err());
    }
}
