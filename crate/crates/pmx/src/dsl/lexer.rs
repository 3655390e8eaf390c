//! Lexer. Tokens carry the raw source slice plus a canonical (ASCII) form of
//! identifiers.

use super::DslError;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Number,
    Op,
    /// `@model`, `@param`, ... (lexeme keeps the `@`)
    BlockKey,
    /// `@.`
    Broadcast,
    Tilde,
    /// `=` or `:=`
    Assign,
    Prime,
    LParen,
    RParen,
    LBracket,
    RBracket,
    Comma,
    Semicolon,
    Newline,
    Eof,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Token {
    pub kind: TokenKind,
    /// Contiguous slice of the source.
    pub lexeme: String,
    /// Canonicalized identifier / block name (ASCII), empty otherwise.
    pub canonical: String,
    pub line: usize,
    pub column: usize,
    pub start: usize,
    pub end: usize,
}

/// Map a single identifier character to its ASCII spelling.
fn map_char(c: char, out: &mut String) {
    match c {
        'α' => out.push_str("alpha"),
        'β' => out.push_str("beta"),
        'γ' => out.push_str("gamma"),
        'δ' => out.push_str("delta"),
        'ε' => out.push_str("epsilon"),
        'ζ' => out.push_str("zeta"),
        'η' => out.push_str("eta"),
        'θ' => out.push_str("theta"),
        'ι' => out.push_str("iota"),
        'κ' => out.push_str("kappa"),
        'λ' => out.push_str("lambda"),
        'μ' => out.push_str("mu"),
        'ν' => out.push_str("nu"),
        'ξ' => out.push_str("xi"),
        'π' => out.push_str("pi"),
        'ρ' => out.push_str("rho"),
        'σ' => out.push_str("sigma"),
        'τ' => out.push_str("tau"),
        'υ' => out.push_str("upsilon"),
        'φ' => out.push_str("phi"),
        'χ' => out.push_str("chi"),
        'ψ' => out.push_str("psi"),
        'ω' => out.push_str("omega"),
        'Γ' => out.push_str("Gamma"),
        'Δ' => out.push_str("Delta"),
        'Θ' => out.push_str("Theta"),
        'Λ' => out.push_str("Lambda"),
        'Ξ' => out.push_str("Xi"),
        'Π' => out.push_str("Pi"),
        'Σ' => out.push_str("Sigma"),
        'Υ' => out.push_str("Upsilon"),
        'Φ' => out.push_str("Phi"),
        'Ψ' => out.push_str("Psi"),
        'Ω' => out.push_str("Omega"),
        '²' => out.push('2'),
        _ => out.push(c),
    }
}

/// Canonical ASCII form of an identifier (`σ` -> `sigma`, `ω²Ka` -> `omega2Ka`).
pub fn canonical_name(raw: &str) -> String {
    let mut s = String::with_capacity(raw.len());
    for c in raw.chars() {
        map_char(c, &mut s);
    }
    s
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic() || c == '_'
}

fn is_ident_continue(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '²'
}

pub fn tokenize(source: &str) -> Result<Vec<Token>, DslError> {
    let mut tokens = Vec::new();
    let chars: Vec<(usize, char)> = source.char_indices().collect();
    let n = chars.len();
    let mut i = 0;
    let mut line = 1usize;
    let mut col = 1usize;

    let mut push = |tokens: &mut Vec<Token>,
                    kind: TokenKind,
                    lexeme: &str,
                    canonical: String,
                    line: usize,
                    col: usize,
                    start: usize,
                    end: usize| {
        tokens.push(Token {
            kind,
            lexeme: lexeme.to_string(),
            canonical,
            line,
            column: col,
            start,
            end,
        });
    };

    while i < n {
        let (byte, c) = chars[i];
        let (tline, tcol) = (line, col);

        // line bookkeeping helper for single-char advances
        macro_rules! advance {
            ($count:expr) => {{
                for k in 0..$count {
                    let (_, ch) = chars[i + k];
                    if ch == '\n' {
                        line += 1;
                        col = 1;
                    } else {
                        col += 1;
                    }
                }
                i += $count;
            }};
        }

        if c == '\n' {
            push(&mut tokens, TokenKind::Newline, "\n", String::new(), tline, tcol, byte, byte + 1);
            advance!(1);
            continue;
        }
        if c.is_whitespace() {
            advance!(1);
            continue;
        }
        if c == '#' {
            // comment to end of line
            let mut j = i;
            while j < n && chars[j].1 != '\n' {
                j += 1;
            }
            advance!(j - i);
            continue;
        }
        if c == '@' {
            // @model, @param, ..., or the broadcast marker @.
            if i + 1 < n && chars[i + 1].1 == '.' {
                push(
                    &mut tokens,
                    TokenKind::Broadcast,
                    "@.",
                    String::new(),
                    tline,
                    tcol,
                    byte,
                    chars[i + 1].0 + 1,
                );
                advance!(2);
                continue;
            }
            let mut j = i + 1;
            while j < n && is_ident_continue(chars[j].1) {
                j += 1;
            }
            if j == i + 1 {
                return Err(DslError::Lex {
                    line: tline,
                    column: tcol,
                    message: "`@` must be followed by a block name".into(),
                });
            }
            let end = if j < n { chars[j].0 } else { source.len() };
            let lexeme = &source[byte..end];
            let canonical = canonical_name(lexeme);
            push(&mut tokens, TokenKind::BlockKey, lexeme, canonical, tline, tcol, byte, end);
            advance!(j - i);
            continue;
        }
        if is_ident_start(c) {
            let mut j = i;
            while j < n && is_ident_continue(chars[j].1) {
                j += 1;
            }
            let end = if j < n { chars[j].0 } else { source.len() };
            let lexeme = &source[byte..end];
            push(
                &mut tokens,
                TokenKind::Ident,
                lexeme,
                canonical_name(lexeme),
                tline,
                tcol,
                byte,
                end,
            );
            advance!(j - i);
            continue;
        }
        if c.is_ascii_digit()
            || (c == '.' && i + 1 < n && chars[i + 1].1.is_ascii_digit())
        {
            let mut j = i;
            let mut seen_dot = false;
            let mut seen_exp = false;
            while j < n {
                let ch = chars[j].1;
                if ch.is_ascii_digit() || ch == '_' {
                    j += 1;
                } else if ch == '.' && !seen_dot && !seen_exp {
                    // not a broadcast operator like `1 ./ x`
                    if j + 1 < n && !chars[j + 1].1.is_ascii_digit() {
                        break;
                    }
                    seen_dot = true;
                    j += 1;
                } else if (ch == 'e' || ch == 'E') && !seen_exp {
                    let mut k = j + 1;
                    if k < n && (chars[k].1 == '+' || chars[k].1 == '-') {
                        k += 1;
                    }
                    if k < n && chars[k].1.is_ascii_digit() {
                        seen_exp = true;
                        j = k;
                    } else {
                        break;
                    }
                } else {
                    break;
                }
            }
            let end = if j < n { chars[j].0 } else { source.len() };
            let lexeme = &source[byte..end];
            push(&mut tokens, TokenKind::Number, lexeme, String::new(), tline, tcol, byte, end);
            advance!(j - i);
            continue;
        }

        // operators and punctuation
        let two = if i + 1 < n {
            let end2 = if i + 2 < n { chars[i + 2].0 } else { source.len() };
            &source[byte..end2]
        } else {
            ""
        };
        let (kind, len, lexeme): (TokenKind, usize, &str) = match two {
            ":=" => (TokenKind::Assign, 2, ":="),
            ".*" | "./" | ".^" | ".+" | ".-" => (TokenKind::Op, 2, two),
            _ => match c {
                '~' => (TokenKind::Tilde, 1, "~"),
                '=' => (TokenKind::Assign, 1, "="),
                '\'' => (TokenKind::Prime, 1, "'"),
                '(' => (TokenKind::LParen, 1, "("),
                ')' => (TokenKind::RParen, 1, ")"),
                '[' => (TokenKind::LBracket, 1, "["),
                ']' => (TokenKind::RBracket, 1, "]"),
                ',' => (TokenKind::Comma, 1, ","),
                ';' => (TokenKind::Semicolon, 1, ";"),
                '+' | '-' | '*' | '/' | '^' => {
                    let end1 = if i + 1 < n { chars[i + 1].0 } else { source.len() };
                    (TokenKind::Op, 1, &source[byte..end1])
                }
                _ => {
                    return Err(DslError::Lex {
                        line: tline,
                        column: tcol,
                        message: format!("character `{c}` is not part of the language"),
                    })
                }
            },
        };
        if kind == TokenKind::Prime {
            // primes only follow identifiers
            let prev_ok = tokens
                .last()
                .map(|t| t.kind == TokenKind::Ident && t.end == byte)
                .unwrap_or(false);
            if !prev_ok {
                return Err(DslError::Lex {
                    line: tline,
                    column: tcol,
                    message: "`'` may only follow an identifier".into(),
                });
            }
        }
        let end = byte + lexeme.len();
        push(&mut tokens, kind, lexeme, String::new(), tline, tcol, byte, end);
        advance!(len);
    }
    tokens.push(Token {
        kind: TokenKind::Eof,
        lexeme: String::new(),
        canonical: String::new(),
        line,
        column: col,
        start: source.len(),
        end: source.len(),
    });
    Ok(tokens)
}
