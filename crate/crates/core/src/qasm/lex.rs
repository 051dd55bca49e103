// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain a
// copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! Tokenizer for the OpenQASM subset.

use super::QasmError;
use std::fmt;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Ident(String),
    Int(u64),
    Float(f64),
    LParen,
    RParen,
    LBracket,
    RBracket,
    LBrace,
    RBrace,
    Semi,
    Comma,
    Colon,
    Assign,
    Plus,
    Minus,
    Star,
    EqEq,
    NotEq,
    GreaterEq,
    LessEq,
    Greater,
    Less,
    Amp,
    Pipe,
    Caret,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(name) => write!(f, "`{name}`"),
            Tok::Int(v) => write!(f, "`{v}`"),
            Tok::Float(v) => write!(f, "`{v}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::LBracket => f.write_str("`[`"),
            Tok::RBracket => f.write_str("`]`"),
            Tok::LBrace => f.write_str("`{`"),
            Tok::RBrace => f.write_str("`}`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Colon => f.write_str("`:`"),
            Tok::Assign => f.write_str("`=`"),
            Tok::Plus => f.write_str("`+`"),
            Tok::Minus => f.write_str("`-`"),
            Tok::Star => f.write_str("`*`"),
            Tok::EqEq => f.write_str("`==`"),
            Tok::NotEq => f.write_str("`!=`"),
            Tok::GreaterEq => f.write_str("`>=`"),
            Tok::LessEq => f.write_str("`<=`"),
            Tok::Greater => f.write_str("`>`"),
            Tok::Less => f.write_str("`<`"),
            Tok::Amp => f.write_str("`&`"),
            Tok::Pipe => f.write_str("`|`"),
            Tok::Caret => f.write_str("`^`"),
            Tok::Eof => f.write_str("end of input"),
        }
    }
}

/// A token together with its 1-based source position.
#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub line: u32,
    pub column: u32,
}

/// Tokenize a full source text.  `//` comments run to end of line; the
/// logical operators `&&` and `||` lex as their bitwise counterparts, which
/// coincide on the 0/1 values conditions take here.
pub fn tokenize(text: &str) -> Result<Vec<Token>, QasmError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let mut i = 0usize;
    let mut line = 1u32;
    let mut column = 1u32;
    let advance = |i: &mut usize, line: &mut u32, column: &mut u32| {
        if chars[*i] == '\n' {
            *line += 1;
            *column = 1;
        } else {
            *column += 1;
        }
        *i += 1;
    };
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            advance(&mut i, &mut line, &mut column);
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                advance(&mut i, &mut line, &mut column);
            }
            continue;
        }
        let (tok_line, tok_column) = (line, column);
        let push = |tokens: &mut Vec<Token>, tok: Tok| {
            tokens.push(Token {
                tok,
                line: tok_line,
                column: tok_column,
            });
        };
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            let mut is_float = false;
            while i < chars.len() && chars[i].is_ascii_digit() {
                advance(&mut i, &mut line, &mut column);
            }
            if i < chars.len() && chars[i] == '.' {
                is_float = true;
                advance(&mut i, &mut line, &mut column);
                while i < chars.len() && chars[i].is_ascii_digit() {
                    advance(&mut i, &mut line, &mut column);
                }
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if matches!(chars.get(j), Some('+') | Some('-')) {
                    j += 1;
                }
                if chars.get(j).is_some_and(|d| d.is_ascii_digit()) {
                    is_float = true;
                    while i < j {
                        advance(&mut i, &mut line, &mut column);
                    }
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        advance(&mut i, &mut line, &mut column);
                    }
                }
            }
            let text: String = chars[start..i].iter().collect();
            let tok = if is_float {
                Tok::Float(text.parse().map_err(|_| QasmError::Parse {
                    line: tok_line,
                    column: tok_column,
                    message: format!("bad number `{text}`"),
                })?)
            } else {
                Tok::Int(text.parse().map_err(|_| QasmError::Parse {
                    line: tok_line,
                    column: tok_column,
                    message: format!("integer `{text}` out of range"),
                })?)
            };
            push(&mut tokens, tok);
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                advance(&mut i, &mut line, &mut column);
            }
            push(&mut tokens, Tok::Ident(chars[start..i].iter().collect()));
            continue;
        }
        let two = |d: char| chars.get(i + 1) == Some(&d);
        let (tok, width) = match c {
            '=' if two('=') => (Tok::EqEq, 2),
            '!' if two('=') => (Tok::NotEq, 2),
            '>' if two('=') => (Tok::GreaterEq, 2),
            '<' if two('=') => (Tok::LessEq, 2),
            '&' if two('&') => (Tok::Amp, 2),
            '|' if two('|') => (Tok::Pipe, 2),
            '=' => (Tok::Assign, 1),
            '>' => (Tok::Greater, 1),
            '<' => (Tok::Less, 1),
            '&' => (Tok::Amp, 1),
            '|' => (Tok::Pipe, 1),
            '^' => (Tok::Caret, 1),
            '(' => (Tok::LParen, 1),
            ')' => (Tok::RParen, 1),
            '[' => (Tok::LBracket, 1),
            ']' => (Tok::RBracket, 1),
            '{' => (Tok::LBrace, 1),
            '}' => (Tok::RBrace, 1),
            ';' => (Tok::Semi, 1),
            ',' => (Tok::Comma, 1),
            ':' => (Tok::Colon, 1),
            '+' => (Tok::Plus, 1),
            '-' => (Tok::Minus, 1),
            '*' => (Tok::Star, 1),
            other => {
                return Err(QasmError::Parse {
                    line: tok_line,
                    column: tok_column,
                    message: format!("unexpected character `{other}`"),
                })
            }
        };
        push(&mut tokens, tok);
        for _ in 0..width {
            advance(&mut i, &mut line, &mut column);
        }
    }
    tokens.push(Token {
        tok: Tok::Eof,
        line,
        column,
    });
    Ok(tokens)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(text: &str) -> Vec<Tok> {
        tokenize(text).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn numbers_split_into_int_and_float() {
        assert_eq!(
            kinds("4 2.5 1e-3 .75 6.02e23"),
            vec![
                Tok::Int(4),
                Tok::Float(2.5),
                Tok::Float(1e-3),
                Tok::Float(0.75),
                Tok::Float(6.02e23),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn duration_literal_splits_number_and_unit() {
        assert_eq!(
            kinds("delay(4dt)"),
            vec![
                Tok::Ident("delay".into()),
                Tok::LParen,
                Tok::Int(4),
                Tok::Ident("dt".into()),
                Tok::RParen,
                Tok::Eof
            ]
        );
    }

    #[test]
    fn logical_operators_fold_onto_bitwise() {
        assert_eq!(
            kinds("a || b && c"),
            vec![
                Tok::Ident("a".into()),
                Tok::Pipe,
                Tok::Ident("b".into()),
                Tok::Amp,
                Tok::Ident("c".into()),
                Tok::Eof
            ]
        );
    }

    #[test]
    fn positions_are_one_based_lines_and_columns() {
        let tokens = tokenize("x q[0];\n  cz q[0], q[1];").unwrap();
        assert_eq!((tokens[0].line, tokens[0].column), (1, 1));
        let cz = tokens.iter().find(|t| t.tok == Tok::Ident("cz".into())).unwrap();
        assert_eq!((cz.line, cz.column), (2, 3));
    }

    #[test]
    fn comments_are_skipped() {
        assert_eq!(
            kinds("x q[0]; // flip\n// whole line\nz q[0];"),
            vec![
                Tok::Ident("x".into()),
                Tok::Ident("q".into()),
                Tok::LBracket,
                Tok::Int(0),
                Tok::RBracket,
                Tok::Semi,
                Tok::Ident("z".into()),
                Tok::Ident("q".into()),
                Tok::LBracket,
                Tok::Int(0),
                Tok::RBracket,
                Tok::Semi,
                Tok::Eof
            ]
        );
    }

    #[test]
    fn stray_characters_error_with_position() {
        let err = tokenize("x q[0];\n  #").unwrap_err();
        assert_eq!(
            err,
            QasmError::Parse {
                line: 2,
                column: 3,
                message: "unexpected character `#`".into()
            }
        );
    }
}
