//! Whitespace-insensitive s-expression reader with source positions.

use std::fmt;

use super::{ParseError, ParseErrorKind};

/// 1-based line and column of a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default)]
pub struct Pos {
    pub line: usize,
    pub col: usize,
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.col)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Sexpr {
    Symbol(String, Pos),
    List(Vec<Sexpr>, Pos),
}

impl Sexpr {
    pub fn pos(&self) -> Pos {
        match self {
            Sexpr::Symbol(_, p) | Sexpr::List(_, p) => *p,
        }
    }

    pub fn as_symbol(&self) -> Option<&str> {
        match self {
            Sexpr::Symbol(s, _) => Some(s),
            Sexpr::List(..) => None,
        }
    }

    pub fn as_list(&self) -> Option<&[Sexpr]> {
        match self {
            Sexpr::List(items, _) => Some(items),
            Sexpr::Symbol(..) => None,
        }
    }

    /// The leading symbol of a list, lowercased, e.g. `and` for `(and ...)`.
    pub fn head(&self) -> Option<String> {
        self.as_list()
            .and_then(|items| items.first())
            .and_then(Sexpr::as_symbol)
            .map(str::to_ascii_lowercase)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Open,
    Close,
    Symbol(String),
}

fn tokenize(text: &str) -> Vec<(Token, Pos)> {
    let mut tokens = Vec::new();
    let mut line = 1;
    let mut col = 0;
    let mut current: Option<(String, Pos)> = None;
    let mut in_comment = false;

    let flush = |current: &mut Option<(String, Pos)>, tokens: &mut Vec<(Token, Pos)>| {
        if let Some((s, p)) = current.take() {
            tokens.push((Token::Symbol(s), p));
        }
    };

    for ch in text.chars() {
        if ch == '\n' {
            flush(&mut current, &mut tokens);
            line += 1;
            col = 0;
            in_comment = false;
            continue;
        }
        col += 1;
        if in_comment {
            continue;
        }
        let pos = Pos { line, col };
        match ch {
            ';' => {
                flush(&mut current, &mut tokens);
                in_comment = true;
            }
            '(' => {
                flush(&mut current, &mut tokens);
                tokens.push((Token::Open, pos));
            }
            ')' => {
                flush(&mut current, &mut tokens);
                tokens.push((Token::Close, pos));
            }
            c if c.is_whitespace() => flush(&mut current, &mut tokens),
            c => match &mut current {
                Some((s, _)) => s.push(c),
                None => current = Some((c.to_string(), pos)),
            },
        }
    }
    flush(&mut current, &mut tokens);
    tokens
}

/// Reads every top-level expression in `text`.
pub fn read_all(text: &str) -> Result<Vec<Sexpr>, ParseError> {
    let tokens = tokenize(text);
    let mut stack: Vec<(Vec<Sexpr>, Pos)> = Vec::new();
    let mut top = Vec::new();
    for (tok, pos) in tokens {
        match tok {
            Token::Open => stack.push((Vec::new(), pos)),
            Token::Close => {
                let (items, open) = stack.pop().ok_or_else(|| {
                    ParseError::new(
                        ParseErrorKind::Syntax {
                            expected: "expression".into(),
                            found: "`)`".into(),
                        },
                        pos,
                    )
                })?;
                let list = Sexpr::List(items, open);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(list),
                    None => top.push(list),
                }
            }
            Token::Symbol(s) => {
                let sym = Sexpr::Symbol(s, pos);
                match stack.last_mut() {
                    Some((parent, _)) => parent.push(sym),
                    None => top.push(sym),
                }
            }
        }
    }
    if let Some((_, open)) = stack.last() {
        return Err(ParseError::new(
            ParseErrorKind::Syntax {
                expected: "`)`".into(),
                found: "end of input".into(),
            },
            *open,
        ));
    }
    Ok(top)
}
