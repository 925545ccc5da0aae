use super::{CmpOp, SyntaxError};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Ident(String),
    Variable(String),
    Int(i64),
    If,
    DotDot,
    Dot,
    Comma,
    Semicolon,
    Colon,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Cmp(CmpOp),
    Not,
    Count,
    Show,
    /// Any other `#name` directive; only recognized so the parser can
    /// report it as unsupported.
    Directive(String),
    Slash,
    Plus,
    Minus,
    Star,
    /// `|`, recognized so that disjunctive heads get a clear diagnostic.
    Pipe,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub line: usize,
    pub column: usize,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
    line: usize,
    column: usize,
}

impl Cursor<'_> {
    fn peek(&mut self) -> Option<char> {
        self.chars.peek().map(|&(_, c)| c)
    }

    fn bump(&mut self) -> Option<char> {
        let (_, c) = self.chars.next()?;
        if c == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(c)
    }

    fn eat(&mut self, expected: char) -> bool {
        if self.peek() == Some(expected) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn take_word(&mut self, first: char) -> String {
        let mut word = String::from(first);
        while let Some(c) = self.peek() {
            if c.is_ascii_alphanumeric() || c == '_' || c == '\'' {
                word.push(c);
                self.bump();
            } else {
                break;
            }
        }
        word
    }
}

/// Splits program text into tokens. `%` starts a comment running to the end
/// of the line.
pub fn tokenize(text: &str) -> Result<Vec<Token>, SyntaxError> {
    let mut cur = Cursor {
        chars: text.char_indices().peekable(),
        line: 1,
        column: 1,
    };
    let mut tokens = Vec::new();
    while let Some(c) = cur.peek() {
        let (line, column) = (cur.line, cur.column);
        if c.is_whitespace() {
            cur.bump();
            continue;
        }
        if c == '%' {
            while let Some(c) = cur.peek() {
                if c == '\n' {
                    break;
                }
                cur.bump();
            }
            continue;
        }
        cur.bump();
        let illegal = || SyntaxError::IllegalCharacter { line, column, ch: c };
        let kind = match c {
            'a'..='z' => {
                let word = cur.take_word(c);
                if word == "not" {
                    TokenKind::Not
                } else {
                    TokenKind::Ident(word)
                }
            }
            'A'..='Z' | '_' => TokenKind::Variable(cur.take_word(c)),
            '0'..='9' => {
                let mut digits = String::from(c);
                while let Some(d) = cur.peek().filter(char::is_ascii_digit) {
                    digits.push(d);
                    cur.bump();
                }
                let value = digits
                    .parse::<i64>()
                    .map_err(|_| SyntaxError::IntegerOverflow { line, column })?;
                TokenKind::Int(value)
            }
            ':' => {
                if cur.eat('-') {
                    TokenKind::If
                } else {
                    TokenKind::Colon
                }
            }
            '.' => {
                if cur.eat('.') {
                    TokenKind::DotDot
                } else {
                    TokenKind::Dot
                }
            }
            ',' => TokenKind::Comma,
            ';' => TokenKind::Semicolon,
            '(' => TokenKind::LParen,
            ')' => TokenKind::RParen,
            '{' => TokenKind::LBrace,
            '}' => TokenKind::RBrace,
            '/' => TokenKind::Slash,
            '+' => TokenKind::Plus,
            '-' => TokenKind::Minus,
            '*' => TokenKind::Star,
            '|' => TokenKind::Pipe,
            '=' => {
                cur.eat('=');
                TokenKind::Cmp(CmpOp::Eq)
            }
            '!' => {
                if cur.eat('=') {
                    TokenKind::Cmp(CmpOp::Ne)
                } else {
                    return Err(illegal());
                }
            }
            '<' => {
                if cur.eat('=') {
                    TokenKind::Cmp(CmpOp::Le)
                } else {
                    TokenKind::Cmp(CmpOp::Lt)
                }
            }
            '>' => {
                if cur.eat('=') {
                    TokenKind::Cmp(CmpOp::Ge)
                } else {
                    TokenKind::Cmp(CmpOp::Gt)
                }
            }
            '#' => match cur.peek() {
                Some(n) if n.is_ascii_lowercase() => {
                    cur.bump();
                    let name = cur.take_word(n);
                    match name.as_str() {
                        "count" => TokenKind::Count,
                        "show" => TokenKind::Show,
                        _ => TokenKind::Directive(name),
                    }
                }
                _ => return Err(illegal()),
            },
            _ => return Err(illegal()),
        };
        tokens.push(Token { kind, line, column });
    }
    Ok(tokens)
}
