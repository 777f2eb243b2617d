use super::ParseDiagnostic;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TokenKind {
    Ident,
    Integer,
    /// `<-`
    Arrow,
    /// `.` (min-AND)
    Dot,
    /// `..` (range separator in scenario files)
    DotDot,
    /// `+` (max-OR)
    Plus,
    /// `^` (new-XOR)
    Caret,
    LParen,
    RParen,
    Comma,
    Equals,
    /// `[name]` section header; the text holds the name without brackets.
    Section,
    Newline,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    pub line: u32,
    pub column: u32,
}

impl Token {
    fn new(kind: TokenKind, text: impl Into<String>, line: u32, column: u32) -> Self {
        Token {
            kind,
            text: text.into(),
            line,
            column,
        }
    }

    pub fn is(&self, kind: TokenKind) -> bool {
        self.kind == kind
    }
}

/// Tokenizes a whole source file. Comments (`//` to end of line) are
/// dropped; newlines are kept because the formats are line oriented.
pub fn tokenize(source: &str) -> Result<Vec<Token>, ParseDiagnostic> {
    let mut tokens = Vec::new();
    let mut chars = source.chars().peekable();
    let mut line: u32 = 1;
    let mut column: u32 = 1;

    macro_rules! bump {
        () => {{
            chars.next();
            column += 1;
        }};
    }

    while let Some(&c) = chars.peek() {
        match c {
            '\n' => {
                chars.next();
                tokens.push(Token::new(TokenKind::Newline, "\n", line, column));
                line += 1;
                column = 1;
            }
            '\r' | ' ' | '\t' => bump!(),
            '/' => {
                let start = column;
                bump!();
                if chars.peek() == Some(&'/') {
                    while let Some(&n) = chars.peek() {
                        if n == '\n' {
                            break;
                        }
                        bump!();
                    }
                } else {
                    return Err(ParseDiagnostic::error(
                        "illegal character '/'; comments start with '//'",
                        line,
                        start,
                    ));
                }
            }
            '[' => {
                let start = column;
                bump!();
                let mut name = String::new();
                loop {
                    match chars.peek() {
                        Some(&']') => {
                            bump!();
                            break;
                        }
                        Some(&n) if n != '\n' => {
                            name.push(n);
                            bump!();
                        }
                        _ => {
                            return Err(ParseDiagnostic::error(
                                "unterminated section header",
                                line,
                                start,
                            ));
                        }
                    }
                }
                tokens.push(Token::new(TokenKind::Section, name, line, start));
            }
            '<' => {
                let start = column;
                bump!();
                if chars.peek() == Some(&'-') {
                    bump!();
                    tokens.push(Token::new(TokenKind::Arrow, "<-", line, start));
                } else {
                    return Err(ParseDiagnostic::error(
                        "illegal character '<'; expected '<-'",
                        line,
                        start,
                    ));
                }
            }
            '.' => {
                let start = column;
                bump!();
                if chars.peek() == Some(&'.') {
                    bump!();
                    tokens.push(Token::new(TokenKind::DotDot, "..", line, start));
                } else {
                    tokens.push(Token::new(TokenKind::Dot, ".", line, start));
                }
            }
            '+' => {
                tokens.push(Token::new(TokenKind::Plus, "+", line, column));
                bump!();
            }
            '^' => {
                tokens.push(Token::new(TokenKind::Caret, "^", line, column));
                bump!();
            }
            '(' => {
                tokens.push(Token::new(TokenKind::LParen, "(", line, column));
                bump!();
            }
            ')' => {
                tokens.push(Token::new(TokenKind::RParen, ")", line, column));
                bump!();
            }
            ',' => {
                tokens.push(Token::new(TokenKind::Comma, ",", line, column));
                bump!();
            }
            '=' => {
                tokens.push(Token::new(TokenKind::Equals, "=", line, column));
                bump!();
            }
            c if c.is_ascii_alphabetic() => {
                let start = column;
                let mut word = String::new();
                while let Some(&n) = chars.peek() {
                    if n.is_ascii_alphanumeric() || n == '_' {
                        word.push(n);
                        bump!();
                    } else {
                        break;
                    }
                }
                tokens.push(Token::new(TokenKind::Ident, word, line, start));
            }
            c if c.is_ascii_digit() => {
                let start = column;
                let mut digits = String::new();
                while let Some(&n) = chars.peek() {
                    if n.is_ascii_digit() {
                        digits.push(n);
                        bump!();
                    } else {
                        break;
                    }
                }
                tokens.push(Token::new(TokenKind::Integer, digits, line, start));
            }
            other => {
                return Err(ParseDiagnostic::error(
                    format!("illegal character {other:?}"),
                    line,
                    column,
                ));
            }
        }
    }
    Ok(tokens)
}
