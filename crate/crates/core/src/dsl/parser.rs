use thiserror::Error;

use super::{BinOp, Func, Node};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {expected}")]
    Syntax { offset: usize, expected: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { offset: usize, name: String },
    #[error("variable index out of range: x{index} at offset {offset} (dimension {dim})")]
    VariableOutOfRange {
        offset: usize,
        index: usize,
        dim: usize,
    },
}

impl ParseError {
    /// Short category name used when reporting the failing field.
    pub fn kind_name(&self) -> &'static str {
        match self {
            ParseError::Syntax { .. } => "syntax error",
            ParseError::UnknownIdentifier { .. } => "unknown identifier",
            ParseError::VariableOutOfRange { .. } => "variable index out of range",
        }
    }

    pub fn offset(&self) -> usize {
        match self {
            ParseError::Syntax { offset, .. }
            | ParseError::UnknownIdentifier { offset, .. }
            | ParseError::VariableOutOfRange { offset, .. } => *offset,
        }
    }
}

/// Parser configuration.
#[derive(Debug, Clone)]
pub struct ParseOptions {
    pub dim: usize,
    /// When set, identifiers outside this list are rejected instead of being
    /// treated as parameters.
    pub params: Option<Vec<String>>,
    /// Extra variable names mapped to zero-based indices (e.g. `s` -> 0).
    pub aliases: Vec<(String, usize)>,
}

impl ParseOptions {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            params: None,
            aliases: Vec::new(),
        }
    }

    pub fn with_params(mut self, params: impl IntoIterator<Item = String>) -> Self {
        self.params = Some(params.into_iter().collect());
        self
    }

    pub fn with_alias(mut self, name: &str, index: usize) -> Self {
        self.aliases.push((name.to_string(), index));
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(u8),
    LParen,
    RParen,
    End,
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    tok: Tok,
    tok_start: usize,
    opts: &'a ParseOptions,
}

pub(super) fn parse(text: &str, opts: &ParseOptions) -> Result<Node, ParseError> {
    let mut p = Parser {
        src: text.as_bytes(),
        pos: 0,
        tok: Tok::End,
        tok_start: 0,
        opts,
    };
    p.advance()?;
    if p.tok == Tok::End {
        return Err(p.expected("expected expression"));
    }
    let node = p.expr()?;
    if p.tok != Tok::End {
        return Err(p.expected("expected operator or end of input"));
    }
    Ok(node)
}

impl Parser<'_> {
    fn expected(&self, what: &str) -> ParseError {
        ParseError::Syntax {
            offset: self.tok_start,
            expected: what.to_string(),
        }
    }

    fn advance(&mut self) -> Result<(), ParseError> {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        self.tok_start = self.pos;
        let Some(&c) = self.src.get(self.pos) else {
            self.tok = Tok::End;
            return Ok(());
        };
        self.tok = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                self.pos += 1;
                Tok::Op(c)
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b'0'..=b'9' | b'.' => self.number()?,
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let start = self.pos;
                while self.pos < self.src.len()
                    && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
                {
                    self.pos += 1;
                }
                Tok::Ident(String::from_utf8_lossy(&self.src[start..self.pos]).into_owned())
            }
            _ => {
                return Err(ParseError::Syntax {
                    offset: self.pos,
                    expected: format!("unexpected character `{}`", c as char),
                })
            }
        };
        Ok(())
    }

    fn number(&mut self) -> Result<Tok, ParseError> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            if self.src.get(self.pos).is_some_and(|c| c.is_ascii_digit()) {
                digits(self);
            } else {
                self.pos = save;
            }
        }
        let lexeme = std::str::from_utf8(&self.src[start..self.pos]).unwrap_or("");
        lexeme
            .parse::<f64>()
            .map(Tok::Num)
            .map_err(|_| ParseError::Syntax {
                offset: start,
                expected: format!("malformed number `{lexeme}`"),
            })
    }

    fn expr(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.tok {
                Tok::Op(b'+') => BinOp::Add,
                Tok::Op(b'-') => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance()?;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.tok {
                Tok::Op(b'*') => BinOp::Mul,
                Tok::Op(b'/') => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.advance()?;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node, ParseError> {
        if self.tok == Tok::Op(b'-') {
            self.advance()?;
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node, ParseError> {
        let base = self.primary()?;
        if self.tok == Tok::Op(b'^') {
            self.advance()?;
            let exp = self.unary()?;
            return Ok(Node::pow(base, exp));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Node, ParseError> {
        let start = self.tok_start;
        match std::mem::replace(&mut self.tok, Tok::End) {
            Tok::Num(v) => {
                self.advance()?;
                Ok(Node::Num(v))
            }
            Tok::LParen => {
                self.advance()?;
                let inner = self.expr()?;
                if self.tok != Tok::RParen {
                    return Err(self.expected("expected `)`"));
                }
                self.advance()?;
                Ok(inner)
            }
            Tok::Ident(name) => {
                self.advance()?;
                if let Some(func) = Func::from_name(&name) {
                    if self.tok != Tok::LParen {
                        return Err(self.expected("expected `(` after function name"));
                    }
                    self.advance()?;
                    if self.tok == Tok::End || self.tok == Tok::RParen {
                        return Err(self.expected("expected expression"));
                    }
                    let arg = self.expr()?;
                    if self.tok != Tok::RParen {
                        return Err(self.expected("expected `)`"));
                    }
                    self.advance()?;
                    return Ok(Node::call(func, arg));
                }
                if self.tok == Tok::LParen {
                    return Err(ParseError::UnknownIdentifier {
                        offset: start,
                        name,
                    });
                }
                self.identifier(name, start)
            }
            other => {
                self.tok = other;
                Err(self.expected("expected expression"))
            }
        }
    }

    fn identifier(&self, name: String, offset: usize) -> Result<Node, ParseError> {
        if let Some((_, idx)) = self.opts.aliases.iter().find(|(a, _)| *a == name) {
            return Ok(Node::Var(*idx));
        }
        if let Some(digits) = name.strip_prefix('x') {
            if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) {
                let index: usize = digits.parse().unwrap_or(usize::MAX);
                if index == 0 || index > self.opts.dim {
                    return Err(ParseError::VariableOutOfRange {
                        offset,
                        index,
                        dim: self.opts.dim,
                    });
                }
                return Ok(Node::Var(index - 1));
            }
        }
        match &self.opts.params {
            Some(allowed) if !allowed.contains(&name) => {
                Err(ParseError::UnknownIdentifier { offset, name })
            }
            _ => Ok(Node::Param(name)),
        }
    }
}
