//! Field-definition language.
//!
//! Scalar fields such as defining functions and metric entries are written as
//! small arithmetic expressions over `x1..xn` and named parameters:
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' unary)?
//! primary := number | ident | ident '(' expr ')' | '(' expr ')'
//! ```
//!
//! Functions: `exp`, `log`, `sqrt`, `sin`, `cos`. Parameters are bound at
//! evaluation time, so one parsed expression can be swept over parameter
//! values.

mod eval;
mod parser;

use std::collections::BTreeMap;
use std::fmt;

pub use eval::EvalError;
pub use parser::{ParseError, ParseOptions};

/// Parameter bindings used at evaluation time.
pub type Params = BTreeMap<String, f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Sin => "sin",
            Func::Cos => "cos",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            _ => return None,
        })
    }
}

/// Expression tree node. Variables are zero-based (`x1` is `Var(0)`).
#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Num(f64),
    Var(usize),
    Param(String),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

impl Node {
    fn precedence(&self) -> u8 {
        match self {
            Node::Bin(BinOp::Add | BinOp::Sub, ..) => 1,
            Node::Bin(BinOp::Mul | BinOp::Div, ..) => 2,
            Node::Neg(_) => 3,
            Node::Bin(BinOp::Pow, ..) => 4,
            _ => 5,
        }
    }

    pub fn add(a: Node, b: Node) -> Node {
        Node::Bin(BinOp::Add, Box::new(a), Box::new(b))
    }
    pub fn sub(a: Node, b: Node) -> Node {
        Node::Bin(BinOp::Sub, Box::new(a), Box::new(b))
    }
    pub fn mul(a: Node, b: Node) -> Node {
        Node::Bin(BinOp::Mul, Box::new(a), Box::new(b))
    }
    pub fn div(a: Node, b: Node) -> Node {
        Node::Bin(BinOp::Div, Box::new(a), Box::new(b))
    }
    pub fn pow(a: Node, b: Node) -> Node {
        Node::Bin(BinOp::Pow, Box::new(a), Box::new(b))
    }
    pub fn call(f: Func, a: Node) -> Node {
        Node::Call(f, Box::new(a))
    }

    /// Largest variable index referenced, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Node::Var(i) => Some(*i),
            Node::Num(_) | Node::Param(_) => None,
            Node::Neg(a) | Node::Call(_, a) => a.max_var(),
            Node::Bin(_, a, b) => match (a.max_var(), b.max_var()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    pub fn params(&self, out: &mut Vec<String>) {
        match self {
            Node::Param(p) => {
                if !out.contains(p) {
                    out.push(p.clone());
                }
            }
            Node::Num(_) | Node::Var(_) => {}
            Node::Neg(a) | Node::Call(_, a) => a.params(out),
            Node::Bin(_, a, b) => {
                a.params(out);
                b.params(out);
            }
        }
    }

    /// Replace every occurrence of variable `index` by `with`.
    pub fn substitute(&self, index: usize, with: &Node) -> Node {
        match self {
            Node::Var(i) if *i == index => with.clone(),
            Node::Num(_) | Node::Var(_) | Node::Param(_) => self.clone(),
            Node::Neg(a) => Node::Neg(Box::new(a.substitute(index, with))),
            Node::Call(f, a) => Node::Call(*f, Box::new(a.substitute(index, with))),
            Node::Bin(op, a, b) => Node::Bin(
                *op,
                Box::new(a.substitute(index, with)),
                Box::new(b.substitute(index, with)),
            ),
        }
    }

    fn fmt_child(&self, f: &mut fmt::Formatter<'_>, child: &Node, parens: bool) -> fmt::Result {
        if parens {
            write!(f, "({child})")
        } else {
            write!(f, "{child}")
        }
    }
}

impl fmt::Display for Node {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Node::Num(v) => write!(f, "{v}"),
            Node::Var(i) => write!(f, "x{}", i + 1),
            Node::Param(p) => f.write_str(p),
            Node::Call(func, a) => write!(f, "{}({a})", func.name()),
            Node::Neg(a) => {
                f.write_str("-")?;
                self.fmt_child(f, a, a.precedence() < 3)
            }
            Node::Bin(op, a, b) => {
                let p = self.precedence();
                let sym = match op {
                    BinOp::Add => " + ",
                    BinOp::Sub => " - ",
                    BinOp::Mul => "*",
                    BinOp::Div => "/",
                    BinOp::Pow => "^",
                };
                if *op == BinOp::Pow {
                    self.fmt_child(f, a, a.precedence() <= p)?;
                    f.write_str(sym)?;
                    self.fmt_child(f, b, b.precedence() < p)
                } else {
                    self.fmt_child(f, a, a.precedence() < p)?;
                    f.write_str(sym)?;
                    self.fmt_child(f, b, b.precedence() <= p)
                }
            }
        }
    }
}

/// A parsed scalar field over `R^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expression {
    root: Node,
    dim: usize,
}

impl Expression {
    /// Parse with default options: any identifier that is not a variable or a
    /// function becomes a parameter.
    pub fn parse(text: &str, dim: usize) -> Result<Self, ParseError> {
        Self::parse_with(text, &ParseOptions::new(dim))
    }

    pub fn parse_with(text: &str, opts: &ParseOptions) -> Result<Self, ParseError> {
        let root = parser::parse(text, opts)?;
        Ok(Self {
            root,
            dim: opts.dim,
        })
    }

    /// Wrap an already-built tree. Fails if it references a variable past `dim`.
    pub fn from_node(root: Node, dim: usize) -> Result<Self, ParseError> {
        if let Some(i) = root.max_var() {
            if i >= dim {
                return Err(ParseError::VariableOutOfRange {
                    offset: 0,
                    index: i + 1,
                    dim,
                });
            }
        }
        Ok(Self { root, dim })
    }

    pub fn root(&self) -> &Node {
        &self.root
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn parameters(&self) -> Vec<String> {
        let mut out = Vec::new();
        self.root.params(&mut out);
        out
    }
}

impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.root.fmt(f)
    }
}
