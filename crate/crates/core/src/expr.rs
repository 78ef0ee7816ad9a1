//! Closed-form scalar expressions over chart coordinates.
//!
//! Grammar: `+ - * / ^`, unary minus, parentheses, decimal literals, the
//! constant `pi`, the variables `x`, `y`, `z`, `theta` and the functions
//! `sin`, `cos`, `exp`, `sqrt`. `^` is right associative and binds tighter
//! than unary minus.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Var {
    X,
    Y,
    Z,
    Theta,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Func {
    Sin,
    Cos,
    Exp,
    Sqrt,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(Var),
    Neg(Box<Node>),
    Bin(char, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
}

/// A parsed expression together with its source text.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
}

struct Parser<'a> {
    chars: Vec<(usize, char)>,
    pos: usize,
    text: &'a str,
}

impl<'a> Parser<'a> {
    fn column(&self) -> usize {
        self.chars
            .get(self.pos)
            .map_or(self.text.chars().count() + 1, |&(i, _)| {
                self.text[..i].chars().count() + 1
            })
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Expression {
            column: self.column(),
            message: message.into(),
        })
    }

    fn skip_ws(&mut self) {
        while self.chars.get(self.pos).is_some_and(|c| c.1.is_whitespace()) {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).map(|c| c.1)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn sum(&mut self) -> Result<Node> {
        let mut lhs = self.product()?;
        while let Some(op @ ('+' | '-')) = self.peek() {
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.product()?));
        }
        Ok(lhs)
    }

    fn product(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        while let Some(op @ ('*' | '/')) = self.peek() {
            self.pos += 1;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(self.unary()?));
        }
        Ok(lhs)
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat('-') {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat('+') {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat('^') {
            return Ok(Node::Bin('^', Box::new(base), Box::new(self.unary()?)));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek() {
            None => self.fail("unexpected end of expression"),
            Some('(') => {
                self.pos += 1;
                let inner = self.sum()?;
                if !self.eat(')') {
                    return self.fail("expected ')'");
                }
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == '.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == '_' => self.name(),
            Some(c) => self.fail(format!("unexpected character '{c}'")),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        let mut end = self.pos;
        let at = |i: usize| self.chars.get(i).map(|c| c.1);
        while at(end).is_some_and(|c| c.is_ascii_digit() || c == '.') {
            end += 1;
        }
        if matches!(at(end), Some('e' | 'E')) {
            let mut k = end + 1;
            if matches!(at(k), Some('+' | '-')) {
                k += 1;
            }
            if at(k).is_some_and(|c| c.is_ascii_digit()) {
                while at(k).is_some_and(|c| c.is_ascii_digit()) {
                    k += 1;
                }
                end = k;
            }
        }
        let literal: String = self.chars[start..end].iter().map(|c| c.1).collect();
        match literal.parse::<f64>() {
            Ok(v) => {
                self.pos = end;
                Ok(Node::Num(v))
            }
            Err(_) => self.fail(format!("malformed number '{literal}'")),
        }
    }

    fn name(&mut self) -> Result<Node> {
        let start = self.pos;
        let mut end = self.pos;
        while self
            .chars
            .get(end)
            .is_some_and(|c| c.1.is_ascii_alphanumeric() || c.1 == '_')
        {
            end += 1;
        }
        let name: String = self.chars[start..end].iter().map(|c| c.1).collect();
        let func = match name.as_str() {
            "x" | "y" | "z" | "theta" | "pi" => None,
            "sin" => Some(Func::Sin),
            "cos" => Some(Func::Cos),
            "exp" => Some(Func::Exp),
            "sqrt" => Some(Func::Sqrt),
            _ => return self.fail(format!("unknown identifier '{name}'")),
        };
        self.pos = end;
        let Some(func) = func else {
            return Ok(match name.as_str() {
                "x" => Node::Var(Var::X),
                "y" => Node::Var(Var::Y),
                "z" => Node::Var(Var::Z),
                "theta" => Node::Var(Var::Theta),
                _ => Node::Num(std::f64::consts::PI),
            });
        };
        if !self.eat('(') {
            return self.fail(format!("expected '(' after '{name}'"));
        }
        let arg = self.sum()?;
        if !self.eat(')') {
            return self.fail("expected ')'");
        }
        Ok(Node::Call(func, Box::new(arg)))
    }
}

impl Expr {
    pub fn parse(text: &str) -> Result<Self> {
        let mut p = Parser {
            chars: text.char_indices().collect(),
            pos: 0,
            text,
        };
        let root = p.sum()?;
        if p.peek().is_some() {
            return p.fail("unexpected trailing input");
        }
        Ok(Self {
            source: text.to_string(),
            root,
        })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Evaluates at a chart or embedding point. `theta` is the coordinate
    /// itself in one dimension and the polar angle of `(x, y)` otherwise.
    pub fn eval(&self, p: &[f64]) -> f64 {
        let x = p.first().copied().unwrap_or(0.0);
        let y = p.get(1).copied().unwrap_or(0.0);
        let z = p.get(2).copied().unwrap_or(0.0);
        let theta = if p.len() == 1 { x } else { y.atan2(x) };
        eval(&self.root, [x, y, z, theta])
    }

    pub fn is_constant(&self) -> bool {
        fn walk(n: &Node) -> bool {
            match n {
                Node::Num(_) => true,
                Node::Var(_) => false,
                Node::Neg(a) | Node::Call(_, a) => walk(a),
                Node::Bin(_, a, b) => walk(a) && walk(b),
            }
        }
        walk(&self.root)
    }
}

fn eval(n: &Node, v: [f64; 4]) -> f64 {
    match n {
        Node::Num(c) => *c,
        Node::Var(var) => v[*var as usize],
        Node::Neg(a) => -eval(a, v),
        Node::Call(f, a) => {
            let a = eval(a, v);
            match f {
                Func::Sin => a.sin(),
                Func::Cos => a.cos(),
                Func::Exp => a.exp(),
                Func::Sqrt => a.sqrt(),
            }
        }
        Node::Bin(op, a, b) => {
            let (a, b) = (eval(a, v), eval(b, v));
            match op {
                '+' => a + b,
                '-' => a - b,
                '*' => a * b,
                '/' => a / b,
                _ => a.powf(b),
            }
        }
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

impl FromStr for Expr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::parse(s)
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.source)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        Expr::parse(&text).map_err(serde::de::Error::custom)
    }
}
