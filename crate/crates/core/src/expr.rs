//! Minimal arithmetic expressions over the cell variables `y1..yd`, used for
//! user-defined coefficient entries and boundary data.
//!
//! Grammar: `+ - * /` (also `− × ÷`), unary minus, parentheses, `sin`, `cos`,
//! decimal constants, `pi`, and variables `y1`, `y2`, ... (or `y₁`, `y₂`, ...).

use std::fmt;

use crate::error::Error;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
enum Node {
    Const(f64),
    Var(usize),
    Neg(Box<Node>),
    Add(Box<Node>, Box<Node>),
    Sub(Box<Node>, Box<Node>),
    Mul(Box<Node>, Box<Node>),
    Div(Box<Node>, Box<Node>),
    Sin(Box<Node>),
    Cos(Box<Node>),
}

/// A parsed expression together with its source text.
#[derive(Clone, Debug, PartialEq)]
pub struct Expr {
    source: String,
    root: Node,
    max_var: usize,
}

impl Expr {
    pub fn parse(source: &str) -> Result<Self, Error> {
        let tokens = tokenize(source)?;
        let mut p = Parser { tokens: &tokens, pos: 0, max_var: 0 };
        let root = p.expr()?;
        if p.pos != tokens.len() {
            return Err(Error::Parse(format!(
                "unexpected trailing input at token {} in `{source}`",
                p.pos
            )));
        }
        Ok(Self { source: source.to_string(), root, max_var: p.max_var })
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    /// Highest variable index referenced (1-based; 0 when constant).
    pub fn max_variable(&self) -> usize {
        self.max_var
    }

    pub fn eval<T: Real>(&self, y: &[T]) -> T {
        eval(&self.root, y)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.source)
    }
}

fn eval<T: Real>(n: &Node, y: &[T]) -> T {
    match n {
        Node::Const(c) => T::lit(*c),
        Node::Var(i) => y.get(*i).copied().unwrap_or_else(T::zero),
        Node::Neg(a) => -eval(a, y),
        Node::Add(a, b) => eval(a, y) + eval(b, y),
        Node::Sub(a, b) => eval(a, y) - eval(b, y),
        Node::Mul(a, b) => eval(a, y) * eval(b, y),
        Node::Div(a, b) => eval(a, y) / eval(b, y),
        Node::Sin(a) => eval(a, y).sin(),
        Node::Cos(a) => eval(a, y).cos(),
    }
}

#[derive(Clone, Debug, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Var(usize),
    Plus,
    Minus,
    Star,
    Slash,
    LParen,
    RParen,
}

fn subscript_digit(c: char) -> Option<u32> {
    let base = '₀' as u32;
    let v = c as u32;
    (base..base + 10).contains(&v).then(|| v - base)
}

fn tokenize(s: &str) -> Result<Vec<Tok>, Error> {
    let chars: Vec<char> = s.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        match c {
            ' ' | '\t' => i += 1,
            '+' => {
                out.push(Tok::Plus);
                i += 1
            }
            '-' | '−' => {
                out.push(Tok::Minus);
                i += 1
            }
            '*' | '×' => {
                out.push(Tok::Star);
                i += 1
            }
            '/' | '÷' => {
                out.push(Tok::Slash);
                i += 1
            }
            '(' => {
                out.push(Tok::LParen);
                i += 1
            }
            ')' => {
                out.push(Tok::RParen);
                i += 1
            }
            'π' => {
                out.push(Tok::Num(std::f64::consts::PI));
                i += 1
            }
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let save = i;
                    i += 1;
                    if i < chars.len() && (chars[i] == '+' || chars[i] == '-') {
                        i += 1;
                    }
                    if i < chars.len() && chars[i].is_ascii_digit() {
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    } else {
                        i = save;
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let v = text
                    .parse::<f64>()
                    .map_err(|_| Error::Parse(format!("bad number `{text}`")))?;
                out.push(Tok::Num(v));
            }
            c if c.is_alphabetic() => {
                let start = i;
                while i < chars.len() && chars[i].is_alphabetic() {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                if word == "y" {
                    let mut idx = 0u32;
                    let mut digits = 0;
                    while i < chars.len() {
                        let d = chars[i].to_digit(10).or_else(|| subscript_digit(chars[i]));
                        match d {
                            Some(d) => {
                                idx = idx * 10 + d;
                                digits += 1;
                                i += 1;
                            }
                            None => break,
                        }
                    }
                    if digits == 0 || idx == 0 {
                        return Err(Error::Parse("variable must be y1, y2, ...".into()));
                    }
                    out.push(Tok::Var(idx as usize - 1));
                } else {
                    out.push(Tok::Ident(word));
                }
            }
            other => return Err(Error::Parse(format!("unexpected character `{other}`"))),
        }
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: &'a [Tok],
    pos: usize,
    max_var: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.tokens.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn expr(&mut self) -> Result<Node, Error> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(Tok::Plus) => {
                    self.pos += 1;
                    lhs = Node::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(Tok::Minus) => {
                    self.pos += 1;
                    lhs = Node::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Node, Error> {
        let mut lhs = self.unary()?;
        loop {
            match self.peek() {
                Some(Tok::Star) => {
                    self.pos += 1;
                    lhs = Node::Mul(Box::new(lhs), Box::new(self.unary()?));
                }
                Some(Tok::Slash) => {
                    self.pos += 1;
                    lhs = Node::Div(Box::new(lhs), Box::new(self.unary()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn unary(&mut self) -> Result<Node, Error> {
        match self.peek() {
            Some(Tok::Minus) => {
                self.pos += 1;
                Ok(Node::Neg(Box::new(self.unary()?)))
            }
            Some(Tok::Plus) => {
                self.pos += 1;
                self.unary()
            }
            _ => self.atom(),
        }
    }

    fn atom(&mut self) -> Result<Node, Error> {
        match self.next() {
            Some(Tok::Num(v)) => Ok(Node::Const(v)),
            Some(Tok::Var(i)) => {
                self.max_var = self.max_var.max(i + 1);
                Ok(Node::Var(i))
            }
            Some(Tok::LParen) => {
                let e = self.expr()?;
                self.expect_rparen()?;
                Ok(e)
            }
            Some(Tok::Ident(name)) => match name.as_str() {
                "pi" => Ok(Node::Const(std::f64::consts::PI)),
                "sin" | "cos" => {
                    if self.next() != Some(Tok::LParen) {
                        return Err(Error::Parse(format!("`{name}` needs parentheses")));
                    }
                    let arg = Box::new(self.expr()?);
                    self.expect_rparen()?;
                    Ok(if name == "sin" { Node::Sin(arg) } else { Node::Cos(arg) })
                }
                other => Err(Error::Parse(format!("unknown identifier `{other}`"))),
            },
            Some(t) => Err(Error::Parse(format!("unexpected token {t:?}"))),
            None => Err(Error::Parse("unexpected end of expression".into())),
        }
    }

    fn expect_rparen(&mut self) -> Result<(), Error> {
        match self.next() {
            Some(Tok::RParen) => Ok(()),
            _ => Err(Error::Parse("missing `)`".into())),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_and_functions() {
        let e = Expr::parse("2 + 3*y1 - y2/2").unwrap();
        assert_eq!(e.eval(&[1.0f64, 4.0]), 3.0);
        let e = Expr::parse("-(1 + sin(2*pi*y1))").unwrap();
        assert!((e.eval(&[0.25f64]) + 2.0).abs() < 1e-15);
        let e = Expr::parse("2 × cos(π×y₂) ÷ 4 − 1e-1").unwrap();
        assert!((e.eval(&[0.0f64, 0.0]) - 0.4).abs() < 1e-15);
        assert_eq!(e.max_variable(), 2);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("tan(y1)").is_err());
        assert!(Expr::parse("y0").is_err());
        assert!(Expr::parse("(1").is_err());
        assert!(Expr::parse("1 2").is_err());
    }
}
