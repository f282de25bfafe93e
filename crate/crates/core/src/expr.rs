//! Tiny, total arithmetic grammar for coefficient and data expressions.
//!
//! Supported: `+ - * /`, unary minus, parentheses, `exp(·)`, `sin(·)`,
//! `arctan(·)`, numeric literals, the constant `pi`, and the variables
//! `x`, `t`, `y`. No user code ever executes; evaluation is a pure AST
//! walk, so identical source text always produces identical samples.

use crate::error::{Error, Result};
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
enum Ast {
    Num(f64),
    Var(Var),
    Pi,
    Neg(Box<Ast>),
    Add(Box<Ast>, Box<Ast>),
    Sub(Box<Ast>, Box<Ast>),
    Mul(Box<Ast>, Box<Ast>),
    Div(Box<Ast>, Box<Ast>),
    Exp(Box<Ast>),
    Sin(Box<Ast>),
    Arctan(Box<Ast>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Var {
    X,
    T,
    Y,
}

/// A parsed expression. Keeps its source text so serialized documents
/// round-trip byte-exactly.
#[derive(Debug, Clone)]
pub struct Expr {
    src: String,
    ast: Ast,
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        self.src == other.src
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.src)
    }
}

impl Expr {
    pub fn parse(src: &str) -> Result<Expr> {
        let mut p = Parser { src: src.as_bytes(), pos: 0, full: src };
        let ast = p.expr()?;
        p.skip_ws();
        if p.pos != p.src.len() {
            return Err(p.err("trailing input"));
        }
        Ok(Expr { src: src.to_string(), ast })
    }

    pub fn source(&self) -> &str {
        &self.src
    }

    /// Evaluate at `(x, t, y)`. Variables the expression does not mention
    /// are simply ignored.
    pub fn eval(&self, x: f64, t: f64, y: f64) -> f64 {
        eval_ast(&self.ast, x, t, y)
    }

    /// True if the expression mentions the state variable `y`.
    pub fn depends_on_y(&self) -> bool {
        uses_var(&self.ast, Var::Y)
    }

    /// True if the expression mentions the time variable `t`.
    pub fn depends_on_t(&self) -> bool {
        uses_var(&self.ast, Var::T)
    }
}

fn eval_ast(a: &Ast, x: f64, t: f64, y: f64) -> f64 {
    match a {
        Ast::Num(c) => *c,
        Ast::Pi => std::f64::consts::PI,
        Ast::Var(Var::X) => x,
        Ast::Var(Var::T) => t,
        Ast::Var(Var::Y) => y,
        Ast::Neg(e) => -eval_ast(e, x, t, y),
        Ast::Add(l, r) => eval_ast(l, x, t, y) + eval_ast(r, x, t, y),
        Ast::Sub(l, r) => eval_ast(l, x, t, y) - eval_ast(r, x, t, y),
        Ast::Mul(l, r) => eval_ast(l, x, t, y) * eval_ast(r, x, t, y),
        Ast::Div(l, r) => eval_ast(l, x, t, y) / eval_ast(r, x, t, y),
        Ast::Exp(e) => eval_ast(e, x, t, y).exp(),
        Ast::Sin(e) => eval_ast(e, x, t, y).sin(),
        Ast::Arctan(e) => eval_ast(e, x, t, y).atan(),
    }
}

fn uses_var(a: &Ast, v: Var) -> bool {
    match a {
        Ast::Num(_) | Ast::Pi => false,
        Ast::Var(w) => *w == v,
        Ast::Neg(e) | Ast::Exp(e) | Ast::Sin(e) | Ast::Arctan(e) => uses_var(e, v),
        Ast::Add(l, r) | Ast::Sub(l, r) | Ast::Mul(l, r) | Ast::Div(l, r) => {
            uses_var(l, v) || uses_var(r, v)
        }
    }
}

struct Parser<'a> {
    src: &'a [u8],
    pos: usize,
    full: &'a str,
}

impl<'a> Parser<'a> {
    fn err(&self, msg: &str) -> Error {
        Error::ExprParse {
            position: self.pos,
            message: msg.to_string(),
            source_text: self.full.to_string(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Ast> {
        let mut lhs = self.term()?;
        loop {
            match self.peek() {
                Some(b'+') => {
                    self.pos += 1;
                    lhs = Ast::Add(Box::new(lhs), Box::new(self.term()?));
                }
                Some(b'-') => {
                    self.pos += 1;
                    lhs = Ast::Sub(Box::new(lhs), Box::new(self.term()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn term(&mut self) -> Result<Ast> {
        let mut lhs = self.factor()?;
        loop {
            match self.peek() {
                Some(b'*') => {
                    self.pos += 1;
                    lhs = Ast::Mul(Box::new(lhs), Box::new(self.factor()?));
                }
                Some(b'/') => {
                    self.pos += 1;
                    lhs = Ast::Div(Box::new(lhs), Box::new(self.factor()?));
                }
                _ => return Ok(lhs),
            }
        }
    }

    fn factor(&mut self) -> Result<Ast> {
        match self.peek() {
            Some(b'-') => {
                self.pos += 1;
                Ok(Ast::Neg(Box::new(self.factor()?)))
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> Result<Ast> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let inner = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(inner)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() => self.ident(),
            _ => Err(self.err("expected a number, identifier, or `(`")),
        }
    }

    fn number(&mut self) -> Result<Ast> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_digit() || self.src[self.pos] == b'.')
        {
            self.pos += 1;
        }
        // exponent suffix: 1e-3, 2.5e4
        if self.pos < self.src.len() && (self.src[self.pos] | 32) == b'e' {
            let mut probe = self.pos + 1;
            if probe < self.src.len() && (self.src[probe] == b'+' || self.src[probe] == b'-') {
                probe += 1;
            }
            if probe < self.src.len() && self.src[probe].is_ascii_digit() {
                self.pos = probe;
                while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        let text = &self.full[start..self.pos];
        text.parse::<f64>()
            .map(Ast::Num)
            .map_err(|_| self.err("bad numeric literal"))
    }

    fn ident(&mut self) -> Result<Ast> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_alphabetic() {
            self.pos += 1;
        }
        let name = &self.full[start..self.pos];
        match name {
            "x" => Ok(Ast::Var(Var::X)),
            "t" => Ok(Ast::Var(Var::T)),
            "y" => Ok(Ast::Var(Var::Y)),
            "pi" => Ok(Ast::Pi),
            "exp" | "sin" | "arctan" => {
                if self.peek() != Some(b'(') {
                    return Err(self.err("function call needs `(`"));
                }
                self.pos += 1;
                let arg = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.err("expected `)`"));
                }
                self.pos += 1;
                Ok(match name {
                    "exp" => Ast::Exp(Box::new(arg)),
                    "sin" => Ast::Sin(Box::new(arg)),
                    _ => Ast::Arctan(Box::new(arg)),
                })
            }
            other => Err(self.err(&format!("unknown identifier `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_and_precedence() {
        let e = Expr::parse("1 + 2*3 - 4/2").unwrap();
        assert_eq!(e.eval(0.0, 0.0, 0.0), 5.0);
        let e = Expr::parse("(1 + 2)*3").unwrap();
        assert_eq!(e.eval(0.0, 0.0, 0.0), 9.0);
    }

    #[test]
    fn variables_and_functions() {
        let e = Expr::parse("sin(pi*x)").unwrap();
        assert!((e.eval(0.5, 0.0, 0.0) - 1.0).abs() < 1e-15);
        let e = Expr::parse("1 + 0.5/(1 + y*y)").unwrap();
        assert!((e.eval(0.0, 0.0, 1.0) - 1.25).abs() < 1e-15);
        let e = Expr::parse("1 + 0.1*arctan(y)").unwrap();
        assert!((e.eval(0.0, 0.0, 0.0) - 1.0).abs() < 1e-15);
        assert!(e.depends_on_y());
        assert!(!e.depends_on_t());
    }

    #[test]
    fn unary_minus_and_exponent_literals() {
        let e = Expr::parse("-2e-3 + exp(0)").unwrap();
        assert!((e.eval(0.0, 0.0, 0.0) - 0.998).abs() < 1e-15);
        let e = Expr::parse("--1").unwrap();
        assert_eq!(e.eval(0.0, 0.0, 0.0), 1.0);
    }

    #[test]
    fn rejects_garbage() {
        assert!(Expr::parse("1 +").is_err());
        assert!(Expr::parse("foo(2)").is_err());
        assert!(Expr::parse("sin 2").is_err());
        assert!(Expr::parse("1 2").is_err());
        assert!(Expr::parse("").is_err());
    }

    #[test]
    fn source_round_trip() {
        let src = "1 + 0.5/(1 + y*y)";
        let e = Expr::parse(src).unwrap();
        assert_eq!(e.source(), src);
        let e2 = Expr::parse(e.source()).unwrap();
        // identical source text -> identical samples
        for k in 0..10 {
            let y = -2.0 + 0.4 * k as f64;
            assert_eq!(e.eval(0.0, 0.0, y).to_bits(), e2.eval(0.0, 0.0, y).to_bits());
        }
    }
}
