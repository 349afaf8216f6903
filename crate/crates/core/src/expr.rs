//! Closed-form expression evaluator for potentials and initial data.
//!
//! Grammar: `+ - * / ^` with the usual precedence, unary minus, the
//! functions `abs cos sin exp log` (`log` is the natural logarithm), the
//! constants `pi` and `e`, numeric literals, and the single variable `x`.
//! `^` is right-associative and binds tighter than unary minus, so
//! `-x^2` parses as `-(x^2)`.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum ExprError {
    #[error("unexpected character `{0}` at byte {1}")]
    UnexpectedChar(char, usize),
    #[error("unexpected end of expression")]
    UnexpectedEnd,
    #[error("expected {expected} at byte {at}")]
    Expected { expected: &'static str, at: usize },
    #[error("unknown identifier `{0}`")]
    UnknownIdent(String),
    #[error("invalid number literal `{0}`")]
    BadNumber(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Abs(Box<Expr>),
    Cos(Box<Expr>),
    Sin(Box<Expr>),
    Exp(Box<Expr>),
    Log(Box<Expr>),
}

impl Expr {
    pub fn parse(source: &str) -> Result<Expr, ExprError> {
        let mut p = Parser {
            bytes: source.as_bytes(),
            pos: 0,
        };
        let e = p.expr()?;
        p.skip_ws();
        if p.pos != p.bytes.len() {
            return Err(ExprError::UnexpectedChar(
                p.bytes[p.pos] as char,
                p.pos,
            ));
        }
        Ok(e)
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Expr::Num(v) => *v,
            Expr::Var => x,
            Expr::Neg(e) => -e.eval(x),
            Expr::Add(a, b) => a.eval(x) + b.eval(x),
            Expr::Sub(a, b) => a.eval(x) - b.eval(x),
            Expr::Mul(a, b) => a.eval(x) * b.eval(x),
            Expr::Div(a, b) => a.eval(x) / b.eval(x),
            Expr::Pow(a, b) => a.eval(x).powf(b.eval(x)),
            Expr::Abs(e) => e.eval(x).abs(),
            Expr::Cos(e) => e.eval(x).cos(),
            Expr::Sin(e) => e.eval(x).sin(),
            Expr::Exp(e) => e.eval(x).exp(),
            Expr::Log(e) => e.eval(x).ln(),
        }
    }
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Parser<'a> {
    fn skip_ws(&mut self) {
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.bytes.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                return Ok(lhs);
            }
        }
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat(b'-') {
            Ok(Expr::Neg(Box::new(self.unary()?)))
        } else {
            self.power()
        }
    }

    fn power(&mut self) -> Result<Expr, ExprError> {
        let base = self.primary()?;
        if self.eat(b'^') {
            // right-associative; exponent may carry its own sign
            Ok(Expr::Pow(Box::new(base), Box::new(self.unary()?)))
        } else {
            Ok(base)
        }
    }

    fn primary(&mut self) -> Result<Expr, ExprError> {
        let c = self.peek().ok_or(ExprError::UnexpectedEnd)?;
        if c == b'(' {
            self.pos += 1;
            let inner = self.expr()?;
            if !self.eat(b')') {
                return Err(ExprError::Expected {
                    expected: "`)`",
                    at: self.pos,
                });
            }
            return Ok(inner);
        }
        if c.is_ascii_digit() || c == b'.' {
            return self.number();
        }
        if c.is_ascii_alphabetic() {
            return self.ident();
        }
        Err(ExprError::UnexpectedChar(c as char, self.pos))
    }

    fn number(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        while self.pos < self.bytes.len() && {
            let b = self.bytes[self.pos];
            b.is_ascii_digit() || b == b'.'
        } {
            self.pos += 1;
        }
        // scientific suffix: e/E [+-] digits, only if digits follow
        if self.pos < self.bytes.len()
            && (self.bytes[self.pos] == b'e' || self.bytes[self.pos] == b'E')
        {
            let mut probe = self.pos + 1;
            if probe < self.bytes.len() && (self.bytes[probe] == b'+' || self.bytes[probe] == b'-')
            {
                probe += 1;
            }
            if probe < self.bytes.len() && self.bytes[probe].is_ascii_digit() {
                self.pos = probe;
                while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
                    self.pos += 1;
                }
            }
        }
        let text = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        text.parse::<f64>()
            .map(Expr::Num)
            .map_err(|_| ExprError::BadNumber(text.to_string()))
    }

    fn ident(&mut self) -> Result<Expr, ExprError> {
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_alphanumeric() {
            self.pos += 1;
        }
        let name = std::str::from_utf8(&self.bytes[start..self.pos]).unwrap();
        match name {
            "x" => Ok(Expr::Var),
            "pi" => Ok(Expr::Num(std::f64::consts::PI)),
            "e" => Ok(Expr::Num(std::f64::consts::E)),
            "abs" | "cos" | "sin" | "exp" | "log" => {
                if !self.eat(b'(') {
                    return Err(ExprError::Expected {
                        expected: "`(` after function name",
                        at: self.pos,
                    });
                }
                let arg = Box::new(self.expr()?);
                if !self.eat(b')') {
                    return Err(ExprError::Expected {
                        expected: "`)`",
                        at: self.pos,
                    });
                }
                Ok(match name {
                    "abs" => Expr::Abs(arg),
                    "cos" => Expr::Cos(arg),
                    "sin" => Expr::Sin(arg),
                    "exp" => Expr::Exp(arg),
                    _ => Expr::Log(arg),
                })
            }
            _ => Err(ExprError::UnknownIdent(name.to_string())),
        }
    }
}
