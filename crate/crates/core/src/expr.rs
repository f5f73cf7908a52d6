//! Scalar expressions in one variable `x`, parsed by precedence climbing.
//!
//! Grammar: literals, `x`, `pi`, `e`, unary `-`, binary `+ - * / ^`
//! (`^` right-associative and binding tighter than unary minus), and the
//! functions `exp log sin cos tanh sqrt`.

use std::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Log,
    Sin,
    Cos,
    Tanh,
    Sqrt,
}

impl Func {
    fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "tanh" => Func::Tanh,
            "sqrt" => Func::Sqrt,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Tanh => "tanh",
            Func::Sqrt => "sqrt",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var,
    Neg(Box<Expr>),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Pow(Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn zero() -> Expr {
        Expr::Const(0.0)
    }

    /// Integer exponent when `self` is a literal integer.
    pub(crate) fn as_integer(&self) -> Option<i32> {
        match self {
            Expr::Const(c) if c.fract() == 0.0 && c.abs() <= 1024.0 => Some(*c as i32),
            Expr::Neg(inner) => inner.as_integer().map(|n| -n),
            _ => None,
        }
    }

    /// Whether the expression contains no `x`.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Const(_) => true,
            Expr::Var => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.is_constant(),
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) | Expr::Pow(a, b) => {
                a.is_constant() && b.is_constant()
            }
        }
    }

    /// Plain floating-point evaluation.
    pub fn eval(&self, x: f64) -> Result<f64> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var => x,
            Expr::Neg(a) => -a.eval(x)?,
            Expr::Add(a, b) => a.eval(x)? + b.eval(x)?,
            Expr::Sub(a, b) => a.eval(x)? - b.eval(x)?,
            Expr::Mul(a, b) => a.eval(x)? * b.eval(x)?,
            Expr::Div(a, b) => {
                let d = b.eval(x)?;
                if d == 0.0 {
                    return Err(Error::domain(format!("division by zero in `{self}` at x = {x}")));
                }
                a.eval(x)? / d
            }
            Expr::Pow(base, exp) => {
                let v = base.eval(x)?;
                match exp.as_integer() {
                    Some(n) => {
                        if n < 0 && v == 0.0 {
                            return Err(Error::domain(format!("zero to a negative power in `{self}`")));
                        }
                        v.powi(n)
                    }
                    None => {
                        if !(v > 0.0) {
                            return Err(Error::domain(format!(
                                "non-integer power of nonpositive base {v} in `{self}`"
                            )));
                        }
                        v.powf(exp.eval(x)?)
                    }
                }
            }
            Expr::Call(f, a) => {
                let v = a.eval(x)?;
                match f {
                    Func::Exp => v.exp(),
                    Func::Log => {
                        if !(v > 0.0) {
                            return Err(Error::domain(format!("log of nonpositive value {v} in `{self}`")));
                        }
                        v.ln()
                    }
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Tanh => v.tanh(),
                    Func::Sqrt => {
                        if v < 0.0 {
                            return Err(Error::domain(format!("sqrt of negative value {v} in `{self}`")));
                        }
                        v.sqrt()
                    }
                }
            }
        })
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var => write!(f, "x"),
            Expr::Neg(a) => write!(f, "(-{a})"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Call(func, a) => write!(f, "{}({a})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    End,
}

struct Lexer<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Lexer<'a> {
    fn next_token(&mut self) -> Result<(usize, Tok)> {
        let bytes = self.src.as_bytes();
        while self.pos < bytes.len() && bytes[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
        let start = self.pos;
        if start >= bytes.len() {
            return Ok((start, Tok::End));
        }
        let c = bytes[start];
        let tok = match c {
            b'+' | b'-' | b'*' | b'/' | b'^' => {
                self.pos += 1;
                Tok::Op(c as char)
            }
            b'(' => {
                self.pos += 1;
                Tok::LParen
            }
            b')' => {
                self.pos += 1;
                Tok::RParen
            }
            b'0'..=b'9' | b'.' => {
                let mut end = start;
                while end < bytes.len() && (bytes[end].is_ascii_digit() || bytes[end] == b'.') {
                    end += 1;
                }
                if end < bytes.len() && (bytes[end] == b'e' || bytes[end] == b'E') {
                    let mut k = end + 1;
                    if k < bytes.len() && (bytes[k] == b'+' || bytes[k] == b'-') {
                        k += 1;
                    }
                    if k < bytes.len() && bytes[k].is_ascii_digit() {
                        while k < bytes.len() && bytes[k].is_ascii_digit() {
                            k += 1;
                        }
                        end = k;
                    }
                }
                let text = &self.src[start..end];
                let value = text.parse::<f64>().map_err(|_| Error::Syntax {
                    offset: start,
                    expected: vec!["number".into()],
                })?;
                self.pos = end;
                Tok::Num(value)
            }
            c if c.is_ascii_alphabetic() || c == b'_' => {
                let mut end = start;
                while end < bytes.len() && (bytes[end].is_ascii_alphanumeric() || bytes[end] == b'_') {
                    end += 1;
                }
                self.pos = end;
                Tok::Ident(self.src[start..end].to_string())
            }
            _ => {
                return Err(Error::Syntax {
                    offset: start,
                    expected: vec!["operand".into(), "operator".into()],
                })
            }
        };
        Ok((start, tok))
    }
}

struct Parser<'a> {
    lexer: Lexer<'a>,
    peeked: Option<(usize, Tok)>,
}

const UNARY_BP: u8 = 5;

impl<'a> Parser<'a> {
    fn peek(&mut self) -> Result<&(usize, Tok)> {
        if self.peeked.is_none() {
            self.peeked = Some(self.lexer.next_token()?);
        }
        Ok(self.peeked.as_ref().expect("just filled"))
    }

    fn bump(&mut self) -> Result<(usize, Tok)> {
        self.peek()?;
        Ok(self.peeked.take().expect("just filled"))
    }

    fn operand_error(offset: usize) -> Error {
        Error::Syntax {
            offset,
            expected: vec![
                "number".into(),
                "`x`".into(),
                "constant".into(),
                "function call".into(),
                "`(`".into(),
                "`-`".into(),
            ],
        }
    }

    fn expr(&mut self, min_bp: u8) -> Result<Expr> {
        let (offset, tok) = self.bump()?;
        let mut lhs = match tok {
            Tok::Num(v) => Expr::Const(v),
            Tok::Op('-') => {
                let operand = self.expr(UNARY_BP)?;
                Expr::Neg(Box::new(operand))
            }
            Tok::LParen => {
                let inner = self.expr(0)?;
                self.expect_rparen()?;
                inner
            }
            Tok::Ident(name) => match name.as_str() {
                "x" => Expr::Var,
                "pi" => Expr::Const(std::f64::consts::PI),
                "e" => Expr::Const(std::f64::consts::E),
                other => match Func::from_name(other) {
                    Some(func) => {
                        let (off, t) = self.bump()?;
                        if t != Tok::LParen {
                            return Err(Error::Syntax {
                                offset: off,
                                expected: vec!["`(`".into()],
                            });
                        }
                        let arg = self.expr(0)?;
                        self.expect_rparen()?;
                        Expr::Call(func, Box::new(arg))
                    }
                    None => {
                        return Err(Error::Syntax {
                            offset,
                            expected: vec![
                                "`x`".into(),
                                "pi".into(),
                                "e".into(),
                                "exp|log|sin|cos|tanh|sqrt".into(),
                            ],
                        })
                    }
                },
            },
            _ => return Err(Self::operand_error(offset)),
        };

        loop {
            let (offset, tok) = self.peek()?.clone();
            let op = match tok {
                Tok::Op(op) => op,
                Tok::End | Tok::RParen => break,
                _ => {
                    return Err(Error::Syntax {
                        offset,
                        expected: vec!["operator".into(), "`)`".into(), "end of input".into()],
                    })
                }
            };
            let (l_bp, r_bp) = match op {
                '+' | '-' => (1, 2),
                '*' | '/' => (3, 4),
                '^' => (7, 6),
                _ => unreachable!("lexer only emits arithmetic operators"),
            };
            if l_bp < min_bp {
                break;
            }
            self.bump()?;
            let rhs = self.expr(r_bp)?;
            let (a, b) = (Box::new(lhs), Box::new(rhs));
            lhs = match op {
                '+' => Expr::Add(a, b),
                '-' => Expr::Sub(a, b),
                '*' => Expr::Mul(a, b),
                '/' => Expr::Div(a, b),
                _ => Expr::Pow(a, b),
            };
        }
        Ok(lhs)
    }

    fn expect_rparen(&mut self) -> Result<()> {
        let (offset, tok) = self.bump()?;
        if tok != Tok::RParen {
            return Err(Error::Syntax {
                offset,
                expected: vec!["`)`".into(), "operator".into()],
            });
        }
        Ok(())
    }
}

/// Parses an expression in `x`.
pub fn parse(text: &str) -> Result<Expr> {
    let mut parser = Parser {
        lexer: Lexer { src: text, pos: 0 },
        peeked: None,
    };
    let expr = parser.expr(0)?;
    let (offset, tok) = parser.bump()?;
    if tok != Tok::End {
        return Err(Error::Syntax {
            offset,
            expected: vec!["operator".into(), "end of input".into()],
        });
    }
    Ok(expr)
}

impl std::str::FromStr for Expr {
    type Err = Error;

    fn from_str(s: &str) -> Result<Expr> {
        parse(s)
    }
}
