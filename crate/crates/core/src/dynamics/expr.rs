use std::fmt;

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> char {
        match self {
            BinOp::Add => '+',
            BinOp::Sub => '-',
            BinOp::Mul => '*',
            BinOp::Div => '/',
            BinOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
    Abs,
}

impl Func {
    fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "abs" => Func::Abs,
            _ => return None,
        })
    }

    fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Abs => "abs",
        }
    }

    fn apply(self, v: f64) -> f64 {
        match self {
            Func::Sin => v.sin(),
            Func::Cos => v.cos(),
            Func::Exp => v.exp(),
            Func::Ln => v.ln(),
            Func::Abs => v.abs(),
        }
    }
}

/// Scalar expression over the state variables. `Var` holds a zero-based index.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    Var(usize),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

impl Expr {
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        Ok(match self {
            Expr::Const(c) => *c,
            Expr::Var(i) => x[*i],
            Expr::Neg(e) => -e.eval(x)?,
            Expr::Call(f, e) => f.apply(e.eval(x)?),
            Expr::Binary(op, l, r) => {
                let (a, b) = (l.eval(x)?, r.eval(x)?);
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => a / b,
                    BinOp::Pow => pow(a, b)?,
                }
            }
        })
    }

    /// Largest zero-based variable index used, if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Neg(e) | Expr::Call(_, e) => e.max_var(),
            Expr::Binary(_, l, r) => l.max_var().max(r.max_var()),
        }
    }
}

fn pow(base: f64, exponent: f64) -> Result<f64> {
    if exponent.fract() == 0.0 && exponent.abs() <= i32::MAX as f64 {
        Ok(base.powi(exponent as i32))
    } else if base < 0.0 {
        Err(Error::NonFinite(format!(
            "negative base {base} raised to non-integer power {exponent}"
        )))
    } else {
        Ok(base.powf(exponent))
    }
}

/// Fully parenthesised form that reparses to the same tree value-for-value.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => {
                write!(f, "(-{:?})", -c)
            }
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Neg(e) => write!(f, "(-{e})"),
            Expr::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            Expr::Call(func, e) => write!(f, "{}({e})", func.name()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Var(usize),
    Ident(String),
    Op(char),
    LParen,
    RParen,
    Sep,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn parse_err(line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column,
        message: message.into(),
    }
}

fn tokenize(src: &str) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut column) = (1, 1);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, column);
        let push = |out: &mut Vec<Token>, tok| {
            out.push(Token {
                tok,
                line: tl,
                column: tc,
            })
        };
        match c {
            '\n' => {
                push(&mut out, Tok::Sep);
                line += 1;
                column = 1;
                i += 1;
                continue;
            }
            ';' => push(&mut out, Tok::Sep),
            c if c.is_whitespace() => {}
            '+' | '*' | '/' | '^' | '-' => push(&mut out, Tok::Op(c)),
            '\u{2212}' => push(&mut out, Tok::Op('-')),
            '(' => push(&mut out, Tok::LParen),
            ')' => push(&mut out, Tok::RParen),
            c if c.is_ascii_digit() || c == '.' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                    i += 1;
                }
                if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                    let mut j = i + 1;
                    if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                        j += 1;
                    }
                    if j < chars.len() && chars[j].is_ascii_digit() {
                        i = j;
                        while i < chars.len() && chars[i].is_ascii_digit() {
                            i += 1;
                        }
                    }
                }
                let text: String = chars[start..i].iter().collect();
                let value: f64 = text
                    .parse()
                    .map_err(|_| parse_err(tl, tc, format!("malformed number `{text}`")))?;
                push(&mut out, Tok::Num(value));
                column += i - start;
                continue;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                let tok = match word.strip_prefix('x') {
                    Some(digits) if !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) => {
                        let idx = digits
                            .parse()
                            .map_err(|_| parse_err(tl, tc, format!("variable index too large in `{word}`")))?;
                        Tok::Var(idx)
                    }
                    _ => Tok::Ident(word),
                };
                push(&mut out, tok);
                column += i - start;
                continue;
            }
            other => return Err(parse_err(tl, tc, format!("unexpected character `{other}`"))),
        }
        i += 1;
        column += 1;
    }
    out.push(Token {
        tok: Tok::End,
        line,
        column,
    });
    Ok(out)
}

struct Parser<'a> {
    toks: &'a [Token],
    pos: usize,
    dim: usize,
}

impl Parser<'_> {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn bump(&mut self) -> &Token {
        let t = &self.toks[self.pos];
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn at_op(&self, ops: &[char]) -> Option<char> {
        match self.peek().tok {
            Tok::Op(c) if ops.contains(&c) => Some(c),
            _ => None,
        }
    }

    // expr := term (('+' | '-') term)*
    fn expr(&mut self) -> Result<Expr> {
        let mut lhs = self.term()?;
        while let Some(c) = self.at_op(&['+', '-']) {
            self.bump();
            let rhs = self.term()?;
            let op = if c == '+' { BinOp::Add } else { BinOp::Sub };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    // term := unary (('*' | '/') unary)*
    fn term(&mut self) -> Result<Expr> {
        let mut lhs = self.unary()?;
        while let Some(c) = self.at_op(&['*', '/']) {
            self.bump();
            let rhs = self.unary()?;
            let op = if c == '*' { BinOp::Mul } else { BinOp::Div };
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
        Ok(lhs)
    }

    // unary := '-' unary | power
    fn unary(&mut self) -> Result<Expr> {
        if self.at_op(&['-']).is_some() {
            self.bump();
            return Ok(Expr::Neg(Box::new(self.unary()?)));
        }
        self.power()
    }

    // power := primary ('^' unary)?   (right-associative; `-x^2` is `-(x^2)`)
    fn power(&mut self) -> Result<Expr> {
        let base = self.primary()?;
        if self.at_op(&['^']).is_some() {
            self.bump();
            let exponent = self.unary()?;
            return Ok(Expr::Binary(BinOp::Pow, Box::new(base), Box::new(exponent)));
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr> {
        let t = self.bump().clone();
        match t.tok {
            Tok::Num(v) => Ok(Expr::Const(v)),
            Tok::Var(idx) => {
                if idx == 0 || idx > self.dim {
                    Err(Error::UnknownVariable {
                        index: idx,
                        dim: self.dim,
                        line: t.line,
                        column: t.column,
                    })
                } else {
                    Ok(Expr::Var(idx - 1))
                }
            }
            Tok::Ident(name) => {
                let func = Func::from_name(&name)
                    .ok_or_else(|| parse_err(t.line, t.column, format!("unknown identifier `{name}`")))?;
                self.expect(Tok::LParen, "`(` after function name")?;
                let arg = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(Expr::Call(func, Box::new(arg)))
            }
            Tok::LParen => {
                let inner = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(inner)
            }
            other => Err(parse_err(
                t.line,
                t.column,
                format!("expected a number, variable, function or `(`, found {}", describe(&other)),
            )),
        }
    }

    fn expect(&mut self, want: Tok, what: &str) -> Result<()> {
        let t = self.peek().clone();
        if t.tok == want {
            self.bump();
            Ok(())
        } else {
            Err(parse_err(
                t.line,
                t.column,
                format!("expected {what}, found {}", describe(&t.tok)),
            ))
        }
    }
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Num(v) => format!("number {v}"),
        Tok::Var(i) => format!("variable x{i}"),
        Tok::Ident(s) => format!("identifier `{s}`"),
        Tok::Op(c) => format!("`{c}`"),
        Tok::LParen => "`(`".into(),
        Tok::RParen => "`)`".into(),
        Tok::Sep => "end of component".into(),
        Tok::End => "end of input".into(),
    }
}

/// Parses newline- or `;`-separated component expressions. Empty components are skipped.
pub(crate) fn parse_components(src: &str, dim: usize) -> Result<Vec<Expr>> {
    let toks = tokenize(src)?;
    let mut p = Parser {
        toks: &toks,
        pos: 0,
        dim,
    };
    let mut out = Vec::new();
    loop {
        match p.peek().tok {
            Tok::End => break,
            Tok::Sep => {
                p.bump();
            }
            _ => {
                out.push(p.expr()?);
                let t = p.peek();
                if !matches!(t.tok, Tok::Sep | Tok::End) {
                    return Err(parse_err(
                        t.line,
                        t.column,
                        format!("unexpected {} after expression", describe(&t.tok)),
                    ));
                }
            }
        }
    }
    Ok(out)
}

/// Parses a single expression over variables `x1..x{dim}`.
pub fn parse_expr(src: &str, dim: usize) -> Result<Expr> {
    let mut comps = parse_components(src, dim)?;
    match comps.len() {
        1 => Ok(comps.remove(0)),
        found => Err(Error::Arity { expected: 1, found }),
    }
}
