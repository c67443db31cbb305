//! A small, closed expression language for scalar functions in JSON configs.
//!
//! Grammar: numbers, `pi`, variables `x` (1-D only) and `x1..xn`, the binary
//! operators `+ - * / ^`, unary minus, `abs sin cos sqrt`, comparisons
//! `< <= > >= == !=` (yielding 1 or 0), and
//! `piecewise(cond1, value1, cond2, value2, ..., otherwise)`.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Func {
    Abs,
    Sin,
    Cos,
    Sqrt,
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Num(f64),
    Var(usize),
    Neg(Box<Node>),
    Bin(BinOp, Box<Node>, Box<Node>),
    Call(Func, Box<Node>),
    Piecewise(Vec<(Node, Node)>, Box<Node>),
}

impl Node {
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Node::Num(v) => *v,
            Node::Var(i) => x[*i],
            Node::Neg(a) => -a.eval(x),
            Node::Bin(op, a, b) => {
                let (p, q) = (a.eval(x), b.eval(x));
                let truth = |t: bool| if t { 1.0 } else { 0.0 };
                match op {
                    BinOp::Add => p + q,
                    BinOp::Sub => p - q,
                    BinOp::Mul => p * q,
                    BinOp::Div => p / q,
                    BinOp::Pow => p.powf(q),
                    BinOp::Lt => truth(p < q),
                    BinOp::Le => truth(p <= q),
                    BinOp::Gt => truth(p > q),
                    BinOp::Ge => truth(p >= q),
                    BinOp::Eq => truth(p == q),
                    BinOp::Ne => truth(p != q),
                }
            }
            Node::Call(f, a) => {
                let v = a.eval(x);
                match f {
                    Func::Abs => v.abs(),
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Sqrt => v.sqrt(),
                }
            }
            Node::Piecewise(branches, otherwise) => {
                for (c, v) in branches {
                    if c.eval(x) != 0.0 {
                        return v.eval(x);
                    }
                }
                otherwise.eval(x)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(f64),
    Ident(String),
    Op(&'static str),
    LParen,
    RParen,
    Comma,
}

fn tokenize(src: &str) -> Result<Vec<(usize, Tok)>> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_ascii_whitespace() {
            i += 1;
            continue;
        }
        let start = i;
        if c.is_ascii_digit() || c == '.' {
            while i < bytes.len() && ((bytes[i] as char).is_ascii_digit() || bytes[i] == b'.') {
                i += 1;
            }
            if i < bytes.len() && (bytes[i] == b'e' || bytes[i] == b'E') {
                let mut j = i + 1;
                if j < bytes.len() && (bytes[j] == b'+' || bytes[j] == b'-') {
                    j += 1;
                }
                if j < bytes.len() && (bytes[j] as char).is_ascii_digit() {
                    i = j;
                    while i < bytes.len() && (bytes[i] as char).is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            let text = &src[start..i];
            let v: f64 = text.parse().map_err(|_| Error::Parse {
                offset: start,
                message: format!("bad number `{text}`"),
            })?;
            out.push((start, Tok::Num(v)));
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && ((bytes[i] as char).is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
            continue;
        }
        let two = src.get(i..i + 2).unwrap_or("");
        let op2 = ["<=", ">=", "==", "!="].into_iter().find(|o| *o == two);
        if let Some(o) = op2 {
            out.push((start, Tok::Op(o)));
            i += 2;
            continue;
        }
        let tok = match c {
            '+' => Tok::Op("+"),
            '-' => Tok::Op("-"),
            '*' => Tok::Op("*"),
            '/' => Tok::Op("/"),
            '^' => Tok::Op("^"),
            '<' => Tok::Op("<"),
            '>' => Tok::Op(">"),
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            ',' => Tok::Comma,
            other => {
                return Err(Error::Parse { offset: start, message: format!("unexpected character `{other}`") })
            }
        };
        out.push((start, tok));
        i += 1;
    }
    Ok(out)
}

struct Parser<'a> {
    toks: &'a [(usize, Tok)],
    pos: usize,
    dim: usize,
    end: usize,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(_, t)| t)
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |(o, _)| *o)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T> {
        Err(Error::Parse { offset: self.offset(), message: message.into() })
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expr(&mut self) -> Result<Node> {
        let lhs = self.additive()?;
        let op = match self.peek() {
            Some(Tok::Op("<")) => BinOp::Lt,
            Some(Tok::Op("<=")) => BinOp::Le,
            Some(Tok::Op(">")) => BinOp::Gt,
            Some(Tok::Op(">=")) => BinOp::Ge,
            Some(Tok::Op("==")) => BinOp::Eq,
            Some(Tok::Op("!=")) => BinOp::Ne,
            _ => return Ok(lhs),
        };
        self.pos += 1;
        let rhs = self.additive()?;
        Ok(Node::Bin(op, Box::new(lhs), Box::new(rhs)))
    }

    fn additive(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Op("+")) => BinOp::Add,
                Some(Tok::Op("-")) => BinOp::Sub,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.term()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Tok::Op("*")) => BinOp::Mul,
                Some(Tok::Op("/")) => BinOp::Div,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.unary()?;
            lhs = Node::Bin(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Node> {
        if self.eat(&Tok::Op("-")) {
            return Ok(Node::Neg(Box::new(self.unary()?)));
        }
        if self.eat(&Tok::Op("+")) {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Node> {
        let base = self.atom()?;
        if self.eat(&Tok::Op("^")) {
            let exp = self.unary()?;
            return Ok(Node::Bin(BinOp::Pow, Box::new(base), Box::new(exp)));
        }
        Ok(base)
    }

    fn args(&mut self) -> Result<Vec<Node>> {
        if !self.eat(&Tok::LParen) {
            return self.err("expected `(`");
        }
        let mut out = vec![self.expr()?];
        while self.eat(&Tok::Comma) {
            out.push(self.expr()?);
        }
        if !self.eat(&Tok::RParen) {
            return self.err("expected `)`");
        }
        Ok(out)
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek().cloned() {
            Some(Tok::Num(v)) => {
                self.pos += 1;
                Ok(Node::Num(v))
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let e = self.expr()?;
                if !self.eat(&Tok::RParen) {
                    return self.err("expected `)`");
                }
                Ok(e)
            }
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                let func = match name.as_str() {
                    "abs" => Some(Func::Abs),
                    "sin" => Some(Func::Sin),
                    "cos" => Some(Func::Cos),
                    "sqrt" => Some(Func::Sqrt),
                    _ => None,
                };
                if let Some(f) = func {
                    let mut a = self.args()?;
                    if a.len() != 1 {
                        return self.err(format!("`{name}` takes one argument"));
                    }
                    return Ok(Node::Call(f, Box::new(a.remove(0))));
                }
                if name == "piecewise" {
                    let mut a = self.args()?;
                    if a.len() % 2 == 0 {
                        return self.err("piecewise needs condition/value pairs and a final default");
                    }
                    let otherwise = a.pop().expect("odd length");
                    let mut branches = Vec::new();
                    let mut it = a.into_iter();
                    while let (Some(c), Some(v)) = (it.next(), it.next()) {
                        branches.push((c, v));
                    }
                    return Ok(Node::Piecewise(branches, Box::new(otherwise)));
                }
                if name == "pi" {
                    return Ok(Node::Num(std::f64::consts::PI));
                }
                if name == "x" {
                    if self.dim != 1 {
                        return self.err("`x` is only allowed for one-dimensional inputs; use x1..xn");
                    }
                    return Ok(Node::Var(0));
                }
                if let Some(idx) = name.strip_prefix('x').and_then(|s| s.parse::<usize>().ok()) {
                    if idx == 0 || idx > self.dim {
                        return self.err(format!("variable `{name}` out of range 1..={}", self.dim));
                    }
                    return Ok(Node::Var(idx - 1));
                }
                self.err(format!("unknown identifier `{name}`"))
            }
            Some(t) => self.err(format!("unexpected token {t:?}")),
            None => self.err("unexpected end of input"),
        }
    }
}

/// A parsed scalar expression in `dim` variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Expr {
    source: String,
    dim: usize,
    root: Node,
}

impl Expr {
    pub fn parse(source: &str, dim: usize) -> Result<Expr> {
        if dim == 0 {
            return Err(Error::InvalidInput("expression dimension must be >= 1".into()));
        }
        let toks = tokenize(source)?;
        let mut p = Parser { toks: &toks, pos: 0, dim, end: source.len() };
        let root = p.expr()?;
        if p.pos != toks.len() {
            return p.err("trailing input");
        }
        Ok(Expr { source: source.to_string(), dim, root })
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.root.eval(x)
    }

    pub fn source(&self) -> &str {
        &self.source
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ev(s: &str, x: &[f64]) -> f64 {
        Expr::parse(s, x.len()).unwrap().eval(x)
    }

    #[test]
    fn precedence_and_associativity() {
        assert_eq!(ev("1 + 2 * 3", &[0.0]), 7.0);
        assert_eq!(ev("-x^2", &[3.0]), -9.0);
        assert_eq!(ev("2^3^2", &[0.0]), 512.0);
        assert_eq!(ev("x^-1", &[4.0]), 0.25);
        assert_eq!(ev("(1 - 2) - 3", &[0.0]), -4.0);
        assert_eq!(ev("8 / 2 / 2", &[0.0]), 2.0);
        assert_eq!(ev("1e-2 * 3", &[0.0]), 0.03);
    }

    #[test]
    fn functions_and_variables() {
        assert_eq!(ev("abs(x1) + sqrt(x2)", &[-2.0, 9.0]), 5.0);
        assert!((ev("sin(pi / 2) + cos(0)", &[0.0]) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn piecewise_selects_first_true_branch() {
        let s = "piecewise(x < 0, -1, x == 0, 0, 1)";
        assert_eq!(ev(s, &[-3.0]), -1.0);
        assert_eq!(ev(s, &[0.0]), 0.0);
        assert_eq!(ev(s, &[2.0]), 1.0);
    }

    #[test]
    fn sinkink_expression_matches_closure() {
        let e = Expr::parse("piecewise(x == 0, 0, x + x*abs(x)*abs(sin(1/x)))", 1).unwrap();
        for &x in &[0.0_f64, 0.013, -0.27, 0.5] {
            let want = if x == 0.0 { 0.0 } else { x + x * x.abs() * (1.0 / x).sin().abs() };
            assert_eq!(e.eval(&[x]), want);
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Expr::parse("x +", 1).is_err());
        assert!(Expr::parse("x3", 2).is_err());
        assert!(Expr::parse("x", 2).is_err());
        assert!(Expr::parse("exp(x)", 1).is_err());
        assert!(Expr::parse("piecewise(x < 0, 1)", 1).is_err());
        assert!(Expr::parse("x $ 2", 1).is_err());
        assert!(Expr::parse("(x", 1).is_err());
    }
}
