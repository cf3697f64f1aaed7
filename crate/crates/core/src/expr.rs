//! Whitelisted arithmetic grammar for right-hand-side expressions: numbers,
//! the coordinates x1 and x2, the edge affine functions l1..lN, the four
//! arithmetic operators, numeric powers, and abs(). Deliberately closed so
//! configs stay reproducible data, not programs.
//!
//! Grammar:
//!   expr   := term  (('+' | '-') term)*
//!   term   := factor (('*' | '/') factor)*
//!   factor := unary ('^' signed-number)?
//!   unary  := '-' unary | atom
//!   atom   := number | 'x1' | 'x2' | 'l' digits | 'abs' '(' expr ')'
//!           | '(' expr ')'

use crate::geometry::{Point, Polygon};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    X1,
    X2,
    /// 1-based edge index into the polygon's affine functions.
    L(usize),
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    /// Numeric exponent only: powers of subexpressions by literals.
    Pow(Box<Expr>, f64),
    Neg(Box<Expr>),
    Abs(Box<Expr>),
}

impl Expr {
    pub fn eval(&self, x: Point, ls: &[f64]) -> f64 {
        match self {
            Expr::Num(c) => *c,
            Expr::X1 => x.x,
            Expr::X2 => x.y,
            Expr::L(i) => ls.get(i - 1).copied().unwrap_or(f64::NAN),
            Expr::Add(a, b) => a.eval(x, ls) + b.eval(x, ls),
            Expr::Sub(a, b) => a.eval(x, ls) - b.eval(x, ls),
            Expr::Mul(a, b) => a.eval(x, ls) * b.eval(x, ls),
            Expr::Div(a, b) => a.eval(x, ls) / b.eval(x, ls),
            Expr::Pow(a, p) => a.eval(x, ls).powf(*p),
            Expr::Neg(a) => -a.eval(x, ls),
            Expr::Abs(a) => a.eval(x, ls).abs(),
        }
    }

    /// Largest edge index referenced, for validation against the polygon.
    pub fn max_edge_index(&self) -> usize {
        match self {
            Expr::L(i) => *i,
            Expr::Num(_) | Expr::X1 | Expr::X2 => 0,
            Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
                a.max_edge_index().max(b.max_edge_index())
            }
            Expr::Pow(a, _) | Expr::Neg(a) | Expr::Abs(a) => a.max_edge_index(),
        }
    }

    pub fn eval_on(&self, polygon: &Polygon, x: Point) -> f64 {
        self.eval(x, &polygon.l_values(x))
    }
}

pub fn parse_expr(input: &str) -> Result<Expr, String> {
    let mut p = Parser {
        chars: input.as_bytes(),
        pos: 0,
        depth: 0,
    };
    p.skip_ws();
    let e = p.expr()?;
    p.skip_ws();
    if p.pos != p.chars.len() {
        return Err(format!("unexpected trailing input at byte {}", p.pos));
    }
    Ok(e)
}

struct Parser<'a> {
    chars: &'a [u8],
    pos: usize,
    depth: usize,
}

const MAX_DEPTH: usize = 64;

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<u8> {
        self.chars.get(self.pos).copied()
    }

    fn eat(&mut self, c: u8) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            self.skip_ws();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: u8) -> Result<(), String> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(format!(
                "expected '{}' at byte {}",
                c as char, self.pos
            ))
        }
    }

    fn expr(&mut self) -> Result<Expr, String> {
        self.depth += 1;
        if self.depth > MAX_DEPTH {
            return Err("expression too deeply nested".into());
        }
        let mut lhs = self.term()?;
        loop {
            if self.eat(b'+') {
                lhs = Expr::Add(Box::new(lhs), Box::new(self.term()?));
            } else if self.eat(b'-') {
                lhs = Expr::Sub(Box::new(lhs), Box::new(self.term()?));
            } else {
                break;
            }
        }
        self.depth -= 1;
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Expr, String> {
        let mut lhs = self.unary()?;
        loop {
            if self.eat(b'*') {
                lhs = Expr::Mul(Box::new(lhs), Box::new(self.unary()?));
            } else if self.eat(b'/') {
                lhs = Expr::Div(Box::new(lhs), Box::new(self.unary()?));
            } else {
                break;
            }
        }
        Ok(lhs)
    }

    // '^' binds tighter than unary minus: -2^2 parses as -(2^2).
    fn unary(&mut self) -> Result<Expr, String> {
        if self.eat(b'-') {
            self.depth += 1;
            if self.depth > MAX_DEPTH {
                return Err("expression too deeply nested".into());
            }
            let e = self.unary()?;
            self.depth -= 1;
            return Ok(Expr::Neg(Box::new(e)));
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, String> {
        let base = self.atom()?;
        if self.eat(b'^') {
            let neg = self.eat(b'-');
            let n = self.number()?;
            let p = if neg { -n } else { n };
            return Ok(Expr::Pow(Box::new(base), p));
        }
        Ok(base)
    }

    fn atom(&mut self) -> Result<Expr, String> {
        self.skip_ws();
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                self.skip_ws();
                self.depth += 1;
                if self.depth > MAX_DEPTH {
                    return Err("expression too deeply nested".into());
                }
                let e = self.expr()?;
                self.depth -= 1;
                self.expect(b')')?;
                Ok(e)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => Ok(Expr::Num(self.number()?)),
            Some(c) if c.is_ascii_alphabetic() => {
                let start = self.pos;
                while self
                    .peek()
                    .map(|c| c.is_ascii_alphanumeric())
                    .unwrap_or(false)
                {
                    self.pos += 1;
                }
                let word = std::str::from_utf8(&self.chars[start..self.pos])
                    .map_err(|_| "non-ascii identifier".to_string())?;
                self.skip_ws();
                match word {
                    "x1" => Ok(Expr::X1),
                    "x2" => Ok(Expr::X2),
                    "abs" => {
                        self.expect(b'(')?;
                        self.depth += 1;
                        if self.depth > MAX_DEPTH {
                            return Err("expression too deeply nested".into());
                        }
                        let e = self.expr()?;
                        self.depth -= 1;
                        self.expect(b')')?;
                        Ok(Expr::Abs(Box::new(e)))
                    }
                    w if w.starts_with('l') && w.len() > 1 => {
                        let idx: usize = w[1..]
                            .parse()
                            .map_err(|_| format!("bad edge index in '{w}'"))?;
                        if idx == 0 || idx > 64 {
                            return Err(format!("edge index {idx} out of range"));
                        }
                        Ok(Expr::L(idx))
                    }
                    w => Err(format!("unknown identifier '{w}'")),
                }
            }
            _ => Err(format!("expected an atom at byte {}", self.pos)),
        }
    }

    fn number(&mut self) -> Result<f64, String> {
        self.skip_ws();
        let start = self.pos;
        while self
            .peek()
            .map(|c| c.is_ascii_digit() || c == b'.' || c == b'e' || c == b'E')
            .unwrap_or(false)
        {
            // Exponent sign directly after e/E.
            if (self.chars[self.pos] == b'e' || self.chars[self.pos] == b'E')
                && matches!(self.chars.get(self.pos + 1), Some(b'+') | Some(b'-'))
            {
                self.pos += 1;
            }
            self.pos += 1;
        }
        if start == self.pos {
            return Err(format!("expected a number at byte {}", self.pos));
        }
        let s = std::str::from_utf8(&self.chars[start..self.pos]).unwrap();
        let v: f64 = s.parse().map_err(|_| format!("bad number '{s}'"))?;
        self.skip_ws();
        if !v.is_finite() {
            return Err(format!("non-finite literal '{s}'"));
        }
        Ok(v)
    }
}


#[cfg(test)]
mod prop {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn parser_never_panics(s in ".{0,256}") {
            let _ = parse_expr(&s);
        }

        #[test]
        fn numbers_round_trip(v in -1e6f64..1e6f64) {
            let e = parse_expr(&format!("{v}")).unwrap();
            let got = e.eval(crate::geometry::Point::new(0.0, 0.0), &[]);
            prop_assert!((got - v).abs() <= 1e-9 * v.abs().max(1.0));
        }
    }
}
