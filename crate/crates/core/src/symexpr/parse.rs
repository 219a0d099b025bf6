//! Text grammar for expressions.
//!
//! ```text
//! expr   := ['+'|'-'] term (('+'|'-') term)*
//! term   := unary (('*'|'/') unary)*
//! unary  := '-' unary | factor
//! factor := base ('^' exponent)?
//! exponent := ['-'] int | '(' ['-'] int ['/' int] ')'
//! base   := number | ident | func '(' expr ')' | jet '(' ident (',' ident)* ')' | '(' expr ')'
//! func   := sqrt | sin | cos | exp | log | abs | sign
//! jet    := d | dd | a | b
//! ```
//!
//! Jet references are turned into symbols by a [`JetResolver`]; the chart
//! resolver canonicalizes `dd(u,x1,x0)` to `dd(u,x0,x1)`.

use num_bigint::BigInt;
use num_traits::{One, Zero};

use super::{Expr, ExprError, Func, Rational, Symbol};

pub trait JetResolver {
    fn jet_symbol(&self, kind: &str, args: &[String]) -> Result<Symbol, String>;
}

/// Resolver that keeps jet references exactly as written.
pub struct RawJetNames;

impl JetResolver for RawJetNames {
    fn jet_symbol(&self, kind: &str, args: &[String]) -> Result<Symbol, String> {
        Ok(Symbol::new(&format!("{kind}({})", args.join(","))))
    }
}

pub fn parse_expr(text: &str) -> Result<Expr, ExprError> {
    parse_expr_with(text, &RawJetNames)
}

pub fn parse_expr_with(text: &str, resolver: &dyn JetResolver) -> Result<Expr, ExprError> {
    let tokens = tokenize(text)?;
    let mut p = Parser { tokens, pos: 0, resolver };
    let e = p.expr()?;
    if let Some(t) = p.tokens.get(p.pos) {
        return Err(p.error_at(t, format!("unexpected `{}`", t.kind.describe())));
    }
    Ok(e.normalize())
}

#[derive(Debug, Clone, PartialEq)]
enum Kind {
    Num(Rational),
    Ident(String),
    Op(char),
}

impl Kind {
    fn describe(&self) -> String {
        match self {
            Kind::Num(r) => r.to_string(),
            Kind::Ident(s) => s.clone(),
            Kind::Op(c) => c.to_string(),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    kind: Kind,
    line: usize,
    col: usize,
}

fn tokenize(text: &str) -> Result<Vec<Token>, ExprError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut line, mut col) = (1usize, 1usize);
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (tl, tc) = (line, col);
        if c == '\n' {
            line += 1;
            col = 1;
            i += 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
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
            let lit: String = chars[start..i].iter().collect();
            let value = parse_number(&lit).ok_or_else(|| ExprError::Parse {
                line: tl,
                col: tc,
                msg: format!("bad number `{lit}`"),
            })?;
            col += i - start;
            out.push(Token { kind: Kind::Num(value), line: tl, col: tc });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let word: String = chars[start..i].iter().collect();
            col += i - start;
            out.push(Token { kind: Kind::Ident(word), line: tl, col: tc });
            continue;
        }
        if "+-*/^(),".contains(c) {
            out.push(Token { kind: Kind::Op(c), line: tl, col: tc });
            i += 1;
            col += 1;
            continue;
        }
        return Err(ExprError::Parse { line: tl, col: tc, msg: format!("unexpected character `{c}`") });
    }
    Ok(out)
}

/// Decimal literal to an exact rational (`0.25` is `1/4`).
fn parse_number(lit: &str) -> Option<Rational> {
    let (mantissa, exponent) = match lit.find(['e', 'E']) {
        Some(k) => (&lit[..k], lit[k + 1..].parse::<i32>().ok()?),
        None => (lit, 0),
    };
    let (int_part, frac_part) = match mantissa.split_once('.') {
        Some((a, b)) => (a, b),
        None => (mantissa, ""),
    };
    if frac_part.contains('.') {
        return None;
    }
    let digits = format!("{int_part}{frac_part}");
    let digits = if digits.is_empty() { "0".to_string() } else { digits };
    let n: BigInt = digits.parse().ok()?;
    let scale = exponent - frac_part.len() as i32;
    let ten = Rational::from_integer(BigInt::from(10));
    let factor = if scale >= 0 {
        num_traits::pow::Pow::pow(ten, scale as u32)
    } else {
        num_traits::pow::Pow::pow(ten.recip(), (-scale) as u32)
    };
    Some(Rational::from_integer(n) * factor)
}

struct Parser<'a> {
    tokens: Vec<Token>,
    pos: usize,
    resolver: &'a dyn JetResolver,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Kind> {
        self.tokens.get(self.pos).map(|t| &t.kind)
    }

    fn error_at(&self, t: &Token, msg: String) -> ExprError {
        ExprError::Parse { line: t.line, col: t.col, msg }
    }

    fn error_here(&self, msg: impl Into<String>) -> ExprError {
        match self.tokens.get(self.pos) {
            Some(t) => self.error_at(t, msg.into()),
            None => {
                let (line, col) = self.tokens.last().map(|t| (t.line, t.col + 1)).unwrap_or((1, 1));
                ExprError::Parse { line, col, msg: format!("{} at end of input", msg.into()) }
            }
        }
    }

    fn eat_op(&mut self, c: char) -> bool {
        if self.peek() == Some(&Kind::Op(c)) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, c: char) -> Result<(), ExprError> {
        if self.eat_op(c) {
            Ok(())
        } else {
            Err(self.error_here(format!("expected `{c}`")))
        }
    }

    fn expr(&mut self) -> Result<Expr, ExprError> {
        let mut terms = Vec::new();
        let first_negative = if self.eat_op('-') {
            true
        } else {
            self.eat_op('+');
            false
        };
        let t = self.term()?;
        terms.push(if first_negative { negate(t) } else { t });
        loop {
            if self.eat_op('+') {
                terms.push(self.term()?);
            } else if self.eat_op('-') {
                let t = self.term()?;
                terms.push(negate(t));
            } else {
                break;
            }
        }
        Ok(if terms.len() == 1 { terms.pop().unwrap() } else { Expr::raw_add(terms) })
    }

    fn term(&mut self) -> Result<Expr, ExprError> {
        let mut factors = vec![self.unary()?];
        loop {
            if self.eat_op('*') {
                factors.push(self.unary()?);
            } else if self.eat_op('/') {
                let d = self.unary()?;
                factors.push(Expr::raw_pow(d, -Rational::one()));
            } else {
                break;
            }
        }
        Ok(if factors.len() == 1 { factors.pop().unwrap() } else { Expr::raw_mul(factors) })
    }

    fn unary(&mut self) -> Result<Expr, ExprError> {
        if self.eat_op('-') {
            return Ok(negate(self.unary()?));
        }
        self.factor()
    }

    fn factor(&mut self) -> Result<Expr, ExprError> {
        let base = self.base()?;
        if self.eat_op('^') {
            let q = self.exponent()?;
            return Ok(Expr::raw_pow(base, q));
        }
        Ok(base)
    }

    fn integer(&mut self) -> Result<BigInt, ExprError> {
        let negative = self.eat_op('-');
        match self.peek().cloned() {
            Some(Kind::Num(r)) if r.is_integer() => {
                self.pos += 1;
                let n = r.to_integer();
                Ok(if negative { -n } else { n })
            }
            _ => Err(self.error_here("expected integer exponent")),
        }
    }

    fn exponent(&mut self) -> Result<Rational, ExprError> {
        if self.eat_op('(') {
            let n = self.integer()?;
            let d = if self.eat_op('/') { self.integer()? } else { BigInt::one() };
            self.expect_op(')')?;
            if d.is_zero() {
                return Err(self.error_here("zero denominator in exponent"));
            }
            return Ok(Rational::new(n, d));
        }
        Ok(Rational::from_integer(self.integer()?))
    }

    fn base(&mut self) -> Result<Expr, ExprError> {
        let Some(tok) = self.tokens.get(self.pos).cloned() else {
            return Err(self.error_here("expected expression"));
        };
        match tok.kind.clone() {
            Kind::Num(r) => {
                self.pos += 1;
                Ok(Expr::num(r))
            }
            Kind::Op('(') => {
                self.pos += 1;
                let e = self.expr()?;
                self.expect_op(')')?;
                Ok(e)
            }
            Kind::Ident(name) => {
                self.pos += 1;
                if self.peek() != Some(&Kind::Op('(')) {
                    return Ok(Expr::var(&name));
                }
                self.pos += 1;
                if name == "sqrt" {
                    let arg = self.expr()?;
                    self.expect_op(')')?;
                    return Ok(Expr::raw_pow(arg, Rational::new(BigInt::one(), BigInt::from(2))));
                }
                if let Some(func) = Func::from_name(&name) {
                    let arg = self.expr()?;
                    self.expect_op(')')?;
                    return Ok(Expr::raw_func(func, arg));
                }
                if matches!(name.as_str(), "d" | "dd" | "a" | "b") {
                    let mut args = Vec::new();
                    loop {
                        match self.peek().cloned() {
                            Some(Kind::Ident(a)) => {
                                self.pos += 1;
                                args.push(a);
                            }
                            _ => return Err(self.error_here("expected coordinate name")),
                        }
                        if self.eat_op(',') {
                            continue;
                        }
                        self.expect_op(')')?;
                        break;
                    }
                    let expected = if matches!(name.as_str(), "d" | "a") { 2 } else { 3 };
                    if args.len() != expected {
                        return Err(self.error_at(&tok, format!("`{name}` takes {expected} arguments")));
                    }
                    return self
                        .resolver
                        .jet_symbol(&name, &args)
                        .map(|s| Expr::sym(&s))
                        .map_err(|msg| self.error_at(&tok, msg));
                }
                Err(self.error_at(&tok, format!("unknown function `{name}`")))
            }
            Kind::Op(c) => Err(self.error_at(&tok, format!("unexpected `{c}`"))),
        }
    }
}

fn negate(e: Expr) -> Expr {
    Expr::raw_mul(vec![Expr::int(-1), e])
}
