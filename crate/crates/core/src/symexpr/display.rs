use std::fmt::{self, Write};

use num_traits::{One, Signed};

use super::{Expr, Node, Rational};

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.node() {
            Node::Add(terms) => {
                for (i, t) in terms.iter().enumerate() {
                    let (c, rest) = t.split_coefficient();
                    if i == 0 {
                        write_term(f, &c, &rest)?;
                    } else if c.is_negative() {
                        f.write_str(" - ")?;
                        write_term(f, &-c, &rest)?;
                    } else {
                        f.write_str(" + ")?;
                        write_term(f, &c, &rest)?;
                    }
                }
                Ok(())
            }
            _ => {
                let (c, rest) = self.split_coefficient();
                write_term(f, &c, &rest)
            }
        }
    }
}

fn factors_of(rest: &Expr) -> Vec<Expr> {
    match rest.node() {
        Node::Num(r) if r.is_one() => Vec::new(),
        Node::Mul(fs) => fs.clone(),
        _ => vec![rest.clone()],
    }
}

fn write_rational(f: &mut impl Write, r: &Rational) -> fmt::Result {
    if r.is_integer() {
        write!(f, "{}", r.numer())
    } else {
        write!(f, "{}/{}", r.numer(), r.denom())
    }
}

fn write_term(f: &mut impl Write, c: &Rational, rest: &Expr) -> fmt::Result {
    let factors = factors_of(rest);
    if c.is_negative() {
        f.write_char('-')?;
    }
    let mag = c.abs();
    let mut numer = Vec::new();
    let mut denom = Vec::new();
    for fac in &factors {
        match fac.node() {
            Node::Pow(b, e) if e.is_negative() => denom.push((b.clone(), -e.clone())),
            Node::Pow(b, e) => numer.push((b.clone(), e.clone())),
            _ => numer.push((fac.clone(), Rational::one())),
        }
    }
    let mut wrote = false;
    if !mag.is_one() || numer.is_empty() {
        write!(f, "{}", mag.numer())?;
        if !mag.denom().is_one() {
            write!(f, "/{}", mag.denom())?;
        }
        wrote = true;
    }
    for (b, e) in &numer {
        if wrote {
            f.write_char('*')?;
        }
        write_power(f, b, e)?;
        wrote = true;
    }
    for (b, e) in &denom {
        f.write_char('/')?;
        write_power(f, b, e)?;
    }
    Ok(())
}

fn needs_parens(base: &Expr) -> bool {
    match base.node() {
        Node::Add(_) | Node::Mul(_) | Node::Pow(_, _) => true,
        Node::Num(r) => r.is_negative() || !r.is_integer(),
        _ => false,
    }
}

fn write_atom(f: &mut impl Write, base: &Expr) -> fmt::Result {
    match base.node() {
        Node::Var(s) => f.write_str(s.as_str()),
        Node::Func(func, arg) => write!(f, "{}({})", func.name(), arg),
        Node::Num(r) => {
            if needs_parens(base) {
                f.write_char('(')?;
                write_rational(f, r)?;
                f.write_char(')')
            } else {
                write_rational(f, r)
            }
        }
        _ if needs_parens(base) => write!(f, "({base})"),
        _ => write!(f, "{base}"),
    }
}

/// Writes `base^e` for positive `e`.
fn write_power(f: &mut impl Write, base: &Expr, e: &Rational) -> fmt::Result {
    if e.denom() == &2.into() {
        write!(f, "sqrt({base})")?;
        if !e.numer().is_one() {
            write!(f, "^{}", e.numer())?;
        }
        return Ok(());
    }
    write_atom(f, base)?;
    if e.is_one() {
        return Ok(());
    }
    if e.is_integer() {
        write!(f, "^{}", e.numer())
    } else {
        write!(f, "^({}/{})", e.numer(), e.denom())
    }
}
