//! Normal form: an expanded sum of monomials over opaque atoms.
//!
//! Atoms are variables, function applications with normalized arguments,
//! and bases that cannot be expanded (sums under negative or fractional
//! exponents, constants under fractional exponents).

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{Expr, Func, Node, Rational};

type Monomial = BTreeMap<Expr, Rational>;
type Poly = BTreeMap<Monomial, Rational>;

pub(super) fn normalize(e: &Expr) -> Expr {
    from_poly(&to_poly(e))
}

fn constant(c: Rational) -> Poly {
    let mut p = Poly::new();
    if !c.is_zero() {
        p.insert(Monomial::new(), c);
    }
    p
}

fn atom_poly(atom: Expr, exponent: Rational) -> Poly {
    let mut m = Monomial::new();
    m.insert(atom, exponent);
    let (c, m) = canonical_monomial(m);
    let mut p = Poly::new();
    if !c.is_zero() {
        p.insert(m, c);
    }
    p
}

fn add_term(p: &mut Poly, m: Monomial, c: Rational) {
    if c.is_zero() {
        return;
    }
    match p.entry(m) {
        std::collections::btree_map::Entry::Vacant(v) => {
            v.insert(c);
        }
        std::collections::btree_map::Entry::Occupied(mut o) => {
            let sum = o.get() + c;
            if sum.is_zero() {
                o.remove();
            } else {
                *o.get_mut() = sum;
            }
        }
    }
}

fn add_into(acc: &mut Poly, other: Poly) {
    for (m, c) in other {
        add_term(acc, m, c);
    }
}

/// Folds constant atoms with integer exponents into the coefficient,
/// drops zero exponents and reduces integer powers of `sign`.
fn canonical_monomial(raw: Monomial) -> (Rational, Monomial) {
    let mut coeff = Rational::one();
    let mut out = Monomial::new();
    for (atom, e) in raw {
        if e.is_zero() {
            continue;
        }
        match atom.node() {
            Node::Num(c) if e.is_integer() && !c.is_zero() => {
                coeff *= rational_powi(c, e.to_integer());
            }
            Node::Func(Func::Sign, _) if e.is_integer() => {
                if e.to_integer().is_odd() {
                    out.insert(atom, Rational::one());
                }
            }
            _ => {
                out.insert(atom, e);
            }
        }
    }
    (coeff, out)
}

fn mul_monomials(a: &Monomial, b: &Monomial) -> (Rational, Monomial) {
    let mut m = a.clone();
    for (atom, e) in b {
        let entry = m.entry(atom.clone()).or_insert_with(Rational::zero);
        *entry += e;
    }
    canonical_monomial(m)
}

fn mul_poly(a: &Poly, b: &Poly) -> Poly {
    let mut out = Poly::new();
    for (ma, ca) in a {
        for (mb, cb) in b {
            let (k, m) = mul_monomials(ma, mb);
            add_term(&mut out, m, ca * cb * k);
        }
    }
    out
}

fn pow_poly_int(p: &Poly, n: u64) -> Poly {
    let mut result = constant(Rational::one());
    let mut base = p.clone();
    let mut n = n;
    while n > 0 {
        if n & 1 == 1 {
            result = mul_poly(&result, &base);
        }
        n >>= 1;
        if n > 0 {
            base = mul_poly(&base, &base);
        }
    }
    result
}

pub(crate) fn rational_powi(c: &Rational, n: BigInt) -> Rational {
    let k = n.to_i32().expect("exponent out of range");
    if k >= 0 {
        num_traits::pow::Pow::pow(c.clone(), k as u32)
    } else {
        num_traits::pow::Pow::pow(c.recip(), (-k) as u32)
    }
}

fn exact_root(n: &BigInt, k: u32) -> Option<BigInt> {
    let r = n.nth_root(k);
    if num_traits::pow::Pow::pow(&r, k) == *n {
        Some(r)
    } else {
        None
    }
}

/// `c^q` for positive `c` when the result is rational.
fn exact_rational_power(c: &Rational, q: &Rational) -> Option<Rational> {
    if !c.is_positive() {
        return None;
    }
    let k = q.denom().to_u32()?;
    let n = exact_root(c.numer(), k)?;
    let d = exact_root(c.denom(), k)?;
    Some(rational_powi(&Rational::new(n, d), q.numer().clone()))
}

fn eval_func_at(f: Func, c: &Rational) -> Option<Rational> {
    match f {
        Func::Sin if c.is_zero() => Some(Rational::zero()),
        Func::Cos | Func::Exp if c.is_zero() => Some(Rational::one()),
        Func::Log if c.is_one() => Some(Rational::zero()),
        Func::Abs => Some(c.abs()),
        Func::Sign => Some(if c.is_zero() { Rational::zero() } else { c.signum() }),
        _ => None,
    }
}

fn to_poly(e: &Expr) -> Poly {
    match e.node() {
        Node::Num(c) => constant(c.clone()),
        Node::Var(_) => atom_poly(e.clone(), Rational::one()),
        Node::Add(items) => {
            let mut acc = Poly::new();
            for t in items {
                add_into(&mut acc, to_poly(t));
            }
            acc
        }
        Node::Mul(items) => {
            let mut acc = constant(Rational::one());
            for t in items {
                if acc.is_empty() {
                    break;
                }
                acc = mul_poly(&acc, &to_poly(t));
            }
            acc
        }
        Node::Pow(b, q) => pow_to_poly(to_poly(b), q),
        Node::Func(f, a) => {
            let arg = from_poly(&to_poly(a));
            if let Some(c) = arg.as_rational() {
                if let Some(v) = eval_func_at(*f, c) {
                    return constant(v);
                }
            }
            atom_poly(Expr::raw_func(*f, arg), Rational::one())
        }
    }
}

fn pow_to_poly(base: Poly, q: &Rational) -> Poly {
    if q.is_zero() {
        return constant(Rational::one());
    }
    if base.is_empty() {
        if q.is_positive() {
            return Poly::new();
        }
        // 0 to a negative power stays symbolic; evaluation reports it.
        let mut m = Monomial::new();
        m.insert(Expr::zero(), q.clone());
        let mut p = Poly::new();
        p.insert(m, Rational::one());
        return p;
    }
    if base.len() == 1 {
        let (m, c) = base.iter().next().map(|(m, c)| (m.clone(), c.clone())).unwrap();
        if q.is_integer() {
            let n = q.to_integer();
            let mut raw = Monomial::new();
            for (atom, e) in m {
                raw.insert(atom, e * q);
            }
            let (k, mono) = canonical_monomial(raw);
            let mut p = Poly::new();
            p.insert(mono, rational_powi(&c, n) * k);
            return p;
        }
        if let Some(r) = exact_rational_power(&c, q) {
            if m.is_empty() {
                return constant(r);
            }
            let mut p = Poly::new();
            if m.len() == 1 && m.values().next().map(|e| e.is_one()).unwrap_or(false) {
                let atom = m.keys().next().unwrap().clone();
                let (k, mono) = canonical_monomial(std::iter::once((atom, q.clone())).collect());
                p.insert(mono, r * k);
            } else {
                let mut unit = Poly::new();
                unit.insert(m, Rational::one());
                let atom = from_poly(&unit);
                let (k, mono) = canonical_monomial(std::iter::once((atom, q.clone())).collect());
                p.insert(mono, r * k);
            }
            return p;
        }
        return atom_poly(from_poly(&base), q.clone());
    }
    if q.is_integer() && q.is_positive() {
        let n = q.to_integer().to_u64().expect("exponent out of range");
        return pow_poly_int(&base, n);
    }
    atom_poly(from_poly(&base), q.clone())
}

fn term_expr(m: &Monomial, c: &Rational) -> Expr {
    let mut factors: Vec<Expr> = Vec::with_capacity(m.len() + 1);
    for (atom, e) in m {
        if e.is_one() {
            factors.push(atom.clone());
        } else {
            factors.push(Expr::raw_pow(atom.clone(), e.clone()));
        }
    }
    if factors.is_empty() {
        return Expr::num(c.clone());
    }
    if c.is_one() && factors.len() == 1 {
        return factors.pop().unwrap();
    }
    if !c.is_one() {
        factors.insert(0, Expr::num(c.clone()));
    }
    Expr::raw_mul(factors)
}

fn from_poly(p: &Poly) -> Expr {
    match p.len() {
        0 => Expr::zero(),
        1 => {
            let (m, c) = p.iter().next().unwrap();
            term_expr(m, c)
        }
        _ => Expr::raw_add(p.iter().map(|(m, c)| term_expr(m, c)).collect()),
    }
}
