use std::collections::{BTreeMap, HashMap};

use num_traits::{Float, FromPrimitive, One, Signed, ToPrimitive};

use super::{Expr, ExprError, Func, Node, Rational, Symbol};

/// Source of numeric values for free variables.
pub trait Bindings<T> {
    fn value(&self, name: &str) -> Option<T>;
}

impl<T: Copy> Bindings<T> for HashMap<Symbol, T> {
    fn value(&self, name: &str) -> Option<T> {
        self.get(name).copied()
    }
}

impl<T: Copy> Bindings<T> for BTreeMap<Symbol, T> {
    fn value(&self, name: &str) -> Option<T> {
        self.get(name).copied()
    }
}

impl<T: Copy> Bindings<T> for BTreeMap<String, T> {
    fn value(&self, name: &str) -> Option<T> {
        self.get(name).copied()
    }
}

impl<T: Copy> Bindings<T> for [(&str, T)] {
    fn value(&self, name: &str) -> Option<T> {
        self.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}

fn rational_to<T: Float + FromPrimitive>(r: &Rational) -> T {
    if let Some(v) = r.to_f64() {
        return T::from_f64(v).unwrap_or_else(T::nan);
    }
    T::nan()
}

fn domain<T>(msg: impl Into<String>) -> Result<T, ExprError> {
    Err(ExprError::NumericDomain(msg.into()))
}

pub(super) fn evaluate<T, B>(e: &Expr, point: &B) -> Result<T, ExprError>
where
    T: Float + FromPrimitive,
    B: Bindings<T> + ?Sized,
{
    let v = match e.node() {
        Node::Num(r) => rational_to(r),
        Node::Var(s) => point
            .value(s.as_str())
            .ok_or_else(|| ExprError::UnboundVariable(s.to_string()))?,
        Node::Add(items) => {
            let mut acc = T::zero();
            for t in items {
                acc = acc + evaluate(t, point)?;
            }
            acc
        }
        Node::Mul(items) => {
            let mut acc = T::one();
            for t in items {
                acc = acc * evaluate(t, point)?;
            }
            acc
        }
        Node::Pow(b, q) => {
            let base: T = evaluate(b, point)?;
            power(base, q)?
        }
        Node::Func(f, a) => {
            let x: T = evaluate(a, point)?;
            match f {
                Func::Sin => x.sin(),
                Func::Cos => x.cos(),
                Func::Exp => x.exp(),
                Func::Log => {
                    if x <= T::zero() {
                        return domain(format!("log of nonpositive value in {e}"));
                    }
                    x.ln()
                }
                Func::Abs => x.abs(),
                Func::Sign => {
                    if x.is_zero() {
                        T::zero()
                    } else {
                        x.signum()
                    }
                }
            }
        }
    };
    if !v.is_finite() {
        return domain(format!("non-finite value in {e}"));
    }
    Ok(v)
}

fn power<T: Float + FromPrimitive>(base: T, q: &Rational) -> Result<T, ExprError> {
    if base.is_zero() && q.is_negative() {
        return domain("division by zero");
    }
    if q.is_integer() {
        let n = q.to_integer().to_i32().ok_or_else(|| ExprError::NumericDomain("exponent too large".into()))?;
        return Ok(base.powi(n));
    }
    let denom_even = q.denom().to_u64().map(|d| d % 2 == 0).unwrap_or(true);
    let qf: T = rational_to(q);
    if base < T::zero() {
        if denom_even {
            return domain("even root of a negative value");
        }
        let magnitude = (-base).powf(qf);
        let odd_numer = q.numer().to_i64().map(|n| n % 2 != 0).unwrap_or(false);
        return Ok(if odd_numer { -magnitude } else { magnitude });
    }
    if q.is_one() {
        return Ok(base);
    }
    Ok(base.powf(qf))
}

