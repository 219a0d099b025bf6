use num_traits::{One, Zero};

use super::{Expr, ExprError, Func, Node, Rational, Symbol};

/// Raw (unnormalized) derivative tree.
pub(super) fn derivative(e: &Expr, var: &Symbol) -> Result<Expr, ExprError> {
    if !e.depends_on(var) {
        return Ok(Expr::zero());
    }
    Ok(match e.node() {
        Node::Num(_) => Expr::zero(),
        Node::Var(s) => {
            if s == var {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Node::Add(items) => {
            let mut terms = Vec::with_capacity(items.len());
            for t in items {
                terms.push(derivative(t, var)?);
            }
            Expr::raw_add(terms)
        }
        Node::Mul(items) => {
            let mut terms = Vec::new();
            for (i, f) in items.iter().enumerate() {
                if !f.depends_on(var) {
                    continue;
                }
                let mut factors = items.clone();
                factors[i] = derivative(f, var)?;
                terms.push(Expr::raw_mul(factors));
            }
            Expr::raw_add(terms)
        }
        Node::Pow(b, q) => {
            let lowered = q - Rational::one();
            match b.node() {
                // d |u|^q = q |u|^(q-1) sign(u) u'
                Node::Func(Func::Abs, u) if !q.is_one() => {
                    let du = derivative(u, var)?;
                    Expr::raw_mul(vec![
                        Expr::num(q.clone()),
                        Expr::raw_pow(b.clone(), lowered),
                        Expr::raw_func(Func::Sign, u.clone()),
                        du,
                    ])
                }
                _ => {
                    let db = derivative(b, var)?;
                    let lowered_pow = if lowered.is_zero() {
                        Expr::one()
                    } else {
                        Expr::raw_pow(b.clone(), lowered)
                    };
                    Expr::raw_mul(vec![Expr::num(q.clone()), lowered_pow, db])
                }
            }
        }
        Node::Func(f, a) => {
            let da = derivative(a, var)?;
            let outer = match f {
                Func::Sin => Expr::raw_func(Func::Cos, a.clone()),
                Func::Cos => Expr::raw_mul(vec![Expr::int(-1), Expr::raw_func(Func::Sin, a.clone())]),
                Func::Exp => e.clone(),
                Func::Log => Expr::raw_pow(a.clone(), -Rational::one()),
                // sign is locally constant away from its jump
                Func::Sign => Expr::zero(),
                Func::Abs => return Err(ExprError::DomainFunction("abs".into())),
            };
            Expr::raw_mul(vec![outer, da])
        }
    })
}
