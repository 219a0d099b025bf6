//! Infinitesimal symmetries, Noether currents and conservation laws.

use crate::canonical::{contact_forms, contact_reduce, prolong_vectorfield, same_chart, GeometryError};
use crate::connection::JetField2;
use crate::connection::jetfield_contract;
use crate::forms::{exterior_d, interior, lie_derivative, pullback_by_section, Form, VectorField};
use crate::harness::{numeric_check, HarnessError, IdentityCheck, NumericReport, NumericSettings};
use crate::jetchart::{prolong_section, SectionE};
use crate::lagrangian::{cartan_forms, Lagrangian};
use crate::symexpr::Expr;

/// Settings used when a total variation does not simplify to zero.
pub fn symmetry_fallback() -> NumericSettings {
    NumericSettings { samples: 200, tol: 1e-9, ..NumericSettings::default() }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SymmetryReport {
    pub prolonged: VectorField,
    /// (j¹Z)(L) + L ∂α^μ/∂x^μ
    pub delta: Expr,
    /// `delta` normalized to zero.
    pub symbolic: bool,
    /// Present only when the symbolic test was inconclusive.
    pub numeric: Option<NumericReport>,
}

impl SymmetryReport {
    pub fn is_symmetry(&self) -> bool {
        self.symbolic || self.numeric.as_ref().is_some_and(|r| r.pass)
    }
}

pub fn total_variation(lag: &Lagrangian, z: &VectorField) -> Result<SymmetryReport, GeometryError> {
    total_variation_with(lag, z, &symmetry_fallback())
}

pub fn total_variation_with(
    lag: &Lagrangian,
    z: &VectorField,
    settings: &NumericSettings,
) -> Result<SymmetryReport, GeometryError> {
    same_chart(&lag.chart, z.chart())?;
    let c = &lag.chart;
    let prolonged = prolong_vectorfield(z)?;
    let mut t = vec![prolonged.apply(&lag.l)];
    for mu in 0..c.base_dim() {
        let alpha = z.component(c.x_index(mu));
        t.push(&lag.l * alpha.diff(c.x(mu)).map_err(|e| GeometryError::Invalid(e.to_string()))?);
    }
    let delta = Expr::sum(t);
    let symbolic = delta.is_zero();
    let numeric = if symbolic {
        None
    } else {
        let chk = IdentityCheck::vanishing("total_variation", vec![delta.clone()], settings);
        Some(numeric_check::<f64>(&chk).map_err(harness_error)?)
    };
    Ok(SymmetryReport { prolonged, delta, symbolic, numeric })
}

fn harness_error(e: HarnessError) -> GeometryError {
    GeometryError::Invalid(e.to_string())
}

/// J = i(j¹Z)Θ_L
pub fn noether_current(lag: &Lagrangian, z: &VectorField) -> Result<Form, GeometryError> {
    same_chart(&lag.chart, z.chart())?;
    let theta = cartan_forms(lag).theta;
    Ok(interior(&prolong_vectorfield(z)?, &theta)?)
}

#[derive(Debug, Clone, PartialEq)]
pub enum CheckMode {
    Symbolic,
    Numeric(NumericSettings),
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConservationReport {
    /// d((j¹φ)*J), an (n+1)-form on the base.
    pub residual: Form,
    pub symbolic: bool,
    pub numeric: Option<NumericReport>,
}

impl ConservationReport {
    pub fn passed(&self) -> bool {
        self.symbolic || self.numeric.as_ref().is_some_and(|r| r.pass)
    }
}

pub fn check_conservation(j: &Form, phi: &SectionE, mode: &CheckMode) -> Result<ConservationReport, GeometryError> {
    same_chart(j.chart(), &phi.chart)?;
    let pulled = pullback_by_section(&prolong_section(phi), j)?;
    let residual = exterior_d(&pulled);
    let symbolic = residual.is_zero();
    let numeric = match mode {
        CheckMode::Numeric(s) if !symbolic => {
            let chk = IdentityCheck::vanishing("conservation", residual.coefficients(), s);
            Some(numeric_check::<f64>(&chk).map_err(harness_error)?)
        }
        _ => None,
    };
    Ok(ConservationReport { residual, symbolic, numeric })
}

/// Checks the jet-field form of Noether's theorem: if L(X)θ^A and α lie in
/// the contact ideal and L(X)𝓛 = dξ + α, returns i(𝒴)d(ξ − i(X)Θ_L),
/// which vanishes when 𝒴 solves the field equations.
pub fn jetfield_noether_check(
    lag: &Lagrangian,
    y: &JetField2,
    x: &VectorField,
    xi: &Form,
    alpha: &Form,
) -> Result<Form, GeometryError> {
    let c = &lag.chart;
    for other in [&y.chart, x.chart(), xi.chart(), alpha.chart()] {
        same_chart(c, other)?;
    }
    for theta in contact_forms(c) {
        let red = contact_reduce(&lie_derivative(x, &theta)?).reduced;
        if !red.is_zero() {
            return Err(GeometryError::HypothesisViolated { which: 'a', residual: red.to_string() });
        }
    }
    let balance = lie_derivative(x, &lag.density())?.try_sub(&exterior_d(xi))?.try_sub(alpha)?;
    if !balance.is_zero() {
        return Err(GeometryError::HypothesisViolated { which: 'b', residual: balance.to_string() });
    }
    let red = contact_reduce(alpha).reduced;
    if !red.is_zero() {
        return Err(GeometryError::HypothesisViolated { which: 'c', residual: red.to_string() });
    }
    let theta = cartan_forms(lag).theta;
    let current = xi.try_sub(&interior(x, &theta)?)?;
    jetfield_contract(y, &exterior_d(&current))
}
