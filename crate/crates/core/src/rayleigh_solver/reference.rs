use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::exponent_field::ExponentField;

/// `π_p = 2π / (p sin(π/p))`
fn pi_p(p: f64) -> f64 {
    2.0 * PI / (p * (PI / p).sin())
}

/// Closed-form first eigenvalue, in norm form, of the constant-`p` Laplacian on
/// an interval of the given length: `(p-1)^{1/p} π_p / L`.
pub fn constant_p_first_eigenvalue_1d(p0: f64, length: f64) -> Result<f64> {
    if !(p0 > 1.0 && p0.is_finite()) {
        return Err(Error::InadmissibleExponent { node: 0, value: p0 });
    }
    if !(length > 0.0) {
        return Err(Error::Precondition(format!("interval length {length}")));
    }
    Ok((p0 - 1.0).powf(1.0 / p0) * pi_p(p0) / length)
}

/// `λ^{(m)} = m λ^{(1)}`: the m-th eigenfunction is m reflected copies of the
/// first one on subintervals of length `L/m`, and the norm-form quotient scales
/// like the reciprocal length.
pub fn constant_p_higher_eigenvalue_1d(m: usize, p0: f64, interval: (f64, f64)) -> Result<f64> {
    if m == 0 {
        return Err(Error::Precondition("eigenvalue index starts at 1".into()));
    }
    let first = constant_p_first_eigenvalue_1d(p0, interval.1 - interval.0)?;
    Ok(m as f64 * first)
}

/// Same as [`constant_p_higher_eigenvalue_1d`] for a field on a 1D mesh; variable
/// exponents are refused.
pub fn higher_eigenvalue(m: usize, p: &ExponentField) -> Result<f64> {
    if p.mesh().dimension() != 1 {
        return Err(Error::Unsupported(
            "higher eigenvalues are only available on intervals".into(),
        ));
    }
    if !p.is_constant() {
        return Err(Error::Unsupported(format!(
            "eigenvalue {m} for a variable exponent (range [{}, {}])",
            p.p_minus(),
            p.p_plus()
        )));
    }
    let axis = p.mesh().axes()[0];
    constant_p_higher_eigenvalue_1d(m, p.p_minus(), (axis.lo, axis.hi))
}
