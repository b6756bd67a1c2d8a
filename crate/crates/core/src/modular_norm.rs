//! p(x)-modulars, Luxemburg norms and the `L^{q(x)} ⊂ L^{p(x)}` embedding bound.
//!
//! All integrals use the midpoint rule: one sample per cell at its centre, the
//! exponent taken as the average of the cell's nodal values.

use std::sync::Arc;

use serde::Serialize;

use crate::discretize::{CellVectorField, GridFunction};
use crate::error::{Error, Result};
use crate::exponent_field::ExponentField;
use crate::mesh::Mesh;

/// Relative tolerance on γ for the Luxemburg root-find.
pub const LUXEMBURG_TOL: f64 = 1e-12;
pub const LUXEMBURG_MAX_ITER: usize = 200;
/// Half-width of the band treated as "equal to one" by [`unit_ball_check`].
pub const UNIT_BAND: f64 = 1e-9;

/// Anything that can be sampled as a magnitude at cell centres.
pub trait CellSampled {
    fn mesh(&self) -> &Arc<Mesh>;
    fn cell_magnitudes(&self) -> Vec<f64>;
}

impl CellSampled for GridFunction {
    fn mesh(&self) -> &Arc<Mesh> {
        GridFunction::mesh(self)
    }

    fn cell_magnitudes(&self) -> Vec<f64> {
        self.cell_values().into_iter().map(f64::abs).collect()
    }
}

impl CellSampled for CellVectorField {
    fn mesh(&self) -> &Arc<Mesh> {
        CellVectorField::mesh(self)
    }

    fn cell_magnitudes(&self) -> Vec<f64> {
        self.magnitudes()
    }
}

fn check_mesh(f: &impl CellSampled, p: &ExponentField) -> Result<()> {
    if f.mesh().same_as(p.mesh()) {
        Ok(())
    } else {
        Err(Error::MeshMismatch)
    }
}

pub(crate) fn modular_cells(mags: &[f64], p: &[f64], weight: f64) -> f64 {
    mags.iter()
        .zip(p)
        .filter(|(m, _)| **m != 0.0)
        .map(|(m, e)| m.powf(*e))
        .sum::<f64>()
        * weight
}

/// Luxemburg norm of cell magnitudes `mags` with cell exponents `p`.
pub(crate) fn luxemburg_cells(mags: &[f64], p: &[f64], weight: f64) -> Result<f64> {
    let m = modular_cells(mags, p, weight);
    if !m.is_finite() {
        return Err(Error::NonFinite(format!("modular = {m}")));
    }
    if m == 0.0 {
        return Ok(0.0);
    }

    // Work in s = ln γ; F(s) = ϱ(f / e^s) = Σ w exp(p (ln|f| - s)) is strictly decreasing.
    let terms: Vec<(f64, f64)> = mags
        .iter()
        .zip(p)
        .filter(|(m, _)| **m != 0.0)
        .map(|(m, e)| (m.ln(), *e))
        .collect();
    let eval = |s: f64| -> (f64, f64) {
        let mut f = 0.0;
        let mut df = 0.0;
        for &(l, e) in &terms {
            let t = (e * (l - s)).exp();
            f += t;
            df += e * t;
        }
        (f * weight, df * weight)
    };

    let (pmin, pmax) = terms
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &(_, e)| {
            (a.min(e), b.max(e))
        });
    let (a, b) = (m.ln() / pmin, m.ln() / pmax);
    let (mut lo, mut hi) = (a.min(b), a.max(b));
    // Guard the bracket against round-off at its ends.
    let pad = 1e-12 * (1.0 + lo.abs().max(hi.abs()));
    lo -= pad;
    hi += pad;
    let mut guard = 0;
    while eval(lo).0 < 1.0 {
        lo -= 1.0 + lo.abs();
        guard += 1;
        if guard > 64 {
            return Err(Error::RootFind(
                "could not bracket the norm from below".into(),
            ));
        }
    }
    while eval(hi).0 > 1.0 {
        hi += 1.0 + hi.abs();
        guard += 1;
        if guard > 64 {
            return Err(Error::RootFind(
                "could not bracket the norm from above".into(),
            ));
        }
    }

    let mut iter = 0;
    while hi - lo > LUXEMBURG_TOL {
        iter += 1;
        if iter > LUXEMBURG_MAX_ITER {
            return Err(Error::RootFind(format!(
                "bisection stalled at [{}, {}] after {LUXEMBURG_MAX_ITER} steps",
                lo.exp(),
                hi.exp()
            )));
        }
        let mid = 0.5 * (lo + hi);
        if eval(mid).0 > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }

    // Newton polish inside the final bracket.
    let mut s = 0.5 * (lo + hi);
    for _ in 0..3 {
        let (f, df) = eval(s);
        let next = (s + (f - 1.0) / df).clamp(lo, hi);
        if !next.is_finite() || next == s {
            break;
        }
        s = next;
    }
    Ok(s.exp())
}

/// `∫ |f|^{p(x)} dx`
pub fn modular(f: &impl CellSampled, p: &ExponentField) -> Result<f64> {
    check_mesh(f, p)?;
    let m = modular_cells(
        &f.cell_magnitudes(),
        p.cell_values(),
        p.mesh().cell_measure(),
    );
    if m.is_finite() {
        Ok(m)
    } else {
        Err(Error::NonFinite(format!("modular = {m}")))
    }
}

/// `inf { γ > 0 : ϱ(f / γ) <= 1 }`, zero for the zero function.
pub fn luxemburg_norm(f: &impl CellSampled, p: &ExponentField) -> Result<f64> {
    check_mesh(f, p)?;
    luxemburg_cells(
        &f.cell_magnitudes(),
        p.cell_values(),
        p.mesh().cell_measure(),
    )
}

fn band_sign(x: f64) -> i8 {
    if (x - 1.0).abs() <= UNIT_BAND {
        0
    } else if x < 1.0 {
        -1
    } else {
        1
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct UnitBallVerdict {
    pub norm: f64,
    pub modular: f64,
    /// sign(norm - 1), with the band around 1 mapped to 0
    pub norm_sign: i8,
    pub modular_sign: i8,
    pub pass: bool,
}

/// Norm and modular should sit on the same side of 1.
pub fn unit_ball_check(f: &impl CellSampled, p: &ExponentField) -> Result<UnitBallVerdict> {
    let modular = modular(f, p)?;
    let norm = luxemburg_norm(f, p)?;
    let (norm_sign, modular_sign) = (band_sign(norm), band_sign(modular));
    Ok(UnitBallVerdict {
        norm,
        modular,
        norm_sign,
        modular_sign,
        pass: norm_sign == modular_sign,
    })
}

/// `[(p/q)₊ + (1 - p/q)₊] · max{|Ω|^{(1/p-1/q)₊}, |Ω|^{(1/p-1/q)₋}}` with
/// `₊`/`₋` the max/min over nodes.
pub fn embedding_constant(omega_measure: f64, p: &ExponentField, q: &ExponentField) -> Result<f64> {
    if !p.mesh().same_as(q.mesh()) {
        return Err(Error::MeshMismatch);
    }
    if !(omega_measure > 0.0) {
        return Err(Error::Precondition(format!("|Ω| = {omega_measure}")));
    }
    let mut ratio_max = f64::NEG_INFINITY;
    let mut gap_max = f64::NEG_INFINITY;
    let mut e_max = f64::NEG_INFINITY;
    let mut e_min = f64::INFINITY;
    for (node, (&a, &b)) in p.nodal().iter().zip(q.nodal()).enumerate() {
        if a > b {
            return Err(Error::Precondition(format!(
                "p = {a} exceeds q = {b} at node {node}"
            )));
        }
        let r = a / b;
        ratio_max = ratio_max.max(r);
        gap_max = gap_max.max(1.0 - r);
        let e = 1.0 / a - 1.0 / b;
        e_max = e_max.max(e);
        e_min = e_min.min(e);
    }
    Ok((ratio_max + gap_max) * omega_measure.powf(e_max).max(omega_measure.powf(e_min)))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HolderVerdict {
    /// `‖u‖_{p(x)}`
    pub lhs: f64,
    /// `C(|Ω|, p, q) ‖u‖_{q(x)}`
    pub rhs: f64,
    pub pass: bool,
}

/// Checks `‖u‖_{p(x)} <= C(|Ω|, p, q) ‖u‖_{q(x)}` for `p <= q`.
pub fn holder_check(
    u: &GridFunction,
    p: &ExponentField,
    q: &ExponentField,
) -> Result<HolderVerdict> {
    let c = embedding_constant(p.mesh().measure(), p, q)?;
    let lhs = luxemburg_norm(u, p)?;
    let rhs = c * luxemburg_norm(u, q)?;
    Ok(HolderVerdict {
        lhs,
        rhs,
        pass: lhs <= rhs * (1.0 + 1e-9),
    })
}
