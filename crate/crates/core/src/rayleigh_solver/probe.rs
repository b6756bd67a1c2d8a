//! The inhomogeneous quotient `∫|∇u|^{p(x)} / ∫|u|^{p(x)}` probed on
//! concentrating bumps. It is not homogeneous, so small amplitudes weight the
//! region where `p` is smallest.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::Serialize;

use crate::discretize::{gradient, interpolate, GridFunction};
use crate::error::{Error, Result};
use crate::exponent_field::ExponentField;
use crate::mesh::Mesh;
use crate::modular_norm::modular;

pub fn inhomogeneous_ratio(u: &GridFunction, p: &ExponentField) -> Result<f64> {
    let den = modular(u, p)?;
    if den == 0.0 {
        return Err(Error::ZeroFunction("probe function"));
    }
    Ok(modular(&gradient(u), p)? / den)
}

/// Radial bump of support radius `scale`: flat (= 1) inside `scale / 2`, then a
/// `cos²` shoulder down to 0. Zeroed on the boundary.
pub fn plateau_bump(mesh: &Arc<Mesh>, center: &[f64], scale: f64) -> Result<GridFunction> {
    let u = interpolate(mesh, |x| {
        let r = x
            .iter()
            .zip(center)
            .map(|(a, b)| (a - b).powi(2))
            .sum::<f64>()
            .sqrt()
            / scale;
        if r <= 0.5 {
            1.0
        } else if r < 1.0 {
            (PI * (r - 0.5)).cos().powi(2)
        } else {
            0.0
        }
    })?;
    Ok(u.zero_boundary())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ProbeRow {
    pub scale: f64,
    pub amplitude: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeTable {
    pub rows: Vec<ProbeRow>,
}

impl ProbeTable {
    pub fn min_ratio(&self) -> f64 {
        self.rows
            .iter()
            .map(|r| r.ratio)
            .fold(f64::INFINITY, f64::min)
    }
}

/// Ratios of `t φ_ε` for every scale `ε` and amplitude `t`, bumps centred at `x0`.
pub fn concentration_probe(
    p: &ExponentField,
    x0: &[f64],
    scales: &[f64],
    amplitudes: &[f64],
) -> Result<ProbeTable> {
    let mesh = p.mesh();
    if x0.len() != mesh.dimension() || !mesh.contains(x0) {
        return Err(Error::Precondition(format!(
            "probe centre {x0:?} outside the domain"
        )));
    }
    if scales.iter().chain(amplitudes).any(|v| !(*v > 0.0)) {
        return Err(Error::Precondition(
            "scales and amplitudes must be positive".into(),
        ));
    }
    let mut rows = Vec::with_capacity(scales.len() * amplitudes.len());
    for &scale in scales {
        let bump = plateau_bump(mesh, x0, scale)?;
        for &amplitude in amplitudes {
            rows.push(ProbeRow {
                scale,
                amplitude,
                ratio: inhomogeneous_ratio(&bump.scaled(amplitude), p)?,
            });
        }
    }
    Ok(ProbeTable { rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::exponent_field::{build_field, ExponentFamily};
    use crate::mesh::MeshSpec;

    #[test]
    fn constant_exponent_is_amplitude_free() {
        let mesh = Mesh::new(MeshSpec::unit_square(48)).unwrap();
        let p = ExponentField::constant(mesh, 1.9).unwrap();
        let t = concentration_probe(&p, &[0.5, 0.5], &[0.4, 0.2], &[1.0, 1e-3, 1e3]).unwrap();
        for chunk in t.rows.chunks(3) {
            let r0 = chunk[0].ratio;
            for row in chunk {
                assert!((row.ratio - r0).abs() <= 1e-9 * r0);
            }
        }
    }

    #[test]
    fn single_row_table() {
        let mesh = Mesh::new(MeshSpec::unit_interval(200)).unwrap();
        let p = build_field(
            &mesh,
            &ExponentFamily::Affine {
                c0: 1.5,
                slope: vec![1.0],
            },
        )
        .unwrap();
        let t = concentration_probe(&p, &[0.4], &[0.3], &[0.7]).unwrap();
        assert_eq!(t.rows.len(), 1);
        let bump = plateau_bump(&mesh, &[0.4], 0.3).unwrap().scaled(0.7);
        assert_eq!(t.rows[0].ratio, inhomogeneous_ratio(&bump, &p).unwrap());
    }

    #[test]
    fn centre_outside_domain() {
        let mesh = Mesh::new(MeshSpec::unit_interval(20)).unwrap();
        let p = ExponentField::constant(mesh, 2.0).unwrap();
        assert!(concentration_probe(&p, &[1.5], &[0.1], &[1.0]).is_err());
    }
}
