//! The functionals `K(u) = ‖∇u‖`, `k(u) = ‖u‖`, `S(u)`, their derivative
//! actions and the weak Euler–Lagrange residual.

use crate::discretize::{cell_averages, cell_gradients, scatter_to_nodes, GridFunction};
use crate::error::{Error, Result};
use crate::exponent_field::ExponentField;
use crate::mesh::Mesh;
use crate::modular_norm::luxemburg_cells;

/// Norm of one integrand together with `D = ∫ p |f / norm|^p`.
#[derive(Clone, Copy, Debug)]
pub(crate) struct NormPart {
    pub norm: f64,
    pub weight_sum: f64,
}

fn norm_part(mags: &[f64], p: &[f64], w: f64, what: &'static str) -> Result<NormPart> {
    let norm = luxemburg_cells(mags, p, w)?;
    if norm == 0.0 {
        return Err(Error::ZeroFunction(what));
    }
    let weight_sum = mags
        .iter()
        .zip(p)
        .filter(|(m, _)| **m != 0.0)
        .map(|(m, e)| e * (m / norm).powf(*e))
        .sum::<f64>()
        * w;
    Ok(NormPart { norm, weight_sum })
}

/// Cell samples of a nodal vector and the two norm parts.
#[derive(Clone, Debug)]
pub(crate) struct Evaluation {
    pub values: Vec<f64>,
    pub grads: Vec<[f64; 2]>,
    pub grad_mags: Vec<f64>,
    pub grad: NormPart,
    pub value: NormPart,
}

impl Evaluation {
    pub fn new(mesh: &Mesh, p: &ExponentField, nodal: &[f64]) -> Result<Self> {
        let w = mesh.cell_measure();
        let pc = p.cell_values();
        let values = cell_averages(mesh, nodal);
        let grads = cell_gradients(mesh, nodal);
        let grad_mags: Vec<f64> = grads.iter().map(|g| g[0].hypot(g[1])).collect();
        let value_mags: Vec<f64> = values.iter().map(|v| v.abs()).collect();
        let grad = norm_part(&grad_mags, pc, w, "gradient")?;
        let value = norm_part(&value_mags, pc, w, "function")?;
        Ok(Evaluation {
            values,
            grads,
            grad_mags,
            grad,
            value,
        })
    }

    pub fn ratio(&self) -> f64 {
        self.grad.norm / self.value.norm
    }

    /// `S(u)`
    pub fn s_ratio(&self) -> f64 {
        self.grad.weight_sum / self.value.weight_sum
    }

    /// Nodal vector of `⟨K'(u), φ_i⟩`.
    pub fn grad_derivative(&self, mesh: &Mesh, p: &ExponentField) -> Vec<f64> {
        let w = mesh.cell_measure();
        let (k, d) = (self.grad.norm, self.grad.weight_sum);
        let coef: Vec<[f64; 2]> = self
            .grads
            .iter()
            .zip(&self.grad_mags)
            .zip(p.cell_values())
            .map(|((g, &m), &e)| {
                if m == 0.0 {
                    // removable singularity of |ξ|^{p-2} ξ at ξ = 0
                    [0.0, 0.0]
                } else {
                    let s = w * e * (m / k).powf(e - 1.0) / (m * d);
                    [s * g[0], s * g[1]]
                }
            })
            .collect();
        scatter_to_nodes(mesh, None, Some(&coef))
    }

    /// Nodal vector of `⟨k'(u), φ_i⟩`.
    pub fn value_derivative(&self, mesh: &Mesh, p: &ExponentField) -> Vec<f64> {
        let w = mesh.cell_measure();
        let (k, d) = (self.value.norm, self.value.weight_sum);
        let coef: Vec<f64> = self
            .values
            .iter()
            .zip(p.cell_values())
            .map(|(&v, &e)| {
                if v == 0.0 {
                    0.0
                } else {
                    w * e * (v.abs() / k).powf(e - 1.0) * v.signum() / d
                }
            })
            .collect();
        scatter_to_nodes(mesh, Some(&coef), None)
    }

    /// `max_i D_K |⟨K'(u), φ_i⟩ - λ ⟨k'(u), φ_i⟩|` over interior hat functions.
    pub fn residual(&self, mesh: &Mesh, lambda: f64, dk: &[f64], dv: &[f64]) -> f64 {
        self.grad.weight_sum
            * mesh
                .interior_nodes()
                .iter()
                .map(|&i| (dk[i] - lambda * dv[i]).abs())
                .fold(0.0, f64::max)
    }
}

fn same_mesh(u: &GridFunction, p: &ExponentField) -> Result<()> {
    if u.mesh().same_as(p.mesh()) {
        Ok(())
    } else {
        Err(Error::MeshMismatch)
    }
}

fn evaluate(u: &GridFunction, p: &ExponentField) -> Result<Evaluation> {
    same_mesh(u, p)?;
    Evaluation::new(u.mesh(), p, u.values())
}

/// `K(u) = ‖∇u‖_{p(x)}`
pub fn gradient_norm(u: &GridFunction, p: &ExponentField) -> Result<f64> {
    same_mesh(u, p)?;
    let mesh = u.mesh();
    let mags: Vec<f64> = cell_gradients(mesh, u.values())
        .iter()
        .map(|g| g[0].hypot(g[1]))
        .collect();
    Ok(norm_part(&mags, p.cell_values(), mesh.cell_measure(), "gradient")?.norm)
}

/// `k(u) = ‖u‖_{p(x)}`
pub fn function_norm(u: &GridFunction, p: &ExponentField) -> Result<f64> {
    same_mesh(u, p)?;
    let mesh = u.mesh();
    let mags: Vec<f64> = cell_averages(mesh, u.values())
        .iter()
        .map(|v| v.abs())
        .collect();
    Ok(norm_part(&mags, p.cell_values(), mesh.cell_measure(), "function")?.norm)
}

/// `S(u) = ∫ p |∇u/K|^p / ∫ p |u/k|^p`
pub fn energy_ratio(u: &GridFunction, p: &ExponentField) -> Result<f64> {
    Ok(evaluate(u, p)?.s_ratio())
}

/// `K(u) / k(u)`
pub fn rayleigh_ratio(u: &GridFunction, p: &ExponentField) -> Result<f64> {
    Ok(evaluate(u, p)?.ratio())
}

fn action(nodal: &[f64], v: &GridFunction) -> f64 {
    nodal.iter().zip(v.values()).map(|(a, b)| a * b).sum()
}

/// `⟨K'(u), v⟩`
pub fn gradient_norm_action(u: &GridFunction, v: &GridFunction, p: &ExponentField) -> Result<f64> {
    if !u.mesh().same_as(v.mesh()) {
        return Err(Error::MeshMismatch);
    }
    let e = evaluate(u, p)?;
    Ok(action(&e.grad_derivative(u.mesh(), p), v))
}

/// `⟨k'(u), v⟩`
pub fn function_norm_action(u: &GridFunction, v: &GridFunction, p: &ExponentField) -> Result<f64> {
    if !u.mesh().same_as(v.mesh()) {
        return Err(Error::MeshMismatch);
    }
    let e = evaluate(u, p)?;
    Ok(action(&e.value_derivative(u.mesh(), p), v))
}

/// Weak residual of the eigenvalue equation tested against every interior
/// hat function (`‖φ_i‖∞ = 1`). Invariant under `u -> -u` and rescaling of `u`.
pub fn el_residual(u: &GridFunction, lambda: f64, p: &ExponentField) -> Result<f64> {
    let e = evaluate(u, p)?;
    let mesh = u.mesh();
    let dk = e.grad_derivative(mesh, p);
    let dv = e.value_derivative(mesh, p);
    Ok(e.residual(mesh, lambda, &dk, &dv))
}
