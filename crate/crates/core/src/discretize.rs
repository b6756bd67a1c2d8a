//! Grid functions, the cell-centred discrete gradient and nodal interpolation.
//!
//! Every integrand is sampled once per cell, at the cell centre. Nodal
//! functions are averaged over the cell's nodes; the gradient uses the forward
//! difference in 1D and the average of the two parallel edge differences per
//! axis in 2D. Both operators are exact on affine functions.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::mesh::Mesh;

/// Nodal scalar field; the discrete `u`.
#[derive(Clone, Debug)]
pub struct GridFunction {
    mesh: Arc<Mesh>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(mesh: Arc<Mesh>, values: Vec<f64>) -> Result<Self> {
        if values.len() != mesh.node_count() {
            return Err(Error::Precondition(format!(
                "{} nodal values for a mesh with {} nodes",
                values.len(),
                mesh.node_count()
            )));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("grid function value at node {i}")));
        }
        Ok(GridFunction { mesh, values })
    }

    pub fn zeros(mesh: Arc<Mesh>) -> Self {
        let n = mesh.node_count();
        GridFunction {
            mesh,
            values: vec![0.0; n],
        }
    }

    /// Builds a Dirichlet function from values at the interior nodes.
    pub fn from_interior(mesh: Arc<Mesh>, interior: &[f64]) -> Result<Self> {
        if interior.len() != mesh.interior_nodes().len() {
            return Err(Error::Precondition(format!(
                "{} interior values for a mesh with {} interior nodes",
                interior.len(),
                mesh.interior_nodes().len()
            )));
        }
        let mut values = vec![0.0; mesh.node_count()];
        for (&node, &v) in mesh.interior_nodes().iter().zip(interior) {
            values[node] = v;
        }
        GridFunction::new(mesh, values)
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn interior_values(&self) -> Vec<f64> {
        self.mesh
            .interior_nodes()
            .iter()
            .map(|&n| self.values[n])
            .collect()
    }

    /// True when every boundary node carries exactly zero.
    pub fn is_dirichlet(&self) -> bool {
        self.first_boundary_violation().is_none()
    }

    pub(crate) fn first_boundary_violation(&self) -> Option<(usize, f64)> {
        self.values
            .iter()
            .enumerate()
            .find(|&(n, &v)| self.mesh.is_boundary(n) && v != 0.0)
            .map(|(n, &v)| (n, v))
    }

    pub fn require_dirichlet(&self) -> Result<()> {
        match self.first_boundary_violation() {
            Some((node, value)) => Err(Error::NotDirichlet { node, value }),
            None => Ok(()),
        }
    }

    pub fn zero_boundary(mut self) -> Self {
        for (n, v) in self.values.iter_mut().enumerate() {
            if self.mesh.is_boundary(n) {
                *v = 0.0;
            }
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|&v| v == 0.0)
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        GridFunction {
            mesh: self.mesh.clone(),
            values: self.values.iter().map(|v| alpha * v).collect(),
        }
    }

    /// `self + alpha * other`
    pub fn add_scaled(&self, alpha: f64, other: &GridFunction) -> Result<Self> {
        if !self.mesh.same_as(&other.mesh) {
            return Err(Error::MeshMismatch);
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + alpha * b)
            .collect();
        GridFunction::new(self.mesh.clone(), values)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Values at cell centres (average of the cell's nodes).
    pub fn cell_values(&self) -> Vec<f64> {
        cell_averages(&self.mesh, &self.values)
    }
}

/// One vector per cell; the discrete `∇u`.
#[derive(Clone, Debug)]
pub struct CellVectorField {
    mesh: Arc<Mesh>,
    vectors: Vec<[f64; 2]>,
}

impl CellVectorField {
    /// 1D fields store the derivative in the first component and 0 in the second.
    pub fn new(mesh: Arc<Mesh>, vectors: Vec<[f64; 2]>) -> Result<Self> {
        if vectors.len() != mesh.cell_count() {
            return Err(Error::Precondition(format!(
                "{} cell vectors for a mesh with {} cells",
                vectors.len(),
                mesh.cell_count()
            )));
        }
        if let Some(c) = vectors
            .iter()
            .position(|v| !(v[0].is_finite() && v[1].is_finite()))
        {
            return Err(Error::NonFinite(format!("vector at cell {c}")));
        }
        if mesh.dimension() == 1 && vectors.iter().any(|v| v[1] != 0.0) {
            return Err(Error::Precondition(
                "second component must vanish on a 1D mesh".into(),
            ));
        }
        Ok(CellVectorField { mesh, vectors })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn vectors(&self) -> &[[f64; 2]] {
        &self.vectors
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        CellVectorField {
            mesh: self.mesh.clone(),
            vectors: self
                .vectors
                .iter()
                .map(|v| [alpha * v[0], alpha * v[1]])
                .collect(),
        }
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.vectors.iter().map(|v| v[0].hypot(v[1])).collect()
    }
}

pub(crate) fn cell_averages(mesh: &Mesh, nodal: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(mesh.cell_count());
    if mesh.dimension() == 1 {
        out.extend(nodal.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    } else {
        for c in 0..mesh.cell_count() {
            let [a, b, d, e] = mesh.cell_nodes(c);
            out.push(0.25 * (nodal[a] + nodal[b] + nodal[d] + nodal[e]));
        }
    }
    out
}

pub(crate) fn cell_gradients(mesh: &Mesh, nodal: &[f64]) -> Vec<[f64; 2]> {
    let h = mesh.spacing();
    let mut out = Vec::with_capacity(mesh.cell_count());
    if mesh.dimension() == 1 {
        let inv = 1.0 / h[0];
        out.extend(nodal.windows(2).map(|w| [(w[1] - w[0]) * inv, 0.0]));
    } else {
        let (ix, iy) = (0.5 / h[0], 0.5 / h[1]);
        for c in 0..mesh.cell_count() {
            let [n00, n10, n01, n11] = mesh.cell_nodes(c);
            let (u00, u10, u01, u11) = (nodal[n00], nodal[n10], nodal[n01], nodal[n11]);
            out.push([
                ((u10 - u00) + (u11 - u01)) * ix,
                ((u01 - u00) + (u11 - u10)) * iy,
            ]);
        }
    }
    out
}

/// Local derivative of the cell gradient with respect to the cell's nodes,
/// in the order of [`Mesh::cell_nodes`].
pub(crate) fn gradient_stencil(mesh: &Mesh) -> [[f64; 2]; 4] {
    let h = mesh.spacing();
    if mesh.dimension() == 1 {
        let inv = 1.0 / h[0];
        [[-inv, 0.0], [inv, 0.0], [0.0, 0.0], [0.0, 0.0]]
    } else {
        let (ix, iy) = (0.5 / h[0], 0.5 / h[1]);
        [[-ix, -iy], [ix, -iy], [-ix, iy], [ix, iy]]
    }
}

/// Transpose of the sampling maps: returns the nodal vector
/// `Σ_c value_coef[c] · ∂avg_c/∂u + grad_coef[c] · ∂grad_c/∂u`.
pub(crate) fn scatter_to_nodes(
    mesh: &Mesh,
    value_coef: Option<&[f64]>,
    grad_coef: Option<&[[f64; 2]]>,
) -> Vec<f64> {
    let mut out = vec![0.0; mesh.node_count()];
    let npc = mesh.nodes_per_cell();
    let share = 1.0 / npc as f64;
    let stencil = gradient_stencil(mesh);
    for c in 0..mesh.cell_count() {
        let nodes = mesh.cell_nodes(c);
        let a = value_coef.map_or(0.0, |v| v[c] * share);
        let b = grad_coef.map_or([0.0, 0.0], |g| g[c]);
        for k in 0..npc {
            out[nodes[k]] += a + b[0] * stencil[k][0] + b[1] * stencil[k][1];
        }
    }
    out
}

pub fn gradient(u: &GridFunction) -> CellVectorField {
    CellVectorField {
        mesh: u.mesh.clone(),
        vectors: cell_gradients(&u.mesh, &u.values),
    }
}

/// Samples `f` at every node. `f` receives a coordinate slice of length
/// `mesh.dimension()`. Boundary nodes keep `f`'s value.
pub fn interpolate<F>(mesh: &Arc<Mesh>, f: F) -> Result<GridFunction>
where
    F: Fn(&[f64]) -> f64,
{
    let dim = mesh.dimension();
    let mut values = Vec::with_capacity(mesh.node_count());
    for n in 0..mesh.node_count() {
        let x = mesh.node_coord(n);
        let v = f(&x[..dim]);
        if !v.is_finite() {
            return Err(Error::NonFinite(format!(
                "interpolated sample at node {n} ({:?})",
                &x[..dim]
            )));
        }
        values.push(v);
    }
    Ok(GridFunction {
        mesh: mesh.clone(),
        values,
    })
}
