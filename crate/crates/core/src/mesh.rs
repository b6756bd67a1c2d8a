//! Uniform tensor grids on an interval or a rectangle.
//!
//! Nodes are numbered with the x index running fastest. Cells are numbered the
//! same way, so cell `(i, j)` has lower-left node `j * (nx + 1) + i`.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_NODES: usize = 10_000_000;
pub const MAX_NODES_ENV: &str = "VAREXP_MAX_NODES";

/// Geometry and resolution of a grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeshSpec {
    Interval {
        lo: f64,
        hi: f64,
        cells: usize,
    },
    Rectangle {
        x: [f64; 2],
        y: [f64; 2],
        cells: [usize; 2],
    },
}

impl MeshSpec {
    pub fn unit_interval(cells: usize) -> Self {
        MeshSpec::Interval {
            lo: 0.0,
            hi: 1.0,
            cells,
        }
    }

    pub fn unit_square(cells: usize) -> Self {
        MeshSpec::Rectangle {
            x: [0.0, 1.0],
            y: [0.0, 1.0],
            cells: [cells, cells],
        }
    }

    pub fn dimension(&self) -> usize {
        match self {
            MeshSpec::Interval { .. } => 1,
            MeshSpec::Rectangle { .. } => 2,
        }
    }

    pub fn node_count(&self) -> Option<usize> {
        match *self {
            MeshSpec::Interval { cells, .. } => cells.checked_add(1),
            MeshSpec::Rectangle { cells, .. } => cells[0]
                .checked_add(1)?
                .checked_mul(cells[1].checked_add(1)?),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub cells: usize,
}

impl Axis {
    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn spacing(&self) -> f64 {
        self.length() / self.cells as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i == self.cells {
            self.hi
        } else {
            self.lo + i as f64 * self.spacing()
        }
    }
}

#[derive(Debug)]
pub struct Mesh {
    spec: MeshSpec,
    axes: Vec<Axis>,
    boundary: Vec<bool>,
    interior: Vec<usize>,
    interior_slot: Vec<usize>,
    cell_measure: f64,
}

/// Node cap from `VAREXP_MAX_NODES`, falling back to [`DEFAULT_MAX_NODES`].
pub fn node_cap() -> usize {
    std::env::var(MAX_NODES_ENV)
        .ok()
        .and_then(|v| v.trim().parse().ok())
        .unwrap_or(DEFAULT_MAX_NODES)
}

impl Mesh {
    pub fn new(spec: MeshSpec) -> Result<Arc<Mesh>> {
        Self::with_cap(spec, node_cap())
    }

    pub fn with_cap(spec: MeshSpec, cap: usize) -> Result<Arc<Mesh>> {
        let axes = match spec {
            MeshSpec::Interval { lo, hi, cells } => vec![Axis { lo, hi, cells }],
            MeshSpec::Rectangle { x, y, cells } => vec![
                Axis {
                    lo: x[0],
                    hi: x[1],
                    cells: cells[0],
                },
                Axis {
                    lo: y[0],
                    hi: y[1],
                    cells: cells[1],
                },
            ],
        };
        for (k, axis) in axes.iter().enumerate() {
            if !(axis.lo.is_finite() && axis.hi.is_finite()) || axis.hi <= axis.lo {
                return Err(Error::InvalidMesh(format!(
                    "axis {k}: extent ({}, {}) is empty or not finite",
                    axis.lo, axis.hi
                )));
            }
            if axis.cells == 0 {
                return Err(Error::InvalidMesh(format!("axis {k}: zero cells")));
            }
        }
        let nodes = spec.node_count().ok_or(Error::NodeCap {
            nodes: usize::MAX,
            cap,
        })?;
        if nodes > cap {
            return Err(Error::NodeCap { nodes, cap });
        }

        let nx = axes[0].cells;
        let mut boundary = vec![false; nodes];
        match axes.len() {
            1 => {
                boundary[0] = true;
                boundary[nx] = true;
            }
            _ => {
                let ny = axes[1].cells;
                for j in 0..=ny {
                    for i in 0..=nx {
                        boundary[j * (nx + 1) + i] = i == 0 || j == 0 || i == nx || j == ny;
                    }
                }
            }
        }
        let interior: Vec<usize> = (0..nodes).filter(|&n| !boundary[n]).collect();
        let mut interior_slot = vec![usize::MAX; nodes];
        for (slot, &node) in interior.iter().enumerate() {
            interior_slot[node] = slot;
        }
        let cell_measure = axes.iter().map(Axis::spacing).product();

        Ok(Arc::new(Mesh {
            spec,
            axes,
            boundary,
            interior,
            interior_slot,
            cell_measure,
        }))
    }

    pub fn spec(&self) -> &MeshSpec {
        &self.spec
    }

    pub fn dimension(&self) -> usize {
        self.axes.len()
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn cells_per_axis(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.cells).collect()
    }

    pub fn node_count(&self) -> usize {
        self.boundary.len()
    }

    pub fn cell_count(&self) -> usize {
        self.axes.iter().map(|a| a.cells).product()
    }

    /// Uniform cell length (1D) or area (2D).
    pub fn cell_measure(&self) -> f64 {
        self.cell_measure
    }

    /// |Ω|
    pub fn measure(&self) -> f64 {
        self.axes.iter().map(Axis::length).product()
    }

    pub fn spacing(&self) -> Vec<f64> {
        self.axes.iter().map(Axis::spacing).collect()
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.boundary[node]
    }

    pub fn boundary_mask(&self) -> &[bool] {
        &self.boundary
    }

    /// Interior node indices in increasing order.
    pub fn interior_nodes(&self) -> &[usize] {
        &self.interior
    }

    /// Position of `node` in [`Mesh::interior_nodes`], if interior.
    pub fn interior_slot(&self, node: usize) -> Option<usize> {
        match self.interior_slot[node] {
            usize::MAX => None,
            s => Some(s),
        }
    }

    fn nodes_along(&self, axis: usize) -> usize {
        self.axes.get(axis).map_or(1, |a| a.cells + 1)
    }

    /// Coordinates of a node; the unused second component is 0 in 1D.
    pub fn node_coord(&self, node: usize) -> [f64; 2] {
        let nx = self.nodes_along(0);
        let (i, j) = (node % nx, node / nx);
        match self.axes.len() {
            1 => [self.axes[0].node(i), 0.0],
            _ => [self.axes[0].node(i), self.axes[1].node(j)],
        }
    }

    pub fn cell_center(&self, cell: usize) -> [f64; 2] {
        let nx = self.axes[0].cells;
        let (i, j) = (cell % nx, cell / nx);
        let hx = self.axes[0].spacing();
        let x = self.axes[0].lo + (i as f64 + 0.5) * hx;
        match self.axes.len() {
            1 => [x, 0.0],
            _ => {
                let hy = self.axes[1].spacing();
                [x, self.axes[1].lo + (j as f64 + 0.5) * hy]
            }
        }
    }

    /// Nodes of a cell as `[n00, n10, n01, n11]`; in 1D only the first two are meaningful.
    #[inline]
    pub fn cell_nodes(&self, cell: usize) -> [usize; 4] {
        let nx = self.axes[0].cells;
        match self.axes.len() {
            1 => [cell, cell + 1, cell, cell + 1],
            _ => {
                let (i, j) = (cell % nx, cell / nx);
                let n00 = j * (nx + 1) + i;
                [n00, n00 + 1, n00 + nx + 1, n00 + nx + 2]
            }
        }
    }

    /// Number of nodes in a cell (2 or 4).
    pub fn nodes_per_cell(&self) -> usize {
        1 << self.axes.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        self.axes
            .iter()
            .zip(x)
            .all(|(a, &v)| v >= a.lo && v <= a.hi)
            && x.len() >= self.axes.len()
    }

    pub fn same_as(&self, other: &Mesh) -> bool {
        std::ptr::eq(self, other) || self.spec == other.spec
    }
}

/// Multiplies the number of cells along every axis by `factor`.
pub fn refine(mesh: &Mesh, factor: usize) -> Result<Arc<Mesh>> {
    refine_with_cap(mesh, factor, node_cap())
}

pub fn refine_with_cap(mesh: &Mesh, factor: usize, cap: usize) -> Result<Arc<Mesh>> {
    if factor < 2 {
        return Err(Error::InvalidMesh(format!(
            "refinement factor must be at least 2, got {factor}"
        )));
    }
    let scale = |cells: usize| {
        cells.checked_mul(factor).ok_or(Error::NodeCap {
            nodes: usize::MAX,
            cap,
        })
    };
    let spec = match *mesh.spec() {
        MeshSpec::Interval { lo, hi, cells } => MeshSpec::Interval {
            lo,
            hi,
            cells: scale(cells)?,
        },
        MeshSpec::Rectangle { x, y, cells } => MeshSpec::Rectangle {
            x,
            y,
            cells: [scale(cells[0])?, scale(cells[1])?],
        },
    };
    Mesh::with_cap(spec, cap)
}
