//! Variable exponents `p(x)` sampled at mesh nodes, their admissibility, and
//! sequences `p_h` converging to a base exponent from above.

use std::path::PathBuf;
use std::sync::{Arc, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretize::cell_averages;
use crate::error::{Error, Result};
use crate::io;
use crate::mesh::Mesh;

/// Closed-form (or tabulated) exponent families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ExponentFamily {
    Constant {
        value: f64,
    },
    /// `c0 + slope · x`
    Affine {
        c0: f64,
        slope: Vec<f64>,
    },
    /// `c0 + amplitude · sin(omega · x)`
    Sinusoidal {
        c0: f64,
        amplitude: f64,
        omega: Vec<f64>,
    },
    /// `c0 + amplitude · exp(-|x - center|² / sigma²)`; a negative amplitude digs a well.
    GaussianBump {
        c0: f64,
        amplitude: f64,
        center: Vec<f64>,
        sigma: f64,
    },
    /// One value per node, in mesh node order, read from a `node_index,value` CSV.
    Tabulated {
        path: PathBuf,
    },
}

fn dot(a: &[f64], x: &[f64]) -> f64 {
    a.iter().zip(x).map(|(a, x)| a * x).sum()
}

impl ExponentFamily {
    fn check_arity(&self, dim: usize) -> Result<()> {
        let len = match self {
            ExponentFamily::Affine { slope, .. } => slope.len(),
            ExponentFamily::Sinusoidal { omega, .. } => omega.len(),
            ExponentFamily::GaussianBump { center, sigma, .. } => {
                if !(*sigma > 0.0) {
                    return Err(Error::InvalidExponent(format!(
                        "gaussian width must be positive, got {sigma}"
                    )));
                }
                center.len()
            }
            _ => return Ok(()),
        };
        if len != dim {
            return Err(Error::InvalidExponent(format!(
                "coefficient vector has length {len} on a {dim}D mesh"
            )));
        }
        Ok(())
    }

    /// Value at a point; `None` for tabulated exponents.
    pub fn eval(&self, x: &[f64]) -> Option<f64> {
        Some(match self {
            ExponentFamily::Constant { value } => *value,
            ExponentFamily::Affine { c0, slope } => c0 + dot(slope, x),
            ExponentFamily::Sinusoidal {
                c0,
                amplitude,
                omega,
            } => c0 + amplitude * dot(omega, x).sin(),
            ExponentFamily::GaussianBump {
                c0,
                amplitude,
                center,
                sigma,
            } => {
                let r2: f64 = center.iter().zip(x).map(|(c, x)| (x - c).powi(2)).sum();
                c0 + amplitude * (-r2 / (sigma * sigma)).exp()
            }
            ExponentFamily::Tabulated { .. } => return None,
        })
    }
}

/// Nodal exponent values with cached extrema.
#[derive(Clone, Debug)]
pub struct ExponentField {
    mesh: Arc<Mesh>,
    nodal: Vec<f64>,
    cell: Vec<f64>,
    p_minus: f64,
    p_plus: f64,
    logholder: Arc<OnceLock<f64>>,
}

impl ExponentField {
    pub fn from_values(mesh: Arc<Mesh>, nodal: Vec<f64>) -> Result<Self> {
        if nodal.len() != mesh.node_count() {
            return Err(Error::InvalidExponent(format!(
                "{} values for a mesh with {} nodes",
                nodal.len(),
                mesh.node_count()
            )));
        }
        for (node, &value) in nodal.iter().enumerate() {
            if !value.is_finite() {
                return Err(Error::NonFinite(format!("exponent at node {node}")));
            }
            if value <= 1.0 {
                return Err(Error::InadmissibleExponent { node, value });
            }
        }
        let p_minus = nodal.iter().copied().fold(f64::INFINITY, f64::min);
        let p_plus = nodal.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let cell = cell_averages(&mesh, &nodal);
        Ok(ExponentField {
            mesh,
            nodal,
            cell,
            p_minus,
            p_plus,
            logholder: Arc::new(OnceLock::new()),
        })
    }

    pub fn constant(mesh: Arc<Mesh>, value: f64) -> Result<Self> {
        let n = mesh.node_count();
        Self::from_values(mesh, vec![value; n])
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn nodal(&self) -> &[f64] {
        &self.nodal
    }

    /// Values at cell centres (average of the cell's nodes).
    pub fn cell_values(&self) -> &[f64] {
        &self.cell
    }

    pub fn p_minus(&self) -> f64 {
        self.p_minus
    }

    pub fn p_plus(&self) -> f64 {
        self.p_plus
    }

    pub fn is_constant(&self) -> bool {
        self.p_minus == self.p_plus
    }

    /// Smallest `L` with `|p(x) - p(y)| <= -L / ln|x - y|` over all node pairs at
    /// distance in `(0, 1/2]`. Computed on first use by brute force over pairs.
    pub fn logholder_constant(&self) -> f64 {
        *self.logholder.get_or_init(|| {
            let n = self.mesh.node_count();
            let coords: Vec<[f64; 2]> = (0..n).map(|i| self.mesh.node_coord(i)).collect();
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let mut best = 0.0f64;
                    for j in (i + 1)..n {
                        let d = (coords[i][0] - coords[j][0]).hypot(coords[i][1] - coords[j][1]);
                        if d > 0.0 && d <= 0.5 {
                            let dp = (self.nodal[i] - self.nodal[j]).abs();
                            best = best.max(dp * -d.ln());
                        }
                    }
                    best
                })
                .reduce(|| 0.0, f64::max)
        })
    }

    /// Pointwise `self + shift(node)`; used to build sequence members.
    fn map_nodes(&self, f: impl Fn(usize, f64) -> f64) -> Result<Self> {
        let values = self
            .nodal
            .iter()
            .enumerate()
            .map(|(i, &p)| f(i, p))
            .collect();
        ExponentField::from_values(self.mesh.clone(), values)
    }
}

pub fn build_field(mesh: &Arc<Mesh>, family: &ExponentFamily) -> Result<ExponentField> {
    family.check_arity(mesh.dimension())?;
    let values = match family {
        ExponentFamily::Tabulated { path } => {
            let values = io::read_nodal_csv(path)?;
            if values.len() != mesh.node_count() {
                return Err(Error::InvalidExponent(format!(
                    "{}: {} rows for a mesh with {} nodes",
                    path.display(),
                    values.len(),
                    mesh.node_count()
                )));
            }
            values
        }
        _ => (0..mesh.node_count())
            .map(|n| {
                let x = mesh.node_coord(n);
                family.eval(&x[..mesh.dimension()]).unwrap_or(f64::NAN)
            })
            .collect(),
    };
    ExponentField::from_values(mesh.clone(), values)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AdmissibilityReport {
    pub dimension: usize,
    pub p_minus: f64,
    pub p_plus: f64,
    /// `p_minus > 1`
    pub lower_bound_ok: bool,
    /// `p_plus < N`; `None` in 1D where the bound is waived.
    pub upper_bound_ok: Option<bool>,
    /// Reported only, never a gate.
    pub logholder_estimate: f64,
}

impl AdmissibilityReport {
    pub fn passed(&self) -> bool {
        self.lower_bound_ok && self.upper_bound_ok.unwrap_or(true)
    }
}

pub fn validate_admissible(p: &ExponentField) -> AdmissibilityReport {
    let dimension = p.mesh.dimension();
    AdmissibilityReport {
        dimension,
        p_minus: p.p_minus,
        p_plus: p.p_plus,
        lower_bound_ok: p.p_minus > 1.0,
        upper_bound_ok: (dimension >= 2).then_some(p.p_plus < dimension as f64),
        logholder_estimate: p.logholder_constant(),
    }
}

/// `max_i |p_i - q_i|`
pub fn uniform_distance(p: &ExponentField, q: &ExponentField) -> Result<f64> {
    if !p.mesh.same_as(&q.mesh) {
        return Err(Error::MeshMismatch);
    }
    Ok(p.nodal
        .iter()
        .zip(&q.nodal)
        .fold(0.0, |m, (a, b)| m.max((a - b).abs())))
}

/// How `p_h` is generated from the base exponent.
#[derive(Clone, Debug)]
pub enum SequenceRule {
    /// `p_h = p + delta / h`
    Additive { delta: f64 },
    /// `p_h = p + (target - p) / h`, with `target >= p` nodewise.
    Blend { target: ExponentField },
}

/// Exponents `p_h`, `h` in `h_list`, converging uniformly to `p` from above.
#[derive(Clone, Debug)]
pub struct ExponentSequence {
    base: ExponentField,
    rule: SequenceRule,
    h_list: Vec<u64>,
    p_i: f64,
    p_s: f64,
    p_i_star: f64,
}

impl ExponentSequence {
    pub fn base(&self) -> &ExponentField {
        &self.base
    }

    pub fn rule(&self) -> &SequenceRule {
        &self.rule
    }

    pub fn h_list(&self) -> &[u64] {
        &self.h_list
    }

    /// Infimum of the base exponent.
    pub fn p_i(&self) -> f64 {
        self.p_i
    }

    /// Supremum of `p_h` over the sequence.
    pub fn p_s(&self) -> f64 {
        self.p_s
    }

    /// `N p_I / (N - p_I)`; infinite in 1D or when `p_I >= N`.
    pub fn p_i_star(&self) -> f64 {
        self.p_i_star
    }

    fn raw_member(&self, h: u64) -> Result<ExponentField> {
        let hf = h as f64;
        match &self.rule {
            SequenceRule::Additive { delta } => self.base.map_nodes(|_, p| p + delta / hf),
            SequenceRule::Blend { target } => {
                self.base.map_nodes(|i, p| p + (target.nodal[i] - p) / hf)
            }
        }
    }

    /// Builds `p_h` and re-checks that it lies above the base, stays in the
    /// admissible class and respects the subcritical bound.
    pub fn member(&self, h: u64) -> Result<ExponentField> {
        let ph = self.raw_member(h)?;
        check_member(&self.base, &ph, h)?;
        let n = self.base.mesh.dimension();
        if n >= 2 && !(ph.p_plus < self.p_i_star) {
            return Err(Error::Sequence {
                h,
                reason: format!(
                    "sup p_h = {} is not below the critical bound {}",
                    ph.p_plus, self.p_i_star
                ),
            });
        }
        Ok(ph)
    }

    pub fn distance_at(&self, h: u64) -> Result<f64> {
        uniform_distance(&self.raw_member(h)?, &self.base)
    }
}

fn check_member(base: &ExponentField, ph: &ExponentField, h: u64) -> Result<()> {
    if let Some((node, (a, b))) = ph
        .nodal
        .iter()
        .zip(&base.nodal)
        .enumerate()
        .find(|(_, (a, b))| a < b)
    {
        return Err(Error::Sequence {
            h,
            reason: format!("p_h = {a} < p = {b} at node {node}"),
        });
    }
    let n = base.mesh.dimension();
    if n >= 2 && !(ph.p_plus < n as f64) {
        return Err(Error::Sequence {
            h,
            reason: format!("sup p_h = {} is not below the dimension {n}", ph.p_plus),
        });
    }
    Ok(())
}

pub fn build_sequence(
    p: &ExponentField,
    rule: SequenceRule,
    h_list: &[u64],
) -> Result<ExponentSequence> {
    if h_list.is_empty() {
        return Err(Error::InvalidSequence("empty h list".into()));
    }
    if h_list[0] == 0 || h_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidSequence(format!(
            "h list must be strictly increasing positive integers, got {h_list:?}"
        )));
    }
    match &rule {
        SequenceRule::Additive { delta } if !delta.is_finite() => {
            return Err(Error::InvalidSequence(format!("delta = {delta}")));
        }
        SequenceRule::Blend { target } if !target.mesh.same_as(&p.mesh) => {
            return Err(Error::MeshMismatch);
        }
        _ => {}
    }

    let mut seq = ExponentSequence {
        base: p.clone(),
        rule,
        h_list: h_list.to_vec(),
        p_i: p.p_minus,
        p_s: f64::NEG_INFINITY,
        p_i_star: f64::INFINITY,
    };
    let mut last_distance = f64::INFINITY;
    for &h in h_list {
        let ph = seq.raw_member(h)?;
        check_member(p, &ph, h)?;
        let d = uniform_distance(&ph, p)?;
        if d > last_distance {
            return Err(Error::Sequence {
                h,
                reason: format!("distance to the base grew from {last_distance} to {d}"),
            });
        }
        last_distance = d;
        seq.p_s = seq.p_s.max(ph.p_plus);
    }
    let n = p.mesh.dimension() as f64;
    if n >= 2.0 {
        seq.p_i_star = if seq.p_i < n {
            n * seq.p_i / (n - seq.p_i)
        } else {
            f64::INFINITY
        };
        if !(seq.p_s < seq.p_i_star) {
            return Err(Error::Sequence {
                h: *h_list.last().unwrap(),
                reason: format!("p_S = {} is not below p_I* = {}", seq.p_s, seq.p_i_star),
            });
        }
    }
    Ok(seq)
}
