//! Experiments along exponent sequences `p_h -> p`: eigenvalue sweeps, norm and
//! modular convergence checks, and constant-exponent growth tables.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::discretize::{gradient, GridFunction};
use crate::error::{Error, Result};
use crate::exponent_field::{ExponentField, ExponentSequence};
use crate::io::{config_hash, fmt_f64, json_bytes, table_csv, write_atomic};
use crate::modular_norm::{luxemburg_norm, modular};
use crate::rayleigh_solver::{
    constant_p_higher_eigenvalue_1d, plateau_bump, solve_first_eigenpair, EigenPair, SolverConfig,
};

/// Default final-gap tolerance of a sweep, relative to `λ_p`.
pub const STABILITY_TOL: f64 = 1e-2;
/// Number of trailing increments that must not grow.
pub const INCREMENT_WINDOW: usize = 3;
/// Number of trailing `h` values over which semicontinuity is checked.
pub const TAIL: usize = 3;
pub const GAMMA_TOL: f64 = 1e-4;
pub const SEMICONTINUITY_SLACK: f64 = 1e-6;
pub const MODULAR_TOL: f64 = 1e-4;
pub const SLOPE_TOL: f64 = 0.05;

fn same_base(p: &ExponentField, seq: &ExponentSequence) -> Result<()> {
    let base = seq.base();
    if !base.mesh().same_as(p.mesh()) {
        return Err(Error::MeshMismatch);
    }
    if base.nodal() != p.nodal() {
        return Err(Error::Precondition(
            "the sequence was built over a different exponent".into(),
        ));
    }
    Ok(())
}

/// Round-off allowance when comparing successive increments.
fn slack(scale: f64) -> f64 {
    1e-12 * scale.abs().max(f64::MIN_POSITIVE)
}

fn non_increasing(values: &[f64], scale: f64) -> bool {
    values.windows(2).all(|w| w[1] <= w[0] + slack(scale))
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepRow {
    pub h: u64,
    pub distance: f64,
    pub lambda: f64,
    pub el_residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct StabilityReport {
    pub rows: Vec<SweepRow>,
    /// Solve for the base exponent.
    pub limit: SweepRow,
    /// `|λ_{h_{i+1}} - λ_{h_i}|`
    pub increments: Vec<f64>,
    pub final_gap: f64,
    pub tolerance: f64,
    /// `None` when some solve did not converge.
    pub verdict: Option<bool>,
    pub seed: u64,
}

impl StabilityReport {
    /// Recomputes the verdict from the stored rows.
    pub fn evaluate(&self) -> Option<bool> {
        if !self.limit.converged || self.rows.iter().any(|r| !r.converged) {
            return None;
        }
        let lambda_p = self.limit.lambda;
        let tail = &self.increments[self.increments.len().saturating_sub(INCREMENT_WINDOW)..];
        Some(
            self.final_gap <= self.tolerance * lambda_p
                && !self.increments.is_empty()
                && non_increasing(tail, lambda_p),
        )
    }

    pub fn verdict_line(&self) -> String {
        match self.verdict {
            Some(true) => "consistent with right-continuity".into(),
            Some(false) => "not consistent with right-continuity".into(),
            None => {
                let bad: Vec<String> = self
                    .rows
                    .iter()
                    .filter(|r| !r.converged)
                    .map(|r| r.h.to_string())
                    .chain((!self.limit.converged).then(|| "base".to_string()))
                    .collect();
                format!("verdict withheld: no convergence at h = {}", bad.join(", "))
            }
        }
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let row = |h: String, r: &SweepRow| {
            vec![
                h,
                fmt_f64(r.distance),
                fmt_f64(r.lambda),
                fmt_f64(r.el_residual),
                r.iterations.to_string(),
                r.converged.to_string(),
            ]
        };
        let mut rows: Vec<Vec<String>> =
            self.rows.iter().map(|r| row(r.h.to_string(), r)).collect();
        rows.push(row("inf".into(), &self.limit));
        table_csv(
            &[
                "h",
                "distance",
                "lambda",
                "el_residual",
                "iterations",
                "converged",
            ],
            &rows,
        )
    }
}

fn sweep_row(h: u64, distance: f64, solved: Result<EigenPair>) -> Result<SweepRow> {
    let pair = match solved {
        Ok(pair) => pair,
        Err(Error::NotConverged(pair)) => *pair,
        Err(e) => return Err(e),
    };
    Ok(SweepRow {
        h,
        distance,
        lambda: pair.lambda,
        el_residual: pair.el_residual,
        iterations: pair.iterations,
        converged: pair.converged,
    })
}

/// Solves the first eigenvalue for every member of `seq` and for `p` itself.
pub fn stability_sweep(
    p: &ExponentField,
    seq: &ExponentSequence,
    cfg: &SolverConfig,
) -> Result<StabilityReport> {
    same_base(p, seq)?;
    cfg.validate()?;
    let mut rows: Vec<SweepRow> = seq
        .h_list()
        .par_iter()
        .map(|&h| {
            let ph = seq.member(h)?;
            let distance = seq.distance_at(h)?;
            sweep_row(h, distance, solve_first_eigenpair(&ph, cfg))
        })
        .collect::<Result<_>>()?;
    rows.sort_by_key(|r| r.h);
    let limit = sweep_row(0, 0.0, solve_first_eigenpair(p, cfg))?;

    let increments: Vec<f64> = rows
        .windows(2)
        .map(|w| (w[1].lambda - w[0].lambda).abs())
        .collect();
    let final_gap = (rows.last().expect("non-empty h list").lambda - limit.lambda).abs();
    let mut report = StabilityReport {
        rows,
        limit,
        increments,
        final_gap,
        tolerance: STABILITY_TOL,
        verdict: None,
        seed: cfg.seed,
    };
    report.verdict = report.evaluate();
    Ok(report)
}

/// How `u_h` is derived from `u`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PerturbationRule {
    /// `u_h = u`
    Identity,
    /// `u_h = (1 + c/h) u`
    Scaling { c: f64 },
    /// `u_h = u + amplitude ξ / h` with one seeded nodal field `ξ ∈ [-1, 1]`.
    DecayingNoise { amplitude: f64, seed: u64 },
    /// `u_h = u + (amplitude / h) ψ` with a plateau bump `ψ`.
    BumpInjection {
        amplitude: f64,
        center: Vec<f64>,
        radius: f64,
    },
}

impl PerturbationRule {
    /// The field added with weight `1/h`; the same for every `h`.
    fn direction(&self, u: &GridFunction) -> Result<Option<GridFunction>> {
        let mesh = u.mesh();
        Ok(match self {
            PerturbationRule::Identity => None,
            PerturbationRule::Scaling { c } => Some(u.scaled(*c)),
            PerturbationRule::DecayingNoise { amplitude, seed } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let xi: Vec<f64> = (0..mesh.node_count())
                    .map(|_| amplitude * rng.gen_range(-1.0..=1.0))
                    .collect();
                Some(GridFunction::new(mesh.clone(), xi)?.zero_boundary())
            }
            PerturbationRule::BumpInjection {
                amplitude,
                center,
                radius,
            } => {
                if center.len() != mesh.dimension() || !mesh.contains(center) || !(*radius > 0.0) {
                    return Err(Error::Precondition(format!(
                        "bump at {center:?} with radius {radius} does not fit the mesh"
                    )));
                }
                Some(plateau_bump(mesh, center, *radius)?.scaled(*amplitude))
            }
        })
    }

    pub fn apply(&self, u: &GridFunction, h: u64) -> Result<GridFunction> {
        if h == 0 {
            return Err(Error::Precondition("h must be positive".into()));
        }
        match self.direction(u)? {
            None => Ok(u.clone()),
            Some(d) => u.add_scaled(1.0 / h as f64, &d),
        }
    }

    fn describe(&self) -> String {
        serde_json::to_string(self).unwrap_or_default()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    /// `‖∇w‖_{p_h} -> ‖∇w‖_p`
    GammaLimsup,
    /// `‖u‖_p ≤ liminf ‖u_h‖_{p_h}`
    NormSemicontinuity,
    /// `ϱ_{p_h}(u_h) -> ϱ_p(u)` and `‖u_h‖_{p_h} -> ‖u‖_p`
    ModularConvergence,
}

/// One observed quantity along the sequence and its base value.
#[derive(Clone, Debug, Serialize)]
pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
    pub limit: f64,
}

impl Series {
    fn gaps(&self) -> Vec<f64> {
        self.values.iter().map(|v| (v - self.limit).abs()).collect()
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub kind: CheckKind,
    pub description: String,
    pub h_list: Vec<u64>,
    pub series: Vec<Series>,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckReport {
    fn new(kind: CheckKind, description: String, h_list: &[u64], series: Vec<Series>) -> Self {
        let tolerance = match kind {
            CheckKind::GammaLimsup => GAMMA_TOL,
            CheckKind::NormSemicontinuity => SEMICONTINUITY_SLACK,
            CheckKind::ModularConvergence => MODULAR_TOL,
        };
        let mut report = CheckReport {
            kind,
            description,
            h_list: h_list.to_vec(),
            series,
            tolerance,
            pass: false,
        };
        report.pass = report.evaluate();
        report
    }

    /// Recomputes the verdict from the stored series.
    pub fn evaluate(&self) -> bool {
        let tol = self.tolerance;
        match self.kind {
            CheckKind::GammaLimsup => {
                let s = &self.series[0];
                let gaps = s.gaps();
                non_increasing(&gaps, s.limit)
                    && gaps.last().is_some_and(|g| *g <= tol * s.limit.abs())
            }
            CheckKind::NormSemicontinuity => {
                let s = &self.series[0];
                let tail = &s.values[s.values.len().saturating_sub(TAIL)..];
                tail.iter().copied().fold(f64::INFINITY, f64::min) >= s.limit - tol
            }
            CheckKind::ModularConvergence => self
                .series
                .iter()
                .all(|s| s.gaps().last().is_some_and(|g| *g <= tol * s.limit.abs())),
        }
    }

    pub fn verdict_line(&self) -> String {
        let name = serde_json::to_value(self.kind)
            .ok()
            .and_then(|v| v.as_str().map(str::to_owned))
            .unwrap_or_default();
        let finals: Vec<String> = self
            .series
            .iter()
            .map(|s| {
                format!(
                    "{} {:.6e} (base {:.6e})",
                    s.name,
                    s.values.last().copied().unwrap_or(f64::NAN),
                    s.limit
                )
            })
            .collect();
        format!(
            "{name}: {}; {}",
            if self.pass { "pass" } else { "fail" },
            finals.join(", ")
        )
    }

    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut header = vec!["h".to_string()];
        for s in &self.series {
            header.push(s.name.clone());
            header.push(format!("{}_gap", s.name));
        }
        let gaps: Vec<Vec<f64>> = self.series.iter().map(Series::gaps).collect();
        let rows: Vec<Vec<String>> = self
            .h_list
            .iter()
            .enumerate()
            .map(|(i, h)| {
                let mut row = vec![h.to_string()];
                for (s, g) in self.series.iter().zip(&gaps) {
                    row.push(fmt_f64(s.values[i]));
                    row.push(fmt_f64(g[i]));
                }
                row
            })
            .collect();
        let header: Vec<&str> = header.iter().map(String::as_str).collect();
        table_csv(&header, &rows)
    }
}

fn describe_sequence(p: &ExponentField, seq: &ExponentSequence) -> String {
    let h = seq.h_list();
    format!(
        "exponent range [{}, {}], h from {} to {} ({} values)",
        p.p_minus(),
        p.p_plus(),
        h[0],
        h[h.len() - 1],
        h.len()
    )
}

/// `‖∇w‖_{p_h}` along the sequence against `‖∇w‖_p`.
pub fn gamma_limsup_check(
    p: &ExponentField,
    seq: &ExponentSequence,
    w: &GridFunction,
) -> Result<CheckReport> {
    same_base(p, seq)?;
    if !w.mesh().same_as(p.mesh()) {
        return Err(Error::MeshMismatch);
    }
    w.require_dirichlet()?;
    let grad = gradient(w);
    let norm_of = |q: &ExponentField| luxemburg_norm(&grad, q);
    let values: Vec<f64> = seq
        .h_list()
        .par_iter()
        .map(|&h| norm_of(&seq.member(h)?))
        .collect::<Result<_>>()?;
    let series = Series {
        name: "grad_norm".into(),
        values,
        limit: norm_of(p)?,
    };
    Ok(CheckReport::new(
        CheckKind::GammaLimsup,
        format!("fixed test function; {}", describe_sequence(p, seq)),
        seq.h_list(),
        vec![series],
    ))
}

/// `‖u_h‖_{p_h}` against `‖u‖_p` over the tail of the sequence.
pub fn norm_semicontinuity_check(
    p: &ExponentField,
    seq: &ExponentSequence,
    u: &GridFunction,
    rule: &PerturbationRule,
) -> Result<CheckReport> {
    same_base(p, seq)?;
    if !u.mesh().same_as(p.mesh()) {
        return Err(Error::MeshMismatch);
    }
    let values: Vec<f64> = seq
        .h_list()
        .par_iter()
        .map(|&h| luxemburg_norm(&rule.apply(u, h)?, &seq.member(h)?))
        .collect::<Result<_>>()?;
    let series = Series {
        name: "norm".into(),
        values,
        limit: luxemburg_norm(u, p)?,
    };
    Ok(CheckReport::new(
        CheckKind::NormSemicontinuity,
        format!(
            "perturbation {}; {}",
            rule.describe(),
            describe_sequence(p, seq)
        ),
        seq.h_list(),
        vec![series],
    ))
}

/// `ϱ_{p_h}(u_h)` and `‖u_h‖_{p_h}` against their base values. Every `u_h` must
/// satisfy `‖∇u_h‖_{p_h} ≤ energy_bound`.
pub fn modular_convergence_check(
    p: &ExponentField,
    seq: &ExponentSequence,
    u: &GridFunction,
    rule: &PerturbationRule,
    energy_bound: f64,
) -> Result<CheckReport> {
    same_base(p, seq)?;
    if !u.mesh().same_as(p.mesh()) {
        return Err(Error::MeshMismatch);
    }
    let samples: Vec<(f64, f64)> = seq
        .h_list()
        .par_iter()
        .map(|&h| {
            let uh = rule.apply(u, h)?;
            let ph = seq.member(h)?;
            let energy = luxemburg_norm(&gradient(&uh), &ph)?;
            if !(energy <= energy_bound) {
                return Err(Error::Precondition(format!(
                    "h = {h}: gradient norm {energy} exceeds the energy bound {energy_bound}"
                )));
            }
            Ok((modular(&uh, &ph)?, luxemburg_norm(&uh, &ph)?))
        })
        .collect::<Result<_>>()?;
    let series = vec![
        Series {
            name: "modular".into(),
            values: samples.iter().map(|s| s.0).collect(),
            limit: modular(u, p)?,
        },
        Series {
            name: "norm".into(),
            values: samples.iter().map(|s| s.1).collect(),
            limit: luxemburg_norm(u, p)?,
        },
    ];
    Ok(CheckReport::new(
        CheckKind::ModularConvergence,
        format!(
            "perturbation {}; energy bound {energy_bound}; {}",
            rule.describe(),
            describe_sequence(p, seq)
        ),
        seq.h_list(),
        series,
    ))
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct GrowthRow {
    pub m: usize,
    pub norm_form: f64,
    /// `norm_form^{p0}`
    pub modular_form: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GrowthTable {
    pub p0: f64,
    pub interval: (f64, f64),
    pub rows: Vec<GrowthRow>,
    /// Least-squares slope of `ln(modular_form)` against `ln m`.
    pub fitted_slope: f64,
    /// The exponent `N / p0` quoted for `λ^{(m)} ∼ m^{N/p}`.
    pub reference_exponent: f64,
    /// Set when the fitted slope is farther than [`SLOPE_TOL`] from the reference.
    pub discrepancy: bool,
}

impl GrowthTable {
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let rows: Vec<Vec<String>> = self
            .rows
            .iter()
            .map(|r| {
                vec![
                    r.m.to_string(),
                    fmt_f64(r.norm_form),
                    fmt_f64(r.modular_form),
                ]
            })
            .collect();
        table_csv(&["m", "norm_form", "modular_form"], &rows)
    }

    pub fn verdict_line(&self) -> String {
        format!(
            "fitted modular-form slope {:.6} vs reference exponent {:.6}: {}",
            self.fitted_slope,
            self.reference_exponent,
            if self.discrepancy {
                "discrepancy"
            } else {
                "agreement"
            }
        )
    }
}

fn least_squares_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    sxy / sxx
}

/// Eigenvalues `λ^{(m)}`, `m = 1..=m_max`, of the constant-`p0` problem on an interval.
pub fn growth_rate_table(p0: f64, interval: (f64, f64), m_max: usize) -> Result<GrowthTable> {
    if m_max < 2 {
        return Err(Error::Precondition(format!(
            "m_max = {m_max}: a slope needs at least two rows"
        )));
    }
    let rows: Vec<GrowthRow> = (1..=m_max)
        .map(|m| {
            let norm_form = constant_p_higher_eigenvalue_1d(m, p0, interval)?;
            Ok(GrowthRow {
                m,
                norm_form,
                modular_form: norm_form.powf(p0),
            })
        })
        .collect::<Result<_>>()?;
    let x: Vec<f64> = rows.iter().map(|r| (r.m as f64).ln()).collect();
    let y: Vec<f64> = rows.iter().map(|r| r.modular_form.ln()).collect();
    let fitted_slope = least_squares_slope(&x, &y);
    let reference_exponent = 1.0 / p0;
    Ok(GrowthTable {
        p0,
        interval,
        rows,
        fitted_slope,
        reference_exponent,
        discrepancy: (fitted_slope - reference_exponent).abs() > SLOPE_TOL,
    })
}

/// Writes `{experiment}_{hash}.csv` and `{experiment}_{hash}.json` into `dir`,
/// the hash being taken over `config`.
pub fn write_artifacts<C: Serialize, S: Serialize>(
    dir: &Path,
    experiment: &str,
    config: &C,
    csv: &[u8],
    summary: &S,
) -> Result<(PathBuf, PathBuf)> {
    let stem = format!("{experiment}_{}", config_hash(config)?);
    let csv_path = dir.join(format!("{stem}.csv"));
    let json_path = dir.join(format!("{stem}.json"));
    write_atomic(&csv_path, csv)?;
    write_atomic(&json_path, &json_bytes(summary)?)?;
    Ok((csv_path, json_path))
}
