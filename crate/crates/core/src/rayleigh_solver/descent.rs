//! Projected descent for the first eigenpair.
//!
//! Each step moves the interior nodal values along `-P⁻¹ ∇R`, where `∇R` is the
//! hat-basis gradient of `R = K/k` and `P` is the stiffness matrix of the
//! current iterate's linearised energy (cell weights `p |∇u/K|^{p-2}`, floored).
//! For constant `p = 2` a unit step is exactly one inverse-iteration step. The
//! step is backtracked until `R` decreases and the iterate is renormalised to
//! `k(u) = 1`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::banded::BandedSpd;
use super::functionals::Evaluation;
use super::{EigenPair, SolverConfig};
use crate::discretize::{gradient_stencil, GridFunction};
use crate::error::{Error, Result};
use crate::exponent_field::ExponentField;
use crate::mesh::Mesh;

/// Lower bound on `|∇u| / K` inside the preconditioner weights.
const WEIGHT_FLOOR: f64 = 1e-3;
const MAX_STEP: f64 = 1.0;
const MAX_BACKTRACKS: usize = 60;
const PERTURBATION: f64 = 0.2;

/// Outcome of one descent from a given start.
#[derive(Clone, Debug)]
pub struct DescentRun {
    pub lambda: f64,
    pub u: GridFunction,
    pub el_residual: f64,
    pub initial_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Accepted values of `R`, starting with the initial one.
    pub history: Vec<f64>,
}

fn embed(mesh: &Mesh, interior: &[f64], out: &mut [f64]) {
    for (&node, &v) in mesh.interior_nodes().iter().zip(interior) {
        out[node] = v;
    }
}

fn preconditioner(mesh: &Mesh, p: &ExponentField, eval: &Evaluation) -> Result<BandedSpd> {
    let stencil = gradient_stencil(mesh);
    let npc = mesh.nodes_per_cell();
    let w = mesh.cell_measure();
    let k = eval.grad.norm;
    let n = mesh.interior_nodes().len();
    let bw = if mesh.dimension() == 1 {
        1
    } else {
        mesh.axes()[0].cells
    };
    let mut mat = BandedSpd::zeros(n, bw);
    for c in 0..mesh.cell_count() {
        let e = p.cell_values()[c];
        let omega = w * e * (eval.grad_mags[c] / k).max(WEIGHT_FLOOR).powf(e - 2.0);
        let nodes = mesh.cell_nodes(c);
        for a in 0..npc {
            let Some(ia) = mesh.interior_slot(nodes[a]) else {
                continue;
            };
            for b in 0..npc {
                let Some(ib) = mesh.interior_slot(nodes[b]) else {
                    continue;
                };
                if ib <= ia {
                    let s = stencil[a][0] * stencil[b][0] + stencil[a][1] * stencil[b][1];
                    mat.add(ia, ib, omega * s);
                }
            }
        }
    }
    mat.factor()
}

/// Runs the descent from `start` (boundary values are ignored).
pub fn descend(p: &ExponentField, start: &GridFunction, cfg: &SolverConfig) -> Result<DescentRun> {
    cfg.validate()?;
    if !start.mesh().same_as(p.mesh()) {
        return Err(Error::MeshMismatch);
    }
    let mesh = p.mesh().clone();
    let interior = mesh.interior_nodes();
    if interior.len() < 2 {
        return Err(Error::Precondition(format!(
            "need at least 2 interior nodes, mesh has {}",
            interior.len()
        )));
    }

    let mut nodal = vec![0.0; mesh.node_count()];
    let mut x = start.interior_values();
    embed(&mesh, &x, &mut nodal);
    let mut eval = Evaluation::new(&mesh, p, &nodal)?;
    let scale = 1.0 / eval.value.norm;
    x.iter_mut().for_each(|v| *v *= scale);
    embed(&mesh, &x, &mut nodal);
    eval = Evaluation::new(&mesh, p, &nodal)?;

    let mut lambda = eval.ratio();
    let mut history = vec![lambda];
    let mut step = cfg.initial_step;
    let mut last_change = f64::INFINITY;
    let mut initial_residual = None;
    let mut iterations = 0;
    let mut trial_nodal = vec![0.0; mesh.node_count()];

    let (residual, converged) = loop {
        let dk = eval.grad_derivative(&mesh, p);
        let dv = eval.value_derivative(&mesh, p);
        let residual = eval.residual(&mesh, lambda, &dk, &dv);
        initial_residual.get_or_insert(residual);

        if last_change <= cfg.tol_lambda || residual <= cfg.tol_residual {
            break (residual, true);
        }
        if iterations >= cfg.max_iter {
            break (residual, false);
        }
        iterations += 1;

        // ∇R with k(u) = 1, preconditioned and rescaled so that a unit step is
        // the linearised inverse-iteration update.
        let k_val = eval.value.norm;
        let mut dir: Vec<f64> = interior
            .iter()
            .map(|&i| (dk[i] - lambda * dv[i]) / k_val)
            .collect();
        preconditioner(&mesh, p, &eval)?.solve(&mut dir);
        let s = eval.grad.norm * eval.grad.weight_sum;
        dir.iter_mut().for_each(|d| *d *= s);

        let mut accepted = None;
        let mut tau = step;
        for _ in 0..MAX_BACKTRACKS {
            let trial: Vec<f64> = x.iter().zip(&dir).map(|(a, d)| a - tau * d).collect();
            embed(&mesh, &trial, &mut trial_nodal);
            if let Ok(e) = Evaluation::new(&mesh, p, &trial_nodal) {
                if e.ratio() < lambda {
                    accepted = Some((trial, e));
                    break;
                }
            }
            tau *= cfg.backtrack;
        }
        let Some((trial, trial_eval)) = accepted else {
            // No decrease is representable any more.
            break (residual, residual <= cfg.tol_residual);
        };

        let scale = 1.0 / trial_eval.value.norm;
        x = trial.into_iter().map(|v| v * scale).collect();
        embed(&mesh, &x, &mut nodal);
        eval = Evaluation::new(&mesh, p, &nodal)?;
        let new_lambda = eval.ratio().min(lambda);
        last_change = (lambda - new_lambda) / new_lambda;
        lambda = new_lambda;
        history.push(lambda);
        step = (tau / cfg.backtrack).min(MAX_STEP);
    };

    if x.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v))
        < -x.iter().fold(f64::INFINITY, |m, &v| m.min(v))
    {
        x.iter_mut().for_each(|v| *v = -*v);
        embed(&mesh, &x, &mut nodal);
    }

    Ok(DescentRun {
        lambda,
        u: GridFunction::new(mesh.clone(), nodal)?,
        el_residual: residual,
        initial_residual: initial_residual.unwrap_or(residual),
        iterations,
        converged,
        history,
    })
}

/// Positive product-of-sines bump plus a seeded combination of low modes.
pub fn initial_guess(mesh: &std::sync::Arc<Mesh>, seed: u64) -> Result<GridFunction> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let axes = mesh.axes().to_vec();
    let modes: Vec<(usize, usize)> = if axes.len() == 1 {
        (2..=4).map(|k| (k, 1)).collect()
    } else {
        (1..=3)
            .flat_map(|k| (1..=3).map(move |l| (k, l)))
            .filter(|&m| m != (1, 1))
            .collect()
    };
    let coef: Vec<f64> = modes
        .iter()
        .map(|_| PERTURBATION * rng.gen_range(-1.0..1.0))
        .collect();
    let wave = |k: usize, axis: usize, x: &[f64]| {
        let a = &axes[axis];
        (k as f64 * std::f64::consts::PI * (x[axis] - a.lo) / a.length()).sin()
    };
    let shape = |k: usize, l: usize, x: &[f64]| {
        if axes.len() == 1 {
            wave(k, 0, x)
        } else {
            wave(k, 0, x) * wave(l, 1, x)
        }
    };
    let u = crate::discretize::interpolate(mesh, |x| {
        shape(1, 1, x)
            + modes
                .iter()
                .zip(&coef)
                .map(|(&(k, l), c)| c * shape(k, l, x))
                .sum::<f64>()
    })?;
    Ok(u.zero_boundary())
}

/// First eigenpair: best of `cfg.restarts` seeded descents.
pub fn solve_first_eigenpair(p: &ExponentField, cfg: &SolverConfig) -> Result<EigenPair> {
    cfg.validate()?;
    let mesh = p.mesh();
    let runs: Vec<Result<DescentRun>> = (0..cfg.restarts)
        .into_par_iter()
        .map(|r| {
            let start = initial_guess(mesh, cfg.seed.wrapping_add(r as u64))?;
            descend(p, &start, cfg)
        })
        .collect();
    let runs: Vec<(usize, DescentRun)> = runs
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.map(|run| (i, run)))
        .collect::<Result<_>>()?;

    let better = |a: &DescentRun, b: &DescentRun| {
        let tie = (a.lambda - b.lambda).abs() <= cfg.tol_lambda * b.lambda;
        if tie {
            a.el_residual < b.el_residual
        } else {
            a.lambda < b.lambda
        }
    };
    let pick = |only_converged: bool| {
        runs.iter()
            .filter(|(_, r)| r.converged || !only_converged)
            .fold(None::<&(usize, DescentRun)>, |best, cand| match best {
                Some(b) if !better(&cand.1, &b.1) => Some(b),
                _ => Some(cand),
            })
    };
    let (index, run) = pick(true)
        .or_else(|| pick(false))
        .expect("at least one restart");

    let pair = EigenPair {
        lambda: run.lambda,
        u: run.u.clone(),
        el_residual: run.el_residual,
        initial_residual: run.initial_residual,
        iterations: run.iterations,
        restarts_used: cfg.restarts,
        best_restart: *index,
        seed: cfg.seed,
        converged: run.converged,
    };
    if pair.converged {
        Ok(pair)
    } else {
        Err(Error::NotConverged(Box::new(pair)))
    }
}
