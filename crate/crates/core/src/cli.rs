//! `varexp <norm|eigen|sweep|gamma|growth> --config <path> [--seed N] [--out DIR]`
//!
//! Exit statuses: 0 success, 2 configuration or validation error, 3 numerical
//! failure, 4 solver non-convergence.

use std::f64::consts::PI;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::discretize::{interpolate, GridFunction};
use crate::error::{Error, Result};
use crate::exponent_field::{
    build_field, build_sequence, ExponentFamily, ExponentField, ExponentSequence, SequenceRule,
};
use crate::io::{fmt_f64, read_nodal_csv, table_csv};
use crate::mesh::{Mesh, MeshSpec};
use crate::modular_norm::unit_ball_check;
use crate::rayleigh_solver::{solve_first_eigenpair, SolverConfig};
use crate::stability_lab::{
    gamma_limsup_check, growth_rate_table, modular_convergence_check, norm_semicontinuity_check,
    stability_sweep, write_artifacts, PerturbationRule,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_NOT_CONVERGED: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "varexp",
    version,
    about = "Variable-exponent norms, eigenpairs and stability experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Modular, Luxemburg norm and unit-ball verdict of a function
    Norm(Common),
    /// First eigenpair of the p(x)-Laplacian
    Eigen(Common),
    /// Eigenvalue stability along an exponent sequence
    Sweep(Common),
    /// Norm and modular convergence checks along an exponent sequence
    Gamma(Common),
    /// Constant-exponent eigenvalue growth table
    Growth(Common),
}

#[derive(Debug, Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    /// Overrides the seed of the config file
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the output directory of the config file
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CommandName {
    Norm,
    Eigen,
    Sweep,
    Gamma,
    Growth,
}

impl CommandName {
    pub fn as_str(self) -> &'static str {
        match self {
            CommandName::Norm => "norm",
            CommandName::Eigen => "eigen",
            CommandName::Sweep => "sweep",
            CommandName::Gamma => "gamma",
            CommandName::Growth => "growth",
        }
    }
}

/// Nodal functions for the norm and check commands.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FunctionSpec {
    Zero,
    Constant {
        value: f64,
    },
    /// `c0 + slope · x`
    Affine {
        c0: f64,
        slope: Vec<f64>,
    },
    /// `Π_d sin(k_d π (x_d - lo_d) / L_d)`
    SineProduct {
        modes: Vec<u32>,
    },
    Tabulated {
        path: PathBuf,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum RuleSpec {
    /// `p_h = p + delta / h`
    Additive { delta: f64 },
    /// `p_h = p + (q - p) / h`
    Blend { target: ExponentFamily },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceSpec {
    pub rule: RuleSpec,
    pub h_list: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CheckSpec {
    Limsup,
    Semicontinuity {
        perturbation: PerturbationRule,
    },
    Modular {
        perturbation: PerturbationRule,
        energy_bound: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthSpec {
    pub p0: f64,
    #[serde(default = "unit_interval")]
    pub interval: (f64, f64),
    pub m_max: usize,
}

fn unit_interval() -> (f64, f64) {
    (0.0, 1.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// When present it must match the subcommand.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<CommandName>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mesh: Option<MeshSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub exponent: Option<ExponentFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub function: Option<FunctionSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sequence: Option<SequenceSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub check: Option<CheckSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<GrowthSpec>,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Overrides `solver.seed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

fn missing(what: &str, command: CommandName) -> Error {
    Error::Config(format!(
        "`{what}` is required by the {} command",
        command.as_str()
    ))
}

fn relative_to(base: &Path, path: &Path) -> PathBuf {
    if path.is_relative() {
        base.join(path)
    } else {
        path.to_path_buf()
    }
}

fn rebase_family(family: &ExponentFamily, base: &Path) -> ExponentFamily {
    match family {
        ExponentFamily::Tabulated { path } => ExponentFamily::Tabulated {
            path: relative_to(base, path),
        },
        other => other.clone(),
    }
}

pub fn build_function(mesh: &Arc<Mesh>, spec: &FunctionSpec) -> Result<GridFunction> {
    let dim = mesh.dimension();
    let check_len = |len: usize, what: &str| {
        if len == dim {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "{what} has length {len} on a {dim}D mesh"
            )))
        }
    };
    match spec {
        FunctionSpec::Zero => Ok(GridFunction::zeros(mesh.clone())),
        FunctionSpec::Constant { value } => interpolate(mesh, |_| *value),
        FunctionSpec::Affine { c0, slope } => {
            check_len(slope.len(), "slope")?;
            interpolate(mesh, |x| {
                c0 + slope.iter().zip(x).map(|(a, b)| a * b).sum::<f64>()
            })
        }
        FunctionSpec::SineProduct { modes } => {
            check_len(modes.len(), "modes")?;
            let axes = mesh.axes().to_vec();
            let u = interpolate(mesh, |x| {
                axes.iter()
                    .zip(modes)
                    .zip(x)
                    .map(|((a, &k), &xd)| (k as f64 * PI * (xd - a.lo) / a.length()).sin())
                    .product()
            })?;
            Ok(u.zero_boundary())
        }
        FunctionSpec::Tabulated { path } => {
            let values = read_nodal_csv(path)?;
            if values.len() != mesh.node_count() {
                return Err(Error::Config(format!(
                    "{}: {} rows for a mesh with {} nodes",
                    path.display(),
                    values.len(),
                    mesh.node_count()
                )));
            }
            GridFunction::new(mesh.clone(), values)
        }
    }
}

/// A configuration with every object built, ready to run.
struct Resolved {
    command: CommandName,
    /// Configuration as hashed for artifact names.
    hashed: RunConfig,
    out: PathBuf,
    solver: SolverConfig,
    p: Option<ExponentField>,
    function: Option<GridFunction>,
    sequence: Option<ExponentSequence>,
}

fn resolve(
    command: CommandName,
    mut config: RunConfig,
    base_dir: &Path,
    seed: Option<u64>,
    out: Option<PathBuf>,
) -> Result<Resolved> {
    if let Some(named) = config.command {
        if named != command {
            return Err(Error::Config(format!(
                "config is for `{}`, invoked as `{}`",
                named.as_str(),
                command.as_str()
            )));
        }
    }
    config.command = Some(command);
    if let Some(s) = seed {
        config.seed = Some(s);
    }
    let out = out
        .or_else(|| config.out.as_ref().map(|o| relative_to(base_dir, o)))
        .unwrap_or_else(|| PathBuf::from("out"));
    let mut solver = config.solver.clone();
    if let Some(s) = config.seed {
        solver.seed = s;
    }
    solver.validate()?;

    let needs_field = command != CommandName::Growth;
    let mesh = match (&config.mesh, needs_field) {
        (Some(spec), true) => Some(Mesh::new(*spec)?),
        (None, true) => return Err(missing("mesh", command)),
        _ => None,
    };
    let p = match (&mesh, &config.exponent) {
        (Some(mesh), Some(family)) => Some(build_field(mesh, &rebase_family(family, base_dir))?),
        (Some(_), None) => return Err(missing("exponent", command)),
        _ => None,
    };
    let needs_function = matches!(command, CommandName::Norm | CommandName::Gamma);
    let function = match (&mesh, &config.function, needs_function) {
        (Some(mesh), Some(spec), true) => {
            let spec = match spec {
                FunctionSpec::Tabulated { path } => FunctionSpec::Tabulated {
                    path: relative_to(base_dir, path),
                },
                other => other.clone(),
            };
            Some(build_function(mesh, &spec)?)
        }
        (_, None, true) => return Err(missing("function", command)),
        _ => None,
    };
    let needs_sequence = matches!(command, CommandName::Sweep | CommandName::Gamma);
    let sequence = match (&p, &config.sequence, needs_sequence) {
        (Some(p), Some(spec), true) => {
            let rule = match &spec.rule {
                RuleSpec::Additive { delta } => SequenceRule::Additive { delta: *delta },
                RuleSpec::Blend { target } => SequenceRule::Blend {
                    target: build_field(p.mesh(), &rebase_family(target, base_dir))?,
                },
            };
            Some(build_sequence(p, rule, &spec.h_list)?)
        }
        (_, None, true) => return Err(missing("sequence", command)),
        _ => None,
    };
    if command == CommandName::Growth && config.growth.is_none() {
        return Err(missing("growth", command));
    }

    let mut hashed = config;
    hashed.out = None;
    hashed.solver = solver.clone();
    hashed.seed = None;
    Ok(Resolved {
        command,
        hashed,
        out,
        solver,
        p,
        function,
        sequence,
    })
}

/// Six significant digits for human-readable lines.
fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let e = x.abs().log10().floor() as i32;
    if (-4..6).contains(&e) {
        format!("{x:.*}", (5 - e).max(0) as usize)
    } else {
        format!("{x:.5e}")
    }
}

#[derive(Serialize)]
struct NormSummary<'a> {
    mesh: &'a MeshSpec,
    exponent: &'a ExponentFamily,
    function: &'a FunctionSpec,
    modular: f64,
    norm: f64,
    unit_ball_pass: bool,
}

#[derive(Serialize)]
struct EigenSummary<'a> {
    mesh: &'a MeshSpec,
    exponent: &'a ExponentFamily,
    solver: &'a SolverConfig,
    lambda: f64,
    el_residual: f64,
    initial_residual: f64,
    iterations: usize,
    restarts_used: usize,
    best_restart: usize,
    seed: u64,
    converged: bool,
}

fn run_resolved(r: Resolved) -> Result<i32> {
    let cfg = &r.hashed;
    let name = r.command.as_str();
    match r.command {
        CommandName::Norm => {
            let u = r.function.as_ref().expect("resolved");
            let p = r.p.as_ref().expect("resolved");
            let v = unit_ball_check(u, p)?;
            let csv = table_csv(
                &[
                    "modular",
                    "norm",
                    "norm_sign",
                    "modular_sign",
                    "unit_ball_pass",
                ],
                &[vec![
                    fmt_f64(v.modular),
                    fmt_f64(v.norm),
                    v.norm_sign.to_string(),
                    v.modular_sign.to_string(),
                    v.pass.to_string(),
                ]],
            )?;
            let summary = NormSummary {
                mesh: cfg.mesh.as_ref().expect("resolved"),
                exponent: cfg.exponent.as_ref().expect("resolved"),
                function: cfg.function.as_ref().expect("resolved"),
                modular: v.modular,
                norm: v.norm,
                unit_ball_pass: v.pass,
            };
            let (csv_path, _) = write_artifacts(&r.out, name, cfg, &csv, &summary)?;
            println!(
                "modular {}  norm {}  unit ball {}  -> {}",
                sig6(v.modular),
                sig6(v.norm),
                if v.pass { "pass" } else { "fail" },
                csv_path.display()
            );
            Ok(EXIT_OK)
        }
        CommandName::Eigen => {
            let p = r.p.as_ref().expect("resolved");
            let (pair, code) = match solve_first_eigenpair(p, &r.solver) {
                Ok(pair) => (pair, EXIT_OK),
                Err(Error::NotConverged(pair)) => (*pair, EXIT_NOT_CONVERGED),
                Err(e) => return Err(e),
            };
            let summary = EigenSummary {
                mesh: cfg.mesh.as_ref().expect("resolved"),
                exponent: cfg.exponent.as_ref().expect("resolved"),
                solver: &r.solver,
                lambda: pair.lambda,
                el_residual: pair.el_residual,
                initial_residual: pair.initial_residual,
                iterations: pair.iterations,
                restarts_used: pair.restarts_used,
                best_restart: pair.best_restart,
                seed: pair.seed,
                converged: pair.converged,
            };
            let csv = crate::io::nodal_csv(pair.u.values())?;
            let (csv_path, _) = write_artifacts(&r.out, name, cfg, &csv, &summary)?;
            println!(
                "lambda {}  residual {}  iterations {}  {}  -> {}",
                sig6(pair.lambda),
                sig6(pair.el_residual),
                pair.iterations,
                if pair.converged {
                    "converged"
                } else {
                    "NOT converged"
                },
                csv_path.display()
            );
            Ok(code)
        }
        CommandName::Sweep => {
            let p = r.p.as_ref().expect("resolved");
            let seq = r.sequence.as_ref().expect("resolved");
            let report = stability_sweep(p, seq, &r.solver)?;
            write_artifacts(&r.out, name, cfg, &report.to_csv()?, &report)?;
            println!(
                "final gap {} (tolerance {} x lambda_p = {}): {}",
                sig6(report.final_gap),
                report.tolerance,
                sig6(report.limit.lambda),
                report.verdict_line()
            );
            Ok(if report.verdict.is_none() {
                EXIT_NOT_CONVERGED
            } else {
                EXIT_OK
            })
        }
        CommandName::Gamma => {
            let p = r.p.as_ref().expect("resolved");
            let seq = r.sequence.as_ref().expect("resolved");
            let u = r.function.as_ref().expect("resolved");
            let report = match cfg.check.as_ref().unwrap_or(&CheckSpec::Limsup) {
                CheckSpec::Limsup => gamma_limsup_check(p, seq, u)?,
                CheckSpec::Semicontinuity { perturbation } => {
                    norm_semicontinuity_check(p, seq, u, perturbation)?
                }
                CheckSpec::Modular {
                    perturbation,
                    energy_bound,
                } => modular_convergence_check(p, seq, u, perturbation, *energy_bound)?,
            };
            write_artifacts(&r.out, name, cfg, &report.to_csv()?, &report)?;
            println!("{}", report.verdict_line());
            Ok(EXIT_OK)
        }
        CommandName::Growth => {
            let g = cfg.growth.as_ref().expect("resolved");
            let table = growth_rate_table(g.p0, g.interval, g.m_max)?;
            write_artifacts(&r.out, name, cfg, &table.to_csv()?, &table)?;
            println!("{} rows; {}", table.rows.len(), table.verdict_line());
            Ok(EXIT_OK)
        }
    }
}

/// Maps an error to its exit status.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NotConverged(_) => EXIT_NOT_CONVERGED,
        Error::NonFinite(_) | Error::RootFind(_) | Error::ZeroFunction(_) | Error::Csv(_) => {
            EXIT_NUMERICAL
        }
        _ => EXIT_CONFIG,
    }
}

/// Parses `args` (program name first), runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let (command, common) = match cli.command {
        Command::Norm(c) => (CommandName::Norm, c),
        Command::Eigen(c) => (CommandName::Eigen, c),
        Command::Sweep(c) => (CommandName::Sweep, c),
        Command::Gamma(c) => (CommandName::Gamma, c),
        Command::Growth(c) => (CommandName::Growth, c),
    };
    let result = RunConfig::load(&common.config).and_then(|config| {
        let base = common
            .config
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default();
        resolve(command, config, &base, common.seed, common.out)
    });
    let result = result.and_then(run_resolved);
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
