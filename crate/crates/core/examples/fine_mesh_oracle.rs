//! Regenerates `tests/data/constant_p_oracle.json`: first eigenvalues for
//! constant exponents on a fine mesh of (0, 1).
//!
//! cargo run --release --example fine_mesh_oracle

use std::path::Path;

use serde::Serialize;
use varexp::exponent_field::ExponentField;
use varexp::io::{json_bytes, write_atomic};
use varexp::mesh::{Mesh, MeshSpec};
use varexp::rayleigh_solver::{solve_first_eigenpair, SolverConfig};

const CELLS: usize = 8192;
const EXPONENTS: [f64; 2] = [1.5, 3.0];

#[derive(Serialize)]
struct Entry {
    p: f64,
    lambda: f64,
    el_residual: f64,
    iterations: usize,
    best_restart: usize,
}

#[derive(Serialize)]
struct Oracle {
    mesh: MeshSpec,
    solver: SolverConfig,
    entries: Vec<Entry>,
}

fn main() -> varexp::Result<()> {
    let spec = MeshSpec::unit_interval(CELLS);
    let mesh = Mesh::new(spec)?;
    let solver = SolverConfig {
        tol_lambda: 1e-10,
        restarts: 10,
        ..SolverConfig::default()
    };
    let mut entries = Vec::new();
    for p0 in EXPONENTS {
        let p = ExponentField::constant(mesh.clone(), p0)?;
        let pair = solve_first_eigenpair(&p, &solver)?;
        println!("p = {p0}: lambda = {:.17e}", pair.lambda);
        entries.push(Entry {
            p: p0,
            lambda: pair.lambda,
            el_residual: pair.el_residual,
            iterations: pair.iterations,
            best_restart: pair.best_restart,
        });
    }
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data/constant_p_oracle.json");
    write_atomic(
        &path,
        &json_bytes(&Oracle {
            mesh: spec,
            solver,
            entries,
        })?,
    )?;
    println!("wrote {}", path.display());
    Ok(())
}
