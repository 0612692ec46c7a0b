//! Point-cloud CSV export (`x,y,value`) of discrete fields.
//!
//! Each element is sampled at the nodes of its own nodal basis: `P^k`
//! lattice nodes for `u_h` and the flux components, `P^{k+1}` nodes for
//! `u_h*`. Rows are ordered by element, then node.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::discretization::{Discretization, Space};
use crate::mesh::Point;
use crate::solver::{Solver, State};

/// What to sample from a field state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    U,
    UStar,
    Qx,
    Qy,
}

impl Quantity {
    pub const ALL: [Quantity; 4] = [Quantity::U, Quantity::UStar, Quantity::Qx, Quantity::Qy];

    pub fn suffix(&self) -> &'static str {
        match self {
            Quantity::U => "u",
            Quantity::UStar => "ustar",
            Quantity::Qx => "qx",
            Quantity::Qy => "qy",
        }
    }
}

/// Nodal samples of a `W_h` or `Z_h` vector.
pub fn sample_scalar(disc: &Discretization, space: Space, coeffs: &[f64]) -> Vec<(Point, f64)> {
    let basis = match space {
        Space::Scalar => &disc.reference.scalar,
        Space::Enriched => &disc.reference.enriched,
        Space::Flux => panic!("use sample_flux for the flux space"),
    };
    let dim = basis.dim();
    let mut out = Vec::with_capacity(coeffs.len());
    for e in 0..disc.mesh.num_elements() {
        let geo = disc.mesh.geometry(e);
        for (i, node) in basis.nodes().iter().enumerate() {
            out.push((geo.to_physical(*node), coeffs[e * dim + i]));
        }
    }
    out
}

/// Nodal samples of one component of a `V_h` vector.
pub fn sample_flux(disc: &Discretization, alpha: &[f64], component: usize) -> Vec<(Point, f64)> {
    let nodes = disc.reference.scalar.nodes();
    let mut out = Vec::with_capacity(alpha.len() / 2);
    for e in 0..disc.mesh.num_elements() {
        let geo = disc.mesh.geometry(e);
        for (i, node) in nodes.iter().enumerate() {
            out.push((geo.to_physical(*node), alpha[disc.layout.v_dof(e, component, i)]));
        }
    }
    out
}

pub fn sample(disc: &Discretization, state: &State, field: usize, quantity: Quantity) -> Vec<(Point, f64)> {
    let fs = &state.fields[field];
    match quantity {
        Quantity::U => sample_scalar(disc, Space::Scalar, &fs.beta),
        Quantity::UStar => sample_scalar(disc, Space::Enriched, &fs.gamma),
        Quantity::Qx => sample_flux(disc, &fs.alpha, 0),
        Quantity::Qy => sample_flux(disc, &fs.alpha, 1),
    }
}

pub fn write_csv<W: Write>(samples: &[(Point, f64)], mut out: W) -> io::Result<()> {
    writeln!(out, "x,y,value")?;
    for (p, v) in samples {
        writeln!(out, "{:.12e},{:.12e},{:.12e}", p[0], p[1], v)?;
    }
    out.flush()
}

pub fn export_field(samples: &[(Point, f64)], path: &Path) -> io::Result<()> {
    write_csv(samples, BufWriter::new(File::create(path)?))
}

/// Writes `{prefix}_{field}_{u,ustar,qx,qy}.csv` for every field into `dir`.
pub fn export_state(solver: &Solver, state: &State, dir: &Path, prefix: &str) -> io::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (f, spec) in solver.problem().fields.iter().enumerate() {
        for q in Quantity::ALL {
            let path = dir.join(format!("{prefix}_{}_{}.csv", spec.name, q.suffix()));
            export_field(&sample(solver.discretization(), state, f, q), &path)?;
            written.push(path);
        }
    }
    Ok(written)
}
