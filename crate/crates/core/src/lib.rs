//! Superconvergent interpolatory HDG solver for semilinear
//! reaction-diffusion problems `u_t - div(D grad u) + F(u) = f` on
//! triangulated 2D domains.
//!
//! The nonlinearity enters only through nodal values of the elementwise
//! postprocessed solution `u*`, so every matrix is assembled once per run and
//! the Newton Jacobian is a product of assembled matrices with a diagonal.

pub mod analysis;
pub mod assembly;
pub mod config;
pub mod condense;
pub mod discretization;
pub mod export;
pub mod felib;
pub mod instrument;
pub mod mesh;
pub mod problems;
pub mod projections;
pub mod solver;
pub mod sparse;

pub use discretization::{Discretization, Space, Stabilization};
pub use felib::BoundaryCondition;
pub use mesh::{Mesh, Point};
