//! Reference-element machinery: nodal bases, quadrature, and global dof layouts.

mod dofs;
mod quadrature;
mod reference;

pub use dofs::{BoundaryCondition, DofLayout};
pub use quadrature::{edge_quadrature, triangle_quadrature, EdgeRule, QuadratureRule, MAX_EXACTNESS};
pub use reference::{dim_pk, lattice_nodes, EdgeBasis, LagrangeBasis, ReferenceElement, MAX_DEGREE};

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FeError {
    #[error("polynomial degree {0} is not supported")]
    UnsupportedDegree(usize),
    #[error("no quadrature rule with exactness {0}")]
    UnsupportedExactness(usize),
}

pub fn build_reference(k: usize) -> Result<ReferenceElement, FeError> {
    ReferenceElement::new(k)
}

/// Volume quadrature exact for every assembled bilinear form.
pub fn assembly_exactness(k: usize) -> usize {
    2 * (k + 1) + 2
}

pub fn edge_exactness(k: usize) -> usize {
    2 * k + 2
}

/// Volume quadrature used for error norms and data integrals.
pub fn error_exactness(k: usize) -> usize {
    2 * (k + 1) + 4
}
