//! A mesh together with its bases and dof layout, plus the evaluation
//! helpers shared by projections, error norms and export.

use crate::felib::{BoundaryCondition, DofLayout, FeError, ReferenceElement};
use crate::mesh::{Mesh, Point};

/// Finite element space selector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    /// `V_h`, vector `P^k` per element.
    Flux,
    /// `W_h`, `P^k` per element.
    Scalar,
    /// `Z_h`, `P^{k+1}` per element.
    Enriched,
}

#[derive(Debug, Clone)]
pub struct Discretization {
    pub mesh: Mesh,
    pub reference: ReferenceElement,
    pub layout: DofLayout,
}

impl Discretization {
    pub fn new(mesh: Mesh, k: usize, bc: BoundaryCondition) -> Result<Self, FeError> {
        let reference = ReferenceElement::new(k)?;
        let layout = DofLayout::new(&mesh, k, bc);
        Ok(Self { mesh, reference, layout })
    }

    pub fn degree(&self) -> usize {
        self.reference.degree
    }

    /// Value of a `W_h` or `Z_h` function on element `e` at physical point `x`.
    pub fn eval_scalar(&self, space: Space, coeffs: &[f64], e: usize, x: Point) -> f64 {
        let xi = self.mesh.geometry(e).to_reference(x);
        let (basis, dim) = match space {
            Space::Scalar => (&self.reference.scalar, self.layout.nk()),
            Space::Enriched => (&self.reference.enriched, self.layout.nk1()),
            Space::Flux => panic!("eval_scalar called on the flux space"),
        };
        let local = &coeffs[e * dim..(e + 1) * dim];
        basis.eval(xi).iter().zip(local).map(|(p, c)| p * c).sum()
    }

    /// Value of a `V_h` function on element `e` at physical point `x`.
    pub fn eval_flux(&self, coeffs: &[f64], e: usize, x: Point) -> Point {
        let xi = self.mesh.geometry(e).to_reference(x);
        let phi = self.reference.scalar.eval(xi);
        let nk = self.layout.nk();
        let mut out = [0.0; 2];
        for (c, o) in out.iter_mut().enumerate() {
            *o = (0..nk).map(|i| phi[i] * coeffs[self.layout.v_dof(e, c, i)]).sum();
        }
        out
    }
}

/// Stabilization `tau`, one nonnegative value per (element, local face).
#[derive(Debug, Clone, PartialEq)]
pub struct Stabilization {
    values: Vec<[f64; 3]>,
}

impl Stabilization {
    pub fn uniform(mesh: &Mesh, tau: f64) -> Self {
        Self { values: vec![[tau; 3]; mesh.num_elements()] }
    }

    pub fn from_values(values: Vec<[f64; 3]>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn on(&self, e: usize, local_face: usize) -> f64 {
        self.values[e][local_face]
    }

    pub fn element(&self, e: usize) -> [f64; 3] {
        self.values[e]
    }

    /// First element violating `tau >= 0` with a positive maximum on its boundary.
    pub fn first_invalid(&self) -> Option<usize> {
        self.values.iter().position(|t| t.iter().any(|v| !(*v >= 0.0)) || t.iter().copied().fold(0.0, f64::max) <= 0.0)
    }
}

/// Quadrature on face `f` in its stored orientation: physical point, edge
/// parameter `s` in `[0, 1]` from `vertices[0]` to `vertices[1]`, and weight
/// scaled by the face length.
pub fn face_quadrature(mesh: &Mesh, f: usize, rule: &crate::felib::EdgeRule) -> Vec<(Point, f64, f64)> {
    let [a, b] = mesh.face_points(f);
    let len = mesh.face_length(f);
    rule.points
        .iter()
        .zip(&rule.weights)
        .map(|(&s, &w)| ([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])], s, w * len))
        .collect()
}
