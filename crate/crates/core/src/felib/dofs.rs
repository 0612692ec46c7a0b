use super::reference::dim_pk;
use crate::mesh::Mesh;

/// Which faces carry trace unknowns.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BoundaryCondition {
    /// Homogeneous Dirichlet: the trace vanishes on boundary faces, which carry no unknowns.
    Dirichlet,
    /// Homogeneous Neumann: every face carries trace unknowns and zero normal flux is imposed.
    Neumann,
}

/// Global numbering of the flux (`V_h`), scalar (`W_h`), postprocessed
/// (`Z_h`) and trace (`M_h`) spaces. Volume spaces are numbered element by
/// element, so their matrices are block diagonal.
#[derive(Debug, Clone)]
pub struct DofLayout {
    pub degree: usize,
    pub bc: BoundaryCondition,
    num_elements: usize,
    trace_slot: Vec<Option<usize>>,
    num_trace_faces: usize,
}

impl DofLayout {
    pub fn new(mesh: &Mesh, degree: usize, bc: BoundaryCondition) -> Self {
        let mut next = 0;
        let trace_slot = mesh
            .faces()
            .iter()
            .map(|f| {
                if f.boundary && bc == BoundaryCondition::Dirichlet {
                    None
                } else {
                    next += 1;
                    Some(next - 1)
                }
            })
            .collect();
        Self { degree, bc, num_elements: mesh.num_elements(), trace_slot, num_trace_faces: next }
    }

    /// `dim P^k`
    pub fn nk(&self) -> usize {
        dim_pk(self.degree)
    }

    /// `dim P^{k+1}`
    pub fn nk1(&self) -> usize {
        dim_pk(self.degree + 1)
    }

    /// Trace dofs per face.
    pub fn nf(&self) -> usize {
        self.degree + 1
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }

    pub fn n1(&self) -> usize {
        2 * self.nk() * self.num_elements
    }

    pub fn n2(&self) -> usize {
        self.nk() * self.num_elements
    }

    pub fn n3(&self) -> usize {
        self.nk1() * self.num_elements
    }

    pub fn n4(&self) -> usize {
        self.nf() * self.num_trace_faces
    }

    /// Flux dof: component `c` of scalar node `i` on element `e`.
    pub fn v_dof(&self, e: usize, c: usize, i: usize) -> usize {
        (2 * e + c) * self.nk() + i
    }

    pub fn w_dof(&self, e: usize, i: usize) -> usize {
        e * self.nk() + i
    }

    pub fn z_dof(&self, e: usize, i: usize) -> usize {
        e * self.nk1() + i
    }

    /// Position of face `f` among trace-carrying faces.
    pub fn trace_face(&self, f: usize) -> Option<usize> {
        self.trace_slot[f]
    }

    pub fn m_dof(&self, f: usize, j: usize) -> Option<usize> {
        self.trace_slot[f].map(|t| t * self.nf() + j)
    }
}
