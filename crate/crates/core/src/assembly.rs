//! One-time assembly of every matrix the time loop needs.
//!
//! Volume matrices are block diagonal (one dense block per element) and the
//! face matrices couple an element only to its own faces. Both the dense
//! element blocks and the global sparse matrices are kept: the global ones
//! drive residual evaluation, the blocks drive local elimination.
//!
//! | matrix | entries                     | shape     |
//! |--------|-----------------------------|-----------|
//! | `a1`   | `(grad chi_j, grad chi_i)`  | N3 x N3   |
//! | `a2`   | `(phi_vec_j, grad chi_i)`   | N3 x N1   |
//! | `a3`   | `(phi_vec_j, phi_vec_i)`    | N1 x N1   |
//! | `a4`   | `(phi_j, div phi_vec_i)`    | N1 x N2   |
//! | `a5`   | `<psi_j, phi_vec_i . n>`    | N1 x N4   |
//! | `a6`   | `<tau phi_j, phi_i>`        | N2 x N2   |
//! | `a7`   | `<tau psi_j, phi_i>`        | N2 x N4   |
//! | `a8`   | `<tau psi_j, psi_i>`        | N4 x N4   |
//! | `a9`   | `(chi_j, phi_i)`            | N2 x N3   |
//! | `m`    | `(phi_j, phi_i)`            | N2 x N2   |

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::discretization::{face_quadrature, Discretization, Stabilization};
use crate::felib::{assembly_exactness, edge_exactness, edge_quadrature, triangle_quadrature, DofLayout, FeError};
use crate::instrument;
use crate::sparse::{SparseMatrix, TripletBuilder};

#[derive(Debug, Error, PartialEq)]
pub enum AssemblyError {
    #[error("stabilization has {got} entries for {expected} elements")]
    InconsistentLayout { expected: usize, got: usize },
    #[error("stabilization on element {element} must be nonnegative with a positive maximum")]
    InvalidStabilization { element: usize },
    #[error("postprocessing saddle-point system on element {element} is singular")]
    SingularPostprocessing { element: usize },
    #[error("nonlinearity is not finite at postprocessing node {node}")]
    NonFinite { node: usize },
    #[error(transparent)]
    Fe(#[from] FeError),
}

/// Blocks of `a5`, `a7`, `a8` contributed by one element on one of its faces.
#[derive(Debug, Clone)]
pub struct FaceBlocks {
    pub face: usize,
    /// `2nk x (k+1)`
    pub a5: DMatrix<f64>,
    /// `nk x (k+1)`
    pub a7: DMatrix<f64>,
    /// `(k+1) x (k+1)`
    pub a8: DMatrix<f64>,
}

/// Dense element-local blocks, in local dof order (flux dofs are
/// component-major: all `x` then all `y`).
#[derive(Debug, Clone)]
pub struct ElementBlocks {
    pub a1: DMatrix<f64>,
    pub a2: DMatrix<f64>,
    pub a3: DMatrix<f64>,
    pub a4: DMatrix<f64>,
    pub a6: DMatrix<f64>,
    pub a9: DMatrix<f64>,
    pub m: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub b2: DVector<f64>,
    pub faces: [FaceBlocks; 3],
}

#[derive(Debug, Clone)]
pub struct SystemMatrices {
    pub a1: SparseMatrix,
    pub a2: SparseMatrix,
    pub a3: SparseMatrix,
    pub a4: SparseMatrix,
    pub a5: SparseMatrix,
    pub a6: SparseMatrix,
    pub a7: SparseMatrix,
    pub a8: SparseMatrix,
    pub a9: SparseMatrix,
    pub m: SparseMatrix,
    pub b1: Vec<f64>,
    pub b2: Vec<f64>,
    pub elements: Vec<ElementBlocks>,
    pub tau: Stabilization,
}

impl SystemMatrices {
    /// Named global matrices, for dumps and comparisons.
    pub fn named(&self) -> [(&'static str, &SparseMatrix); 10] {
        [
            ("A1", &self.a1),
            ("A2", &self.a2),
            ("A3", &self.a3),
            ("A4", &self.a4),
            ("A5", &self.a5),
            ("A6", &self.a6),
            ("A7", &self.a7),
            ("A8", &self.a8),
            ("A9", &self.a9),
            ("M", &self.m),
        ]
    }
}

pub fn assemble_system(disc: &Discretization, tau: &Stabilization) -> Result<SystemMatrices, AssemblyError> {
    instrument::record_system_assembly();
    let mesh = &disc.mesh;
    let layout = &disc.layout;
    let ne = mesh.num_elements();
    if tau.len() != ne {
        return Err(AssemblyError::InconsistentLayout { expected: ne, got: tau.len() });
    }
    if let Some(element) = tau.first_invalid() {
        return Err(AssemblyError::InvalidStabilization { element });
    }
    let k = disc.degree();
    let nk = layout.nk();
    let nk1 = layout.nk1();
    let nf = layout.nf();
    let scalar = &disc.reference.scalar;
    let enriched = &disc.reference.enriched;
    let edge = &disc.reference.edge;

    let rule = triangle_quadrature(assembly_exactness(k))?;
    let erule = edge_quadrature(edge_exactness(k))?;
    let phi_tab: Vec<Vec<f64>> = rule.points.iter().map(|p| scalar.eval(*p)).collect();
    let dphi_tab: Vec<Vec<[f64; 2]>> = rule.points.iter().map(|p| scalar.grad(*p)).collect();
    let chi_tab: Vec<Vec<f64>> = rule.points.iter().map(|p| enriched.eval(*p)).collect();
    let dchi_tab: Vec<Vec<[f64; 2]>> = rule.points.iter().map(|p| enriched.grad(*p)).collect();

    let mut elements = Vec::with_capacity(ne);
    for e in 0..ne {
        let geo = mesh.geometry(e);
        let mut m = DMatrix::zeros(nk, nk);
        let mut a1 = DMatrix::zeros(nk1, nk1);
        let mut a2 = DMatrix::zeros(nk1, 2 * nk);
        let mut a4 = DMatrix::zeros(2 * nk, nk);
        let mut a9 = DMatrix::zeros(nk, nk1);
        let mut b1 = DVector::zeros(nk1);
        let mut b2 = DVector::zeros(nk);
        for q in 0..rule.points.len() {
            let w = rule.weights[q] * geo.det;
            let phi = &phi_tab[q];
            let chi = &chi_tab[q];
            let dphi: Vec<[f64; 2]> = dphi_tab[q].iter().map(|g| geo.physical_gradient(*g)).collect();
            let dchi: Vec<[f64; 2]> = dchi_tab[q].iter().map(|g| geo.physical_gradient(*g)).collect();
            for i in 0..nk {
                b2[i] += w * phi[i];
                for j in 0..nk {
                    m[(i, j)] += w * phi[i] * phi[j];
                    for c in 0..2 {
                        a4[(c * nk + i, j)] += w * phi[j] * dphi[i][c];
                    }
                }
                for j in 0..nk1 {
                    a9[(i, j)] += w * chi[j] * phi[i];
                }
            }
            for i in 0..nk1 {
                b1[i] += w * chi[i];
                for j in 0..nk1 {
                    a1[(i, j)] += w * (dchi[i][0] * dchi[j][0] + dchi[i][1] * dchi[j][1]);
                }
                for j in 0..nk {
                    for c in 0..2 {
                        a2[(i, c * nk + j)] += w * phi[j] * dchi[i][c];
                    }
                }
            }
        }
        let mut a3 = DMatrix::zeros(2 * nk, 2 * nk);
        a3.view_mut((0, 0), (nk, nk)).copy_from(&m);
        a3.view_mut((nk, nk), (nk, nk)).copy_from(&m);

        let mut a6 = DMatrix::zeros(nk, nk);
        let faces = mesh.element_faces(e);
        let face_blocks: Vec<FaceBlocks> = faces
            .iter()
            .enumerate()
            .map(|(l, &f)| {
                let t = tau.on(e, l);
                let n = mesh.outward_normal(f, e);
                let mut a5 = DMatrix::zeros(2 * nk, nf);
                let mut a7 = DMatrix::zeros(nk, nf);
                let mut a8 = DMatrix::zeros(nf, nf);
                let mut mu = vec![0.0; nf];
                for (x, s, w) in face_quadrature(mesh, f, &erule) {
                    let phi = scalar.eval(geo.to_reference(x));
                    edge.eval_into(s, &mut mu);
                    for i in 0..nk {
                        for j in 0..nk {
                            a6[(i, j)] += w * t * phi[j] * phi[i];
                        }
                        for (mm, &mu_m) in mu.iter().enumerate() {
                            a5[(i, mm)] += w * mu_m * phi[i] * n[0];
                            a5[(nk + i, mm)] += w * mu_m * phi[i] * n[1];
                            a7[(i, mm)] += w * t * mu_m * phi[i];
                        }
                    }
                    for i in 0..nf {
                        for j in 0..nf {
                            a8[(i, j)] += w * t * mu[j] * mu[i];
                        }
                    }
                }
                FaceBlocks { face: f, a5, a7, a8 }
            })
            .collect();
        let faces: [FaceBlocks; 3] = face_blocks.try_into().expect("three faces");
        elements.push(ElementBlocks { a1, a2, a3, a4, a6, a9, m, b1, b2, faces });
    }

    Ok(globalize(layout, elements, tau.clone()))
}

fn scatter(b: &mut TripletBuilder, block: &DMatrix<f64>, rows: impl Fn(usize) -> usize, cols: impl Fn(usize) -> usize) {
    for i in 0..block.nrows() {
        for j in 0..block.ncols() {
            b.push(rows(i), cols(j), block[(i, j)]);
        }
    }
}

fn globalize(layout: &DofLayout, elements: Vec<ElementBlocks>, tau: Stabilization) -> SystemMatrices {
    let (n1, n2, n3, n4) = (layout.n1(), layout.n2(), layout.n3(), layout.n4());
    let nk = layout.nk();
    let nk1 = layout.nk1();
    let nf = layout.nf();
    let mut t: [TripletBuilder; 10] = Default::default();
    let mut b1 = vec![0.0; n3];
    let mut b2 = vec![0.0; n2];
    for (e, blk) in elements.iter().enumerate() {
        let v0 = 2 * nk * e;
        let w0 = nk * e;
        let z0 = nk1 * e;
        scatter(&mut t[0], &blk.a1, |i| z0 + i, |j| z0 + j);
        scatter(&mut t[1], &blk.a2, |i| z0 + i, |j| v0 + j);
        scatter(&mut t[2], &blk.a3, |i| v0 + i, |j| v0 + j);
        scatter(&mut t[3], &blk.a4, |i| v0 + i, |j| w0 + j);
        scatter(&mut t[5], &blk.a6, |i| w0 + i, |j| w0 + j);
        scatter(&mut t[8], &blk.a9, |i| w0 + i, |j| z0 + j);
        scatter(&mut t[9], &blk.m, |i| w0 + i, |j| w0 + j);
        for i in 0..nk1 {
            b1[z0 + i] = blk.b1[i];
        }
        for i in 0..nk {
            b2[w0 + i] = blk.b2[i];
        }
        for fb in &blk.faces {
            let Some(slot) = layout.trace_face(fb.face) else { continue };
            let m0 = slot * nf;
            scatter(&mut t[4], &fb.a5, |i| v0 + i, |j| m0 + j);
            scatter(&mut t[6], &fb.a7, |i| w0 + i, |j| m0 + j);
            scatter(&mut t[7], &fb.a8, |i| m0 + i, |j| m0 + j);
        }
    }
    let [t1, t2, t3, t4, t5, t6, t7, t8, t9, tm] = t;
    SystemMatrices {
        a1: t1.build(n3, n3),
        a2: t2.build(n3, n1),
        a3: t3.build(n1, n1),
        a4: t4.build(n1, n2),
        a5: t5.build(n1, n4),
        a6: t6.build(n2, n2),
        a7: t7.build(n2, n4),
        a8: t8.build(n4, n4),
        a9: t9.build(n2, n3),
        m: tm.build(n2, n2),
        b1,
        b2,
        elements,
        tau,
    }
}

/// Element-local postprocessing operators: `gamma_K = B11_K alpha_K + B12_K beta_K`.
#[derive(Debug, Clone)]
pub struct PostprocessBlocks {
    /// `nk1 x 2nk` per element.
    pub b11: Vec<DMatrix<f64>>,
    /// `nk1 x nk` per element.
    pub b12: Vec<DMatrix<f64>>,
    /// Row mapping `(alpha_K, beta_K)` to the Lagrange multiplier, `1 x 3nk` per element.
    pub multiplier: Vec<DMatrix<f64>>,
    /// Block-diagonal global forms of `b11` and `b12`.
    pub b11_global: SparseMatrix,
    pub b12_global: SparseMatrix,
}

/// Solves the bordered system `[[A1, b1^T], [b1, 0]] X = [[-A2, 0], [0, b2]]`
/// on every element and keeps the `gamma` rows.
pub fn build_postprocessing_blocks(
    sys: &SystemMatrices,
    layout: &DofLayout,
) -> Result<PostprocessBlocks, AssemblyError> {
    instrument::record_postprocessing_build();
    let nk = layout.nk();
    let nk1 = layout.nk1();
    let mut b11 = Vec::with_capacity(sys.elements.len());
    let mut b12 = Vec::with_capacity(sys.elements.len());
    let mut multiplier = Vec::with_capacity(sys.elements.len());
    let mut t11 = TripletBuilder::new();
    let mut t12 = TripletBuilder::new();
    for (e, blk) in sys.elements.iter().enumerate() {
        let n = nk1 + 1;
        let mut s = DMatrix::zeros(n, n);
        s.view_mut((0, 0), (nk1, nk1)).copy_from(&blk.a1);
        for i in 0..nk1 {
            s[(i, nk1)] = blk.b1[i];
            s[(nk1, i)] = blk.b1[i];
        }
        let mut rhs = DMatrix::zeros(n, 3 * nk);
        rhs.view_mut((0, 0), (nk1, 2 * nk)).copy_from(&(-&blk.a2));
        for j in 0..nk {
            rhs[(nk1, 2 * nk + j)] = blk.b2[j];
        }
        let x = s.clone().lu().solve(&rhs).ok_or(AssemblyError::SingularPostprocessing { element: e })?;
        let residual = (&s * &x - &rhs).amax();
        let scale = rhs.amax().max(f64::MIN_POSITIVE);
        if !residual.is_finite() || residual > 1e-10 * scale {
            return Err(AssemblyError::SingularPostprocessing { element: e });
        }
        let p11 = x.view((0, 0), (nk1, 2 * nk)).into_owned();
        let p12 = x.view((0, 2 * nk), (nk1, nk)).into_owned();
        scatter(&mut t11, &p11, |i| layout.z_dof(e, i), |j| 2 * nk * e + j);
        scatter(&mut t12, &p12, |i| layout.z_dof(e, i), |j| layout.w_dof(e, j));
        b11.push(p11);
        b12.push(p12);
        multiplier.push(x.view((nk1, 0), (1, 3 * nk)).into_owned());
    }
    Ok(PostprocessBlocks {
        b11,
        b12,
        multiplier,
        b11_global: t11.build(layout.n3(), layout.n1()),
        b12_global: t12.build(layout.n3(), layout.n2()),
    })
}

impl PostprocessBlocks {
    /// `gamma = B11 alpha + B12 beta`
    pub fn apply(&self, alpha: &[f64], beta: &[f64]) -> Vec<f64> {
        let mut gamma = self.b11_global.mul(alpha);
        self.b12_global.mul_add(beta, 1.0, &mut gamma);
        gamma
    }

    /// Lagrange multiplier on element `e` for local data `(alpha_K, beta_K)`.
    pub fn local_multiplier(&self, e: usize, alpha_k: &[f64], beta_k: &[f64]) -> f64 {
        let row = &self.multiplier[e];
        alpha_k.iter().chain(beta_k).enumerate().map(|(j, v)| row[(0, j)] * v).sum()
    }
}

/// `A9 * [F(gamma_1), ..., F(gamma_N3)]^T`
pub fn nonlinear_product(
    sys: &SystemMatrices,
    f: impl Fn(f64) -> f64,
    gamma: &[f64],
) -> Result<Vec<f64>, AssemblyError> {
    let values = gamma
        .iter()
        .enumerate()
        .map(|(node, &g)| {
            let v = f(g);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(AssemblyError::NonFinite { node })
            }
        })
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(sys.a9.mul(&values))
}

/// Element blocks of `A9 diag(d) B11` and `A9 diag(d) B12` for nodal weights
/// `d` on element `e`.
pub fn weighted_element_blocks(
    sys: &SystemMatrices,
    post: &PostprocessBlocks,
    e: usize,
    d: &[f64],
) -> (DMatrix<f64>, DMatrix<f64>) {
    let mut a9d = sys.elements[e].a9.clone();
    for (j, &dj) in d.iter().enumerate() {
        a9d.column_mut(j).scale_mut(dj);
    }
    (&a9d * &post.b11[e], &a9d * &post.b12[e])
}

/// Global `(A10, A11)` for nodal derivative values `d` (length N3).
pub fn weighted_products(
    sys: &SystemMatrices,
    post: &PostprocessBlocks,
    layout: &DofLayout,
    d: &[f64],
) -> (SparseMatrix, SparseMatrix) {
    let nk = layout.nk();
    let nk1 = layout.nk1();
    let mut t10 = TripletBuilder::new();
    let mut t11 = TripletBuilder::new();
    for e in 0..sys.elements.len() {
        let (a10, a11) = weighted_element_blocks(sys, post, e, &d[e * nk1..(e + 1) * nk1]);
        scatter(&mut t10, &a10, |i| layout.w_dof(e, i), |j| 2 * nk * e + j);
        scatter(&mut t11, &a11, |i| layout.w_dof(e, i), |j| layout.w_dof(e, j));
    }
    (t10.build(layout.n2(), layout.n1()), t11.build(layout.n2(), layout.n2()))
}

/// `A10 = A9 diag(F'(gamma)) B11` and `A11 = A9 diag(F'(gamma)) B12` with
/// `gamma = B11 alpha + B12 beta`.
pub fn jacobian_blocks(
    sys: &SystemMatrices,
    post: &PostprocessBlocks,
    layout: &DofLayout,
    df: impl Fn(f64) -> f64,
    alpha: &[f64],
    beta: &[f64],
) -> Result<(SparseMatrix, SparseMatrix), AssemblyError> {
    let gamma = post.apply(alpha, beta);
    let d = gamma
        .iter()
        .enumerate()
        .map(|(node, &g)| {
            let v = df(g);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(AssemblyError::NonFinite { node })
            }
        })
        .collect::<Result<Vec<f64>, _>>()?;
    Ok(weighted_products(sys, post, layout, &d))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::felib::BoundaryCondition;
    use crate::mesh::Mesh;
    use crate::projections::interpolate;

    fn setup(n: usize, k: usize) -> (Discretization, SystemMatrices, PostprocessBlocks) {
        let disc = Discretization::new(Mesh::structured_square(n).unwrap(), k, BoundaryCondition::Dirichlet).unwrap();
        let tau = Stabilization::uniform(&disc.mesh, 1.0);
        let sys = assemble_system(&disc, &tau).unwrap();
        let post = build_postprocessing_blocks(&sys, &disc.layout).unwrap();
        (disc, sys, post)
    }

    #[test]
    fn k0_reference_triangle() {
        let mesh = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap();
        let disc = Discretization::new(mesh, 0, BoundaryCondition::Dirichlet).unwrap();
        let sys = assemble_system(&disc, &Stabilization::uniform(&disc.mesh, 1.0)).unwrap();
        assert!((sys.m.get(0, 0) - 0.5).abs() < 1e-15);
        assert_eq!(sys.a4.nnz(), 0);
    }

    #[test]
    fn k1_flux_mass_closed_form() {
        let mesh = Mesh::new(vec![[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]], vec![[0, 1, 2]]).unwrap();
        let disc = Discretization::new(mesh, 1, BoundaryCondition::Dirichlet).unwrap();
        let sys = assemble_system(&disc, &Stabilization::uniform(&disc.mesh, 1.0)).unwrap();
        let a3 = sys.a3.to_dense();
        for r in 0..6 {
            for c in 0..6 {
                let expect = if r / 3 != c / 3 {
                    0.0
                } else if r == c {
                    0.5 / 12.0 * 2.0
                } else {
                    0.5 / 12.0
                };
                assert!((a3[(r, c)] - expect).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn symmetric_matrices() {
        let (_, sys, _) = setup(3, 2);
        for m in [&sys.a1, &sys.a3, &sys.a6, &sys.a8, &sys.m] {
            assert!(m.is_symmetric(1e-12));
        }
    }

    #[test]
    fn mass_row_sums_give_areas() {
        let (disc, sys, _) = setup(3, 1);
        let ones = vec![1.0; disc.layout.n2()];
        let sums = sys.m.mul(&ones);
        let total: f64 = sums.iter().sum();
        assert!((total - 1.0).abs() < 1e-13);
        let nk = disc.layout.nk();
        for e in 0..disc.mesh.num_elements() {
            let area: f64 = sums[e * nk..(e + 1) * nk].iter().sum();
            assert!((area - disc.mesh.geometry(e).area()).abs() < 1e-15);
        }
    }

    #[test]
    fn a9_transpose_of_one_is_b2() {
        for k in 0..=2 {
            let (disc, sys, _) = setup(2, k);
            let one = interpolate(&disc, &|_| 1.0);
            let prod = sys.a9.mul(&one);
            for (p, b) in prod.iter().zip(&sys.b2) {
                assert!((p - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn nonlinear_product_cases() {
        let (disc, sys, _) = setup(2, 1);
        let gamma: Vec<f64> = (0..disc.layout.n3()).map(|i| (i as f64 * 0.37).sin()).collect();
        assert!(nonlinear_product(&sys, |_| 0.0, &gamma).unwrap().iter().all(|v| *v == 0.0));
        let ones = nonlinear_product(&sys, |_| 1.0, &gamma).unwrap();
        for (p, b) in ones.iter().zip(&sys.b2) {
            assert!((p - b).abs() < 1e-15);
        }
        let one = interpolate(&disc, &|_| 1.0);
        let ac = nonlinear_product(&sys, |u| u * u * u - u, &one).unwrap();
        assert!(ac.iter().all(|v| *v == 0.0));
        let bad = nonlinear_product(&sys, |u| if u > 0.99 { f64::NAN } else { u }, &one);
        assert_eq!(bad.unwrap_err(), AssemblyError::NonFinite { node: 0 });
    }

    #[test]
    fn linear_nonlinearity_jacobian() {
        let (disc, sys, post) = setup(2, 1);
        let alpha: Vec<f64> = (0..disc.layout.n1()).map(|i| (i as f64).cos()).collect();
        let beta: Vec<f64> = (0..disc.layout.n2()).map(|i| (i as f64 * 0.5).sin()).collect();
        let (a10, a11) = jacobian_blocks(&sys, &post, &disc.layout, |_| 2.5, &alpha, &beta).unwrap();
        let x: Vec<f64> = (0..disc.layout.n1()).map(|i| 1.0 / (1.0 + i as f64)).collect();
        let direct = sys.a9.mul(&post.b11_global.mul(&x));
        for (a, b) in a10.mul(&x).iter().zip(&direct) {
            assert!((a - 2.5 * b).abs() < 1e-13);
        }
        let y: Vec<f64> = (0..disc.layout.n2()).map(|i| 1.0 / (2.0 + i as f64)).collect();
        let direct = sys.a9.mul(&post.b12_global.mul(&y));
        for (a, b) in a11.mul(&y).iter().zip(&direct) {
            assert!((a - 2.5 * b).abs() < 1e-13);
        }
        let (z10, z11) = jacobian_blocks(&sys, &post, &disc.layout, |_| 0.0, &alpha, &beta).unwrap();
        assert_eq!((z10.nnz(), z11.nnz()), (0, 0));
    }

    #[test]
    fn constant_postprocesses_to_constant() {
        let (disc, _, post) = setup(2, 2);
        let alpha = vec![0.0; disc.layout.n1()];
        let beta = vec![0.75; disc.layout.n2()];
        let gamma = post.apply(&alpha, &beta);
        assert!(gamma.iter().all(|g| (g - 0.75).abs() < 1e-13));
        let nk = disc.layout.nk();
        for e in 0..disc.mesh.num_elements() {
            let eta = post.local_multiplier(e, &alpha[2 * nk * e..2 * nk * (e + 1)], &beta[nk * e..nk * (e + 1)]);
            assert!(eta.abs() < 1e-12);
        }
    }

    #[test]
    fn trace_blocks_skip_dirichlet_boundary() {
        let (disc, sys, _) = setup(1, 1);
        assert_eq!(sys.a5.ncols(), 2);
        assert_eq!(sys.a8.nrows(), 2);
        assert_eq!(disc.layout.n4(), 2);
    }
}
