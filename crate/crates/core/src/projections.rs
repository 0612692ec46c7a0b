//! Projections and interpolation into the discrete spaces: the HDG
//! projection `(Pi_V, Pi_W)`, elementwise and facewise L2 projections, and
//! nodal interpolation into `Z_h`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::discretization::{face_quadrature, Discretization, Stabilization};
use crate::felib::{edge_quadrature, error_exactness, triangle_quadrature, EdgeBasis, FeError, LagrangeBasis};
use crate::mesh::{Mesh, Point};

#[derive(Debug, Error, PartialEq)]
pub enum ProjectionError {
    #[error("stabilization on element {element} must be nonnegative with a positive maximum")]
    InvalidStabilization { element: usize },
    #[error("local projection system on element {element} is singular")]
    SingularLocalSystem { element: usize },
    #[error(transparent)]
    Fe(#[from] FeError),
}

/// HDG projection of `(q, u)` into `V_h x W_h`, element by element.
///
/// On each element the projection matches the volume moments of `q` and `u`
/// against `P^{k-1}` and the face moments of `q.n + tau u` against `P^k(e)`
/// on every face. For `k = 0` only the face conditions remain.
pub fn hdg_project(
    disc: &Discretization,
    q: &dyn Fn(Point) -> Point,
    u: &dyn Fn(Point) -> f64,
    tau: &Stabilization,
) -> Result<(Vec<f64>, Vec<f64>), ProjectionError> {
    if let Some(element) = tau.first_invalid() {
        return Err(ProjectionError::InvalidStabilization { element });
    }
    let k = disc.degree();
    let mesh = &disc.mesh;
    let layout = &disc.layout;
    let nk = layout.nk();
    let basis = &disc.reference.scalar;
    let lower = if k > 0 { Some(LagrangeBasis::new(k - 1)?) } else { None };
    let nlow = lower.as_ref().map_or(0, |b| b.dim());
    let edge = EdgeBasis::new(k);
    let vol_rule = triangle_quadrature(error_exactness(k))?;
    let edge_rule = edge_quadrature(error_exactness(k))?;

    let mut alpha = vec![0.0; layout.n1()];
    let mut beta = vec![0.0; layout.n2()];
    let n = 3 * nk;
    for e in 0..mesh.num_elements() {
        let geo = mesh.geometry(e);
        let mut mat = DMatrix::<f64>::zeros(n, n);
        let mut rhs = DVector::<f64>::zeros(n);

        if let Some(lower) = &lower {
            for (xi, w) in vol_rule.points.iter().zip(&vol_rule.weights) {
                let x = geo.to_physical(*xi);
                let wt = w * geo.det;
                let phi = basis.eval(*xi);
                let psi = lower.eval(*xi);
                let (qv, uv) = (q(x), u(x));
                for m in 0..nlow {
                    for i in 0..nk {
                        let v = wt * phi[i] * psi[m];
                        mat[(m, i)] += v;
                        mat[(nlow + m, nk + i)] += v;
                        mat[(2 * nlow + m, 2 * nk + i)] += v;
                    }
                    rhs[m] += wt * qv[0] * psi[m];
                    rhs[nlow + m] += wt * qv[1] * psi[m];
                    rhs[2 * nlow + m] += wt * uv * psi[m];
                }
            }
        }

        let faces = mesh.element_faces(e);
        let mut mu = vec![0.0; edge.dim()];
        for (l, &f) in faces.iter().enumerate() {
            let normal = mesh.outward_normal(f, e);
            let t = tau.on(e, l);
            let row0 = 3 * nlow + l * edge.dim();
            for (x, s, w) in face_quadrature(mesh, f, &edge_rule) {
                let phi = basis.eval(geo.to_reference(x));
                edge.eval_into(s, &mut mu);
                let (qv, uv) = (q(x), u(x));
                let data = qv[0] * normal[0] + qv[1] * normal[1] + t * uv;
                for (m, &mu_m) in mu.iter().enumerate() {
                    for i in 0..nk {
                        mat[(row0 + m, i)] += w * phi[i] * normal[0] * mu_m;
                        mat[(row0 + m, nk + i)] += w * phi[i] * normal[1] * mu_m;
                        mat[(row0 + m, 2 * nk + i)] += w * t * phi[i] * mu_m;
                    }
                    rhs[row0 + m] += w * data * mu_m;
                }
            }
        }

        let sol = mat.lu().solve(&rhs).ok_or(ProjectionError::SingularLocalSystem { element: e })?;
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(ProjectionError::SingularLocalSystem { element: e });
        }
        for i in 0..nk {
            alpha[layout.v_dof(e, 0, i)] = sol[i];
            alpha[layout.v_dof(e, 1, i)] = sol[nk + i];
            beta[layout.w_dof(e, i)] = sol[2 * nk + i];
        }
    }
    Ok((alpha, beta))
}

/// Elementwise L2 projection onto `P^degree`, coefficients in the nodal basis
/// of that degree numbered element by element.
pub fn l2_project_element(mesh: &Mesh, f: &dyn Fn(Point) -> f64, degree: usize) -> Result<Vec<f64>, FeError> {
    let basis = LagrangeBasis::new(degree)?;
    let dim = basis.dim();
    let rule = triangle_quadrature(2 * degree + 6)?;
    let tab: Vec<Vec<f64>> = rule.points.iter().map(|p| basis.eval(*p)).collect();
    let mut mass = DMatrix::<f64>::zeros(dim, dim);
    for (phi, w) in tab.iter().zip(&rule.weights) {
        for i in 0..dim {
            for j in 0..dim {
                mass[(i, j)] += w * phi[i] * phi[j];
            }
        }
    }
    // Reference mass matrix scales with det J on affine elements.
    let chol = mass.cholesky().ok_or(FeError::UnsupportedDegree(degree))?;
    let mut out = Vec::with_capacity(dim * mesh.num_elements());
    for e in 0..mesh.num_elements() {
        let geo = mesh.geometry(e);
        let mut rhs = DVector::<f64>::zeros(dim);
        for ((xi, phi), w) in rule.points.iter().zip(&tab).zip(&rule.weights) {
            let v = f(geo.to_physical(*xi)) * w;
            for i in 0..dim {
                rhs[i] += v * phi[i];
            }
        }
        out.extend(chol.solve(&rhs).iter());
    }
    Ok(out)
}

/// L2 projection onto `P^k` on every face, `k + 1` coefficients per face in
/// the edge Lagrange basis (face orientation as stored in the mesh).
pub fn l2_project_face(mesh: &Mesh, f: &dyn Fn(Point) -> f64, k: usize) -> Result<Vec<f64>, FeError> {
    let edge = EdgeBasis::new(k);
    let dim = edge.dim();
    let rule = edge_quadrature(2 * k + 6)?;
    let mut out = Vec::with_capacity(dim * mesh.num_faces());
    for face in 0..mesh.num_faces() {
        let mut mass = DMatrix::<f64>::zeros(dim, dim);
        let mut rhs = DVector::<f64>::zeros(dim);
        for (x, s, w) in face_quadrature(mesh, face, &rule) {
            let mu = edge.eval(s);
            let v = f(x);
            for i in 0..dim {
                rhs[i] += w * v * mu[i];
                for j in 0..dim {
                    mass[(i, j)] += w * mu[i] * mu[j];
                }
            }
        }
        let sol = mass.cholesky().ok_or(FeError::UnsupportedDegree(k))?.solve(&rhs);
        out.extend(sol.iter());
    }
    Ok(out)
}

/// Nodal interpolation `I_h` into `Z_h` at the `P^{k+1}` lattice nodes of each element.
pub fn interpolate(disc: &Discretization, f: &dyn Fn(Point) -> f64) -> Vec<f64> {
    let mesh = &disc.mesh;
    let nodes = disc.reference.enriched.nodes();
    let mut out = Vec::with_capacity(disc.layout.n3());
    for e in 0..mesh.num_elements() {
        let geo = mesh.geometry(e);
        out.extend(nodes.iter().map(|n| f(geo.to_physical(*n))));
    }
    out
}
