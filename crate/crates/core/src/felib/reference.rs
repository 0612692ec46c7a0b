use nalgebra::DMatrix;

use super::FeError;
use crate::mesh::Point;

pub const MAX_DEGREE: usize = 3;

/// `dim P^p` on a triangle.
pub fn dim_pk(p: usize) -> usize {
    (p + 1) * (p + 2) / 2
}

/// Uniform lattice of `P^p` nodes on the reference triangle; the centroid for `p = 0`.
pub fn lattice_nodes(p: usize) -> Vec<Point> {
    if p == 0 {
        return vec![[1.0 / 3.0, 1.0 / 3.0]];
    }
    let mut nodes = Vec::with_capacity(dim_pk(p));
    for j in 0..=p {
        for i in 0..=p - j {
            nodes.push([i as f64 / p as f64, j as f64 / p as f64]);
        }
    }
    nodes
}

/// Nodal Lagrange basis of `P^p` on the reference triangle, stored as
/// monomial coefficients.
#[derive(Debug, Clone)]
pub struct LagrangeBasis {
    degree: usize,
    nodes: Vec<Point>,
    exponents: Vec<(i32, i32)>,
    /// `coeffs[m * dim + i]` is the coefficient of monomial `m` in basis function `i`.
    coeffs: Vec<f64>,
}

impl LagrangeBasis {
    pub fn new(degree: usize) -> Result<Self, FeError> {
        if degree > MAX_DEGREE + 1 {
            return Err(FeError::UnsupportedDegree(degree));
        }
        let nodes = lattice_nodes(degree);
        let exponents: Vec<(i32, i32)> =
            (0..=degree as i32).flat_map(|t| (0..=t).map(move |b| (t - b, b))).collect();
        let dim = nodes.len();
        let vandermonde =
            DMatrix::from_fn(dim, dim, |n, m| nodes[n][0].powi(exponents[m].0) * nodes[n][1].powi(exponents[m].1));
        let inv = vandermonde.try_inverse().ok_or(FeError::UnsupportedDegree(degree))?;
        let coeffs = (0..dim * dim).map(|idx| inv[(idx / dim, idx % dim)]).collect();
        Ok(Self { degree, nodes, exponents, coeffs })
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn eval_into(&self, xi: Point, out: &mut [f64]) {
        let dim = self.dim();
        out.iter_mut().for_each(|v| *v = 0.0);
        for (m, &(a, b)) in self.exponents.iter().enumerate() {
            let mono = xi[0].powi(a) * xi[1].powi(b);
            let row = &self.coeffs[m * dim..(m + 1) * dim];
            for (o, c) in out.iter_mut().zip(row) {
                *o += c * mono;
            }
        }
    }

    pub fn eval(&self, xi: Point) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(xi, &mut out);
        out
    }

    /// Reference-coordinate gradients of every basis function.
    pub fn grad(&self, xi: Point) -> Vec<Point> {
        let dim = self.dim();
        let mut out = vec![[0.0; 2]; dim];
        for (m, &(a, b)) in self.exponents.iter().enumerate() {
            let dx = if a > 0 { a as f64 * xi[0].powi(a - 1) * xi[1].powi(b) } else { 0.0 };
            let dy = if b > 0 { b as f64 * xi[0].powi(a) * xi[1].powi(b - 1) } else { 0.0 };
            let row = &self.coeffs[m * dim..(m + 1) * dim];
            for (o, c) in out.iter_mut().zip(row) {
                o[0] += c * dx;
                o[1] += c * dy;
            }
        }
        out
    }
}

/// Lagrange basis of `P^k` on the unit interval with uniform nodes
/// (the midpoint for `k = 0`).
#[derive(Debug, Clone)]
pub struct EdgeBasis {
    nodes: Vec<f64>,
}

impl EdgeBasis {
    pub fn new(degree: usize) -> Self {
        let nodes = if degree == 0 { vec![0.5] } else { (0..=degree).map(|j| j as f64 / degree as f64).collect() };
        Self { nodes }
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn eval_into(&self, s: f64, out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self
                .nodes
                .iter()
                .enumerate()
                .filter(|&(j, _)| j != i)
                .map(|(_, &sj)| (s - sj) / (self.nodes[i] - sj))
                .product();
        }
    }

    pub fn eval(&self, s: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.eval_into(s, &mut out);
        out
    }
}

/// Bases for one polynomial degree `k`: `P^k` for the flux and scalar
/// spaces, `P^{k+1}` for the postprocessed scalar, and `P^k` on edges for
/// the trace.
#[derive(Debug, Clone)]
pub struct ReferenceElement {
    pub degree: usize,
    pub scalar: LagrangeBasis,
    pub enriched: LagrangeBasis,
    pub edge: EdgeBasis,
}

impl ReferenceElement {
    pub fn new(k: usize) -> Result<Self, FeError> {
        if k > MAX_DEGREE {
            return Err(FeError::UnsupportedDegree(k));
        }
        Ok(Self { degree: k, scalar: LagrangeBasis::new(k)?, enriched: LagrangeBasis::new(k + 1)?, edge: EdgeBasis::new(k) })
    }
}
