//! Independent reference computations shared by the integration tests.
//!
//! Nothing here calls the library's quadrature, basis or assembly code. Bases
//! are Lagrange polynomials in shifted physical monomials, volume integrals
//! use a collapsed tensor Gauss rule built from scratch, and normals come
//! straight from the vertex coordinates.

#![allow(dead_code)]

use ihdg::discretization::{Discretization, Stabilization};
use ihdg::felib::lattice_nodes;
use ihdg::mesh::LOCAL_EDGES;
use ihdg::Point;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect()
}

/// Gauss-Legendre nodes and weights on `[0, 1]` by Newton iteration on `P_n`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for i in 0..n {
        let mut t = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, t);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * t * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            dp = n as f64 * (t * p1 - p0) / (t * t - 1.0);
            let dt = p1 / dp;
            t -= dt;
            if dt.abs() < 1e-16 {
                break;
            }
        }
        x.push(0.5 * (1.0 - t));
        w.push(1.0 / ((1.0 - t * t) * dp * dp));
    }
    (x, w)
}

/// Collapsed `n x n` Gauss rule on the physical triangle `v`.
pub fn triangle_rule(v: [Point; 3], n: usize) -> Vec<(Point, f64)> {
    let (g, gw) = gauss_legendre(n);
    let det = ((v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1])).abs();
    let mut out = Vec::with_capacity(n * n);
    for (a, wa) in g.iter().zip(&gw) {
        for (b, wb) in g.iter().zip(&gw) {
            let (s, t) = (*a, b * (1.0 - a));
            let x = [
                v[0][0] + s * (v[1][0] - v[0][0]) + t * (v[2][0] - v[0][0]),
                v[0][1] + s * (v[1][1] - v[0][1]) + t * (v[2][1] - v[0][1]),
            ];
            out.push((x, wa * wb * (1.0 - a) * det));
        }
    }
    out
}

/// Gauss rule on segment `a -> b`: point, arc parameter in `[0, 1]`, weight.
pub fn segment_rule(a: Point, b: Point, n: usize) -> Vec<(Point, f64, f64)> {
    let (g, gw) = gauss_legendre(n);
    let len = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
    g.iter()
        .zip(&gw)
        .map(|(&s, &w)| ([a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1])], s, w * len))
        .collect()
}

/// Nodal basis of `P^p` on a physical triangle, nodes at the images of the
/// reference lattice, written in monomials of `(x - c) / h`.
pub struct PhysBasis {
    center: Point,
    scale: f64,
    exps: Vec<(i32, i32)>,
    coeffs: DMatrix<f64>,
}

impl PhysBasis {
    pub fn new(v: [Point; 3], p: usize) -> Self {
        let center = [(v[0][0] + v[1][0] + v[2][0]) / 3.0, (v[0][1] + v[1][1] + v[2][1]) / 3.0];
        let scale = (0..3)
            .map(|i| ((v[i][0] - v[(i + 1) % 3][0]).powi(2) + (v[i][1] - v[(i + 1) % 3][1]).powi(2)).sqrt())
            .fold(0.0, f64::max);
        let exps: Vec<(i32, i32)> = (0..=p as i32).flat_map(|d| (0..=d).map(move |b| (d - b, b))).collect();
        let nodes: Vec<Point> = lattice_nodes(p)
            .iter()
            .map(|r| {
                [
                    v[0][0] + r[0] * (v[1][0] - v[0][0]) + r[1] * (v[2][0] - v[0][0]),
                    v[0][1] + r[0] * (v[1][1] - v[0][1]) + r[1] * (v[2][1] - v[0][1]),
                ]
            })
            .collect();
        let n = exps.len();
        let mut vand = DMatrix::zeros(n, n);
        for (i, x) in nodes.iter().enumerate() {
            let (u, w) = ((x[0] - center[0]) / scale, (x[1] - center[1]) / scale);
            for (m, &(a, b)) in exps.iter().enumerate() {
                vand[(i, m)] = u.powi(a) * w.powi(b);
            }
        }
        let coeffs = vand.try_inverse().expect("unisolvent lattice");
        Self { center, scale, exps, coeffs }
    }

    pub fn dim(&self) -> usize {
        self.exps.len()
    }

    pub fn eval(&self, x: Point) -> Vec<f64> {
        let (u, w) = ((x[0] - self.center[0]) / self.scale, (x[1] - self.center[1]) / self.scale);
        let mono: Vec<f64> = self.exps.iter().map(|&(a, b)| u.powi(a) * w.powi(b)).collect();
        (0..self.dim()).map(|i| (0..self.dim()).map(|m| self.coeffs[(m, i)] * mono[m]).sum()).collect()
    }

    pub fn grad(&self, x: Point) -> Vec<Point> {
        let (u, w) = ((x[0] - self.center[0]) / self.scale, (x[1] - self.center[1]) / self.scale);
        let d = |e: i32, t: f64| if e == 0 { 0.0 } else { e as f64 * t.powi(e - 1) };
        let dm: Vec<Point> = self
            .exps
            .iter()
            .map(|&(a, b)| [d(a, u) * w.powi(b) / self.scale, u.powi(a) * d(b, w) / self.scale])
            .collect();
        (0..self.dim())
            .map(|i| {
                let mut g = [0.0; 2];
                for (m, dmm) in dm.iter().enumerate() {
                    g[0] += self.coeffs[(m, i)] * dmm[0];
                    g[1] += self.coeffs[(m, i)] * dmm[1];
                }
                g
            })
            .collect()
    }
}

/// Lagrange basis of `P^k` on `[0, 1]`: midpoint for `k = 0`, uniform otherwise.
pub fn edge_basis(k: usize, s: f64) -> Vec<f64> {
    let nodes: Vec<f64> = if k == 0 { vec![0.5] } else { (0..=k).map(|j| j as f64 / k as f64).collect() };
    (0..nodes.len())
        .map(|i| (0..nodes.len()).filter(|&j| j != i).map(|j| (s - nodes[j]) / (nodes[i] - nodes[j])).product())
        .collect()
}

/// Outward unit normal of local edge `l` of a counterclockwise triangle.
pub fn outward_normal(v: [Point; 3], l: usize) -> Point {
    let [i, j] = LOCAL_EDGES[l];
    let d = [v[j][0] - v[i][0], v[j][1] - v[i][1]];
    let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
    let n = [d[1] / len, -d[0] / len];
    let mid = [(v[i][0] + v[j][0]) / 2.0, (v[i][1] + v[j][1]) / 2.0];
    let opp = v[3 - i - j];
    assert!(n[0] * (mid[0] - opp[0]) + n[1] * (mid[1] - opp[1]) > 0.0);
    n
}

pub struct Dense {
    pub named: Vec<(&'static str, DMatrix<f64>)>,
    pub b1: DVector<f64>,
    pub b2: DVector<f64>,
}

impl Dense {
    pub fn get(&self, name: &str) -> &DMatrix<f64> {
        &self.named.iter().find(|(n, _)| *n == name).unwrap().1
    }
}

/// Every global matrix by direct quadrature over each element and face.
pub fn brute_force(disc: &Discretization, tau: &Stabilization) -> Dense {
    let mesh = &disc.mesh;
    let l = &disc.layout;
    let k = disc.degree();
    let (n1, n2, n3, n4) = (l.n1(), l.n2(), l.n3(), l.n4());
    let mut a1 = DMatrix::zeros(n3, n3);
    let mut a2 = DMatrix::zeros(n3, n1);
    let mut a3 = DMatrix::zeros(n1, n1);
    let mut a4 = DMatrix::zeros(n1, n2);
    let mut a5 = DMatrix::zeros(n1, n4);
    let mut a6 = DMatrix::zeros(n2, n2);
    let mut a7 = DMatrix::zeros(n2, n4);
    let mut a8 = DMatrix::zeros(n4, n4);
    let mut a9 = DMatrix::zeros(n2, n3);
    let mut m = DMatrix::zeros(n2, n2);
    let mut b1 = DVector::zeros(n3);
    let mut b2 = DVector::zeros(n2);
    for e in 0..mesh.num_elements() {
        let v = mesh.element_vertices(e);
        let phi_b = PhysBasis::new(v, k);
        let chi_b = PhysBasis::new(v, k + 1);
        let (nk, nk1) = (phi_b.dim(), chi_b.dim());
        let vd = |c: usize, i: usize| l.v_dof(e, c, i);
        for (x, w) in triangle_rule(v, 7) {
            let (phi, dphi) = (phi_b.eval(x), phi_b.grad(x));
            let (chi, dchi) = (chi_b.eval(x), chi_b.grad(x));
            for i in 0..nk {
                b2[l.w_dof(e, i)] += w * phi[i];
                for j in 0..nk {
                    m[(l.w_dof(e, i), l.w_dof(e, j))] += w * phi[i] * phi[j];
                    for c in 0..2 {
                        a3[(vd(c, i), vd(c, j))] += w * phi[i] * phi[j];
                        a4[(vd(c, i), l.w_dof(e, j))] += w * phi[j] * dphi[i][c];
                    }
                }
                for j in 0..nk1 {
                    a9[(l.w_dof(e, i), l.z_dof(e, j))] += w * chi[j] * phi[i];
                }
            }
            for i in 0..nk1 {
                b1[l.z_dof(e, i)] += w * chi[i];
                for j in 0..nk1 {
                    a1[(l.z_dof(e, i), l.z_dof(e, j))] += w * (dchi[i][0] * dchi[j][0] + dchi[i][1] * dchi[j][1]);
                }
                for j in 0..nk {
                    for c in 0..2 {
                        a2[(l.z_dof(e, i), vd(c, j))] += w * phi[j] * dchi[i][c];
                    }
                }
            }
        }
        for (lf, &f) in mesh.element_faces(e).iter().enumerate() {
            let t = tau.on(e, lf);
            let n = outward_normal(v, lf);
            let [a, b] = mesh.face_points(f);
            for (x, s, w) in segment_rule(a, b, 6) {
                let phi = phi_b.eval(x);
                let mu = edge_basis(k, s);
                for i in 0..nk {
                    for j in 0..nk {
                        a6[(l.w_dof(e, i), l.w_dof(e, j))] += w * t * phi[i] * phi[j];
                    }
                }
                for (jj, &mj) in mu.iter().enumerate() {
                    let Some(col) = l.m_dof(f, jj) else { continue };
                    for i in 0..nk {
                        for c in 0..2 {
                            a5[(vd(c, i), col)] += w * mj * phi[i] * n[c];
                        }
                        a7[(l.w_dof(e, i), col)] += w * t * mj * phi[i];
                    }
                    for (ii, &mi) in mu.iter().enumerate() {
                        let row = l.m_dof(f, ii).unwrap();
                        a8[(row, col)] += w * t * mi * mj;
                    }
                }
            }
        }
    }
    Dense {
        named: vec![
            ("A1", a1),
            ("A2", a2),
            ("A3", a3),
            ("A4", a4),
            ("A5", a5),
            ("A6", a6),
            ("A7", a7),
            ("A8", a8),
            ("A9", a9),
            ("M", m),
        ],
        b1,
        b2,
    }
}

/// Largest entrywise difference.
pub fn max_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    norm(&d) / norm(b).max(f64::MIN_POSITIVE)
}

/// `∫_K f` on element `e` with the oracle rule.
pub fn integrate(v: [Point; 3], f: impl Fn(Point) -> f64) -> f64 {
    triangle_rule(v, 8).into_iter().map(|(x, w)| w * f(x)).sum()
}

/// `sum_i c_i phi_i(x)` for the oracle basis.
pub fn eval_local(basis: &PhysBasis, coeffs: &[f64], x: Point) -> f64 {
    basis.eval(x).iter().zip(coeffs).map(|(p, c)| p * c).sum()
}

/// Random polynomial of total degree `p` and its gradient.
#[derive(Debug, Clone)]
pub struct Poly {
    terms: Vec<(i32, i32, f64)>,
}

impl Poly {
    pub fn random(rng: &mut ChaCha8Rng, p: usize) -> Self {
        let terms = (0..=p as i32)
            .flat_map(|d| (0..=d).map(move |b| (d - b, b)))
            .map(|(a, b)| (a, b, rng.random_range(-1.0..1.0)))
            .collect();
        Self { terms }
    }

    pub fn eval(&self, x: Point) -> f64 {
        self.terms.iter().map(|&(a, b, c)| c * x[0].powi(a) * x[1].powi(b)).sum()
    }

    pub fn grad(&self, x: Point) -> Point {
        let mut g = [0.0; 2];
        for &(a, b, c) in &self.terms {
            if a > 0 {
                g[0] += c * a as f64 * x[0].powi(a - 1) * x[1].powi(b);
            }
            if b > 0 {
                g[1] += c * b as f64 * x[0].powi(a) * x[1].powi(b - 1);
            }
        }
        g
    }
}

/// Physical lattice nodes of `P^p` on triangle `v`.
pub fn physical_nodes(v: [Point; 3], p: usize) -> Vec<Point> {
    lattice_nodes(p)
        .iter()
        .map(|r| {
            [
                v[0][0] + r[0] * (v[1][0] - v[0][0]) + r[1] * (v[2][0] - v[0][0]),
                v[0][1] + r[0] * (v[1][1] - v[0][1]) + r[1] * (v[2][1] - v[0][1]),
            ]
        })
        .collect()
}
