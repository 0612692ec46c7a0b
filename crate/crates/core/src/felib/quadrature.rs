use super::FeError;
use crate::mesh::Point;

pub const MAX_EXACTNESS: usize = 20;

/// Quadrature on the reference triangle `{x, y >= 0, x + y <= 1}`.
#[derive(Debug, Clone)]
pub struct QuadratureRule {
    pub points: Vec<Point>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

/// Quadrature on the unit interval `[0, 1]`.
#[derive(Debug, Clone)]
pub struct EdgeRule {
    pub points: Vec<f64>,
    pub weights: Vec<f64>,
    pub exactness: usize,
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        // Chebyshev-type initial guess, then Newton on P_n.
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, 0.0);
            for j in 0..n {
                let p2 = p1;
                p1 = p0;
                p0 = ((2 * j + 1) as f64 * z * p1 - j as f64 * p2) / (j + 1) as f64;
            }
            dp = n as f64 * (z * p0 - p1) / (z * z - 1.0);
            let dz = p0 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

pub fn edge_quadrature(exactness: usize) -> Result<EdgeRule, FeError> {
    if exactness > MAX_EXACTNESS {
        return Err(FeError::UnsupportedExactness(exactness));
    }
    let n = (exactness + 2) / 2;
    let (x, w) = gauss_legendre(n.max(1));
    Ok(EdgeRule {
        points: x.iter().map(|t| 0.5 * (t + 1.0)).collect(),
        weights: w.iter().map(|w| 0.5 * w).collect(),
        exactness,
    })
}

/// Centroid rule for degree <= 1, the symmetric three-point rule for degree 2,
/// collapsed Gauss-Legendre products above that.
pub fn triangle_quadrature(exactness: usize) -> Result<QuadratureRule, FeError> {
    match exactness {
        0 | 1 => Ok(QuadratureRule { points: vec![[1.0 / 3.0, 1.0 / 3.0]], weights: vec![0.5], exactness }),
        2 => Ok(QuadratureRule {
            points: vec![[1.0 / 6.0, 1.0 / 6.0], [2.0 / 3.0, 1.0 / 6.0], [1.0 / 6.0, 2.0 / 3.0]],
            weights: vec![1.0 / 6.0; 3],
            exactness,
        }),
        d if d <= MAX_EXACTNESS => {
            // (s, t) in the unit square maps to (s, t(1 - s)), Jacobian 1 - s:
            // degree d + 1 in s and d in t.
            let n = (d + 3) / 2;
            let (x, w) = gauss_legendre(n);
            let mut points = Vec::with_capacity(n * n);
            let mut weights = Vec::with_capacity(n * n);
            for (xs, ws) in x.iter().zip(&w) {
                let s = 0.5 * (xs + 1.0);
                for (xt, wt) in x.iter().zip(&w) {
                    let t = 0.5 * (xt + 1.0);
                    points.push([s, t * (1.0 - s)]);
                    weights.push(0.25 * ws * wt * (1.0 - s));
                }
            }
            Ok(QuadratureRule { points, weights, exactness })
        }
        d => Err(FeError::UnsupportedExactness(d)),
    }
}
