mod common;

use common::{eval_local, PhysBasis};
use ihdg::assembly::{assemble_system, build_postprocessing_blocks, PostprocessBlocks};
use ihdg::felib::dim_pk;
use ihdg::projections::{interpolate, l2_project_element};
use ihdg::{BoundaryCondition, Discretization, Mesh, Stabilization};
use rand::Rng;

fn setup(mesh: Mesh, k: usize) -> (Discretization, PostprocessBlocks) {
    let disc = Discretization::new(mesh, k, BoundaryCondition::Dirichlet).unwrap();
    let sys = assemble_system(&disc, &Stabilization::uniform(&disc.mesh, 1.0)).unwrap();
    let post = build_postprocessing_blocks(&sys, &disc.layout).unwrap();
    (disc, post)
}

#[test]
fn element_means_are_preserved() {
    let mut rng = common::rng(11);
    for k in 0..3 {
        let (disc, post) = setup(Mesh::structured_square(3).unwrap(), k);
        let l = &disc.layout;
        for _ in 0..10 {
            let alpha = common::random_vec(&mut rng, l.n1(), 5.0);
            let beta = common::random_vec(&mut rng, l.n2(), 5.0);
            let gamma = post.apply(&alpha, &beta);
            for e in 0..disc.mesh.num_elements() {
                let v = disc.mesh.element_vertices(e);
                let (pk, pk1) = (PhysBasis::new(v, k), PhysBasis::new(v, k + 1));
                let zk = &gamma[l.z_dof(e, 0)..l.z_dof(e, 0) + l.nk1()];
                let wk = &beta[l.w_dof(e, 0)..l.w_dof(e, 0) + l.nk()];
                let mean_gamma = common::integrate(v, |x| eval_local(&pk1, zk, x));
                let mean_beta = common::integrate(v, |x| eval_local(&pk, wk, x));
                assert!((mean_gamma - mean_beta).abs() <= 1e-10, "k={k} e={e}");
            }
        }
    }
}

#[test]
fn enriched_polynomials_are_reproduced() {
    let mut rng = common::rng(12);
    for k in 0..3 {
        for n in [1, 3] {
            let (disc, post) = setup(Mesh::structured_square(n).unwrap(), k);
            let l = &disc.layout;
            let u = common::Poly::random(&mut rng, k + 1);
            let beta = l2_project_element(&disc.mesh, &|x| u.eval(x), k).unwrap();
            let qx = l2_project_element(&disc.mesh, &|x| -u.grad(x)[0], k).unwrap();
            let qy = l2_project_element(&disc.mesh, &|x| -u.grad(x)[1], k).unwrap();
            let mut alpha = vec![0.0; l.n1()];
            for e in 0..disc.mesh.num_elements() {
                for i in 0..l.nk() {
                    alpha[l.v_dof(e, 0, i)] = qx[e * l.nk() + i];
                    alpha[l.v_dof(e, 1, i)] = qy[e * l.nk() + i];
                }
            }
            let gamma = post.apply(&alpha, &beta);
            let exact = interpolate(&disc, &|x| u.eval(x));
            let err = gamma.iter().zip(&exact).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            assert!(err <= 1e-10, "k={k} n={n}: {err:e}");
        }
    }
}

fn random_triangle(rng: &mut impl Rng) -> [[f64; 2]; 3] {
    loop {
        let mut v = [[0.0f64; 2]; 3];
        for p in &mut v {
            *p = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
        }
        let det = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
        if det.abs() > 0.3 {
            if det < 0.0 {
                v.swap(1, 2);
            }
            return v;
        }
    }
}

/// With the multiplier eliminated the postprocessing is: `grad gamma + q`
/// orthogonal to every gradient in `P^{k+1}`, plus the mean condition.
#[test]
fn multiplier_system_matches_complement_formulation() {
    let mut rng = common::rng(13);
    for case in 0..200 {
        let k = case % 3;
        let v = random_triangle(&mut rng);
        let (_, post) = setup(Mesh::new(v.to_vec(), vec![[0, 1, 2]]).unwrap(), k);
        let nk = dim_pk(k);
        let alpha = common::random_vec(&mut rng, 2 * nk, 3.0);
        let beta = common::random_vec(&mut rng, nk, 3.0);
        let gamma = post.apply(&alpha, &beta);
        let (pk, pk1) = (PhysBasis::new(v, k), PhysBasis::new(v, k + 1));
        let rule = common::triangle_rule(v, 8);
        let mut residual = vec![0.0f64; pk1.dim()];
        let mut scale = 0.0f64;
        for &(x, w) in &rule {
            let dchi = pk1.grad(x);
            let mut dg = [0.0; 2];
            for (i, d) in dchi.iter().enumerate() {
                dg[0] += gamma[i] * d[0];
                dg[1] += gamma[i] * d[1];
            }
            let q = [eval_local(&pk, &alpha[..nk], x), eval_local(&pk, &alpha[nk..], x)];
            for (r, d) in residual.iter_mut().zip(&dchi) {
                *r += w * ((dg[0] + q[0]) * d[0] + (dg[1] + q[1]) * d[1]);
                scale = scale.max(w * (q[0] * d[0] + q[1] * d[1]).abs());
            }
        }
        let mean: f64 = common::integrate(v, |x| eval_local(&pk1, &gamma, x) - eval_local(&pk, &beta, x));
        let res = residual.iter().fold(mean.abs(), |m, r| m.max(r.abs()));
        assert!(res <= 1e-9 * scale.max(1.0), "case {case}: residual {res:e}");
        assert!(post.local_multiplier(0, &alpha, &beta).abs() <= 1e-9 * scale.max(1.0));
    }
}
