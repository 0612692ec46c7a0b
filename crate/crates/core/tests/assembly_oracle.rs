mod common;

use ihdg::assembly::assemble_system;
use ihdg::{BoundaryCondition, Discretization, Mesh, Stabilization};
use proptest::prelude::*;

fn compare(disc: &Discretization, tau: &Stabilization, tol: f64) {
    let sys = assemble_system(disc, tau).unwrap();
    let oracle = common::brute_force(disc, tau);
    for (name, m) in sys.named() {
        let d = common::max_diff(&m.to_dense(), oracle.get(name));
        assert!(d <= tol, "{name}: max difference {d:e}");
    }
    let b1 = nalgebra::DVector::from_column_slice(&sys.b1);
    let b2 = nalgebra::DVector::from_column_slice(&sys.b2);
    assert!((b1 - &oracle.b1).amax() <= tol);
    assert!((b2 - &oracle.b2).amax() <= tol);
}

#[test]
fn structured_meshes_match_brute_force() {
    for n in [1, 2] {
        for k in [0, 1] {
            for bc in [BoundaryCondition::Dirichlet, BoundaryCondition::Neumann] {
                let disc = Discretization::new(Mesh::structured_square(n).unwrap(), k, bc).unwrap();
                compare(&disc, &Stabilization::uniform(&disc.mesh, 1.0), 1e-11);
            }
        }
    }
}

#[test]
fn facewise_stabilization_matches_brute_force() {
    let mut rng = common::rng(7);
    let disc = Discretization::new(Mesh::structured_square(2).unwrap(), 1, BoundaryCondition::Neumann).unwrap();
    let values = (0..disc.mesh.num_elements())
        .map(|_| {
            let v = common::random_vec(&mut rng, 3, 1.0);
            [v[0].abs() + 0.1, v[1].abs(), 2.0 * v[2].abs()]
        })
        .collect();
    compare(&disc, &Stabilization::from_values(values), 1e-11);
}

#[test]
fn degree_two_matches_brute_force() {
    let disc = Discretization::new(Mesh::structured_square(2).unwrap(), 2, BoundaryCondition::Dirichlet).unwrap();
    compare(&disc, &Stabilization::uniform(&disc.mesh, 0.5), 1e-11);
}

fn triangle() -> impl Strategy<Value = [[f64; 2]; 3]> {
    prop::array::uniform3(prop::array::uniform2(-2.0..2.0f64)).prop_filter("well shaped", |v| {
        let det = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
        let len = |a: [f64; 2], b: [f64; 2]| ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt();
        let hmax = len(v[0], v[1]).max(len(v[1], v[2])).max(len(v[2], v[0]));
        det.abs() > 0.2 * hmax * hmax
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn single_triangle_matches_brute_force(v in triangle(), k in 0usize..3) {
        let mut v = v;
        let det = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
        if det < 0.0 {
            v.swap(1, 2);
        }
        let mesh = Mesh::new(v.to_vec(), vec![[0, 1, 2]]).unwrap();
        let disc = Discretization::new(mesh, k, BoundaryCondition::Neumann).unwrap();
        compare(&disc, &Stabilization::uniform(&disc.mesh, 1.5), 1e-10);
    }
}
