//! Problem definitions in the form `u_t - div(D grad u) + F(u) = f`, one
//! equation per field, with flux `q = -D grad u`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::felib::BoundaryCondition;
use crate::mesh::Point;

pub type SpaceTimeFn = Arc<dyn Fn(f64, Point) -> f64 + Send + Sync>;
pub type SpaceTimeVectorFn = Arc<dyn Fn(f64, Point) -> Point + Send + Sync>;
pub type SpaceFn = Arc<dyn Fn(Point) -> f64 + Send + Sync>;

/// Pointwise reaction term `F: R^n -> R^n` and its Jacobian.
pub trait Reaction: Send + Sync {
    fn num_fields(&self) -> usize;
    fn eval(&self, u: &[f64], out: &mut [f64]);
    /// Row-major `n x n` matrix of partial derivatives `dF_i / du_j`.
    fn jacobian(&self, u: &[f64], out: &mut [f64]);
}

/// A single-field reaction given by `F` and `F'`.
pub struct ScalarReaction {
    f: Box<dyn Fn(f64) -> f64 + Send + Sync>,
    df: Box<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl ScalarReaction {
    pub fn new(f: impl Fn(f64) -> f64 + Send + Sync + 'static, df: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self { f: Box::new(f), df: Box::new(df) }
    }

    pub fn zero() -> Self {
        Self::new(|_| 0.0, |_| 0.0)
    }

    pub fn linear(c: f64) -> Self {
        Self::new(move |u| c * u, move |_| c)
    }

    /// `F(u) = u^3 - u`
    pub fn allen_cahn() -> Self {
        Self::new(|u| u * u * u - u, |u| 3.0 * u * u - 1.0)
    }
}

impl Reaction for ScalarReaction {
    fn num_fields(&self) -> usize {
        1
    }

    fn eval(&self, u: &[f64], out: &mut [f64]) {
        out[0] = (self.f)(u[0]);
    }

    fn jacobian(&self, u: &[f64], out: &mut [f64]) {
        out[0] = (self.df)(u[0]);
    }
}

/// Schnakenberg kinetics with signs moved to the left-hand side:
/// `F1 = -kappa (a - u + u^2 v)`, `F2 = -kappa (b - u^2 v)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schnakenberg {
    pub kappa: f64,
    pub a: f64,
    pub b: f64,
}

impl Schnakenberg {
    pub const STANDARD: Self = Self { kappa: 100.0, a: 0.1305, b: 0.7695 };

    /// Spatially homogeneous equilibrium `(a + b, b / (a + b)^2)`.
    pub fn equilibrium(&self) -> [f64; 2] {
        let s = self.a + self.b;
        [s, self.b / (s * s)]
    }
}

impl Reaction for Schnakenberg {
    fn num_fields(&self) -> usize {
        2
    }

    fn eval(&self, u: &[f64], out: &mut [f64]) {
        let (ca, ci) = (u[0], u[1]);
        out[0] = -self.kappa * (self.a - ca + ca * ca * ci);
        out[1] = -self.kappa * (self.b - ca * ca * ci);
    }

    fn jacobian(&self, u: &[f64], out: &mut [f64]) {
        let (ca, ci) = (u[0], u[1]);
        out[0] = -self.kappa * (-1.0 + 2.0 * ca * ci);
        out[1] = -self.kappa * ca * ca;
        out[2] = self.kappa * 2.0 * ca * ci;
        out[3] = self.kappa * ca * ca;
    }
}

#[derive(Clone)]
pub struct ExactSolution {
    pub u: SpaceTimeFn,
    /// `q = -D grad u`
    pub q: SpaceTimeVectorFn,
}

#[derive(Clone)]
pub struct FieldSpec {
    pub name: String,
    pub diffusion: f64,
    pub initial: SpaceFn,
    pub source: SpaceTimeFn,
    pub exact: Option<ExactSolution>,
}

/// How the initial scalar field is projected into `W_h`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialProjection {
    /// HDG projection of `(q(0), u(0))`; needs an exact flux at `t = 0`.
    Hdg,
    /// Elementwise L2 projection onto `P^k`.
    L2,
}

#[derive(Clone)]
pub struct ProblemSpec {
    pub name: String,
    pub fields: Vec<FieldSpec>,
    pub reaction: Arc<dyn Reaction>,
    pub bc: BoundaryCondition,
    pub initial_projection: InitialProjection,
}

impl fmt::Debug for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProblemSpec")
            .field("name", &self.name)
            .field("fields", &self.fields.iter().map(|s| &s.name).collect::<Vec<_>>())
            .field("bc", &self.bc)
            .finish_non_exhaustive()
    }
}

impl ProblemSpec {
    pub fn num_fields(&self) -> usize {
        self.fields.len()
    }

    pub fn has_exact_solution(&self) -> bool {
        self.fields.iter().all(|f| f.exact.is_some())
    }
}

/// Smooth manufactured scalar solution described by its value, time
/// derivative, gradient and Laplacian.
#[derive(Clone)]
pub struct Manufactured {
    pub u: SpaceTimeFn,
    pub u_t: SpaceTimeFn,
    pub grad: SpaceTimeVectorFn,
    pub laplacian: SpaceTimeFn,
}

impl Manufactured {
    /// `u = sin(t) sin(pi x) sin(pi y)`
    pub fn sine_product() -> Self {
        Self {
            u: Arc::new(|t, p| t.sin() * (PI * p[0]).sin() * (PI * p[1]).sin()),
            u_t: Arc::new(|t, p| t.cos() * (PI * p[0]).sin() * (PI * p[1]).sin()),
            grad: Arc::new(|t, p| {
                let s = t.sin() * PI;
                [s * (PI * p[0]).cos() * (PI * p[1]).sin(), s * (PI * p[0]).sin() * (PI * p[1]).cos()]
            }),
            laplacian: Arc::new(|t, p| -2.0 * PI * PI * t.sin() * (PI * p[0]).sin() * (PI * p[1]).sin()),
        }
    }

    /// Builds a Dirichlet problem whose source makes this the exact solution
    /// for the given scalar reaction and diffusion.
    pub fn into_problem(self, name: &str, reaction: ScalarReaction, diffusion: f64) -> ProblemSpec {
        let reaction = Arc::new(reaction);
        let Manufactured { u, u_t, grad, laplacian } = self;
        let source: SpaceTimeFn = {
            let (u, reaction) = (u.clone(), reaction.clone());
            Arc::new(move |t, p| {
                let mut fu = [0.0];
                reaction.eval(&[u(t, p)], &mut fu);
                u_t(t, p) - diffusion * laplacian(t, p) + fu[0]
            })
        };
        let initial: SpaceFn = {
            let u = u.clone();
            Arc::new(move |p| u(0.0, p))
        };
        let q: SpaceTimeVectorFn = Arc::new(move |t, p| {
            let g = grad(t, p);
            [-diffusion * g[0], -diffusion * g[1]]
        });
        ProblemSpec {
            name: name.to_string(),
            fields: vec![FieldSpec {
                name: "u".into(),
                diffusion,
                initial,
                source,
                exact: Some(ExactSolution { u, q }),
            }],
            reaction,
            bc: BoundaryCondition::Dirichlet,
            initial_projection: InitialProjection::Hdg,
        }
    }
}

/// Allen-Cahn benchmark on the unit square: `F(u) = u^3 - u`, exact solution
/// `u = sin(t) sin(pi x) sin(pi y)`, homogeneous Dirichlet data.
pub fn allen_cahn() -> ProblemSpec {
    let pi2 = PI * PI;
    let u: SpaceTimeFn = Arc::new(|t, p| t.sin() * (PI * p[0]).sin() * (PI * p[1]).sin());
    let source: SpaceTimeFn = Arc::new(move |t, p| {
        let s = (PI * p[0]).sin() * (PI * p[1]).sin();
        let u = t.sin() * s;
        t.cos() * s + 2.0 * pi2 * u + u * u * u - u
    });
    let q: SpaceTimeVectorFn = Arc::new(|t, p| {
        let s = -t.sin() * PI;
        [s * (PI * p[0]).cos() * (PI * p[1]).sin(), s * (PI * p[0]).sin() * (PI * p[1]).cos()]
    });
    ProblemSpec {
        name: "allen_cahn".into(),
        fields: vec![FieldSpec {
            name: "u".into(),
            diffusion: 1.0,
            initial: Arc::new(|_| 0.0),
            source,
            exact: Some(ExactSolution { u, q }),
        }],
        reaction: Arc::new(ScalarReaction::allen_cahn()),
        bc: BoundaryCondition::Dirichlet,
        initial_projection: InitialProjection::Hdg,
    }
}

/// Linear heat equation with the same manufactured solution as [`allen_cahn`].
pub fn heat() -> ProblemSpec {
    Manufactured::sine_product().into_problem("heat", ScalarReaction::zero(), 1.0)
}

fn schnakenberg_with(perturbation: f64, name: &str) -> ProblemSpec {
    let kin = Schnakenberg::STANDARD;
    let [ca0, ci0] = kin.equilibrium();
    let zero: SpaceTimeFn = Arc::new(|_, _| 0.0);
    ProblemSpec {
        name: name.into(),
        fields: vec![
            FieldSpec {
                name: "ca".into(),
                diffusion: 0.05,
                initial: Arc::new(move |p| {
                    let r2 = (p[0] - 1.0 / 3.0).powi(2) + (p[1] - 0.5).powi(2);
                    ca0 + perturbation * (-100.0 * r2).exp()
                }),
                source: zero.clone(),
                exact: None,
            },
            FieldSpec { name: "ci".into(), diffusion: 1.0, initial: Arc::new(move |_| ci0), source: zero, exact: None },
        ],
        reaction: Arc::new(kin),
        bc: BoundaryCondition::Neumann,
        initial_projection: InitialProjection::L2,
    }
}

/// Two-field Schnakenberg system with zero-flux boundaries and a Gaussian
/// bump of height `1e-3` centred at `(1/3, 1/2)` on the activator.
pub fn schnakenberg() -> ProblemSpec {
    schnakenberg_with(1e-3, "schnakenberg")
}

/// [`schnakenberg`] started exactly at its homogeneous equilibrium.
pub fn schnakenberg_homogeneous() -> ProblemSpec {
    schnakenberg_with(0.0, "schnakenberg_homogeneous")
}

pub const PROBLEM_NAMES: [&str; 4] = ["allen_cahn", "heat", "schnakenberg", "schnakenberg_homogeneous"];

pub fn by_name(name: &str) -> Option<ProblemSpec> {
    match name {
        "allen_cahn" => Some(allen_cahn()),
        "heat" => Some(heat()),
        "schnakenberg" => Some(schnakenberg()),
        "schnakenberg_homogeneous" => Some(schnakenberg_homogeneous()),
        _ => None,
    }
}
