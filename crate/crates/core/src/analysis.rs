//! L2 errors against exact solutions and the mesh-refinement study.

use std::f64::consts::SQRT_2;
use std::fmt::{self, Write as _};

use thiserror::Error;

use crate::discretization::{Discretization, Space};
use crate::felib::{error_exactness, triangle_quadrature, FeError};
use crate::mesh::{Mesh, MeshError, Point};
use crate::problems::ProblemSpec;
use crate::solver::{LinearSolver, Scheme, Solver, SolverConfig, SolverError, State};

#[derive(Debug, Error)]
pub enum AnalysisError {
    #[error("problem '{0}' has no exact solution")]
    NoExactSolution(String),
    #[error("at level n = {n}: {source}")]
    Level { n: usize, source: SolverError },
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Fe(#[from] FeError),
}

/// `|| exact - u_h ||` over the mesh for a `W_h` or `Z_h` coefficient vector.
pub fn l2_error_scalar(disc: &Discretization, space: Space, coeffs: &[f64], exact: &dyn Fn(Point) -> f64) -> Result<f64, FeError> {
    let rule = triangle_quadrature(error_exactness(disc.degree()))?;
    let mut total = 0.0;
    for e in 0..disc.mesh.num_elements() {
        let geo = disc.mesh.geometry(e);
        for (xi, w) in rule.points.iter().zip(&rule.weights) {
            let x = geo.to_physical(*xi);
            let d = exact(x) - disc.eval_scalar(space, coeffs, e, x);
            total += w * geo.det * d * d;
        }
    }
    Ok(total.sqrt())
}

/// `|| exact - q_h ||` over the mesh for a `V_h` coefficient vector.
pub fn l2_error_flux(disc: &Discretization, coeffs: &[f64], exact: &dyn Fn(Point) -> Point) -> Result<f64, FeError> {
    let rule = triangle_quadrature(error_exactness(disc.degree()))?;
    let mut total = 0.0;
    for e in 0..disc.mesh.num_elements() {
        let geo = disc.mesh.geometry(e);
        for (xi, w) in rule.points.iter().zip(&rule.weights) {
            let x = geo.to_physical(*xi);
            let q = exact(x);
            let qh = disc.eval_flux(coeffs, e, x);
            total += w * geo.det * ((q[0] - qh[0]).powi(2) + (q[1] - qh[1]).powi(2));
        }
    }
    Ok(total.sqrt())
}

/// Errors of `(q_h, u_h, u_h*)` for one field of a state.
pub fn state_errors(solver: &Solver, state: &State, field: usize) -> Result<[f64; 3], AnalysisError> {
    let problem = solver.problem();
    let exact = problem.fields[field].exact.as_ref().ok_or_else(|| AnalysisError::NoExactSolution(problem.name.clone()))?;
    let disc = solver.discretization();
    let fs = &state.fields[field];
    let t = state.time;
    let (q, u) = (&exact.q, &exact.u);
    Ok([
        l2_error_flux(disc, &fs.alpha, &|p| q(t, p))?,
        l2_error_scalar(disc, Space::Scalar, &fs.beta, &|p| u(t, p))?,
        l2_error_scalar(disc, Space::Enriched, &fs.gamma, &|p| u(t, p))?,
    ])
}

/// Mesh parameter `h / sqrt(2)`, which is `1/n` on the structured square.
pub fn mesh_parameter(mesh: &Mesh) -> f64 {
    mesh.h() / SQRT_2
}

/// Time step as a function of the mesh parameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtRule {
    Fixed(f64),
    /// `dt = h / sqrt(2)`
    H,
    /// `dt = (h / sqrt(2))^2`
    H2,
}

impl DtRule {
    pub fn dt(&self, mesh_parameter: f64) -> f64 {
        match *self {
            DtRule::Fixed(dt) => dt,
            DtRule::H => mesh_parameter,
            DtRule::H2 => mesh_parameter * mesh_parameter,
        }
    }
}

impl fmt::Display for DtRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DtRule::Fixed(dt) => write!(f, "{dt}"),
            DtRule::H => f.write_str("h"),
            DtRule::H2 => f.write_str("h^2"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceSettings {
    pub scheme: Scheme,
    pub dt_rule: DtRule,
    pub final_time: f64,
    pub tau: f64,
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub linear_solver: LinearSolver,
}

impl Default for ConvergenceSettings {
    fn default() -> Self {
        let s = SolverConfig::default();
        Self {
            scheme: Scheme::BackwardEuler,
            dt_rule: DtRule::H,
            final_time: 1.0,
            tau: s.tau,
            newton_tol: s.newton_tol,
            newton_max_iter: s.newton_max_iter,
            linear_solver: s.linear_solver,
        }
    }
}

impl ConvergenceSettings {
    pub fn solver_config(&self, mesh: &Mesh) -> SolverConfig {
        SolverConfig {
            dt: self.dt_rule.dt(mesh_parameter(mesh)),
            final_time: self.final_time,
            scheme: self.scheme,
            tau: self.tau,
            newton_tol: self.newton_tol,
            newton_max_iter: self.newton_max_iter,
            linear_solver: self.linear_solver,
            ..SolverConfig::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub err_q: f64,
    pub err_u: f64,
    pub err_ustar: f64,
}

impl ConvergenceRow {
    pub fn errors(&self) -> [f64; 3] {
        [self.err_q, self.err_u, self.err_ustar]
    }
}

/// Errors at or below this are treated as round-off and get no rate.
pub const ROUNDOFF_FLOOR: f64 = 1e-10;

pub fn rate(coarse: f64, fine: f64, refinement: f64) -> Option<f64> {
    if coarse > ROUNDOFF_FLOOR && fine > ROUNDOFF_FLOOR && coarse.is_finite() && fine.is_finite() {
        Some((coarse / fine).ln() / refinement.ln())
    } else {
        None
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
}

/// Scientific notation with four decimals and a signed two-digit exponent, as in `1.2889E+00`.
pub fn sci(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    let s = format!("{x:.4E}");
    let (mantissa, exp) = s.split_once('E').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    format!("{mantissa}E{}{:02}", if exp < 0 { '-' } else { '+' }, exp.abs())
}

fn level_label(n: usize) -> String {
    if n.is_power_of_two() {
        format!("2^-{}", n.trailing_zeros())
    } else {
        format!("1/{n}")
    }
}

impl ConvergenceTable {
    /// Rates of row `i` against row `i - 1`; `None` for the first row or at round-off.
    pub fn rates(&self, i: usize) -> [Option<f64>; 3] {
        if i == 0 {
            return [None; 3];
        }
        let (c, f) = (&self.rows[i - 1], &self.rows[i]);
        let refinement = f.n as f64 / c.n as f64;
        let (ce, fe) = (c.errors(), f.errors());
        [0, 1, 2].map(|j| rate(ce[j], fe[j], refinement))
    }

    pub fn finest_rates(&self) -> [Option<f64>; 3] {
        match self.rows.len() {
            0 => [None; 3],
            n => self.rates(n - 1),
        }
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<7} {:>11} {:>5}  {:>11} {:>5}  {:>11} {:>5}", "h", "err_q", "rate", "err_u", "rate", "err_ustar", "rate");
        for (i, row) in self.rows.iter().enumerate() {
            let r = self.rates(i).map(|r| r.map(|v| format!("{v:.2}")).unwrap_or_default());
            let _ = writeln!(
                out,
                "{:<7} {:>11} {:>5}  {:>11} {:>5}  {:>11} {:>5}",
                level_label(row.n),
                sci(row.err_q),
                r[0],
                sci(row.err_u),
                r[1],
                sci(row.err_ustar),
                r[2]
            );
        }
        out
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("level,err_q,rate_q,err_u,rate_u,err_ustar,rate_ustar\n");
        for (i, row) in self.rows.iter().enumerate() {
            let r = self.rates(i).map(|r| r.map(|v| format!("{v:.2}")).unwrap_or_default());
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{}",
                level_label(row.n),
                sci(row.err_q),
                r[0],
                sci(row.err_u),
                r[1],
                sci(row.err_ustar),
                r[2]
            );
        }
        out
    }
}

/// One solver run on the structured `n x n` square; errors of the first
/// field at the final time.
pub fn run_level(problem: &ProblemSpec, n: usize, k: usize, settings: &ConvergenceSettings) -> Result<ConvergenceRow, AnalysisError> {
    if !problem.fields.first().is_some_and(|f| f.exact.is_some()) {
        return Err(AnalysisError::NoExactSolution(problem.name.clone()));
    }
    let mesh = Mesh::structured_square(n)?;
    let cfg = settings.solver_config(&mesh);
    let level = |source| AnalysisError::Level { n, source };
    let solver = Solver::new(problem.clone(), mesh, k, cfg).map_err(level)?;
    let out = solver.run(&[]).map_err(level)?;
    let [err_q, err_u, err_ustar] = state_errors(&solver, &out.final_state, 0)?;
    Ok(ConvergenceRow { n, err_q, err_u, err_ustar })
}

pub fn run_convergence(
    problem: &ProblemSpec,
    k: usize,
    levels: &[usize],
    settings: &ConvergenceSettings,
) -> Result<ConvergenceTable, AnalysisError> {
    let rows = levels.iter().map(|&n| run_level(problem, n, k, settings)).collect::<Result<_, _>>()?;
    Ok(ConvergenceTable { rows })
}
