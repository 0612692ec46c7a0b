//! Time stepping with Newton's method and static condensation.
//!
//! The unknown of one time level is the stacked vector `x = [x_1, ..., x_m]`
//! over the `m` fields of the problem, each `x_f = [alpha, beta, zeta]`
//! (flux, scalar and trace coefficients). For a field with diffusion `D` the
//! flux is `q = -D grad u`, which scales `A3` and `B11` by `1/D`.
//!
//! Every step solves `G(x) = 0` with
//!
//! ```text
//! row 1:  A3/D alpha - A4 beta + A5 zeta                          = 0
//! row 2:  A4^T alpha + (c M + A6) beta - A7 zeta + A9 F(gamma)    = r
//! row 3:  A5^T alpha + A7^T beta - A8 zeta                        = 0
//! ```
//!
//! where `c` and `r` depend on the scheme (see [`StepData`]).

use std::fmt;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::assembly::{
    assemble_system, build_postprocessing_blocks, weighted_element_blocks, weighted_products, AssemblyError,
    PostprocessBlocks, SystemMatrices,
};
use crate::condense::{condense, CondenseError, LocalSystem, TracePattern};
use crate::discretization::{Discretization, Stabilization};
use crate::felib::{error_exactness, triangle_quadrature, FeError};
use crate::mesh::{Mesh, Point};
use crate::problems::{InitialProjection, ProblemSpec};
use crate::projections::{hdg_project, l2_project_element, ProjectionError};
use crate::sparse::{SparseMatrix, TripletBuilder};

pub use crate::condense::LinearSolver;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Scheme {
    #[default]
    BackwardEuler,
    /// Trapezoidal rule on the scalar equation; flux and trace equations are
    /// imposed at the new time level.
    CrankNicolson,
}

/// Starting point of the Newton iteration at each step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum InitialGuess {
    #[default]
    PreviousStep,
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub dt: f64,
    pub final_time: f64,
    pub scheme: Scheme,
    pub tau: f64,
    /// Absolute tolerance, scaled by the square root of the number of unknowns.
    pub newton_tol: f64,
    pub newton_max_iter: usize,
    pub linear_solver: LinearSolver,
    pub initial_guess: InitialGuess,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            final_time: 1.0,
            scheme: Scheme::BackwardEuler,
            tau: 1.0,
            newton_tol: 1e-10,
            newton_max_iter: 25,
            linear_solver: LinearSolver::SparseDirect,
            initial_guess: InitialGuess::PreviousStep,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let bad = |what: &str| Err(SolverError::InvalidConfig(what.to_string()));
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return bad("dt must be positive and finite");
        }
        if !(self.final_time.is_finite() && self.final_time >= 0.0) {
            return bad("final time must be nonnegative and finite");
        }
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return bad("tau must be positive and finite");
        }
        if !(self.newton_tol.is_finite() && self.newton_tol > 0.0) {
            return bad("newton tolerance must be positive and finite");
        }
        if self.newton_max_iter == 0 {
            return bad("newton_max_iter must be at least 1");
        }
        Ok(())
    }

    /// Step sizes covering `[0, T]`; a trailing partial step lands on `T`.
    pub fn step_sizes(&self) -> Vec<f64> {
        let ratio = self.final_time / self.dt;
        let rounded = ratio.round();
        let n = if (ratio - rounded).abs() <= 1e-9 * ratio.max(1.0) { rounded as usize } else { ratio.ceil() as usize };
        let mut out = Vec::with_capacity(n);
        let mut t = 0.0;
        for i in 0..n {
            let next = if i + 1 == n { self.final_time } else { (i + 1) as f64 * self.dt };
            out.push(next - t);
            t = next;
        }
        out
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),
    #[error("reaction has {reaction} components but the problem has {fields} fields")]
    FieldCountMismatch { reaction: usize, fields: usize },
    #[error("field {field} uses the HDG initial projection but has no exact flux")]
    MissingExactFlux { field: usize },
    #[error("diffusion coefficient of field {field} must be positive")]
    InvalidDiffusion { field: usize },
    #[error("reaction is not finite in field {field} at postprocessing node {node}")]
    NonFinite { field: usize, node: usize },
    #[error("local Newton block on element {element} is singular")]
    SingularLocal { element: usize },
    #[error("global trace system is singular")]
    SingularTrace,
    #[error("Newton did not converge at t = {time}: residual {residual:.3e} after {iterations} iterations")]
    NewtonDiverged { time: f64, iterations: usize, residual: f64 },
    #[error(transparent)]
    Assembly(#[from] AssemblyError),
    #[error(transparent)]
    Projection(#[from] ProjectionError),
    #[error(transparent)]
    Fe(#[from] FeError),
}

impl From<CondenseError> for SolverError {
    fn from(e: CondenseError) -> Self {
        match e {
            CondenseError::SingularLocal { element } => SolverError::SingularLocal { element },
            CondenseError::SingularTrace => SolverError::SingularTrace,
        }
    }
}

/// Coefficients of one field at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub zeta: Vec<f64>,
    /// Postprocessed `u*`, always `B11 alpha / D + B12 beta`.
    pub gamma: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub time: f64,
    pub fields: Vec<FieldState>,
}

/// Scheme-dependent part of one step: the mass coefficient `c` and the
/// right-hand side `r` of the scalar equation, per field.
#[derive(Debug, Clone)]
pub struct StepData {
    pub time: f64,
    pub mass_coefficient: f64,
    pub rhs: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonReport {
    pub iterations: usize,
    /// Residual 2-norms, starting with the initial guess.
    pub history: Vec<f64>,
}

impl NewtonReport {
    pub fn initial_residual(&self) -> f64 {
        self.history[0]
    }

    pub fn final_residual(&self) -> f64 {
        *self.history.last().expect("history is never empty")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub step: usize,
    pub time: f64,
    pub residual_initial: f64,
    pub residual_final: f64,
    pub newton_iters: usize,
}

impl fmt::Display for StepRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "step {} {:.6} {:.3e} {:.3e} {}",
            self.step, self.time, self.residual_initial, self.residual_final, self.newton_iters
        )
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub final_state: State,
    /// `(requested time, state at the nearest completed step)`
    pub snapshots: Vec<(f64, State)>,
    pub records: Vec<StepRecord>,
}

struct SourceTable {
    points: Vec<Point>,
    weights: Vec<f64>,
    phi: Vec<Vec<f64>>,
    per_element: usize,
}

pub struct Solver {
    problem: ProblemSpec,
    disc: Discretization,
    sys: SystemMatrices,
    post: PostprocessBlocks,
    cfg: SolverConfig,
    source: SourceTable,
    /// Trace patterns for the coupled Newton system and a single field.
    coupled_pattern: TracePattern,
    field_pattern: TracePattern,
}

impl fmt::Debug for Solver {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Solver")
            .field("problem", &self.problem)
            .field("elements", &self.disc.mesh.num_elements())
            .field("degree", &self.disc.degree())
            .field("cfg", &self.cfg)
            .finish()
    }
}

fn push_sparse(t: &mut TripletBuilder, m: &SparseMatrix, r0: usize, c0: usize, scale: f64) {
    for (r, c, v) in m.iter() {
        t.push(r0 + r, c0 + c, scale * v);
    }
}

fn push_transpose(t: &mut TripletBuilder, m: &SparseMatrix, r0: usize, c0: usize, scale: f64) {
    for (r, c, v) in m.iter() {
        t.push(r0 + c, c0 + r, scale * v);
    }
}

fn add_block(dst: &mut DMatrix<f64>, r0: usize, c0: usize, src: &DMatrix<f64>, scale: f64) {
    for i in 0..src.nrows() {
        for j in 0..src.ncols() {
            dst[(r0 + i, c0 + j)] += scale * src[(i, j)];
        }
    }
}

fn element_traces(disc: &Discretization, e: usize, f: usize) -> Vec<(usize, usize)> {
    let l = &disc.layout;
    let mut out = Vec::new();
    for (lf, &face) in disc.mesh.element_faces(e).iter().enumerate() {
        if let Some(slot) = l.trace_face(face) {
            out.push((lf, f * l.n4() + slot * l.nf()));
        }
    }
    out
}

fn trace_pattern(disc: &Discretization, fields: usize) -> TracePattern {
    let nf = disc.layout.nf();
    let lists: Vec<Vec<usize>> = (0..disc.mesh.num_elements())
        .map(|e| (0..fields).flat_map(|f| element_traces(disc, e, f)).flat_map(|(_, t0)| t0..t0 + nf).collect())
        .collect();
    TracePattern::new(fields * disc.layout.n4(), &lists)
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

impl Solver {
    /// Assembles every matrix once; nothing is reassembled while stepping.
    pub fn new(problem: ProblemSpec, mesh: Mesh, k: usize, cfg: SolverConfig) -> Result<Self, SolverError> {
        cfg.validate()?;
        let fields = problem.num_fields();
        let reaction = problem.reaction.num_fields();
        if reaction != fields {
            return Err(SolverError::FieldCountMismatch { reaction, fields });
        }
        if let Some(field) = problem.fields.iter().position(|f| !(f.diffusion.is_finite() && f.diffusion > 0.0)) {
            return Err(SolverError::InvalidDiffusion { field });
        }
        let disc = Discretization::new(mesh, k, problem.bc)?;
        let tau = Stabilization::uniform(&disc.mesh, cfg.tau);
        let sys = assemble_system(&disc, &tau)?;
        let post = build_postprocessing_blocks(&sys, &disc.layout)?;

        let rule = triangle_quadrature(error_exactness(k))?;
        let phi = rule.points.iter().map(|p| disc.reference.scalar.eval(*p)).collect();
        let mut points = Vec::with_capacity(rule.points.len() * disc.mesh.num_elements());
        let mut weights = Vec::with_capacity(points.capacity());
        for e in 0..disc.mesh.num_elements() {
            let geo = disc.mesh.geometry(e);
            for (p, w) in rule.points.iter().zip(&rule.weights) {
                points.push(geo.to_physical(*p));
                weights.push(w * geo.det);
            }
        }
        let source = SourceTable { points, weights, phi, per_element: rule.points.len() };
        let coupled_pattern = trace_pattern(&disc, fields);
        let field_pattern = trace_pattern(&disc, 1);
        Ok(Self { problem, disc, sys, post, cfg, source, coupled_pattern, field_pattern })
    }

    pub fn problem(&self) -> &ProblemSpec {
        &self.problem
    }

    pub fn discretization(&self) -> &Discretization {
        &self.disc
    }

    pub fn system(&self) -> &SystemMatrices {
        &self.sys
    }

    pub fn postprocessing(&self) -> &PostprocessBlocks {
        &self.post
    }

    pub fn config(&self) -> &SolverConfig {
        &self.cfg
    }

    pub fn num_fields(&self) -> usize {
        self.problem.num_fields()
    }

    fn field_size(&self) -> usize {
        let l = &self.disc.layout;
        l.n1() + l.n2() + l.n4()
    }

    /// Length of the stacked unknown vector.
    pub fn num_unknowns(&self) -> usize {
        self.num_fields() * self.field_size()
    }

    /// Offsets of `(alpha, beta, zeta)` of field `f` in the stacked vector.
    pub fn offsets(&self, f: usize) -> (usize, usize, usize) {
        let l = &self.disc.layout;
        let a0 = f * self.field_size();
        (a0, a0 + l.n1(), a0 + l.n1() + l.n2())
    }

    fn inv_diffusion(&self, f: usize) -> f64 {
        1.0 / self.problem.fields[f].diffusion
    }

    pub fn stack(&self, state: &State) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.num_unknowns());
        for fs in &state.fields {
            x.extend_from_slice(&fs.alpha);
            x.extend_from_slice(&fs.beta);
            x.extend_from_slice(&fs.zeta);
        }
        x
    }

    /// Splits a stacked vector into a state, recomputing `gamma`.
    pub fn unstack(&self, x: &[f64], time: f64) -> State {
        let fields = (0..self.num_fields())
            .map(|f| {
                let (a0, b0, z0) = self.offsets(f);
                let alpha = x[a0..b0].to_vec();
                let beta = x[b0..z0].to_vec();
                let zeta = x[z0..z0 + self.disc.layout.n4()].to_vec();
                let gamma = self.postprocess(f, &alpha, &beta);
                FieldState { alpha, beta, zeta, gamma }
            })
            .collect();
        State { time, fields }
    }

    /// `gamma = B11 alpha / D + B12 beta` for field `f`.
    pub fn postprocess(&self, f: usize, alpha: &[f64], beta: &[f64]) -> Vec<f64> {
        let mut gamma = self.post.b12_global.mul(beta);
        self.post.b11_global.mul_add(alpha, self.inv_diffusion(f), &mut gamma);
        gamma
    }

    fn gammas(&self, x: &[f64]) -> Vec<Vec<f64>> {
        (0..self.num_fields())
            .map(|f| {
                let (a0, b0, z0) = self.offsets(f);
                self.postprocess(f, &x[a0..b0], &x[b0..z0])
            })
            .collect()
    }

    /// Nodal reaction values `F_f(gamma)` per field.
    fn reaction_values(&self, gammas: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, SolverError> {
        let m = self.num_fields();
        let n3 = self.disc.layout.n3();
        let mut out = vec![vec![0.0; n3]; m];
        let mut u = vec![0.0; m];
        let mut fu = vec![0.0; m];
        for node in 0..n3 {
            for f in 0..m {
                u[f] = gammas[f][node];
            }
            self.problem.reaction.eval(&u, &mut fu);
            for f in 0..m {
                if !fu[f].is_finite() {
                    return Err(SolverError::NonFinite { field: f, node });
                }
                out[f][node] = fu[f];
            }
        }
        Ok(out)
    }

    /// Nodal reaction derivatives, indexed `[f][g][node]` for `dF_f / du_g`.
    fn reaction_derivatives(&self, gammas: &[Vec<f64>]) -> Result<Vec<Vec<Vec<f64>>>, SolverError> {
        let m = self.num_fields();
        let n3 = self.disc.layout.n3();
        let mut out = vec![vec![vec![0.0; n3]; m]; m];
        let mut u = vec![0.0; m];
        let mut jac = vec![0.0; m * m];
        for node in 0..n3 {
            for f in 0..m {
                u[f] = gammas[f][node];
            }
            self.problem.reaction.jacobian(&u, &mut jac);
            for f in 0..m {
                for g in 0..m {
                    let v = jac[f * m + g];
                    if !v.is_finite() {
                        return Err(SolverError::NonFinite { field: f, node });
                    }
                    out[f][g][node] = v;
                }
            }
        }
        Ok(out)
    }

    /// Source moments `b3 = [(f(t), phi_i)]` for field `f`.
    pub fn source_vector(&self, f: usize, t: f64) -> Vec<f64> {
        let nk = self.disc.layout.nk();
        let src = &self.problem.fields[f].source;
        let tab = &self.source;
        let mut b3 = vec![0.0; self.disc.layout.n2()];
        for e in 0..self.disc.mesh.num_elements() {
            for q in 0..tab.per_element {
                let idx = e * tab.per_element + q;
                let v = tab.weights[idx] * src(t, tab.points[idx]);
                for i in 0..nk {
                    b3[e * nk + i] += v * tab.phi[q][i];
                }
            }
        }
        b3
    }

    /// Scalar-equation operator without the mass term:
    /// `A4^T alpha + A6 beta - A7 zeta + A9 F(gamma)` per field.
    fn spatial_operator(&self, x: &[f64]) -> Result<Vec<Vec<f64>>, SolverError> {
        let fvals = self.reaction_values(&self.gammas(x))?;
        Ok((0..self.num_fields())
            .map(|f| {
                let (a0, b0, z0) = self.offsets(f);
                let s = &self.sys;
                let mut out = s.a9.mul(&fvals[f]);
                for (r, c, v) in s.a4.iter() {
                    out[c] += v * x[a0 + r];
                }
                s.a6.mul_add(&x[b0..z0], 1.0, &mut out);
                s.a7.mul_add(&x[z0..z0 + self.disc.layout.n4()], -1.0, &mut out);
                out
            })
            .collect())
    }

    /// Scheme data for the step from `prev` to `prev.time + dt`.
    pub fn step_data(&self, prev: &State, dt: f64) -> Result<StepData, SolverError> {
        let time = prev.time + dt;
        match self.cfg.scheme {
            Scheme::BackwardEuler => {
                let rhs = (0..self.num_fields())
                    .map(|f| {
                        let mut r = self.source_vector(f, time);
                        self.sys.m.mul_add(&prev.fields[f].beta, 1.0 / dt, &mut r);
                        r
                    })
                    .collect();
                Ok(StepData { time, mass_coefficient: 1.0 / dt, rhs })
            }
            Scheme::CrankNicolson => {
                let old = self.spatial_operator(&self.stack(prev))?;
                let rhs = (0..self.num_fields())
                    .map(|f| {
                        let mut r = self.source_vector(f, time);
                        for (ri, bi) in r.iter_mut().zip(self.source_vector(f, prev.time)) {
                            *ri += bi;
                        }
                        self.sys.m.mul_add(&prev.fields[f].beta, 2.0 / dt, &mut r);
                        for (ri, oi) in r.iter_mut().zip(&old[f]) {
                            *ri -= oi;
                        }
                        r
                    })
                    .collect();
                Ok(StepData { time, mass_coefficient: 2.0 / dt, rhs })
            }
        }
    }

    /// `G(x)` for the given step data.
    pub fn residual(&self, x: &[f64], data: &StepData) -> Result<Vec<f64>, SolverError> {
        let s = &self.sys;
        let n4 = self.disc.layout.n4();
        let mid = self.spatial_operator(x)?;
        let mut g = vec![0.0; self.num_unknowns()];
        for f in 0..self.num_fields() {
            let (a0, b0, z0) = self.offsets(f);
            let alpha = &x[a0..b0];
            let beta = &x[b0..z0];
            let zeta = &x[z0..z0 + n4];
            let (ga, rest) = g[a0..z0 + n4].split_at_mut(b0 - a0);
            let (gb, gz) = rest.split_at_mut(z0 - b0);
            s.a3.mul_add(alpha, self.inv_diffusion(f), ga);
            s.a4.mul_add(beta, -1.0, ga);
            s.a5.mul_add(zeta, 1.0, ga);
            gb.copy_from_slice(&mid[f]);
            s.m.mul_add(beta, data.mass_coefficient, gb);
            for (gi, ri) in gb.iter_mut().zip(&data.rhs[f]) {
                *gi -= ri;
            }
            for (r, c, v) in s.a5.iter() {
                gz[c] += v * alpha[r];
            }
            for (r, c, v) in s.a7.iter() {
                gz[c] += v * beta[r];
            }
            s.a8.mul_add(zeta, -1.0, gz);
        }
        Ok(g)
    }

    /// Global Jacobian of [`Solver::residual`] at `x`.
    pub fn jacobian(&self, x: &[f64], data: &StepData) -> Result<SparseMatrix, SolverError> {
        let s = &self.sys;
        let l = &self.disc.layout;
        let dfs = self.reaction_derivatives(&self.gammas(x))?;
        let n = self.num_unknowns();
        let mut t = TripletBuilder::new();
        for f in 0..self.num_fields() {
            let (a0, b0, z0) = self.offsets(f);
            push_sparse(&mut t, &s.a3, a0, a0, self.inv_diffusion(f));
            push_sparse(&mut t, &s.a4, a0, b0, -1.0);
            push_sparse(&mut t, &s.a5, a0, z0, 1.0);
            push_transpose(&mut t, &s.a4, b0, a0, 1.0);
            push_sparse(&mut t, &s.m, b0, b0, data.mass_coefficient);
            push_sparse(&mut t, &s.a6, b0, b0, 1.0);
            push_sparse(&mut t, &s.a7, b0, z0, -1.0);
            push_transpose(&mut t, &s.a5, z0, a0, 1.0);
            push_transpose(&mut t, &s.a7, z0, b0, 1.0);
            push_sparse(&mut t, &s.a8, z0, z0, -1.0);
            for g in 0..self.num_fields() {
                let (ga0, gb0, _) = self.offsets(g);
                let (a10, a11) = weighted_products(s, &self.post, l, &dfs[f][g]);
                push_sparse(&mut t, &a10, b0, ga0, self.inv_diffusion(g));
                push_sparse(&mut t, &a11, b0, gb0, 1.0);
            }
        }
        Ok(t.build(n, n))
    }

    /// `J(x) dx` without forming the global Jacobian.
    pub fn jacobian_action(&self, x: &[f64], data: &StepData, dx: &[f64]) -> Result<Vec<f64>, SolverError> {
        let s = &self.sys;
        let l = &self.disc.layout;
        let dfs = self.reaction_derivatives(&self.gammas(x))?;
        let mut out = self.linear_part(dx, data.mass_coefficient);
        for f in 0..self.num_fields() {
            let (_, b0, _) = self.offsets(f);
            for g in 0..self.num_fields() {
                let (ga0, gb0, gz0) = self.offsets(g);
                let (a10, a11) = weighted_products(s, &self.post, l, &dfs[f][g]);
                a10.mul_add(&dx[ga0..gb0], self.inv_diffusion(g), &mut out[b0..b0 + l.n2()]);
                a11.mul_add(&dx[gb0..gz0], 1.0, &mut out[b0..b0 + l.n2()]);
            }
        }
        Ok(out)
    }

    /// `K x`
    fn linear_part(&self, x: &[f64], mass_coefficient: f64) -> Vec<f64> {
        let s = &self.sys;
        let n4 = self.disc.layout.n4();
        let mut g = vec![0.0; self.num_unknowns()];
        for f in 0..self.num_fields() {
            let (a0, b0, z0) = self.offsets(f);
            let alpha = &x[a0..b0];
            let beta = &x[b0..z0];
            let zeta = &x[z0..z0 + n4];
            let (ga, rest) = g[a0..z0 + n4].split_at_mut(b0 - a0);
            let (gb, gz) = rest.split_at_mut(z0 - b0);
            s.a3.mul_add(alpha, self.inv_diffusion(f), ga);
            s.a4.mul_add(beta, -1.0, ga);
            s.a5.mul_add(zeta, 1.0, ga);
            for (r, c, v) in s.a4.iter() {
                gb[c] += v * alpha[r];
            }
            s.m.mul_add(beta, mass_coefficient, gb);
            s.a6.mul_add(beta, 1.0, gb);
            s.a7.mul_add(zeta, -1.0, gb);
            for (r, c, v) in s.a5.iter() {
                gz[c] += v * alpha[r];
            }
            for (r, c, v) in s.a7.iter() {
                gz[c] += v * beta[r];
            }
            s.a8.mul_add(zeta, -1.0, gz);
        }
        g
    }

    /// Global trace indices of element `e`'s faces for field `f`, with the
    /// local face number of each block.
    fn element_traces(&self, e: usize, f: usize) -> Vec<(usize, usize)> {
        element_traces(&self.disc, e, f)
    }

    /// Solves `J(x) dx = rhs` by eliminating flux and scalar unknowns element
    /// by element, leaving a global system in the trace unknowns only.
    pub fn condensed_solve(&self, x: &[f64], data: &StepData, rhs: &[f64]) -> Result<Vec<f64>, SolverError> {
        let m = self.num_fields();
        let l = &self.disc.layout;
        let (nk, nk1, nf, n4) = (l.nk(), l.nk1(), l.nf(), l.n4());
        let loc = 3 * nk;
        let dfs = self.reaction_derivatives(&self.gammas(x))?;

        let mut trace_rhs = vec![0.0; m * n4];
        for f in 0..m {
            let (_, _, z0) = self.offsets(f);
            trace_rhs[f * n4..(f + 1) * n4].copy_from_slice(&rhs[z0..z0 + n4]);
        }

        let mut locals = Vec::with_capacity(l.num_elements());
        for e in 0..l.num_elements() {
            let blk = &self.sys.elements[e];
            let mut a = DMatrix::zeros(m * loc, m * loc);
            let mut r = DVector::zeros(m * loc);
            let traces_per_field: Vec<Vec<(usize, usize)>> = (0..m).map(|f| self.element_traces(e, f)).collect();
            let nt: usize = traces_per_field.iter().map(|t| t.len() * nf).sum();
            let mut b = DMatrix::zeros(m * loc, nt);
            let mut c = DMatrix::zeros(nt, m * loc);
            let mut d = DMatrix::zeros(nt, nt);
            let mut traces = Vec::with_capacity(nt);
            for f in 0..m {
                let o = f * loc;
                add_block(&mut a, o, o, &blk.a3, self.inv_diffusion(f));
                add_block(&mut a, o, o + 2 * nk, &blk.a4, -1.0);
                add_block(&mut a, o + 2 * nk, o, &blk.a4.transpose(), 1.0);
                add_block(&mut a, o + 2 * nk, o + 2 * nk, &blk.m, data.mass_coefficient);
                add_block(&mut a, o + 2 * nk, o + 2 * nk, &blk.a6, 1.0);
                for g in 0..m {
                    let og = g * loc;
                    let (a10, a11) = weighted_element_blocks(&self.sys, &self.post, e, &dfs[f][g][e * nk1..(e + 1) * nk1]);
                    add_block(&mut a, o + 2 * nk, og, &a10, self.inv_diffusion(g));
                    add_block(&mut a, o + 2 * nk, og + 2 * nk, &a11, 1.0);
                }
                let (a0, b0, _) = self.offsets(f);
                for j in 0..2 * nk {
                    r[o + j] = rhs[a0 + 2 * nk * e + j];
                }
                for j in 0..nk {
                    r[o + 2 * nk + j] = rhs[b0 + nk * e + j];
                }
                for &(lf, t0) in &traces_per_field[f] {
                    let fb = &blk.faces[lf];
                    let col = traces.len();
                    add_block(&mut b, o, col, &fb.a5, 1.0);
                    add_block(&mut b, o + 2 * nk, col, &fb.a7, -1.0);
                    add_block(&mut c, col, o, &fb.a5.transpose(), 1.0);
                    add_block(&mut c, col, o + 2 * nk, &fb.a7.transpose(), 1.0);
                    add_block(&mut d, col, col, &fb.a8, -1.0);
                    traces.extend(t0..t0 + nf);
                }
            }
            locals.push(LocalSystem { a, b, c, d, r, traces });
        }

        let sys = condense(&locals, &trace_rhs, &self.coupled_pattern)?;
        let trace = sys.solve_trace(self.cfg.linear_solver)?;
        let local_sol = sys.back_substitute(&locals, &trace);

        let mut dx = vec![0.0; self.num_unknowns()];
        for f in 0..m {
            let (a0, b0, z0) = self.offsets(f);
            dx[z0..z0 + n4].copy_from_slice(&trace[f * n4..(f + 1) * n4]);
            for (e, sol) in local_sol.iter().enumerate() {
                let o = f * loc;
                for j in 0..2 * nk {
                    dx[a0 + 2 * nk * e + j] = sol[o + j];
                }
                for j in 0..nk {
                    dx[b0 + nk * e + j] = sol[o + 2 * nk + j];
                }
            }
        }
        Ok(dx)
    }

    /// Solves `J(x) dx = rhs` with the assembled global Jacobian and a dense
    /// LU factorization. Reference path for small problems.
    pub fn monolithic_solve(&self, x: &[f64], data: &StepData, rhs: &[f64]) -> Result<Vec<f64>, SolverError> {
        let jac = self.jacobian(x, data)?.to_dense();
        let b = DVector::from_column_slice(rhs);
        let sol = jac.lu().solve(&b).ok_or(SolverError::SingularTrace)?;
        Ok(sol.iter().copied().collect())
    }

    /// Newton's method on `G(x) = 0` from `x0`.
    pub fn newton_solve(&self, x0: &[f64], data: &StepData) -> Result<(Vec<f64>, NewtonReport), SolverError> {
        let tol = self.cfg.newton_tol * (self.num_unknowns() as f64).sqrt();
        let mut x = x0.to_vec();
        let mut g = self.residual(&x, data)?;
        let mut history = vec![norm(&g)];
        let mut iterations = 0;
        while *history.last().expect("nonempty") > tol {
            if iterations == self.cfg.newton_max_iter {
                return Err(SolverError::NewtonDiverged {
                    time: data.time,
                    iterations,
                    residual: *history.last().expect("nonempty"),
                });
            }
            let neg: Vec<f64> = g.iter().map(|v| -v).collect();
            let dx = self.condensed_solve(&x, data, &neg)?;
            for (xi, di) in x.iter_mut().zip(&dx) {
                *xi += di;
            }
            g = self.residual(&x, data)?;
            let r = norm(&g);
            iterations += 1;
            history.push(r);
            if !r.is_finite() {
                return Err(SolverError::NewtonDiverged { time: data.time, iterations, residual: r });
            }
        }
        Ok((x, NewtonReport { iterations, history }))
    }

    /// Projected initial data. The scalar part comes from the problem's
    /// projection policy; flux and trace then solve the flux and trace
    /// equations with that scalar part held fixed.
    pub fn initial_state(&self) -> Result<State, SolverError> {
        let k = self.disc.degree();
        let tau = Stabilization::uniform(&self.disc.mesh, self.cfg.tau);
        let mut betas = Vec::with_capacity(self.num_fields());
        for (fi, field) in self.problem.fields.iter().enumerate() {
            let u0 = &field.initial;
            let beta = match self.problem.initial_projection {
                InitialProjection::Hdg => {
                    let exact = field.exact.as_ref().ok_or(SolverError::MissingExactFlux { field: fi })?;
                    let q = exact.q.clone();
                    hdg_project(&self.disc, &|p| q(0.0, p), &|p| u0(p), &tau)?.1
                }
                InitialProjection::L2 => l2_project_element(&self.disc.mesh, &|p| u0(p), k)?,
            };
            betas.push(beta);
        }
        let fields = betas
            .into_iter()
            .enumerate()
            .map(|(f, beta)| {
                let (alpha, zeta) = self.constrained_flux_trace(f, &beta)?;
                let gamma = self.postprocess(f, &alpha, &beta);
                Ok(FieldState { alpha, beta, zeta, gamma })
            })
            .collect::<Result<Vec<_>, SolverError>>()?;
        Ok(State { time: 0.0, fields })
    }

    /// Flux and trace satisfying rows 1 and 3 for a fixed scalar part.
    fn constrained_flux_trace(&self, f: usize, beta: &[f64]) -> Result<(Vec<f64>, Vec<f64>), SolverError> {
        let l = &self.disc.layout;
        let (nk, nf, n4) = (l.nk(), l.nf(), l.n4());
        let mut trace_rhs = vec![0.0; n4];
        for (r, c, v) in self.sys.a7.iter() {
            trace_rhs[c] -= v * beta[r];
        }
        let mut locals = Vec::with_capacity(l.num_elements());
        for e in 0..l.num_elements() {
            let blk = &self.sys.elements[e];
            let beta_k = DVector::from_column_slice(&beta[nk * e..nk * (e + 1)]);
            let faces = self.element_traces(e, 0);
            let nt = faces.len() * nf;
            let mut b = DMatrix::zeros(2 * nk, nt);
            let mut c = DMatrix::zeros(nt, 2 * nk);
            let mut d = DMatrix::zeros(nt, nt);
            let mut traces = Vec::with_capacity(nt);
            for (lf, t0) in faces {
                let fb = &blk.faces[lf];
                let col = traces.len();
                add_block(&mut b, 0, col, &fb.a5, 1.0);
                add_block(&mut c, col, 0, &fb.a5.transpose(), 1.0);
                add_block(&mut d, col, col, &fb.a8, -1.0);
                traces.extend(t0..t0 + nf);
            }
            locals.push(LocalSystem { a: &blk.a3 * self.inv_diffusion(f), b, c, d, r: &blk.a4 * beta_k, traces });
        }
        let sys = condense(&locals, &trace_rhs, &self.field_pattern)?;
        let zeta = sys.solve_trace(self.cfg.linear_solver)?;
        let alpha = sys.back_substitute(&locals, &zeta).into_iter().flat_map(|v| v.iter().copied().collect::<Vec<_>>()).collect();
        Ok((alpha, zeta))
    }

    /// Advances `prev` by `dt`.
    pub fn step(&self, prev: &State, dt: f64) -> Result<(State, NewtonReport), SolverError> {
        let data = self.step_data(prev, dt)?;
        let x0 = match self.cfg.initial_guess {
            InitialGuess::PreviousStep => self.stack(prev),
            InitialGuess::Zero => vec![0.0; self.num_unknowns()],
        };
        let (x, report) = self.newton_solve(&x0, &data)?;
        Ok((self.unstack(&x, data.time), report))
    }

    pub fn run(&self, snapshots: &[f64]) -> Result<RunOutput, SolverError> {
        self.run_with(snapshots, |_| {})
    }

    /// Runs from the projected initial state to the final time, calling
    /// `observer` after every step. Each requested snapshot time receives the
    /// completed step nearest to it.
    pub fn run_with(&self, snapshots: &[f64], mut observer: impl FnMut(&StepRecord)) -> Result<RunOutput, SolverError> {
        let steps = self.cfg.step_sizes();
        let mut pending: Vec<f64> = snapshots.to_vec();
        pending.sort_by(|a, b| a.total_cmp(b));
        let mut taken = Vec::new();
        let mut state = self.initial_state()?;
        let mut records = Vec::with_capacity(steps.len());
        let mut capture = |state: &State, next: Option<f64>, pending: &mut Vec<f64>| {
            while let Some(&s) = pending.first() {
                let here = (state.time - s).abs();
                if next.is_some_and(|t| (t - s).abs() < here) {
                    break;
                }
                taken.push((s, state.clone()));
                pending.remove(0);
            }
        };
        capture(&state, steps.first().map(|dt| state.time + dt), &mut pending);
        for (i, &dt) in steps.iter().enumerate() {
            let (next, report) = self.step(&state, dt)?;
            state = next;
            let record = StepRecord {
                step: i + 1,
                time: state.time,
                residual_initial: report.initial_residual(),
                residual_final: report.final_residual(),
                newton_iters: report.iterations,
            };
            observer(&record);
            records.push(record);
            capture(&state, steps.get(i + 1).map(|dt| state.time + dt), &mut pending);
        }
        Ok(RunOutput { final_state: state, snapshots: taken, records })
    }
}
