//! Static condensation of element-local unknowns onto a global trace system.
//!
//! Each element contributes
//!
//! ```text
//! [ A  B ] [ l ]   [ r ]
//! [ C  D ] [ t ] = [ . ]
//! ```
//!
//! where `l` are unknowns private to the element and `t` its trace unknowns.
//! Eliminating `l` leaves `sum_K (D - C A^-1 B) t = g - sum_K C A^-1 r`.

use std::sync::OnceLock;

use faer::prelude::Solve;
use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMat};
use nalgebra::{DMatrix, DVector};

use crate::sparse::{SparseMatrix, TripletBuilder};

/// Factorization used for the global trace system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LinearSolver {
    /// Dense LU; only sensible for small meshes.
    Dense,
    /// Sparse LU with partial pivoting.
    #[default]
    SparseDirect,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CondenseError {
    SingularLocal { element: usize },
    SingularTrace,
}

pub struct LocalSystem {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub r: DVector<f64>,
    /// Global trace index of each local trace unknown.
    pub traces: Vec<usize>,
}

/// Sparsity pattern of the condensed trace matrix for a fixed
/// element-to-trace map, with the position of every local Schur complement
/// entry in the compressed-column value array. The symbolic LU analysis is
/// computed on first use and shared by all later factorizations.
pub struct TracePattern {
    n: usize,
    symbolic: SymbolicSparseColMat<usize>,
    /// Row-major `nt x nt` value positions per element.
    positions: Vec<Vec<usize>>,
    lu: OnceLock<Option<SymbolicLu<usize>>>,
}

impl TracePattern {
    pub fn new(n: usize, element_traces: &[Vec<usize>]) -> Self {
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); n];
        for traces in element_traces {
            for &j in traces {
                cols[j].extend_from_slice(traces);
            }
        }
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        col_ptr.push(0);
        for col in &mut cols {
            col.sort_unstable();
            col.dedup();
            row_idx.extend_from_slice(col);
            col_ptr.push(row_idx.len());
        }
        let positions = element_traces
            .iter()
            .map(|traces| {
                let mut pos = Vec::with_capacity(traces.len() * traces.len());
                for &i in traces {
                    for &j in traces {
                        let (lo, hi) = (col_ptr[j], col_ptr[j + 1]);
                        let k = row_idx[lo..hi].binary_search(&i).expect("entry is in the pattern");
                        pos.push(lo + k);
                    }
                }
                pos
            })
            .collect();
        let symbolic = SymbolicSparseColMat::new_checked(n, n, col_ptr, None, row_idx);
        Self { n, symbolic, positions, lu: OnceLock::new() }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.symbolic.row_idx().len()
    }

    fn symbolic_lu(&self) -> Option<&SymbolicLu<usize>> {
        self.lu.get_or_init(|| SymbolicLu::try_new(self.symbolic.as_ref()).ok()).as_ref()
    }
}

struct Eliminated {
    a_inv_b: DMatrix<f64>,
    a_inv_r: DVector<f64>,
}

pub struct TraceSystem<'p> {
    pattern: &'p TracePattern,
    values: Vec<f64>,
    pub rhs: Vec<f64>,
    eliminated: Vec<Eliminated>,
}

/// Forms the condensed trace matrix and right-hand side. `locals[e].traces`
/// must match the trace lists the pattern was built from.
pub fn condense<'p>(
    locals: &[LocalSystem],
    trace_rhs: &[f64],
    pattern: &'p TracePattern,
) -> Result<TraceSystem<'p>, CondenseError> {
    assert_eq!(trace_rhs.len(), pattern.n, "trace rhs does not match the pattern");
    assert_eq!(locals.len(), pattern.positions.len(), "element count does not match the pattern");
    let mut rhs = trace_rhs.to_vec();
    let mut values = vec![0.0; pattern.nnz()];
    let mut eliminated = Vec::with_capacity(locals.len());
    for (element, loc) in locals.iter().enumerate() {
        let nl = loc.a.nrows();
        let nt = loc.b.ncols();
        let mut stacked = DMatrix::zeros(nl, nt + 1);
        stacked.view_mut((0, 0), (nl, nt)).copy_from(&loc.b);
        stacked.column_mut(nt).copy_from(&loc.r);
        let sol = loc.a.clone().lu().solve(&stacked).ok_or(CondenseError::SingularLocal { element })?;
        if sol.iter().any(|v| !v.is_finite()) {
            return Err(CondenseError::SingularLocal { element });
        }
        let a_inv_b = sol.columns(0, nt).into_owned();
        let a_inv_r = sol.column(nt).into_owned();
        let schur = &loc.d - &loc.c * &a_inv_b;
        let corr = &loc.c * &a_inv_r;
        let pos = &pattern.positions[element];
        debug_assert_eq!(pos.len(), nt * nt);
        for (i, &ti) in loc.traces.iter().enumerate() {
            rhs[ti] -= corr[i];
            for j in 0..nt {
                values[pos[i * nt + j]] += schur[(i, j)];
            }
        }
        eliminated.push(Eliminated { a_inv_b, a_inv_r });
    }
    Ok(TraceSystem { pattern, values, rhs, eliminated })
}

impl TraceSystem<'_> {
    /// The condensed matrix with exact zeros dropped.
    pub fn matrix(&self) -> SparseMatrix {
        let mut t = TripletBuilder::new();
        let sym = &self.pattern.symbolic;
        let (col_ptr, row_idx) = (sym.col_ptr(), sym.row_idx());
        for j in 0..self.pattern.n {
            for p in col_ptr[j]..col_ptr[j + 1] {
                t.push(row_idx[p], j, self.values[p]);
            }
        }
        t.build(self.pattern.n, self.pattern.n)
    }

    pub fn solve_trace(&self, solver: LinearSolver) -> Result<Vec<f64>, CondenseError> {
        let n = self.rhs.len();
        if n == 0 {
            return Ok(Vec::new());
        }
        let x: Vec<f64> = match solver {
            LinearSolver::Dense => {
                let m = self.matrix().to_dense();
                let b = DVector::from_column_slice(&self.rhs);
                m.lu().solve(&b).ok_or(CondenseError::SingularTrace)?.iter().copied().collect()
            }
            LinearSolver::SparseDirect => {
                let symbolic = self.pattern.symbolic_lu().ok_or(CondenseError::SingularTrace)?;
                let mat = SparseColMatRef::new(self.pattern.symbolic.as_ref(), &self.values);
                let lu = Lu::try_new_with_symbolic(symbolic.clone(), mat).map_err(|_| CondenseError::SingularTrace)?;
                let b = faer::Col::<f64>::from_fn(n, |i| self.rhs[i]);
                let x = lu.solve(&b);
                (0..n).map(|i| x[i]).collect()
            }
        };
        if x.iter().any(|v| !v.is_finite()) {
            return Err(CondenseError::SingularTrace);
        }
        Ok(x)
    }

    /// Recovers the local unknowns of every element from the trace solution.
    pub fn back_substitute(&self, locals: &[LocalSystem], trace: &[f64]) -> Vec<DVector<f64>> {
        locals
            .iter()
            .zip(&self.eliminated)
            .map(|(loc, el)| {
                let t = DVector::from_iterator(loc.traces.len(), loc.traces.iter().map(|&i| trace[i]));
                &el.a_inv_r - &el.a_inv_b * t
            })
            .collect()
    }
}

fn pattern_of(locals: &[LocalSystem], n: usize) -> TracePattern {
    TracePattern::new(n, &locals.iter().map(|l| l.traces.clone()).collect::<Vec<_>>())
}

/// One-shot condensed solve that builds its own pattern.
pub fn solve_condensed(
    locals: &[LocalSystem],
    trace_rhs: &[f64],
    solver: LinearSolver,
) -> Result<(Vec<DVector<f64>>, Vec<f64>), CondenseError> {
    let pattern = pattern_of(locals, trace_rhs.len());
    let sys = condense(locals, trace_rhs, &pattern)?;
    let trace = sys.solve_trace(solver)?;
    Ok((sys.back_substitute(locals, &trace), trace))
}
