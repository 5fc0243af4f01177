//! The symmetric saddle-point system of one Newton step,
//!
//! ```text
//! [ G   B ] [δr]   [f]
//! [ Bᵀ  0 ] [δu] = [g]
//! ```
//!
//! and its solution. The default is a sparse direct solve (reverse
//! Cuthill–McKee ordering, banded LU with partial pivoting); the ordering is
//! cached and reused while the sparsity pattern stays the same. MINRES with
//! the block-diagonal preconditioner `diag(G, Bᵀ diag(G)⁻¹ B)` is available
//! for large systems. Every returned solution carries its verified relative
//! residual.

pub mod banded;
pub mod minres;
pub mod ordering;

use serde::{Deserialize, Serialize};

use crate::error::LinSolveError;
use crate::sparse::{norm2, CsrMatrix, TripletBuilder};

pub use banded::{BandLu, BandSymbolic};

#[derive(Clone, Debug)]
pub struct SaddleSystem {
    g: CsrMatrix,
    b: CsrMatrix,
    rhs_top: Vec<f64>,
    rhs_bottom: Vec<f64>,
    k: CsrMatrix,
}

pub fn assemble_saddle(
    g: CsrMatrix,
    b: CsrMatrix,
    rhs_top: Vec<f64>,
    rhs_bottom: Vec<f64>,
) -> Result<SaddleSystem, LinSolveError> {
    let (n, m) = (g.nrows(), b.ncols());
    if g.ncols() != n || b.nrows() != n || rhs_top.len() != n || rhs_bottom.len() != m {
        return Err(LinSolveError::Dimension(format!(
            "G {}x{}, B {}x{}, rhs {} + {}",
            g.nrows(),
            g.ncols(),
            b.nrows(),
            b.ncols(),
            rhs_top.len(),
            rhs_bottom.len()
        )));
    }
    let mut t = TripletBuilder::with_capacity(n + m, n + m, g.nnz() + 2 * b.nnz());
    for i in 0..n {
        for (j, v) in g.row(i) {
            t.push(i, j, v);
        }
        for (j, v) in b.row(i) {
            t.push(i, n + j, v);
            t.push(n + j, i, v);
        }
    }
    let k = t.build();
    Ok(SaddleSystem { g, b, rhs_top, rhs_bottom, k })
}

impl SaddleSystem {
    pub fn n_test(&self) -> usize {
        self.g.nrows()
    }

    pub fn n_trial(&self) -> usize {
        self.b.ncols()
    }

    pub fn g(&self) -> &CsrMatrix {
        &self.g
    }

    pub fn b(&self) -> &CsrMatrix {
        &self.b
    }

    /// The assembled symmetric matrix `K`.
    pub fn k(&self) -> &CsrMatrix {
        &self.k
    }

    pub fn rhs(&self) -> Vec<f64> {
        let mut r = self.rhs_top.clone();
        r.extend_from_slice(&self.rhs_bottom);
        r
    }

    /// `‖K x − rhs‖ / ‖rhs‖` (absolute when the right-hand side vanishes).
    pub fn relative_residual(&self, x: &[f64]) -> f64 {
        let rhs = self.rhs();
        let r: Vec<f64> = self.k.mul_vec(x).iter().zip(&rhs).map(|(a, b)| a - b).collect();
        let nb = norm2(&rhs);
        if nb == 0.0 {
            norm2(&r)
        } else {
            norm2(&r) / nb
        }
    }

    fn split(&self, mut x: Vec<f64>) -> (Vec<f64>, Vec<f64>) {
        let du = x.split_off(self.n_test());
        (x, du)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearSolverKind {
    #[default]
    Direct,
    Minres,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearSolverOptions {
    pub kind: LinearSolverKind,
    pub rel_tol: f64,
    pub max_iterations: usize,
}

impl Default for LinearSolverOptions {
    fn default() -> Self {
        LinearSolverOptions { kind: LinearSolverKind::Direct, rel_tol: 1e-10, max_iterations: 5000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolveReport {
    pub method: LinearSolverKind,
    pub relative_residual: f64,
    /// Krylov iterations, or iterative-refinement steps for the direct path.
    pub iterations: usize,
}

/// Saddle-point solver that keeps the symbolic analysis between calls.
#[derive(Debug, Default)]
pub struct SaddleSolver {
    opts: LinearSolverOptions,
    direct: Option<BandSymbolic>,
    precond: Option<(BandSymbolic, BandSymbolic)>,
}

impl SaddleSolver {
    pub fn new(opts: LinearSolverOptions) -> Self {
        SaddleSolver { opts, direct: None, precond: None }
    }

    pub fn options(&self) -> &LinearSolverOptions {
        &self.opts
    }

    /// Returns `(δr, δu)` with `‖K x − rhs‖ ≤ rel_tol ‖rhs‖`.
    pub fn solve(&mut self, sys: &SaddleSystem) -> Result<(Vec<f64>, Vec<f64>, SolveReport), LinSolveError> {
        let rhs = sys.rhs();
        if rhs.iter().all(|&v| v == 0.0) {
            let report = SolveReport { method: self.opts.kind, relative_residual: 0.0, iterations: 0 };
            let (dr, du) = sys.split(vec![0.0; rhs.len()]);
            return Ok((dr, du, report));
        }
        let (x, iterations) = match self.opts.kind {
            LinearSolverKind::Direct => self.solve_direct(sys, &rhs)?,
            LinearSolverKind::Minres => self.solve_minres(sys, &rhs)?,
        };
        let achieved = sys.relative_residual(&x);
        if !(achieved <= self.opts.rel_tol) {
            return Err(LinSolveError::Residual { achieved, tolerance: self.opts.rel_tol });
        }
        let report = SolveReport { method: self.opts.kind, relative_residual: achieved, iterations };
        let (dr, du) = sys.split(x);
        Ok((dr, du, report))
    }

    fn symbolic<'a>(slot: &'a mut Option<BandSymbolic>, a: &CsrMatrix) -> Result<&'a BandSymbolic, LinSolveError> {
        if !slot.as_ref().is_some_and(|s| s.matches(a)) {
            *slot = Some(BandSymbolic::analyze(a)?);
        }
        Ok(slot.as_ref().unwrap())
    }

    fn solve_direct(&mut self, sys: &SaddleSystem, rhs: &[f64]) -> Result<(Vec<f64>, usize), LinSolveError> {
        let sym = Self::symbolic(&mut self.direct, sys.k())?;
        let lu = BandLu::factor(sym, sys.k())?;
        let mut x = lu.solve(rhs);
        let mut steps = 0;
        while steps < 2 && sys.relative_residual(&x) > 1e-2 * self.opts.rel_tol {
            let r: Vec<f64> = rhs.iter().zip(sys.k().mul_vec(&x)).map(|(b, kx)| b - kx).collect();
            let dx = lu.solve(&r);
            x.iter_mut().zip(dx).for_each(|(xi, d)| *xi += d);
            steps += 1;
        }
        Ok((x, steps))
    }

    fn solve_minres(&mut self, sys: &SaddleSystem, rhs: &[f64]) -> Result<(Vec<f64>, usize), LinSolveError> {
        let g = sys.g();
        let schur = approximate_schur(g, sys.b())?;
        if !self.precond.as_ref().is_some_and(|(a, b)| a.matches(g) && b.matches(&schur)) {
            self.precond = Some((BandSymbolic::analyze(g)?, BandSymbolic::analyze(&schur)?));
        }
        let (sg, ss) = self.precond.as_ref().unwrap();
        let lg = BandLu::factor(sg, g)?;
        let ls = BandLu::factor(ss, &schur)?;
        let n = sys.n_test();
        let out = minres::minres(
            |v| sys.k().mul_vec(v),
            |v| {
                let mut z = lg.solve(&v[..n]);
                z.extend(ls.solve(&v[n..]));
                z
            },
            rhs,
            0.1 * self.opts.rel_tol,
            self.opts.max_iterations,
        );
        let achieved = sys.relative_residual(&out.x);
        if achieved > self.opts.rel_tol && out.iterations >= self.opts.max_iterations {
            return Err(LinSolveError::NotConverged { iterations: out.iterations, achieved });
        }
        Ok((out.x, out.iterations))
    }
}

/// `Bᵀ diag(G)⁻¹ B`.
fn approximate_schur(g: &CsrMatrix, b: &CsrMatrix) -> Result<CsrMatrix, LinSolveError> {
    let m = b.ncols();
    let mut t = TripletBuilder::new(m, m);
    for k in 0..b.nrows() {
        let d = g.get(k, k);
        if !(d > 0.0) {
            return Err(LinSolveError::Factorization(format!("non-positive diagonal {d} in G at row {k}")));
        }
        let row: Vec<(usize, f64)> = b.row(k).collect();
        for &(i, bi) in &row {
            for &(j, bj) in &row {
                t.push(i, j, bi * bj / d);
            }
        }
    }
    Ok(t.build())
}

/// One-shot direct solve of `sys` at relative tolerance `rel_tol`.
pub fn solve_symmetric_indefinite(
    sys: &SaddleSystem,
    rel_tol: f64,
) -> Result<(Vec<f64>, Vec<f64>, SolveReport), LinSolveError> {
    SaddleSolver::new(LinearSolverOptions { rel_tol, ..Default::default() }).solve(sys)
}
