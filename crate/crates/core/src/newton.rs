//! Damped Newton iteration on the mixed formulation
//!
//! ```text
//! J(r) + A(u) = F        (tested with free CR functions)
//! B(u)ᵀ r     = 0        (tested with free P1 functions)
//! ```
//!
//! and continuation in the exponent starting from the linear case `p = 2`.
//! The Newton step drops the second derivative of `A` that would multiply
//! `r`, which keeps the linearized system symmetric:
//! `[[G, B], [Bᵀ, 0]] [δr; δu] = [F − J(r) − A(u); −Bᵀ r]`.

use serde::{Deserialize, Serialize};

use crate::error::{FormsError, LinSolveError};
use crate::forms::NonlinearForms;
use crate::linsolve::{assemble_saddle, LinearSolverOptions, SaddleSolver};
use crate::sparse::norm2;
use crate::telemetry::{Event, Telemetry};

/// Residual below which a state is accepted without another step, relative
/// to the larger of `‖F‖` and the initial residual.
pub const EXACT_RESIDUAL_RTOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteState {
    /// Complete P1 coefficients (boundary values included).
    pub u: Vec<f64>,
    /// Complete CR coefficients (boundary entries zero).
    pub r: Vec<f64>,
    pub p_current: f64,
}

impl DiscreteState {
    /// Zero interior values, prescribed boundary values, `r = 0`, `p = 2`.
    pub fn initial(forms: &NonlinearForms) -> Self {
        DiscreteState {
            u: forms.trial().initial_coefficients(),
            r: vec![0.0; forms.test().n_total()],
            p_current: 2.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u.iter().chain(&self.r).all(|v| v.is_finite())
    }

    fn check(&self, forms: &NonlinearForms) -> Result<(), FormsError> {
        forms.trial().check_len(&self.u)?;
        forms.test().check_len(&self.r)?;
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DampingOptions {
    pub enabled: bool,
    pub factor: f64,
    pub max_halvings: usize,
}

impl Default for DampingOptions {
    fn default() -> Self {
        DampingOptions { enabled: true, factor: 0.5, max_halvings: 12 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub newton_tol: f64,
    pub max_newton: usize,
    pub continuation_step: f64,
    pub min_step: f64,
    pub damping: DampingOptions,
    pub linear: LinearSolverOptions,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            newton_tol: 1e-8,
            max_newton: 50,
            continuation_step: 0.10,
            min_step: 1e-3,
            damping: DampingOptions::default(),
            linear: LinearSolverOptions::default(),
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("newton_tol", self.newton_tol),
            ("continuation_step", self.continuation_step),
            ("min_step", self.min_step),
            ("linear.rel_tol", self.linear.rel_tol),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if self.max_newton == 0 {
            return Err("max_newton must be at least 1".into());
        }
        if self.continuation_step < self.min_step {
            return Err(format!(
                "continuation_step {} is smaller than min_step {}",
                self.continuation_step, self.min_step
            ));
        }
        if !(self.damping.factor > 0.0 && self.damping.factor < 1.0) {
            return Err(format!("damping.factor must lie in (0, 1), got {}", self.damping.factor));
        }
        Ok(())
    }
}

/// `(F − J(r) − A(u), −B(u)ᵀ r)` over free test and free trial DOFs.
pub fn nonlinear_residual(forms: &NonlinearForms, state: &DiscreteState) -> Result<(Vec<f64>, Vec<f64>), FormsError> {
    state.check(forms)?;
    let j = forms.apply_j(&state.r)?;
    let a = forms.apply_a(&state.u)?;
    let top = forms.load_vector().iter().zip(j.iter().zip(&a)).map(|(f, (j, a))| f - j - a).collect();
    let bottom = forms.apply_da_transpose(&state.u, &state.r)?.into_iter().map(|v| -v).collect();
    Ok((top, bottom))
}

fn residual_norm(forms: &NonlinearForms, state: &DiscreteState) -> Result<f64, FormsError> {
    let (top, bottom) = nonlinear_residual(forms, state)?;
    Ok(top.iter().chain(&bottom).map(|v| v * v).sum::<f64>().sqrt())
}

#[derive(Clone, Debug)]
pub struct NewtonOutcome {
    pub state: DiscreteState,
    pub iterations: usize,
    pub damping_events: usize,
    /// Undamped increment norms, one per iteration.
    pub increments: Vec<f64>,
}

impl NewtonOutcome {
    pub fn final_increment(&self) -> f64 {
        self.increments.last().copied().unwrap_or(0.0)
    }
}

#[derive(Clone, Debug, thiserror::Error)]
pub enum NewtonFailureKind {
    #[error("no convergence within {0} iterations")]
    MaxIterations(usize),
    #[error(transparent)]
    LinearSolve(#[from] LinSolveError),
    #[error(transparent)]
    Forms(#[from] FormsError),
    #[error("iterate became non-finite")]
    NonFinite,
}

/// A Newton run that did not converge; carries the last finite iterate.
#[derive(Clone, Debug, thiserror::Error)]
#[error("Newton failed at p = {p} after {iterations} iterations: {kind}")]
pub struct NewtonFailure {
    pub kind: NewtonFailureKind,
    pub p: f64,
    pub state: DiscreteState,
    pub iterations: usize,
    pub damping_events: usize,
}

/// Newton iteration at `forms.p()` from `init`.
pub fn newton_solve(
    forms: &NonlinearForms,
    init: DiscreteState,
    opts: &SolverOptions,
    solver: &mut SaddleSolver,
    telemetry: &mut Telemetry,
) -> Result<NewtonOutcome, NewtonFailure> {
    let p = forms.p();
    let mut state = DiscreteState { p_current: p, ..init };
    let mut iterations = 0;
    let mut damping_events = 0;
    let mut increments = Vec::new();
    let fail = |kind: NewtonFailureKind, state: DiscreteState, iterations, damping_events| NewtonFailure {
        kind,
        p,
        state,
        iterations,
        damping_events,
    };
    if let Err(e) = state.check(forms) {
        return Err(fail(e.into(), state, 0, 0));
    }
    if !state.is_finite() {
        return Err(fail(NewtonFailureKind::NonFinite, state, 0, 0));
    }
    let trial = forms.trial().clone();
    let test = forms.test().clone();
    let load_norm = norm2(forms.load_vector());
    let mut exact_threshold = None;

    loop {
        let (top, bottom) = match nonlinear_residual(forms, &state) {
            Ok(r) => r,
            Err(e) => return Err(fail(e.into(), state, iterations, damping_events)),
        };
        let res = top.iter().chain(&bottom).map(|v| v * v).sum::<f64>().sqrt();
        let threshold = *exact_threshold.get_or_insert(EXACT_RESIDUAL_RTOL * load_norm.max(res));
        if res <= threshold {
            return Ok(NewtonOutcome { state, iterations, damping_events, increments });
        }
        if iterations >= opts.max_newton {
            return Err(fail(NewtonFailureKind::MaxIterations(iterations), state, iterations, damping_events));
        }

        let step = (|| -> Result<_, NewtonFailureKind> {
            let g = forms.assemble_dj(&state.r)?;
            let b = forms.assemble_da(&state.u)?;
            let sys = assemble_saddle(g, b, top, bottom)?;
            Ok(solver.solve(&sys)?)
        })();
        let (dr_free, du_free, report) = match step {
            Ok(s) => s,
            Err(kind) => return Err(fail(kind, state, iterations, damping_events)),
        };
        let mut dr = vec![0.0; test.n_total()];
        for (&d, v) in test.free_dofs().iter().zip(&dr_free) {
            dr[d] = *v;
        }
        let mut du = vec![0.0; trial.n_total()];
        for (&d, v) in trial.free_dofs().iter().zip(&du_free) {
            du[d] = *v;
        }
        let increment = test.broken_seminorm_pow(&dr, p).powf(1.0 / p) + trial.broken_seminorm_pow(&du, p).powf(1.0 / p);
        if !increment.is_finite() {
            return Err(fail(NewtonFailureKind::NonFinite, state, iterations, damping_events));
        }

        let candidate = |alpha: f64| DiscreteState {
            u: state.u.iter().zip(&du).map(|(a, b)| a + alpha * b).collect(),
            r: state.r.iter().zip(&dr).map(|(a, b)| a + alpha * b).collect(),
            p_current: p,
        };
        let mut alpha = 1.0;
        let mut halvings = 0;
        let mut next = candidate(alpha);
        let mut next_res = residual_norm(forms, &next).unwrap_or(f64::INFINITY);
        if opts.damping.enabled {
            let (mut best_alpha, mut best_res) = (alpha, next_res);
            while !(next_res < res) && halvings < opts.damping.max_halvings {
                alpha *= opts.damping.factor;
                halvings += 1;
                let c = candidate(alpha);
                let cr = residual_norm(forms, &c).unwrap_or(f64::INFINITY);
                if cr < best_res || !best_res.is_finite() {
                    best_alpha = alpha;
                    best_res = cr;
                }
                next = c;
                next_res = cr;
            }
            if !(next_res < res) && best_alpha != alpha {
                alpha = best_alpha;
                next = candidate(alpha);
                next_res = best_res;
            }
        }
        let damped = alpha < 1.0;
        if damped {
            damping_events += 1;
        }
        if !next.is_finite() || !next_res.is_finite() {
            return Err(fail(NewtonFailureKind::NonFinite, state, iterations, damping_events));
        }
        if next_res > res {
            log::debug!("p = {p}: accepted step increases the residual ({res:e} -> {next_res:e})");
        }
        iterations += 1;
        increments.push(increment);
        telemetry.emit(&Event::NewtonIteration {
            level: telemetry.level(),
            p,
            iteration: iterations,
            residual_norm: res,
            increment_norm: increment,
            alpha,
            halvings,
            damped,
            residual_after: next_res,
            linear_residual: report.relative_residual,
            linear_iterations: report.iterations,
        });
        state = next;
        if increment < opts.newton_tol {
            return Ok(NewtonOutcome { state, iterations, damping_events, increments });
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TargetRecord {
    pub p: f64,
    pub iterations: usize,
    pub damping_events: usize,
    pub final_increment: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct IterationLog {
    pub records: Vec<TargetRecord>,
    pub total_iterations: usize,
    pub total_damping_events: usize,
}

impl IterationLog {
    fn push(&mut self, rec: TargetRecord) {
        self.total_iterations += rec.iterations;
        self.total_damping_events += rec.damping_events;
        self.records.push(rec);
    }
}

#[derive(Clone, Debug, thiserror::Error)]
#[error("continuation toward p = {p_target} aborted at p = {p_reached} with step {step:e}: {last_failure}")]
pub struct ContinuationFailure {
    pub p_target: f64,
    pub p_reached: f64,
    pub step: f64,
    pub state: DiscreteState,
    pub log: IterationLog,
    pub last_failure: Box<NewtonFailure>,
}

/// Where the continuation path starts.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StartPolicy {
    /// Solve the linear problem first and step toward the target.
    #[default]
    FromLinear,
    /// Try Newton at the target directly from the initial state, falling
    /// back to the full path if that fails.
    AtTarget,
}

/// Solves at `p_target` by continuation from `p = 2`. `init` defaults to
/// zero interior values with the prescribed boundary data.
pub fn continuation_solve(
    forms: &NonlinearForms,
    p_target: f64,
    init: Option<DiscreteState>,
    start: StartPolicy,
    opts: &SolverOptions,
    solver: &mut SaddleSolver,
    telemetry: &mut Telemetry,
) -> Result<(DiscreteState, IterationLog), ContinuationFailure> {
    let mut log = IterationLog::default();
    let init = init.unwrap_or_else(|| DiscreteState::initial(forms));
    let at = |p: f64| forms.with_p(p).expect("exponent validated by caller");
    let abort = |p_reached: f64, step: f64, state: DiscreteState, log: IterationLog, f: NewtonFailure| {
        ContinuationFailure { p_target, p_reached, step, state, log, last_failure: Box::new(f) }
    };
    let record = |log: &mut IterationLog, telemetry: &mut Telemetry, p: f64, step: f64, it: usize, damp: usize, inc: f64, ok: bool| {
        telemetry.emit(&Event::ContinuationStep {
            level: telemetry.level(),
            p,
            step,
            converged: ok,
            iterations: it,
            damping_events: damp,
        });
        log.push(TargetRecord { p, iterations: it, damping_events: damp, final_increment: inc, converged: ok });
    };

    if start == StartPolicy::AtTarget {
        match newton_solve(&at(p_target), init.clone(), opts, solver, telemetry) {
            Ok(out) => {
                record(&mut log, telemetry, p_target, 0.0, out.iterations, out.damping_events, out.final_increment(), true);
                return Ok((out.state, log));
            }
            Err(f) => {
                log::info!("direct solve at p = {p_target} failed ({}); falling back to continuation", f.kind);
                record(&mut log, telemetry, p_target, 0.0, f.iterations, f.damping_events, f64::NAN, false);
            }
        }
    }

    let mut state = match newton_solve(&at(2.0), init, opts, solver, telemetry) {
        Ok(out) => {
            record(&mut log, telemetry, 2.0, 0.0, out.iterations, out.damping_events, out.final_increment(), true);
            out.state
        }
        Err(f) => {
            record(&mut log, telemetry, 2.0, 0.0, f.iterations, f.damping_events, f64::NAN, false);
            let s = f.state.clone();
            return Err(abort(2.0, 0.0, s, log, f));
        }
    };

    let mut p = 2.0;
    let mut step = opts.continuation_step;
    while p != p_target {
        let dir = (p_target - p).signum();
        let mut next = p + dir * step;
        if (p_target - next) * dir <= 1e-12 {
            next = p_target;
        }
        match newton_solve(&at(next), state.clone(), opts, solver, telemetry) {
            Ok(out) => {
                record(&mut log, telemetry, next, next - p, out.iterations, out.damping_events, out.final_increment(), true);
                state = out.state;
                p = next;
                step = opts.continuation_step;
            }
            Err(f) => {
                record(&mut log, telemetry, next, next - p, f.iterations, f.damping_events, f64::NAN, false);
                step *= 0.5;
                log::debug!("Newton failed at p = {next} ({}); retrying with step {step}", f.kind);
                if step < opts.min_step {
                    return Err(abort(p, step, state, log, f));
                }
            }
        }
    }
    Ok((state, log))
}
