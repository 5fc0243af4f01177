//! Refinement studies: one continuation solve per level, followed by uniform
//! refinement or Dörfler-marked bisection.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use crate::config::{ProblemConfig, Strategy, WarmStart};
use crate::error::{Error, Result};
use crate::estimate::{dorfler_mark, estimator_global, exact_error, ExactSolution, StudyRecord};
use crate::forms::NonlinearForms;
use crate::linsolve::SaddleSolver;
use crate::mesh::{refine_marked, refine_uniform, unit_square_mesh, Mesh};
use crate::newton::{continuation_solve, newton_solve, DiscreteState, StartPolicy};
use crate::quadrature::QuadRule;
use crate::spaces::DofMap;
use crate::telemetry::{Event, Telemetry};

/// Everything kept about one level besides its record.
#[derive(Clone, Debug)]
pub struct LevelData {
    pub record: StudyRecord,
    pub mesh: Arc<Mesh>,
    /// Triangles of `mesh` selected by the marking step (adaptive only).
    pub marked: Vec<usize>,
    /// Triangles of `mesh` split when producing the next level's mesh,
    /// closure included. Empty for the last level.
    pub refined: Vec<usize>,
    pub state: DiscreteState,
}

#[derive(Clone, Debug, Default)]
pub struct StudyOutcome {
    pub levels: Vec<LevelData>,
    /// Files written (CSV, snapshots, telemetry).
    pub artifacts: Vec<PathBuf>,
}

impl StudyOutcome {
    pub fn records(&self) -> Vec<StudyRecord> {
        self.levels.iter().map(|l| l.record.clone()).collect()
    }
}

/// A study that stopped early; `partial` holds the completed levels.
#[derive(Debug, thiserror::Error)]
#[error("study stopped after {} completed levels: {source}", partial.levels.len())]
pub struct StudyError {
    pub partial: StudyOutcome,
    #[source]
    pub source: Error,
}

/// Spaces for one mesh: P1 with the exact solution as boundary data, CR
/// with homogeneous boundary values.
pub fn build_spaces(mesh: &Arc<Mesh>, es: &ExactSolution) -> (Arc<DofMap>, Arc<DofMap>) {
    let trial = Arc::new(DofMap::p1_with_boundary(mesh.clone(), |x| es.value(x)));
    let test = Arc::new(DofMap::cr(mesh.clone()));
    (trial, test)
}

/// Moves a state to a refined mesh. `u` is prolongated exactly (inherited
/// vertex values, averages at new midpoints) and then given the new
/// boundary data; `r` is CR-interpolated from the old broken function, with
/// edges lying on old edges taking the average of both sides.
///
/// Falls back to the zero-interior initial state when the new mesh carries
/// no genealogy or the sizes do not match.
pub fn transfer_state(old: &DiscreteState, old_mesh: &Mesh, new_trial: &DofMap, new_test: &DofMap) -> DiscreteState {
    let new_mesh = new_trial.mesh();
    let fallback = || DiscreteState {
        u: new_trial.initial_coefficients(),
        r: vec![0.0; new_test.n_total()],
        p_current: old.p_current,
    };
    let Some(gen) = new_mesh.genealogy() else {
        log::warn!("refined mesh has no genealogy; starting from zero");
        return fallback();
    };
    if gen.coarse_vertices != old_mesh.num_vertices()
        || old.u.len() != old_mesh.num_vertices()
        || old.r.len() != old_mesh.num_edges()
        || gen.parent.iter().any(|&t| t >= old_mesh.num_triangles())
    {
        log::warn!("genealogy does not match the previous mesh; starting from zero");
        return fallback();
    }

    let mut u = Vec::with_capacity(new_mesh.num_vertices());
    u.extend_from_slice(&old.u);
    for &[a, b] in &gen.midpoint_of {
        u.push(0.5 * (old.u[a] + old.u[b]));
    }
    for &d in new_trial.constrained_dofs() {
        u[d] = new_trial.constrained_values()[d];
    }

    let old_cr = DofMap::cr(Arc::new(old_mesh.clone()));
    let eval_in = |t: usize, x: [f64; 2]| {
        let [a, b, c] = old_mesh.triangle_points(t);
        let det = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let l1 = ((x[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (x[1] - a[1])) / det;
        let l2 = ((b[0] - a[0]) * (x[1] - a[1]) - (x[0] - a[0]) * (b[1] - a[1])) / det;
        old_cr.eval_barycentric(&old.r, t, [1.0 - l1 - l2, l1, l2])
    };
    let r = (0..new_mesh.num_edges())
        .map(|e| {
            if new_mesh.is_boundary_edge(e) {
                return 0.0;
            }
            let mid = new_mesh.edge_midpoint(e);
            let parents: Vec<usize> = new_mesh.edge_triangles(e).iter().flatten().map(|&t| gen.parent[t]).collect();
            if parents.len() == 2 && parents[0] == parents[1] {
                eval_in(parents[0], mid)
            } else {
                parents.iter().map(|&t| eval_in(t, mid)).sum::<f64>() / parents.len() as f64
            }
        })
        .collect();
    DiscreteState { u, r, p_current: old.p_current }
}

/// Triangles of the coarse mesh that were split to produce `fine`.
pub fn refined_parents(fine: &Mesh, coarse_triangles: usize) -> Vec<usize> {
    let Some(gen) = fine.genealogy() else { return Vec::new() };
    let mut children = vec![0usize; coarse_triangles];
    for &t in &gen.parent {
        children[t] += 1;
    }
    (0..coarse_triangles).filter(|&t| children[t] > 1).collect()
}

struct LevelSolve {
    forms: NonlinearForms,
    state: DiscreteState,
    newton_total: usize,
    damping_events: usize,
}

fn solve_level(
    cfg: &ProblemConfig,
    mesh: &Arc<Mesh>,
    es: &ExactSolution,
    p: f64,
    init: Option<DiscreteState>,
    telemetry: &mut Telemetry,
) -> Result<LevelSolve> {
    let (trial, test) = build_spaces(mesh, es);
    let forms = NonlinearForms::new(trial, test, p, es.load(), &QuadRule::with_degree(cfg.load_quad_degree))?;
    let mut solver = SaddleSolver::new(cfg.solver.linear);
    let start = if cfg.warm_start == WarmStart::AtTarget && init.is_some() {
        StartPolicy::AtTarget
    } else {
        StartPolicy::FromLinear
    };
    let (state, log) = continuation_solve(&forms, p, init, start, &cfg.solver, &mut solver, telemetry)
        .map_err(|f| Error::Continuation(f.to_string()))?;
    Ok(LevelSolve { forms, state, newton_total: log.total_iterations, damping_events: log.total_damping_events })
}

/// Adaptive refinement at `p = 2` from `mesh` for `steps` steps.
pub fn pre_adapt(cfg: &ProblemConfig, mut mesh: Arc<Mesh>, steps: usize) -> Result<Arc<Mesh>> {
    let es = ExactSolution::new(cfg.p_target, cfg.sigma, cfg.x0);
    for _ in 0..steps {
        let (trial, test) = build_spaces(&mesh, &es);
        let forms =
            NonlinearForms::new(trial, test, 2.0, es.load(), &QuadRule::with_degree(cfg.load_quad_degree))?;
        let mut solver = SaddleSolver::new(cfg.solver.linear);
        let out = newton_solve(
            &forms,
            DiscreteState::initial(&forms),
            &cfg.solver,
            &mut solver,
            &mut Telemetry::disabled(),
        )
        .map_err(|f| Error::Continuation(f.to_string()))?;
        let marked = dorfler_mark(&forms.local_indicators(&out.state.r)?, cfg.theta)?;
        mesh = Arc::new(refine_marked(&mesh, &marked)?);
    }
    Ok(mesh)
}

fn write_snapshot(dir: &Path, level: usize, mesh: &Mesh, indicators: &[f64], artifacts: &mut Vec<PathBuf>) -> Result<()> {
    let svg = dir.join(format!("mesh_level{level:02}.svg"));
    mesh.write_svg(BufWriter::new(File::create(&svg)?), 800.0)?;
    artifacts.push(svg);
    let vtk = dir.join(format!("mesh_level{level:02}.vtk"));
    mesh.write_vtk(BufWriter::new(File::create(&vtk)?), Some(("indicator", indicators)))?;
    artifacts.push(vtk);
    Ok(())
}

pub fn write_records_csv(path: &Path, records: &[StudyRecord]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Runs the study described by `cfg`. When `cfg.output.dir` is set the
/// records CSV is rewritten after every level, so a failed study leaves
/// the completed rows behind.
pub fn run_study(cfg: &ProblemConfig, telemetry: &mut Telemetry) -> std::result::Result<StudyOutcome, StudyError> {
    let mut outcome = StudyOutcome::default();
    match run_levels(cfg, telemetry, &mut outcome) {
        Ok(()) => Ok(outcome),
        Err(source) => Err(StudyError { partial: outcome, source }),
    }
}

fn run_levels(cfg: &ProblemConfig, telemetry: &mut Telemetry, outcome: &mut StudyOutcome) -> Result<()> {
    cfg.validate()?;
    let out_dir = cfg.output.dir.clone();
    if let Some(dir) = &out_dir {
        std::fs::create_dir_all(dir)?;
    }
    let es = ExactSolution::new(cfg.p_target, cfg.sigma, cfg.x0);
    let error_quad = QuadRule::with_degree(cfg.error_quad_degree);

    let mut mesh = Arc::new(unit_square_mesh(cfg.initial_n)?);
    if cfg.strategy == Strategy::PreAdaptedThenUniform {
        mesh = pre_adapt(cfg, mesh, cfg.pre_adapt_steps)?;
    }

    let mut previous: Option<(Arc<Mesh>, DiscreteState)> = None;
    for level in 0..cfg.max_levels {
        let started = Instant::now();
        telemetry.set_level(Some(level));
        let init = match (&previous, cfg.warm_start) {
            (Some((old_mesh, old_state)), WarmStart::Restart | WarmStart::AtTarget) => {
                let (trial, test) = build_spaces(&mesh, &es);
                Some(transfer_state(old_state, old_mesh, &trial, &test))
            }
            _ => None,
        };
        let solved = solve_level(cfg, &mesh, &es, cfg.p_target, init, telemetry)?;
        let forms = &solved.forms;
        let r = &solved.state.r;
        let eta = estimator_global(forms, r);
        let error = exact_error(forms.trial(), &solved.state.u, &es, &error_quad);
        let indicators = forms.local_indicators(r)?;
        let wall_ms = started.elapsed().as_secs_f64() * 1e3;

        let (n_free_trial, n_free_test) = (forms.trial().n_free(), forms.test().n_free());
        let record = StudyRecord {
            level,
            n_free_trial,
            n_free_test,
            n_total: n_free_trial + n_free_test,
            h_max: mesh.h_max(),
            error,
            eta,
            eta_over_error: eta / error,
            eta_root_over_error: eta.powf(1.0 / (cfg.p_target - 1.0)) / error,
            newton_total: solved.newton_total,
            damping_events: solved.damping_events,
            wall_ms,
        };
        log::info!(
            "level {level}: n_total = {}, error = {error:.4e}, eta = {eta:.4e}, newton = {}",
            record.n_total,
            record.newton_total
        );
        telemetry.emit(&Event::Level {
            level,
            n_total: record.n_total,
            error,
            eta,
            newton_total: record.newton_total,
            wall_ms,
        });

        if let Some(dir) = &out_dir {
            if cfg.output.snapshot_levels.contains(&level) {
                write_snapshot(dir, level, &mesh, &indicators, &mut outcome.artifacts)?;
            }
        }

        let mut data = LevelData {
            record,
            mesh: mesh.clone(),
            marked: Vec::new(),
            refined: Vec::new(),
            state: solved.state.clone(),
        };
        if level + 1 < cfg.max_levels {
            let next = match cfg.strategy {
                Strategy::Uniform | Strategy::PreAdaptedThenUniform => refine_uniform(&mesh)?,
                Strategy::Adaptive => {
                    data.marked = dorfler_mark(&indicators, cfg.theta)?;
                    refine_marked(&mesh, &data.marked)?
                }
            };
            data.refined = refined_parents(&next, mesh.num_triangles());
            previous = Some((mesh.clone(), solved.state));
            mesh = Arc::new(next);
        }
        outcome.levels.push(data);

        if let Some(dir) = &out_dir {
            let path = dir.join(&cfg.output.csv_name);
            write_records_csv(&path, &outcome.records())?;
            if !outcome.artifacts.contains(&path) {
                outcome.artifacts.push(path);
            }
        }
    }
    telemetry.set_level(None);
    telemetry.flush();
    Ok(())
}
