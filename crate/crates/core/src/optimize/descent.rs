//! Projected gradient descent with backtracking line search.

use crate::error::{OncoError, Result};
use crate::forward::{cost, solve_forward, ControlProfile, Problem, Storage, Trajectory};

use super::{
    initial_guess, project, reduced_gradient, solve_adjoint, solve_adjoint_checkpointed,
    time_inner, time_norm,
};

/// Default spacing of stored levels during optimization.
pub const DEFAULT_CHECKPOINT: usize = 512;

#[derive(Debug, Clone)]
pub struct OptimizeOptions {
    pub max_iterations: usize,
    /// Stop once `|J_{k+1} - J_k| / |J_k|` drops below this.
    pub rel_tolerance: f64,
    pub initial_step: f64,
    pub armijo: f64,
    pub max_halvings: usize,
    /// Keep every `k`-th state and recompute the gaps during the adjoint
    /// sweep. `None` stores every level.
    pub checkpoint_every: Option<usize>,
    /// Keep `I^k` for every iteration in the report.
    pub keep_controls: bool,
}

impl Default for OptimizeOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            rel_tolerance: 5e-5,
            initial_step: 1.0,
            armijo: 1e-4,
            max_halvings: 30,
            checkpoint_every: Some(DEFAULT_CHECKPOINT),
            keep_controls: true,
        }
    }
}

/// One row of the convergence history. `step` is the line-search step
/// taken from this iterate (zero for the last row).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub cost: f64,
    pub grad_norm: f64,
    pub step: f64,
    /// Fraction of time levels where the control sits on a bound.
    pub clamp_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct OptimizeReport {
    pub iterates: Vec<IterationRecord>,
    /// `I^0, I^1, ...` when [`OptimizeOptions::keep_controls`] is set.
    pub controls: Vec<ControlProfile>,
    pub final_control: ControlProfile,
    pub final_cost: f64,
    /// Reduced gradient at the final control.
    pub final_gradient: Vec<f64>,
    pub converged: bool,
    /// Number of accepted updates.
    pub iterations_used: usize,
    /// Set when the line search gave up.
    pub failure: Option<String>,
    /// Step of the last accepted update.
    pub last_step: f64,
    /// `‖I* - Π(I* - s g*)‖ / (s ‖g(I⁰)‖ + ε)` with `s` the last step.
    pub optimality_residual: f64,
}

impl OptimizeReport {
    pub fn initial_grad_norm(&self) -> f64 {
        self.iterates.first().map_or(0.0, |r| r.grad_norm)
    }

    pub fn final_grad_norm(&self) -> f64 {
        self.iterates.last().map_or(0.0, |r| r.grad_norm)
    }
}

struct Evaluated {
    control: ControlProfile,
    traj: Trajectory,
    cost: f64,
}

fn storage(opts: &OptimizeOptions) -> Storage {
    match opts.checkpoint_every {
        None => Storage::Full,
        Some(k) => Storage::Every(k),
    }
}

fn evaluate(
    problem: &Problem,
    control: ControlProfile,
    opts: &OptimizeOptions,
) -> Result<Evaluated> {
    let traj = solve_forward(problem, &control, storage(opts))?;
    let cost = cost(problem, &control, &traj);
    Ok(Evaluated {
        control,
        traj,
        cost,
    })
}

fn gradient(problem: &Problem, at: &Evaluated) -> Result<Vec<f64>> {
    let adj = if at.traj.is_full() {
        solve_adjoint(problem, &at.traj, &at.control, Storage::Endpoints)?
    } else {
        solve_adjoint_checkpointed(problem, &at.traj, &at.control, Storage::Endpoints)?
    };
    Ok(reduced_gradient(problem, &at.control, &adj))
}

fn bound_fraction(control: &ControlProfile, m_tol: f64) -> f64 {
    let s = control.samples();
    let on = s.iter().filter(|&&v| v <= 0.0 || v >= m_tol).count();
    on as f64 / s.len().max(1) as f64
}

/// Runs projected gradient descent from `start` (or `M_tol e^{-4t}`).
///
/// Each iteration solves state and adjoint, forms the reduced gradient and
/// backtracks on `I - α g` projected onto `[0, M_tol]` until the Armijo
/// condition `J(I⁺) <= J(I) - c ⟨g, I - I⁺⟩` holds. The accepted `α`,
/// doubled, seeds the next search.
pub fn optimize(
    problem: &Problem,
    start: Option<ControlProfile>,
    opts: &OptimizeOptions,
) -> Result<OptimizeReport> {
    let grid = &problem.grid;
    let m_tol = problem.params.m_tol;
    let start = start.unwrap_or_else(|| initial_guess(grid, &problem.params));
    let mut current = evaluate(problem, start, opts)?;
    let mut iterates = Vec::new();
    let mut controls = Vec::new();
    let mut step = opts.initial_step;
    let mut last_step = opts.initial_step;
    let mut converged = false;
    let mut failure = None;
    let mut used = 0;

    let mut g = gradient(problem, &current)?;
    let g0_norm = time_norm(grid, &g);

    for iteration in 0..opts.max_iterations {
        if opts.keep_controls {
            controls.push(current.control.clone());
        }
        let record = IterationRecord {
            iteration,
            cost: current.cost,
            grad_norm: time_norm(grid, &g),
            step: 0.0,
            clamp_fraction: bound_fraction(&current.control, m_tol),
        };

        let mut accepted = None;
        let mut alpha = step;
        for _ in 0..=opts.max_halvings {
            let raw: Vec<f64> = current
                .control
                .samples()
                .iter()
                .zip(&g)
                .map(|(i, gi)| i - alpha * gi)
                .collect();
            let trial_control = project(&raw, m_tol);
            let moved: Vec<f64> = current
                .control
                .samples()
                .iter()
                .zip(trial_control.samples())
                .map(|(a, b)| a - b)
                .collect();
            let decrease = time_inner(grid, &g, &moved);
            // Solver failures on an aggressive step count as a rejected trial.
            if let Ok(trial) = evaluate(problem, trial_control, opts) {
                if trial.cost <= current.cost - opts.armijo * decrease {
                    accepted = Some(trial);
                    break;
                }
            }
            alpha *= 0.5;
        }

        let Some(next) = accepted else {
            iterates.push(record);
            failure = Some(
                OncoError::LineSearch {
                    iteration,
                    halvings: opts.max_halvings,
                }
                .to_string(),
            );
            break;
        };
        iterates.push(IterationRecord {
            step: alpha,
            ..record
        });
        used += 1;
        last_step = alpha;
        step = 2.0 * alpha;
        let rel = (next.cost - current.cost).abs() / current.cost.abs().max(f64::MIN_POSITIVE);
        current = next;
        g = gradient(problem, &current)?;
        if rel < opts.rel_tolerance {
            converged = true;
            break;
        }
    }

    if failure.is_none() {
        if opts.keep_controls {
            controls.push(current.control.clone());
        }
        iterates.push(IterationRecord {
            iteration: used,
            cost: current.cost,
            grad_norm: time_norm(grid, &g),
            step: 0.0,
            clamp_fraction: bound_fraction(&current.control, m_tol),
        });
    }

    let probe: Vec<f64> = current
        .control
        .samples()
        .iter()
        .zip(&g)
        .map(|(i, gi)| i - last_step * gi)
        .collect();
    let projected = project(&probe, m_tol);
    let gap: Vec<f64> = current
        .control
        .samples()
        .iter()
        .zip(projected.samples())
        .map(|(a, b)| a - b)
        .collect();
    let optimality_residual = time_norm(grid, &gap) / (last_step * g0_norm + 1e-12);

    Ok(OptimizeReport {
        iterates,
        controls,
        final_cost: current.cost,
        final_control: current.control,
        final_gradient: g,
        converged,
        iterations_used: used,
        failure,
        last_step,
        optimality_residual,
    })
}
