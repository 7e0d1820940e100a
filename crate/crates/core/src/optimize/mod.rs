//! Adjoint gradient and projected gradient descent for the infusion schedule.

mod adjoint;
mod descent;

pub use adjoint::{solve_adjoint, solve_adjoint_checkpointed, AdjointPair};
pub use descent::{optimize, IterationRecord, OptimizeOptions, OptimizeReport, DEFAULT_CHECKPOINT};

use crate::error::Result;
use crate::forward::{cost, solve_forward, ControlProfile, Problem, Storage};
use crate::grid::Grid;
use crate::model::ModelParams;

/// Decay rate of the exponential starting schedule.
pub const INITIAL_DECAY: f64 = 4.0;

/// `g(t_n) = 2β I(t_n) + ∂_I Γ · ∫ r(t_n, x) dx`.
///
/// `∂_I Γ` does not depend on `d` for this model, so it factors out of the
/// spatial integral.
pub fn reduced_gradient(
    problem: &Problem,
    control: &ControlProfile,
    adj: &AdjointPair,
) -> Vec<f64> {
    let params = &problem.params;
    control
        .samples()
        .iter()
        .zip(&adj.r_integral)
        .map(|(&i, &r_int)| {
            let di = params.partials(0.0, 0.0, i).exchange_di;
            2.0 * params.beta_w * i + di * r_int
        })
        .collect()
}

/// Cost and reduced gradient at `control`. `checkpoint_every` as in
/// [`OptimizeOptions::checkpoint_every`].
pub fn cost_and_gradient(
    problem: &Problem,
    control: &ControlProfile,
    checkpoint_every: Option<usize>,
) -> Result<(f64, Vec<f64>)> {
    let storage = checkpoint_every.map_or(Storage::Full, Storage::Every);
    let traj = solve_forward(problem, control, storage)?;
    let j = cost(problem, control, &traj);
    let adj = if traj.is_full() {
        solve_adjoint(problem, &traj, control, Storage::Endpoints)?
    } else {
        solve_adjoint_checkpointed(problem, &traj, control, Storage::Endpoints)?
    };
    Ok((j, reduced_gradient(problem, control, &adj)))
}

/// Pointwise clamp onto `[0, m_tol]`.
pub fn project(raw: &[f64], m_tol: f64) -> ControlProfile {
    ControlProfile::from_projected(raw.iter().map(|&v| v.clamp(0.0, m_tol)).collect())
}

/// `I⁰(t) = M_tol e^{-4t}`.
pub fn initial_guess(grid: &Grid, params: &ModelParams) -> ControlProfile {
    ControlProfile::from_projected(
        (0..grid.n_t)
            .map(|n| params.m_tol * (-INITIAL_DECAY * grid.time(n)).exp())
            .collect(),
    )
}

/// `Σ_n τ_n a_n b_n` with trapezoid time weights `τ`.
pub fn time_inner(grid: &Grid, a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .enumerate()
        .map(|(n, (x, y))| grid.time_weight(n) * x * y)
        .sum()
}

/// `L²(0, T)` norm by the time trapezoid.
pub fn time_norm(grid: &Grid, a: &[f64]) -> f64 {
    time_inner(grid, a, a).sqrt()
}
