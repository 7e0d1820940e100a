//! Adjoint gradient against central finite differences.

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::forward::{cost, solve_forward, ControlProfile, Problem, Storage};
use crate::optimize::{cost_and_gradient, project, time_inner, DEFAULT_CHECKPOINT};
use crate::parallel;

/// Finite-difference step.
pub const FD_EPSILON: f64 = 1e-4;
/// Largest accepted relative error.
pub const THRESHOLD: f64 = 5e-2;
/// Number of constant pieces in a probe direction.
pub const PROBE_SEGMENTS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeResult {
    pub probe: usize,
    pub adjoint: f64,
    pub finite_difference: f64,
    pub rel_error: f64,
}

impl ProbeResult {
    pub fn passed(&self) -> bool {
        self.rel_error <= THRESHOLD
    }
}

#[derive(Debug, Clone)]
pub struct GradcheckReport {
    pub cost: f64,
    pub probes: Vec<ProbeResult>,
}

impl GradcheckReport {
    pub fn passed(&self) -> bool {
        self.probes.iter().all(ProbeResult::passed)
    }

    pub fn worst(&self) -> f64 {
        self.probes.iter().map(|p| p.rel_error).fold(0.0, f64::max)
    }
}

/// Piecewise-constant `±1` directions on [`PROBE_SEGMENTS`] equal pieces of
/// the horizon, zeroed wherever `I ± εh` would leave `[0, M_tol]`.
pub fn probe_directions(
    control: &ControlProfile,
    m_tol: f64,
    count: usize,
    seed: u64,
) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_t = control.len();
    (0..count)
        .map(|_| {
            let signs: Vec<f64> = (0..PROBE_SEGMENTS)
                .map(|_| {
                    if rng.random_range(0..2) == 0 {
                        -1.0
                    } else {
                        1.0
                    }
                })
                .collect();
            control
                .samples()
                .iter()
                .enumerate()
                .map(|(n, &i)| {
                    let h = signs[n * PROBE_SEGMENTS / n_t];
                    let inside = |v: f64| (0.0..=m_tol).contains(&v);
                    if inside(i + FD_EPSILON * h) && inside(i - FD_EPSILON * h) {
                        h
                    } else {
                        0.0
                    }
                })
                .collect()
        })
        .collect()
}

/// Compares `⟨g, h⟩` with `(J(I + εh) - J(I - εh)) / 2ε` for `count`
/// seeded directions. The perturbed solves run in parallel.
pub fn gradcheck(
    problem: &Problem,
    control: &ControlProfile,
    count: usize,
    seed: u64,
) -> Result<GradcheckReport> {
    let m_tol = problem.params.m_tol;
    let (j, g) = cost_and_gradient(problem, control, Some(DEFAULT_CHECKPOINT))?;
    let dirs = probe_directions(control, m_tol, count, seed);

    let shifted: Vec<(usize, f64)> = (0..count).flat_map(|k| [(k, 1.0), (k, -1.0)]).collect();
    let costs = parallel::map_slice(&shifted, |&(k, sign)| -> Result<f64> {
        let raw: Vec<f64> = control
            .samples()
            .iter()
            .zip(&dirs[k])
            .map(|(i, h)| i + sign * FD_EPSILON * h)
            .collect();
        let u = project(&raw, m_tol);
        let traj = solve_forward(problem, &u, Storage::Endpoints)?;
        Ok(cost(problem, &u, &traj))
    });
    let costs = costs.into_iter().collect::<Result<Vec<f64>>>()?;

    let probes = dirs
        .iter()
        .enumerate()
        .map(|(k, h)| {
            let adjoint = time_inner(&problem.grid, &g, h);
            let finite_difference = (costs[2 * k] - costs[2 * k + 1]) / (2.0 * FD_EPSILON);
            let scale = finite_difference.abs().max(f64::MIN_POSITIVE);
            ProbeResult {
                probe: k,
                adjoint,
                finite_difference,
                rel_error: (adjoint - finite_difference).abs() / scale,
            }
        })
        .collect();
    Ok(GradcheckReport { cost: j, probes })
}
