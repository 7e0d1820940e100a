//! Backward-in-time adjoint solver.
//!
//! Integrates, from `t = T` down to `t = 0`,
//!
//! ```text
//! -q_t - V[w_p] q_x - ∫ K(y,x) p(y) V'(w_p(y)) q_x(y) dy - (F'(p) - ∂_p C) q = α,   q(T) = γ
//! -r_t - D r_xx - ∂_d Γ r = -∂_d C q,                                               r(T) = 0
//! ```
//!
//! with explicit Euler in reversed time. The step from level `n+1` to `n`
//! uses the state at level `n`, mirroring how the forward step from `n` to
//! `n+1` uses it. States come either from a fully stored trajectory or are
//! regenerated segment by segment from checkpoints.

use crate::error::{OncoError, Result};
use crate::forward::{ControlProfile, Problem, Stepper, Storage, Trajectory};
use crate::grid::{derivative, diffusion_rhs, quadrature, ConvScratch};

/// Adjoint fields `q` (paired with `p`) and `r` (paired with `d`).
#[derive(Debug, Clone)]
pub struct AdjointPair {
    n_x: usize,
    levels: Vec<usize>,
    q: Vec<f64>,
    r: Vec<f64>,
    /// `∫ r(t_n, x) dx` on every time level.
    pub r_integral: Vec<f64>,
}

impl AdjointPair {
    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn q(&self, k: usize) -> &[f64] {
        &self.q[k * self.n_x..(k + 1) * self.n_x]
    }

    pub fn r(&self, k: usize) -> &[f64] {
        &self.r[k * self.n_x..(k + 1) * self.n_x]
    }

    pub fn slot(&self, n: usize) -> Option<usize> {
        self.levels.binary_search(&n).ok()
    }
}

struct Sweep<'a> {
    problem: &'a Problem,
    control: &'a ControlProfile,
    q: Vec<f64>,
    r: Vec<f64>,
    q_next: Vec<f64>,
    r_next: Vec<f64>,
    qx: Vec<f64>,
    pqx: Vec<f64>,
    w: Vec<f64>,
    nonlocal: Vec<f64>,
    lap: Vec<f64>,
    conv: ConvScratch,
    out: AdjointPair,
}

impl<'a> Sweep<'a> {
    fn new(problem: &'a Problem, control: &'a ControlProfile, storage: Storage) -> Self {
        let grid = &problem.grid;
        let n = grid.mesh.n_x;
        let stride = storage.stride(grid.n_t);
        let levels: Vec<usize> = (0..grid.n_t)
            .filter(|&k| k % stride == 0 || k + 1 == grid.n_t)
            .collect();
        let slots = levels.len() * n;
        let mut sweep = Self {
            problem,
            control,
            q: vec![problem.params.gamma_w; n],
            r: vec![0.0; n],
            q_next: vec![0.0; n],
            r_next: vec![0.0; n],
            qx: vec![0.0; n],
            pqx: vec![0.0; n],
            w: vec![0.0; n],
            nonlocal: vec![0.0; n],
            lap: vec![0.0; n],
            conv: problem.kernel.scratch(),
            out: AdjointPair {
                n_x: n,
                levels,
                q: vec![0.0; slots],
                r: vec![0.0; slots],
                r_integral: vec![0.0; grid.n_t],
            },
        };
        sweep.record(grid.n_t - 1);
        sweep
    }

    fn record(&mut self, level: usize) {
        let mesh = &self.problem.grid.mesh;
        self.out.r_integral[level] = quadrature(&self.r, mesh);
        if let Some(k) = self.out.slot(level) {
            let n = mesh.n_x;
            self.out.q[k * n..(k + 1) * n].copy_from_slice(&self.q);
            self.out.r[k * n..(k + 1) * n].copy_from_slice(&self.r);
        }
    }

    /// Steps the adjoint from level `level + 1` to `level` with state `(p, d)`
    /// taken at `level`.
    fn back(&mut self, level: usize, p: &[f64], d: &[f64]) -> Result<()> {
        let problem = self.problem;
        let params = &problem.params;
        let mesh = &problem.grid.mesh;
        let dt = problem.grid.dt;
        let i_now = self.control.samples()[level];

        problem.kernel.convolve_into(p, &mut self.w, &mut self.conv);
        derivative(&self.q, mesh, &mut self.qx);
        for i in 0..mesh.n_x {
            let dv = params.partials(d[i], p[i], i_now).velocity_dw;
            self.pqx[i] = p[i] * dv * self.qx[i];
        }
        // K is symmetric, so ∫ K(y,x) f(y) dy is the same convolution as w_p.
        problem
            .kernel
            .convolve_into(&self.pqx, &mut self.nonlocal, &mut self.conv);
        diffusion_rhs(&self.r, params.diff, mesh, &mut self.lap);

        for i in 0..mesh.n_x {
            let ps = params.partials(d[i], p[i], i_now);
            let (q, r) = (self.q[i], self.r[i]);
            let dq = params.velocity(self.w[i]) * self.qx[i]
                + self.nonlocal[i]
                + (ps.growth_dp - ps.kill_dp) * q
                + params.alpha_w;
            let dr = self.lap[i] + ps.exchange_dd * r - ps.kill_dd * q;
            self.q_next[i] = q + dt * dq;
            self.r_next[i] = r + dt * dr;
        }
        if self.q_next.iter().any(|v| !v.is_finite()) {
            return Err(OncoError::NonFinite {
                step: level,
                field: "q",
            });
        }
        if self.r_next.iter().any(|v| !v.is_finite()) {
            return Err(OncoError::NonFinite {
                step: level,
                field: "r",
            });
        }
        std::mem::swap(&mut self.q, &mut self.q_next);
        std::mem::swap(&mut self.r, &mut self.r_next);
        self.record(level);
        Ok(())
    }
}

fn check_inputs(problem: &Problem, traj: &Trajectory, control: &ControlProfile) -> Result<()> {
    if traj.grid != problem.grid {
        return Err(OncoError::Usage(
            "trajectory was computed on a different grid".into(),
        ));
    }
    if control.len() != problem.grid.n_t {
        return Err(OncoError::Usage(format!(
            "control has {} samples but the grid has {} time levels",
            control.len(),
            problem.grid.n_t
        )));
    }
    Ok(())
}

/// Adjoint from a fully stored trajectory. `storage` decides which adjoint
/// levels are kept; `r_integral` is always complete.
pub fn solve_adjoint(
    problem: &Problem,
    traj: &Trajectory,
    control: &ControlProfile,
    storage: Storage,
) -> Result<AdjointPair> {
    check_inputs(problem, traj, control)?;
    if !traj.is_full() {
        return Err(OncoError::Usage(format!(
            "adjoint needs every time level but the trajectory keeps one in {}; \
             use solve_adjoint_checkpointed",
            traj.stride()
        )));
    }
    let mut sweep = Sweep::new(problem, control, storage);
    for level in (0..problem.grid.steps()).rev() {
        sweep.back(level, traj.p(level), traj.d(level))?;
    }
    Ok(sweep.out)
}

/// Adjoint from a trajectory that kept only some levels: each gap between
/// stored levels is recomputed forward into a buffer and then swept
/// backward. Results are bit-identical to [`solve_adjoint`].
pub fn solve_adjoint_checkpointed(
    problem: &Problem,
    checkpoints: &Trajectory,
    control: &ControlProfile,
    storage: Storage,
) -> Result<AdjointPair> {
    check_inputs(problem, checkpoints, control)?;
    let n = problem.grid.mesh.n_x;
    let levels = checkpoints.levels();
    let longest = levels.windows(2).map(|w| w[1] - w[0]).max().unwrap_or(0);
    let mut seg_p = vec![0.0; longest * n];
    let mut seg_d = vec![0.0; longest * n];
    let mut stepper = Stepper::new(problem);
    let mut sweep = Sweep::new(problem, control, storage);
    let mut p = vec![0.0; n];
    let mut d = vec![0.0; n];

    for k in (0..levels.len() - 1).rev() {
        let (start, end) = (levels[k], levels[k + 1]);
        p.copy_from_slice(checkpoints.p(k));
        d.copy_from_slice(checkpoints.d(k));
        for (j, level) in (start..end).enumerate() {
            seg_p[j * n..(j + 1) * n].copy_from_slice(&p);
            seg_d[j * n..(j + 1) * n].copy_from_slice(&d);
            if level + 1 < end {
                stepper.advance(problem, &mut p, &mut d, control.samples()[level], level + 1)?;
            }
        }
        for (j, level) in (start..end).enumerate().rev() {
            sweep.back(
                level,
                &seg_p[j * n..(j + 1) * n],
                &seg_d[j * n..(j + 1) * n],
            )?;
        }
    }
    Ok(sweep.out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forward::{solve_forward, Normalization};
    use crate::model::ModelParams;

    fn problem(params: ModelParams) -> Problem {
        Problem::new(params, 31, 0.4, Normalization::UnitPeak).unwrap()
    }

    #[test]
    fn terminal_conditions() {
        let pr = problem(ModelParams::default());
        let u = crate::optimize::initial_guess(&pr.grid, &pr.params);
        let traj = solve_forward(&pr, &u, Storage::Full).unwrap();
        let adj = solve_adjoint(&pr, &traj, &u, Storage::Full).unwrap();
        let last = adj.levels().len() - 1;
        assert!(adj.q(last).iter().all(|&v| v == pr.params.gamma_w));
        assert!(adj.r(last).iter().all(|&v| v == 0.0));
        assert!(adj.q(0).iter().all(|v| v.is_finite()));
        // The drug adjoint is driven negative by the kill coupling.
        assert!(adj.r_integral[0] < 0.0);
    }

    #[test]
    fn homogeneous_data_give_zero_adjoint() {
        let pr = problem(ModelParams {
            alpha_w: 0.0,
            gamma_w: 0.0,
            ..Default::default()
        });
        let u = crate::optimize::initial_guess(&pr.grid, &pr.params);
        let traj = solve_forward(&pr, &u, Storage::Full).unwrap();
        let adj = solve_adjoint(&pr, &traj, &u, Storage::Full).unwrap();
        for k in 0..adj.levels().len() {
            assert!(adj.q(k).iter().all(|&v| v == 0.0));
            assert!(adj.r(k).iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn no_kill_decouples_drug() {
        let pr = problem(ModelParams {
            delta: 0.0,
            ..Default::default()
        });
        let u0 = ControlProfile::zero(&pr.grid);
        let u1 = ControlProfile::constant(&pr.grid, &pr.params, 2.0).unwrap();
        let t0 = solve_forward(&pr, &u0, Storage::Full).unwrap();
        let t1 = solve_forward(&pr, &u1, Storage::Full).unwrap();
        let a0 = solve_adjoint(&pr, &t0, &u0, Storage::Full).unwrap();
        let a1 = solve_adjoint(&pr, &t1, &u1, Storage::Full).unwrap();
        for k in 0..a0.levels().len() {
            assert!(a1.r(k).iter().all(|&v| v == 0.0));
            assert_eq!(a0.q(k), a1.q(k));
        }
    }

    #[test]
    fn strided_trajectory_is_rejected() {
        let pr = problem(ModelParams::default());
        let u = ControlProfile::zero(&pr.grid);
        let traj = solve_forward(&pr, &u, Storage::Every(4)).unwrap();
        assert!(matches!(
            solve_adjoint(&pr, &traj, &u, Storage::Endpoints),
            Err(OncoError::Usage(_))
        ));
    }

    #[test]
    fn checkpointed_matches_full_storage_bitwise() {
        let pr = problem(ModelParams::default());
        let u = crate::optimize::initial_guess(&pr.grid, &pr.params);
        let full = solve_forward(&pr, &u, Storage::Full).unwrap();
        let reference = solve_adjoint(&pr, &full, &u, Storage::Full).unwrap();
        for stride in [1, 3, 17, pr.grid.n_t] {
            let ck = solve_forward(&pr, &u, Storage::Every(stride)).unwrap();
            let adj = solve_adjoint_checkpointed(&pr, &ck, &u, Storage::Full).unwrap();
            assert_eq!(adj.r_integral, reference.r_integral, "stride {stride}");
            assert_eq!(adj.q, reference.q, "stride {stride}");
        }
    }
}
