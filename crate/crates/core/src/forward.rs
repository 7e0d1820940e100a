//! Explicit-Euler integration of the coupled tumor/drug system and the cost
//! functional evaluated on the resulting trajectory.

use crate::error::{OncoError, Result};
use crate::grid::{
    advection_rhs, diffusion_rhs, quadrature, velocity_reference, ConvScratch, Field, Grid, Kernel,
    Mesh,
};
use crate::model::ModelParams;

/// Values above this (and below zero) are treated as round-off and clamped.
pub const NEGATIVITY_TOLERANCE: f64 = 1e-8;

/// Standard deviation of the initial tumor profile.
pub const INITIAL_WIDTH: f64 = 0.1;

/// How the Gaussian initial tumor is scaled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Peak value 1 at the domain midpoint.
    UnitPeak,
    /// Unit integral over the real line (a probability density).
    #[default]
    UnitMass,
}

impl std::str::FromStr for Normalization {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "unit-peak" | "peak" => Ok(Normalization::UnitPeak),
            "unit-mass" | "mass" => Ok(Normalization::UnitMass),
            other => Err(format!("expected unit-peak or unit-mass, got `{other}`")),
        }
    }
}

impl std::fmt::Display for Normalization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Normalization::UnitPeak => "unit-peak",
            Normalization::UnitMass => "unit-mass",
        })
    }
}

/// Gaussian tumor of width [`INITIAL_WIDTH`] centered at the domain midpoint.
pub fn initial_tumor(mesh: &Mesh, params: &ModelParams, norm: Normalization) -> Field {
    let center = 0.5 * (params.x_min + params.x_max);
    let scale = match norm {
        Normalization::UnitPeak => 1.0,
        Normalization::UnitMass => 1.0 / (INITIAL_WIDTH * (2.0 * std::f64::consts::PI).sqrt()),
    };
    mesh.sample(|x| {
        let z = (x - center) / INITIAL_WIDTH;
        scale * (-0.5 * z * z).exp()
    })
}

/// Infusion `I(t_n)` on every time level, within `[0, m_tol]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlProfile {
    samples: Vec<f64>,
}

impl ControlProfile {
    /// Wraps samples after checking admissibility.
    pub fn new(samples: Vec<f64>, grid: &Grid, params: &ModelParams) -> Result<Self> {
        if samples.len() != grid.n_t {
            return Err(OncoError::Usage(format!(
                "control has {} samples but the grid has {} time levels",
                samples.len(),
                grid.n_t
            )));
        }
        for (n, &v) in samples.iter().enumerate() {
            if !(v.is_finite() && (0.0..=params.m_tol).contains(&v)) {
                return Err(OncoError::validation(
                    "control",
                    format!("sample {n} = {v} is outside [0, {}]", params.m_tol),
                ));
            }
        }
        Ok(Self { samples })
    }

    pub fn zero(grid: &Grid) -> Self {
        Self {
            samples: vec![0.0; grid.n_t],
        }
    }

    pub fn constant(grid: &Grid, params: &ModelParams, value: f64) -> Result<Self> {
        Self::new(vec![value; grid.n_t], grid, params)
    }

    /// Trusted constructor for values already clamped to the admissible box.
    pub(crate) fn from_projected(samples: Vec<f64>) -> Self {
        Self { samples }
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<f64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn max(&self) -> f64 {
        self.samples.iter().copied().fold(0.0, f64::max)
    }
}

/// Parameters, grid, kernel and initial data of one configured run.
#[derive(Debug, Clone)]
pub struct Problem {
    pub params: ModelParams,
    pub grid: Grid,
    pub kernel: Kernel,
    pub p0: Field,
    pub d0: Field,
}

impl Problem {
    /// Builds the mesh, the Gaussian initial tumor, the kernel and a CFL
    /// time grid whose transport bound uses the initial velocity.
    pub fn new(params: ModelParams, n_x: usize, cfl: f64, norm: Normalization) -> Result<Self> {
        params.validate()?;
        let mesh = Mesh::new(&params, n_x)?;
        let p0 = initial_tumor(&mesh, &params, norm);
        let d0 = Field::zeros(n_x);
        Self::with_initial(params, n_x, cfl, p0, d0)
    }

    /// Same as [`Problem::new`] with caller-supplied initial data.
    pub fn with_initial(
        params: ModelParams,
        n_x: usize,
        cfl: f64,
        p0: Field,
        d0: Field,
    ) -> Result<Self> {
        params.validate()?;
        let mesh = Mesh::new(&params, n_x)?;
        if p0.len() != n_x || d0.len() != n_x {
            return Err(OncoError::Usage(format!(
                "initial data must have {n_x} nodes (got {} and {})",
                p0.len(),
                d0.len()
            )));
        }
        if !p0.is_finite() || !d0.is_finite() {
            return Err(OncoError::validation(
                "initial",
                "initial data must be finite",
            ));
        }
        let kernel = Kernel::gaussian(params.sigma, &mesh);
        let v_ref = velocity_reference(&params, &p0, &kernel);
        let grid = Grid::build(&params, n_x, cfl, v_ref)?;
        Ok(Self {
            params,
            grid,
            kernel,
            p0,
            d0,
        })
    }

    pub fn mesh(&self) -> &Mesh {
        &self.grid.mesh
    }
}

/// Which time levels a forward run keeps.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Storage {
    /// Every level; required by [`crate::optimize::solve_adjoint`].
    Full,
    /// Every `k`-th level plus the final one.
    Every(usize),
    /// First and final level only.
    Endpoints,
}

impl Storage {
    pub(crate) fn stride(self, n_t: usize) -> usize {
        match self {
            Storage::Full => 1,
            Storage::Every(k) => k.max(1),
            Storage::Endpoints => n_t.max(2) - 1,
        }
    }
}

/// Per-level diagnostics, recorded on every level regardless of storage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelStats {
    /// `∫ p dx`.
    pub mass: f64,
    /// `max_x p`.
    pub peak: f64,
    /// `∫ d dx`.
    pub drug_mass: f64,
}

/// Output of [`solve_forward`].
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub grid: Grid,
    stride: usize,
    levels: Vec<usize>,
    p: Vec<f64>,
    d: Vec<f64>,
    pub stats: Vec<LevelStats>,
    /// Number of nodes clamped from `(-tol, 0)` to zero.
    pub clamp_count: usize,
    /// Smallest `p` seen before clamping.
    pub min_p: f64,
    /// Smallest `d` seen before clamping.
    pub min_d: f64,
}

impl Trajectory {
    fn new(grid: Grid, stride: usize) -> Self {
        let levels: Vec<usize> = (0..grid.n_t)
            .filter(|&n| n % stride == 0 || n + 1 == grid.n_t)
            .collect();
        let cap = levels.len() * grid.mesh.n_x;
        Self {
            grid,
            stride,
            levels,
            p: Vec::with_capacity(cap),
            d: Vec::with_capacity(cap),
            stats: Vec::with_capacity(grid.n_t),
            clamp_count: 0,
            min_p: f64::INFINITY,
            min_d: f64::INFINITY,
        }
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn is_full(&self) -> bool {
        self.stride == 1
    }

    /// Time indices of the stored levels, ascending.
    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    /// Stored tumor density at the `k`-th stored level.
    pub fn p(&self, k: usize) -> &[f64] {
        let n = self.grid.mesh.n_x;
        &self.p[k * n..(k + 1) * n]
    }

    /// Stored drug concentration at the `k`-th stored level.
    pub fn d(&self, k: usize) -> &[f64] {
        let n = self.grid.mesh.n_x;
        &self.d[k * n..(k + 1) * n]
    }

    /// Stored slot of time index `n`, if kept.
    pub fn slot(&self, n: usize) -> Option<usize> {
        self.levels.binary_search(&n).ok()
    }

    pub fn final_p(&self) -> &[f64] {
        self.p(self.levels.len() - 1)
    }

    fn push(&mut self, n: usize, p: &[f64], d: &[f64], mesh: &Mesh) {
        self.stats.push(LevelStats {
            mass: quadrature(p, mesh),
            peak: p.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            drug_mass: quadrature(d, mesh),
        });
        if self.levels.binary_search(&n).is_ok() {
            self.p.extend_from_slice(p);
            self.d.extend_from_slice(d);
        }
    }
}

/// Work buffers for repeated calls to [`Stepper::advance`].
pub struct Stepper {
    w: Vec<f64>,
    vel: Vec<f64>,
    adv: Vec<f64>,
    lap: Vec<f64>,
    conv: ConvScratch,
}

/// What a single step had to clamp.
#[derive(Debug, Clone, Copy, Default)]
pub struct StepReport {
    pub clamped: usize,
    pub min_p: f64,
    pub min_d: f64,
}

impl Stepper {
    pub fn new(problem: &Problem) -> Self {
        let n = problem.grid.mesh.n_x;
        Self {
            w: vec![0.0; n],
            vel: vec![0.0; n],
            adv: vec![0.0; n],
            lap: vec![0.0; n],
            conv: problem.kernel.scratch(),
        }
    }

    /// Advances `(p, d)` in place by one explicit Euler step with infusion
    /// `i_now`. `step` only labels errors.
    pub fn advance(
        &mut self,
        problem: &Problem,
        p: &mut [f64],
        d: &mut [f64],
        i_now: f64,
        step: usize,
    ) -> Result<StepReport> {
        let params = &problem.params;
        let grid = &problem.grid;
        let mesh = &grid.mesh;
        let dt = grid.dt;

        problem.kernel.convolve_into(p, &mut self.w, &mut self.conv);
        let mut speed = 0.0f64;
        for (v, &w) in self.vel.iter_mut().zip(&self.w) {
            *v = params.velocity(w);
            speed = speed.max(v.abs());
        }
        // A tiny allowance keeps v_ref = κ·max(w) exact ties from tripping.
        if speed > grid.v_ref * (1.0 + 1e-12) {
            return Err(OncoError::Stability {
                step,
                speed,
                v_ref: grid.v_ref,
            });
        }
        advection_rhs(p, &self.vel, mesh, &mut self.adv);
        diffusion_rhs(d, params.diff, mesh, &mut self.lap);

        let mut report = StepReport {
            clamped: 0,
            min_p: f64::INFINITY,
            min_d: f64::INFINITY,
        };
        for i in 0..mesh.n_x {
            let (pi, di) = (p[i], d[i]);
            let p_new = pi + dt * (self.adv[i] + params.eval_growth(pi) - params.eval_kill(di, pi));
            let d_new = di + dt * (self.lap[i] + params.eval_exchange(i_now, di));
            p[i] = p_new;
            d[i] = d_new;
        }
        clamp(p, "p", step, &mut report.clamped, &mut report.min_p)?;
        clamp(d, "d", step, &mut report.clamped, &mut report.min_d)?;
        Ok(report)
    }
}

fn clamp(
    values: &mut [f64],
    field: &'static str,
    step: usize,
    count: &mut usize,
    min_seen: &mut f64,
) -> Result<()> {
    for v in values.iter_mut() {
        if !v.is_finite() {
            return Err(OncoError::NonFinite { step, field });
        }
        *min_seen = min_seen.min(*v);
        if *v < 0.0 {
            if *v <= -NEGATIVITY_TOLERANCE {
                return Err(OncoError::Negativity {
                    step,
                    field,
                    value: *v,
                });
            }
            *v = 0.0;
            *count += 1;
        }
    }
    Ok(())
}

/// One explicit Euler step from `(p, d)` under infusion `i_now`.
pub fn step(problem: &Problem, p: &Field, d: &Field, i_now: f64) -> Result<(Field, Field)> {
    let mut stepper = Stepper::new(problem);
    let (mut p_next, mut d_next) = (p.clone(), d.clone());
    stepper.advance(problem, &mut p_next, &mut d_next, i_now, 0)?;
    Ok((p_next, d_next))
}

/// Integrates from the problem's initial data over the whole horizon.
///
/// The control is held constant over each step at its left-endpoint sample.
pub fn solve_forward(
    problem: &Problem,
    control: &ControlProfile,
    storage: Storage,
) -> Result<Trajectory> {
    let grid = problem.grid;
    if control.len() != grid.n_t {
        return Err(OncoError::Usage(format!(
            "control has {} samples but the grid has {} time levels",
            control.len(),
            grid.n_t
        )));
    }
    let mut traj = Trajectory::new(grid, storage.stride(grid.n_t));
    let mut p = problem.p0.0.clone();
    let mut d = problem.d0.0.clone();
    traj.min_p = p.iter().copied().fold(f64::INFINITY, f64::min);
    traj.min_d = d.iter().copied().fold(f64::INFINITY, f64::min);
    traj.push(0, &p, &d, &grid.mesh);

    let mut stepper = Stepper::new(problem);
    for (n, &i_now) in control.samples()[..grid.steps()].iter().enumerate() {
        let rep = stepper.advance(problem, &mut p, &mut d, i_now, n + 1)?;
        traj.clamp_count += rep.clamped;
        traj.min_p = traj.min_p.min(rep.min_p);
        traj.min_d = traj.min_d.min(rep.min_d);
        traj.push(n + 1, &p, &d, &grid.mesh);
    }
    Ok(traj)
}

/// `J = ∫₀ᵀ [α ∫p dx + β I²] dt + γ ∫p(T) dx`, trapezoid in space and time.
pub fn cost(problem: &Problem, control: &ControlProfile, traj: &Trajectory) -> f64 {
    let params = &problem.params;
    let grid = &traj.grid;
    let running: f64 = traj
        .stats
        .iter()
        .zip(control.samples())
        .enumerate()
        .map(|(n, (s, &i))| grid.time_weight(n) * (params.alpha_w * s.mass + params.beta_w * i * i))
        .sum();
    let terminal = traj.stats.last().map_or(0.0, |s| s.mass);
    running + params.gamma_w * terminal
}

/// `(t_n, ∫ p(t_n) dx)` on every time level.
pub fn tumor_mass(traj: &Trajectory) -> Vec<(f64, f64)> {
    traj.stats
        .iter()
        .enumerate()
        .map(|(n, s)| (traj.grid.time(n), s.mass))
        .collect()
}
