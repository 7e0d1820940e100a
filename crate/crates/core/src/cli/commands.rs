//! The four subcommands. Each writes its artifacts into `out` and returns
//! what it computed so callers can inspect results without reparsing CSV.

use std::path::Path;
use std::time::{Duration, Instant};

use crate::error::Result;
use crate::forward::{
    cost, solve_forward, tumor_mass, ControlProfile, Problem, Storage, Trajectory,
};
use crate::optimize::{initial_guess, optimize, OptimizeOptions, OptimizeReport};
use crate::parallel;

use super::config::{ControlSpec, RunConfig};
use super::gradcheck::{gradcheck, GradcheckReport, FD_EPSILON, THRESHOLD};
use super::metrics::{drug_peak_time, ComparisonMetrics};
use super::output::{fmt_num, line_plot, read_control, write_control, write_csv, write_summary};

/// Levels written to `state.csv` when no stride is configured.
pub const DEFAULT_STATE_LEVELS: usize = 200;
/// Time samples per iterate in `control_evolution.csv`.
pub const EVOLUTION_SAMPLES: usize = 200;
/// Time at which the peak reduction is reported.
pub const PEAK_REPORT_TIME: f64 = 0.9;

/// Exit codes beyond those carried by [`crate::OncoError::exit_code`].
pub const EXIT_NOT_CONVERGED: i32 = 4;
pub const EXIT_GRADCHECK_FAILED: i32 = 5;

/// Schedule selected by the config.
pub fn resolve_control(cfg: &RunConfig, problem: &Problem) -> Result<ControlProfile> {
    match &cfg.control {
        ControlSpec::Zero => Ok(ControlProfile::zero(&problem.grid)),
        ControlSpec::ExpDecay => Ok(initial_guess(&problem.grid, &problem.params)),
        ControlSpec::File(path) => read_control(path, &problem.grid, &problem.params),
    }
}

fn state_stride(cfg: &RunConfig, n_t: usize) -> usize {
    cfg.stride
        .unwrap_or_else(|| (n_t / DEFAULT_STATE_LEVELS).max(1))
}

fn secs(d: Duration) -> String {
    format!("{:.3} s", d.as_secs_f64())
}

#[derive(Debug)]
pub struct SimulateOutcome {
    pub control: ControlProfile,
    /// Levels kept at the `state.csv` stride.
    pub trajectory: Trajectory,
    pub cost: f64,
}

/// Forward run: `state.csv`, `mass.csv`, `summary.txt` and `mass.svg`.
pub fn simulate(cfg: &RunConfig, out: &Path) -> Result<SimulateOutcome> {
    let started = Instant::now();
    std::fs::create_dir_all(out)?;
    let problem = cfg.problem()?;
    let control = resolve_control(cfg, &problem)?;
    let stride = state_stride(cfg, problem.grid.n_t);
    let traj = solve_forward(&problem, &control, Storage::Every(stride))?;
    let j = cost(&problem, &control, &traj);

    let mesh = problem.mesh();
    let rows = traj.levels().iter().enumerate().flat_map(|(k, &n)| {
        let t = traj.grid.time(n);
        let (p, d) = (traj.p(k), traj.d(k));
        (0..mesh.n_x).map(move |i| vec![t, mesh.node(i), p[i], d[i]])
    });
    write_csv(&out.join("state.csv"), &["t", "x", "p", "d"], rows)?;
    let mass = tumor_mass(&traj);
    write_csv(
        &out.join("mass.csv"),
        &["t", "mass"],
        mass.iter().map(|&(t, m)| vec![t, m]),
    )?;
    if cfg.plots {
        line_plot(&out.join("mass.svg"), "tumor mass", &[("mass", mass)])?;
    }

    let max_p = traj
        .stats
        .iter()
        .map(|s| s.peak)
        .fold(f64::NEG_INFINITY, f64::max);
    let max_d = (0..traj.levels().len())
        .flat_map(|k| traj.d(k).iter().copied())
        .fold(f64::NEG_INFINITY, f64::max);
    write_summary(
        &out.join("summary.txt"),
        &[
            ("command", "simulate".into()),
            ("control", cfg.control.to_string()),
            ("n_x", problem.grid.mesh.n_x.to_string()),
            ("n_t", problem.grid.n_t.to_string()),
            ("dt", fmt_num(problem.grid.dt)),
            ("state_stride", stride.to_string()),
            ("J", fmt_num(j)),
            ("min_p", fmt_num(traj.min_p)),
            ("max_p", fmt_num(max_p)),
            ("min_d", fmt_num(traj.min_d)),
            ("max_d_stored", fmt_num(max_d)),
            ("clamp_count", traj.clamp_count.to_string()),
            ("runtime", secs(started.elapsed())),
        ],
    )?;
    Ok(SimulateOutcome {
        control,
        trajectory: traj,
        cost: j,
    })
}

/// Optimizer start: `exp-decay` is the default guess, anything else is used
/// as given.
fn starting_control(cfg: &RunConfig, problem: &Problem) -> Result<Option<ControlProfile>> {
    match cfg.control {
        ControlSpec::ExpDecay => Ok(None),
        _ => resolve_control(cfg, problem).map(Some),
    }
}

fn write_optimize_artifacts(
    cfg: &RunConfig,
    problem: &Problem,
    rep: &OptimizeReport,
    out: &Path,
) -> Result<()> {
    let grid = &problem.grid;
    write_control(&out.join("control.csv"), grid, &rep.final_control)?;
    write_csv(
        &out.join("convergence.csv"),
        &["iter", "J", "grad_norm", "step"],
        rep.iterates
            .iter()
            .map(|r| vec![r.iteration as f64, r.cost, r.grad_norm, r.step]),
    )?;
    let every = (grid.n_t / EVOLUTION_SAMPLES).max(1);
    let picks: Vec<usize> = (0..grid.n_t)
        .filter(|n| n % every == 0 || n + 1 == grid.n_t)
        .collect();
    write_csv(
        &out.join("control_evolution.csv"),
        &["iter", "t", "I"],
        rep.controls.iter().enumerate().flat_map(|(k, c)| {
            picks
                .iter()
                .map(move |&n| vec![k as f64, grid.time(n), c.samples()[n]])
        }),
    )?;
    if cfg.plots {
        let sampled = |c: &ControlProfile| -> Vec<(f64, f64)> {
            picks
                .iter()
                .map(|&n| (grid.time(n), c.samples()[n]))
                .collect()
        };
        line_plot(
            &out.join("control.svg"),
            "optimal infusion I*(t)",
            &[("I*", sampled(&rep.final_control))],
        )?;
        line_plot(
            &out.join("convergence.svg"),
            "cost per iteration",
            &[(
                "J",
                rep.iterates
                    .iter()
                    .map(|r| (r.iteration as f64, r.cost))
                    .collect(),
            )],
        )?;
        let labels: Vec<String> = (0..rep.controls.len()).map(|k| format!("I^{k}")).collect();
        // At most six iterates, evenly spread from the first to the last.
        let n = rep.controls.len();
        let mut shown: Vec<usize> = (0..=5).map(|j| j * n.saturating_sub(1) / 5).collect();
        shown.dedup();
        shown.retain(|&k| k < n);
        let series: Vec<(&str, Vec<(f64, f64)>)> = shown
            .iter()
            .map(|&k| (labels[k].as_str(), sampled(&rep.controls[k])))
            .collect();
        line_plot(
            &out.join("control_evolution.svg"),
            "control iterates",
            &series,
        )?;
    }
    Ok(())
}

fn optimize_summary(rep: &OptimizeReport) -> Vec<(&'static str, String)> {
    vec![
        ("converged", rep.converged.to_string()),
        ("iterations", rep.iterations_used.to_string()),
        (
            "J_initial",
            fmt_num(rep.iterates.first().map_or(f64::NAN, |r| r.cost)),
        ),
        ("J_final", fmt_num(rep.final_cost)),
        ("grad_norm_initial", fmt_num(rep.initial_grad_norm())),
        ("grad_norm_final", fmt_num(rep.final_grad_norm())),
        ("optimality_residual", fmt_num(rep.optimality_residual)),
        (
            "failure",
            rep.failure.clone().unwrap_or_else(|| "none".into()),
        ),
    ]
}

#[derive(Debug)]
pub struct OptimizeOutcome {
    pub problem: Problem,
    pub report: OptimizeReport,
}

impl OptimizeOutcome {
    /// `0`, or [`EXIT_NOT_CONVERGED`].
    pub fn exit_code(&self) -> i32 {
        if self.report.converged {
            0
        } else {
            EXIT_NOT_CONVERGED
        }
    }
}

fn run_optimizer(cfg: &RunConfig, out: &Path) -> Result<OptimizeOutcome> {
    std::fs::create_dir_all(out)?;
    let problem = cfg.problem()?;
    let start = starting_control(cfg, &problem)?;
    let opts = OptimizeOptions {
        max_iterations: cfg.max_iterations,
        ..Default::default()
    };
    let report = optimize(&problem, start, &opts)?;
    // Written whether or not the run converged.
    write_optimize_artifacts(cfg, &problem, &report, out)?;
    Ok(OptimizeOutcome { problem, report })
}

/// Optimal schedule: `control.csv`, `convergence.csv`,
/// `control_evolution.csv`, plots and `summary.txt`.
pub fn optimize_schedule(cfg: &RunConfig, out: &Path) -> Result<OptimizeOutcome> {
    let started = Instant::now();
    let outcome = run_optimizer(cfg, out)?;
    let mut lines = vec![("command", "optimize".to_string())];
    lines.extend(optimize_summary(&outcome.report));
    lines.push(("runtime", secs(started.elapsed())));
    write_summary(&out.join("summary.txt"), &lines)?;
    Ok(outcome)
}

#[derive(Debug)]
pub struct CompareOutcome {
    pub optimized: OptimizeOutcome,
    pub metrics: ComparisonMetrics,
    /// Peak of the spatial-mean drug level under `I*`; `None` if `I* ≡ 0`.
    pub drug_peak_time: Option<f64>,
    pub runtime: Duration,
}

impl CompareOutcome {
    pub fn exit_code(&self) -> i32 {
        self.optimized.exit_code()
    }
}

/// Optimizes, then runs `I*` and `I ≡ 0` side by side: the optimize
/// artifacts plus `metrics.csv`, plots and `summary.txt`.
pub fn compare(cfg: &RunConfig, out: &Path) -> Result<CompareOutcome> {
    let started = Instant::now();
    let optimized = run_optimizer(cfg, out)?;
    let problem = &optimized.problem;
    let zero = ControlProfile::zero(&problem.grid);
    let (controlled, uncontrolled) = parallel::join(
        || solve_forward(problem, &optimized.report.final_control, Storage::Endpoints),
        || solve_forward(problem, &zero, Storage::Endpoints),
    );
    let (controlled, uncontrolled) = (controlled?, uncontrolled?);
    let metrics = ComparisonMetrics::new(&controlled, &uncontrolled);
    let peak_time = drug_peak_time(&controlled).ok();

    write_csv(
        &out.join("metrics.csv"),
        &["t", "M_c", "M_u", "delta_pct", "peak_c", "peak_u"],
        metrics
            .rows
            .iter()
            .map(|r| vec![r.t, r.m_c, r.m_u, r.delta_pct, r.peak_c, r.peak_u]),
    )?;
    if cfg.plots {
        let every = (metrics.rows.len() / 2000).max(1);
        let thin = |f: &dyn Fn(&super::metrics::MetricRow) -> f64| -> Vec<(f64, f64)> {
            metrics
                .rows
                .iter()
                .step_by(every)
                .map(|r| (r.t, f(r)))
                .collect()
        };
        line_plot(
            &out.join("mass_comparison.svg"),
            "tumor mass",
            &[
                ("controlled", thin(&|r| r.m_c)),
                ("uncontrolled", thin(&|r| r.m_u)),
            ],
        )?;
        line_plot(
            &out.join("delta.svg"),
            "relative improvement (%)",
            &[("delta", thin(&|r| r.delta_pct))],
        )?;
    }

    let runtime = started.elapsed();
    let mut lines = vec![("command", "compare".to_string())];
    lines.extend(optimize_summary(&optimized.report));
    lines.extend([
        (
            "delta_final_pct",
            metrics.final_delta().map_or("n/a".into(), fmt_num),
        ),
        (
            "peak_reduction_pct_t0.9",
            metrics
                .peak_reduction_at(PEAK_REPORT_TIME)
                .map_or("n/a".into(), fmt_num),
        ),
        ("drug_peak_time", peak_time.map_or("n/a".into(), fmt_num)),
        ("runtime", secs(runtime)),
    ]);
    write_summary(&out.join("summary.txt"), &lines)?;
    Ok(CompareOutcome {
        optimized,
        metrics,
        drug_peak_time: peak_time,
        runtime,
    })
}

#[derive(Debug)]
pub struct GradcheckOutcome {
    pub report: GradcheckReport,
}

impl GradcheckOutcome {
    pub fn exit_code(&self) -> i32 {
        if self.report.passed() {
            0
        } else {
            EXIT_GRADCHECK_FAILED
        }
    }
}

/// Seeded gradient check at the configured control: `gradcheck.csv` and
/// `summary.txt`.
pub fn check_gradient(cfg: &RunConfig, out: &Path) -> Result<GradcheckOutcome> {
    let started = Instant::now();
    std::fs::create_dir_all(out)?;
    let problem = cfg.problem()?;
    let control = resolve_control(cfg, &problem)?;
    let report = gradcheck(&problem, &control, cfg.probes, cfg.seed)?;
    write_csv(
        &out.join("gradcheck.csv"),
        &["probe", "adjoint", "finite_difference", "rel_error", "pass"],
        report.probes.iter().map(|p| {
            vec![
                p.probe as f64,
                p.adjoint,
                p.finite_difference,
                p.rel_error,
                if p.passed() { 1.0 } else { 0.0 },
            ]
        }),
    )?;
    write_summary(
        &out.join("summary.txt"),
        &[
            ("command", "gradcheck".into()),
            ("control", cfg.control.to_string()),
            ("seed", cfg.seed.to_string()),
            ("epsilon", fmt_num(FD_EPSILON)),
            ("threshold", fmt_num(THRESHOLD)),
            ("J", fmt_num(report.cost)),
            ("worst_rel_error", fmt_num(report.worst())),
            ("passed", report.passed().to_string()),
            ("runtime", secs(started.elapsed())),
        ],
    )?;
    Ok(GradcheckOutcome { report })
}
