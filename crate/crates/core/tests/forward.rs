use onco::forward::{cost, solve_forward, ControlProfile, Normalization, Problem, Storage};
use onco::optimize::initial_guess;
use onco::{Field, ModelParams};

fn uniform(params: &ModelParams, n_x: usize, cfl: f64, p0: f64, d0: f64) -> Problem {
    Problem::with_initial(
        params.clone(),
        n_x,
        cfl,
        Field::constant(n_x, p0),
        Field::constant(n_x, d0),
    )
    .unwrap()
}

/// Right-hand side of the spatially uniform system, written out by hand.
fn ode(params: &ModelParams, i: f64, p: f64, d: f64) -> (f64, f64) {
    let dp = params.r_growth * p * (1.0 - p / params.k_cap) - params.delta * d * p;
    let dd = params.gamma_ex * (i - d) - params.lambda_cl * d;
    (dp, dd)
}

fn rk4(
    params: &ModelParams,
    i: f64,
    (p0, d0): (f64, f64),
    t_final: f64,
    steps: usize,
) -> (f64, f64) {
    let h = t_final / steps as f64;
    let (mut p, mut d) = (p0, d0);
    for _ in 0..steps {
        let k1 = ode(params, i, p, d);
        let k2 = ode(params, i, p + 0.5 * h * k1.0, d + 0.5 * h * k1.1);
        let k3 = ode(params, i, p + 0.5 * h * k2.0, d + 0.5 * h * k2.1);
        let k4 = ode(params, i, p + h * k3.0, d + h * k3.1);
        p += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        d += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
    }
    (p, d)
}

#[test]
fn uniform_data_follows_the_scalar_ode() {
    let params = ModelParams {
        kappa: 0.0,
        ..Default::default()
    };
    let pr = uniform(&params, 41, 0.025, 0.3, 0.1);
    let i_const = 1.5;
    let u = ControlProfile::constant(&pr.grid, &params, i_const).unwrap();
    let traj = solve_forward(&pr, &u, Storage::Full).unwrap();

    let (mut p, mut d) = (0.3, 0.1);
    let mut worst_euler = 0.0f64;
    for n in 0..pr.grid.n_t {
        let k = traj.slot(n).unwrap();
        for (&pv, &dv) in traj.p(k).iter().zip(traj.d(k)) {
            worst_euler = worst_euler.max((pv - p).abs()).max((dv - d).abs());
        }
        let (dp, dd) = ode(&params, i_const, p, d);
        p += pr.grid.dt * dp;
        d += pr.grid.dt * dd;
    }
    assert!(worst_euler <= 1e-12, "{worst_euler:e}");

    let (p_ref, d_ref) = rk4(&params, i_const, (0.3, 0.1), params.t_final, 20_000);
    let last = traj.levels().len() - 1;
    let err = traj
        .p(last)
        .iter()
        .map(|v| (v - p_ref).abs())
        .fold(0.0, f64::max)
        .max(
            traj.d(last)
                .iter()
                .map(|v| (v - d_ref).abs())
                .fold(0.0, f64::max),
        );
    assert!(err <= 1e-3, "{err:e}");
}

fn reference_problem() -> Problem {
    Problem::new(ModelParams::default(), 200, 0.025, Normalization::default()).unwrap()
}

#[test]
fn reference_run_stays_nonnegative_and_bounded() {
    let pr = reference_problem();
    let params = &pr.params;
    let u = ControlProfile::constant(&pr.grid, params, params.m_tol).unwrap();
    let traj = solve_forward(&pr, &u, Storage::Endpoints).unwrap();
    assert!(traj.min_p >= -1e-8 && traj.min_d >= -1e-8);

    let p0_max = pr.p0.max();
    let bound = 2.0 * params.k_cap.max(p0_max);
    assert!(traj
        .stats
        .iter()
        .all(|s| s.peak <= bound && s.mass.is_finite()));

    let d_cap = params.gamma_ex * params.m_tol / (params.gamma_ex + params.lambda_cl) + pr.d0.max();
    let d_final = traj.d(traj.levels().len() - 1);
    assert!(d_final.iter().all(|&v| v <= 1.05 * d_cap));
}

#[test]
fn drug_never_exceeds_its_steady_state() {
    let params = ModelParams::default();
    let pr = Problem::new(params.clone(), 41, 0.4, Normalization::UnitPeak).unwrap();
    let u = ControlProfile::constant(&pr.grid, &params, params.m_tol).unwrap();
    let traj = solve_forward(&pr, &u, Storage::Full).unwrap();
    let d_cap = params.gamma_ex * params.m_tol / (params.gamma_ex + params.lambda_cl);
    for k in 0..traj.levels().len() {
        assert!(traj.d(k).iter().all(|&v| v <= 1.05 * d_cap));
    }
}

#[test]
fn cost_converges_under_refinement() {
    let params = ModelParams::default();
    let j = |n_x: usize| {
        let pr = Problem::new(params.clone(), n_x, 0.025, Normalization::default()).unwrap();
        let u = initial_guess(&pr.grid, &params);
        let traj = solve_forward(&pr, &u, Storage::Endpoints).unwrap();
        cost(&pr, &u, &traj)
    };
    let js: Vec<f64> = [50, 100, 200].into_iter().map(j).collect();
    let (a, b) = ((js[1] - js[0]).abs(), (js[2] - js[1]).abs());
    assert!(b < a, "{js:?}");
}
