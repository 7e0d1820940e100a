//! Controlled-versus-uncontrolled comparison metrics.

use crate::error::{OncoError, Result};
use crate::forward::Trajectory;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    pub t: f64,
    pub m_c: f64,
    pub m_u: f64,
    /// `(M_u - M_c) / M_u × 100`.
    pub delta_pct: f64,
    pub peak_c: f64,
    pub peak_u: f64,
}

/// One row per time level where the uncontrolled mass is positive.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonMetrics {
    pub rows: Vec<MetricRow>,
}

impl ComparisonMetrics {
    pub fn new(controlled: &Trajectory, uncontrolled: &Trajectory) -> Self {
        let grid = &controlled.grid;
        let rows = controlled
            .stats
            .iter()
            .zip(&uncontrolled.stats)
            .enumerate()
            .filter(|(_, (_, u))| u.mass > 0.0)
            .map(|(n, (c, u))| MetricRow {
                t: grid.time(n),
                m_c: c.mass,
                m_u: u.mass,
                delta_pct: (u.mass - c.mass) / u.mass * 100.0,
                peak_c: c.peak,
                peak_u: u.peak,
            })
            .collect();
        Self { rows }
    }

    pub fn final_delta(&self) -> Option<f64> {
        self.rows.last().map(|r| r.delta_pct)
    }

    /// Row closest to time `t`.
    pub fn at(&self, t: f64) -> Option<&MetricRow> {
        self.rows
            .iter()
            .min_by(|a, b| (a.t - t).abs().total_cmp(&(b.t - t).abs()))
    }

    /// `(peak_u - peak_c) / peak_u × 100` at the row closest to `t`.
    pub fn peak_reduction_at(&self, t: f64) -> Option<f64> {
        self.at(t).map(|r| (r.peak_u - r.peak_c) / r.peak_u * 100.0)
    }
}

/// Time at which the spatial mean of `d` peaks.
pub fn drug_peak_time(traj: &Trajectory) -> Result<f64> {
    let grid = &traj.grid;
    let len = grid.mesh.dx * (grid.mesh.n_x - 1) as f64;
    let mut best: Option<(usize, f64)> = None;
    for (n, s) in traj.stats.iter().enumerate() {
        let mean = s.drug_mass / len;
        if best.is_none_or(|(_, b)| mean > b) {
            best = Some((n, mean));
        }
    }
    match best {
        Some((n, v)) if v > 0.0 => Ok(grid.time(n)),
        _ => Err(OncoError::NoDrug),
    }
}
