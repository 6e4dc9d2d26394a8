//! Convergence metrics computed from a recorded trajectory.

use serde::Serialize;

use super::Trajectory;

/// Half-width of the settling band around `s*`.
pub const SETTLING_BAND: f64 = 0.05;
/// Errors below this are treated as numerical floor and excluded from the rate fit.
pub const RATE_FIT_FLOOR: f64 = 1e-9;
/// Fraction of the horizon, counted from the end, used for steady-state quantities.
pub const TAIL_FRACTION: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub s_star: f64,
    pub t_final: f64,
    /// `max_i |y_i(t_final) − s*|`
    pub final_error: f64,
    /// `|y_i(t_final) − s*|` per agent.
    pub final_errors: Vec<f64>,
    /// `max_i |y_i(t_final) − y_i^r(t_final)|`
    pub final_tracking_error: f64,
    /// First recorded time after which `|y_i − s*| ≤ 0.05` holds for good.
    pub settling_times: Vec<Option<f64>>,
    pub sup_abs_u: Vec<f64>,
    /// `sup |ΓT⁻¹η_i − u*_i|` over the final 20% of the horizon.
    pub im_residual: Vec<Option<f64>>,
    /// `sup |u*_i|` over the same window.
    pub sup_u_star_tail: Vec<Option<f64>>,
    /// `max_i |y_i^r(t_final) − s*|`
    pub reference_final_error: f64,
    /// Least-squares slope of `log max_i |y_i^r − s*|`, fitted over `t ≥ t_final/4`
    /// on samples above the numerical floor.
    pub reference_rate: Option<f64>,
    pub max_xi_row_sum_error: f64,
    pub min_xi_diag: f64,
}

fn least_squares_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mt = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mt).powi(2)).sum();
    let sxy: f64 = points.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

fn settling_time(t: &[f64], y: &[f64], s_star: f64) -> Option<f64> {
    match y.iter().rposition(|y| (y - s_star).abs() > SETTLING_BAND) {
        None => t.first().copied(),
        Some(last) if last + 1 < t.len() => Some(t[last + 1]),
        Some(_) => None,
    }
}

pub fn metrics(traj: &Trajectory, s_star: f64) -> MetricsReport {
    let last = traj.len().saturating_sub(1);
    let t_final = traj.t.get(last).copied().unwrap_or(0.0);
    let tail_start = t_final * (1.0 - TAIL_FRACTION);
    let final_errors: Vec<f64> = traj.agents.iter().map(|a| (a.y[last] - s_star).abs()).collect();
    let final_tracking_error = traj
        .agents
        .iter()
        .map(|a| (a.y[last] - a.y_r[last]).abs())
        .fold(0.0, f64::max);
    let settling_times = traj.agents.iter().map(|a| settling_time(&traj.t, &a.y, s_star)).collect();
    let sup_abs_u = traj.agents.iter().map(|a| a.u.iter().fold(0.0, |m: f64, u| m.max(u.abs()))).collect();

    let tail: Vec<usize> = (0..traj.len()).filter(|&k| traj.t[k] >= tail_start).collect();
    let mut im_residual = Vec::new();
    let mut sup_u_star_tail = Vec::new();
    for a in &traj.agents {
        if a.u_star.len() == traj.len() {
            im_residual.push(Some(tail.iter().map(|&k| (a.eta_ff[k] - a.u_star[k]).abs()).fold(0.0, f64::max)));
            sup_u_star_tail.push(Some(tail.iter().map(|&k| a.u_star[k].abs()).fold(0.0, f64::max)));
        } else {
            im_residual.push(None);
            sup_u_star_tail.push(None);
        }
    }

    let ref_err = |k: usize| traj.agents.iter().map(|a| (a.y_r[k] - s_star).abs()).fold(0.0, f64::max);
    let points: Vec<(f64, f64)> = (0..traj.len())
        .filter(|&k| traj.t[k] >= t_final / 4.0)
        .map(|k| (traj.t[k], ref_err(k)))
        .filter(|&(_, e)| e > RATE_FIT_FLOOR)
        .map(|(t, e)| (t, e.ln()))
        .collect();

    MetricsReport {
        s_star,
        t_final,
        final_error: final_errors.iter().copied().fold(0.0, f64::max),
        final_errors,
        final_tracking_error,
        settling_times,
        sup_abs_u,
        im_residual,
        sup_u_star_tail,
        reference_final_error: if traj.is_empty() { 0.0 } else { ref_err(last) },
        reference_rate: least_squares_slope(&points),
        max_xi_row_sum_error: traj.xi_row_sum_error.iter().copied().fold(0.0, f64::max),
        min_xi_diag: traj
            .agents
            .iter()
            .flat_map(|a| a.xi_ii.iter().copied())
            .fold(f64::INFINITY, f64::min),
    }
}
