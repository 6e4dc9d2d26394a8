//! Closed-loop simulation: coordinator, exosystem, plants, observers and
//! internal models integrated as one monolithic state with fixed-step RK4.
//!
//! State layout: `[y^r (N), ζ (N), Ξ (N², row-major), v (n_v)]` followed, per
//! agent, by `[z, x, x̃, η]`. In coordinator-only mode the agent blocks are absent.

pub mod metrics;
pub mod output;
pub mod rk4;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::controller::{saturate, theta_tilde, validate_gains, ControlMode, ControllerGains};
use crate::coordinator::{CoordinatorFlow, CoordinatorParams};
use crate::cost::{global_minimizer, ScalarCost};
use crate::error::{Error, Result};
use crate::graph::{is_strongly_connected, Laplacian};
use crate::observer::ObserverSpec;
use crate::plant::{AgentPlant, Exosystem};
use crate::regulator::{feedforward_oracle, RegulatorSpec, SYLVESTER_TOL};
use crate::validate::ValidationReport;

pub use metrics::{metrics, MetricsReport};
use rk4::{rk4_step_at, OdeSystem, Rk4Scratch};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Integration {
    pub dt: f64,
    pub t_final: f64,
    #[serde(default = "default_record_stride")]
    pub record_stride: usize,
}

fn default_record_stride() -> usize {
    100
}

impl Default for Integration {
    fn default() -> Self {
        Self {
            dt: 1e-4,
            t_final: 100.0,
            record_stride: default_record_stride(),
        }
    }
}

impl Integration {
    pub fn step_count(&self) -> usize {
        (self.t_final / self.dt).round() as usize
    }
}

/// Everything one agent needs for the closed loop.
#[derive(Debug, Clone)]
pub struct AgentModel {
    pub plant: AgentPlant,
    pub regulator: RegulatorSpec,
    pub observer: ObserverSpec,
    pub gains: ControllerGains,
    pub z0: Vec<f64>,
    pub x0: Vec<f64>,
}

/// A fully resolved closed-loop model, ready to integrate.
#[derive(Clone)]
pub struct Model {
    pub laplacian: Laplacian,
    pub costs: Vec<Arc<dyn ScalarCost>>,
    pub coordinator: CoordinatorParams,
    pub y_r0: Vec<f64>,
    pub exosystem: Exosystem,
    pub agents: Vec<AgentModel>,
    pub mode: ControlMode,
    pub integration: Integration,
}

impl std::fmt::Debug for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Model")
            .field("laplacian", &self.laplacian)
            .field("coordinator", &self.coordinator)
            .field("y_r0", &self.y_r0)
            .field("exosystem", &self.exosystem)
            .field("agents", &self.agents)
            .field("mode", &self.mode)
            .field("integration", &self.integration)
            .finish_non_exhaustive()
    }
}

impl Model {
    pub fn agent_count(&self) -> usize {
        self.laplacian.node_count()
    }

    pub fn has_plants(&self) -> bool {
        self.mode != ControlMode::CoordinatorOnly
    }

    /// Global minimizer of the summed costs.
    pub fn s_star(&self) -> Result<f64> {
        global_minimizer(self.costs.iter().map(|c| c.as_ref()))
    }

    /// Every pre-run check; nothing is integrated.
    pub fn validate(&self) -> ValidationReport {
        let mut r = ValidationReport::new();
        let n = self.agent_count();
        r.push(
            "graph strongly connected",
            is_strongly_connected(self.laplacian.source()),
            format!("{n} nodes"),
        );
        r.push("cost count", self.costs.len() == n, format!("{} costs for {n} agents", self.costs.len()));
        for (i, c) in self.costs.iter().enumerate() {
            r.push(
                format!("agent {} cost strongly convex", i + 1),
                c.strong_convexity() > 0.0 && c.lipschitz_gradient() >= c.strong_convexity(),
                format!("modulus {}, gradient Lipschitz {}", c.strong_convexity(), c.lipschitz_gradient()),
            );
        }
        r.push(
            "coordinator gains",
            self.coordinator.validate().is_ok(),
            format!("alpha1 = {}, alpha2 = {}", self.coordinator.alpha1, self.coordinator.alpha2),
        );
        r.push("initial references", self.y_r0.len() == n && self.y_r0.iter().all(|y| y.is_finite()), format!("{} values", self.y_r0.len()));
        let Integration { dt, t_final, record_stride } = self.integration;
        r.push("step size", dt.is_finite() && dt > 0.0, format!("dt = {dt}"));
        r.push("horizon", t_final.is_finite() && t_final >= dt, format!("t_final = {t_final}"));
        r.push("record stride", record_stride >= 1, format!("record_stride = {record_stride}"));
        if !self.has_plants() {
            return r;
        }
        r.push("agent count", self.agents.len() == n, format!("{} agents for {n} nodes", self.agents.len()));
        for (i, a) in self.agents.iter().enumerate() {
            let tag = format!("agent {}", i + 1);
            let chain = a.plant.chain_len();
            match a.plant.validate() {
                Ok(()) => r.push(format!("{tag} plant"), true, format!("chain length {chain}")),
                Err(e) => r.push(format!("{tag} plant"), false, e.to_string()),
            }
            r.push(
                format!("{tag} initial state"),
                a.x0.len() == chain && a.z0.len() == a.plant.zero_dim(),
                format!("x0 has {} entries, z0 has {}", a.x0.len(), a.z0.len()),
            );
            r.push(
                format!("{tag} observer order"),
                a.observer.order() == chain,
                format!("{} coefficients for chain length {chain}", a.observer.order()),
            );
            r.push(
                format!("{tag} gamma order"),
                a.gains.gamma.len() + 1 == chain,
                format!("{} coefficients for chain length {chain}", a.gains.gamma.len()),
            );
            r.push(format!("{tag} observer gain h"), a.observer.h > 0.0, format!("h = {}", a.observer.h));
            for mut c in validate_gains(&a.gains.gamma, Some(&a.observer.c), a.gains.k, a.gains.g, a.gains.delta).checks {
                c.name = format!("{tag} {}", c.name);
                r.checks.push(c);
            }
            let syl = &a.regulator.sylvester;
            r.push(
                format!("{tag} Sylvester residual"),
                syl.residual <= SYLVESTER_TOL,
                format!("residual {:e}, cond(T) {:e}", syl.residual, syl.condition_number),
            );
            r.push(
                format!("{tag} regulator state"),
                a.regulator.eta.len() == a.regulator.order(),
                format!("order {}", a.regulator.order()),
            );
        }
        r
    }
}

#[derive(Debug, Clone, Copy)]
struct AgentLayout {
    z: usize,
    x: usize,
    xt: usize,
    eta: usize,
    end: usize,
}

#[derive(Debug, Clone)]
struct Layout {
    n: usize,
    y_r: usize,
    zeta: usize,
    xi: usize,
    v: usize,
    agents: Vec<AgentLayout>,
    dim: usize,
}

impl Layout {
    fn new(model: &Model) -> Self {
        let n = model.agent_count();
        let y_r = 0;
        let zeta = n;
        let xi = 2 * n;
        let v = xi + n * n;
        let mut next = v + model.exosystem.dim();
        let mut agents = Vec::new();
        if model.has_plants() {
            for a in &model.agents {
                let z = next;
                let x = z + a.plant.zero_dim();
                let xt = x + a.plant.chain_len();
                let eta = xt + a.plant.chain_len();
                let end = eta + a.regulator.order();
                agents.push(AgentLayout { z, x, xt, eta, end });
                next = end;
            }
        }
        Self {
            n,
            y_r,
            zeta,
            xi,
            v,
            agents,
            dim: next,
        }
    }
}

struct ClosedLoop<'a> {
    model: &'a Model,
    flow: CoordinatorFlow,
    layout: Layout,
}

/// Control input of one agent and the composite variable it was computed from.
fn agent_control(mode: ControlMode, a: &AgentModel, x: &[f64], xt: &[f64], eta: &[f64], y_r: f64) -> (f64, f64) {
    let g = &a.gains;
    let ff = a.regulator.feedforward(eta);
    match mode {
        ControlMode::StateFeedback => {
            let th = theta_tilde(x, y_r, g.g, &g.gamma);
            (-g.k * th + ff, th)
        }
        _ => {
            let th = theta_tilde(xt, y_r, g.g, &g.gamma);
            (-saturate(g.k * th, g.delta) + ff, th)
        }
    }
}

impl OdeSystem for ClosedLoop<'_> {
    fn dim(&self) -> usize {
        self.layout.dim
    }

    fn rhs(&self, s: &[f64], d: &mut [f64]) -> Result<()> {
        let l = &self.layout;
        let n = l.n;
        {
            let (d_head, _) = d.split_at_mut(l.v);
            let (d_yr, rest) = d_head.split_at_mut(n);
            let (d_zeta, d_xi) = rest.split_at_mut(n);
            self.flow.rhs_into(
                &s[l.y_r..l.zeta],
                &s[l.zeta..l.xi],
                &s[l.xi..l.v],
                d_yr,
                d_zeta,
                d_xi,
            )?;
        }
        let nv = self.model.exosystem.dim();
        let sm = self.model.exosystem.matrix();
        let v = &s[l.v..l.v + nv];
        for i in 0..nv {
            d[l.v + i] = (0..nv).map(|j| sm[(i, j)] * v[j]).sum();
        }
        for (i, (a, al)) in self.model.agents.iter().zip(&l.agents).enumerate() {
            let z = &s[al.z..al.x];
            let x = &s[al.x..al.xt];
            let xt = &s[al.xt..al.eta];
            let eta = &s[al.eta..al.end];
            let y_r = s[l.y_r + i];
            let (u, _) = agent_control(self.model.mode, a, x, xt, eta, y_r);
            let (d_z, rest) = d[al.z..al.end].split_at_mut(al.x - al.z);
            let (d_x, rest) = rest.split_at_mut(al.xt - al.x);
            let (d_xt, d_eta) = rest.split_at_mut(al.eta - al.xt);
            a.plant.rhs_into(z, x, v, u, d_z, d_x);
            a.observer.rhs_into(xt, x[0], d_xt);
            a.regulator.rhs_into(eta, u, d_eta);
        }
        Ok(())
    }

    fn block_of(&self, i: usize) -> String {
        let l = &self.layout;
        if i < l.zeta {
            return format!("coordinator y_r[{}]", i + 1);
        }
        if i < l.xi {
            return format!("coordinator zeta[{}]", i - l.zeta + 1);
        }
        if i < l.v {
            return "coordinator xi".into();
        }
        for (k, al) in l.agents.iter().enumerate() {
            if i >= al.z && i < al.end {
                let part = if i < al.x {
                    "z"
                } else if i < al.xt {
                    "x"
                } else if i < al.eta {
                    "x_tilde"
                } else {
                    "eta"
                };
                return format!("agent {} {part}", k + 1);
            }
        }
        "exosystem".into()
    }
}

/// Time series of one agent at the recorded instants.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AgentSeries {
    pub y: Vec<f64>,
    pub y_r: Vec<f64>,
    pub u: Vec<f64>,
    pub theta_tilde: Vec<f64>,
    /// `ΓT⁻¹η`
    pub eta_ff: Vec<f64>,
    /// Oracle `u*(s*, v, w)`; empty when no closed form exists.
    pub u_star: Vec<f64>,
    pub zeta: Vec<f64>,
    pub xi_ii: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub x_tilde: Vec<Vec<f64>>,
    pub eta: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub agents: Vec<AgentSeries>,
    /// `max_i |Σ_k Ξ_ik − 1|` at each recorded instant.
    pub xi_row_sum_error: Vec<f64>,
    pub v: Vec<Vec<f64>>,
    pub mode: ControlMode,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }
}

fn initial_state(model: &Model, layout: &Layout) -> Vec<f64> {
    let n = layout.n;
    let mut s = vec![0.0; layout.dim];
    s[layout.y_r..layout.zeta].copy_from_slice(&model.y_r0);
    for i in 0..n {
        s[layout.xi + i * n + i] = 1.0;
    }
    s[layout.v..layout.v + model.exosystem.dim()].copy_from_slice(model.exosystem.v.as_slice());
    for (a, al) in model.agents.iter().zip(&layout.agents) {
        s[al.z..al.x].copy_from_slice(&a.z0);
        s[al.x..al.xt].copy_from_slice(&a.x0);
        let xt0 = a.observer.initial_estimate(a.x0[0]);
        s[al.xt..al.eta].copy_from_slice(&xt0);
        s[al.eta..al.end].copy_from_slice(a.regulator.eta.as_slice());
    }
    s
}

fn record(model: &Model, layout: &Layout, s_star: f64, t: f64, s: &[f64], traj: &mut Trajectory) {
    let n = layout.n;
    traj.t.push(t);
    let v = &s[layout.v..layout.v + model.exosystem.dim()];
    traj.v.push(v.to_vec());
    let mut row_err: f64 = 0.0;
    for i in 0..n {
        let row: f64 = s[layout.xi + i * n..layout.xi + (i + 1) * n].iter().sum();
        row_err = row_err.max((row - 1.0).abs());
    }
    traj.xi_row_sum_error.push(row_err);
    for i in 0..n {
        let series = &mut traj.agents[i];
        let y_r = s[layout.y_r + i];
        series.y_r.push(y_r);
        series.zeta.push(s[layout.zeta + i]);
        series.xi_ii.push(s[layout.xi + i * n + i]);
        match (model.agents.get(i), layout.agents.get(i)) {
            (Some(a), Some(al)) => {
                let x = &s[al.x..al.xt];
                let xt = &s[al.xt..al.eta];
                let eta = &s[al.eta..al.end];
                let (u, th) = agent_control(model.mode, a, x, xt, eta, y_r);
                series.y.push(x[0]);
                series.u.push(u);
                series.theta_tilde.push(th);
                series.eta_ff.push(a.regulator.feedforward(eta));
                if let Ok(us) = feedforward_oracle(&a.plant, s_star, v) {
                    series.u_star.push(us);
                }
                series.x.push(x.to_vec());
                series.x_tilde.push(xt.to_vec());
                series.eta.push(eta.to_vec());
                series.z.push(s[al.z..al.x].to_vec());
            }
            _ => {
                series.y.push(y_r);
                series.u.push(0.0);
                series.theta_tilde.push(0.0);
                series.eta_ff.push(0.0);
            }
        }
    }
}

/// Integrates the closed loop from `t = 0` to `t_final`, recording every
/// `record_stride` steps and at the final step.
pub fn run(model: &Model) -> Result<Trajectory> {
    let report = model.validate();
    if !report.passed() {
        return Err(Error::Validation(report));
    }
    let s_star = model.s_star()?;
    let layout = Layout::new(model);
    let flow = CoordinatorFlow::new(&model.laplacian, model.costs.clone(), model.coordinator)?;
    let sys = ClosedLoop { model, flow, layout };
    let Integration { dt, record_stride, .. } = model.integration;
    let steps = model.integration.step_count();

    let mut traj = Trajectory {
        agents: vec![AgentSeries::default(); sys.layout.n],
        mode: model.mode,
        ..Default::default()
    };
    let mut state = initial_state(model, &sys.layout);
    let mut scratch = Rk4Scratch::new(sys.layout.dim);
    record(model, &sys.layout, s_star, 0.0, &state, &mut traj);
    for k in 0..steps {
        let t = k as f64 * dt;
        rk4_step_at(&sys, &mut state, t, dt, &mut scratch)?;
        if (k + 1) % record_stride == 0 || k + 1 == steps {
            record(model, &sys.layout, s_star, (k + 1) as f64 * dt, &state, &mut traj);
        }
    }
    log::debug!("integrated {steps} steps of dimension {}", sys.layout.dim);
    Ok(traj)
}
