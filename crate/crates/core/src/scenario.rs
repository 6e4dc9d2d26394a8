//! Scenario configuration: one JSON document with sections mirroring the modules.
//!
//! Unknown keys are rejected everywhere. [`Scenario::resolve`] turns a scenario
//! into a runnable [`Model`] and an explicit copy of the scenario in which every
//! seeded or defaulted quantity (uncertainty, initial states, references,
//! compensator pairs, coefficients) is written out.

use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::controller::{ControlMode, ControllerGains};
use crate::coordinator::CoordinatorParams;
use crate::cost::{CostFunction, ScalarCost};
use crate::error::{Error, Result};
use crate::graph::{laplacian, Digraph};
use crate::observer::{Coefficients, ObserverSpec};
use crate::plant::{sample_uncertainty, AgentPlant, Exosystem, FamilyKind, UncertaintyMode};
use crate::regulator::{default_pair, RegulatorSpec};
use crate::rng::{stream_rng, Stream};
use crate::sim::{AgentModel, Integration, Model};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    /// One-based.
    pub from: usize,
    /// One-based.
    pub to: usize,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GraphConfig {
    pub nodes: usize,
    pub edges: Vec<Edge>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoordinatorConfig {
    #[serde(default = "one")]
    pub alpha1: f64,
    #[serde(default = "one")]
    pub alpha2: f64,
    /// Defaults to each agent's initial output, or a seeded draw in `[−1, 1]` without plants.
    #[serde(default)]
    pub y_r0: Option<Vec<f64>>,
}

impl Default for CoordinatorConfig {
    fn default() -> Self {
        Self {
            alpha1: 1.0,
            alpha2: 1.0,
            y_r0: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExosystemConfig {
    pub theta: f64,
    pub amplitude: f64,
    #[serde(default = "default_v0")]
    pub v0: [f64; 2],
}

/// `v(t) = (sin θt, cos θt)`.
fn default_v0() -> [f64; 2] {
    [0.0, 1.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialState {
    #[serde(default)]
    pub z: Vec<f64>,
    pub x: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegulatorConfig {
    /// Row-major.
    pub m: Vec<Vec<f64>>,
    pub n: Vec<f64>,
    #[serde(default)]
    pub eta0: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AgentConfig {
    pub family: FamilyKind,
    pub nominal: [f64; 3],
    #[serde(default = "one")]
    pub b: f64,
    /// Explicit uncertainty; drawn from the seed when absent.
    #[serde(default)]
    pub w: Option<[f64; 3]>,
    #[serde(default)]
    pub initial: Option<InitialState>,
    #[serde(default)]
    pub regulator: Option<RegulatorConfig>,
    /// Overrides the observer section's coefficients for this agent.
    #[serde(default)]
    pub observer_c: Option<Coefficients>,
    /// Overrides the controller section's `gamma` for this agent.
    #[serde(default)]
    pub gamma: Option<Coefficients>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverConfig {
    pub h: f64,
    #[serde(default)]
    pub c: Coefficients,
}

impl Default for ObserverConfig {
    fn default() -> Self {
        Self {
            h: 100.0,
            c: Coefficients::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerConfig {
    #[serde(default)]
    pub mode: ControlMode,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default = "one")]
    pub g: f64,
    #[serde(default)]
    pub gamma: Coefficients,
}

fn default_delta() -> f64 {
    1e5
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            mode: ControlMode::default(),
            k: 4e4,
            delta: default_delta(),
            g: 1.0,
            gamma: Coefficients::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub graph: GraphConfig,
    pub costs: Vec<CostFunction>,
    #[serde(default)]
    pub coordinator: CoordinatorConfig,
    pub exosystem: ExosystemConfig,
    #[serde(default)]
    pub agents: Vec<AgentConfig>,
    #[serde(default)]
    pub observer: ObserverConfig,
    #[serde(default)]
    pub controller: ControllerConfig,
    #[serde(default)]
    pub integration: Integration,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub uncertainty: UncertaintyMode,
}

/// Input gain used by every agent of the shipped closed-loop example.
pub const EXAMPLE_INPUT_GAIN: f64 = 1e-3;
/// Observer polynomial of the shipped example: `(λ + 4)²` and `(λ + 4)³`.
pub const EXAMPLE_OBSERVER_C2: [f64; 2] = [16.0, 8.0];
pub const EXAMPLE_OBSERVER_C3: [f64; 3] = [64.0, 48.0, 12.0];

fn reference_edges() -> Vec<Edge> {
    [(3, 1), (1, 2), (2, 3), (3, 4), (4, 5), (2, 5), (5, 1)]
        .into_iter()
        .map(|(from, to)| Edge { from, to, weight: 1.0 })
        .collect()
}

impl Scenario {
    /// The five-agent example: reference network and costs, agents 1–2 of
    /// family A, agents 3–5 of family B, `A = 10`, `θ = 0.8`, `K = 4·10⁴`, `h = 100`.
    pub fn paper_example() -> Self {
        let agents = (1..=5)
            .map(|i| {
                let family = if i <= 2 { FamilyKind::A } else { FamilyKind::B };
                let c: &[f64] = if i <= 2 { &EXAMPLE_OBSERVER_C2 } else { &EXAMPLE_OBSERVER_C3 };
                AgentConfig {
                    family,
                    nominal: [i as f64; 3],
                    b: EXAMPLE_INPUT_GAIN,
                    w: None,
                    initial: None,
                    regulator: None,
                    observer_c: Some(Coefficients::Explicit(c.to_vec())),
                    gamma: None,
                }
            })
            .collect();
        Self {
            graph: GraphConfig {
                nodes: 5,
                edges: reference_edges(),
            },
            costs: (1..=5).map(CostFunction::reference).collect(),
            coordinator: CoordinatorConfig::default(),
            exosystem: ExosystemConfig {
                theta: 0.8,
                amplitude: 10.0,
                v0: default_v0(),
            },
            agents,
            observer: ObserverConfig::default(),
            controller: ControllerConfig::default(),
            integration: Integration {
                dt: 1e-4,
                t_final: 100.0,
                record_stride: 100,
            },
            seed: 0,
            uncertainty: UncertaintyMode::Random,
        }
    }

    /// Coordinator alone on the reference network and costs over 200 s.
    pub fn coordinator_only_example() -> Self {
        Self::paper_example().coordinator_only()
    }

    /// The same network, costs and seed with plants removed, over 200 s.
    pub fn coordinator_only(&self) -> Self {
        let mut s = self.clone();
        s.agents.clear();
        s.controller.mode = ControlMode::CoordinatorOnly;
        s.integration = Integration {
            dt: 1e-3,
            t_final: 200.0,
            record_stride: 100,
        };
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("scenario serializes")
    }

    /// Applies dotted-key overrides such as `controller.K=10` or `agents.0.b=0.5`.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut value = self.to_value();
        for o in overrides {
            let (key, v) = parse_override(o.as_ref())?;
            set_dotted(&mut value, &key, v)?;
        }
        serde_json::from_value(value).map_err(|e| Error::Config(format!("after overrides: {e}")))
    }

    pub fn build_graph(&self) -> Result<Digraph> {
        let edges: Vec<(usize, usize, f64)> = self
            .graph
            .edges
            .iter()
            .map(|e| {
                if e.from == 0 || e.to == 0 {
                    Err(Error::InvalidGraph("node indices are one-based".into()))
                } else {
                    Ok((e.from - 1, e.to - 1, e.weight))
                }
            })
            .collect::<Result<_>>()?;
        Digraph::from_edges(self.graph.nodes, &edges)
    }

    /// Builds the runnable model together with the fully explicit scenario.
    pub fn resolve(&self) -> Result<(Model, Scenario)> {
        let mut resolved = self.clone();
        let graph = self.build_graph()?;
        let lap = laplacian(&graph);
        let n = self.graph.nodes;
        if self.costs.len() != n {
            return Err(Error::Config(format!("{} costs for {n} nodes", self.costs.len())));
        }
        for c in &self.costs {
            c.validate()?;
        }
        let costs: Vec<Arc<dyn ScalarCost>> = self.costs.iter().map(|c| Arc::new(*c) as Arc<dyn ScalarCost>).collect();
        let theta = self.exosystem.theta;
        let exosystem = Exosystem::harmonic(theta, self.exosystem.v0)?;

        let mode = self.controller.mode;
        let mut agents = Vec::new();
        if mode != ControlMode::CoordinatorOnly {
            if self.agents.len() != n {
                return Err(Error::Config(format!("{} agents for {n} nodes", self.agents.len())));
            }
            for (i, cfg) in self.agents.iter().enumerate() {
                let (model, explicit) = self.resolve_agent(i, cfg, theta)?;
                agents.push(model);
                resolved.agents[i] = explicit;
            }
        }

        let y_r0 = match &self.coordinator.y_r0 {
            Some(y) => y.clone(),
            None if !agents.is_empty() => agents.iter().map(|a: &AgentModel| a.x0[0]).collect(),
            None => (0..n)
                .map(|i| stream_rng(self.seed, i, Stream::Reference).random_range(-1.0..=1.0))
                .collect(),
        };
        resolved.coordinator.y_r0 = Some(y_r0.clone());

        let model = Model {
            laplacian: lap,
            costs,
            coordinator: CoordinatorParams {
                alpha1: self.coordinator.alpha1,
                alpha2: self.coordinator.alpha2,
            },
            y_r0,
            exosystem,
            agents,
            mode,
            integration: self.integration,
        };
        Ok((model, resolved))
    }

    fn resolve_agent(&self, i: usize, cfg: &AgentConfig, theta: f64) -> Result<(AgentModel, AgentConfig)> {
        let tag = |e: Error| Error::Config(format!("agent {}: {e}", i + 1));
        let w = cfg
            .w
            .unwrap_or_else(|| sample_uncertainty(self.seed, i, cfg.nominal, self.uncertainty));
        let plant = AgentPlant::new(cfg.family, cfg.nominal, w, cfg.b, self.exosystem.amplitude).map_err(tag)?;
        let chain = plant.chain_len();

        let initial = match &cfg.initial {
            Some(s) => s.clone(),
            None => {
                let mut rng = stream_rng(self.seed, i, Stream::InitialState);
                let z = (0..plant.zero_dim()).map(|_| rng.random_range(-1.0..=1.0)).collect();
                let x = (0..chain).map(|_| rng.random_range(-1.0..=1.0)).collect();
                InitialState { z, x }
            }
        };

        let (m, nvec, eta0) = match &cfg.regulator {
            Some(r) => {
                let rows = r.m.len();
                if r.m.iter().any(|row| row.len() != rows) {
                    return Err(Error::Config(format!("agent {}: regulator M must be square", i + 1)));
                }
                let flat: Vec<f64> = r.m.iter().flatten().copied().collect();
                (
                    DMatrix::from_row_slice(rows, rows, &flat),
                    DVector::from_row_slice(&r.n),
                    r.eta0.clone(),
                )
            }
            None => {
                let (m, nvec) = default_pair(&plant.family).map_err(tag)?;
                (m, nvec, None)
            }
        };
        let mut regulator = RegulatorSpec::for_plant(&plant, theta, Some((m.clone(), nvec.clone()))).map_err(tag)?;
        let eta0 = eta0.unwrap_or_else(|| vec![0.0; regulator.order()]);
        if eta0.len() != regulator.order() {
            return Err(Error::Config(format!("agent {}: eta0 must have {} entries", i + 1, regulator.order())));
        }
        regulator.eta = DVector::from_vec(eta0.clone());

        let c = cfg.observer_c.as_ref().unwrap_or(&self.observer.c).resolve(chain).map_err(tag)?;
        let observer = ObserverSpec {
            h: self.observer.h,
            c: c.clone(),
        };
        let gamma = cfg
            .gamma
            .as_ref()
            .unwrap_or(&self.controller.gamma)
            .resolve(chain - 1)
            .map_err(tag)?;
        let gains = ControllerGains {
            k: self.controller.k,
            delta: self.controller.delta,
            g: self.controller.g,
            gamma: gamma.clone(),
        };

        let explicit = AgentConfig {
            family: cfg.family,
            nominal: cfg.nominal,
            b: cfg.b,
            w: Some(w),
            initial: Some(initial.clone()),
            regulator: Some(RegulatorConfig {
                m: m.row_iter().map(|r| r.iter().copied().collect()).collect(),
                n: nvec.iter().copied().collect(),
                eta0: Some(eta0),
            }),
            observer_c: Some(Coefficients::Explicit(c)),
            gamma: Some(Coefficients::Explicit(gamma)),
        };
        let model = AgentModel {
            plant,
            regulator,
            observer,
            gains,
            z0: initial.z,
            x0: initial.x,
        };
        Ok((model, explicit))
    }
}

/// Splits `key=value`; the value is parsed as JSON, falling back to a plain string.
pub fn parse_override(s: &str) -> Result<(String, Value)> {
    let (key, raw) = s
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override `{s}` is not of the form key=value")))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(Error::Config(format!("override `{s}` has an empty key")));
    }
    let raw = raw.trim();
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

/// Replaces the value at a dotted path; every path component must already exist.
pub fn set_dotted(root: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut cur = root;
    for part in key.split('.') {
        let missing = || Error::Config(format!("override key `{key}`: `{part}` does not exist"));
        cur = match cur {
            Value::Object(map) => map.get_mut(part).ok_or_else(missing)?,
            Value::Array(items) => {
                let idx: usize = part.parse().map_err(|_| missing())?;
                items.get_mut(idx).ok_or_else(missing)?
            }
            _ => return Err(missing()),
        };
    }
    *cur = value;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let mut v = Scenario::paper_example().to_value();
        v["observer"]["hh"] = Value::from(3);
        assert!(serde_json::from_value::<Scenario>(v).is_err());
    }

    #[test]
    fn overrides_reach_nested_and_indexed_keys() {
        let s = Scenario::paper_example()
            .with_overrides(&["controller.K=10", "agents.0.b=0.5", "observer.c=binomial"])
            .unwrap();
        assert_eq!(s.controller.k, 10.0);
        assert_eq!(s.agents[0].b, 0.5);
        assert_eq!(s.observer.c, Coefficients::default());
        assert!(Scenario::paper_example().with_overrides(&["controller.KK=1"]).is_err());
        assert!(Scenario::paper_example().with_overrides(&["agents.9.b=1"]).is_err());
        assert!(Scenario::paper_example().with_overrides(&["controller.K"]).is_err());
    }

    #[test]
    fn optional_fields_can_be_overridden() {
        let s = Scenario::paper_example()
            .with_overrides(&["coordinator.y_r0=[0,0,0,0,0]", "agents.2.w=[0.1,0.0,0.0]"])
            .unwrap();
        assert_eq!(s.coordinator.y_r0, Some(vec![0.0; 5]));
        assert_eq!(s.agents[2].w, Some([0.1, 0.0, 0.0]));
    }

    #[test]
    fn resolution_is_explicit_and_idempotent() {
        let (m1, explicit) = Scenario::paper_example().resolve().unwrap();
        assert!(explicit.agents.iter().all(|a| a.w.is_some() && a.initial.is_some() && a.regulator.is_some()));
        let (m2, again) = explicit.resolve().unwrap();
        assert_eq!(explicit, again);
        assert_eq!(m1.y_r0, m2.y_r0);
        for (a, b) in m1.agents.iter().zip(&m2.agents) {
            assert_eq!(a.x0, b.x0);
            assert_eq!(a.plant.uncertainty, b.plant.uncertainty);
        }
        for a in &m1.agents {
            let p1 = a.plant.params()[0];
            assert!((-2.0..=-0.1).contains(&p1));
        }
    }

    #[test]
    fn seed_changes_draws() {
        let (a, _) = Scenario::paper_example().resolve().unwrap();
        let (b, _) = Scenario::paper_example().with_overrides(&["seed=1"]).unwrap().resolve().unwrap();
        assert_ne!(a.agents[0].x0, b.agents[0].x0);
    }

    #[test]
    fn coordinator_only_needs_no_agents() {
        let (m, explicit) = Scenario::coordinator_only_example().resolve().unwrap();
        assert!(m.agents.is_empty());
        assert_eq!(explicit.coordinator.y_r0.unwrap().len(), 5);
        assert!(m.validate().passed());
    }

    #[test]
    fn one_based_edges() {
        let mut s = Scenario::paper_example();
        s.graph.edges[0].from = 0;
        assert!(s.resolve().is_err());
    }
}
