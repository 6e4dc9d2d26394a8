//! Distributed optimal coordinator over an unbalanced digraph.
//!
//! Each agent runs
//!
//! ```text
//! ẏᵢʳ = −∇cᵢ(yᵢʳ)/ξᵢⁱ − α₁ Σⱼ aᵢⱼ(yᵢʳ − yⱼʳ) − α₂ ζᵢ
//! ζ̇ᵢ  =  α₁ Σⱼ aᵢⱼ(yᵢʳ − yⱼʳ),                 ζᵢ(0) = 0
//! ξ̇ᵢ  = −Σⱼ aᵢⱼ(ξᵢ − ξⱼ),                       ξᵢ(0) = eᵢ
//! ```
//!
//! The ξ-flow estimates the left Laplacian eigenvector online, so the gradient
//! term is reweighted without any global knowledge of the graph.

use std::sync::Arc;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cost::ScalarCost;
use crate::error::{Error, Result};
use crate::graph::Laplacian;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoordinatorParams {
    pub alpha1: f64,
    pub alpha2: f64,
}

impl Default for CoordinatorParams {
    fn default() -> Self {
        Self {
            alpha1: 1.0,
            alpha2: 1.0,
        }
    }
}

impl CoordinatorParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("alpha1", self.alpha1), ("alpha2", self.alpha2)] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!("coordinator {name} = {v} must be > 0")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoordinatorState {
    pub y_r: Vec<f64>,
    pub zeta: Vec<f64>,
    /// Row `i` is ξᵢ.
    pub xi: DMatrix<f64>,
}

/// Time derivative of a [`CoordinatorState`]; same shapes.
pub type CoordinatorDerivative = CoordinatorState;

pub fn init_state(n: usize, y_r0: &[f64]) -> Result<CoordinatorState> {
    if n == 0 {
        return Err(Error::InvalidParameter("coordinator needs at least one agent".into()));
    }
    if y_r0.len() != n {
        return Err(Error::InvalidParameter(format!(
            "y_r0 has {} entries for {n} agents",
            y_r0.len()
        )));
    }
    Ok(CoordinatorState {
        y_r: y_r0.to_vec(),
        zeta: vec![0.0; n],
        xi: DMatrix::identity(n, n),
    })
}

/// The coordinator's right-hand side on flat slices, for embedding in larger state vectors.
#[derive(Clone)]
pub struct CoordinatorFlow {
    neighbors: Vec<Vec<(usize, f64)>>,
    costs: Vec<Arc<dyn ScalarCost>>,
    params: CoordinatorParams,
}

impl std::fmt::Debug for CoordinatorFlow {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("CoordinatorFlow")
            .field("neighbors", &self.neighbors)
            .field("params", &self.params)
            .finish_non_exhaustive()
    }
}

impl CoordinatorFlow {
    pub fn new(lap: &Laplacian, costs: Vec<Arc<dyn ScalarCost>>, params: CoordinatorParams) -> Result<Self> {
        params.validate()?;
        let n = lap.node_count();
        if costs.len() != n {
            return Err(Error::InvalidParameter(format!("{} costs for {n} agents", costs.len())));
        }
        let neighbors = (0..n).map(|i| lap.source().in_neighbors(i)).collect();
        Ok(Self {
            neighbors,
            costs,
            params,
        })
    }

    pub fn agent_count(&self) -> usize {
        self.neighbors.len()
    }

    pub fn params(&self) -> CoordinatorParams {
        self.params
    }

    /// `xi` is row-major `n×n`. Output slices have the same shapes as the inputs.
    pub fn rhs_into(
        &self,
        y_r: &[f64],
        zeta: &[f64],
        xi: &[f64],
        d_y_r: &mut [f64],
        d_zeta: &mut [f64],
        d_xi: &mut [f64],
    ) -> Result<()> {
        let n = self.agent_count();
        let CoordinatorParams { alpha1, alpha2 } = self.params;
        for i in 0..n {
            let xi_ii = xi[i * n + i];
            if !(xi_ii > 0.0) {
                return Err(Error::DegenerateCoordinator { agent: i, value: xi_ii });
            }
            let consensus: f64 = self.neighbors[i].iter().map(|&(j, a)| a * (y_r[i] - y_r[j])).sum();
            d_y_r[i] = -self.costs[i].gradient(y_r[i]) / xi_ii - alpha1 * consensus - alpha2 * zeta[i];
            d_zeta[i] = alpha1 * consensus;

            let row = &mut d_xi[i * n..(i + 1) * n];
            row.fill(0.0);
            for &(j, a) in &self.neighbors[i] {
                for k in 0..n {
                    row[k] -= a * (xi[i * n + k] - xi[j * n + k]);
                }
            }
        }
        Ok(())
    }
}

/// Pure right-hand side of the coordinator at `state`.
pub fn coordinator_rhs(
    state: &CoordinatorState,
    lap: &Laplacian,
    costs: &[Arc<dyn ScalarCost>],
    params: &CoordinatorParams,
) -> Result<CoordinatorDerivative> {
    let flow = CoordinatorFlow::new(lap, costs.to_vec(), *params)?;
    let n = flow.agent_count();
    if state.y_r.len() != n || state.zeta.len() != n || state.xi.shape() != (n, n) {
        return Err(Error::InvalidParameter("coordinator state does not match the graph".into()));
    }
    let xi_rows: Vec<f64> = state.xi.transpose().as_slice().to_vec();
    let mut d = CoordinatorState {
        y_r: vec![0.0; n],
        zeta: vec![0.0; n],
        xi: DMatrix::zeros(n, n),
    };
    let mut d_xi = vec![0.0; n * n];
    flow.rhs_into(&state.y_r, &state.zeta, &xi_rows, &mut d.y_r, &mut d.zeta, &mut d_xi)?;
    d.xi = DMatrix::from_row_slice(n, n, &d_xi);
    Ok(d)
}
