//! Local cost functions and an independent global-minimizer oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A strongly convex scalar cost with a globally Lipschitz gradient.
pub trait ScalarCost: Send + Sync {
    fn value(&self, s: f64) -> f64;
    fn gradient(&self, s: f64) -> f64;
    /// Strong convexity modulus ϖ.
    fn strong_convexity(&self) -> f64;
    /// Lipschitz constant of the gradient.
    fn lipschitz_gradient(&self) -> f64;
    /// A point known to be near the minimizer, used to seed bracketing.
    fn minimizer_hint(&self) -> Option<f64> {
        None
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CostFunction {
    /// `q (s - b)²`
    Quadratic { q: f64, b: f64 },
}

impl CostFunction {
    pub fn quadratic(q: f64, b: f64) -> Result<Self> {
        let c = CostFunction::Quadratic { q, b };
        c.validate()?;
        Ok(c)
    }

    /// Local cost of agent `i` (one-based) in the reference example: `¼ (s − i + 1)²`.
    pub fn reference(i: usize) -> Self {
        CostFunction::Quadratic {
            q: 0.25,
            b: i as f64 - 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            CostFunction::Quadratic { q, b } => {
                if !(q.is_finite() && q > 0.0) {
                    return Err(Error::InvalidCost(format!("quadratic weight q = {q} must be > 0")));
                }
                if !b.is_finite() {
                    return Err(Error::InvalidCost(format!("quadratic center b = {b} must be finite")));
                }
                Ok(())
            }
        }
    }
}

impl ScalarCost for CostFunction {
    fn value(&self, s: f64) -> f64 {
        match *self {
            CostFunction::Quadratic { q, b } => q * (s - b) * (s - b),
        }
    }

    fn gradient(&self, s: f64) -> f64 {
        match *self {
            CostFunction::Quadratic { q, b } => 2.0 * q * (s - b),
        }
    }

    fn strong_convexity(&self) -> f64 {
        match *self {
            CostFunction::Quadratic { q, .. } => 2.0 * q,
        }
    }

    fn lipschitz_gradient(&self) -> f64 {
        match *self {
            CostFunction::Quadratic { q, .. } => 2.0 * q,
        }
    }

    fn minimizer_hint(&self) -> Option<f64> {
        match *self {
            CostFunction::Quadratic { b, .. } => Some(b),
        }
    }
}

const MAX_BRACKET_DOUBLINGS: usize = 200;

/// Minimizer of `Σ c_i` by bisection on the aggregate gradient.
///
/// The aggregate gradient of strongly convex costs is strictly increasing, so
/// its unique root is the global minimizer. The bracket is `[min hint − 1,
/// max hint + 1]` when every cost provides a hint, otherwise it grows by
/// doubling from `[-1, 1]`.
pub fn global_minimizer<'a, I>(costs: I) -> Result<f64>
where
    I: IntoIterator<Item = &'a dyn ScalarCost>,
{
    let costs: Vec<&dyn ScalarCost> = costs.into_iter().collect();
    if costs.is_empty() {
        return Err(Error::InvalidCost("no cost functions given".into()));
    }
    if let Some(c) = costs.iter().find(|c| !(c.strong_convexity() > 0.0)) {
        return Err(Error::InvalidCost(format!(
            "strong convexity modulus {} must be > 0",
            c.strong_convexity()
        )));
    }
    let grad = |s: f64| costs.iter().map(|c| c.gradient(s)).sum::<f64>();

    let hints: Option<Vec<f64>> = costs.iter().map(|c| c.minimizer_hint()).collect();
    let (mut lo, mut hi) = match hints {
        Some(h) => (
            h.iter().copied().fold(f64::INFINITY, f64::min) - 1.0,
            h.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 1.0,
        ),
        None => (-1.0, 1.0),
    };
    let mut doublings = 0;
    while grad(lo) > 0.0 || grad(hi) < 0.0 {
        let width = hi - lo;
        if grad(lo) > 0.0 {
            lo -= width;
        }
        if grad(hi) < 0.0 {
            hi += width;
        }
        doublings += 1;
        if doublings > MAX_BRACKET_DOUBLINGS || !lo.is_finite() || !hi.is_finite() {
            return Err(Error::InvalidCost("could not bracket the minimizer".into()));
        }
    }

    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            // interval collapsed to adjacent floats
            return Ok(if grad(lo).abs() <= grad(hi).abs() { lo } else { hi });
        }
        let g = grad(mid);
        if g == 0.0 {
            return Ok(mid);
        }
        if g < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}
