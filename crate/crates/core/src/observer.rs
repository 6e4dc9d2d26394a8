//! High-gain observer for the integrator chain, driven by the measured output only.
//!
//! `x̃̇ₖ = x̃ₖ₊₁ + hᵏ c_{n−k+1} (y − x̃₁)` with `x̃_{n+1} ≡ 0`. The scaled estimation
//! error has eigenvalues `h·roots(λⁿ + cₙλⁿ⁻¹ + .. + c₁)`.

use nalgebra::Complex;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly;

/// Observer polynomial coefficients `c₁..cₙ` (lower order).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Coefficients {
    /// `(λ + 1)ⁿ`
    Named(CoefficientPreset),
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoefficientPreset {
    Binomial,
}

impl Default for Coefficients {
    fn default() -> Self {
        Coefficients::Named(CoefficientPreset::Binomial)
    }
}

impl Coefficients {
    pub fn resolve(&self, n: usize) -> Result<Vec<f64>> {
        match self {
            Coefficients::Named(CoefficientPreset::Binomial) => Ok(poly::binomial(n)),
            Coefficients::Explicit(c) if c.len() == n => Ok(c.clone()),
            Coefficients::Explicit(c) => Err(Error::InvalidParameter(format!(
                "expected {n} coefficients, got {}",
                c.len()
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObserverSpec {
    pub h: f64,
    /// `c₁..cₙ`
    pub c: Vec<f64>,
}

impl ObserverSpec {
    pub fn new(h: f64, c: Vec<f64>) -> Result<Self> {
        let spec = Self { h, c };
        spec.validate()?;
        Ok(spec)
    }

    pub fn binomial(n: usize, h: f64) -> Result<Self> {
        Self::new(h, poly::binomial(n))
    }

    pub fn order(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.h.is_finite() && self.h > 0.0) {
            return Err(Error::InvalidParameter(format!("observer gain h = {} must be > 0", self.h)));
        }
        if self.c.is_empty() {
            return Err(Error::InvalidParameter("observer needs at least one coefficient".into()));
        }
        let check = poly::hurwitz(&self.c);
        if !check.hurwitz {
            return Err(Error::NotHurwitz {
                what: "observer polynomial".into(),
                max_real_part: poly::max_real_part(&check.roots),
            });
        }
        Ok(())
    }

    /// Writes `x̃̇` into `out`.
    pub fn rhs_into(&self, x_tilde: &[f64], y: f64, out: &mut [f64]) {
        let n = self.order();
        let innovation = y - x_tilde[0];
        let mut hk = 1.0;
        for k in 0..n {
            hk *= self.h;
            let next = if k + 1 < n { x_tilde[k + 1] } else { 0.0 };
            out[k] = next + hk * self.c[n - 1 - k] * innovation;
        }
    }

    /// `x̃(0) = (y(0), 0, .., 0)`.
    pub fn initial_estimate(&self, y0: f64) -> Vec<f64> {
        let mut x = vec![0.0; self.order()];
        x[0] = y0;
        x
    }
}

/// `(h c_n, h² c_{n−1}, .., hⁿ c₁)`
pub fn observer_gain(spec: &ObserverSpec) -> Vec<f64> {
    let n = spec.order();
    (1..=n).map(|k| spec.h.powi(k as i32) * spec.c[n - k]).collect()
}

pub fn observer_rhs(spec: &ObserverSpec, x_tilde: &[f64], y: f64) -> Vec<f64> {
    let mut out = vec![0.0; spec.order()];
    spec.rhs_into(x_tilde, y, &mut out);
    out
}

/// Eigenvalues of the estimation-error dynamics.
pub fn estimation_error_spectrum(spec: &ObserverSpec) -> Result<Vec<Complex<f64>>> {
    spec.validate()?;
    Ok(poly::roots(&spec.c).into_iter().map(|r| r * spec.h).collect())
}
