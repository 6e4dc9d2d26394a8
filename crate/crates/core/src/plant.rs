//! Normal-form agent dynamics, parametric uncertainty and the exosystem.
//!
//! An agent is `ż = f₀(z, x₁, v)`, `ẋₖ = xₖ₊₁`, `ẋₙ = f₁(z, x, v) + b u`, `y = x₁`.
//! Two families ship built in:
//!
//! * family A: `ż = p₁z + x₁ + A_w1 v₁`, `ẋ₁ = x₂`, `ẋ₂ = p₂ z x₁ x₂ + p₃ x₂ + A_w2 v₂ + b u`
//! * family B: `ẋ₁ = x₂`, `ẋ₂ = x₃`, `ẋ₃ = p₁x₃ + p₂x₂ + p₃x₁³ + A_w3 v₁ + b u`
//!
//! with `v = (sin θt, cos θt)` generated by `v̇ = Sv`, `S = [0 θ; −θ 0]`.
//! Other plants plug in through [`NormalForm`].

use std::fmt;
use std::sync::Arc;

use nalgebra::{Complex, DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

#[derive(Debug, Clone, PartialEq)]
pub struct Exosystem {
    s: DMatrix<f64>,
    pub v: DVector<f64>,
}

/// Tolerance on eigenvalue real parts and on clustering repeated eigenvalues.
const SPECTRUM_TOL: f64 = 1e-9;

impl Exosystem {
    pub fn new(s: DMatrix<f64>, v0: DVector<f64>) -> Result<Self> {
        if !s.is_square() || s.nrows() != v0.len() || s.nrows() == 0 {
            return Err(Error::InvalidParameter(format!(
                "exosystem matrix {}x{} does not match state of length {}",
                s.nrows(),
                s.ncols(),
                v0.len()
            )));
        }
        check_neutral_stability(&s)?;
        Ok(Self { s, v: v0 })
    }

    /// The harmonic generator `S = [0 θ; −θ 0]`.
    pub fn harmonic(theta: f64, v0: [f64; 2]) -> Result<Self> {
        if !theta.is_finite() {
            return Err(Error::InvalidParameter(format!("theta = {theta} must be finite")));
        }
        Self::new(harmonic_matrix(theta), DVector::from_row_slice(&v0))
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.s
    }

    pub fn dim(&self) -> usize {
        self.v.len()
    }
}

pub fn harmonic_matrix(theta: f64) -> DMatrix<f64> {
    DMatrix::from_row_slice(2, 2, &[0.0, theta, -theta, 0.0])
}

pub fn exosystem_rhs(e: &Exosystem) -> DVector<f64> {
    &e.s * &e.v
}

/// All eigenvalues on the imaginary axis and semi-simple.
///
/// Semi-simplicity is checked through the minimal polynomial: the product of
/// `(S − λI)` over the distinct eigenvalues must vanish.
pub fn check_neutral_stability(s: &DMatrix<f64>) -> Result<()> {
    let eig: Vec<Complex<f64>> = s.complex_eigenvalues().iter().copied().collect();
    let scale = s.norm().max(1.0);
    if let Some(l) = eig.iter().find(|l| l.re.abs() > SPECTRUM_TOL * scale) {
        return Err(Error::InvalidParameter(format!(
            "exosystem is not neutrally stable: eigenvalue {l} off the imaginary axis"
        )));
    }
    let mut distinct: Vec<Complex<f64>> = Vec::new();
    for l in eig {
        if distinct.iter().all(|d| (d - l).norm() > 1e-6 * scale) {
            distinct.push(l);
        }
    }
    let n = s.nrows();
    let sc: DMatrix<Complex<f64>> = s.map(|x| Complex::new(x, 0.0));
    let mut product = DMatrix::<Complex<f64>>::identity(n, n);
    for l in &distinct {
        product *= &sc - DMatrix::<Complex<f64>>::identity(n, n) * *l;
    }
    let residual = product.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if residual > 1e-6 * scale.powi(distinct.len() as i32) {
        return Err(Error::InvalidParameter(
            "exosystem is not neutrally stable: repeated eigenvalue is not semi-simple".into(),
        ));
    }
    Ok(())
}

/// User-supplied normal-form plant.
///
/// Assumptions on the zero dynamics and on the feedforward being polynomial in
/// `v` are the implementor's responsibility; only dimensions and `b > 0` are checked.
pub trait NormalForm: Send + Sync + fmt::Debug {
    fn chain_len(&self) -> usize;
    fn zero_dim(&self) -> usize;
    fn zero_dynamics(&self, z: &[f64], x1: f64, v: &[f64], dz: &mut [f64]);
    /// `f₁(z, x, v)`, the last chain equation without the input term.
    fn drift(&self, z: &[f64], x: &[f64], v: &[f64]) -> f64;
    fn input_gain(&self) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FamilyKind {
    A,
    B,
}

#[derive(Clone)]
pub enum PlantFamily {
    A,
    B,
    Custom(Arc<dyn NormalForm>),
}

impl fmt::Debug for PlantFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlantFamily::A => f.write_str("A"),
            PlantFamily::B => f.write_str("B"),
            PlantFamily::Custom(p) => write!(f, "Custom({p:?})"),
        }
    }
}

impl From<FamilyKind> for PlantFamily {
    fn from(k: FamilyKind) -> Self {
        match k {
            FamilyKind::A => PlantFamily::A,
            FamilyKind::B => PlantFamily::B,
        }
    }
}

/// Amplitude multiplier `μₖ = 1 + 0.1k` of the k-th disturbance channel.
pub fn amplitude_factor(k: usize) -> f64 {
    1.0 + 0.1 * k as f64
}

#[derive(Debug, Clone)]
pub struct AgentPlant {
    pub family: PlantFamily,
    pub nominal: [f64; 3],
    pub uncertainty: [f64; 3],
    pub b: f64,
    /// `A_w1, A_w2, A_w3`.
    pub amplitudes: [f64; 3],
}

impl AgentPlant {
    /// Built-in plant with `A_wk = (1 + 0.1k)·amplitude`.
    pub fn new(family: FamilyKind, nominal: [f64; 3], uncertainty: [f64; 3], b: f64, amplitude: f64) -> Result<Self> {
        let plant = Self {
            family: family.into(),
            nominal,
            uncertainty,
            b,
            amplitudes: [1, 2, 3].map(|k| amplitude_factor(k) * amplitude),
        };
        plant.validate()?;
        Ok(plant)
    }

    pub fn custom(model: Arc<dyn NormalForm>) -> Result<Self> {
        let plant = Self {
            b: model.input_gain(),
            family: PlantFamily::Custom(model),
            nominal: [0.0; 3],
            uncertainty: [0.0; 3],
            amplitudes: [0.0; 3],
        };
        plant.validate()?;
        Ok(plant)
    }

    /// `p = p̄ + w`.
    pub fn params(&self) -> [f64; 3] {
        [0, 1, 2].map(|k| self.nominal[k] + self.uncertainty[k])
    }

    pub fn chain_len(&self) -> usize {
        match &self.family {
            PlantFamily::A => 2,
            PlantFamily::B => 3,
            PlantFamily::Custom(m) => m.chain_len(),
        }
    }

    pub fn zero_dim(&self) -> usize {
        match &self.family {
            PlantFamily::A => 1,
            PlantFamily::B => 0,
            PlantFamily::Custom(m) => m.zero_dim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.b.is_finite() && self.b > 0.0) {
            return Err(Error::InvalidParameter(format!("input gain b = {} must be > 0", self.b)));
        }
        if self.chain_len() == 0 {
            return Err(Error::InvalidParameter("plant chain length must be >= 1".into()));
        }
        let p = self.params();
        if p.iter().chain(&self.amplitudes).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter("plant parameters must be finite".into()));
        }
        if matches!(self.family, PlantFamily::A) && !(p[0] < 0.0) {
            return Err(Error::InvalidParameter(format!(
                "family A needs p1 < 0 for stable zero dynamics, got {}",
                p[0]
            )));
        }
        Ok(())
    }

    /// Writes `ż` into `dz` and `ẋ` into `dx`.
    pub fn rhs_into(&self, z: &[f64], x: &[f64], v: &[f64], u: f64, dz: &mut [f64], dx: &mut [f64]) {
        let n = x.len();
        dx[..n - 1].copy_from_slice(&x[1..]);
        match &self.family {
            PlantFamily::A => {
                let [p1, p2, p3] = self.params();
                let [a1, a2, _] = self.amplitudes;
                dz[0] = p1 * z[0] + x[0] + a1 * v[0];
                dx[1] = p2 * z[0] * x[0] * x[1] + p3 * x[1] + a2 * v[1] + self.b * u;
            }
            PlantFamily::B => {
                let [p1, p2, p3] = self.params();
                let a3 = self.amplitudes[2];
                dx[2] = p1 * x[2] + p2 * x[1] + p3 * x[0] * x[0] * x[0] + a3 * v[0] + self.b * u;
            }
            PlantFamily::Custom(m) => {
                m.zero_dynamics(z, x[0], v, dz);
                dx[n - 1] = m.drift(z, x, v) + self.b * u;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantState {
    pub z: Vec<f64>,
    pub x: Vec<f64>,
}

/// Time derivative of the plant state under input `u` and exosystem state `v`.
pub fn plant_rhs(plant: &AgentPlant, state: &PlantState, u: f64, v: &[f64]) -> PlantState {
    let mut d = PlantState {
        z: vec![0.0; state.z.len()],
        x: vec![0.0; state.x.len()],
    };
    plant.rhs_into(&state.z, &state.x, v, u, &mut d.z, &mut d.x);
    d
}

/// Steady-state zero-dynamics value `z*(s, v)` for family A.
///
/// Solving `∂z*/∂v · Sv = p₁z* + s + A_w1 v₁` with `z*` affine in `v` gives
/// `z* = −(p₁A_w1 v₁ + θA_w1 v₂)/(p₁² + θ²) − s/p₁`.
pub fn zero_dynamics_manifold(plant: &AgentPlant, s: f64, v: &[f64], theta: f64) -> Result<f64> {
    if !matches!(plant.family, PlantFamily::A) {
        return Err(Error::NotApplicable(
            "zero-dynamics manifold is only available for family A".into(),
        ));
    }
    let p1 = plant.params()[0];
    let a1 = plant.amplitudes[0];
    let den = p1 * p1 + theta * theta;
    Ok(-(p1 * a1 / den) * v[0] - (theta * a1 / den) * v[1] - s / p1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UncertaintyMode {
    #[default]
    Random,
    /// `p₁ = −1` exactly, other parameters at nominal.
    Zero,
}

/// Range of `p₁ = p̄₁ + w₁` produced by the random sampler.
pub const P1_RANGE: (f64, f64) = (-2.0, -0.1);
/// Half-width of the uniform draw for `w₂` and `w₃`.
pub const W_SPREAD: f64 = 0.2;

/// Parametric uncertainty `w` for agent `agent` (zero-based).
pub fn sample_uncertainty(seed: u64, agent: usize, nominal: [f64; 3], mode: UncertaintyMode) -> [f64; 3] {
    match mode {
        UncertaintyMode::Zero => [-1.0 - nominal[0], 0.0, 0.0],
        UncertaintyMode::Random => {
            let mut rng = stream_rng(seed, agent, Stream::Uncertainty);
            let p1 = rng.random_range(P1_RANGE.0..=P1_RANGE.1);
            let w2 = rng.random_range(-W_SPREAD..=W_SPREAD);
            let w3 = rng.random_range(-W_SPREAD..=W_SPREAD);
            [p1 - nominal[0], w2, w3]
        }
    }
}
