//! Internal model for disturbance rejection.
//!
//! The steady-state input `u*(s*, v, w)` obeys a linear recursion
//! `u*⁽ˢ⁾ = ℓ₁u* + ℓ₂u*' + .. + ℓₛu*⁽ˢ⁻¹⁾`, so `τ = (u*, u*', ..)` follows `τ̇ = Φτ`,
//! `u* = Γτ`. Any controllable pair `(M, N)` with `M` Hurwitz and spectrum
//! disjoint from `Φ` gives a nonsingular `T` with `TΦ − MT = NΓ`, and the
//! compensator `η̇ = Mη + Nu` then reproduces `u*` through `ΓT⁻¹η`.

use nalgebra::{Complex, DMatrix, DVector, RowDVector};

use crate::error::{Error, Result};
use crate::plant::{AgentPlant, PlantFamily};

const ROOT_TOL: f64 = 1e-9;

/// Recursion coefficients `ℓ` for the built-in families at exosystem frequency `theta`.
///
/// Family A: `u*'' = −θ²u*`. Family B: `u*''' = −θ²u*'` (the constant `p₃s*³`
/// term adds the zero mode).
pub fn internal_model_coefficients(family: &PlantFamily, theta: f64) -> Result<Vec<f64>> {
    let t2 = theta * theta;
    match family {
        PlantFamily::A => Ok(vec![-t2, 0.0]),
        PlantFamily::B => Ok(vec![0.0, -t2, 0.0]),
        PlantFamily::Custom(_) => Err(Error::NotApplicable(
            "custom plants must supply internal-model coefficients explicitly".into(),
        )),
    }
}

/// Default compensator pair `(M, N)` for the built-in families.
pub fn default_pair(family: &PlantFamily) -> Result<(DMatrix<f64>, DVector<f64>)> {
    match family {
        PlantFamily::A => Ok((
            DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -2.0, -3.0]),
            DVector::from_row_slice(&[0.0, 1.0]),
        )),
        PlantFamily::B => Ok((
            DMatrix::from_row_slice(3, 3, &[-3.0, -7.0, -5.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
            DVector::from_row_slice(&[1.0, 0.0, 0.0]),
        )),
        PlantFamily::Custom(_) => Err(Error::NotApplicable(
            "custom plants must supply (M, N) explicitly".into(),
        )),
    }
}

/// Companion matrix `Φ` (last row `ℓ₁ .. ℓₛ`) and selector `Γ = [1 0 .. 0]`.
///
/// `P(σ) = σˢ − ℓ₁ − ℓ₂σ − .. − ℓₛσˢ⁻¹` must have distinct roots on the imaginary axis.
pub fn build_phi_gamma(ell: &[f64]) -> Result<(DMatrix<f64>, RowDVector<f64>)> {
    let s = ell.len();
    if s == 0 {
        return Err(Error::InvalidInternalModel("internal model order must be >= 1".into()));
    }
    if ell.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInternalModel("coefficients must be finite".into()));
    }
    let mut phi = DMatrix::zeros(s, s);
    for i in 0..s - 1 {
        phi[(i, i + 1)] = 1.0;
    }
    for (j, &l) in ell.iter().enumerate() {
        phi[(s - 1, j)] = l;
    }
    let roots = eigenvalues(&phi);
    let scale = phi.norm().max(1.0);
    if let Some(r) = roots.iter().find(|r| r.re.abs() > ROOT_TOL * scale) {
        return Err(Error::InvalidInternalModel(format!(
            "root {r} of the internal-model polynomial is off the imaginary axis"
        )));
    }
    for (i, a) in roots.iter().enumerate() {
        if roots[i + 1..].iter().any(|b| (a - b).norm() <= 1e-6 * scale) {
            return Err(Error::InvalidInternalModel(format!("repeated root {a}")));
        }
    }
    let mut gamma = RowDVector::zeros(s);
    gamma[0] = 1.0;
    Ok((phi, gamma))
}

pub fn eigenvalues(m: &DMatrix<f64>) -> Vec<Complex<f64>> {
    m.complex_eigenvalues().iter().copied().collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SylvesterSolution {
    pub t: DMatrix<f64>,
    /// `‖TΦ − MT − NΓ‖_F`
    pub residual: f64,
    pub min_singular_value: f64,
    pub condition_number: f64,
}

/// Threshold on cond(T) above which a warning is logged.
pub const CONDITION_WARN: f64 = 1e10;

/// Solves `TΦ − MT = NΓ` through the vectorized system `(Φᵀ⊗I − I⊗M) vec T = vec(NΓ)`.
pub fn solve_sylvester(
    phi: &DMatrix<f64>,
    m: &DMatrix<f64>,
    n: &DVector<f64>,
    gamma: &RowDVector<f64>,
) -> Result<SylvesterSolution> {
    let s = phi.nrows();
    let q = m.nrows();
    if !phi.is_square() || !m.is_square() || n.len() != q || gamma.len() != s {
        return Err(Error::InvalidInternalModel(format!(
            "dimension mismatch: Φ {}x{}, M {}x{}, N {}, Γ {}",
            phi.nrows(),
            phi.ncols(),
            m.nrows(),
            m.ncols(),
            n.len(),
            gamma.len()
        )));
    }
    let gap = spectral_gap(phi, m);
    let scale = phi.norm().max(m.norm()).max(1.0);
    if gap <= 1e-8 * scale {
        return Err(Error::NoUniqueSylvesterSolution { gap });
    }

    let rhs_mat = n * gamma;
    let kron = phi.transpose().kronecker(&DMatrix::identity(q, q)) - DMatrix::identity(s, s).kronecker(m);
    let rhs = DVector::from_column_slice(rhs_mat.as_slice());
    let vec_t = kron
        .lu()
        .solve(&rhs)
        .ok_or(Error::NoUniqueSylvesterSolution { gap })?;
    let t = DMatrix::from_column_slice(q, s, vec_t.as_slice());

    let residual = (&t * phi - m * &t - rhs_mat).norm();
    let sv = t.singular_values();
    let min_sv = sv.min();
    let max_sv = sv.max();
    let condition_number = if min_sv > 0.0 { max_sv / min_sv } else { f64::INFINITY };
    if condition_number > CONDITION_WARN {
        log::warn!("Sylvester solution is nearly singular (condition number {condition_number:e})");
    }
    Ok(SylvesterSolution {
        t,
        residual,
        min_singular_value: min_sv,
        condition_number,
    })
}

/// Smallest distance between an eigenvalue of `a` and one of `b`.
pub fn spectral_gap(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let ea = eigenvalues(a);
    let eb = eigenvalues(b);
    ea.iter()
        .flat_map(|x| eb.iter().map(move |y| (x - y).norm()))
        .fold(f64::INFINITY, f64::min)
}

pub fn controllability_rank(m: &DMatrix<f64>, n: &DVector<f64>) -> usize {
    let q = m.nrows();
    let mut ctrb = DMatrix::zeros(q, q);
    let mut col = n.clone();
    for k in 0..q {
        ctrb.set_column(k, &col);
        col = m * col;
    }
    let sv = ctrb.singular_values();
    let tol = 1e-10 * sv.max().max(1.0);
    sv.iter().filter(|&&x| x > tol).count()
}

/// Largest Sylvester residual accepted when building a [`RegulatorSpec`].
pub const SYLVESTER_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct RegulatorSpec {
    pub phi: DMatrix<f64>,
    pub gamma: RowDVector<f64>,
    pub m: DMatrix<f64>,
    pub n: DVector<f64>,
    pub sylvester: SylvesterSolution,
    pub t_inv: DMatrix<f64>,
    /// `ΓT⁻¹`
    pub feedforward_row: RowDVector<f64>,
    pub eta: DVector<f64>,
}

impl RegulatorSpec {
    pub fn new(phi: DMatrix<f64>, gamma: RowDVector<f64>, m: DMatrix<f64>, n: DVector<f64>) -> Result<Self> {
        let s = phi.nrows();
        if m.shape() != (s, s) || n.len() != s {
            return Err(Error::InvalidInternalModel(format!(
                "(M, N) must be {s}x{s} and {s}x1 for an order-{s} internal model"
            )));
        }
        let m_eig = eigenvalues(&m);
        let worst = m_eig.iter().map(|e| e.re).fold(f64::NEG_INFINITY, f64::max);
        if !(worst < 0.0) {
            return Err(Error::NotHurwitz {
                what: "M".into(),
                max_real_part: worst,
            });
        }
        if controllability_rank(&m, &n) != s {
            return Err(Error::InvalidInternalModel("(M, N) is not controllable".into()));
        }
        let sylvester = solve_sylvester(&phi, &m, &n, &gamma)?;
        if !(sylvester.residual <= SYLVESTER_TOL) {
            return Err(Error::InvalidInternalModel(format!(
                "Sylvester residual {:e} exceeds {SYLVESTER_TOL:e}",
                sylvester.residual
            )));
        }
        let t_inv = sylvester
            .t
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::InvalidInternalModel("T is singular".into()))?;
        let feedforward_row = &gamma * &t_inv;
        Ok(Self {
            phi,
            gamma,
            m,
            n,
            sylvester,
            t_inv,
            feedforward_row,
            eta: DVector::zeros(s),
        })
    }

    /// Built-in internal model for `plant`, with `(M, N)` defaulting to the family's pair.
    pub fn for_plant(plant: &AgentPlant, theta: f64, pair: Option<(DMatrix<f64>, DVector<f64>)>) -> Result<Self> {
        let ell = internal_model_coefficients(&plant.family, theta)?;
        let (phi, gamma) = build_phi_gamma(&ell)?;
        let (m, n) = match pair {
            Some(p) => p,
            None => default_pair(&plant.family)?,
        };
        Self::new(phi, gamma, m, n)
    }

    pub fn order(&self) -> usize {
        self.phi.nrows()
    }

    /// `ΓT⁻¹η`
    pub fn feedforward(&self, eta: &[f64]) -> f64 {
        self.feedforward_row.iter().zip(eta).map(|(a, b)| a * b).sum()
    }

    /// Writes `Mη + Nu` into `out`.
    pub fn rhs_into(&self, eta: &[f64], u: f64, out: &mut [f64]) {
        let s = self.order();
        for i in 0..s {
            let mut acc = self.n[i] * u;
            for j in 0..s {
                acc += self.m[(i, j)] * eta[j];
            }
            out[i] = acc;
        }
    }
}

/// `η̇ = Mη + Nu` at the regulator's stored `η`.
pub fn regulator_rhs(spec: &RegulatorSpec, u: f64) -> DVector<f64> {
    let mut out = DVector::zeros(spec.order());
    spec.rhs_into(spec.eta.as_slice(), u, out.as_mut_slice());
    out
}

/// Feedforward `u*` written as `c₀ + k·v` for the built-in families.
fn feedforward_affine(plant: &AgentPlant, s_star: f64) -> Result<(f64, [f64; 2])> {
    let b = plant.b;
    match plant.family {
        PlantFamily::A => Ok((0.0, [0.0, -plant.amplitudes[1] / b])),
        PlantFamily::B => {
            let p3 = plant.params()[2];
            Ok((-p3 * s_star.powi(3) / b, [-plant.amplitudes[2] / b, 0.0]))
        }
        PlantFamily::Custom(_) => Err(Error::NotApplicable(
            "no closed-form feedforward for custom plants".into(),
        )),
    }
}

/// Steady-state input `u*(s*, v, w)`.
///
/// Family A: `−A_w2 v₂ / b`. Family B: `−(p₃ s*³ + A_w3 v₁) / b`.
pub fn feedforward_oracle(plant: &AgentPlant, s_star: f64, v: &[f64]) -> Result<f64> {
    let (c0, k) = feedforward_affine(plant, s_star)?;
    Ok(c0 + k[0] * v[0] + k[1] * v[1])
}

/// `τ = (u*, u*', .., u*⁽ᵒʳᵈᵉʳ⁻¹⁾)` along `v̇ = Sv`.
pub fn feedforward_derivatives(
    plant: &AgentPlant,
    s_star: f64,
    v: &[f64],
    s: &DMatrix<f64>,
    order: usize,
) -> Result<DVector<f64>> {
    let (c0, k) = feedforward_affine(plant, s_star)?;
    let k = RowDVector::from_row_slice(&k);
    let mut tau = DVector::zeros(order);
    let mut sv = DVector::from_row_slice(&v[..2]);
    for j in 0..order {
        tau[j] = (&k * &sv)[0] + if j == 0 { c0 } else { 0.0 };
        sv = s * sv;
    }
    Ok(tau)
}
