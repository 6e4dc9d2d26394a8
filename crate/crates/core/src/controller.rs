//! Decentralized stabilizer: composite estimate, saturation and the control laws.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly;
use crate::regulator::RegulatorSpec;
use crate::validate::ValidationReport;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlMode {
    /// Observer estimates, saturated feedback plus internal model.
    #[default]
    OutputFeedback,
    /// True plant states, unsaturated feedback plus internal model.
    StateFeedback,
    /// Plants disabled; only the coordinator is integrated.
    CoordinatorOnly,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControllerGains {
    pub k: f64,
    pub delta: f64,
    pub g: f64,
    /// `γ₁..γ_{n−1}` (lower order).
    pub gamma: Vec<f64>,
}

impl ControllerGains {
    pub fn validate(&self) -> Result<()> {
        let report = validate_gains(&self.gamma, None, self.k, self.g, self.delta);
        if report.passed() {
            Ok(())
        } else {
            Err(Error::Validation(report))
        }
    }
}

/// `β_δ(r)`: the identity on `(−δ, δ)`, `sgn(r)·δ` outside.
pub fn saturate(r: f64, delta: f64) -> f64 {
    if r.abs() < delta {
        r
    } else {
        delta.copysign(r)
    }
}

/// `xₙ + gγ_{n−1}x_{n−1} + .. + g^{n−1}γ₁(x₁ − y^r)`; for `n = 1` this is `x₁ − y^r`.
///
/// Used with estimates for output feedback and with true states for state feedback.
pub fn theta_tilde(x: &[f64], y_r: f64, g: f64, gamma: &[f64]) -> f64 {
    let n = x.len();
    debug_assert_eq!(gamma.len() + 1, n);
    let mut acc = x[n - 1];
    let mut gk = 1.0;
    for k in (0..n - 1).rev() {
        gk *= g;
        let xk = if k == 0 { x[0] - y_r } else { x[k] };
        acc += gk * gamma[k] * xk;
    }
    if n == 1 {
        acc -= y_r;
    }
    acc
}

/// `−β_δ(Kϑ̃) + ΓT⁻¹η`
pub fn control_output(theta_tilde: f64, eta: &[f64], spec: &RegulatorSpec, gains: &ControllerGains) -> f64 {
    -saturate(gains.k * theta_tilde, gains.delta) + spec.feedforward(eta)
}

/// `ū = −Kϑ`
pub fn state_feedback_output(theta: f64, gains: &ControllerGains) -> f64 {
    -gains.k * theta
}

/// Checks positivity of `K`, `g`, `δ` and Hurwitz stability of the `γ` and (optionally) `c` polynomials.
pub fn validate_gains(gamma: &[f64], c: Option<&[f64]>, k: f64, g: f64, delta: f64) -> ValidationReport {
    let mut report = ValidationReport::new();
    for (name, value) in [("K", k), ("g", g), ("delta", delta)] {
        report.push(
            format!("{name} > 0"),
            value > 0.0 && (value.is_finite() || name == "delta"),
            format!("{name} = {value}"),
        );
    }
    let mut polys = vec![("gamma polynomial", gamma)];
    if let Some(c) = c {
        polys.push(("observer polynomial", c));
    }
    for (name, coeffs) in polys {
        let check = poly::hurwitz(coeffs);
        let detail = if check.roots.is_empty() {
            "degree 0".to_string()
        } else if check.failed_sign_screen {
            format!("non-positive coefficient in {coeffs:?}")
        } else {
            format!("max root real part {:.6e}", poly::max_real_part(&check.roots))
        };
        report.push(format!("{name} Hurwitz"), coeffs.is_empty() || check.hurwitz, detail);
    }
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::regulator::{build_phi_gamma, default_pair};
    use crate::plant::PlantFamily;
    use proptest::prelude::*;

    fn spec_a() -> RegulatorSpec {
        let (phi, gamma) = build_phi_gamma(&[-0.64, 0.0]).unwrap();
        let (m, n) = default_pair(&PlantFamily::A).unwrap();
        RegulatorSpec::new(phi, gamma, m, n).unwrap()
    }

    fn gains(k: f64, delta: f64) -> ControllerGains {
        ControllerGains {
            k,
            delta,
            g: 1.0,
            gamma: vec![1.0],
        }
    }

    #[test]
    fn saturate_examples() {
        assert_eq!(saturate(0.5, 2.0), 0.5);
        assert_eq!(saturate(5.0, 2.0), 2.0);
        assert_eq!(saturate(-5.0, 2.0), -2.0);
    }

    #[test]
    fn theta_tilde_examples() {
        assert_eq!(theta_tilde(&[3.0, 4.0], 3.0, 1.0, &[1.0]), 4.0);
        assert_eq!(theta_tilde(&[1.0, 1.0, 1.0], 0.0, 2.0, &[1.0, 2.0]), 9.0);
        assert_eq!(theta_tilde(&[2.0, 0.0, 0.0], 2.0, 3.0, &[1.0, 2.0]), 0.0);
        assert_eq!(theta_tilde(&[2.5], 2.0, 3.0, &[]), 0.5);
    }

    #[test]
    fn control_output_examples() {
        let spec = spec_a();
        assert_eq!(control_output(0.0, &[0.0, 0.0], &spec, &gains(4e4, 10.0)), 0.0);
        assert_eq!(control_output(1.0, &[0.0, 0.0], &spec, &gains(4e4, 10.0)), -10.0);
        assert!((control_output(1e-6, &[0.0, 0.0], &spec, &gains(4e4, 10.0)) + 0.04).abs() < 1e-15);
    }

    #[test]
    fn state_feedback_examples() {
        assert_eq!(state_feedback_output(0.0, &gains(2.0, 1.0)), 0.0);
        assert_eq!(state_feedback_output(3.0, &gains(2.0, 1.0)), -6.0);
    }

    #[test]
    fn validate_gains_examples() {
        assert!(validate_gains(&[1.0], None, 1.0, 1.0, 1.0).passed());
        assert!(validate_gains(&[1.0, 2.0], Some(&[1.0, 3.0, 3.0]), 4e4, 1.0, 1e5).passed());
        let r = validate_gains(&[1.0], Some(&[-1.0, 2.0]), 1.0, 1.0, 1.0);
        assert!(!r.passed());
        assert_eq!(r.failures().count(), 1);
        assert!(!validate_gains(&[1.0], None, 0.0, 1.0, 1.0).passed());
        // λ² − λ + 1 is not Hurwitz
        assert!(!validate_gains(&[1.0, -1.0], None, 1.0, 1.0, 1.0).passed());
        let check = poly::hurwitz(&poly::binomial(2));
        for r in check.roots {
            assert!((r.re + 1.0).abs() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn saturate_properties(r in -1e6f64..1e6, delta in 1e-3f64..1e3) {
            let s = saturate(r, delta);
            prop_assert_eq!(saturate(s, delta), s);
            prop_assert_eq!(saturate(-r, delta), -s);
            if r.abs() < delta {
                prop_assert_eq!(s, r);
            }
            prop_assert!(s.abs() <= delta);
        }

        #[test]
        fn control_output_bounded(theta in -1e3f64..1e3, e1 in -1e3f64..1e3, e2 in -1e3f64..1e3, delta in 1e-2f64..1e5) {
            let spec = spec_a();
            let eta = [e1, e2];
            let u = control_output(theta, &eta, &spec, &gains(4e4, delta));
            prop_assert!(u.abs() <= delta + spec.feedforward(&eta).abs() + 1e-9 * delta);
        }

        #[test]
        fn output_law_matches_state_law_when_unsaturated(x1 in -5.0f64..5.0, x2 in -5.0f64..5.0, y_r in -5.0f64..5.0, k in 0.1f64..1e4) {
            let spec = spec_a();
            let g = ControllerGains { k, delta: f64::INFINITY, g: 1.5, gamma: vec![1.0] };
            let theta = theta_tilde(&[x1, x2], y_r, g.g, &g.gamma);
            let u = control_output(theta, &[0.0, 0.0], &spec, &g);
            prop_assert_eq!(u, state_feedback_output(theta, &g));
        }

        #[test]
        fn perfect_tracking_is_zero_for_scaled_gamma(y_r in -5.0f64..5.0, scale in 0.1f64..10.0, g in 1.0f64..5.0) {
            let gamma = [1.0 * scale, 2.0 * scale];
            prop_assert_eq!(theta_tilde(&[y_r, 0.0, 0.0], y_r, g, &gamma), 0.0);
        }
    }
}
