//! Classical fixed-step fourth-order Runge–Kutta on a flat state vector.

use crate::error::{Error, Result};

/// An autonomous system `ẋ = f(x)` on `ℝⁿ`.
pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, x: &[f64], dx: &mut [f64]) -> Result<()>;
    /// Name of the sub-block that owns state index `i`, for divergence diagnostics.
    fn block_of(&self, _i: usize) -> String {
        "state".into()
    }
}

pub struct FnSystem<F> {
    dim: usize,
    f: F,
}

impl<F> FnSystem<F>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, f }
    }
}

impl<F> OdeSystem for FnSystem<F>
where
    F: Fn(&[f64], &mut [f64]) -> Result<()>,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn rhs(&self, x: &[f64], dx: &mut [f64]) -> Result<()> {
        (self.f)(x, dx)
    }
}

/// Stage buffers, reused across steps so stepping never allocates.
#[derive(Debug, Clone)]
pub struct Rk4Scratch {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4Scratch {
    pub fn new(dim: usize) -> Self {
        Self {
            k1: vec![0.0; dim],
            k2: vec![0.0; dim],
            k3: vec![0.0; dim],
            k4: vec![0.0; dim],
            tmp: vec![0.0; dim],
        }
    }
}

fn check_finite<S: OdeSystem + ?Sized>(sys: &S, v: &[f64], t: f64) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        None => Ok(()),
        Some(i) => Err(Error::NonFinite { t, block: sys.block_of(i) }),
    }
}

/// One step from time `t`; `t` is only used to label divergence errors.
pub fn rk4_step_at<S: OdeSystem + ?Sized>(sys: &S, x: &mut [f64], t: f64, dt: f64, s: &mut Rk4Scratch) -> Result<()> {
    let n = x.len();
    sys.rhs(x, &mut s.k1)?;
    check_finite(sys, &s.k1, t)?;
    for i in 0..n {
        s.tmp[i] = x[i] + 0.5 * dt * s.k1[i];
    }
    sys.rhs(&s.tmp, &mut s.k2)?;
    check_finite(sys, &s.k2, t)?;
    for i in 0..n {
        s.tmp[i] = x[i] + 0.5 * dt * s.k2[i];
    }
    sys.rhs(&s.tmp, &mut s.k3)?;
    check_finite(sys, &s.k3, t)?;
    for i in 0..n {
        s.tmp[i] = x[i] + dt * s.k3[i];
    }
    sys.rhs(&s.tmp, &mut s.k4)?;
    check_finite(sys, &s.k4, t)?;
    for i in 0..n {
        x[i] += dt / 6.0 * (s.k1[i] + 2.0 * s.k2[i] + 2.0 * s.k3[i] + s.k4[i]);
    }
    check_finite(sys, x, t + dt)
}

pub fn rk4_step<S: OdeSystem + ?Sized>(sys: &S, x: &mut [f64], dt: f64, s: &mut Rk4Scratch) -> Result<()> {
    rk4_step_at(sys, x, 0.0, dt, s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_rhs_leaves_state_unchanged() {
        let sys = FnSystem::new(3, |_x: &[f64], d: &mut [f64]| {
            d.fill(0.0);
            Ok(())
        });
        let mut x = [1.0, -2.0, 3.5];
        let mut s = Rk4Scratch::new(3);
        rk4_step(&sys, &mut x, 0.1, &mut s).unwrap();
        assert_eq!(x, [1.0, -2.0, 3.5]);
    }

    #[test]
    fn exponential_growth_multiplier() {
        let sys = FnSystem::new(1, |x: &[f64], d: &mut [f64]| {
            d[0] = x[0];
            Ok(())
        });
        for dt in [0.1, 0.01, 0.5] {
            let mut x = [1.0];
            rk4_step(&sys, &mut x, dt, &mut Rk4Scratch::new(1)).unwrap();
            let expected = 1.0 + dt + dt * dt / 2.0 + dt.powi(3) / 6.0 + dt.powi(4) / 24.0;
            assert!((x[0] - expected).abs() < 1e-15, "{dt}: {} vs {expected}", x[0]);
        }
    }

    #[test]
    fn rotation_drift_is_fifth_order() {
        let sys = FnSystem::new(2, |v: &[f64], d: &mut [f64]| {
            d[0] = v[1];
            d[1] = -v[0];
            Ok(())
        });
        let drift = |dt: f64| {
            let mut v = [1.0, 0.0];
            rk4_step(&sys, &mut v, dt, &mut Rk4Scratch::new(2)).unwrap();
            ((v[0] * v[0] + v[1] * v[1]).sqrt() - 1.0).abs()
        };
        // local radius error of RK4 on a rotation is dt⁶/144, within the O(dt⁵) bound
        let (a, b) = (drift(0.2), drift(0.1));
        assert!(a > 0.0 && b > 0.0);
        assert!(a / b > 30.0, "ratio {}", a / b);
    }

    #[test]
    fn non_finite_derivative_names_block() {
        struct Blowup;
        impl OdeSystem for Blowup {
            fn dim(&self) -> usize {
                2
            }
            fn rhs(&self, x: &[f64], d: &mut [f64]) -> Result<()> {
                d[0] = 0.0;
                d[1] = 1.0 / (x[1] - x[1]);
                Ok(())
            }
            fn block_of(&self, i: usize) -> String {
                format!("block{i}")
            }
        }
        let mut x = [0.0, 0.0];
        let err = rk4_step_at(&Blowup, &mut x, 3.0, 0.1, &mut Rk4Scratch::new(2)).unwrap_err();
        match err {
            Error::NonFinite { t, block } => {
                assert_eq!(t, 3.0);
                assert_eq!(block, "block1");
            }
            other => panic!("unexpected {other}"),
        }
    }
}
