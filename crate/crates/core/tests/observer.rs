//! High-gain observer on a family-B plant driven by a known bounded input.
//!
//! Plant and observer are integrated together; the observer sees only `y = x₁`.

use dooc::observer::ObserverSpec;
use dooc::plant::{AgentPlant, FamilyKind};
use dooc::sim::rk4::{rk4_step_at, FnSystem, Rk4Scratch};

const SHIPPED_C: [f64; 3] = [64.0, 48.0, 12.0];

struct Sample {
    t: f64,
    x: [f64; 3],
    x_tilde: [f64; 3],
}

fn input(t: f64) -> f64 {
    t.sin() + 0.5 * (2.0 * t).cos()
}

/// State layout `[x (3), x̃ (3), t]`; one sample per step.
fn simulate(spec: &ObserverSpec, t_final: f64) -> Vec<Sample> {
    let plant = AgentPlant::new(FamilyKind::B, [-1.0, -1.0, -0.2], [0.0; 3], 1.0, 0.0).unwrap();
    let x0 = [0.3, -0.2, 0.1];
    let mut state: Vec<f64> = x0.iter().copied().chain(spec.initial_estimate(x0[0])).chain([0.0]).collect();
    let sys = FnSystem::new(7, |s: &[f64], d: &mut [f64]| {
        let mut dz = [];
        plant.rhs_into(&[], &s[..3], &[0.0, 0.0], input(s[6]), &mut dz, &mut d[..3]);
        spec.rhs_into(&s[3..6], s[0], &mut d[3..6]);
        d[6] = 1.0;
        Ok(())
    });
    let dt = 1e-4;
    let steps = (t_final / dt).round() as usize;
    let mut scratch = Rk4Scratch::new(7);
    let mut out = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        out.push(Sample {
            t: state[6],
            x: [state[0], state[1], state[2]],
            x_tilde: [state[3], state[4], state[5]],
        });
        if k < steps {
            rk4_step_at(&sys, &mut state, k as f64 * dt, dt, &mut scratch).unwrap();
        }
    }
    out
}

fn max_abs(v: &[f64; 3]) -> f64 {
    v.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

fn est_error(s: &Sample) -> f64 {
    (0..3).map(|k| (s.x[k] - s.x_tilde[k]).abs()).fold(0.0, f64::max)
}

fn sup_error_after(samples: &[Sample], t0: f64) -> f64 {
    samples.iter().filter(|s| s.t >= t0).map(est_error).fold(0.0, f64::max)
}

#[test]
fn converges_after_peaking_transient() {
    let samples = simulate(&ObserverSpec::new(100.0, SHIPPED_C.to_vec()).unwrap(), 5.0);
    let x_max = samples.iter().map(|s| max_abs(&s.x)).fold(0.0, f64::max);
    let err = sup_error_after(&samples, 0.5);
    assert!(err <= 1e-2 * (1.0 + x_max), "sup error {err:.3e}, max |x| {x_max:.3}");
}

/// Low-frequency lag of the last channel: `x_n − x̃_n ≈ (c₂/c₁)·ẋ_n/h`.
#[test]
fn last_channel_lag_matches_dc_gain() {
    for c in [SHIPPED_C.to_vec(), vec![1.0, 3.0, 3.0]] {
        let spec = ObserverSpec::new(100.0, c.clone()).unwrap();
        let samples = simulate(&spec, 5.0);
        let tail: Vec<&Sample> = samples.iter().filter(|s| s.t >= 1.0).collect();
        let dx3 = tail
            .windows(2)
            .map(|w| ((w[1].x[2] - w[0].x[2]) / (w[1].t - w[0].t)).abs())
            .fold(0.0, f64::max);
        let lag = tail.iter().map(|s| (s.x[2] - s.x_tilde[2]).abs()).fold(0.0, f64::max);
        let predicted = c[1] / c[0] * dx3 / spec.h;
        assert!((lag / predicted - 1.0).abs() < 0.2, "c {c:?}: lag {lag:.3e}, predicted {predicted:.3e}");
    }
}

#[test]
fn larger_gain_reduces_post_transient_error() {
    let errs: Vec<f64> = [25.0, 50.0, 100.0]
        .iter()
        .map(|&h| sup_error_after(&simulate(&ObserverSpec::new(h, SHIPPED_C.to_vec()).unwrap(), 5.0), 1.0))
        .collect();
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "{errs:?}");
}

#[test]
fn peaking_grows_with_gain() {
    let peaks: Vec<f64> = [25.0, 50.0, 100.0]
        .iter()
        .map(|&h| {
            simulate(&ObserverSpec::new(h, SHIPPED_C.to_vec()).unwrap(), 0.1)
                .iter()
                .map(|s| max_abs(&s.x_tilde))
                .fold(0.0, f64::max)
        })
        .collect();
    assert!(peaks[0] < peaks[1] && peaks[1] < peaks[2], "{peaks:?}");
}
