//! Shipped scenario files and whole-run properties of the simulator.

use dooc::controller::ControlMode;
use dooc::graph::{laplacian, left_eigenvector};
use dooc::sim::output::write_csv;
use dooc::{metrics, run, Scenario};

const EXAMPLE: &str = include_str!("../scenarios/paper_sec4.json");
const COORDINATOR: &str = include_str!("../scenarios/coordinator_only.json");
const BAD_GAINS: &str = include_str!("../scenarios/bad_gains.json");
const SINGLE: &str = include_str!("../scenarios/single_agent.json");
const RING: &str = include_str!("../scenarios/balanced_ring.json");

fn csv(scn: &Scenario) -> Vec<u8> {
    let (model, _) = scn.resolve().unwrap();
    let mut out = Vec::new();
    write_csv(&run(&model).unwrap(), &mut out).unwrap();
    out
}

#[test]
fn shipped_files_match_built_ins() {
    assert_eq!(Scenario::from_json(EXAMPLE).unwrap(), Scenario::paper_example());
    assert_eq!(Scenario::from_json(COORDINATOR).unwrap(), Scenario::coordinator_only_example());
}

#[test]
fn every_shipped_file_parses_and_resolves() {
    for text in [EXAMPLE, COORDINATOR, BAD_GAINS, SINGLE, RING] {
        Scenario::from_json(text).unwrap().resolve().unwrap();
    }
}

#[test]
fn unknown_keys_are_rejected() {
    let mut v: serde_json::Value = serde_json::from_str(SINGLE).unwrap();
    v["observer"]["gain"] = 3.into();
    assert!(Scenario::from_json(&v.to_string()).is_err());
    assert!(Scenario::from_json(SINGLE).unwrap().with_overrides(&["observer.gain=3"]).is_err());
}

#[test]
fn bad_gains_fail_validation() {
    let (model, _) = Scenario::from_json(BAD_GAINS).unwrap().resolve().unwrap();
    let report = model.validate();
    assert!(!report.passed());
    assert!(report.failures().count() >= 1, "{report}");
}

#[test]
fn single_linear_agent_tracks_constant_reference() {
    let scn = Scenario::from_json(SINGLE).unwrap();
    let (model, _) = scn.resolve().unwrap();
    assert!(model.validate().passed());
    let traj = run(&model).unwrap();
    let k = traj.len() - 1;
    let a = &traj.agents[0];
    // one node: the reference settles at the minimizer of its own cost
    assert!((a.y_r[k] - model.s_star().unwrap()).abs() < 1e-6);
    assert!((a.y[k] - a.y_r[k]).abs() <= 1e-4, "{} vs {}", a.y[k], a.y_r[k]);
}

#[test]
fn balanced_ring_has_uniform_weights() {
    let scn = Scenario::from_json(RING).unwrap();
    let r = left_eigenvector(&laplacian(&scn.build_graph().unwrap())).unwrap();
    for ri in r.iter() {
        assert!((ri - 0.25).abs() < 1e-12);
    }
    let (model, _) = scn.resolve().unwrap();
    let traj = run(&model).unwrap();
    let m = metrics(&traj, model.s_star().unwrap());
    assert!(m.final_error < 1e-3, "{}", m.final_error);
}

fn short_closed_loop() -> Scenario {
    let mut scn = Scenario::paper_example();
    scn.integration.t_final = 5.0;
    scn
}

#[test]
fn identical_seed_gives_identical_bytes() {
    let scn = short_closed_loop();
    assert_eq!(csv(&scn), csv(&scn));
    let mut other = scn.clone();
    other.seed = 1;
    assert_ne!(csv(&scn), csv(&other));
}

#[test]
fn coordinator_invariants_hold_in_closed_loop_runs() {
    for mode in [ControlMode::OutputFeedback, ControlMode::StateFeedback] {
        let mut scn = short_closed_loop();
        scn.controller.mode = mode;
        let (model, _) = scn.resolve().unwrap();
        let traj = run(&model).unwrap();
        assert_eq!(traj.xi_row_sum_error.len(), traj.len());
        assert!(traj.xi_row_sum_error.iter().all(|e| *e <= 1e-9));
        assert!(traj.agents.iter().all(|a| a.xi_ii.iter().all(|x| *x > 0.0)));
    }
}

#[test]
fn resolution_fills_every_default() {
    let (_, explicit) = Scenario::paper_example().resolve().unwrap();
    for agent in &explicit.agents {
        assert!(agent.initial.is_some() && agent.regulator.is_some() && agent.w.is_some());
    }
    assert!(explicit.coordinator.y_r0.is_some());
    assert_eq!(explicit.resolve().unwrap().1, explicit);
}

#[test]
fn batch_paths_agree_and_keep_order() {
    let models: Vec<_> = (0..3)
        .map(|seed| {
            let mut scn = short_closed_loop();
            scn.seed = seed;
            scn.integration.t_final = 0.5;
            scn.resolve().unwrap().0
        })
        .collect();
    let seq = dooc::batch::run_batch_sequential(&models);
    let par = dooc::batch::run_batch(&models);
    for ((a, b), m) in seq.into_iter().zip(par).zip(&models) {
        let (a, b) = (a.unwrap(), b.unwrap());
        assert_eq!(a.agents[0].y, b.agents[0].y);
        assert_eq!(a.agents[0].y[0], m.agents[0].x0[0]);
    }
}
