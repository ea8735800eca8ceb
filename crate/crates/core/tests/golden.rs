//! Pinned end-to-end values for the reference seed.
//!
//! One simulated trial is pushed through freshly initialized networks and
//! the outputs are compared against frozen constants. Any drift in scene
//! synthesis, rendering, featurization, parameter initialization or the
//! forward pass shows up here as a changed number, which forces the change
//! to be deliberate.

use graspgrad::dataset::collect_trial;
use graspgrad::grasp::THETA_DIM;
use graspgrad::model::Model;
use graspgrad::patches::{Interp, PatchMode};
use graspgrad::world::{full_family_pool, WorldParams};
use graspgrad::zoo::ArchKind;

fn reference_model(arch: ArchKind) -> Model {
    Model::new(arch, THETA_DIM, 0.75, 42, PatchMode::Fixed, Interp::Bilinear)
        .expect("reference model")
}

#[test]
fn reference_trial_predictions_are_pinned() {
    let sample = collect_trial(42, 0, &full_family_pool(), &WorldParams::default())
        .expect("reference trial");

    let clf = reference_model(ArchKind::ConfigNet);
    let mut ws = clf.graph().workspace();
    let p = clf.predict(&mut ws, &sample.observation, &sample.theta).expect("predict");
    assert!((p - 0.52483316970304739).abs() < 1e-12, "config-net drifted: {p:.17}");

    let patch = reference_model(ArchKind::PatchNet);
    let mut ws = patch.graph().workspace();
    let q = patch.predict(&mut ws, &sample.observation, &sample.theta).expect("predict");
    assert!((q - 0.50776643068645877).abs() < 1e-12, "patch-net drifted: {q:.17}");

    let reg = reference_model(ArchKind::RegressionNet);
    let mut ws = reg.graph().workspace();
    let theta = reg.predict_theta(&mut ws, &sample.observation).expect("predict_theta");
    let pinned = [
        0.08593895040399060,
        0.79351567709709225,
        -0.17755509994239563,
        0.03218679801430842,
    ];
    for (i, (got, want)) in theta.as_slice().iter().zip(&pinned).enumerate() {
        assert!((got - want).abs() < 1e-12, "regression coordinate {i} drifted: {got:.17}");
    }
}
