//! Microbenchmarks along the data → model → planner pipeline: scene
//! synthesis with oracle labelling, full and partial network forwards,
//! the configuration gradient, and a whole ascent run.

use criterion::{criterion_group, criterion_main, Criterion};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use graspgrad::grasp::THETA_DIM;
use graspgrad::model::{Model, ModelObjective};
use graspgrad::patches::{Interp, PatchMode};
use graspgrad::plan::{ascend, GradMode, Objective, PlannerConfig};
use graspgrad::world::{
    generate_scene, heuristic_inits, oracle_execute, world_bounds, WorldParams,
};
use graspgrad::zoo::ArchKind;

fn model() -> Model {
    Model::new(ArchKind::ConfigNet, THETA_DIM, 0.75, 42, PatchMode::Fixed, Interp::Bilinear)
        .expect("default classifier")
}

fn scene_and_oracle(c: &mut Criterion) {
    let params = WorldParams::default();
    c.bench_function("scene_render_oracle", |b| {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        b.iter(|| {
            let shape = generate_scene(&mut rng, 7);
            let obs = shape.render();
            let inits = heuristic_inits(&obs, &params, &mut rng).expect("inits");
            oracle_execute(&shape, &inits[0], &params)
        })
    });
}

fn forwards(c: &mut Criterion) {
    let model = model();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let shape = generate_scene(&mut rng, 7);
    let obs = shape.render();
    let params = WorldParams::default();
    let theta = heuristic_inits(&obs, &params, &mut rng).expect("inits").remove(0);

    c.bench_function("predict_full_forward", |b| {
        let mut ws = model.graph().workspace();
        b.iter(|| model.predict(&mut ws, &obs, &theta).expect("predict"))
    });

    // the objective re-forwards only the configuration cone after priming
    c.bench_function("objective_partial_forward", |b| {
        let mut obj =
            ModelObjective::new(&model, &obs, GradMode::ConfigOnly, 1e-3).expect("objective");
        obj.value(theta.as_slice()).expect("prime");
        b.iter(|| obj.value(theta.as_slice()).expect("value"))
    });

    c.bench_function("config_gradient", |b| {
        let mut obj =
            ModelObjective::new(&model, &obs, GradMode::ConfigOnly, 1e-3).expect("objective");
        b.iter(|| obj.gradient(theta.as_slice()).expect("gradient"))
    });

    c.bench_function("full_chain_gradient", |b| {
        let mut obj =
            ModelObjective::new(&model, &obs, GradMode::FullChain, 1e-3).expect("objective");
        b.iter(|| obj.gradient(theta.as_slice()).expect("gradient"))
    });
}

fn planner(c: &mut Criterion) {
    let model = model();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let shape = generate_scene(&mut rng, 7);
    let obs = shape.render();
    let params = WorldParams::default();
    let init = heuristic_inits(&obs, &params, &mut rng).expect("inits").remove(0);
    let cfg = PlannerConfig::default();
    let bounds = cfg.bounds_around(&init, &world_bounds()).expect("bounds");

    let mut group = c.benchmark_group("planner");
    group.sample_size(10);
    group.bench_function("ascend_one_init", |b| {
        b.iter(|| {
            let mut obj =
                ModelObjective::new(&model, &obs, GradMode::ConfigOnly, 1e-3).expect("objective");
            ascend(&mut obj, &init, &bounds, &cfg).expect("ascend")
        })
    });
    group.finish();
}

criterion_group!(benches, scene_and_oracle, forwards, planner);
criterion_main!(benches);
