//! Scratch calibration runs; not part of the toolkit.

use std::time::Instant;

use graspgrad::dataset::{collect_dataset, DEFAULT_SEED};
use graspgrad::eval::{roc_auc, run_benchmark, BenchmarkConfig};
use graspgrad::grasp::THETA_DIM;
use graspgrad::model::Model;
use graspgrad::patches::{Interp, PatchMode};
use graspgrad::train::{train, LossKind, TrainConfig};
use graspgrad::world::{full_family_pool, WorldParams};
use graspgrad::zoo::ArchKind;

fn rotate_sample_90(s: &graspgrad::dataset::GraspSample, turns: u8) -> graspgrad::dataset::GraspSample {
    use graspgrad::grasp::GraspConfig;
    use std::f64::consts::{FRAC_PI_2, PI};
    let mut out = s.clone();
    for _ in 0..turns % 4 {
        let mut ns = out.shape.clone();
        let (cx, cy) = (out.shape.cx, out.shape.cy);
        ns.cx = 1.0 - cy;
        ns.cy = cx;
        ns.phi = out.shape.phi + FRAC_PI_2;
        let t = &out.theta;
        let psi = (t.psi() + FRAC_PI_2 + PI).rem_euclid(2.0 * PI) - PI;
        let nt = GraspConfig::parallel_jaw(1.0 - t.gy(), t.gx(), psi, t.h());
        out = graspgrad::dataset::GraspSample {
            observation: ns.render(),
            shape: ns,
            theta: nt,
            label: out.label,
        };
    }
    out
}

fn rotate_sample_cont(s: &graspgrad::dataset::GraspSample, angle: f64) -> graspgrad::dataset::GraspSample {
    use graspgrad::grasp::GraspConfig;
    use std::f64::consts::PI;
    let mut ns = s.shape.clone();
    ns.phi = s.shape.phi + angle;
    let (sin, cos) = angle.sin_cos();
    let t = &s.theta;
    let (dx, dy) = (t.gx() - s.shape.cx, t.gy() - s.shape.cy);
    let psi = (t.psi() + angle + PI).rem_euclid(2.0 * PI) - PI;
    let nt = GraspConfig::parallel_jaw(
        s.shape.cx + cos * dx - sin * dy,
        s.shape.cy + sin * dx + cos * dy,
        psi,
        t.h(),
    );
    graspgrad::dataset::GraspSample { observation: ns.render(), shape: ns, theta: nt, label: s.label }
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let iters: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(1000);
    let lr: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.001);
    let decay_every: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(2000);
    let batch: usize = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(8);
    let bench_scenes: usize = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(0);
    let split = args.get(6).map(String::as_str).unwrap_or("stride").to_string();
    let rot_mode = args.get(7).map(String::as_str).unwrap_or("none").to_string();
    let params = WorldParams::default();
    let pool = full_family_pool();

    let t0 = Instant::now();
    let ds = collect_dataset(1500, DEFAULT_SEED, &pool, &params).unwrap();
    println!(
        "dataset: n=1500 positives={} rate={:.4} ({:?})",
        ds.positives(),
        ds.positive_rate(),
        t0.elapsed()
    );

    // 80/20 split: by index stride, or family-disjoint (unseen proxy)
    let held_families = [4u32, 9, 14, 19, 23];
    let is_test = |i: usize| -> bool {
        if split == "family" {
            held_families.contains(&ds.sample(i).shape.family_id)
        } else {
            i % 5 == 0
        }
    };
    let train_idx: Vec<usize> = (0..ds.len()).filter(|&i| !is_test(i)).collect();
    let test_idx: Vec<usize> = (0..ds.len()).filter(|&i| is_test(i)).collect();
    let positives: Vec<usize> = train_idx
        .iter()
        .enumerate()
        .filter(|(_, &s)| ds.sample(s).is_positive())
        .map(|(i, _)| i)
        .collect();

    let mut model = Model::new(
        ArchKind::ConfigNet,
        THETA_DIM,
        0.75,
        7,
        PatchMode::Fixed,
        Interp::Bilinear,
    )
    .unwrap();
    let featurizer = model.clone();
    let samples = ds.samples();
    let cfg = TrainConfig {
        iterations: iters,
        initial_lr: lr,
        decay_every,
        batch_size: batch,
        seed: 7,
        ..TrainConfig::default()
    };
    let t1 = Instant::now();
    use rand::{Rng, SeedableRng};
    let mut aug_rng = rand_chacha::ChaCha8Rng::seed_from_u64(777);
    let out = train(
        model.graph_mut(),
        train_idx.len(),
        &positives,
        LossKind::CrossEntropy,
        &cfg,
        |i, mirror| {
            let sample = &samples[train_idx[i]];
            match rot_mode.as_str() {
                "rot" => {
                    let turns = aug_rng.gen_range(0..4u8);
                    featurizer.train_example(&rotate_sample_90(sample, turns), mirror)
                }
                "crot" => {
                    use std::f64::consts::PI;
                    let angle = aug_rng.gen_range(-PI..PI);
                    featurizer.train_example(&rotate_sample_cont(sample, angle), mirror)
                }
                _ => featurizer.train_example(sample, mirror),
            }
        },
    )
    .unwrap();
    let train_time = t1.elapsed();
    println!(
        "train: iters={} time={:?} ({:.1} ms/iter) loss tail={:.4}",
        iters,
        train_time,
        train_time.as_secs_f64() * 1e3 / iters as f64,
        out.tail_mean(50)
    );

    let mut ws = model.graph().workspace();
    let mut auc_over = |idx: &[usize]| {
        let mut scores = Vec::new();
        let mut labels = Vec::new();
        for &s in idx {
            let sm = ds.sample(s);
            scores.push(model.predict(&mut ws, &sm.observation, &sm.theta).unwrap());
            labels.push(sm.label);
        }
        roc_auc(&scores, &labels).unwrap().1
    };
    println!("train AUC = {:.4}", auc_over(&train_idx));
    println!("held-out AUC = {:.4} over {} samples", auc_over(&test_idx), test_idx.len());

    if bench_scenes > 0 {
        let t2 = Instant::now();
        let bench_cfg = BenchmarkConfig {
            scenes: bench_scenes,
            seed: 5,
            record_ms: true,
            ..Default::default()
        };
        let (records, report) = run_benchmark(&model, &pool, &bench_cfg).unwrap();
        println!("bench {bench_scenes} scenes in {:?}", t2.elapsed());
        print!("{}", report.render_text());
        let mut max_ms: f64 = 0.0;
        for r in &records {
            if r.method == graspgrad::eval::Method::Ascent {
                max_ms = max_ms.max(r.ms);
            }
        }
        println!("max per-init ascent ms = {max_ms:.1}");
    }
}
