//! One function per subcommand. Each resolves its settings through the
//! layered config, validates them, runs the corresponding toolkit
//! operation and writes any artifacts atomically.

use std::fs;
use std::path::{Path, PathBuf};

use graspgrad::checkpoint;
use graspgrad::dataset::{collect_trial, Dataset};
use graspgrad::error::{Error, Result};
use graspgrad::eval::{
    benchmark_scene, evaluate_classifier, make_folds, run_benchmark, BenchmarkConfig,
    BenchmarkReport, FoldMode, Method, MethodStats, TrialRecord,
};
use graspgrad::grasp::GraspConfig;
use graspgrad::grasp::THETA_DIM;
use graspgrad::model::{Model, ModelObjective};
use graspgrad::plan::{ascend, GradMode, PlannerConfig};
use graspgrad::train::{train, train_regression, LossKind, TrainConfig};
use graspgrad::world::{full_family_pool, heuristic_inits, world_bounds, WorldParams, FAMILY_POOL};
use graspgrad::zoo::ArchKind;

use crate::cli::{BenchArgs, EvalArgs, GenDataArgs, PlanArgs, PlotDataArgs, TrainArgs};
use crate::config::Resolver;

// ── shared plumbing ──────────────────────────────────────────────────────

fn require(resolver: &mut Resolver, key: &str, flag: Option<String>) -> Result<String> {
    match resolver.get(key, flag, String::new())? {
        s if s.is_empty() => Err(Error::Config(format!("missing required setting `{key}`"))),
        s => Ok(s),
    }
}

fn parse_families(text: &str) -> Result<Vec<u32>> {
    if text == "all" {
        return Ok(full_family_pool());
    }
    let mut out = Vec::new();
    for part in text.split(',') {
        let id: u32 = part
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("bad family id `{part}` in `{text}`")))?;
        if id >= FAMILY_POOL {
            return Err(Error::Config(format!(
                "family {id} is out of range (the pool has {FAMILY_POOL})"
            )));
        }
        out.push(id);
    }
    if out.is_empty() {
        return Err(Error::Config("family list is empty".into()));
    }
    Ok(out)
}

fn parse_arch(text: &str) -> Result<ArchKind> {
    match text {
        "regression" => Ok(ArchKind::RegressionNet),
        other => ArchKind::from_tag(other)
            .map_err(|_| Error::Config(format!("unknown arch `{other}` (config-net, patch-net, regression)"))),
    }
}

fn write_text_atomic(path: &Path, content: &str) -> Result<()> {
    let tmp = path.with_extension("partial");
    fs::write(&tmp, content)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Architecture-appropriate training defaults; flags and the config file
/// override individual fields.
fn train_defaults(arch: ArchKind) -> TrainConfig {
    match arch {
        ArchKind::PatchNet => TrainConfig::patch_defaults(),
        ArchKind::RegressionNet => TrainConfig { ridge: 0.5, ..TrainConfig::default() },
        ArchKind::ConfigNet => TrainConfig::default(),
    }
}

// ── gen-data ─────────────────────────────────────────────────────────────

pub fn cmd_gen_data(args: GenDataArgs) -> Result<()> {
    let mut r = Resolver::new(args.config.as_deref())?;
    let n = r.get("n", args.n, 1500usize)?;
    let seed = r.get("seed", args.seed, 42u64)?;
    let families = r.get("families", args.families, "all".to_string())?;
    let workers = r.get("workers", args.workers, 1usize)?;
    let out = PathBuf::from(require(&mut r, "out", args.out)?);
    r.finish()?;

    if n == 0 {
        return Err(Error::Config("n must be at least 1".into()));
    }
    if workers == 0 {
        return Err(Error::Config("workers must be at least 1".into()));
    }
    let pool = parse_families(&families)?;
    let params = WorldParams::default();

    // each trial depends only on (seed, index), so any partition of the
    // index range yields the same dataset bytes
    let samples = if workers == 1 {
        (0..n)
            .map(|i| collect_trial(seed, i as u64, &pool, &params))
            .collect::<Result<Vec<_>>>()?
    } else {
        let chunk = n.div_ceil(workers);
        std::thread::scope(|scope| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let lo = (w * chunk).min(n);
                    let hi = ((w + 1) * chunk).min(n);
                    let pool = &pool;
                    let params = &params;
                    scope.spawn(move || {
                        (lo..hi)
                            .map(|i| collect_trial(seed, i as u64, pool, params))
                            .collect::<Result<Vec<_>>>()
                    })
                })
                .collect();
            let mut all = Vec::with_capacity(n);
            for handle in handles {
                all.extend(handle.join().expect("collector thread panicked")?);
            }
            Ok::<_, Error>(all)
        })?
    };

    let ds = Dataset::from_samples(seed, params, samples);
    ds.save(&out)?;
    println!(
        "wrote {} samples to {} (positives {} / rate {:.4})",
        ds.len(),
        out.display(),
        ds.positives(),
        ds.positive_rate()
    );
    Ok(())
}

// ── train ────────────────────────────────────────────────────────────────

pub fn cmd_train(args: TrainArgs) -> Result<()> {
    let mut r = Resolver::new(args.config.as_deref())?;
    let data = require(&mut r, "data", args.data)?;
    let arch = parse_arch(&r.get("arch", args.arch, "config-net".to_string())?)?;
    let defaults = train_defaults(arch);
    let iters = r.get("iters", args.iters, defaults.iterations)?;
    let seed = r.get("seed", args.seed, defaults.seed)?;
    let batch = r.get("batch", args.batch, defaults.batch_size)?;
    let lr = r.get("lr", args.lr, defaults.initial_lr)?;
    let decay_every = r.get("decay-every", args.decay_every, defaults.decay_every)?;
    let dropout_keep = r.get("dropout-keep", args.dropout_keep, defaults.dropout_keep)?;
    let ridge = r.get("ridge", args.ridge, defaults.ridge)?;
    let patch_mode = r.get("patch-mode", args.patch_mode, "fixed".to_string())?;
    let interp = r.get("interp", args.interp, "bilinear".to_string())?;
    let out = PathBuf::from(require(&mut r, "out", args.out)?);
    let trace = PathBuf::from(r.get(
        "trace",
        args.trace,
        format!("{}.loss", out.display()),
    )?);
    r.finish()?;

    let patch_mode = graspgrad::patches::PatchMode::from_tag(&patch_mode)
        .map_err(|e| Error::Config(e.to_string()))?;
    let interp = graspgrad::patches::Interp::from_tag(&interp)
        .map_err(|e| Error::Config(e.to_string()))?;
    let ds = Dataset::load(Path::new(&data))?;
    let mut model = Model::new(arch, THETA_DIM, dropout_keep, seed, patch_mode, interp)?;
    let cfg = TrainConfig {
        iterations: iters,
        batch_size: batch,
        initial_lr: lr,
        decay_every,
        dropout_keep,
        ridge,
        seed,
        ..defaults
    };

    let featurizer = model.clone();
    let outcome = if arch == ArchKind::RegressionNet {
        let positives = ds.positive_indices();
        println!(
            "regression baseline: training on {} positive samples ({} filtered out)",
            positives.len(),
            ds.len() - positives.len()
        );
        train_regression(model.graph_mut(), positives.len(), &cfg, |i, mirror| {
            featurizer.train_example(ds.sample(positives[i]), mirror)
        })?
    } else {
        let positives = ds.positive_indices();
        train(
            model.graph_mut(),
            ds.len(),
            &positives,
            LossKind::CrossEntropy,
            &cfg,
            |i, mirror| featurizer.train_example(ds.sample(i), mirror),
        )?
    };

    checkpoint::save(&model, &out)?;
    let mut trace_text = String::new();
    for (i, loss) in outcome.losses.iter().enumerate() {
        trace_text.push_str(&format!("{} {}\n", i + 1, loss));
    }
    write_text_atomic(&trace, &trace_text)?;
    println!(
        "trained {} for {} iterations (final lr {}, loss tail {:.4})",
        arch.tag(),
        iters,
        outcome.final_lr,
        outcome.tail_mean(50)
    );
    println!("wrote checkpoint {} and loss trace {}", out.display(), trace.display());
    Ok(())
}

// ── eval ─────────────────────────────────────────────────────────────────

pub fn cmd_eval(args: EvalArgs) -> Result<()> {
    let mut r = Resolver::new(args.config.as_deref())?;
    let data = require(&mut r, "data", args.data)?;
    let model_path = require(&mut r, "model", args.model)?;
    let mode = r.get("mode", args.mode, "seen".to_string())?;
    let folds = r.get("folds", args.folds, 5usize)?;
    let seed = r.get("seed", args.seed, 42u64)?;
    let template = checkpoint::load(Path::new(&model_path))?;
    if !template.arch().is_classifier() {
        return Err(Error::Config(
            "the regression baseline has no classification metrics; evaluate a classifier \
             checkpoint"
                .into(),
        ));
    }
    let defaults = train_defaults(template.arch());
    let iters = r.get("iters", args.iters, defaults.iterations)?;
    let batch = r.get("batch", args.batch, defaults.batch_size)?;
    let lr = r.get("lr", args.lr, defaults.initial_lr)?;
    let decay_every = r.get("decay-every", args.decay_every, defaults.decay_every)?;
    r.finish()?;

    let mode = FoldMode::from_tag(&mode)
        .ok_or_else(|| Error::Config(format!("unknown fold mode `{mode}` (seen, unseen)")))?;
    let ds = Dataset::load(Path::new(&data))?;
    let split = make_folds(&ds, mode, folds, seed)?;
    let cfg = TrainConfig {
        iterations: iters,
        batch_size: batch,
        initial_lr: lr,
        decay_every,
        dropout_keep: template.dropout_keep(),
        seed,
        ..defaults
    };
    let report = evaluate_classifier(&template, &ds, &split, &cfg)?;
    print!("{}", report.render_text());

    if let Some(roc_out) = args.roc_out {
        let mut text = String::from("curve\tfpr\ttpr\n");
        for fold in &report.folds {
            for p in &fold.roc {
                text.push_str(&format!("fold{}\t{}\t{}\n", fold.fold, p.fpr, p.tpr));
            }
        }
        for p in &report.averaged_roc {
            text.push_str(&format!("avg\t{}\t{}\n", p.fpr, p.tpr));
        }
        for p in &report.pooled_roc {
            text.push_str(&format!("pooled\t{}\t{}\n", p.fpr, p.tpr));
        }
        write_text_atomic(&roc_out, &text)?;
        println!("wrote ROC curves to {}", roc_out.display());
    }
    Ok(())
}

// ── plan ─────────────────────────────────────────────────────────────────

fn parse_inits_file(path: &Path) -> Result<Vec<GraspConfig>> {
    let text = fs::read_to_string(path)?;
    let mut inits = Vec::new();
    for (number, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let place = format!("inits file {} line {}", path.display(), number + 1);
        let values: Vec<f64> = line
            .split_whitespace()
            .map(|tok| {
                tok.parse::<f64>()
                    .map_err(|_| Error::Format(format!("{place}: `{tok}` is not a number")))
            })
            .collect::<Result<_>>()?;
        if values.len() != THETA_DIM {
            return Err(Error::Format(format!(
                "{place}: expected {THETA_DIM} numbers, got {}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Format(format!("{place}: non-finite value")));
        }
        inits.push(GraspConfig::new(values));
    }
    if inits.is_empty() {
        return Err(Error::Format(format!(
            "inits file {}: no initializations",
            path.display()
        )));
    }
    Ok(inits)
}

pub fn cmd_plan(args: PlanArgs) -> Result<()> {
    let mut r = Resolver::new(args.config.as_deref())?;
    let model_path = require(&mut r, "model", args.model)?;
    let scene_seed = r.get("scene-seed", args.scene_seed, 42u64)?;
    let inits_text = r.get("inits", args.inits, "heuristic".to_string())?;
    let mode_text = r.get("mode", args.mode, "config-only".to_string())?;
    let fd_eps = r.get("fd-eps", args.fd_eps, 0.001f64)?;
    let max_iters = r.get("max-iters", args.max_iters, 100usize)?;
    r.finish()?;

    let model = checkpoint::load(Path::new(&model_path))?;
    let grad_mode = GradMode::from_tag(&mode_text)
        .map_err(|_| Error::Config(format!("unknown mode `{mode_text}` (config-only, full-chain)")))?;
    if grad_mode == GradMode::FullChain
        && model.arch() == ArchKind::ConfigNet
        && model.patch_mode() == graspgrad::patches::PatchMode::Fixed
    {
        eprintln!(
            "note: this model's object patch ignores the grasp, so full-chain gradients \
             equal config-only"
        );
    }

    let (_, obs, mut rng) = benchmark_scene(scene_seed, 0, &full_family_pool())?;
    let inits = if inits_text == "heuristic" {
        heuristic_inits(&obs, &WorldParams::default(), &mut rng)?
    } else {
        parse_inits_file(Path::new(&inits_text))?
    };

    let planner = PlannerConfig {
        grad_mode,
        fd_eps,
        max_iterations: max_iters,
        ..PlannerConfig::default()
    };
    let world = world_bounds();
    let mut obj = ModelObjective::new(&model, &obs, grad_mode, fd_eps)?;
    let mut best: Option<(usize, f64)> = None;
    for (i, init) in inits.iter().enumerate() {
        let bounds = planner.bounds_around(init, &world)?;
        let mut result = ascend(&mut obj, init, &bounds, &planner)?;
        result.init_index = i;
        println!("{}", result.line());
        if best.map_or(true, |(_, p)| result.p > p) {
            best = Some((i, result.p));
        }
    }
    let (chosen, p) = best.expect("at least one initialization");
    println!("chosen init={chosen} p={p:.6}");
    Ok(())
}

// ── bench ────────────────────────────────────────────────────────────────

fn parse_methods(text: &str) -> Result<Vec<Method>> {
    if text == "all" {
        return Ok(vec![Method::Heuristic, Method::MaxEval, Method::Sampling, Method::Inference]);
    }
    let mut out = Vec::new();
    for part in text.split(',') {
        let m = Method::from_tag(part.trim()).ok_or_else(|| {
            Error::Config(format!(
                "unknown method `{part}` (heuristic, max-eval, sampling, inference)"
            ))
        })?;
        if m == Method::Ascent {
            return Err(Error::Config("`ascent` rows are diagnostics, not a method".into()));
        }
        if !out.contains(&m) {
            out.push(m);
        }
    }
    if out.is_empty() {
        return Err(Error::Config("method list is empty".into()));
    }
    Ok(out)
}

fn method_stats<'r>(report: &'r BenchmarkReport, method: Method) -> &'r MethodStats {
    match method {
        Method::Heuristic => &report.heuristic,
        Method::MaxEval => &report.max_eval,
        Method::Sampling => &report.sampling,
        Method::Inference => &report.inference,
        Method::Ascent => unreachable!("ascent is filtered out at parse time"),
    }
}

pub fn cmd_bench(args: BenchArgs) -> Result<()> {
    let mut r = Resolver::new(args.config.as_deref())?;
    let model_path = require(&mut r, "model", args.model)?;
    let scenes = r.get("scenes", args.scenes, 200usize)?;
    let seed = r.get("seed", args.seed, 42u64)?;
    let methods_text = r.get("methods", args.methods, "all".to_string())?;
    let families = r.get("families", args.families, "all".to_string())?;
    let record_ms = r.get("record-ms", if args.record_ms { Some(true) } else { None }, false)?;
    let out = r.get("out", args.out, String::new())?;
    r.finish()?;

    let methods = parse_methods(&methods_text)?;
    let pool = parse_families(&families)?;
    let model = checkpoint::load(Path::new(&model_path))?;
    let cfg = BenchmarkConfig {
        scenes,
        seed,
        record_ms,
        ..BenchmarkConfig::default()
    };
    let (records, report) = run_benchmark(&model, &pool, &cfg)?;

    if !out.is_empty() {
        let mut log = String::new();
        for record in &records {
            log.push_str(&record.to_line());
            log.push('\n');
        }
        write_text_atomic(Path::new(&out), &log)?;
        println!("wrote {} trial records to {out}", records.len());
    }

    println!("scenes={}", report.scenes);
    for &method in &methods {
        let stats = method_stats(&report, method);
        println!(
            "{:<10} rate={:.4} ({}/{})",
            method.tag(),
            stats.rate(),
            stats.successes,
            stats.attempts
        );
    }
    if methods.contains(&Method::Inference) {
        println!(
            "predicted success: init mean={:.4} final mean={:.4}",
            report.mean_p_init, report.mean_p_final
        );
        match report.improvement_fraction() {
            Some(f) => println!(
                "rescued {}/{} failing initializations ({f:.4})",
                report.rescued, report.failing_inits
            ),
            None => println!("rescue fraction undefined: no failing initializations"),
        }
    }
    Ok(())
}

// ── plot-data ────────────────────────────────────────────────────────────

pub fn cmd_plot_data(args: PlotDataArgs) -> Result<()> {
    let mut r = Resolver::new(args.config.as_deref())?;
    let bench_log = r.get("bench-log", args.bench_log, String::new())?;
    let loss_trace = r.get("loss-trace", args.loss_trace, String::new())?;
    let out_dir = PathBuf::from(require(&mut r, "out", args.out)?);
    r.finish()?;

    if bench_log.is_empty() && loss_trace.is_empty() {
        return Err(Error::Config("nothing to export: give bench-log and/or loss-trace".into()));
    }
    fs::create_dir_all(&out_dir)?;

    if !bench_log.is_empty() {
        let text = fs::read_to_string(&bench_log)?;
        let mut records = Vec::new();
        for (number, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record = TrialRecord::from_line(line).map_err(|e| {
                Error::Format(format!("{bench_log} line {}: {e}", number + 1))
            })?;
            records.push(record);
        }
        let report = BenchmarkReport::from_records(&records)?;

        let mut methods = String::from("method\tsuccesses\tattempts\trate\n");
        for m in [Method::Heuristic, Method::MaxEval, Method::Sampling, Method::Inference] {
            let s = method_stats(&report, m);
            methods.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                m.tag(),
                s.successes,
                s.attempts,
                s.rate()
            ));
        }
        write_text_atomic(&out_dir.join("methods.tsv"), &methods)?;

        let mut families = String::from("family\tmethod\tsuccesses\tattempts\n");
        for m in [Method::Heuristic, Method::MaxEval, Method::Sampling, Method::Inference] {
            for (family, (successes, attempts)) in &method_stats(&report, m).per_family {
                families.push_str(&format!("{family}\t{}\t{successes}\t{attempts}\n", m.tag()));
            }
        }
        write_text_atomic(&out_dir.join("families.tsv"), &families)?;

        let mut ascent = String::from("scene\tinit\tp0\tp\n");
        for record in records.iter().filter(|r| r.method == Method::Ascent) {
            let init = record.init.expect("ascent records carry an init");
            ascent.push_str(&format!("{}\t{init}\t{}\t{}\n", record.scene, record.p0, record.p));
        }
        write_text_atomic(&out_dir.join("ascent.tsv"), &ascent)?;
        println!("wrote methods.tsv, families.tsv, ascent.tsv to {}", out_dir.display());
    }

    if !loss_trace.is_empty() {
        let text = fs::read_to_string(&loss_trace)?;
        let mut loss = String::from("iteration\tloss\n");
        for (number, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(i), Some(l), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(Error::Format(format!(
                    "{loss_trace} line {}: expected `iteration loss`",
                    number + 1
                )));
            };
            let _: u64 = i.parse().map_err(|_| {
                Error::Format(format!("{loss_trace} line {}: bad iteration `{i}`", number + 1))
            })?;
            let _: f64 = l.parse().map_err(|_| {
                Error::Format(format!("{loss_trace} line {}: bad loss `{l}`", number + 1))
            })?;
            loss.push_str(&format!("{i}\t{l}\n"));
        }
        write_text_atomic(&out_dir.join("loss.tsv"), &loss)?;
        println!("wrote loss.tsv to {}", out_dir.display());
    }
    Ok(())
}
