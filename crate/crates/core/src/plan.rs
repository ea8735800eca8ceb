//! Planning as maximization: projected gradient ascent with a backtracking
//! line search over an objective's configuration input, plus the argmax
//! baselines (evaluate-and-pick and sample-and-rank).
//!
//! The planner is dimension-agnostic: it sees an [`Objective`] exposing a
//! value and a gradient at any configuration, and a [`BoxBounds`] it
//! projects onto after every step. Acceptance uses an Armijo
//! sufficient-increase test by default (a plain-increase rule is
//! available); the step size starts small, halves on rejection, and
//! resets every iteration.

use std::time::Instant;

use rand::Rng;

use crate::error::{Error, Result};
use crate::grasp::{BoxBounds, GraspConfig};

/// A differentiable scalar objective over configuration vectors. `&mut`
/// allows implementations to reuse internal workspaces; results must not
/// depend on call history.
pub trait Objective {
    fn dim(&self) -> usize;
    fn value(&mut self, theta: &[f64]) -> Result<f64>;
    fn gradient(&mut self, theta: &[f64]) -> Result<Vec<f64>>;
}

/// Which gradient the config-net objective uses: just the configuration
/// channel, or additionally the finite-differenced patch term.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradMode {
    ConfigOnly,
    FullChain,
}

impl GradMode {
    pub fn tag(self) -> &'static str {
        match self {
            GradMode::ConfigOnly => "config-only",
            GradMode::FullChain => "full-chain",
        }
    }

    pub fn from_tag(tag: &str) -> Result<Self> {
        match tag {
            "config-only" => Ok(GradMode::ConfigOnly),
            "full-chain" => Ok(GradMode::FullChain),
            other => Err(Error::Format(format!("unknown gradient mode `{other}`"))),
        }
    }
}

/// Line-search acceptance rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AcceptRule {
    /// Accept when `f' >= f + c * alpha * |grad|^2`.
    Armijo,
    /// Accept on any strict increase.
    SimpleIncrease,
}

/// Planner hyperparameters.
#[derive(Clone, Debug)]
pub struct PlannerConfig {
    pub max_iterations: usize,
    /// Line-search initial step size (reset each iteration).
    pub init_step: f64,
    /// Multiplicative step shrink on rejection.
    pub ls_shrink: f64,
    pub ls_max_trials: usize,
    /// Armijo slope fraction.
    pub armijo_frac: f64,
    /// Convergence tolerance on the accepted step's infinity norm.
    pub tol: f64,
    /// Central-difference step for patch gradients.
    pub fd_eps: f64,
    pub grad_mode: GradMode,
    pub accept: AcceptRule,
    /// Per-init bound half-widths: translation coordinates.
    pub translation_radius: f64,
    /// Per-init bound half-width: angle coordinate.
    pub angle_radius: f64,
    /// Per-init bound half-width: opening coordinate.
    pub opening_radius: f64,
    /// Draw count for the sampling baseline.
    pub sample_count: usize,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        PlannerConfig {
            max_iterations: 100,
            init_step: 0.001,
            ls_shrink: 0.5,
            ls_max_trials: 10,
            armijo_frac: 1e-4,
            tol: 1e-6,
            fd_eps: 1e-3,
            grad_mode: GradMode::ConfigOnly,
            accept: AcceptRule::Armijo,
            translation_radius: 0.1,
            angle_radius: 0.3,
            opening_radius: 0.05,
            sample_count: 150,
        }
    }
}

impl PlannerConfig {
    /// Per-coordinate bound half-widths around an initialization. The
    /// four-dimensional layout gets translation/angle/opening radii; any
    /// other dimension falls back to the translation radius everywhere.
    pub fn bound_radii(&self, dim: usize) -> Vec<f64> {
        if dim == crate::grasp::THETA_DIM {
            vec![
                self.translation_radius,
                self.translation_radius,
                self.angle_radius,
                self.opening_radius,
            ]
        } else {
            vec![self.translation_radius; dim]
        }
    }

    /// The ascent box for one initialization: radii around the init,
    /// clipped to the world box.
    pub fn bounds_around(&self, init: &GraspConfig, world: &BoxBounds) -> Result<BoxBounds> {
        BoxBounds::around(init.as_slice(), &self.bound_radii(init.dim()), Some(world))
    }
}

/// Why an ascent run stopped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopReason {
    Converged,
    MaxIterations,
    LineSearchExhausted,
}

impl StopReason {
    pub fn tag(self) -> &'static str {
        match self {
            StopReason::Converged => "converged",
            StopReason::MaxIterations => "max-iterations",
            StopReason::LineSearchExhausted => "line-search-exhausted",
        }
    }
}

/// One accepted step in an ascent trace.
#[derive(Clone, Debug)]
pub struct TraceStep {
    pub iteration: usize,
    pub theta: Vec<f64>,
    pub value: f64,
    pub step: f64,
}

/// Outcome of one ascent run.
#[derive(Clone, Debug)]
pub struct PlanResult {
    pub init_index: usize,
    pub theta0: GraspConfig,
    pub p0: f64,
    pub theta: GraspConfig,
    pub p: f64,
    pub trace: Vec<TraceStep>,
    pub reason: StopReason,
    pub millis: f64,
}

impl PlanResult {
    /// Accepted-iteration count (the trace minus the initial point).
    pub fn iterations(&self) -> usize {
        self.trace.len().saturating_sub(1)
    }

    /// One-line text record of the run.
    pub fn line(&self) -> String {
        format!(
            "init={} iters={} p0={:.6} p={:.6} theta={} reason={} ms={:.2}",
            self.init_index,
            self.iterations(),
            self.p0,
            self.p,
            self.theta,
            self.reason.tag(),
            self.millis
        )
    }
}

fn ensure_finite_scalar(v: f64, what: &str) -> Result<f64> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(Error::Numeric(format!("{what} is not finite ({v})")))
    }
}

/// Maximize the objective inside `bounds` starting from `theta0`.
///
/// Every iterate is the exact projection of a candidate step, so bounds
/// hold bitwise. The trace records the initial point and every accepted
/// step; its values never decrease under the Armijo rule.
pub fn ascend<O: Objective + ?Sized>(
    obj: &mut O,
    theta0: &GraspConfig,
    bounds: &BoxBounds,
    cfg: &PlannerConfig,
) -> Result<PlanResult> {
    if bounds.dim() != obj.dim() || theta0.dim() != obj.dim() {
        return Err(Error::Config(format!(
            "dimension mismatch: objective {}, init {}, bounds {}",
            obj.dim(),
            theta0.dim(),
            bounds.dim()
        )));
    }
    let start = Instant::now();
    let mut theta = bounds.project(theta0.as_slice());
    let mut value = ensure_finite_scalar(obj.value(&theta)?, "objective at init")?;
    let p0 = value;
    let mut trace = vec![TraceStep { iteration: 0, theta: theta.clone(), value, step: 0.0 }];
    let mut reason = StopReason::MaxIterations;

    for iteration in 1..=cfg.max_iterations {
        let grad = obj.gradient(&theta)?;
        if grad.iter().any(|g| !g.is_finite()) {
            return Err(Error::Numeric(format!(
                "gradient is not finite at iteration {iteration}"
            )));
        }
        let grad_norm2: f64 = grad.iter().map(|g| g * g).sum();

        let mut alpha = cfg.init_step;
        let mut accepted: Option<(Vec<f64>, f64, f64)> = None;
        for _ in 0..cfg.ls_max_trials {
            let candidate: Vec<f64> = theta
                .iter()
                .zip(&grad)
                .map(|(t, g)| t + alpha * g)
                .collect();
            let candidate = bounds.project(&candidate);
            let cand_value =
                ensure_finite_scalar(obj.value(&candidate)?, "objective in line search")?;
            let ok = match cfg.accept {
                AcceptRule::Armijo => {
                    cand_value >= value + cfg.armijo_frac * alpha * grad_norm2
                }
                AcceptRule::SimpleIncrease => cand_value > value,
            };
            if ok {
                accepted = Some((candidate, cand_value, alpha));
                break;
            }
            alpha *= cfg.ls_shrink;
        }

        let Some((next, next_value, step)) = accepted else {
            reason = StopReason::LineSearchExhausted;
            break;
        };
        let moved = next
            .iter()
            .zip(&theta)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        theta = next;
        value = next_value;
        trace.push(TraceStep { iteration, theta: theta.clone(), value, step });
        if moved < cfg.tol {
            reason = StopReason::Converged;
            break;
        }
    }

    Ok(PlanResult {
        init_index: 0,
        theta0: theta0.clone(),
        p0,
        theta: GraspConfig::new(theta),
        p: value,
        trace,
        reason,
        millis: start.elapsed().as_secs_f64() * 1e3,
    })
}

/// Run one ascent per initialization (bounds built around each) and return
/// the best final value; ties go to the lowest init index.
pub fn plan_multi_init<O: Objective + ?Sized>(
    obj: &mut O,
    inits: &[GraspConfig],
    world: &BoxBounds,
    cfg: &PlannerConfig,
) -> Result<PlanResult> {
    if inits.is_empty() {
        return Err(Error::Config("no initializations given".into()));
    }
    let mut best: Option<PlanResult> = None;
    for (index, init) in inits.iter().enumerate() {
        let bounds = cfg.bounds_around(init, world)?;
        let mut result = ascend(obj, init, &bounds, cfg)?;
        result.init_index = index;
        let better = match &best {
            None => true,
            Some(b) => result.p > b.p,
        };
        if better {
            best = Some(result);
        }
    }
    Ok(best.expect("nonempty inits produce a result"))
}

/// Evaluate each initialization once and pick the argmax (no ascent);
/// ties go to the lowest index. Returns (index, value).
pub fn max_eval<O: Objective + ?Sized>(
    obj: &mut O,
    inits: &[GraspConfig],
) -> Result<(usize, f64)> {
    if inits.is_empty() {
        return Err(Error::Config("no initializations given".into()));
    }
    let mut best = (0usize, f64::NEG_INFINITY);
    for (index, init) in inits.iter().enumerate() {
        let v = ensure_finite_scalar(obj.value(init.as_slice())?, "objective")?;
        if v > best.1 {
            best = (index, v);
        }
    }
    Ok(best)
}

/// Draw `n` uniform configurations inside `bounds`, evaluate each, return
/// the argmax configuration and its value; ties keep the earliest draw.
pub fn sample_and_rank<O: Objective + ?Sized, R: Rng>(
    obj: &mut O,
    bounds: &BoxBounds,
    n: usize,
    rng: &mut R,
) -> Result<(GraspConfig, f64)> {
    if n == 0 {
        return Err(Error::Config("sample count must be at least 1".into()));
    }
    let mut best: Option<(GraspConfig, f64)> = None;
    for _ in 0..n {
        let theta: Vec<f64> = bounds
            .lo()
            .iter()
            .zip(bounds.hi())
            .map(|(lo, hi)| lo + rng.gen::<f64>() * (hi - lo))
            .collect();
        let v = ensure_finite_scalar(obj.value(&theta)?, "objective")?;
        let better = match &best {
            None => true,
            Some((_, b)) => v > *b,
        };
        if better {
            best = Some((GraspConfig::new(theta), v));
        }
    }
    Ok(best.expect("n >= 1"))
}
