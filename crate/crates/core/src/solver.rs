//! Active-set first-order solver for box-constrained maximization of the
//! smooth total variation surrogate.
//!
//! Internally the solver minimizes `f = -TV^p`. Each iteration estimates the
//! variables bound at the box faces, picks a working set of free variables
//! (always containing the one that most violates stationarity), moves along a
//! safeguarded spectral gradient direction restricted to that set, and accepts
//! the unit step without evaluating the objective while a shrinking radius
//! allows it. The objective is only computed at periodic controls and inside
//! the non-monotone line search, both measured against a reference value over
//! recent checkpoints; a failed control backtracks to the last checkpoint.

use std::collections::VecDeque;
use std::time::{Duration, Instant};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::graph::{threshold_sweep, BoxSpec, Graph, GraphError, NodeSet};
use crate::objective::{obj_from_grad, tv_q, GradientCache, ObjectiveError};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
    #[error("line search failed after {steps} backtracking steps (gradient inconsistency?)")]
    LineSearchFailed { steps: u32 },
    #[error("direction is not a descent direction (slope {slope})")]
    NotDescent { slope: f64 },
    #[error("non-finite value in {what}")]
    NonFinite { what: String },
}

/// Norm compared against the shrinking radius when deciding whether to accept
/// the unit step without a function evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UnitStepRule {
    /// Infinity norm of the projected trial point (the literal rule).
    ProjectedPointNorm,
    /// Infinity norm of the displacement from the current iterate.
    DisplacementNorm,
}

/// Solver tunables. Defaults: `p = 1.4`, control every 20 iterations,
/// reference memory 100, radius `1e20` shrinking by 0.99, Armijo halving
/// with slope fraction `1e-3`, spectral coefficient safeguarded to
/// `[1e-10, 1e10]`, working set growing from 2 up to
/// `max(10, min(1000, 0.03 n))`.
#[derive(Debug, Clone)]
pub struct SolverParams {
    /// Surrogate exponent, `> 1`.
    pub p: f64,
    /// Iterations between objective controls (`>= 1`).
    pub control_interval: u64,
    /// Number of previous checkpoint values kept for the reference maximum.
    pub reference_memory: usize,
    /// Initial unit-step radius.
    pub delta0: f64,
    /// Radius shrink factor, in `(0, 1)`.
    pub beta: f64,
    /// Line-search backtracking factor, in `(0, 1)`.
    pub ls_backtrack: f64,
    /// Armijo slope fraction, in `(0, 1)`.
    pub ls_slope_fraction: f64,
    /// Spectral coefficient safeguards, `0 < mu_min <= mu_max`.
    pub mu_min: f64,
    pub mu_max: f64,
    /// Initial working-set size; doubles every iteration up to the cap.
    pub ws_start: usize,
    /// Working-set cap; `None` applies `max(10, min(1000, 0.03 n))`.
    pub ws_cap: Option<usize>,
    /// Stationarity tolerance in the infinity norm.
    pub eps_stationarity: f64,
    /// Iteration budget; `None` applies `min(10 n, 1e6)`.
    pub max_iters: Option<u64>,
    /// Maximum Armijo backtracking steps per line search.
    pub max_ls_steps: u32,
    pub seed: u64,
    pub unit_step_rule: UnitStepRule,
    /// Record per-iteration iterates and flags (for tests and debugging).
    pub record_trace: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            p: 1.4,
            control_interval: 20,
            reference_memory: 100,
            delta0: 1e20,
            beta: 0.99,
            ls_backtrack: 0.5,
            ls_slope_fraction: 1e-3,
            mu_min: 1e-10,
            mu_max: 1e10,
            ws_start: 2,
            ws_cap: None,
            eps_stationarity: 1e-4,
            max_iters: None,
            max_ls_steps: 60,
            seed: 0,
            unit_step_rule: UnitStepRule::ProjectedPointNorm,
            record_trace: false,
        }
    }
}

impl SolverParams {
    pub fn validate(&self) -> Result<(), SolverError> {
        let err = |msg: String| Err(SolverError::InvalidParams(msg));
        if self.p.is_nan() || self.p <= 1.0 || !self.p.is_finite() {
            return err(format!("p = {} must be > 1", self.p));
        }
        if self.control_interval < 1 {
            return err("control interval must be >= 1".into());
        }
        if self.delta0.is_nan() || self.delta0 < 0.0 {
            return err(format!("delta0 = {} must be >= 0", self.delta0));
        }
        for (name, v) in [
            ("beta", self.beta),
            ("ls_backtrack", self.ls_backtrack),
            ("ls_slope_fraction", self.ls_slope_fraction),
        ] {
            if v.is_nan() || v <= 0.0 || v >= 1.0 {
                return err(format!("{name} = {v} must lie in (0, 1)"));
            }
        }
        if self.mu_min.is_nan()
            || self.mu_max.is_nan()
            || self.mu_min <= 0.0
            || self.mu_min > self.mu_max
            || !self.mu_max.is_finite()
        {
            return err(format!(
                "mu bounds ({}, {}) must satisfy 0 < mu_min <= mu_max < inf",
                self.mu_min, self.mu_max
            ));
        }
        if self.ws_start < 1 {
            return err("working-set start size must be >= 1".into());
        }
        if self.eps_stationarity.is_nan() || self.eps_stationarity <= 0.0 {
            return err("stationarity tolerance must be positive".into());
        }
        if self.max_ls_steps < 1 {
            return err("max line-search steps must be >= 1".into());
        }
        Ok(())
    }

    pub fn working_set_cap(&self, n: usize) -> usize {
        self.ws_cap
            .unwrap_or_else(|| 10_usize.max(1000.min((0.03 * n as f64).floor() as usize)))
            .max(1)
    }

    pub fn iteration_budget(&self, n: usize) -> u64 {
        self.max_iters.unwrap_or_else(|| (10 * n as u64).min(1_000_000))
    }
}

/// Outcome of a solver run: final continuous point, its thresholded
/// community, objective values and run telemetry.
#[derive(Debug, Clone)]
pub struct ModuleResult {
    pub x_star: Vec<f64>,
    pub community: NodeSet,
    pub q_value: f64,
    pub tv_p_init: f64,
    pub tv_p_final: f64,
    pub tv_final: f64,
    pub stationarity: f64,
    pub iters: u64,
    pub fevals: u64,
    pub gevals: u64,
    pub wall_time: Duration,
    pub seed: u64,
    pub telemetry: Telemetry,
}

#[derive(Debug, Clone, Default)]
pub struct Telemetry {
    pub unit_steps: u64,
    pub line_searches: u64,
    pub backtracks: u64,
    /// Objective value recorded at every accepted checkpoint (starts with the
    /// initial point).
    pub checkpoint_values: Vec<f64>,
    /// Reference value after every checkpoint; nonincreasing by construction.
    pub reference_values: Vec<f64>,
    pub pair_ops: u64,
    pub grad_full_evals: u64,
    pub grad_incremental_evals: u64,
    pub converged: bool,
    pub trace: Option<Vec<IterationTrace>>,
}

/// Per-iteration record, populated when `record_trace` is set.
#[derive(Debug, Clone)]
pub struct IterationTrace {
    /// Iteration label at entry (rewinds on backtracks).
    pub k: u64,
    pub x_after: Vec<f64>,
    pub alpha: f64,
    pub unit_step: bool,
    /// An objective control ran this iteration.
    pub control_fired: bool,
    pub backtracked: bool,
    pub fevals_delta: u64,
}

/// Componentwise projection onto the box.
pub fn project(x: &[f64], box_spec: &BoxSpec) -> Vec<f64> {
    x.iter().map(|&v| box_spec.clamp(v)).collect()
}

/// Snaps a starting point to the box faces: negative components go to the
/// lower bound, positive to the upper, zeros to the upper.
pub fn initialize(x0: &[f64], box_spec: &BoxSpec) -> Vec<f64> {
    x0.iter()
        .map(|&v| {
            if v < 0.0 {
                box_spec.lower()
            } else {
                box_spec.upper()
            }
        })
        .collect()
}

/// Index sets estimating which variables are bound at the final solution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetEstimates {
    /// At the lower bound with positive partial derivative.
    pub lower: Vec<usize>,
    /// At the upper bound with negative partial derivative.
    pub upper: Vec<usize>,
    /// Everything else.
    pub free: Vec<usize>,
}

/// Active and non-active set estimates at a feasible point. Bound membership
/// is tested by exact equality; the projection writes exact bound values.
pub fn estimate_sets(x: &[f64], grad: &[f64], box_spec: &BoxSpec) -> SetEstimates {
    let mut lower = Vec::new();
    let mut upper = Vec::new();
    let mut free = Vec::new();
    for i in 0..x.len() {
        if x[i] == box_spec.lower() && grad[i] > 0.0 {
            lower.push(i);
        } else if x[i] == box_spec.upper() && grad[i] < 0.0 {
            upper.push(i);
        } else {
            free.push(i);
        }
    }
    SetEstimates { lower, upper, free }
}

fn violation_profile(x: &[f64], grad: &[f64], box_spec: &BoxSpec) -> Vec<f64> {
    x.iter()
        .zip(grad)
        .map(|(&xi, &gi)| (xi - box_spec.clamp(xi - gi)).abs())
        .collect()
}

/// Stationarity measure `‖x - Π(x - ∇f(x))‖_∞`; zero exactly at points
/// satisfying the box first-order conditions.
pub fn stationarity_measure(x: &[f64], grad: &[f64], box_spec: &BoxSpec) -> f64 {
    violation_profile(x, grad, box_spec)
        .into_iter()
        .fold(0.0, f64::max)
}

/// Working set selection: always contains the maximal-violation free index
/// (ties to the smallest index); the rest is drawn uniformly without
/// replacement from the remaining free indices. Returned sorted ascending.
pub fn select_working_set(
    free: &[usize],
    violations: &[f64],
    target: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    assert!(!free.is_empty(), "working set requested with no free variables");
    let target = target.max(1);
    let mut best = free[0];
    for &i in free {
        if violations[i] > violations[best] {
            best = i;
        }
    }
    if target >= free.len() {
        return free.to_vec();
    }
    let rest: Vec<usize> = free.iter().copied().filter(|&i| i != best).collect();
    let picked = rand::seq::index::sample(rng, rest.len(), target - 1);
    let mut w: Vec<usize> = picked.into_iter().map(|k| rest[k]).collect();
    w.push(best);
    w.sort_unstable();
    w
}

/// Three-case safeguard for the spectral coefficient given the raw curvature
/// ratios. `mu_a` is `sᵀy/‖s‖²`, `mu_b` is `‖y‖²/sᵀy`, `fallback` is the
/// first-iterations coefficient.
pub fn bb_safeguard(mu_a: f64, mu_b: f64, fallback: f64, mu_min: f64, mu_max: f64) -> f64 {
    let mu = if mu_a > 0.0 && mu_a < mu_max {
        mu_min.max(mu_a)
    } else if mu_a >= mu_max {
        mu_min.max(mu_max.min(mu_b))
    } else {
        fallback
    };
    mu.clamp(mu_min, mu_max)
}

/// Spectral (Barzilai–Borwein) coefficient over the current working set.
///
/// For the first two iterations, or whenever no usable previous difference
/// exists, the coefficient falls back to
/// `max(mu_min, min(1, ‖x_W‖ / ‖∇_W f‖))`; a zero working-set gradient yields
/// 1 (the direction is zero anyway).
pub fn bb_coefficient(
    k: u64,
    x_w: &[f64],
    grad_w: &[f64],
    prev_x_w: Option<&[f64]>,
    prev_grad_w: Option<&[f64]>,
    mu_min: f64,
    mu_max: f64,
) -> f64 {
    let norm = |v: &[f64]| v.iter().map(|&a| a * a).sum::<f64>().sqrt();
    let grad_norm = norm(grad_w);
    let fallback = if grad_norm == 0.0 {
        1.0
    } else {
        mu_min.max(1.0f64.min(norm(x_w) / grad_norm))
    };
    let (prev_x, prev_grad) = match (prev_x_w, prev_grad_w) {
        (Some(px), Some(pg)) if k >= 2 => (px, pg),
        _ => return fallback.clamp(mu_min, mu_max),
    };
    let mut ss = 0.0;
    let mut sy = 0.0;
    let mut yy = 0.0;
    for i in 0..x_w.len() {
        let s = x_w[i] - prev_x[i];
        let y = grad_w[i] - prev_grad[i];
        ss += s * s;
        sy += s * y;
        yy += y * y;
    }
    if ss == 0.0 {
        return fallback.clamp(mu_min, mu_max);
    }
    let mu_a = sy / ss;
    let mu_b = if sy > 0.0 { yy / sy } else { f64::INFINITY };
    bb_safeguard(mu_a, mu_b, fallback, mu_min, mu_max)
}

/// Search direction: `-∇_W f / mu` on the working set, zero elsewhere.
pub fn direction(grad: &[f64], working_set: &[usize], mu: f64) -> Vec<f64> {
    debug_assert!(mu > 0.0);
    let mut d = vec![0.0; grad.len()];
    for &i in working_set {
        d[i] = -grad[i] / mu;
    }
    d
}

#[derive(Debug, Clone)]
pub struct LineSearchResult {
    pub alpha: f64,
    pub x_next: Vec<f64>,
    pub f_next: f64,
    pub trials: u32,
}

/// Non-monotone Armijo line search along `d` from `x`, projecting every
/// trial onto the box: accepts the largest `backtrack^nu` with
/// `f([x + alpha d]♯) <= f_ref + slope_fraction * alpha * slope`.
///
/// `support` lists the indices where `d` may be nonzero, `slope` is
/// `∇f(x)ᵀd` and must be negative.
#[allow(clippy::too_many_arguments)]
pub fn nonmonotone_linesearch<E>(
    mut eval: E,
    x: &[f64],
    d: &[f64],
    support: &[usize],
    box_spec: &BoxSpec,
    f_ref: f64,
    slope: f64,
    backtrack: f64,
    slope_fraction: f64,
    max_steps: u32,
) -> Result<LineSearchResult, SolverError>
where
    E: FnMut(&[f64]) -> Result<f64, SolverError>,
{
    if slope.is_nan() || slope >= 0.0 {
        return Err(SolverError::NotDescent { slope });
    }
    let mut alpha = 1.0;
    let mut trial = x.to_vec();
    for nu in 0..max_steps {
        for &i in support {
            trial[i] = box_spec.clamp(x[i] + alpha * d[i]);
        }
        let f_trial = eval(&trial)?;
        if !f_trial.is_finite() {
            return Err(SolverError::NonFinite {
                what: "line-search objective".into(),
            });
        }
        if f_trial <= f_ref + slope_fraction * alpha * slope {
            return Ok(LineSearchResult {
                alpha,
                x_next: trial,
                f_next: f_trial,
                trials: nu + 1,
            });
        }
        alpha *= backtrack;
    }
    Err(SolverError::LineSearchFailed { steps: max_steps })
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

fn gather(v: &[f64], idx: &[usize]) -> Vec<f64> {
    idx.iter().map(|&i| v[i]).collect()
}

struct Checkpoint {
    x: Vec<f64>,
    grad: Vec<f64>,
    /// Working set and direction computed at the checkpoint iteration,
    /// recorded for backtracking.
    dir: Option<(Vec<usize>, Vec<f64>)>,
}

/// Runs the active-set solver from `x0` (snapped to the box faces first) and
/// thresholds the final point into a community.
pub fn fast_atvo(
    g: &Graph,
    x0: &[f64],
    box_spec: &BoxSpec,
    params: &SolverParams,
) -> Result<ModuleResult, SolverError> {
    params.validate()?;
    let n = g.node_count();
    if x0.len() != n {
        return Err(SolverError::Graph(GraphError::DimensionMismatch {
            expected: n,
            got: x0.len(),
        }));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(SolverError::NonFinite {
            what: "starting point".into(),
        });
    }
    let start_time = Instant::now();
    let p = params.p;
    let eps = params.eps_stationarity;
    let ws_cap = params.working_set_cap(n);
    let budget = params.iteration_budget(n);

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    rng.set_stream(0xA7);

    // Minimization objective: f = -TV^p, gradient held by the cache.
    let mut cache = GradientCache::new(g, p, -1.0)?;
    let mut x = initialize(x0, box_spec);
    cache.refresh(&x)?;

    let f0 = eval_objective(&mut cache, &x, p)?;
    let tv_p_init = -f0;

    let mut telemetry = Telemetry {
        checkpoint_values: vec![f0],
        reference_values: vec![f0],
        trace: params.record_trace.then(Vec::new),
        ..Telemetry::default()
    };

    // Checkpoint state: reference value is the maximum over the most recent
    // window of checkpoint values.
    let mut window: VecDeque<f64> = VecDeque::from([f0]);
    let mut f_ref = f0;
    let mut l_j: u64 = 0;
    let mut checkpoint = Checkpoint {
        x: x.clone(),
        grad: cache.grad().to_vec(),
        dir: None,
    };

    let mut delta = params.delta0;
    let mut k: u64 = 0;
    let mut ws_target = params.ws_start;
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut total_iters: u64 = 0;
    let mut converged = false;
    let mut final_measure;

    loop {
        let violations = violation_profile(&x, cache.grad(), box_spec);
        let measure = violations.iter().fold(0.0f64, |m, &v| m.max(v));
        if !measure.is_finite() {
            return Err(SolverError::NonFinite {
                what: "stationarity measure".into(),
            });
        }
        final_measure = measure;
        if measure <= eps {
            converged = true;
            break;
        }
        if total_iters >= budget {
            break;
        }
        total_iters += 1;
        let k_at_entry = k;
        let fevals_at_entry = cache.counts().fevals;
        let mut control_fired = false;
        let mut backtracked = false;

        let sets = estimate_sets(&x, cache.grad(), box_spec);
        debug_assert!(!sets.free.is_empty(), "non-stationary point with no free variables");

        // Periodic objective control: accept a new checkpoint or backtrack.
        let mut pending_dir: Option<(Vec<usize>, Vec<f64>)> = None;
        if k == l_j + params.control_interval {
            control_fired = true;
            let f_x = eval_objective(&mut cache, &x, p)?;
            if f_x >= f_ref {
                backtracked = true;
                telemetry.backtracks += 1;
                x = checkpoint.x.clone();
                cache.restore(checkpoint.x.clone(), checkpoint.grad.clone());
                k = l_j;
                pending_dir = Some(
                    checkpoint
                        .dir
                        .clone()
                        .expect("checkpoint direction is recorded before any backtrack"),
                );
            } else {
                push_checkpoint(
                    f_x,
                    k,
                    &x,
                    &cache,
                    params.reference_memory,
                    &mut window,
                    &mut f_ref,
                    &mut l_j,
                    &mut checkpoint,
                    &mut telemetry,
                );
            }
        }

        let (w, d) = if let Some(wd) = pending_dir {
            wd
        } else {
            let w = select_working_set(&sets.free, &violations, ws_target, &mut rng);
            let grad_w = gather(cache.grad(), &w);
            debug_assert!(
                grad_w.iter().any(|&gi| gi != 0.0),
                "maximal-violation index carries a zero gradient component"
            );
            let mu = bb_coefficient(
                k,
                &gather(&x, &w),
                &grad_w,
                prev.as_ref().map(|(px, _)| gather(px, &w)).as_deref(),
                prev.as_ref().map(|(_, pg)| gather(pg, &w)).as_deref(),
                params.mu_min,
                params.mu_max,
            );
            if !mu.is_finite() {
                return Err(SolverError::NonFinite {
                    what: "spectral coefficient".into(),
                });
            }
            let d = direction(cache.grad(), &w, mu);
            if k == l_j {
                checkpoint.dir = Some((w.clone(), d.clone()));
            }
            ws_target = ws_target.saturating_mul(2).min(ws_cap);
            (w, d)
        };

        if !backtracked {
            // Unit-step test against the shrinking radius.
            let mut trial = x.clone();
            for &i in &w {
                trial[i] = box_spec.clamp(trial[i] + d[i]);
            }
            let test_norm = match params.unit_step_rule {
                UnitStepRule::ProjectedPointNorm => inf_norm(&trial),
                UnitStepRule::DisplacementNorm => w
                    .iter()
                    .map(|&i| (trial[i] - x[i]).abs())
                    .fold(0.0, f64::max),
            };
            if test_norm <= delta {
                prev = Some((std::mem::take(&mut x), cache.grad().to_vec()));
                cache.update(&trial, &w)?;
                x = trial;
                delta *= params.beta;
                k += 1;
                telemetry.unit_steps += 1;
                record_trace(
                    &mut telemetry,
                    params.record_trace,
                    k_at_entry,
                    &x,
                    1.0,
                    true,
                    control_fired,
                    false,
                    cache.counts().fevals - fevals_at_entry,
                );
                continue;
            }

            // Late objective control before the line search.
            if k != l_j + params.control_interval {
                control_fired = true;
                let f_x = eval_objective(&mut cache, &x, p)?;
                if f_x >= f_ref {
                    backtracked = true;
                    telemetry.backtracks += 1;
                    x = checkpoint.x.clone();
                    cache.restore(checkpoint.x.clone(), checkpoint.grad.clone());
                    k = l_j;
                } else {
                    push_checkpoint(
                        f_x,
                        k,
                        &x,
                        &cache,
                        params.reference_memory,
                        &mut window,
                        &mut f_ref,
                        &mut l_j,
                        &mut checkpoint,
                        &mut telemetry,
                    );
                    checkpoint.dir = Some((w.clone(), d.clone()));
                }
            }
        }

        // Backtracking replaces the step direction with the checkpoint's.
        let (w, d) = if backtracked {
            checkpoint
                .dir
                .clone()
                .expect("checkpoint direction is recorded before any backtrack")
        } else {
            (w, d)
        };

        let x_before = x.clone();
        let grad_before = cache.grad().to_vec();
        let slope: f64 = w.iter().map(|&i| grad_before[i] * d[i]).sum();
        let ls = nonmonotone_linesearch(
            |y: &[f64]| {
                cache.update(y, &w)?;
                eval_objective(&mut cache, y, p)
            },
            &x_before,
            &d,
            &w,
            box_spec,
            f_ref,
            slope,
            params.ls_backtrack,
            params.ls_slope_fraction,
            params.max_ls_steps,
        )?;
        prev = Some((x_before, grad_before));
        x = ls.x_next;
        k += 1;
        telemetry.line_searches += 1;
        record_trace(
            &mut telemetry,
            params.record_trace,
            k_at_entry,
            &x,
            ls.alpha,
            false,
            control_fired,
            backtracked,
            cache.counts().fevals - fevals_at_entry,
        );
    }

    let f_final = eval_objective(&mut cache, &x, p)?;
    let tv_p_final = -f_final;
    debug_assert!(
        tv_p_final >= tv_p_init - 1e-9 * tv_p_init.abs().max(1.0),
        "surrogate value decreased across the run: {tv_p_init} -> {tv_p_final}"
    );
    let tv_final = tv_q(g, &x)?;
    let (community, q_value) = threshold_sweep(g, &x)?;

    let counts = cache.counts();
    telemetry.pair_ops = counts.pair_ops;
    telemetry.grad_full_evals = counts.grad_full;
    telemetry.grad_incremental_evals = counts.grad_incremental;
    telemetry.converged = converged;

    Ok(ModuleResult {
        x_star: x,
        community,
        q_value,
        tv_p_init,
        tv_p_final,
        tv_final,
        stationarity: final_measure,
        iters: total_iters,
        fevals: counts.fevals,
        gevals: counts.gevals(),
        wall_time: start_time.elapsed(),
        seed: params.seed,
        telemetry,
    })
}

/// Objective value from the cached gradient by the Euler identity (`at` must
/// be the cache's tracked point). Linear-time once the gradient is known.
fn eval_objective(
    cache: &mut GradientCache<'_>,
    at: &[f64],
    p: f64,
) -> Result<f64, SolverError> {
    let f = obj_from_grad(cache.grad(), at, p);
    cache.note_feval();
    if !f.is_finite() {
        return Err(SolverError::NonFinite {
            what: "objective value".into(),
        });
    }
    Ok(f)
}

#[allow(clippy::too_many_arguments)]
fn push_checkpoint(
    f_x: f64,
    k: u64,
    x: &[f64],
    cache: &GradientCache,
    memory: usize,
    window: &mut VecDeque<f64>,
    f_ref: &mut f64,
    l_j: &mut u64,
    checkpoint: &mut Checkpoint,
    telemetry: &mut Telemetry,
) {
    window.push_back(f_x);
    while window.len() > memory + 1 {
        window.pop_front();
    }
    *f_ref = window.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
    *l_j = k;
    *checkpoint = Checkpoint {
        x: x.to_vec(),
        grad: cache.grad().to_vec(),
        dir: None,
    };
    telemetry.checkpoint_values.push(f_x);
    telemetry.reference_values.push(*f_ref);
}

#[allow(clippy::too_many_arguments)]
fn record_trace(
    telemetry: &mut Telemetry,
    enabled: bool,
    k: u64,
    x: &[f64],
    alpha: f64,
    unit_step: bool,
    control_fired: bool,
    backtracked: bool,
    fevals_delta: u64,
) {
    if !enabled {
        return;
    }
    if let Some(trace) = telemetry.trace.as_mut() {
        trace.push(IterationTrace {
            k,
            x_after: x.to_vec(),
            alpha,
            unit_step,
            control_fired,
            backtracked,
            fevals_delta,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{barbell, brute_force_max_modularity, planted_two_block};
    use crate::spectral::{leading_eigenvector, PowerIterParams};

    #[test]
    fn project_clamps_and_is_idempotent() {
        let box_spec = BoxSpec::unit();
        let x = [0.0, 2.0, -3.0, 0.5];
        let p1 = project(&x, &box_spec);
        assert_eq!(p1, vec![0.0, 1.0, -1.0, 0.5]);
        assert_eq!(project(&p1, &box_spec), p1);
    }

    #[test]
    fn initialize_snaps_to_faces() {
        let box_spec = BoxSpec::unit();
        assert_eq!(initialize(&[-0.3, 0.2], &box_spec), vec![-1.0, 1.0]);
        assert_eq!(initialize(&[0.0, 0.0], &box_spec), vec![1.0, 1.0]);
        let vertex = [-1.0, 1.0, 1.0];
        assert_eq!(initialize(&vertex, &box_spec), vertex.to_vec());
    }

    #[test]
    fn estimate_sets_partitions() {
        let box_spec = BoxSpec::unit();
        // Interior point: everything free.
        let sets = estimate_sets(&[0.0, 0.5], &[1.0, -1.0], &box_spec);
        assert!(sets.lower.is_empty() && sets.upper.is_empty());
        assert_eq!(sets.free, vec![0, 1]);
        // All at the lower bound with outward gradient.
        let sets = estimate_sets(&[-1.0, -1.0], &[2.0, 0.1], &box_spec);
        assert_eq!(sets.lower, vec![0, 1]);
        assert!(sets.free.is_empty());
        // At the lower bound with non-positive gradient: free.
        let sets = estimate_sets(&[-1.0, 1.0], &[-0.5, -0.5], &box_spec);
        assert_eq!(sets.free, vec![0]);
        assert_eq!(sets.upper, vec![1]);
    }

    #[test]
    fn stationarity_measure_cases() {
        let box_spec = BoxSpec::unit();
        assert_eq!(stationarity_measure(&[0.2, -0.3], &[0.0, 0.0], &box_spec), 0.0);
        // At the lower bound with inward-pushing gradient: stationary.
        assert_eq!(stationarity_measure(&[-1.0, -1.0], &[0.5, 2.0], &box_spec), 0.0);
        // Violation matches the componentwise definition.
        let x = [0.5, -1.0];
        let grad = [0.2, -0.3];
        let expect = (0.5f64 - (0.5 - 0.2)).abs().max((-1.0f64 - (-1.0 + 0.3)).abs());
        assert!((stationarity_measure(&x, &grad, &box_spec) - expect).abs() <= 1e-15);
    }

    #[test]
    fn stationarity_matches_componentwise_conditions() {
        use rand::Rng;
        // The projected-gradient residual agrees with evaluating the three
        // first-order conditions directly, component by component.
        let g = barbell();
        let box_spec = BoxSpec::unit();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..25 {
            let x: Vec<f64> = (0..6)
                .map(|_| {
                    let v: f64 = rng.gen_range(-1.2..1.2);
                    box_spec.clamp(v)
                })
                .collect();
            let tv_grad = crate::objective::grad_full(&g, &x, 1.4).unwrap();
            let grad: Vec<f64> = tv_grad.iter().map(|&v| -v).collect();
            let naive = x
                .iter()
                .zip(&grad)
                .map(|(&xi, &gi)| {
                    let target = xi - gi;
                    let clamped = if target < box_spec.lower() {
                        box_spec.lower()
                    } else if target > box_spec.upper() {
                        box_spec.upper()
                    } else {
                        target
                    };
                    (xi - clamped).abs()
                })
                .fold(0.0f64, f64::max);
            let measure = stationarity_measure(&x, &grad, &box_spec);
            assert!((measure - naive).abs() <= 1e-15);
        }
    }

    #[test]
    fn stabilization_path_is_exercised() {
        // A zero radius rejects every unit step, forcing objective controls,
        // checkpoints and line searches on each iteration; a tiny control
        // interval and reference memory make backtracks reachable.
        let g = planted_two_block(12, 0.85, 0.1, 8);
        let box_spec = BoxSpec::unit();
        let params = SolverParams {
            delta0: 0.0,
            control_interval: 2,
            reference_memory: 3,
            seed: 11,
            record_trace: true,
            ..SolverParams::default()
        };
        let x0: Vec<f64> = (0..12).map(|i| if i % 2 == 0 { 0.5 } else { -0.5 }).collect();
        let res = fast_atvo(&g, &x0, &box_spec, &params).unwrap();
        assert!(res.stationarity <= params.eps_stationarity);
        assert!(res.telemetry.unit_steps == 0);
        assert!(res.telemetry.line_searches > 0);
        assert!(res.telemetry.backtracks > 0);
        assert!(res.telemetry.checkpoint_values.len() > 2);
        assert!(res.tv_p_final >= res.tv_p_init - 1e-9);
        for pair in res.telemetry.reference_values.windows(2) {
            assert!(pair[1] <= pair[0]);
        }
    }

    #[test]
    fn working_set_contains_maximal_violation() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let violations = vec![0.0, 0.1, 0.0, 0.9, 0.0, 0.2, 0.0, 0.3, 0.0, 0.4];
        let free = vec![3, 7, 9];
        let w = select_working_set(&free, &violations, 2, &mut rng);
        assert_eq!(w.len(), 2);
        assert!(w.contains(&3));
        assert!(w.iter().all(|i| free.contains(i)));
        // Singleton candidate set.
        let w = select_working_set(&[5], &violations, 4, &mut rng);
        assert_eq!(w, vec![5]);
    }

    #[test]
    fn working_set_replay_is_deterministic() {
        let violations: Vec<f64> = (0..20).map(|i| i as f64 / 20.0).collect();
        let free: Vec<usize> = (0..20).collect();
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        for target in [2, 4, 8] {
            assert_eq!(
                select_working_set(&free, &violations, target, &mut a),
                select_working_set(&free, &violations, target, &mut b)
            );
        }
    }

    #[test]
    fn bb_identity_curvature_gives_one() {
        let x = [1.0, 2.0];
        let g = [0.5, -0.5];
        let px = [0.0, 1.0];
        // y = s: both differ by the same amounts.
        let pg = [-0.5, -1.5];
        let mu = bb_coefficient(5, &x, &g, Some(&px), Some(&pg), 1e-10, 1e10);
        assert!((mu - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn bb_negative_curvature_uses_fallback() {
        let x = [1.0, 0.0];
        let g = [-1.0, 0.0];
        let px = [0.0, 0.0];
        let pg = [1.0, 0.0]; // s = (1, 0), y = (-2, 0): sᵀy < 0
        let mu = bb_coefficient(5, &x, &g, Some(&px), Some(&pg), 1e-10, 1e10);
        // Fallback: max(mu_min, min(1, ||x_W|| / ||grad_W||)) = 1.
        assert!((mu - 1.0).abs() <= 1e-15);
    }

    #[test]
    fn bb_safeguard_second_branch() {
        let mu = bb_safeguard(1e12, 5.0, 1.0, 1e-10, 1e10);
        assert_eq!(mu, 5.0);
        let mu = bb_safeguard(0.5, f64::INFINITY, 1.0, 1e-10, 1e10);
        assert_eq!(mu, 0.5);
        let mu = bb_safeguard(-3.0, f64::INFINITY, 0.25, 1e-10, 1e10);
        assert_eq!(mu, 0.25);
    }

    #[test]
    fn direction_shape_and_scaling() {
        let grad = vec![1.0, -2.0, 3.0, 0.0];
        let d = direction(&grad, &[1, 2], 1.0);
        assert_eq!(d, vec![0.0, 2.0, -3.0, 0.0]);
        let d_half = direction(&grad, &[1, 2], 0.5);
        for i in 0..4 {
            assert_eq!(d_half[i], 2.0 * d[i]);
        }
        assert_eq!(direction(&[0.0, 0.0], &[0, 1], 2.0), vec![0.0, 0.0]);
    }

    #[test]
    fn linesearch_quadratic_sanity() {
        // f(t) = t² from t = 1 along d = -2 with reference 1: the unit step
        // fails the sufficient-decrease test, the halved step reaches 0.
        let wide = BoxSpec::new(10.0, 10.0).unwrap();
        let res = nonmonotone_linesearch(
            |y: &[f64]| Ok(y[0] * y[0]),
            &[1.0],
            &[-2.0],
            &[0],
            &wide,
            1.0,
            -4.0,
            0.5,
            1e-3,
            30,
        )
        .unwrap();
        assert_eq!(res.alpha, 0.5);
        assert_eq!(res.x_next, vec![0.0]);
        assert_eq!(res.f_next, 0.0);
    }

    #[test]
    fn linesearch_infinite_reference_accepts_unit_step() {
        let wide = BoxSpec::new(10.0, 10.0).unwrap();
        let res = nonmonotone_linesearch(
            |y: &[f64]| Ok(y[0] * y[0]),
            &[1.0],
            &[-2.0],
            &[0],
            &wide,
            f64::INFINITY,
            -4.0,
            0.5,
            1e-3,
            30,
        )
        .unwrap();
        assert_eq!(res.alpha, 1.0);
    }

    #[test]
    fn linesearch_rejects_non_descent() {
        let wide = BoxSpec::unit();
        let err = nonmonotone_linesearch(
            |_: &[f64]| Ok(0.0),
            &[0.0],
            &[0.0],
            &[0],
            &wide,
            1.0,
            0.0,
            0.5,
            1e-3,
            30,
        )
        .unwrap_err();
        assert!(matches!(err, SolverError::NotDescent { .. }));
    }

    #[test]
    fn stationary_start_returns_immediately() {
        let g = barbell();
        let box_spec = BoxSpec::unit();
        // The signed indicator of a triangle is the global maximizer; it is
        // stationary for the surrogate as well.
        let x0 = vec![1.0, 1.0, 1.0, -1.0, -1.0, -1.0];
        let res = fast_atvo(&g, &x0, &box_spec, &SolverParams::default()).unwrap();
        assert_eq!(res.iters, 0);
        assert!(res.stationarity <= 1e-4);
        assert!((res.q_value - 5.0 / 28.0).abs() <= 1e-12);
    }

    #[test]
    fn barbell_from_eigenvector_start_reaches_optimum() {
        let g = barbell();
        let box_spec = BoxSpec::unit();
        let eig = leading_eigenvector(&g, &PowerIterParams::default()).unwrap();
        let res = fast_atvo(&g, &eig.vector, &box_spec, &SolverParams::default()).unwrap();
        let (_, q_star) = brute_force_max_modularity(&g).unwrap();
        assert!(res.telemetry.converged);
        assert!((res.q_value - q_star).abs() <= 1e-12, "q = {}", res.q_value);
        assert!(res.tv_p_final >= res.tv_p_init - 1e-9);
    }

    #[test]
    fn random_starts_satisfy_solver_contract() {
        use rand::Rng;
        let g = planted_two_block(12, 0.85, 0.1, 3);
        let box_spec = BoxSpec::unit();
        let mut params = SolverParams {
            record_trace: true,
            ..SolverParams::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for seed in 0..5 {
            params.seed = seed;
            let x0: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let res = fast_atvo(&g, &x0, &box_spec, &params).unwrap();
            assert!(res.stationarity <= params.eps_stationarity);
            assert!(res.tv_p_final >= res.tv_p_init - 1e-9);
            // Feasibility of every iterate, exactly.
            for step in res.telemetry.trace.as_ref().unwrap() {
                for &v in &step.x_after {
                    assert!(box_spec.contains(v));
                }
            }
            // References never increase.
            for pair in res.telemetry.reference_values.windows(2) {
                assert!(pair[1] <= pair[0] + 1e-15);
            }
            // Checkpoints always improve on the previous reference.
            for (j, &f_j) in res.telemetry.checkpoint_values.iter().enumerate().skip(1) {
                assert!(f_j < res.telemetry.reference_values[j - 1]);
            }
        }
    }

    #[test]
    fn fixed_seed_reproduces_iterates_bitwise() {
        let g = planted_two_block(14, 0.8, 0.1, 5);
        let box_spec = BoxSpec::unit();
        let params = SolverParams {
            seed: 42,
            record_trace: true,
            ..SolverParams::default()
        };
        let x0: Vec<f64> = (0..14).map(|i| if i % 3 == 0 { 0.4 } else { -0.7 }).collect();
        let a = fast_atvo(&g, &x0, &box_spec, &params).unwrap();
        let b = fast_atvo(&g, &x0, &box_spec, &params).unwrap();
        let ta = a.telemetry.trace.unwrap();
        let tb = b.telemetry.trace.unwrap();
        assert_eq!(ta.len(), tb.len());
        for (sa, sb) in ta.iter().zip(&tb) {
            let bits_a: Vec<u64> = sa.x_after.iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = sb.x_after.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b);
        }
    }

    #[test]
    fn unit_steps_skip_function_evaluations() {
        let g = planted_two_block(14, 0.8, 0.1, 2);
        let box_spec = BoxSpec::unit();
        let params = SolverParams {
            record_trace: true,
            ..SolverParams::default()
        };
        // Alternating start, far from the planted split.
        let x0: Vec<f64> = (0..14).map(|i| if i % 2 == 0 { 0.9 } else { -0.9 }).collect();
        let res = fast_atvo(&g, &x0, &box_spec, &params).unwrap();
        let trace = res.telemetry.trace.unwrap();
        assert!(!trace.is_empty());
        for step in &trace {
            if step.unit_step && !step.control_fired {
                assert_eq!(step.fevals_delta, 0);
            }
            if step.unit_step && step.control_fired {
                assert_eq!(step.fevals_delta, 1);
            }
        }
    }

    #[test]
    fn displacement_rule_also_converges() {
        let g = barbell();
        let box_spec = BoxSpec::unit();
        let params = SolverParams {
            unit_step_rule: UnitStepRule::DisplacementNorm,
            delta0: 10.0,
            ..SolverParams::default()
        };
        let x0 = vec![0.3, -0.2, 0.8, -0.5, 0.6, -0.9];
        let res = fast_atvo(&g, &x0, &box_spec, &params).unwrap();
        assert!(res.stationarity <= params.eps_stationarity);
    }

    #[test]
    fn invalid_params_are_rejected() {
        let g = barbell();
        let box_spec = BoxSpec::unit();
        let params = SolverParams {
            p: 1.0,
            ..SolverParams::default()
        };
        assert!(matches!(
            fast_atvo(&g, &[0.0; 6], &box_spec, &params),
            Err(SolverError::InvalidParams(_))
        ));
        let params = SolverParams {
            beta: 1.5,
            ..SolverParams::default()
        };
        assert!(params.validate().is_err());
        let params = SolverParams {
            mu_min: 0.0,
            ..SolverParams::default()
        };
        assert!(params.validate().is_err());
    }
}
