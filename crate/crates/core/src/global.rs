//! Global search strategies around the local solver: the swap perturbation,
//! the partition-and-swap iterated local search, and plain multistart.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::graph::{BoxSpec, Graph};
use crate::objective::tv_q;
use crate::solver::{fast_atvo, ModuleResult, SolverError, SolverParams};

#[derive(Debug, Error)]
pub enum GlobalError {
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("invalid parameter: {0}")]
    InvalidParams(String),
}

/// Acceptance rule for a perturbed-and-resolved candidate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsAcceptance {
    /// Accept when the candidate has a larger exact total variation
    /// (consistent with maximizing it). The default.
    LargerTv,
    /// Accept when the candidate has a smaller total variation; selectable
    /// for comparing against the maximizing rule.
    SmallerTv,
}

/// Global-search settings.
#[derive(Debug, Clone)]
pub struct GlobalParams {
    /// Percentage of each sign class flipped by the swap perturbation.
    pub sigma: f64,
    /// Outer iterations of partition-and-swap.
    pub ps_iters: usize,
    /// Number of multistart runs.
    pub restarts: usize,
    pub seed: u64,
    pub acceptance: PsAcceptance,
}

impl Default for GlobalParams {
    fn default() -> Self {
        GlobalParams {
            sigma: 75.0,
            ps_iters: 10,
            restarts: 10,
            seed: 0,
            acceptance: PsAcceptance::LargerTv,
        }
    }
}

impl GlobalParams {
    pub fn validate(&self) -> Result<(), GlobalError> {
        if !(0.0..=100.0).contains(&self.sigma) {
            return Err(GlobalError::InvalidParams(format!(
                "sigma = {} must lie in [0, 100]",
                self.sigma
            )));
        }
        if self.restarts < 1 {
            return Err(GlobalError::InvalidParams(
                "restarts must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// One outer iteration of partition-and-swap.
#[derive(Debug, Clone)]
pub struct OuterIteration {
    pub tv_candidate: f64,
    pub tv_incumbent: f64,
    pub accepted: bool,
}

/// Result of a global search: the best run plus per-iteration history.
#[derive(Debug, Clone)]
pub struct SearchResult {
    pub best: ModuleResult,
    /// Exact total variation of the incumbent after the initial solve and
    /// after every outer iteration; nondecreasing under [`PsAcceptance::LargerTv`].
    pub incumbent_tv: Vec<f64>,
    pub outer: Vec<OuterIteration>,
}

/// Swap perturbation: flips a fixed percentage of each sign class of `x` to
/// the opposite box face.
///
/// Indices with `x_i < 0` form the lower class and `x_i >= 0` the upper class
/// (zeros count as upper, keeping the classes disjoint). `floor(sigma% of
/// class size)` members of each class, at least one when the class is
/// nonempty and `sigma > 0`, are chosen uniformly without replacement and set
/// to the opposite bound exactly.
pub fn swap(x: &[f64], sigma: f64, box_spec: &BoxSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    debug_assert!((0.0..=100.0).contains(&sigma));
    let lower_class: Vec<usize> = (0..x.len()).filter(|&i| x[i] < 0.0).collect();
    let upper_class: Vec<usize> = (0..x.len()).filter(|&i| x[i] >= 0.0).collect();
    let picks = |len: usize| -> usize {
        if sigma == 0.0 || len == 0 {
            0
        } else {
            ((sigma / 100.0 * len as f64).floor() as usize).max(1)
        }
    };
    let mut y = x.to_vec();
    let take_lower = picks(lower_class.len());
    for k in rand::seq::index::sample(rng, lower_class.len(), take_lower) {
        y[lower_class[k]] = box_spec.upper();
    }
    let take_upper = picks(upper_class.len());
    for k in rand::seq::index::sample(rng, upper_class.len(), take_upper) {
        y[upper_class[k]] = box_spec.lower();
    }
    y
}

fn solver_params_with_seed(sp: &SolverParams, seed: u64) -> SolverParams {
    let mut params = sp.clone();
    params.seed = seed;
    params
}

/// Iterated local search: solve, then repeatedly perturb the incumbent with
/// [`swap`] and re-solve, keeping the candidate when the acceptance rule
/// fires. Returns the best point by exact total variation with per-iteration
/// history.
pub fn partition_and_swap(
    g: &Graph,
    x0: &[f64],
    box_spec: &BoxSpec,
    sp: &SolverParams,
    gp: &GlobalParams,
) -> Result<SearchResult, GlobalError> {
    gp.validate()?;
    let mut seed_rng = ChaCha8Rng::seed_from_u64(gp.seed);
    seed_rng.set_stream(0x95);
    let mut swap_rng = ChaCha8Rng::seed_from_u64(gp.seed);
    swap_rng.set_stream(0x5A);

    use rand::Rng;
    let mut incumbent = fast_atvo(g, x0, box_spec, &solver_params_with_seed(sp, seed_rng.gen()))?;
    let mut incumbent_tv = tv_q(g, &incumbent.x_star).map_err(SolverError::from)?;
    let mut history = vec![incumbent_tv];
    let mut outer = Vec::with_capacity(gp.ps_iters);

    for _ in 0..gp.ps_iters {
        let perturbed = swap(&incumbent.x_star, gp.sigma, box_spec, &mut swap_rng);
        let candidate = fast_atvo(
            g,
            &perturbed,
            box_spec,
            &solver_params_with_seed(sp, seed_rng.gen()),
        )?;
        let tv_candidate = tv_q(g, &candidate.x_star).map_err(SolverError::from)?;
        let accepted = match gp.acceptance {
            PsAcceptance::LargerTv => tv_candidate > incumbent_tv,
            PsAcceptance::SmallerTv => tv_candidate < incumbent_tv,
        };
        if accepted {
            incumbent = candidate;
            incumbent_tv = tv_candidate;
        }
        history.push(incumbent_tv);
        outer.push(OuterIteration {
            tv_candidate,
            tv_incumbent: incumbent_tv,
            accepted,
        });
    }
    Ok(SearchResult {
        best: incumbent,
        incumbent_tv: history,
        outer,
    })
}

/// Multistart: independent solver runs from uniform-random feasible points,
/// executed in parallel, keeping the best by exact total variation. Run
/// seeds derive from `gp.seed` in restart order, so a longer run extends a
/// shorter one.
pub fn multistart(
    g: &Graph,
    box_spec: &BoxSpec,
    sp: &SolverParams,
    gp: &GlobalParams,
) -> Result<SearchResult, GlobalError> {
    gp.validate()?;
    use rand::Rng;
    let mut seed_rng = ChaCha8Rng::seed_from_u64(gp.seed);
    seed_rng.set_stream(0x35);
    let run_seeds: Vec<u64> = (0..gp.restarts).map(|_| seed_rng.gen()).collect();

    let runs: Result<Vec<(ModuleResult, f64)>, GlobalError> = run_seeds
        .into_par_iter()
        .map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(0x30);
            let x0: Vec<f64> = (0..g.node_count())
                .map(|_| rng.gen_range(box_spec.lower()..=box_spec.upper()))
                .collect();
            let result = fast_atvo(g, &x0, box_spec, &solver_params_with_seed(sp, seed))?;
            let tv = tv_q(g, &result.x_star).map_err(SolverError::from)?;
            Ok((result, tv))
        })
        .collect();
    let runs = runs?;

    let mut history = Vec::with_capacity(runs.len());
    let mut best_idx = 0;
    let mut best_tv = f64::NEG_INFINITY;
    for (i, (_, tv)) in runs.iter().enumerate() {
        if *tv > best_tv {
            best_tv = *tv;
            best_idx = i;
        }
        history.push(best_tv);
    }
    let outer = runs
        .iter()
        .zip(&history)
        .map(|((_, tv), &inc)| OuterIteration {
            tv_candidate: *tv,
            tv_incumbent: inc,
            accepted: *tv == inc,
        })
        .collect();
    let best = runs.into_iter().nth(best_idx).expect("restarts >= 1").0;
    Ok(SearchResult {
        best,
        incumbent_tv: history,
        outer,
    })
}
