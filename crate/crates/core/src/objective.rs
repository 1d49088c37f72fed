//! The modularity total variation, its smooth power surrogate, and gradient
//! machinery for the solver.
//!
//! For a graph with degrees `d`, volume `vol` and weights `A`, the pair
//! coefficient is `M_ij = d_i d_j / vol - A_ij` (never materialized; evaluated
//! on the fly from the sparse adjacency). The exact objective is
//! `tv_q(x) = 1/2 Σ_ij M_ij |x_i - x_j|` and the smooth surrogate replaces
//! `|·|` with `|·|^p`, `p > 1`. The solver minimizes `f = -TV^p`.

use thiserror::Error;

use crate::graph::Graph;

#[derive(Debug, Error)]
pub enum ObjectiveError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("exponent p = {p} must be > 1")]
    InvalidExponent { p: f64 },
    #[error("gradient cache is not initialized")]
    StaleCache,
    #[error("iterate changed at index {index}, outside the working set")]
    ChangedOutsideWorkingSet { index: usize },
}

fn check_len(g: &Graph, x: &[f64]) -> Result<(), ObjectiveError> {
    if x.len() != g.node_count() {
        return Err(ObjectiveError::DimensionMismatch {
            expected: g.node_count(),
            got: x.len(),
        });
    }
    Ok(())
}

fn check_p(p: f64) -> Result<(), ObjectiveError> {
    if p.is_nan() || p <= 1.0 || !p.is_finite() {
        return Err(ObjectiveError::InvalidExponent { p });
    }
    Ok(())
}

/// Total variation of `x` on the plain adjacency: `1/2 Σ_ij A_ij |x_i - x_j|`.
pub fn tv_graph(g: &Graph, x: &[f64]) -> Result<f64, ObjectiveError> {
    check_len(g, x)?;
    let mut acc = 0.0;
    for i in 0..g.node_count() {
        for (j, w) in g.neighbors(i) {
            if j > i {
                acc += w * (x[i] - x[j]).abs();
            }
        }
    }
    Ok(acc)
}

/// Modularity total variation `1/2 Σ_ij (d_i d_j / vol - A_ij) |x_i - x_j|`.
///
/// The degree part is reduced to prefix sums over the sorted entries of `x`
/// (`O(n log n)`), the adjacency part walks the sparse edges (`O(m)`).
pub fn tv_q(g: &Graph, x: &[f64]) -> Result<f64, ObjectiveError> {
    check_len(g, x)?;
    let n = g.node_count();
    let vol = g.volume();

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]).then(i.cmp(&j)));

    // Σ_{i<j sorted} d_i d_j (x_j - x_i) = Σ_j d_j (x_j D_j - E_j) with
    // D_j, E_j prefix sums of d and d·x in sorted order.
    let mut deg_prefix = 0.0;
    let mut degx_prefix = 0.0;
    let mut degree_part = 0.0;
    for &v in &order {
        let d = g.degree(v);
        degree_part += d * (x[v] * deg_prefix - degx_prefix);
        deg_prefix += d;
        degx_prefix += d * x[v];
    }
    Ok(degree_part / vol - tv_graph(g, x)?)
}

/// Reference evaluation of [`tv_q`] by the full `O(n^2)` pair loop.
pub fn tv_q_naive(g: &Graph, x: &[f64]) -> Result<f64, ObjectiveError> {
    check_len(g, x)?;
    let n = g.node_count();
    let vol = g.volume();
    let mut acc = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let m_ij = g.degree(i) * g.degree(j) / vol - g.weight(i, j);
            acc += m_ij * (x[i] - x[j]).abs();
        }
    }
    Ok(acc)
}

/// Smooth surrogate `Σ_{i<j} M_ij |x_i - x_j|^p`, `p > 1`.
pub fn tv_q_p(g: &Graph, x: &[f64], p: f64) -> Result<f64, ObjectiveError> {
    check_len(g, x)?;
    check_p(p)?;
    let n = g.node_count();
    let vol = g.volume();
    let mut row = vec![0.0f64; n];
    let mut acc = 0.0;
    for i in 0..n {
        for (j, w) in g.neighbors(i) {
            if j > i {
                row[j] = w;
            }
        }
        let di = g.degree(i);
        for j in (i + 1)..n {
            let m_ij = di * g.degree(j) / vol - row[j];
            acc += m_ij * (x[i] - x[j]).abs().powf(p);
        }
        for (j, _) in g.neighbors(i) {
            if j > i {
                row[j] = 0.0;
            }
        }
    }
    Ok(acc)
}

/// Signed power `sign(t) |t|^(p-1)`; zero at `t = 0` since `p > 1`.
#[inline]
fn signed_pow(t: f64, pm1: f64) -> f64 {
    if t == 0.0 {
        0.0
    } else if t > 0.0 {
        t.powf(pm1)
    } else {
        -(-t).powf(pm1)
    }
}

/// Gradient of the smooth surrogate:
/// `∇_i = p Σ_{j≠i} M_ij sign(x_i - x_j) |x_i - x_j|^(p-1)`.
pub fn grad_full(g: &Graph, x: &[f64], p: f64) -> Result<Vec<f64>, ObjectiveError> {
    grad_full_counted(g, x, p, 1.0).map(|(grad, _)| grad)
}

/// Symmetric pair-loop gradient; `sign` scales the result (the solver uses
/// `-1` for its minimization objective). Returns the number of evaluated
/// pair terms alongside the gradient.
fn grad_full_counted(
    g: &Graph,
    x: &[f64],
    p: f64,
    sign: f64,
) -> Result<(Vec<f64>, u64), ObjectiveError> {
    check_len(g, x)?;
    check_p(p)?;
    let n = g.node_count();
    let vol = g.volume();
    let pm1 = p - 1.0;
    let mut row = vec![0.0f64; n];
    let mut grad = vec![0.0f64; n];
    let mut pair_ops = 0u64;
    for i in 0..n {
        for (j, w) in g.neighbors(i) {
            if j > i {
                row[j] = w;
            }
        }
        let di = g.degree(i);
        for j in (i + 1)..n {
            let m_ij = di * g.degree(j) / vol - row[j];
            let t = sign * p * m_ij * signed_pow(x[i] - x[j], pm1);
            grad[i] += t;
            grad[j] -= t;
            pair_ops += 1;
        }
        for (j, _) in g.neighbors(i) {
            if j > i {
                row[j] = 0.0;
            }
        }
    }
    Ok((grad, pair_ops))
}

/// Recovers the objective value from its gradient by the degree-`p` Euler
/// identity: `f(x) = ∇f(x)·x / p`. Exact for any sign convention.
pub fn obj_from_grad(grad: &[f64], x: &[f64], p: f64) -> f64 {
    debug_assert_eq!(grad.len(), x.len());
    let dot: f64 = grad.iter().zip(x).map(|(&gi, &xi)| gi * xi).sum();
    dot / p
}

/// True when the incremental update formula is cheaper than a full
/// recomputation for a working set of `w_len` variables out of `n`.
pub fn prefers_incremental(n: usize, w_len: usize) -> bool {
    // |W| (4n - 3|W| - 1) < n (n - 1), guaranteed by |W| < (n - 1) / 3.
    3 * w_len < n.saturating_sub(1)
}

/// Evaluation counters for complexity checks and solver telemetry.
#[derive(Debug, Default, Clone, Copy)]
pub struct EvalCounts {
    pub fevals: u64,
    pub grad_full: u64,
    pub grad_incremental: u64,
    /// Pair-term evaluations across all gradient computations.
    pub pair_ops: u64,
}

impl EvalCounts {
    pub fn gevals(&self) -> u64 {
        self.grad_full + self.grad_incremental
    }
}

/// Cached gradient of `sign * TV^p` at a tracked iterate.
///
/// Updates restricted to a working set are applied incrementally when that is
/// cheaper than recomputation; a full refresh happens on a fixed schedule to
/// bound floating-point drift.
#[derive(Debug)]
pub struct GradientCache<'g> {
    graph: &'g Graph,
    p: f64,
    sign: f64,
    x: Vec<f64>,
    grad: Vec<f64>,
    valid: bool,
    updates_since_refresh: u32,
    refresh_period: u32,
    counts: EvalCounts,
}

const DEFAULT_REFRESH_PERIOD: u32 = 1000;
#[cfg(debug_assertions)]
const AUDIT_STRIDE: u32 = 257;

impl<'g> GradientCache<'g> {
    pub fn new(graph: &'g Graph, p: f64, sign: f64) -> Result<GradientCache<'g>, ObjectiveError> {
        check_p(p)?;
        Ok(GradientCache {
            graph,
            p,
            sign,
            x: Vec::new(),
            grad: Vec::new(),
            valid: false,
            updates_since_refresh: 0,
            refresh_period: DEFAULT_REFRESH_PERIOD,
            counts: EvalCounts::default(),
        })
    }

    /// Same as [`GradientCache::new`] with a custom full-refresh period
    /// (`u32::MAX` disables scheduled refreshes).
    pub fn with_refresh_period(
        graph: &'g Graph,
        p: f64,
        sign: f64,
        refresh_period: u32,
    ) -> Result<GradientCache<'g>, ObjectiveError> {
        let mut cache = GradientCache::new(graph, p, sign)?;
        cache.refresh_period = refresh_period;
        Ok(cache)
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }

    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    pub fn counts(&self) -> EvalCounts {
        self.counts
    }

    pub fn note_feval(&mut self) {
        self.counts.fevals += 1;
    }

    /// Full gradient computation at `x`.
    pub fn refresh(&mut self, x: &[f64]) -> Result<(), ObjectiveError> {
        let (grad, ops) = grad_full_counted(self.graph, x, self.p, self.sign)?;
        self.x = x.to_vec();
        self.grad = grad;
        self.valid = true;
        self.updates_since_refresh = 0;
        self.counts.grad_full += 1;
        self.counts.pair_ops += ops;
        Ok(())
    }

    /// Installs an externally known `(x, grad)` pair, e.g. a solver
    /// checkpoint. Counts as neither a gradient evaluation nor drift.
    pub fn restore(&mut self, x: Vec<f64>, grad: Vec<f64>) {
        debug_assert_eq!(x.len(), grad.len());
        self.x = x;
        self.grad = grad;
        self.valid = true;
    }

    /// Moves the cache to `x_new`, which may differ from the tracked iterate
    /// only on the indices in `working_set` (ascending). Chooses between the
    /// incremental formula and a full recomputation by the crossover test,
    /// and forces a full refresh on the drift schedule.
    pub fn update(&mut self, x_new: &[f64], working_set: &[usize]) -> Result<(), ObjectiveError> {
        if !self.valid {
            return Err(ObjectiveError::StaleCache);
        }
        check_len(self.graph, x_new)?;
        let n = self.graph.node_count();
        let mut in_w = vec![false; n];
        for &i in working_set {
            in_w[i] = true;
        }
        if let Some(idx) = (0..n).find(|&i| !in_w[i] && x_new[i] != self.x[i]) {
            return Err(ObjectiveError::ChangedOutsideWorkingSet { index: idx });
        }
        if !prefers_incremental(n, working_set.len())
            || self.updates_since_refresh >= self.refresh_period
        {
            return self.refresh(x_new);
        }
        self.update_incremental(x_new, working_set, &in_w)?;
        self.updates_since_refresh += 1;

        #[cfg(debug_assertions)]
        if self.updates_since_refresh.is_multiple_of(AUDIT_STRIDE) {
            self.audit();
        }
        Ok(())
    }

    /// Incremental move: for `i` in the working set the component is rebuilt
    /// from scratch; outside it only the interaction with the working set is
    /// corrected, `∇_i(new) = ∇_i(old) + φ_i(new) - φ_i(old)` where `φ_i`
    /// sums pair terms against working-set variables.
    fn update_incremental(
        &mut self,
        x_new: &[f64],
        working_set: &[usize],
        in_w: &[bool],
    ) -> Result<(), ObjectiveError> {
        let n = self.graph.node_count();
        let vol = self.graph.volume();
        let p = self.p;
        let pm1 = p - 1.0;
        let sign = self.sign;

        let x_old = &self.x;
        let mut pair_ops = 0u64;
        let mut row = vec![0.0f64; n];
        let mut new_w_grad = vec![0.0f64; working_set.len()];

        for (wi, &i) in working_set.iter().enumerate() {
            for (j, w) in self.graph.neighbors(i) {
                row[j] = w;
            }
            let di = self.graph.degree(i);
            // Pairs inside the working set, each evaluated once.
            for (wj, &j) in working_set.iter().enumerate().skip(wi + 1) {
                let m_ij = di * self.graph.degree(j) / vol - row[j];
                let t = sign * p * m_ij * signed_pow(x_new[i] - x_new[j], pm1);
                new_w_grad[wi] += t;
                new_w_grad[wj] -= t;
                pair_ops += 1;
            }
            // Pairs with exactly one endpoint in the working set: both the
            // new and the old term are needed (the old one corrects ∇_j).
            for j in 0..n {
                if in_w[j] || j == i {
                    continue;
                }
                let m_ij = di * self.graph.degree(j) / vol - row[j];
                let t_new = sign * p * m_ij * signed_pow(x_new[i] - x_new[j], pm1);
                let t_old = sign * p * m_ij * signed_pow(x_old[i] - x_old[j], pm1);
                pair_ops += 2;
                new_w_grad[wi] += t_new;
                self.grad[j] += t_old - t_new;
            }
            for (j, _) in self.graph.neighbors(i) {
                row[j] = 0.0;
            }
        }
        for (wi, &i) in working_set.iter().enumerate() {
            self.grad[i] = new_w_grad[wi];
        }
        for &i in working_set {
            self.x[i] = x_new[i];
        }
        self.counts.grad_incremental += 1;
        self.counts.pair_ops += pair_ops;
        Ok(())
    }

    #[cfg(debug_assertions)]
    fn audit(&self) {
        let (exact, _) = grad_full_counted(self.graph, &self.x, self.p, self.sign)
            .expect("audit recomputation");
        let scale = exact
            .iter()
            .fold(0.0f64, |m, &v| m.max(v.abs()))
            .max(1e-30);
        for (i, (&got, &want)) in self.grad.iter().zip(&exact).enumerate() {
            assert!(
                (got - want).abs() <= 1e-9 * scale,
                "gradient cache drift at component {i}: {got} vs {want}"
            );
        }
    }
}
