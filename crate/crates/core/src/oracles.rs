//! Brute-force and analytic reference implementations.
//!
//! Everything here trades speed for being independently checkable: exhaustive
//! subset enumeration, the Lovász extension evaluated from its definition,
//! central finite differences and a dense matrix operator. These functions
//! anchor the property tests of the fast paths and are also reachable through
//! the command-line `oracle` subcommand.

use thiserror::Error;

use crate::graph::{BoxSpec, Graph, GraphError, NodeSet};
use crate::objective::tv_q_p;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Exhaustive enumeration is capped at `2^20` subsets.
pub const ENUMERATION_CAP: usize = 20;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("graph with {n} nodes exceeds the enumeration cap of {cap}")]
    TooLarge { n: usize, cap: usize },
    #[error("components of x must be pairwise at least {min_gap} apart (found gap {gap})")]
    SpacingViolated { min_gap: f64, gap: f64 },
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Objective(#[from] crate::objective::ObjectiveError),
}

/// Lovász extension of the set function `f`, evaluated from its definition.
///
/// With `x` sorted ascending (ties by index) and `C_i` the suffix level sets,
/// the value is `Σ_{i=1}^{n-1} f(C_{i+1}) (x_(i+1) - x_(i)) + f(V) x_(1)`.
pub fn lovasz_extension<F>(n: usize, f: F, x: &[f64]) -> f64
where
    F: Fn(&NodeSet) -> f64,
{
    assert_eq!(x.len(), n, "vector length must equal the universe size");
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| x[i].total_cmp(&x[j]).then(i.cmp(&j)));
    let mut acc = f(&NodeSet::full(n)) * x[order[0]];
    for t in 1..n {
        let gap = x[order[t]] - x[order[t - 1]];
        if gap != 0.0 {
            let level = NodeSet::from_indices(n, &order[t..]).expect("indices in range");
            acc += f(&level) * gap;
        }
    }
    acc
}

/// Cut weight `Σ_{i in S, j not in S} A_ij`.
pub fn cut_weight(g: &Graph, s: &NodeSet) -> f64 {
    let mut acc = 0.0;
    for &i in s.indices() {
        for (j, w) in g.neighbors(i) {
            if !s.contains(j) {
                acc += w;
            }
        }
    }
    acc
}

fn check_cap(n: usize) -> Result<(), OracleError> {
    if n > ENUMERATION_CAP {
        return Err(OracleError::TooLarge {
            n,
            cap: ENUMERATION_CAP,
        });
    }
    Ok(())
}

/// Exact leading module by enumerating all `2^n` subsets (n <= 20).
///
/// Consecutive subsets follow a Gray code so each step flips one node and the
/// inside weight and degree sum update in `O(deg)`.
pub fn brute_force_max_modularity(g: &Graph) -> Result<(NodeSet, f64), OracleError> {
    let n = g.node_count();
    check_cap(n)?;
    let vol = g.volume();
    let mut in_set = vec![false; n];
    let mut inside = 0.0;
    let mut deg_sum = 0.0;
    let mut best_q = 0.0; // empty set
    let mut best_mask = 0u32;
    let total: u64 = 1 << n;
    for s in 1..total {
        let flip = (s.trailing_zeros()) as usize; // Gray code bit change
        if in_set[flip] {
            in_set[flip] = false;
            for (j, w) in g.neighbors(flip) {
                if in_set[j] {
                    inside -= 2.0 * w;
                } else if j == flip {
                    inside -= w;
                }
            }
            deg_sum -= g.degree(flip);
        } else {
            for (j, w) in g.neighbors(flip) {
                if in_set[j] {
                    inside += 2.0 * w;
                } else if j == flip {
                    inside += w;
                }
            }
            deg_sum += g.degree(flip);
            in_set[flip] = true;
        }
        let q = (inside - deg_sum * deg_sum / vol) / vol;
        if q > best_q {
            best_q = q;
            best_mask = in_set
                .iter()
                .enumerate()
                .fold(0u32, |m, (i, &b)| if b { m | 1 << i } else { m });
        }
    }
    let members: Vec<usize> = (0..n).filter(|&i| best_mask >> i & 1 == 1).collect();
    Ok((NodeSet::from_indices(n, &members)?, best_q))
}

/// Maximum of the exact total variation over all `2^n` box vertices
/// `b·1_S - a·1_S̄`, checked on the fly against the volume-scaled leading
/// modularity (the two quantities agree identically).
pub fn vertex_max_tv(g: &Graph, box_spec: &BoxSpec) -> Result<f64, OracleError> {
    let n = g.node_count();
    check_cap(n)?;
    let mut best = f64::NEG_INFINITY;
    for mask in 0u64..(1 << n) {
        let x: Vec<f64> = (0..n)
            .map(|i| {
                if mask >> i & 1 == 1 {
                    box_spec.upper()
                } else {
                    box_spec.lower()
                }
            })
            .collect();
        let v = crate::objective::tv_q_naive(g, &x)?;
        best = best.max(v);
    }
    let (_, q_max) = brute_force_max_modularity(g)?;
    let identity = g.volume() * (box_spec.a() + box_spec.b()) * q_max;
    assert!(
        (best - identity).abs() <= 1e-9 * identity.abs().max(1.0),
        "vertex maximum {best} disagrees with volume-scaled modularity {identity}"
    );
    Ok(best)
}

/// Central finite differences of the smooth surrogate.
///
/// Components of `x` must be pairwise at least `10 h` apart so every pair
/// term stays on one side of its kink across the stencil.
pub fn finite_diff_gradient(
    g: &Graph,
    x: &[f64],
    p: f64,
    h: f64,
) -> Result<Vec<f64>, OracleError> {
    let n = g.node_count();
    let mut sorted: Vec<f64> = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    for w in sorted.windows(2) {
        let gap = w[1] - w[0];
        if gap < 10.0 * h {
            return Err(OracleError::SpacingViolated {
                min_gap: 10.0 * h,
                gap,
            });
        }
    }
    let mut grad = vec![0.0; n];
    let mut probe = x.to_vec();
    for i in 0..n {
        probe[i] = x[i] + h;
        let plus = tv_q_p(g, &probe, p)?;
        probe[i] = x[i] - h;
        let minus = tv_q_p(g, &probe, p)?;
        probe[i] = x[i];
        grad[i] = (plus - minus) / (2.0 * h);
    }
    Ok(grad)
}

/// Dense modularity operator `(A - d dᵀ / vol) v`, materialized row by row.
pub fn dense_modularity_matvec(g: &Graph, v: &[f64]) -> Vec<f64> {
    let n = g.node_count();
    assert_eq!(v.len(), n);
    let vol = g.volume();
    let mut out = vec![0.0; n];
    for (i, out_i) in out.iter_mut().enumerate() {
        let mut acc = 0.0;
        for (j, &v_j) in v.iter().enumerate() {
            let b_ij = g.weight(i, j) - g.degree(i) * g.degree(j) / vol;
            acc += b_ij * v_j;
        }
        *out_i = acc;
    }
    out
}

// ---------------------------------------------------------------------------
// Test corpus
// ---------------------------------------------------------------------------

/// Two triangles `{0,1,2}` and `{3,4,5}` joined by the edge `2-3`. Degrees
/// `(2,2,3,3,2,2)`, volume 14; the leading module is either triangle with
/// `Q = 5/28`.
pub fn barbell() -> Graph {
    Graph::from_edges(
        6,
        &[
            (0, 1, 1.0),
            (1, 2, 1.0),
            (2, 0, 1.0),
            (3, 4, 1.0),
            (4, 5, 1.0),
            (5, 3, 1.0),
            (2, 3, 1.0),
        ],
    )
    .unwrap()
}

/// Erdős–Rényi `G(n, p)` with unit weights. A single fallback edge keeps the
/// graph loadable when the draw comes out empty.
pub fn erdos_renyi(n: usize, p: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0xE5);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            if rng.gen_bool(p) {
                edges.push((i, j, 1.0));
            }
        }
    }
    if edges.is_empty() {
        edges.push((0, 1.min(n - 1), 1.0));
    }
    Graph::from_edges(n, &edges).expect("generated graph is valid")
}

/// Two planted blocks `[0, n/2)` and `[n/2, n)` with in-block edge
/// probability `p_in` and cross probability `p_out`.
pub fn planted_two_block(n: usize, p_in: f64, p_out: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0xB1);
    let half = n / 2;
    let mut edges = Vec::new();
    for i in 0..n {
        for j in (i + 1)..n {
            let same = (i < half) == (j < half);
            let p = if same { p_in } else { p_out };
            if rng.gen_bool(p) {
                edges.push((i, j, 1.0));
            }
        }
    }
    if edges.is_empty() {
        edges.push((0, 1.min(n - 1), 1.0));
    }
    Graph::from_edges(n, &edges).expect("generated graph is valid")
}
