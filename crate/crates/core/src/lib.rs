//! Community detection by maximizing the modularity total variation over a box.
//!
//! The library finds a leading module (a single high-modularity node set) of an
//! undirected weighted graph. The combinatorial problem is solved through its
//! continuous counterpart: the modularity total variation is maximized over the
//! box `[-a, b]^n` with an active-set projected-gradient solver, optionally
//! wrapped in a partition-and-swap global search, and the continuous solution
//! is turned back into a node set by an optimal threshold sweep.
//!
//! Modules:
//! - [`graph`]: graph loading, modularity of a node set, threshold sweep;
//! - [`objective`]: the smooth surrogate objective, its gradients and caches;
//! - [`solver`]: the active-set first-order solver;
//! - [`global`]: swap perturbation, partition-and-swap, multistart;
//! - [`spectral`]: leading eigenvector of the modularity operator;
//! - [`oracles`]: brute-force and analytic reference implementations.

pub mod global;
pub mod graph;
pub mod objective;
pub mod oracles;
pub mod solver;
pub mod spectral;

pub use graph::{load_graph, modularity, threshold_sweep, BoxSpec, Graph, NodeSet};
pub use objective::{grad_full, obj_from_grad, tv_q, tv_q_p, GradientCache};
pub use solver::{fast_atvo, ModuleResult, SolverParams};
pub use global::{multistart, partition_and_swap, GlobalParams};
pub use spectral::{leading_eigenvector, modularity_matvec, PowerIterParams};
