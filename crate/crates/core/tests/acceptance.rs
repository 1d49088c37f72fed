//! Acceptance suite: one test per criterion, each printing a PASS/FAIL line
//! (run with `cargo test --test acceptance -- --nocapture` to see them).

use modtv::global::{partition_and_swap, GlobalParams};
use modtv::graph::{load_graph, modularity, threshold_sweep, BoxSpec, GraphFormat, Indexing, NodeSet};
use modtv::objective::{grad_full, obj_from_grad, tv_q, tv_q_p, GradientCache};
use modtv::oracles::{
    barbell, brute_force_max_modularity, cut_weight, erdos_renyi, finite_diff_gradient,
    lovasz_extension, planted_two_block, vertex_max_tv,
};
use modtv::solver::{fast_atvo, SolverParams};
use modtv::spectral::{leading_eigenvector, PowerIterParams};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn report(name: &str, pass: bool, detail: &str) {
    println!(
        "ACCEPTANCE {name}: {} — {detail}",
        if pass { "PASS" } else { "FAIL" }
    );
    assert!(pass, "{name} failed: {detail}");
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, &x| m.max(x.abs()))
}

/// Vector with pairwise-distinct components: a shuffled uniform grid on
/// [-1, 1] with jitter below a quarter of the grid gap.
fn distinct_point(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let gap = 2.0 / n as f64;
    let mut values: Vec<f64> = (0..n)
        .map(|i| -1.0 + gap * i as f64 + rng.gen_range(0.0..gap / 4.0))
        .collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        values.swap(i, j);
    }
    values
}

/// Criterion 1: box-vertex maximum of the exact total variation equals
/// `vol (a + b) Q*` on random small graphs, for several boxes, within 1e-9.
#[test]
fn criterion_1_vertex_relaxation_identity() {
    let boxes = [
        BoxSpec::new(1.0, 1.0).unwrap(),
        BoxSpec::new(2.0, 3.0).unwrap(),
        BoxSpec::new(0.5, 1.0).unwrap(),
    ];
    let mut graphs = Vec::new();
    for seed in 0..25u64 {
        let n = 4 + (seed as usize * 5) % 11; // 4..=14
        graphs.push(erdos_renyi(n, 0.3, seed));
        let n = 6 + (seed as usize * 3) % 9; // 6..=14
        graphs.push(planted_two_block(n, 0.8, 0.15, seed));
    }
    let mut worst: f64 = 0.0;
    for g in &graphs {
        let (_, q_star) = brute_force_max_modularity(g).unwrap();
        for b in &boxes {
            let vertex = vertex_max_tv(g, b).unwrap();
            let identity = g.volume() * (b.a() + b.b()) * q_star;
            worst = worst.max((vertex - identity).abs());
        }
    }
    report(
        "criterion 1 (exact box relaxation)",
        worst <= 1e-9,
        &format!(
            "{} graphs x {} boxes, max |vertex_max_tv - vol(a+b)Q*| = {worst:.3e} (tol 1e-9)",
            graphs.len(),
            boxes.len()
        ),
    );
}

/// Criterion 2: the Lovász/total-variation identities hold on 200 random
/// instances with n <= 32, within 1e-10 relative.
#[test]
fn criterion_2_lovasz_tv_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst: f64 = 0.0;
    for case in 0..200u64 {
        let n = 4 + (case as usize * 7) % 29; // 4..=32
        let g = if case % 2 == 0 {
            erdos_renyi(n, 0.3, case)
        } else {
            planted_two_block(n, 0.7, 0.15, case)
        };
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();

        // Cut-function extension equals the plain-adjacency total variation.
        let f_k = lovasz_extension(n, |s| cut_weight(&g, s), &x);
        let tv_g = modtv::objective::tv_graph(&g, &x).unwrap();
        worst = worst.max((f_k - tv_g).abs() / tv_g.abs().max(1.0));

        // Modularity extension equals the signed total variation over volume.
        let f_q = lovasz_extension(n, |s| modularity(&g, s), &x);
        let tv = tv_q(&g, &x).unwrap();
        worst = worst.max((f_q * g.volume() - tv).abs() / tv.abs().max(1.0));

        // Two-valued vectors: TV = vol |a - b| Q(S).
        let bits: u64 = rng.gen();
        let members: Vec<usize> = (0..n).filter(|&i| bits >> (i % 64) & 1 == 1).collect();
        let s = NodeSet::from_indices(n, &members).unwrap();
        let a = rng.gen_range(-2.0..2.0);
        let b = rng.gen_range(-2.0..2.0);
        let two_valued: Vec<f64> = (0..n).map(|i| if s.contains(i) { a } else { b }).collect();
        let tv2 = tv_q(&g, &two_valued).unwrap();
        let expect = g.volume() * (a - b).abs() * modularity(&g, &s);
        worst = worst.max((tv2 - expect).abs() / expect.abs().max(1.0));
    }
    report(
        "criterion 2 (Lovász/TV identities)",
        worst <= 1e-10,
        &format!("200 instances, max relative error {worst:.3e} (tol 1e-10)"),
    );
}

/// Criterion 3: gradient against central differences; incremental gradient
/// drift after 1000 updates; value recovery from the gradient.
#[test]
fn criterion_3_gradient_correctness() {
    let mut rng = ChaCha8Rng::seed_from_u64(3033);
    let graphs = [barbell(), erdos_renyi(12, 0.35, 1), planted_two_block(10, 0.8, 0.1, 2)];

    // Finite differences at 100 random distinct-component points.
    let mut worst_fd: f64 = 0.0;
    for case in 0..100 {
        let g = &graphs[case % graphs.len()];
        let n = g.node_count();
        let x = distinct_point(n, &mut rng);
        for &p in &[1.2, 1.4, 2.0] {
            let grad = grad_full(g, &x, p).unwrap();
            let fd = finite_diff_gradient(g, &x, p, 1e-6).unwrap();
            let scale = inf_norm(&grad).max(1e-12);
            for i in 0..n {
                let rel = (grad[i] - fd[i]).abs() / grad[i].abs().max(1e-2 * scale);
                worst_fd = worst_fd.max(rel);
            }
        }
    }

    // Incremental vs full after 1000 random working-set updates, with the
    // scheduled refresh disabled so raw drift is measured.
    let g = erdos_renyi(24, 0.3, 9);
    let n = g.node_count();
    let mut x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut raw = GradientCache::with_refresh_period(&g, 1.4, -1.0, u32::MAX).unwrap();
    let mut scheduled = GradientCache::new(&g, 1.4, -1.0).unwrap();
    raw.refresh(&x).unwrap();
    scheduled.refresh(&x).unwrap();
    for _ in 0..1000 {
        let size = rng.gen_range(1..=5);
        let mut w: Vec<usize> = (0..size).map(|_| rng.gen_range(0..n)).collect();
        w.sort_unstable();
        w.dedup();
        for &i in &w {
            x[i] = rng.gen_range(-1.0..1.0);
        }
        raw.update(&x, &w).unwrap();
        scheduled.update(&x, &w).unwrap();
    }
    let full = grad_full(&g, &x, 1.4).unwrap();
    let scale = inf_norm(&full).max(1e-12);
    let drift_raw = raw
        .grad()
        .iter()
        .zip(&full)
        .map(|(&got, &want)| (got + want).abs()) // cache sign is -1
        .fold(0.0, f64::max)
        / scale;
    let drift_scheduled = scheduled
        .grad()
        .iter()
        .zip(&full)
        .map(|(&got, &want)| (got + want).abs())
        .fold(0.0, f64::max)
        / scale;

    // Objective from gradient vs direct evaluation.
    let mut worst_euler: f64 = 0.0;
    for case in 0..50 {
        let g = &graphs[case % graphs.len()];
        let n = g.node_count();
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for &p in &[1.2, 1.4, 2.0] {
            let grad = grad_full(g, &x, p).unwrap();
            let via = obj_from_grad(&grad, &x, p);
            let direct = tv_q_p(g, &x, p).unwrap();
            worst_euler = worst_euler.max((via - direct).abs() / direct.abs().max(1.0));
        }
    }

    let pass = worst_fd <= 1e-5 && drift_raw <= 1e-8 && drift_scheduled <= 1e-8
        && worst_euler <= 1e-10;
    report(
        "criterion 3 (gradient correctness)",
        pass,
        &format!(
            "FD max rel {worst_fd:.3e} (tol 1e-5); drift after 1000 updates raw {drift_raw:.3e}, \
             scheduled {drift_scheduled:.3e} (tol 1e-8); value-from-gradient {worst_euler:.3e} (tol 1e-10)"
        ),
    );
}

/// Criterion 4: solver contract — feasibility, stationarity at exit, no
/// surrogate decrease, nonincreasing references, bitwise seed reproducibility.
#[test]
fn criterion_4_solver_contract() {
    let box_spec = BoxSpec::unit();
    let runs: Vec<(modtv::graph::Graph, u64)> = vec![
        (barbell(), 1),
        (barbell(), 2),
        (planted_two_block(12, 0.85, 0.1, 3), 3),
        (planted_two_block(14, 0.8, 0.1, 4), 4),
        (erdos_renyi(16, 0.3, 5), 5),
        (erdos_renyi(10, 0.4, 6), 6),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(4044);
    let mut checked = 0;
    for (g, seed) in &runs {
        let n = g.node_count();
        let params = SolverParams {
            seed: *seed,
            record_trace: true,
            ..SolverParams::default()
        };
        let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let res = fast_atvo(g, &x0, &box_spec, &params).unwrap();

        assert!(res.stationarity <= 1e-4, "stationarity {}", res.stationarity);
        assert!(
            res.tv_p_final >= res.tv_p_init - 1e-9,
            "surrogate decreased: {} -> {}",
            res.tv_p_init,
            res.tv_p_final
        );
        let trace = res.telemetry.trace.as_ref().unwrap();
        for step in trace {
            for &v in &step.x_after {
                assert!(box_spec.contains(v), "iterate leaves the box");
            }
        }
        for pair in res.telemetry.reference_values.windows(2) {
            assert!(pair[1] <= pair[0], "reference increased");
        }

        // Bound-variable identification at the returned point: estimated
        // active variables sit exactly on their bound with the matching
        // gradient sign, and the community matches a fresh threshold sweep.
        let tv_grad = grad_full(g, &res.x_star, params.p).unwrap();
        let grad_f: Vec<f64> = tv_grad.iter().map(|&v| -v).collect();
        let sets = modtv::solver::estimate_sets(&res.x_star, &grad_f, &box_spec);
        for &i in &sets.lower {
            assert!(res.x_star[i] == box_spec.lower() && grad_f[i] > 0.0);
        }
        for &i in &sets.upper {
            assert!(res.x_star[i] == box_spec.upper() && grad_f[i] < 0.0);
        }
        let (community, q) = threshold_sweep(g, &res.x_star).unwrap();
        assert_eq!(community.indices(), res.community.indices());
        assert!((q - res.q_value).abs() <= 1e-15);

        // Bitwise reproducibility of the whole iterate sequence.
        let rerun = fast_atvo(g, &x0, &box_spec, &params).unwrap();
        let t2 = rerun.telemetry.trace.as_ref().unwrap();
        assert_eq!(trace.len(), t2.len());
        for (a, b) in trace.iter().zip(t2) {
            let bits_a: Vec<u64> = a.x_after.iter().map(|v| v.to_bits()).collect();
            let bits_b: Vec<u64> = b.x_after.iter().map(|v| v.to_bits()).collect();
            assert_eq!(bits_a, bits_b, "trace diverged between identical runs");
        }
        checked += 1;
    }
    report(
        "criterion 4 (solver contract)",
        checked == runs.len(),
        &format!("{checked} runs: feasible iterates, stationarity <= 1e-4, no surrogate decrease, nonincreasing references, bitwise reproducible"),
    );
}

/// Criterion 5: partition-and-swap with budget 10 recovers the brute-force
/// optimum on the barbell and on at least 18 of 20 strongly planted graphs.
#[test]
fn criterion_5_global_optimum_recovery() {
    let box_spec = BoxSpec::unit();
    let sp = SolverParams::default();

    let run_ps = |g: &modtv::graph::Graph, seed: u64| -> f64 {
        let eig = leading_eigenvector(g, &PowerIterParams::default()).unwrap();
        let gp = GlobalParams {
            ps_iters: 10,
            seed,
            ..GlobalParams::default()
        };
        partition_and_swap(g, &eig.vector, &box_spec, &sp, &gp)
            .unwrap()
            .best
            .q_value
    };

    let g = barbell();
    let (_, q_star) = brute_force_max_modularity(&g).unwrap();
    let q_ps = run_ps(&g, 7);
    assert!(
        (q_ps - q_star).abs() <= 1e-9,
        "barbell: PS reached {q_ps}, optimum {q_star}"
    );

    let mut hits = 0;
    for seed in 0..20u64 {
        let n = 8 + (seed as usize % 7); // 8..=14
        let g = planted_two_block(n, 0.9, 0.05, seed + 100);
        let (_, q_star) = brute_force_max_modularity(&g).unwrap();
        let q_ps = run_ps(&g, seed);
        if (q_ps - q_star).abs() <= 1e-9 {
            hits += 1;
        }
    }
    report(
        "criterion 5 (global optimum recovery)",
        hits >= 18,
        &format!("barbell exact; planted instances solved {hits}/20 (need >= 18)"),
    );
}

/// Criterion 6: starting the solver from the linear eigenvector does not fall
/// below plain eigenvector thresholding on at least 18 of 20 planted graphs
/// with n = 200.
#[test]
fn criterion_6_baseline_dominance() {
    let box_spec = BoxSpec::unit();
    let mut wins = 0;
    for seed in 0..20u64 {
        let g = planted_two_block(200, 0.15, 0.03, seed + 500);
        let eig = leading_eigenvector(&g, &PowerIterParams::default()).unwrap();
        let (_, q_linear) = threshold_sweep(&g, &eig.vector).unwrap();
        let params = SolverParams {
            seed,
            ..SolverParams::default()
        };
        let res = fast_atvo(&g, &eig.vector, &box_spec, &params).unwrap();
        if res.q_value >= q_linear - 1e-12 {
            wins += 1;
        }
    }
    report(
        "criterion 6 (dominance over the linear baseline)",
        wins >= 18,
        &format!("solver >= linear thresholding on {wins}/20 planted graphs (need >= 18)"),
    );
}

/// Criterion 7: instrumented pair-term counters follow the incremental cost
/// formula, which sits within a factor of two of the full cost at
/// `|W| = (n - 1) / 3`.
#[test]
fn criterion_7_complexity_crossover() {
    let n = 2000usize;
    let g = erdos_renyi(n, 0.005, 71);
    let mut rng = ChaCha8Rng::seed_from_u64(7077);
    let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();

    let mut cache = GradientCache::with_refresh_period(&g, 1.4, -1.0, u32::MAX).unwrap();
    cache.refresh(&x).unwrap();
    let full_cost = cache.counts().pair_ops;
    assert_eq!(full_cost, (n * (n - 1) / 2) as u64);

    let w_len = (n - 1) / 3;
    let mut w: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        w.swap(i, j);
    }
    let mut w: Vec<usize> = w.into_iter().take(w_len).collect();
    w.sort_unstable();
    let mut y = x.clone();
    for &i in &w {
        y[i] = rng.gen_range(-1.0..1.0);
    }
    let before = cache.counts().pair_ops;
    cache.update(&y, &w).unwrap();
    let incremental_cost = cache.counts().pair_ops - before;
    assert_eq!(cache.counts().grad_incremental, 1, "incremental path not taken");

    let formula = (w_len * (4 * n - 3 * w_len - 1) / 2) as u64;
    let ratio = incremental_cost as f64 / full_cost as f64;
    let pass = incremental_cost == formula && (0.5..=2.0).contains(&ratio);
    report(
        "criterion 7 (complexity crossover)",
        pass,
        &format!(
            "n = {n}, |W| = {w_len}: incremental {incremental_cost} ops (formula {formula}), \
             full {full_cost} ops, ratio {ratio:.4} within [0.5, 2]"
        ),
    );
}

/// Criterion 8 (optional extended run, not part of the default gate): on a
/// public dataset supplied via MODTV_DATASET, the solver started from the
/// linear eigenvector reaches Q in 0.40 ± 0.05 and at least 1.2x the linear
/// baseline.
#[test]
#[ignore = "extended check; set MODTV_DATASET to a 7343-node collaboration network edge list"]
fn criterion_8_extended_public_dataset() {
    let path = match std::env::var("MODTV_DATASET") {
        Ok(p) => p,
        Err(_) => {
            println!("ACCEPTANCE criterion 8 (extended): SKIP — MODTV_DATASET not set");
            return;
        }
    };
    let g = load_graph(&path, GraphFormat::Auto, Indexing::Auto).unwrap();
    let eig = leading_eigenvector(&g, &PowerIterParams::default()).unwrap();
    let (_, q_linear) = threshold_sweep(&g, &eig.vector).unwrap();
    let res = fast_atvo(&g, &eig.vector, &BoxSpec::unit(), &SolverParams::default()).unwrap();
    let ratio = res.q_value / q_linear;
    let pass = (res.q_value - 0.40).abs() <= 0.05 && ratio >= 1.2;
    report(
        "criterion 8 (extended public dataset)",
        pass,
        &format!(
            "n = {}, Q_F = {:.4} (target 0.40 ± 0.05), Q_F/Q_linear = {ratio:.2} (need >= 1.2)",
            g.node_count(),
            res.q_value
        ),
    );
}
