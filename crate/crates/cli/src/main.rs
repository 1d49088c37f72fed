//! Command-line front end: load a graph, run one of the methods
//! (linear | fastatvo | multistart | ps), and emit JSON records, optional
//! node-set files and CSV summaries.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use modtv::global::{multistart, partition_and_swap, GlobalParams};
use modtv::graph::{
    load_graph_detailed, modularity, threshold_sweep, BoxSpec, Graph, GraphFormat, Indexing,
    LoadReport, NodeSet,
};
use modtv::objective::tv_q;
use modtv::oracles;
use modtv::solver::{fast_atvo, ModuleResult, SolverParams};
use modtv::spectral::{leading_eigenvector, PowerIterParams};

const SCHEMA_VERSION: u32 = 1;

// Exit codes: 2 is taken by clap for usage errors.
const EXIT_LOAD: u8 = 3;
const EXIT_PARAMS: u8 = 4;
const EXIT_SOLVER: u8 = 5;
const EXIT_OUTPUT: u8 = 6;
const EXIT_CHECK_FAILED: u8 = 1;

#[derive(Debug)]
struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn new(code: u8, message: impl Into<String>) -> CliError {
        CliError {
            code,
            message: message.into(),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Parser)]
#[command(
    name = "modtv",
    about = "Leading-community detection by box-constrained total variation maximization",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one method on one graph and print a JSON record.
    Solve(SolveArgs),
    /// Run a method x seed matrix over one or more graphs and aggregate.
    Bench(BenchArgs),
    /// Run the brute-force verification checks on a small graph (n <= 20).
    Oracle(OracleArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Auto,
    EdgeList,
    MatrixMarket,
}

impl From<FormatArg> for GraphFormat {
    fn from(f: FormatArg) -> GraphFormat {
        match f {
            FormatArg::Auto => GraphFormat::Auto,
            FormatArg::EdgeList => GraphFormat::EdgeList,
            FormatArg::MatrixMarket => GraphFormat::MatrixMarket,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum IndexingArg {
    Auto,
    ZeroBased,
    OneBased,
}

impl From<IndexingArg> for Indexing {
    fn from(ix: IndexingArg) -> Indexing {
        match ix {
            IndexingArg::Auto => Indexing::Auto,
            IndexingArg::ZeroBased => Indexing::ZeroBased,
            IndexingArg::OneBased => Indexing::OneBased,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Method {
    Linear,
    Fastatvo,
    Multistart,
    Ps,
}

impl Method {
    fn name(self) -> &'static str {
        match self {
            Method::Linear => "linear",
            Method::Fastatvo => "fastatvo",
            Method::Multistart => "multistart",
            Method::Ps => "ps",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum StartArg {
    Linear,
    Random,
    File,
}

#[derive(Args, Debug, Clone)]
struct CommonParams {
    /// Surrogate exponent (> 1).
    #[arg(long, default_value_t = 1.4)]
    p: f64,
    /// Lower-bound magnitude of the box [-a, b].
    #[arg(long, default_value_t = 1.0)]
    a: f64,
    /// Upper bound of the box [-a, b].
    #[arg(long, default_value_t = 1.0)]
    b: f64,
    /// Base random seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Stationarity tolerance (infinity norm).
    #[arg(long, default_value_t = 1e-4)]
    eps: f64,
    /// Solver iteration budget (default: min(10 n, 1e6)).
    #[arg(long)]
    max_iters: Option<u64>,
    /// Outer iterations of partition-and-swap.
    #[arg(long, default_value_t = 10)]
    ps_iters: usize,
    /// Swap percentage in [0, 100].
    #[arg(long, default_value_t = 75.0)]
    sigma: f64,
    /// Multistart restart count.
    #[arg(long, default_value_t = 10)]
    restarts: usize,
}

impl CommonParams {
    fn box_spec(&self) -> CliResult<BoxSpec> {
        BoxSpec::new(self.a, self.b)
            .map_err(|e| CliError::new(EXIT_PARAMS, format!("invalid box: {e}")))
    }

    fn solver_params(&self, seed: u64) -> CliResult<SolverParams> {
        let params = SolverParams {
            p: self.p,
            eps_stationarity: self.eps,
            max_iters: self.max_iters,
            seed,
            ..SolverParams::default()
        };
        params
            .validate()
            .map_err(|e| CliError::new(EXIT_PARAMS, e.to_string()))?;
        Ok(params)
    }

    fn global_params(&self, seed: u64) -> CliResult<GlobalParams> {
        let params = GlobalParams {
            sigma: self.sigma,
            ps_iters: self.ps_iters,
            restarts: self.restarts,
            seed,
            ..GlobalParams::default()
        };
        params
            .validate()
            .map_err(|e| CliError::new(EXIT_PARAMS, e.to_string()))?;
        Ok(params)
    }
}

#[derive(Args, Debug)]
struct SolveArgs {
    /// Graph file.
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Auto)]
    format: FormatArg,
    #[arg(long, value_enum, default_value_t = IndexingArg::Auto)]
    indexing: IndexingArg,
    #[arg(long, value_enum, default_value_t = Method::Fastatvo)]
    method: Method,
    /// Starting point (default: linear eigenvector). Not valid for
    /// multistart, which draws its own random starts.
    #[arg(long, value_enum)]
    start: Option<StartArg>,
    /// Vector file for --start file (one value per node).
    #[arg(long)]
    start_file: Option<PathBuf>,
    #[command(flatten)]
    params: CommonParams,
    /// Write the JSON record here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Write the community as one node id per line (input indexing).
    #[arg(long)]
    community_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Graph files (repeatable).
    #[arg(long, required = true)]
    graph: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Auto)]
    format: FormatArg,
    #[arg(long, value_enum, default_value_t = IndexingArg::Auto)]
    indexing: IndexingArg,
    /// Methods to run (default: all four).
    #[arg(long, value_enum)]
    methods: Vec<Method>,
    /// Number of seeds per (graph, method) cell; seeds are seed..seed+N.
    #[arg(long, default_value_t = 10)]
    seeds: u64,
    #[command(flatten)]
    params: CommonParams,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write aggregate rows as CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct OracleArgs {
    /// Graph file (n <= 20).
    #[arg(long)]
    graph: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Auto)]
    format: FormatArg,
    #[arg(long, value_enum, default_value_t = IndexingArg::Auto)]
    indexing: IndexingArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Serialize, Debug, Clone)]
struct ParamsEcho {
    p: f64,
    a: f64,
    b: f64,
    eps: f64,
    max_iters: Option<u64>,
    ps_iters: usize,
    sigma: f64,
    restarts: usize,
    start: String,
}

#[derive(Serialize, Debug, Clone)]
struct RunRecord {
    schema_version: u32,
    dataset: String,
    n: usize,
    m: usize,
    method: String,
    seed: u64,
    params: ParamsEcho,
    q: f64,
    community_size: usize,
    community_fraction: f64,
    tv_q_final: f64,
    stationarity: Option<f64>,
    iters: u64,
    fevals: Option<u64>,
    gevals: Option<u64>,
    converged: bool,
    wall_time_ms: f64,
    load_time_ms: f64,
}

#[derive(Serialize, Debug)]
struct Aggregate {
    dataset: String,
    method: String,
    seeds: u64,
    q_mean: f64,
    q_std: f64,
    community_fraction_mean: f64,
    wall_time_ms_mean: f64,
}

#[derive(Serialize, Debug)]
struct BenchOutput {
    schema_version: u32,
    records: Vec<RunRecord>,
    aggregates: Vec<Aggregate>,
}

#[derive(Serialize, Debug)]
struct OracleCheck {
    name: String,
    pass: bool,
    detail: String,
}

#[derive(Serialize, Debug)]
struct OracleReport {
    schema_version: u32,
    dataset: String,
    n: usize,
    m: usize,
    all_pass: bool,
    checks: Vec<OracleCheck>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Solve(args) => run_solve(args),
        Command::Bench(args) => run_bench(args),
        Command::Oracle(args) => run_oracle(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message);
            ExitCode::from(err.code)
        }
    }
}

fn load(
    path: &PathBuf,
    format: FormatArg,
    indexing: IndexingArg,
) -> CliResult<(Graph, LoadReport, f64)> {
    let t0 = Instant::now();
    let (graph, report) = load_graph_detailed(path, format.into(), indexing.into())
        .map_err(|e| CliError::new(EXIT_LOAD, format!("{}: {e}", path.display())))?;
    Ok((graph, report, t0.elapsed().as_secs_f64() * 1e3))
}

fn write_output(path: &Option<PathBuf>, content: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, content)
            .map_err(|e| CliError::new(EXIT_OUTPUT, format!("writing {}: {e}", p.display()))),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(content.as_bytes())
                .map_err(|e| CliError::new(EXIT_OUTPUT, format!("writing stdout: {e}")))
        }
    }
}

fn read_start_file(path: &PathBuf, n: usize) -> CliResult<Vec<f64>> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::new(EXIT_LOAD, format!("{}: {e}", path.display())))?;
    let values: Result<Vec<f64>, _> = text.split_whitespace().map(str::parse::<f64>).collect();
    let values = values.map_err(|e| CliError::new(EXIT_PARAMS, format!("start file: {e}")))?;
    if values.len() != n {
        return Err(CliError::new(
            EXIT_PARAMS,
            format!("start file has {} values, graph has {n} nodes", values.len()),
        ));
    }
    Ok(values)
}

fn random_start(n: usize, box_spec: &BoxSpec, seed: u64) -> Vec<f64> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0xC1);
    (0..n)
        .map(|_| rng.gen_range(box_spec.lower()..=box_spec.upper()))
        .collect()
}

fn starting_point(
    g: &Graph,
    box_spec: &BoxSpec,
    start: StartArg,
    start_file: &Option<PathBuf>,
    seed: u64,
) -> CliResult<Vec<f64>> {
    match start {
        StartArg::Linear => {
            let params = PowerIterParams {
                seed,
                ..PowerIterParams::default()
            };
            let eig = leading_eigenvector(g, &params)
                .map_err(|e| CliError::new(EXIT_SOLVER, e.to_string()))?;
            Ok(eig.vector)
        }
        StartArg::Random => Ok(random_start(g.node_count(), box_spec, seed)),
        StartArg::File => {
            let path = start_file.as_ref().ok_or_else(|| {
                CliError::new(EXIT_PARAMS, "--start file requires --start-file PATH")
            })?;
            read_start_file(path, g.node_count())
        }
    }
}

struct MethodOutcome {
    x: Vec<f64>,
    community: NodeSet,
    q: f64,
    stationarity: Option<f64>,
    iters: u64,
    fevals: Option<u64>,
    gevals: Option<u64>,
    converged: bool,
}

impl MethodOutcome {
    fn from_solver(res: ModuleResult) -> MethodOutcome {
        MethodOutcome {
            q: res.q_value,
            stationarity: Some(res.stationarity),
            iters: res.iters,
            fevals: Some(res.fevals),
            gevals: Some(res.gevals),
            converged: res.telemetry.converged,
            community: res.community,
            x: res.x_star,
        }
    }
}

fn run_method(
    g: &Graph,
    box_spec: &BoxSpec,
    method: Method,
    start: Option<StartArg>,
    start_file: &Option<PathBuf>,
    common: &CommonParams,
    seed: u64,
) -> CliResult<MethodOutcome> {
    if method == Method::Multistart && start.is_some() {
        return Err(CliError::new(
            EXIT_PARAMS,
            "--start has no effect on multistart (it draws its own random starts)",
        ));
    }
    if method == Method::Linear && start.is_some() {
        return Err(CliError::new(
            EXIT_PARAMS,
            "--start has no effect on the linear method",
        ));
    }
    let start_kind = start.unwrap_or(StartArg::Linear);
    match method {
        Method::Linear => {
            let params = PowerIterParams {
                seed,
                ..PowerIterParams::default()
            };
            let eig = leading_eigenvector(g, &params)
                .map_err(|e| CliError::new(EXIT_SOLVER, e.to_string()))?;
            let (community, q) = threshold_sweep(g, &eig.vector)
                .map_err(|e| CliError::new(EXIT_SOLVER, e.to_string()))?;
            Ok(MethodOutcome {
                q,
                stationarity: None,
                iters: eig.iterations as u64,
                fevals: None,
                gevals: None,
                converged: eig.converged,
                community,
                x: eig.vector,
            })
        }
        Method::Fastatvo => {
            let x0 = starting_point(g, box_spec, start_kind, start_file, seed)?;
            let res = fast_atvo(g, &x0, box_spec, &common.solver_params(seed)?)
                .map_err(|e| CliError::new(EXIT_SOLVER, e.to_string()))?;
            Ok(MethodOutcome::from_solver(res))
        }
        Method::Ps => {
            let x0 = starting_point(g, box_spec, start_kind, start_file, seed)?;
            let gp = common.global_params(seed)?;
            let search = partition_and_swap(g, &x0, box_spec, &common.solver_params(seed)?, &gp)
                .map_err(|e| CliError::new(EXIT_SOLVER, e.to_string()))?;
            Ok(MethodOutcome::from_solver(search.best))
        }
        Method::Multistart => {
            let gp = common.global_params(seed)?;
            let search = multistart(g, box_spec, &common.solver_params(seed)?, &gp)
                .map_err(|e| CliError::new(EXIT_SOLVER, e.to_string()))?;
            Ok(MethodOutcome::from_solver(search.best))
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn make_record(
    dataset: &str,
    g: &Graph,
    method: Method,
    seed: u64,
    common: &CommonParams,
    start: Option<StartArg>,
    outcome: &MethodOutcome,
    wall_time_ms: f64,
    load_time_ms: f64,
) -> RunRecord {
    let n = g.node_count();
    let tv_final = tv_q(g, &outcome.x).unwrap_or(f64::NAN);
    RunRecord {
        schema_version: SCHEMA_VERSION,
        dataset: dataset.to_string(),
        n,
        m: g.edge_count(),
        method: method.name().to_string(),
        seed,
        params: ParamsEcho {
            p: common.p,
            a: common.a,
            b: common.b,
            eps: common.eps,
            max_iters: common.max_iters,
            ps_iters: common.ps_iters,
            sigma: common.sigma,
            restarts: common.restarts,
            start: match (method, start) {
                (Method::Linear | Method::Multistart, _) => "n/a".into(),
                (_, Some(StartArg::Random)) => "random".into(),
                (_, Some(StartArg::File)) => "file".into(),
                _ => "linear".into(),
            },
        },
        q: outcome.q,
        community_size: outcome.community.len(),
        community_fraction: outcome.community.len() as f64 / n as f64,
        tv_q_final: tv_final,
        stationarity: outcome.stationarity,
        iters: outcome.iters,
        fevals: outcome.fevals,
        gevals: outcome.gevals,
        converged: outcome.converged,
        wall_time_ms,
        load_time_ms,
    }
}

fn run_solve(args: SolveArgs) -> CliResult<()> {
    let (graph, report, load_time_ms) = load(&args.graph, args.format, args.indexing)?;
    let box_spec = args.params.box_spec()?;
    let t0 = Instant::now();
    let outcome = run_method(
        &graph,
        &box_spec,
        args.method,
        args.start,
        &args.start_file,
        &args.params,
        args.params.seed,
    )?;
    let wall_time_ms = t0.elapsed().as_secs_f64() * 1e3;

    if let Some(path) = &args.community_out {
        let offset = report.indexing.output_offset();
        let mut text = String::new();
        for &i in outcome.community.indices() {
            writeln!(text, "{}", i + offset).unwrap();
        }
        fs::write(path, text)
            .map_err(|e| CliError::new(EXIT_OUTPUT, format!("writing {}: {e}", path.display())))?;
    }

    let record = make_record(
        &args.graph.display().to_string(),
        &graph,
        args.method,
        args.params.seed,
        &args.params,
        args.start,
        &outcome,
        wall_time_ms,
        load_time_ms,
    );
    let json = serde_json::to_string_pretty(&record)
        .map_err(|e| CliError::new(EXIT_OUTPUT, e.to_string()))?;
    write_output(&args.out, &format!("{json}\n"))
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn run_bench(args: BenchArgs) -> CliResult<()> {
    let methods = if args.methods.is_empty() {
        vec![
            Method::Linear,
            Method::Fastatvo,
            Method::Multistart,
            Method::Ps,
        ]
    } else {
        args.methods.clone()
    };
    if args.seeds == 0 {
        return Err(CliError::new(EXIT_PARAMS, "--seeds must be >= 1"));
    }
    args.params.box_spec()?;
    args.params.solver_params(0)?;
    args.params.global_params(0)?;

    let mut graphs = Vec::new();
    for path in &args.graph {
        let (g, report, load_ms) = load(path, args.format, args.indexing)?;
        let _ = report;
        graphs.push((path.display().to_string(), g, load_ms));
    }

    // One cell per (graph, method, seed); cells run in parallel, each run
    // stays single-threaded and seed-deterministic.
    let mut cells = Vec::new();
    for (gi, _) in graphs.iter().enumerate() {
        for &method in &methods {
            for s in 0..args.seeds {
                cells.push((gi, method, args.params.seed + s));
            }
        }
    }
    let records: Result<Vec<RunRecord>, CliError> = cells
        .par_iter()
        .map(|&(gi, method, seed)| {
            let (name, g, load_ms) = &graphs[gi];
            let box_spec = args.params.box_spec()?;
            let t0 = Instant::now();
            let outcome = run_method(g, &box_spec, method, None, &None, &args.params, seed)?;
            let wall = t0.elapsed().as_secs_f64() * 1e3;
            Ok(make_record(
                name,
                g,
                method,
                seed,
                &args.params,
                None,
                &outcome,
                wall,
                *load_ms,
            ))
        })
        .collect();
    let records = records?;

    let mut aggregates = Vec::new();
    for (name, _, _) in &graphs {
        for &method in &methods {
            let cell: Vec<&RunRecord> = records
                .iter()
                .filter(|r| &r.dataset == name && r.method == method.name())
                .collect();
            let (q_mean, q_std) = mean_std(&cell.iter().map(|r| r.q).collect::<Vec<_>>());
            let (frac_mean, _) =
                mean_std(&cell.iter().map(|r| r.community_fraction).collect::<Vec<_>>());
            let (time_mean, _) =
                mean_std(&cell.iter().map(|r| r.wall_time_ms).collect::<Vec<_>>());
            aggregates.push(Aggregate {
                dataset: name.clone(),
                method: method.name().to_string(),
                seeds: args.seeds,
                q_mean,
                q_std,
                community_fraction_mean: frac_mean,
                wall_time_ms_mean: time_mean,
            });
        }
    }

    if let Some(csv_path) = &args.csv {
        let mut csv = String::from(
            "dataset,method,seeds,q_mean,q_std,community_fraction_mean,wall_time_ms_mean\n",
        );
        for a in &aggregates {
            writeln!(
                csv,
                "{},{},{},{},{},{},{}",
                a.dataset,
                a.method,
                a.seeds,
                a.q_mean,
                a.q_std,
                a.community_fraction_mean,
                a.wall_time_ms_mean
            )
            .unwrap();
        }
        fs::write(csv_path, csv).map_err(|e| {
            CliError::new(EXIT_OUTPUT, format!("writing {}: {e}", csv_path.display()))
        })?;
    }

    let output = BenchOutput {
        schema_version: SCHEMA_VERSION,
        records,
        aggregates,
    };
    let json = serde_json::to_string_pretty(&output)
        .map_err(|e| CliError::new(EXIT_OUTPUT, e.to_string()))?;
    write_output(&args.out, &format!("{json}\n"))
}

fn run_oracle(args: OracleArgs) -> CliResult<()> {
    use rand::{Rng, SeedableRng};
    let (graph, _, _) = load(&args.graph, args.format, args.indexing)?;
    let n = graph.node_count();
    let mut checks = Vec::new();

    let (set, q_star) = oracles::brute_force_max_modularity(&graph)
        .map_err(|e| CliError::new(EXIT_PARAMS, e.to_string()))?;
    checks.push(OracleCheck {
        name: "leading-module".into(),
        pass: q_star >= 0.0,
        detail: format!("Q* = {q_star:.6} on {} nodes", set.len()),
    });

    for (a, b) in [(1.0, 1.0), (2.0, 3.0), (0.5, 1.0)] {
        let box_spec = BoxSpec::new(a, b).unwrap();
        let vertex = oracles::vertex_max_tv(&graph, &box_spec)
            .map_err(|e| CliError::new(EXIT_PARAMS, e.to_string()))?;
        let identity = graph.volume() * (a + b) * q_star;
        let pass = (vertex - identity).abs() <= 1e-9 * identity.abs().max(1.0);
        checks.push(OracleCheck {
            name: format!("box-relaxation a={a} b={b}"),
            pass,
            detail: format!("vertex max {vertex:.6}, vol(a+b)Q* = {identity:.6}"),
        });
    }

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(args.seed);
    let mut worst_lovasz: f64 = 0.0;
    let mut worst_sweep: f64 = 0.0;
    for _ in 0..20 {
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let f_q = oracles::lovasz_extension(n, |s| modularity(&graph, s), &x);
        let tv = tv_q(&graph, &x).unwrap();
        worst_lovasz = worst_lovasz.max((f_q * graph.volume() - tv).abs() / tv.abs().max(1.0));

        let (_, q_sweep) = threshold_sweep(&graph, &x).unwrap();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&i, &j| x[i].total_cmp(&x[j]).then(i.cmp(&j)));
        let mut best = f64::NEG_INFINITY;
        for t in 1..n {
            let thr = x[order[t]];
            let members: Vec<usize> = (0..n).filter(|&k| x[k] >= thr).collect();
            best = best.max(modularity(&graph, &NodeSet::from_indices(n, &members).unwrap()));
        }
        worst_sweep = worst_sweep.max((q_sweep - best).abs());
    }
    checks.push(OracleCheck {
        name: "lovasz-extension".into(),
        pass: worst_lovasz <= 1e-10,
        detail: format!("max relative error {worst_lovasz:.3e} over 20 random vectors"),
    });
    checks.push(OracleCheck {
        name: "threshold-sweep".into(),
        pass: worst_sweep <= 1e-12,
        detail: format!("max deviation from naive level-set maximum {worst_sweep:.3e}"),
    });

    let all_pass = checks.iter().all(|c| c.pass);
    let report = OracleReport {
        schema_version: SCHEMA_VERSION,
        dataset: args.graph.display().to_string(),
        n,
        m: graph.edge_count(),
        all_pass,
        checks,
    };
    let json = serde_json::to_string_pretty(&report)
        .map_err(|e| CliError::new(EXIT_OUTPUT, e.to_string()))?;
    write_output(&args.out, &format!("{json}\n"))?;
    if !all_pass {
        return Err(CliError::new(EXIT_CHECK_FAILED, "oracle checks failed"));
    }
    Ok(())
}
