//! `gsvrg` command-line tool.

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gsvrg::graph::{grid_graph, spanning_forest_weight, Graph, WgmModel};
use gsvrg::harness::{
    default_design_variance, default_observations, emit_plot, gen_instance_with_variance, output_path, read_traces,
    run_sweep, write_traces, BatchSize, ExperimentSpec, TraceRow, TraceSet, XAxis,
};
use gsvrg::pcsf::{forest_objective, solve_pcsf, PcsfInstance};
use gsvrg::projection::{exact_project, head_project, tail_project, HEAD_SLACK, TAIL_SLACK};
use gsvrg::solver::{run, support_of, Method, RunOptions, ScsgOption};
use gsvrg::theory::{contraction_params, estimate_rsc_rss, eta_range, EtaRange};
use gsvrg::{Dataset, GradientAccount};

#[derive(Parser, Debug)]
#[command(name = "gsvrg", version, about = "Graph-structured sparse recovery with variance-reduced hard thresholding")]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Solve one synthetic instance and print the final residual and support.
    Synth(SynthArgs),
    /// Run an experiment sweep and write its trace CSV.
    Sweep(SweepArgs),
    /// Apply a head, tail or exact projection to a vector file.
    Project(ProjectArgs),
    /// Print RSC/RSS constants, the learning-rate interval and contraction constants.
    Theory(TheoryArgs),
    /// Render a trace CSV as an SVG plot.
    Plot(PlotArgs),
    /// Solve one prize-collecting Steiner forest instance.
    #[command(name = "pcsf-debug")]
    PcsfDebug(PcsfArgs),
}

#[derive(Args, Debug)]
#[command(rename_all = "snake_case")]
struct Common {
    /// Random seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
}

/// Graph source: an edge-list file, or a `rows x cols` grid.
#[derive(Args, Debug)]
#[command(rename_all = "snake_case")]
struct GraphArgs {
    /// Edge-list file; overrides the grid.
    #[arg(long)]
    graph: Option<PathBuf>,
    #[arg(long, default_value_t = 16)]
    rows: usize,
    #[arg(long, default_value_t = 16)]
    cols: usize,
}

impl GraphArgs {
    fn load(&self) -> Result<Graph, CliError> {
        match &self.graph {
            Some(path) => Graph::load_edge_list(path).map_err(CliError::usage),
            None => grid_graph(self.rows, self.cols).map_err(CliError::usage),
        }
    }
}

#[derive(Args, Debug)]
#[command(rename_all = "snake_case")]
struct SynthArgs {
    #[arg(long, default_value = "graph-svrg")]
    method: Method,
    #[arg(long, default_value_t = 32)]
    s: usize,
    #[arg(long, default_value_t = 1)]
    g: usize,
    #[arg(long, default_value_t = 0.01)]
    eta: f64,
    #[arg(long, default_value_t = 16)]
    rows: usize,
    #[arg(long, default_value_t = 16)]
    cols: usize,
    /// Observations; default max(60, ceil(2.5 s)).
    #[arg(long)]
    m: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    /// Design entry variance; default 1/m.
    #[arg(long)]
    variance: Option<f64>,
    /// Outer batch size: a count, `s`, `n` or `n/k`.
    #[arg(long = "B", default_value = "s")]
    big_b: BatchSize,
    /// Inner mini-batch size.
    #[arg(long = "b", default_value_t = 1)]
    small_b: usize,
    #[arg(long, default_value_t = 50.0)]
    epochs: f64,
    #[arg(long, default_value_t = 1e-10)]
    residual_stop: f64,
    #[arg(long, default_value = "fixed")]
    scsg_option: ScsgOption,
    #[command(flatten)]
    common: Common,
}

/// Sweep flags mirror the spec-file keys and override them.
#[derive(Args, Debug)]
#[command(rename_all = "snake_case")]
struct SweepArgs {
    /// Experiment spec file (`key = value` lines).
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Concurrent runs.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[arg(long)]
    rows: Option<String>,
    #[arg(long)]
    cols: Option<String>,
    /// Comma-separated sparsities.
    #[arg(long)]
    s: Option<String>,
    #[arg(long)]
    g: Option<String>,
    /// Comma-separated learning rates.
    #[arg(long)]
    eta: Option<String>,
    /// Comma-separated method names.
    #[arg(long)]
    methods: Option<String>,
    /// Comma-separated outer batch sizes.
    #[arg(long = "B")]
    big_b: Option<String>,
    /// Comma-separated mini-batch sizes.
    #[arg(long = "b")]
    small_b: Option<String>,
    #[arg(long)]
    m: Option<String>,
    #[arg(long)]
    noise: Option<String>,
    #[arg(long)]
    trials: Option<String>,
    /// `epochs` or `data_points`.
    #[arg(long)]
    x_axis: Option<String>,
    #[arg(long)]
    epochs: Option<String>,
    #[arg(long)]
    residual_stop: Option<String>,
    #[arg(long)]
    variance: Option<String>,
    #[arg(long)]
    scsg_option: Option<String>,
    /// Record wall-clock milliseconds (breaks byte reproducibility).
    #[arg(long)]
    timing: Option<String>,
    /// Random seed [default: 42].
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    /// Also render the plot next to the CSV.
    #[arg(long)]
    plot: bool,
}

impl SweepArgs {
    fn overrides(&self) -> Vec<(&'static str, String)> {
        let pairs: [(&'static str, &Option<String>); 17] = [
            ("rows", &self.rows),
            ("cols", &self.cols),
            ("s", &self.s),
            ("g", &self.g),
            ("eta", &self.eta),
            ("methods", &self.methods),
            ("B", &self.big_b),
            ("b", &self.small_b),
            ("m", &self.m),
            ("noise", &self.noise),
            ("trials", &self.trials),
            ("x_axis", &self.x_axis),
            ("epochs", &self.epochs),
            ("residual_stop", &self.residual_stop),
            ("variance", &self.variance),
            ("scsg_option", &self.scsg_option),
            ("timing", &self.timing),
        ];
        let mut out: Vec<(&'static str, String)> =
            pairs.iter().filter_map(|(k, v)| v.as_ref().map(|v| (*k, v.clone()))).collect();
        if let Some(seed) = self.seed {
            out.push(("seed", seed.to_string()));
        }
        out
    }
}

#[derive(Clone, Copy, Debug, clap::ValueEnum)]
enum ProjectionMode {
    Head,
    Tail,
    Exact,
}

#[derive(Args, Debug)]
#[command(rename_all = "snake_case")]
struct ProjectArgs {
    /// Vector file, one value per line.
    #[arg(long)]
    vector: PathBuf,
    #[arg(long, value_enum, default_value = "tail")]
    mode: ProjectionMode,
    #[arg(long)]
    s: usize,
    #[arg(long, default_value_t = 1)]
    g: usize,
    /// Forest weight budget; default s - g times the unit weight.
    #[arg(long)]
    budget: Option<f64>,
    /// Sparsity slack; default 2.5 for head, 1.5 for tail.
    #[arg(long)]
    slack: Option<f64>,
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
#[command(rename_all = "snake_case")]
struct TheoryArgs {
    /// Restricted strong convexity; with --beta skips estimation.
    #[arg(long, requires = "beta")]
    alpha: Option<f64>,
    #[arg(long, requires = "alpha")]
    beta: Option<f64>,
    /// Dataset CSV to estimate alpha and beta on; default a synthetic instance.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, default_value_t = 3)]
    s: usize,
    #[arg(long, default_value_t = 1)]
    g: usize,
    /// Observations of the synthetic instance.
    #[arg(long)]
    m: Option<usize>,
    /// Learning rate; default the interval midpoint.
    #[arg(long)]
    eta: Option<f64>,
    /// Comparison step; default eta.
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    c_h: f64,
    #[arg(long, default_value_t = 1.0)]
    c_t: f64,
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
#[command(rename_all = "snake_case")]
struct PlotArgs {
    /// Trace CSV.
    #[arg(long)]
    traces: PathBuf,
    /// `epochs` or `data_points`.
    #[arg(long, default_value = "epochs")]
    x_axis: XAxis,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
#[command(rename_all = "snake_case")]
struct PcsfArgs {
    /// Prize file, one nonnegative value per vertex and line.
    #[arg(long)]
    prizes: PathBuf,
    /// Edge cost file, one value per edge; default the edge weights.
    #[arg(long)]
    costs: Option<PathBuf>,
    /// Multiplier on every edge cost.
    #[arg(long, default_value_t = 1.0)]
    cost_scale: f64,
    /// Number of trees.
    #[arg(long, default_value_t = 1)]
    g: usize,
    #[command(flatten)]
    graph: GraphArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Runtime(String),
}

impl CliError {
    fn usage(e: impl fmt::Display) -> Self {
        CliError::Usage(e.to_string())
    }

    fn runtime(e: impl fmt::Display) -> Self {
        CliError::Runtime(e.to_string())
    }
}

fn read_values(path: &Path) -> Result<Vec<f64>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            l.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("{}:{}: not a number: `{}`", path.display(), i + 1, l.trim())))
        })
        .collect()
}

fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))
}

fn synth(args: &SynthArgs) -> Result<(), CliError> {
    let graph = grid_graph(args.rows, args.cols).map_err(CliError::usage)?;
    let model = WgmModel::unit(args.s, args.g).map_err(CliError::usage)?;
    let m = args.m.unwrap_or_else(|| default_observations(args.s));
    let variance = args.variance.unwrap_or_else(|| default_design_variance(m));
    let spec = ExperimentSpec {
        rows: args.rows,
        cols: args.cols,
        s_values: vec![args.s],
        g: args.g,
        eta_values: vec![args.eta],
        methods: vec![args.method],
        batch_values: vec![args.big_b],
        minibatch_values: vec![args.small_b],
        m: Some(m),
        noise: args.noise,
        seed: args.common.seed,
        epochs: args.epochs,
        residual_stop: args.residual_stop,
        variance: Some(variance),
        scsg_option: args.scsg_option,
        ..ExperimentSpec::default()
    };
    spec.validate().map_err(CliError::usage)?;
    let big = args.big_b.resolve(args.s, m);
    let cfg = spec
        .solver_config(args.method, args.s, args.eta, big, args.small_b, m, args.common.seed)
        .map_err(CliError::usage)?;
    let (data, truth) = gen_instance_with_variance(&graph, &model, m, args.noise, variance, args.common.seed)
        .map_err(CliError::runtime)?;
    let graph_ref = args.method.uses_graph().then_some(&graph);
    let mut account = GradientAccount::new();
    let opts = RunOptions {
        truth: Some(&truth),
        timing: false,
    };
    let out = run(&data, graph_ref, &cfg, &mut account, &opts).map_err(CliError::runtime)?;

    let rows: Vec<TraceRow> = out
        .trace
        .checkpoints
        .iter()
        .map(|c| TraceRow {
            method: args.method,
            seed: args.common.seed,
            s: args.s,
            g: args.g,
            eta: args.eta,
            batch: cfg.batch_b,
            minibatch: cfg.minibatch_b,
            epoch: c.epoch,
            data_points: c.data_points,
            residual: c.residual,
            est_error: c.est_error,
            support_size: c.support_size,
            elapsed_ms: c.elapsed_ms,
        })
        .collect();
    ensure_dir(&args.common.out)?;
    let path = output_path(&args.common.out, "synth", "csv");
    write_traces(&TraceSet { rows }, &path).map_err(CliError::runtime)?;

    let last = out.trace.last().expect("a run records at least one checkpoint");
    let support = support_of(&out.x);
    println!("method      {}", args.method);
    println!("n, p        {}, {}", data.n(), data.p());
    println!("epochs      {:.3}", last.epoch);
    println!("residual    {:.6e}", last.residual);
    if let Some(err) = last.est_error {
        println!("est_error   {err:.6e}");
    }
    println!("support     {} {:?}", support.len(), support.indices());
    println!("trace       {}", path.display());
    Ok(())
}

fn sweep(args: &SweepArgs) -> Result<(), CliError> {
    let mut spec = match &args.spec {
        Some(path) => ExperimentSpec::load(path).map_err(CliError::usage)?,
        None => ExperimentSpec::default(),
    };
    for (key, value) in args.overrides() {
        spec.set(key, &value).map_err(CliError::usage)?;
    }
    spec.validate().map_err(CliError::usage)?;
    if args.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    let set = run_sweep(&spec, args.jobs).map_err(CliError::runtime)?;
    let mut finals: Vec<&TraceRow> = Vec::new();
    for (i, row) in set.rows.iter().enumerate() {
        let next = set.rows.get(i + 1);
        let same_run = next.is_some_and(|n| {
            (n.method, n.seed, n.s, n.batch, n.minibatch) == (row.method, row.seed, row.s, row.batch, row.minibatch)
                && n.eta == row.eta
                && n.data_points > row.data_points
        });
        if !same_run {
            finals.push(row);
        }
    }
    for r in &finals {
        println!(
            "done {} seed={} s={} eta={} B={} b={} epochs={:.3} residual={:.3e}",
            r.method, r.seed, r.s, r.eta, r.batch, r.minibatch, r.epoch, r.residual
        );
    }
    ensure_dir(&args.out)?;
    let path = output_path(&args.out, "traces", "csv");
    write_traces(&set, &path).map_err(CliError::runtime)?;
    println!("wrote {}", path.display());
    if args.plot {
        let svg = output_path(&args.out, "traces", "svg");
        emit_plot(&set, spec.x_axis, &svg).map_err(CliError::runtime)?;
        println!("wrote {}", svg.display());
    }
    Ok(())
}

fn project(args: &ProjectArgs) -> Result<(), CliError> {
    let graph = args.graph.load()?;
    let x = read_values(&args.vector)?;
    let mut model = WgmModel::unit(args.s, args.g).map_err(CliError::usage)?;
    if let Some(budget) = args.budget {
        model = WgmModel::new(args.s, args.g, budget, model.sparsity_slack).map_err(CliError::usage)?;
    }
    let outcome = match args.mode {
        ProjectionMode::Head => head_project(&x, &graph, &model.with_slack(args.slack.unwrap_or(HEAD_SLACK))),
        ProjectionMode::Tail => tail_project(&x, &graph, &model.with_slack(args.slack.unwrap_or(TAIL_SLACK))),
        ProjectionMode::Exact => exact_project(&x, &graph, &model),
    }
    .map_err(CliError::usage)?;

    let mut csv = String::from("index,in_support,value\n");
    for (i, v) in outcome.vector.iter().enumerate() {
        csv.push_str(&format!("{i},{},{v}\n", u8::from(outcome.support.contains(i))));
    }
    ensure_dir(&args.common.out)?;
    let path = output_path(&args.common.out, "projection", "csv");
    std::fs::write(&path, csv).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))?;

    let kept: f64 = outcome.vector.iter().map(|v| v * v).sum::<f64>().sqrt();
    let total: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt();
    println!("support     {} {:?}", outcome.support.len(), outcome.support.indices());
    println!("norm kept   {kept:.6} of {total:.6}");
    println!("iterations  {}", outcome.iterations_used);
    println!("output      {}", path.display());
    Ok(())
}

fn theory(args: &TheoryArgs) -> Result<(), CliError> {
    let (alpha, beta) = match (args.alpha, args.beta) {
        (Some(a), Some(b)) => (a, b),
        _ => {
            let graph = args.graph.load()?;
            let model = WgmModel::unit(args.s, args.g).map_err(CliError::usage)?;
            let data = match &args.data {
                Some(path) => Dataset::load_csv(path).map_err(CliError::usage)?,
                None => {
                    let m = args.m.unwrap_or_else(|| default_observations(args.s));
                    gen_instance_with_variance(&graph, &model, m, 0.0, default_design_variance(m), args.common.seed)
                        .map_err(CliError::runtime)?
                        .0
                }
            };
            let est = estimate_rsc_rss(&data, &graph, &model).map_err(CliError::runtime)?;
            println!("family      {}", est.scope);
            println!(
                "mode        {} ({} supports)",
                if est.exact { "exact" } else { "sampled estimate" },
                est.supports_examined
            );
            println!("beta_i      {:.6}", est.beta_per_sample);
            (est.alpha, est.beta)
        }
    };
    println!("alpha       {alpha:.6}");
    println!("beta        {beta:.6}");
    let range = match eta_range(alpha, beta) {
        Ok(range) => range,
        Err(e) if args.alpha.is_none() => {
            println!("eta range   undefined: {e}");
            return Ok(());
        }
        Err(e) => return Err(CliError::usage(e)),
    };
    match range {
        EtaRange::Interval { low, high } => println!("eta range   ({low}, {high})"),
        EtaRange::Infeasible { ratio } => println!("eta range   infeasible: beta/alpha = {ratio:.6} > 16/15"),
    }
    let eta = match (args.eta, range.interval()) {
        (Some(eta), _) => eta,
        (None, Some((low, high))) => 0.5 * (low + high),
        (None, None) => return Ok(()),
    };
    let params = contraction_params(alpha, beta, eta, args.tau, args.c_h, args.c_t).map_err(CliError::usage)?;
    println!("eta         {eta:.6}");
    println!("tau         {:.6}", params.tau);
    println!("alpha0      {:.6}", params.alpha0);
    println!("beta0       {:.6}", params.beta0);
    println!("delta       {:.6}", params.delta);
    println!("delta_alt   {:.6}", params.delta_alt);
    println!("lambda      {:.6}", params.lambda);
    println!("lambda_alt  {:.6}", params.lambda_alt);
    println!("gamma       {:.6}", params.gamma);
    println!("ratio       {:.6}", params.error_ratio());
    Ok(())
}

fn plot(args: &PlotArgs) -> Result<(), CliError> {
    let set = read_traces(&args.traces).map_err(CliError::usage)?;
    let stem = args.traces.file_stem().and_then(|s| s.to_str()).unwrap_or("traces");
    ensure_dir(&args.common.out)?;
    let path = output_path(&args.common.out, stem, "svg");
    emit_plot(&set, args.x_axis, &path).map_err(CliError::runtime)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn pcsf_debug(args: &PcsfArgs) -> Result<(), CliError> {
    let graph = args.graph.load()?;
    let prizes = read_values(&args.prizes)?;
    let base = match &args.costs {
        Some(path) => read_values(path)?,
        None => graph.edges().iter().map(|e| e.w).collect(),
    };
    let costs = base.iter().map(|c| c * args.cost_scale).collect();
    let inst = PcsfInstance::new(&graph, prizes, costs, args.g).map_err(CliError::usage)?;
    let forest = solve_pcsf(&inst);
    let weight = spanning_forest_weight(&graph, &forest.vertices).map_err(CliError::runtime)?;
    println!("trees       {}", forest.num_trees);
    println!("vertices    {:?}", forest.vertices.indices());
    let edges: Vec<(usize, usize)> = forest.edges.iter().map(|&e| (graph.edge(e).u, graph.edge(e).v)).collect();
    println!("edges       {edges:?}");
    println!("objective   {:.6}", forest_objective(&inst, &forest));
    println!("weight      {weight:.6}");
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    let result = match &cli.command {
        Command::Synth(a) => synth(a),
        Command::Sweep(a) => sweep(a),
        Command::Project(a) => project(a),
        Command::Theory(a) => theory(a),
        Command::Plot(a) => plot(a),
        Command::PcsfDebug(a) => pcsf_debug(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
