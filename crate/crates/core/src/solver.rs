//! Hard-thresholding solvers.
//!
//! All five methods start from `x = 0` (a member of every model), share the
//! projected step and draw mini-batches from one seeded stream. GraphSCSG-IHT
//! draws its geometric inner-loop lengths from a second, independent stream so
//! that the batch draws match GraphSVRG-IHT exactly when `B = n`, `b = 1`.
//!
//! Accounting: a batch gradient costs `|batch|` sample gradients and a
//! variance-reduced inner step costs `2 |batch|`; one epoch is `n` sample
//! gradients. A checkpoint is recorded every `ceil(n / 4)` sample gradients.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Geometric};

use crate::error::{Error, Result};
use crate::graph::{Graph, Support, WgmModel};
use crate::objective::{distance, Dataset, GradientAccount, LossKind};
use crate::projection::{head_project, tail_project, top_k, HEAD_SLACK, TAIL_SLACK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Method {
    Iht,
    StoIht,
    GraphStoIht,
    GraphSvrg,
    GraphScsg,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Iht,
        Method::StoIht,
        Method::GraphStoIht,
        Method::GraphSvrg,
        Method::GraphScsg,
    ];

    pub fn uses_graph(self) -> bool {
        matches!(self, Method::GraphStoIht | Method::GraphSvrg | Method::GraphScsg)
    }

    pub fn name(self) -> &'static str {
        match self {
            Method::Iht => "iht",
            Method::StoIht => "sto-iht",
            Method::GraphStoIht => "graph-sto-iht",
            Method::GraphSvrg => "graph-svrg",
            Method::GraphScsg => "graph-scsg",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        Method::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown method `{s}` (expected one of iht, sto-iht, graph-sto-iht, graph-svrg, graph-scsg)"
                ))
            })
    }
}

/// How GraphSCSG-IHT chooses the inner-loop length `K^j`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScsgOption {
    /// `P(K = k) = (1 - gamma) gamma^k` with `gamma = B / (B + b)`, so
    /// `E[K] = B / b`; a draw of 0 is raised to 1.
    Geometric,
    /// `K = ceil(B / b)`.
    Fixed,
}

impl FromStr for ScsgOption {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "geometric" | "i" | "1" => Ok(ScsgOption::Geometric),
            "fixed" | "ii" | "2" => Ok(ScsgOption::Fixed),
            other => Err(Error::invalid(format!("unknown SCSG option `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub method: Method,
    pub eta: f64,
    /// `J`; for single-loop methods, the iteration cap.
    pub outer_loops: usize,
    /// `K` for GraphSVRG-IHT.
    pub inner_loops: usize,
    pub batch_b: usize,
    pub minibatch_b: usize,
    pub scsg_option: ScsgOption,
    pub model: WgmModel,
    pub seed: u64,
    pub max_epochs: f64,
    pub residual_stop: f64,
}

impl SolverConfig {
    /// Defaults for a dataset with `n` samples: `K = n`, `B = n`, `b = 1`,
    /// fixed inner length, 50 epochs, stop at residual `1e-10`.
    pub fn new(method: Method, eta: f64, model: WgmModel, n: usize) -> Self {
        SolverConfig {
            method,
            eta,
            outer_loops: usize::MAX,
            inner_loops: n,
            batch_b: n,
            minibatch_b: 1,
            scsg_option: ScsgOption::Fixed,
            model,
            seed: 42,
            max_epochs: 50.0,
            residual_stop: 1e-10,
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::invalid(format!("learning rate must be positive, got {}", self.eta)));
        }
        if self.minibatch_b == 0 || self.minibatch_b > self.batch_b || self.batch_b > n {
            return Err(Error::invalid(format!(
                "need 1 <= b <= B <= n, got b={}, B={}, n={n}",
                self.minibatch_b, self.batch_b
            )));
        }
        if self.inner_loops == 0 {
            return Err(Error::invalid("inner loop count K must be at least 1"));
        }
        if !(self.max_epochs >= 0.0) {
            return Err(Error::invalid("max_epochs must be nonnegative"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub epoch: f64,
    pub data_points: u64,
    /// `||Ax - y||` for least squares, the loss value for logistic data.
    pub residual: f64,
    pub est_error: Option<f64>,
    pub support_size: usize,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Trace {
    pub checkpoints: Vec<Checkpoint>,
}

impl Trace {
    pub fn last(&self) -> Option<&Checkpoint> {
        self.checkpoints.last()
    }

    /// First checkpoint at or below `threshold`.
    pub fn first_below(&self, threshold: f64) -> Option<&Checkpoint> {
        self.checkpoints.iter().find(|c| c.residual <= threshold)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub x: Vec<f64>,
    pub trace: Trace,
}

/// Extra inputs that do not affect the iterates.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions<'a> {
    /// Ground truth for the estimation-error column.
    pub truth: Option<&'a [f64]>,
    /// Record wall-clock milliseconds; off keeps traces reproducible.
    pub timing: bool,
}

/// Per-run random streams: stream 0 draws batches, stream 1 draws `K^j`.
pub struct Streams {
    pub batches: ChaCha8Rng,
    pub lengths: ChaCha8Rng,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        let mut batches = ChaCha8Rng::seed_from_u64(seed);
        batches.set_stream(0);
        let mut lengths = ChaCha8Rng::seed_from_u64(seed);
        lengths.set_stream(1);
        Streams { batches, lengths }
    }
}

/// Uniform batch of `size` distinct samples, ascending. Drawing all `n`
/// samples consumes no randomness; a single sample is one `random_range`.
pub fn sample_batch<R: Rng + ?Sized>(rng: &mut R, n: usize, size: usize) -> Vec<usize> {
    match size {
        s if s >= n => (0..n).collect(),
        1 => vec![rng.random_range(0..n)],
        _ => {
            let mut batch = index::sample(rng, n, size).into_vec();
            batch.sort_unstable();
            batch
        }
    }
}

/// Inner-loop length for one GraphSCSG-IHT outer iteration.
pub fn draw_inner_loops<R: Rng + ?Sized>(option: ScsgOption, batch: usize, minibatch: usize, rng: &mut R) -> usize {
    match option {
        ScsgOption::Fixed => batch.div_ceil(minibatch),
        ScsgOption::Geometric => {
            let success = minibatch as f64 / (batch + minibatch) as f64;
            let dist = Geometric::new(success).expect("success probability in (0, 1]");
            (dist.sample(rng) as usize).max(1)
        }
    }
}

/// One projected step: `tail(x - eta * head(grad))`, with the head and tail
/// slacks fixed at 2.5 and 1.5. Non-finite values give [`Error::Diverged`]
/// with zeroed counters.
pub fn graph_step(x: &[f64], grad: &[f64], eta: f64, graph: &Graph, model: &WgmModel) -> Result<Vec<f64>> {
    if x.len() != grad.len() {
        return Err(Error::invalid(format!(
            "iterate has length {}, gradient {}",
            x.len(),
            grad.len()
        )));
    }
    let diverged = Error::Diverged {
        iteration: 0,
        data_points: 0,
    };
    if grad.iter().any(|v| !v.is_finite()) {
        return Err(diverged);
    }
    let head = head_project(grad, graph, &model.with_slack(HEAD_SLACK))?;
    let moved: Vec<f64> = x.iter().zip(&head.vector).map(|(a, h)| a - eta * h).collect();
    if moved.iter().any(|v| !v.is_finite()) {
        return Err(diverged);
    }
    Ok(tail_project(&moved, graph, &model.with_slack(TAIL_SLACK))?.vector)
}

fn hard_threshold_step(x: &[f64], grad: &[f64], eta: f64, s: usize) -> Vec<f64> {
    let moved: Vec<f64> = x.iter().zip(grad).map(|(a, g)| a - eta * g).collect();
    top_k(&moved, s).vector
}

#[derive(PartialEq)]
enum Control {
    Continue,
    Stop,
}

struct Monitor<'a> {
    dataset: &'a Dataset,
    truth: Option<&'a [f64]>,
    start: Option<Instant>,
    cadence: u64,
    next: u64,
    budget: u64,
    residual_stop: f64,
    trace: Trace,
}

impl<'a> Monitor<'a> {
    fn new(dataset: &'a Dataset, config: &SolverConfig, options: &RunOptions<'a>) -> Result<Self> {
        if let Some(t) = options.truth {
            if t.len() != dataset.p() {
                return Err(Error::invalid("ground truth length differs from p"));
            }
        }
        let n = dataset.n() as u64;
        Ok(Monitor {
            dataset,
            truth: options.truth,
            start: options.timing.then(Instant::now),
            cadence: n.div_ceil(4).max(1),
            next: 0,
            budget: (config.max_epochs * n as f64).ceil() as u64,
            residual_stop: config.residual_stop,
            trace: Trace::default(),
        })
    }

    fn residual(&self, x: &[f64]) -> Result<f64> {
        match self.dataset.kind() {
            LossKind::LeastSquares => self.dataset.residual_norm(x),
            LossKind::Logistic => self.dataset.loss(x),
        }
    }

    fn record(&mut self, x: &[f64], account: &GradientAccount) -> Result<f64> {
        let data_points = account.sample_gradients_evaluated;
        let residual = self.residual(x)?;
        self.trace.checkpoints.push(Checkpoint {
            epoch: data_points as f64 / self.dataset.n() as f64,
            data_points,
            residual,
            est_error: self.truth.map(|t| distance(x, t)),
            support_size: x.iter().filter(|v| **v != 0.0).count(),
            elapsed_ms: self.start.map_or(0, |s| s.elapsed().as_millis() as u64),
        });
        self.next = (data_points / self.cadence + 1) * self.cadence;
        Ok(residual)
    }

    fn observe(&mut self, x: &[f64], account: &GradientAccount) -> Result<Control> {
        let used = account.sample_gradients_evaluated;
        if used >= self.next {
            let residual = self.record(x, account)?;
            if residual <= self.residual_stop {
                return Ok(Control::Stop);
            }
        }
        if used >= self.budget {
            return Ok(Control::Stop);
        }
        Ok(Control::Continue)
    }

    fn finish(mut self, x: Vec<f64>, account: &GradientAccount) -> Result<RunOutput> {
        let recorded = self.trace.last().map(|c| c.data_points);
        if recorded != Some(account.sample_gradients_evaluated) {
            self.record(&x, account)?;
        }
        Ok(RunOutput { x, trace: self.trace })
    }
}

fn check_finite(x: &[f64], iteration: usize, account: &GradientAccount) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::Diverged {
            iteration,
            data_points: account.sample_gradients_evaluated,
        })
    }
}

fn locate(err: Error, iteration: usize, account: &GradientAccount) -> Error {
    match err {
        Error::Diverged { .. } => Error::Diverged {
            iteration,
            data_points: account.sample_gradients_evaluated,
        },
        other => other,
    }
}

fn check_graph(dataset: &Dataset, graph: &Graph, model: &WgmModel) -> Result<()> {
    if graph.num_vertices() != dataset.p() {
        return Err(Error::invalid(format!(
            "graph has {} vertices but dataset has p = {}",
            graph.num_vertices(),
            dataset.p()
        )));
    }
    model.check_against(graph)
}

fn expect_method(config: &SolverConfig, method: Method) -> Result<()> {
    if config.method != method {
        return Err(Error::invalid(format!(
            "configuration selects {}, not {method}",
            config.method
        )));
    }
    Ok(())
}

/// Dispatches on `config.method`. Graph methods require `graph`.
pub fn run(
    dataset: &Dataset,
    graph: Option<&Graph>,
    config: &SolverConfig,
    account: &mut GradientAccount,
    options: &RunOptions,
) -> Result<RunOutput> {
    let need_graph = || {
        graph.ok_or_else(|| Error::invalid(format!("{} requires a graph", config.method)))
    };
    match config.method {
        Method::Iht => iht_loop(dataset, config, account, options, false),
        Method::StoIht => iht_loop(dataset, config, account, options, true),
        Method::GraphStoIht => graph_sto_loop(dataset, need_graph()?, config, account, options),
        Method::GraphSvrg => svrg_loop(dataset, need_graph()?, config, account, options),
        Method::GraphScsg => scsg_loop(dataset, need_graph()?, config, account, options),
    }
}

pub fn run_graph_svrg_iht(
    dataset: &Dataset,
    graph: &Graph,
    config: &SolverConfig,
    account: &mut GradientAccount,
) -> Result<RunOutput> {
    expect_method(config, Method::GraphSvrg)?;
    svrg_loop(dataset, graph, config, account, &RunOptions::default())
}

pub fn run_graph_scsg_iht(
    dataset: &Dataset,
    graph: &Graph,
    config: &SolverConfig,
    account: &mut GradientAccount,
) -> Result<RunOutput> {
    expect_method(config, Method::GraphScsg)?;
    scsg_loop(dataset, graph, config, account, &RunOptions::default())
}

pub fn run_graph_sto_iht(
    dataset: &Dataset,
    graph: &Graph,
    config: &SolverConfig,
    account: &mut GradientAccount,
) -> Result<RunOutput> {
    expect_method(config, Method::GraphStoIht)?;
    graph_sto_loop(dataset, graph, config, account, &RunOptions::default())
}

pub fn run_iht(dataset: &Dataset, config: &SolverConfig, account: &mut GradientAccount) -> Result<RunOutput> {
    expect_method(config, Method::Iht)?;
    iht_loop(dataset, config, account, &RunOptions::default(), false)
}

pub fn run_sto_iht(dataset: &Dataset, config: &SolverConfig, account: &mut GradientAccount) -> Result<RunOutput> {
    expect_method(config, Method::StoIht)?;
    iht_loop(dataset, config, account, &RunOptions::default(), true)
}

fn svrg_loop(
    dataset: &Dataset,
    graph: &Graph,
    config: &SolverConfig,
    account: &mut GradientAccount,
    options: &RunOptions,
) -> Result<RunOutput> {
    config.validate(dataset.n())?;
    check_graph(dataset, graph, &config.model)?;
    let n = dataset.n();
    let mut streams = Streams::new(config.seed);
    let mut monitor = Monitor::new(dataset, config, options)?;
    let mut anchor = vec![0.0; dataset.p()];
    if monitor.observe(&anchor, account)? == Control::Stop {
        return monitor.finish(anchor, account);
    }
    let mut iteration = 0;
    for _ in 0..config.outer_loops {
        let anchor_grad = dataset.full_gradient(&anchor, account)?;
        if monitor.observe(&anchor, account)? == Control::Stop {
            return monitor.finish(anchor, account);
        }
        let mut x = anchor.clone();
        for _ in 0..config.inner_loops {
            iteration += 1;
            let pick = sample_batch(&mut streams.batches, n, 1);
            let v = dataset.variance_reduced(&pick, &x, &anchor, &anchor_grad, account)?;
            x = graph_step(&x, &v, config.eta, graph, &config.model).map_err(|e| locate(e, iteration, account))?;
            check_finite(&x, iteration, account)?;
            if monitor.observe(&x, account)? == Control::Stop {
                return monitor.finish(x, account);
            }
        }
        anchor = x;
    }
    monitor.finish(anchor, account)
}

fn scsg_loop(
    dataset: &Dataset,
    graph: &Graph,
    config: &SolverConfig,
    account: &mut GradientAccount,
    options: &RunOptions,
) -> Result<RunOutput> {
    config.validate(dataset.n())?;
    check_graph(dataset, graph, &config.model)?;
    let n = dataset.n();
    let mut streams = Streams::new(config.seed);
    let mut monitor = Monitor::new(dataset, config, options)?;
    let mut anchor = vec![0.0; dataset.p()];
    if monitor.observe(&anchor, account)? == Control::Stop {
        return monitor.finish(anchor, account);
    }
    let mut iteration = 0;
    for _ in 0..config.outer_loops {
        let batch = sample_batch(&mut streams.batches, n, config.batch_b);
        let anchor_grad = dataset.grad_batch(&batch, &anchor, account)?;
        if monitor.observe(&anchor, account)? == Control::Stop {
            return monitor.finish(anchor, account);
        }
        let inner = draw_inner_loops(
            config.scsg_option,
            config.batch_b,
            config.minibatch_b,
            &mut streams.lengths,
        );
        let mut x = anchor.clone();
        for _ in 0..inner {
            iteration += 1;
            let mini = sample_batch(&mut streams.batches, n, config.minibatch_b);
            let mu = dataset.variance_reduced(&mini, &x, &anchor, &anchor_grad, account)?;
            x = graph_step(&x, &mu, config.eta, graph, &config.model).map_err(|e| locate(e, iteration, account))?;
            check_finite(&x, iteration, account)?;
            if monitor.observe(&x, account)? == Control::Stop {
                return monitor.finish(x, account);
            }
        }
        anchor = x;
    }
    monitor.finish(anchor, account)
}

fn graph_sto_loop(
    dataset: &Dataset,
    graph: &Graph,
    config: &SolverConfig,
    account: &mut GradientAccount,
    options: &RunOptions,
) -> Result<RunOutput> {
    config.validate(dataset.n())?;
    check_graph(dataset, graph, &config.model)?;
    let n = dataset.n();
    let mut streams = Streams::new(config.seed);
    let mut monitor = Monitor::new(dataset, config, options)?;
    let mut x = vec![0.0; dataset.p()];
    if monitor.observe(&x, account)? == Control::Stop {
        return monitor.finish(x, account);
    }
    for iteration in 1..=config.outer_loops {
        let batch = sample_batch(&mut streams.batches, n, config.minibatch_b);
        let grad = dataset.grad_batch(&batch, &x, account)?;
        x = graph_step(&x, &grad, config.eta, graph, &config.model).map_err(|e| locate(e, iteration, account))?;
        check_finite(&x, iteration, account)?;
        if monitor.observe(&x, account)? == Control::Stop {
            break;
        }
    }
    monitor.finish(x, account)
}

fn iht_loop(
    dataset: &Dataset,
    config: &SolverConfig,
    account: &mut GradientAccount,
    options: &RunOptions,
    stochastic: bool,
) -> Result<RunOutput> {
    config.validate(dataset.n())?;
    let (n, s) = (dataset.n(), config.model.s.min(dataset.p()));
    let mut streams = Streams::new(config.seed);
    let mut monitor = Monitor::new(dataset, config, options)?;
    let mut x = vec![0.0; dataset.p()];
    if monitor.observe(&x, account)? == Control::Stop {
        return monitor.finish(x, account);
    }
    for iteration in 1..=config.outer_loops {
        let grad = if stochastic {
            let batch = sample_batch(&mut streams.batches, n, config.minibatch_b);
            dataset.grad_batch(&batch, &x, account)?
        } else {
            dataset.full_gradient(&x, account)?
        };
        x = hard_threshold_step(&x, &grad, config.eta, s);
        check_finite(&x, iteration, account)?;
        if monitor.observe(&x, account)? == Control::Stop {
            break;
        }
    }
    monitor.finish(x, account)
}

/// Support of an iterate, for reporting.
pub fn support_of(x: &[f64]) -> Support {
    Support::of_vector(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{connected_components, grid_graph, is_in_model};

    fn tiny_problem() -> (Dataset, Graph, Vec<f64>) {
        // 3x3 grid, truth on the connected pair {4, 5}
        let g = grid_graph(3, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 24;
        let a: Vec<f64> = (0..n * 9).map(|_| rng.random_range(-1.0..1.0)).collect();
        let mut truth = vec![0.0; 9];
        truth[4] = 1.0;
        truth[5] = -0.5;
        let y = (0..n)
            .map(|i| (0..9).map(|j| a[i * 9 + j] * truth[j]).sum())
            .collect();
        (Dataset::new(n, 9, a, y, LossKind::LeastSquares).unwrap(), g, truth)
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("svrg".parse::<Method>().is_err());
    }

    #[test]
    fn batch_sampling_shapes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(sample_batch(&mut rng, 5, 5), vec![0, 1, 2, 3, 4]);
        let b = sample_batch(&mut rng, 50, 10);
        assert_eq!(b.len(), 10);
        assert!(b.windows(2).all(|w| w[0] < w[1]));
        // drawing the full set consumes nothing
        let mut r1 = ChaCha8Rng::seed_from_u64(9);
        let mut r2 = ChaCha8Rng::seed_from_u64(9);
        sample_batch(&mut r1, 7, 7);
        assert_eq!(sample_batch(&mut r1, 7, 1), sample_batch(&mut r2, 7, 1));
    }

    #[test]
    fn fixed_inner_length_is_ceiling() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(draw_inner_loops(ScsgOption::Fixed, 10, 3, &mut rng), 4);
        assert_eq!(draw_inner_loops(ScsgOption::Fixed, 8, 1, &mut rng), 8);
    }

    #[test]
    fn geometric_inner_length_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (big, small) = (32, 4);
        let draws = 100_000;
        let total: usize = (0..draws)
            .map(|_| draw_inner_loops(ScsgOption::Geometric, big, small, &mut rng))
            .sum();
        let mean = total as f64 / draws as f64;
        let target = big as f64 / small as f64;
        assert!((mean - target).abs() < 0.05 * target, "mean {mean}");
    }

    #[test]
    fn zero_gradient_step_is_tail_of_x() {
        let g = grid_graph(3, 3).unwrap();
        let m = WgmModel::unit(2, 1).unwrap();
        let mut x = vec![0.0; 9];
        x[0] = 1.0;
        x[1] = 2.0;
        assert_eq!(graph_step(&x, &[0.0; 9], 0.1, &g, &m).unwrap(), x);
        let grad: Vec<f64> = (0..9).map(|i| i as f64).collect();
        assert_eq!(graph_step(&x, &grad, 0.0, &g, &m).unwrap(), x);
    }

    #[test]
    fn gradient_mass_enters_support() {
        let g = grid_graph(3, 3).unwrap();
        let m = WgmModel::unit(2, 1).unwrap();
        let mut grad = vec![0.0; 9];
        grad[7] = -3.0;
        grad[8] = -2.0;
        let x = graph_step(&[0.0; 9], &grad, 1.0, &g, &m).unwrap();
        assert_eq!(Support::of_vector(&x).indices(), &[7, 8]);
    }

    #[test]
    fn zero_outer_loops_returns_start() {
        let (d, g, _) = tiny_problem();
        let mut cfg = SolverConfig::new(Method::GraphSvrg, 0.1, WgmModel::unit(2, 1).unwrap(), d.n());
        cfg.outer_loops = 0;
        let out = run_graph_svrg_iht(&d, &g, &cfg, &mut GradientAccount::new()).unwrap();
        assert_eq!(out.x, vec![0.0; 9]);
    }

    #[test]
    fn methods_recover_tiny_problem_and_stay_in_model() {
        let (d, g, truth) = tiny_problem();
        let model = WgmModel::unit(2, 1).unwrap();
        for method in Method::ALL {
            let mut cfg = SolverConfig::new(method, 0.3, model, d.n());
            cfg.batch_b = 6;
            cfg.minibatch_b = if matches!(method, Method::GraphScsg) { 1 } else { 4 };
            cfg.max_epochs = 400.0;
            cfg.residual_stop = 1e-8;
            let mut acc = GradientAccount::new();
            let out = run(&d, Some(&g), &cfg, &mut acc, &RunOptions::default()).unwrap();
            assert!(out.trace.last().unwrap().residual <= 1e-8, "{method}: {:?}", out.trace.last());
            assert!(distance(&out.x, &truth) < 1e-6, "{method}");
            if method.uses_graph() {
                let sup = Support::of_vector(&out.x);
                assert!(is_in_model(&g, &sup, &model).unwrap());
                assert!(connected_components(&g, &sup).unwrap() <= 1);
            }
        }
    }

    #[test]
    fn trace_is_monotone_in_data_points() {
        let (d, g, truth) = tiny_problem();
        let mut cfg = SolverConfig::new(Method::GraphScsg, 0.3, WgmModel::unit(2, 1).unwrap(), d.n());
        cfg.batch_b = 6;
        cfg.scsg_option = ScsgOption::Geometric;
        cfg.max_epochs = 10.0;
        cfg.residual_stop = 0.0;
        let opts = RunOptions {
            truth: Some(&truth),
            timing: false,
        };
        let out = run(&d, Some(&g), &cfg, &mut GradientAccount::new(), &opts).unwrap();
        let cps = &out.trace.checkpoints;
        assert!(cps.windows(2).all(|w| w[0].data_points < w[1].data_points));
        for c in cps {
            assert_eq!(c.epoch, c.data_points as f64 / d.n() as f64);
            assert!(c.est_error.is_some());
        }
        assert!(cps.last().unwrap().epoch >= 10.0);
    }

    #[test]
    fn wrong_method_or_bad_config_is_rejected() {
        let (d, g, _) = tiny_problem();
        let model = WgmModel::unit(2, 1).unwrap();
        let cfg = SolverConfig::new(Method::Iht, 0.1, model, d.n());
        assert!(run_graph_svrg_iht(&d, &g, &cfg, &mut GradientAccount::new()).is_err());
        let mut bad = SolverConfig::new(Method::GraphScsg, 0.1, model, d.n());
        bad.minibatch_b = 7;
        bad.batch_b = 6;
        assert!(run_graph_scsg_iht(&d, &g, &bad, &mut GradientAccount::new()).is_err());
        let mut neg = SolverConfig::new(Method::Iht, -1.0, model, d.n());
        neg.eta = -1.0;
        assert!(run_iht(&d, &neg, &mut GradientAccount::new()).is_err());
    }

    #[test]
    fn divergence_is_reported() {
        let (d, g, _) = tiny_problem();
        let mut cfg = SolverConfig::new(Method::GraphSvrg, 1e200, WgmModel::unit(2, 1).unwrap(), d.n());
        cfg.max_epochs = 100.0;
        let err = run_graph_svrg_iht(&d, &g, &cfg, &mut GradientAccount::new()).unwrap_err();
        assert!(matches!(err, Error::Diverged { .. }), "{err}");
    }
}
