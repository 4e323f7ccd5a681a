//! Synthetic instances, experiment sweeps, trace CSV files and SVG plots.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::graph::{grid_graph, random_connected_support, Graph, WgmModel};
use crate::objective::{Dataset, GradientAccount, LossKind};
use crate::solver::{run, Method, RunOptions, ScsgOption, SolverConfig};

/// Variance of the design entries used when none is given: `1/m`.
pub fn default_design_variance(m: usize) -> f64 {
    1.0 / m.max(1) as f64
}

/// `m = max(60, ceil(2.5 s))`.
pub fn default_observations(s: usize) -> usize {
    60.max((2.5 * s as f64).ceil() as usize)
}

/// Noiseless-by-default least-squares instance: `x*` has standard normal
/// entries on a random support with `model.g` components, `A` has iid
/// normal entries of variance `design_variance`, `y = A x* + sigma e`.
pub fn gen_instance_with_variance(
    graph: &Graph,
    model: &WgmModel,
    m: usize,
    noise_sigma: f64,
    design_variance: f64,
    seed: u64,
) -> Result<(Dataset, Vec<f64>)> {
    if m == 0 {
        return Err(Error::invalid("need at least one observation"));
    }
    if !(noise_sigma >= 0.0) || !(design_variance > 0.0) {
        return Err(Error::invalid("noise must be nonnegative and design variance positive"));
    }
    let p = graph.num_vertices();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let support = random_connected_support(graph, model.s, model.g, &mut rng)?;
    let mut x_star = vec![0.0; p];
    for &v in support.indices() {
        x_star[v] = rng.sample(StandardNormal);
    }
    let scale = design_variance.sqrt();
    let a: Vec<f64> = (0..m * p).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
    let y: Vec<f64> = (0..m)
        .map(|i| {
            let clean: f64 = support.indices().iter().map(|&j| a[i * p + j] * x_star[j]).sum();
            clean + noise_sigma * rng.sample::<f64, _>(StandardNormal)
        })
        .collect();
    Ok((Dataset::new(m, p, a, y, LossKind::LeastSquares)?, x_star))
}

/// [`gen_instance_with_variance`] with [`default_design_variance`].
pub fn gen_instance(
    graph: &Graph,
    model: &WgmModel,
    m: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<(Dataset, Vec<f64>)> {
    gen_instance_with_variance(graph, model, m, noise_sigma, default_design_variance(m), seed)
}

/// A batch-size token: a count, `s`, `n` or `n/k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BatchSize {
    Count(usize),
    Sparsity,
    All,
    Fraction(usize),
}

impl BatchSize {
    pub fn resolve(self, s: usize, n: usize) -> usize {
        let v = match self {
            BatchSize::Count(c) => c,
            BatchSize::Sparsity => s,
            BatchSize::All => n,
            BatchSize::Fraction(k) => n / k,
        };
        v.clamp(1, n)
    }
}

impl FromStr for BatchSize {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.trim();
        let bad = || Error::invalid(format!("bad batch size `{t}` (expected an integer, s, n or n/k)"));
        match t {
            "s" => Ok(BatchSize::Sparsity),
            "n" => Ok(BatchSize::All),
            _ => {
                if let Some(k) = t.strip_prefix("n/") {
                    let k: usize = k.trim().parse().map_err(|_| bad())?;
                    if k == 0 {
                        return Err(bad());
                    }
                    Ok(BatchSize::Fraction(k))
                } else {
                    let c: usize = t.parse().map_err(|_| bad())?;
                    if c == 0 {
                        return Err(bad());
                    }
                    Ok(BatchSize::Count(c))
                }
            }
        }
    }
}

impl std::fmt::Display for BatchSize {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            BatchSize::Count(c) => write!(f, "{c}"),
            BatchSize::Sparsity => f.write_str("s"),
            BatchSize::All => f.write_str("n"),
            BatchSize::Fraction(k) => write!(f, "n/{k}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XAxis {
    Epochs,
    DataPoints,
}

impl FromStr for XAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "epochs" | "epoch" => Ok(XAxis::Epochs),
            "data_points" | "data-points" => Ok(XAxis::DataPoints),
            other => Err(Error::invalid(format!("x_axis must be epochs or data_points, got `{other}`"))),
        }
    }
}

impl std::fmt::Display for XAxis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            XAxis::Epochs => "epochs",
            XAxis::DataPoints => "data_points",
        })
    }
}

/// A sweep over sparsity, learning rate, batch sizes and methods.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub rows: usize,
    pub cols: usize,
    pub s_values: Vec<usize>,
    pub g: usize,
    pub eta_values: Vec<f64>,
    pub methods: Vec<Method>,
    pub batch_values: Vec<BatchSize>,
    pub minibatch_values: Vec<usize>,
    /// `None` picks [`default_observations`] per sparsity.
    pub m: Option<usize>,
    pub noise: f64,
    pub trials: usize,
    pub seed: u64,
    pub x_axis: XAxis,
    pub epochs: f64,
    pub residual_stop: f64,
    /// `None` means `1/m`.
    pub variance: Option<f64>,
    pub scsg_option: ScsgOption,
    pub timing: bool,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        ExperimentSpec {
            rows: 16,
            cols: 16,
            s_values: vec![32],
            g: 1,
            eta_values: vec![0.01],
            methods: vec![Method::GraphSvrg],
            batch_values: vec![BatchSize::Sparsity],
            minibatch_values: vec![1],
            m: None,
            noise: 0.0,
            trials: 1,
            seed: 42,
            x_axis: XAxis::Epochs,
            epochs: 50.0,
            residual_stop: 1e-10,
            variance: None,
            scsg_option: ScsgOption::Fixed,
            timing: false,
        }
    }
}

/// Keys accepted by [`ExperimentSpec::set`].
pub const SPEC_KEYS: [&str; 18] = [
    "rows", "cols", "s", "g", "eta", "methods", "B", "b", "m", "noise", "trials", "seed", "x_axis", "epochs",
    "residual_stop", "variance", "scsg_option", "timing",
];

fn list<T: FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
    let items: Vec<T> = value
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<T>().map_err(|_| Error::invalid(format!("key `{key}`: cannot parse `{t}`"))))
        .collect::<Result<_>>()?;
    if items.is_empty() {
        return Err(Error::invalid(format!("key `{key}`: empty list")));
    }
    Ok(items)
}

fn scalar<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .trim()
        .parse()
        .map_err(|_| Error::invalid(format!("key `{key}`: cannot parse `{}`", value.trim())))
}

impl ExperimentSpec {
    /// Parses flat `key = value` text; `#` starts a comment.
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut spec = ExperimentSpec::default();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::parse(origin, idx + 1, format!("expected `key = value`, got `{line}`")))?;
            spec.set(key.trim(), value)
                .map_err(|e| Error::parse(origin, idx + 1, e.to_string()))?;
        }
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path)
    }

    /// Overrides one key.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "rows" => self.rows = scalar(key, value)?,
            "cols" => self.cols = scalar(key, value)?,
            "s" => self.s_values = list(key, value)?,
            "g" => self.g = scalar(key, value)?,
            "eta" => self.eta_values = list(key, value)?,
            "methods" => self.methods = list(key, value)?,
            "B" => self.batch_values = list(key, value)?,
            "b" => self.minibatch_values = list(key, value)?,
            "m" => self.m = Some(scalar(key, value)?),
            "noise" => self.noise = scalar(key, value)?,
            "trials" => self.trials = scalar(key, value)?,
            "seed" => self.seed = scalar(key, value)?,
            "x_axis" => self.x_axis = scalar(key, value)?,
            "epochs" => self.epochs = scalar(key, value)?,
            "residual_stop" => self.residual_stop = scalar(key, value)?,
            "variance" => self.variance = Some(scalar(key, value)?),
            "scsg_option" => self.scsg_option = scalar(key, value)?,
            "timing" => self.timing = scalar(key, value)?,
            other => {
                return Err(Error::invalid(format!(
                    "unknown key `{other}` (expected one of {})",
                    SPEC_KEYS.join(", ")
                )))
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.rows == 0 || self.cols == 0 {
            return Err(Error::invalid("key `rows`/`cols`: grid must be nonempty"));
        }
        if self.trials == 0 {
            return Err(Error::invalid("key `trials`: must be at least 1"));
        }
        if self.g == 0 {
            return Err(Error::invalid("key `g`: must be at least 1"));
        }
        let p = self.rows * self.cols;
        if let Some(&s) = self.s_values.iter().find(|&&s| s < self.g || s > p) {
            return Err(Error::invalid(format!("key `s`: {s} outside [g, rows*cols]")));
        }
        if self.eta_values.iter().any(|e| !(*e > 0.0)) {
            return Err(Error::invalid("key `eta`: learning rates must be positive"));
        }
        if self.minibatch_values.contains(&0) {
            return Err(Error::invalid("key `b`: must be at least 1"));
        }
        if self.m == Some(0) {
            return Err(Error::invalid("key `m`: must be at least 1"));
        }
        if !(self.noise >= 0.0) {
            return Err(Error::invalid("key `noise`: must be nonnegative"));
        }
        if self.variance.is_some_and(|v| !(v > 0.0)) {
            return Err(Error::invalid("key `variance`: must be positive"));
        }
        if !(self.epochs > 0.0) {
            return Err(Error::invalid("key `epochs`: must be positive"));
        }
        if [self.s_values.len(), self.eta_values.len(), self.methods.len(), self.batch_values.len(), self.minibatch_values.len()]
            .contains(&0)
        {
            return Err(Error::invalid("sweep lists must be nonempty"));
        }
        Ok(())
    }

    pub fn observations(&self, s: usize) -> usize {
        self.m.unwrap_or_else(|| default_observations(s))
    }

    /// Solver configuration for one run. `K = n` for GraphSVRG-IHT; `b` is
    /// capped at `B`.
    pub fn solver_config(&self, method: Method, s: usize, eta: f64, big: usize, small: usize, n: usize, seed: u64) -> Result<SolverConfig> {
        let mut cfg = SolverConfig::new(method, eta, WgmModel::unit(s, self.g)?, n);
        cfg.batch_b = big;
        cfg.minibatch_b = small.min(big);
        cfg.scsg_option = self.scsg_option;
        cfg.seed = seed;
        cfg.max_epochs = self.epochs;
        cfg.residual_stop = self.residual_stop;
        Ok(cfg)
    }
}

/// One checkpoint of one run, with its sweep coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub method: Method,
    pub seed: u64,
    pub s: usize,
    pub g: usize,
    pub eta: f64,
    pub batch: usize,
    pub minibatch: usize,
    pub epoch: f64,
    pub data_points: u64,
    pub residual: f64,
    pub est_error: Option<f64>,
    pub support_size: usize,
    pub elapsed_ms: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TraceSet {
    pub rows: Vec<TraceRow>,
}

pub const TRACE_HEADER: &str =
    "method,seed,s,g,eta,B,b,epoch,data_points,residual,est_error,support_size,elapsed_ms";

struct Job {
    method: Method,
    s: usize,
    eta: f64,
    batch: BatchSize,
    minibatch: usize,
    trial: usize,
}

/// Runs every (s, eta, B, b, method, trial) combination with `jobs` worker
/// threads. Run `trial` uses seed `seed + trial` for both the instance and
/// the solver. Output order follows the sweep order, independent of `jobs`.
pub fn run_sweep(spec: &ExperimentSpec, jobs: usize) -> Result<TraceSet> {
    spec.validate()?;
    let graph = grid_graph(spec.rows, spec.cols)?;
    let mut work = Vec::new();
    for &s in &spec.s_values {
        for &eta in &spec.eta_values {
            for &batch in &spec.batch_values {
                for &minibatch in &spec.minibatch_values {
                    for &method in &spec.methods {
                        for trial in 0..spec.trials {
                            work.push(Job { method, s, eta, batch, minibatch, trial });
                        }
                    }
                }
            }
        }
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<Vec<TraceRow>>> =
        pool.install(|| work.par_iter().map(|job| run_job(spec, &graph, job)).collect());
    let mut set = TraceSet::default();
    for r in results {
        set.rows.extend(r?);
    }
    Ok(set)
}

fn run_job(spec: &ExperimentSpec, graph: &Graph, job: &Job) -> Result<Vec<TraceRow>> {
    let seed = spec.seed.wrapping_add(job.trial as u64);
    let model = WgmModel::unit(job.s, spec.g)?;
    let m = spec.observations(job.s);
    let (data, truth) = gen_instance_with_variance(graph, &model, m, spec.noise, spec.variance.unwrap_or_else(|| default_design_variance(m)), seed)?;
    let big = job.batch.resolve(job.s, m);
    let small = job.minibatch.min(big);
    let cfg = spec.solver_config(job.method, job.s, job.eta, big, small, m, seed)?;
    let opts = RunOptions {
        truth: Some(&truth),
        timing: spec.timing,
    };
    let row = |epoch: f64, data_points: u64, residual: f64, est_error: Option<f64>, support_size: usize, elapsed_ms: u64| TraceRow {
        method: job.method,
        seed,
        s: job.s,
        g: spec.g,
        eta: job.eta,
        batch: big,
        minibatch: small,
        epoch,
        data_points,
        residual,
        est_error,
        support_size,
        elapsed_ms,
    };
    let mut account = GradientAccount::new();
    match run(&data, Some(graph), &cfg, &mut account, &opts) {
        Ok(out) => Ok(out
            .trace
            .checkpoints
            .iter()
            .map(|c| row(c.epoch, c.data_points, c.residual, c.est_error, c.support_size, c.elapsed_ms))
            .collect()),
        Err(Error::Diverged { data_points, .. }) => {
            Ok(vec![row(data_points as f64 / m as f64, data_points, f64::INFINITY, None, 0, 0)])
        }
        Err(e) => Err(e),
    }
}

fn fmt_f64(v: f64) -> String {
    format!("{v}")
}

/// CSV text with [`TRACE_HEADER`]; missing estimation errors are empty.
pub fn traces_to_csv(set: &TraceSet) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for r in &set.rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.method,
            r.seed,
            r.s,
            r.g,
            fmt_f64(r.eta),
            r.batch,
            r.minibatch,
            fmt_f64(r.epoch),
            r.data_points,
            fmt_f64(r.residual),
            r.est_error.map(fmt_f64).unwrap_or_default(),
            r.support_size,
            r.elapsed_ms
        );
    }
    out
}

pub fn write_traces(set: &TraceSet, path: &Path) -> Result<()> {
    std::fs::write(path, traces_to_csv(set)).map_err(|e| Error::io(path, e))
}

pub fn parse_traces(text: &str, origin: &Path) -> Result<TraceSet> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == TRACE_HEADER => {}
        _ => return Err(Error::parse(origin, 1, format!("expected header `{TRACE_HEADER}`"))),
    }
    let mut set = TraceSet::default();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let lineno = idx + 1;
        let f: Vec<&str> = line.split(',').collect();
        if f.len() != 13 {
            return Err(Error::parse(origin, lineno, format!("expected 13 fields, found {}", f.len())));
        }
        let bad = |col: &str| Error::parse(origin, lineno, format!("cannot parse column `{col}`"));
        set.rows.push(TraceRow {
            method: f[0].parse().map_err(|_| bad("method"))?,
            seed: f[1].parse().map_err(|_| bad("seed"))?,
            s: f[2].parse().map_err(|_| bad("s"))?,
            g: f[3].parse().map_err(|_| bad("g"))?,
            eta: f[4].parse().map_err(|_| bad("eta"))?,
            batch: f[5].parse().map_err(|_| bad("B"))?,
            minibatch: f[6].parse().map_err(|_| bad("b"))?,
            epoch: f[7].parse().map_err(|_| bad("epoch"))?,
            data_points: f[8].parse().map_err(|_| bad("data_points"))?,
            residual: f[9].parse().map_err(|_| bad("residual"))?,
            est_error: if f[10].is_empty() {
                None
            } else {
                Some(f[10].parse().map_err(|_| bad("est_error"))?)
            },
            support_size: f[11].parse().map_err(|_| bad("support_size"))?,
            elapsed_ms: f[12].parse().map_err(|_| bad("elapsed_ms"))?,
        });
    }
    Ok(set)
}

pub fn read_traces(path: &Path) -> Result<TraceSet> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_traces(&text, path)
}

/// Sweep point plus method, used to group runs.
#[derive(Debug, Clone, PartialEq, PartialOrd)]
pub struct CurveKey {
    pub method: Method,
    pub s: usize,
    pub g: usize,
    pub eta: f64,
    pub batch: usize,
    pub minibatch: usize,
}

impl CurveKey {
    fn of(r: &TraceRow) -> Self {
        CurveKey {
            method: r.method,
            s: r.s,
            g: r.g,
            eta: r.eta,
            batch: r.batch,
            minibatch: r.minibatch,
        }
    }

    pub fn label(&self) -> String {
        format!("{} s={} g={} eta={} B={} b={}", self.method, self.s, self.g, self.eta, self.batch, self.minibatch)
    }
}

/// Median and interquartile band over seeds, on the union of checkpoint
/// positions; a finished run holds its last value.
#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub key: CurveKey,
    pub x: Vec<f64>,
    pub median: Vec<f64>,
    pub q1: Vec<f64>,
    pub q3: Vec<f64>,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

pub fn summarize(set: &TraceSet, x_axis: XAxis) -> Vec<Curve> {
    let mut groups: Vec<(CurveKey, BTreeMap<u64, Vec<(f64, f64)>>)> = Vec::new();
    for r in &set.rows {
        let key = CurveKey::of(r);
        let x = match x_axis {
            XAxis::Epochs => r.epoch,
            XAxis::DataPoints => r.data_points as f64,
        };
        let idx = match groups.iter().position(|(k, _)| *k == key) {
            Some(i) => i,
            None => {
                groups.push((key, BTreeMap::new()));
                groups.len() - 1
            }
        };
        groups[idx].1.entry(r.seed).or_default().push((x, r.residual));
    }
    groups
        .into_iter()
        .map(|(key, runs)| {
            let mut xs: Vec<f64> = runs.values().flatten().map(|p| p.0).collect();
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            let mut curve = Curve {
                key,
                x: Vec::with_capacity(xs.len()),
                median: Vec::new(),
                q1: Vec::new(),
                q3: Vec::new(),
            };
            for &x in &xs {
                let mut vals: Vec<f64> = runs
                    .values()
                    .filter_map(|pts| pts.iter().take_while(|p| p.0 <= x).last().map(|p| p.1))
                    .collect();
                if vals.is_empty() {
                    continue;
                }
                vals.sort_by(f64::total_cmp);
                curve.x.push(x);
                curve.median.push(quantile(&vals, 0.5));
                curve.q1.push(quantile(&vals, 0.25));
                curve.q3.push(quantile(&vals, 0.75));
            }
            curve
        })
        .collect()
}

const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf"];
const LOG_FLOOR: f64 = 1e-16;

/// Standalone SVG: log-scale residual against `x_axis`, one median
/// polyline and one shaded IQR band per curve.
pub fn render_plot(set: &TraceSet, x_axis: XAxis) -> String {
    let curves = summarize(set, x_axis);
    let (w, h, left, right, top, bottom) = (800.0, 500.0, 70.0, 250.0, 20.0, 50.0);
    let finite = |v: f64| if v.is_finite() { v.max(LOG_FLOOR) } else { f64::NAN };
    let ys: Vec<f64> = curves
        .iter()
        .flat_map(|c| c.q1.iter().chain(&c.q3).chain(&c.median).copied())
        .map(finite)
        .filter(|v| v.is_finite())
        .collect();
    let xmax = curves.iter().flat_map(|c| c.x.iter().copied()).fold(0.0f64, f64::max).max(1e-12);
    let ylo = ys.iter().copied().fold(f64::INFINITY, f64::min).log10().floor();
    let yhi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max).log10().ceil();
    let (ylo, yhi) = if ylo.is_finite() && yhi.is_finite() && yhi > ylo { (ylo, yhi) } else { (-1.0, 1.0) };
    let px = |x: f64| left + (w - left - right) * x / xmax;
    let py = |v: f64| {
        let l = if v.is_finite() { v.max(LOG_FLOOR).log10().clamp(ylo, yhi) } else { yhi };
        top + (h - top - bottom) * (yhi - l) / (yhi - ylo)
    };
    let mut svg = String::new();
    let _ = writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{left}" y="{top}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        w - left - right,
        h - top - bottom
    );
    for d in (ylo as i64)..=(yhi as i64) {
        let y = py(10f64.powi(d as i32));
        let _ = writeln!(svg, r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#ddd"/>"##, w - right);
        let _ = writeln!(svg, r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="end">1e{d}</text>"#, left - 5.0, y + 4.0);
    }
    for i in 0..=4 {
        let x = xmax * i as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="11" text-anchor="middle">{}</text>"#,
            px(x),
            h - bottom + 15.0,
            format_tick(x)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#,
        left + (w - left - right) / 2.0,
        h - 12.0,
        x_axis
    );
    let _ = writeln!(
        svg,
        r#"<text x="15" y="{:.2}" font-size="12" text-anchor="middle" transform="rotate(-90 15 {:.2})">residual</text>"#,
        top + (h - top - bottom) / 2.0,
        top + (h - top - bottom) / 2.0
    );
    for (i, c) in curves.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut band: Vec<String> = c.x.iter().zip(&c.q3).map(|(x, v)| format!("{:.2},{:.2}", px(*x), py(*v))).collect();
        band.extend(c.x.iter().zip(&c.q1).rev().map(|(x, v)| format!("{:.2},{:.2}", px(*x), py(*v))));
        let _ = writeln!(svg, r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#, band.join(" "));
        let line: Vec<String> = c.x.iter().zip(&c.median).map(|(x, v)| format!("{:.2},{:.2}", px(*x), py(*v))).collect();
        let _ = writeln!(svg, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#, line.join(" "));
        let ly = top + 15.0 + 18.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="{:.2}" y="{:.2}" width="12" height="3" fill="{color}"/><text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
            w - right + 10.0,
            ly - 4.0,
            w - right + 27.0,
            ly,
            c.key.label()
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn format_tick(x: f64) -> String {
    if x >= 1e4 {
        format!("{x:.0e}")
    } else if x.fract() == 0.0 {
        format!("{x:.0}")
    } else {
        format!("{x:.2}")
    }
}

pub fn emit_plot(set: &TraceSet, x_axis: XAxis, path: &Path) -> Result<()> {
    std::fs::write(path, render_plot(set, x_axis)).map_err(|e| Error::io(path, e))
}

/// First `x` (epochs or sample gradients) at which each run reaches
/// `threshold`, `None` for runs that never do, keyed by curve then seed.
pub fn hitting_points(set: &TraceSet, threshold: f64, x_axis: XAxis) -> Vec<(CurveKey, u64, Option<f64>)> {
    let mut out: Vec<(CurveKey, u64, Option<f64>)> = Vec::new();
    for r in &set.rows {
        let key = CurveKey::of(r);
        let x = match x_axis {
            XAxis::Epochs => r.epoch,
            XAxis::DataPoints => r.data_points as f64,
        };
        let hit = (r.residual <= threshold).then_some(x);
        match out.iter_mut().find(|(k, s, _)| *k == key && *s == r.seed) {
            Some(entry) => {
                if entry.2.is_none() {
                    entry.2 = hit;
                }
            }
            None => out.push((key, r.seed, hit)),
        }
    }
    out
}

/// Default file name for a sweep's outputs inside `dir`.
pub fn output_path(dir: &Path, stem: &str, ext: &str) -> PathBuf {
    dir.join(format!("{stem}.{ext}"))
}
