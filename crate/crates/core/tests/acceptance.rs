//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::time::Instant;

use gsvrg::graph::{connected_components, grid_graph, is_in_model, random_connected_support, Graph, WgmModel};
use gsvrg::harness::{gen_instance, hitting_points, run_sweep, BatchSize, ExperimentSpec, XAxis};
use gsvrg::objective::{distance, norm};
use gsvrg::projection::{exact_project, head_project, tail_project, HEAD_SLACK, TAIL_SLACK};
use gsvrg::solver::{run, Method, RunOptions, ScsgOption, SolverConfig};
use gsvrg::theory::{
    contraction_params, estimate_on_family, eta_range, fit_convergence_slope, EtaRange, SupportFamily,
};
use gsvrg::{Dataset, GradientAccount, LossKind, Trace};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const SEEDS: u64 = 10;
const BASE_SEED: u64 = 42;

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: impl Into<String>) -> Verdict {
    Verdict {
        pass,
        detail: detail.into(),
    }
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

fn fmt_median(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.3}")
    } else {
        "never".into()
    }
}

/// Ten GraphSVRG-IHT runs on the 16x16 grid, s = 32, m = 80, eta = 0.01.
fn recovery_runs() -> (Vec<Trace>, f64) {
    let graph = grid_graph(16, 16).unwrap();
    let model = WgmModel::unit(32, 1).unwrap();
    let spec = ExperimentSpec::default();
    let start = Instant::now();
    let traces = (0..SEEDS)
        .map(|t| {
            let seed = BASE_SEED + t;
            let (data, truth) = gen_instance(&graph, &model, 80, 0.0, seed).unwrap();
            let cfg = spec.solver_config(Method::GraphSvrg, 32, 0.01, 32, 1, 80, seed).unwrap();
            let opts = RunOptions {
                truth: Some(&truth),
                timing: false,
            };
            run(&data, Some(&graph), &cfg, &mut GradientAccount::new(), &opts).unwrap().trace
        })
        .collect();
    (traces, start.elapsed().as_secs_f64())
}

fn criterion_1(traces: &[Trace], seconds: f64) -> Verdict {
    let finals: Vec<f64> = traces.iter().map(|t| t.last().unwrap().residual).collect();
    let hits = finals.iter().filter(|&&r| r < 1e-6).count();
    let detail = format!(
        "{hits}/10 seeds reach residual < 1e-6 in 50 epochs (median final {:.3e}, best {:.3e}); {seconds:.1} s",
        median(finals.clone()),
        finals.iter().cloned().fold(f64::INFINITY, f64::min)
    );
    verdict(hits >= 8 && seconds < 60.0, detail)
}

fn median_hit(spec: &ExperimentSpec, threshold: f64, axis: XAxis) -> f64 {
    let set = run_sweep(spec, rayon::current_num_threads()).unwrap();
    let hits: Vec<f64> = hitting_points(&set, threshold, axis)
        .into_iter()
        .map(|(_, _, h)| h.unwrap_or(f64::INFINITY))
        .collect();
    assert_eq!(hits.len(), SEEDS as usize);
    median(hits)
}

fn sweep_of(method: Method, s: usize, batch: BatchSize, minibatch: usize, option: ScsgOption) -> ExperimentSpec {
    ExperimentSpec {
        s_values: vec![s],
        methods: vec![method],
        batch_values: vec![batch],
        minibatch_values: vec![minibatch],
        trials: SEEDS as usize,
        seed: BASE_SEED,
        scsg_option: option,
        ..ExperimentSpec::default()
    }
}

fn criterion_2() -> Verdict {
    let mut pass = true;
    let mut parts = Vec::new();
    for s in [32, 64] {
        let svrg = median_hit(&sweep_of(Method::GraphSvrg, s, BatchSize::Sparsity, 1, ScsgOption::Fixed), 1e-3, XAxis::Epochs);
        let sto = median_hit(&sweep_of(Method::GraphStoIht, s, BatchSize::Sparsity, s, ScsgOption::Fixed), 1e-3, XAxis::Epochs);
        // a method that never gets there cannot count as no slower
        pass &= svrg.is_finite() && svrg <= sto;
        parts.push(format!(
            "s={s}: median epochs to 1e-3 graph-svrg {} vs graph-sto-iht {}",
            fmt_median(svrg),
            fmt_median(sto)
        ));
    }
    verdict(pass, parts.join("; "))
}

fn criterion_3() -> Verdict {
    let half = BatchSize::Fraction(2);
    let scsg = median_hit(&sweep_of(Method::GraphScsg, 32, half, 1, ScsgOption::Geometric), 1e-3, XAxis::DataPoints);
    let svrg = median_hit(&sweep_of(Method::GraphSvrg, 32, half, 1, ScsgOption::Geometric), 1e-3, XAxis::DataPoints);
    verdict(
        scsg.is_finite() && scsg <= svrg,
        format!(
            "B=n/2, b=1: median sample gradients to 1e-3 graph-scsg {} vs graph-svrg {}",
            fmt_median(scsg),
            fmt_median(svrg)
        ),
    )
}

fn criterion_4() -> Verdict {
    let graph = grid_graph(8, 8).unwrap();
    let model = WgmModel::unit(6, 1).unwrap();
    let (data, _) = gen_instance(&graph, &model, 40, 0.0, 5).unwrap();
    let n = data.n();
    let mut checked = 0;
    let mut equal = true;
    for (outer, epochs) in [(1, 50.0), (2, 50.0), (3, 50.0), (usize::MAX, 0.3), (usize::MAX, 1.7), (usize::MAX, 6.0)] {
        let mut svrg = SolverConfig::new(Method::GraphSvrg, 10.0, model, n);
        svrg.inner_loops = n;
        svrg.outer_loops = outer;
        svrg.max_epochs = epochs;
        svrg.residual_stop = 0.0;
        svrg.seed = 9;
        let mut scsg = svrg.clone();
        scsg.method = Method::GraphScsg;
        scsg.batch_b = n;
        scsg.minibatch_b = 1;
        scsg.scsg_option = ScsgOption::Fixed;
        let (mut acc_a, mut acc_b) = (GradientAccount::new(), GradientAccount::new());
        let a = run(&data, Some(&graph), &svrg, &mut acc_a, &RunOptions::default()).unwrap();
        let b = run(&data, Some(&graph), &scsg, &mut acc_b, &RunOptions::default()).unwrap();
        let same_x = a.x.iter().zip(&b.x).all(|(u, v)| u.to_bits() == v.to_bits());
        let same_trace = a.trace.checkpoints.len() == b.trace.checkpoints.len()
            && a
                .trace
                .checkpoints
                .iter()
                .zip(&b.trace.checkpoints)
                .all(|(u, v)| u.residual.to_bits() == v.residual.to_bits() && u.data_points == v.data_points);
        equal &= same_x && same_trace && acc_a == acc_b;
        checked += 1;
    }
    verdict(
        equal,
        format!("{checked} stopping points: iterates, traces and gradient counts bitwise {}", if equal { "equal" } else { "different" }),
    )
}

fn criterion_5() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (n, p) = (10, 7);
    let a: Vec<f64> = (0..n * p).map(|_| StandardNormal.sample(&mut rng)).collect();
    let y: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let data = Dataset::new(n, p, a, y, LossKind::LeastSquares).unwrap();
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let x: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
        let anchor: Vec<f64> = (0..p).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut acc = GradientAccount::new();
        let mu = data.full_gradient(&anchor, &mut acc).unwrap();
        let mut mean = vec![0.0; p];
        for i in 0..n {
            let v = data.variance_reduced(&[i], &x, &anchor, &mu, &mut acc).unwrap();
            for (m, vi) in mean.iter_mut().zip(v) {
                *m += vi / n as f64;
            }
        }
        let full = data.full_gradient(&x, &mut acc).unwrap();
        worst = worst.max(mean.iter().zip(&full).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max));
    }
    verdict(worst <= 1e-12, format!("max |E v - grad F| = {worst:.2e} over 20 points (n = 10)"))
}

fn criterion_6() -> Verdict {
    let graph = grid_graph(3, 3).unwrap();
    let model = WgmModel::unit(3, 1).unwrap();
    let head_model = model.with_slack(HEAD_SLACK);
    let tail_model = model.with_slack(TAIL_SLACK);
    let relaxed = head_model.relaxed(&graph);
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let start = Instant::now();
    let (mut head_min, mut tail_max) = (f64::INFINITY, 0.0f64);
    let mut in_model = true;
    for _ in 0..1000 {
        let x: Vec<f64> = (0..9).map(|_| StandardNormal.sample(&mut rng)).collect();
        let exact = exact_project(&x, &graph, &model).unwrap();
        let head = head_project(&x, &graph, &head_model).unwrap();
        let tail = tail_project(&x, &graph, &tail_model).unwrap();
        head_min = head_min.min(norm(&head.vector) / norm(&exact.vector));
        tail_max = tail_max.max(distance(&tail.vector, &x) / distance(&exact.vector, &x));
        in_model &= is_in_model(&graph, &head.support, &relaxed).unwrap()
            && connected_components(&graph, &head.support).unwrap() <= model.g
            && is_in_model(&graph, &tail.support, &model).unwrap();
    }
    let seconds = start.elapsed().as_secs_f64();
    verdict(
        head_min >= 0.25 && tail_max <= 2.0 && in_model && seconds < 30.0,
        format!(
            "min head ratio {head_min:.4}, max tail ratio {tail_max:.4}, supports in model: {in_model}; {seconds:.2} s"
        ),
    )
}

fn criterion_7() -> Verdict {
    let graph: Graph = grid_graph(3, 4).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let (n, p) = (8, 12);
    let a: Vec<f64> = (0..n * p).map(|_| StandardNormal.sample(&mut rng)).collect();
    let y: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
    let data = Dataset::new(n, p, a, y, LossKind::LeastSquares).unwrap();
    let family = SupportFamily {
        max_size: 3,
        max_components: 1,
    };
    let est = estimate_on_family(&data, &graph, family, 7).unwrap();
    let (alpha, beta) = (est.alpha, est.beta_per_sample);
    let tau = 1.0 / beta;
    let rate = (alpha * beta * tau * tau - 2.0 * alpha * tau + 1.0).sqrt();
    let mut min_slack = f64::INFINITY;
    for _ in 0..100 {
        let omega = random_connected_support(&graph, rng.random_range(1..=3), 1, &mut rng).unwrap();
        let mut x = vec![0.0; p];
        let mut z = vec![0.0; p];
        for &i in omega.indices() {
            x[i] = StandardNormal.sample(&mut rng);
            z[i] = StandardNormal.sample(&mut rng);
        }
        let d: Vec<f64> = x.iter().zip(&z).map(|(u, v)| u - v).collect();
        // grad f_i(x) - grad f_i(z) = a_i a_i^T (x - z), restricted to omega
        let mut expectation = 0.0;
        for i in 0..n {
            let row = data.row(i);
            let inner: f64 = row.iter().zip(&d).map(|(r, v)| r * v).sum();
            let mut step = d.clone();
            for &j in omega.indices() {
                step[j] -= tau * row[j] * inner;
            }
            expectation += norm(&step) / n as f64;
        }
        min_slack = min_slack.min(rate * norm(&d) - expectation);
    }
    verdict(
        est.exact && min_slack >= -1e-10,
        format!(
            "alpha {alpha:.4}, per-sample beta {beta:.4} (exact: {}), tau = 1/beta; min slack {min_slack:.3e} over 100 pairs",
            est.exact
        ),
    )
}

fn criterion_8() -> Verdict {
    let mut pass = true;
    let (low, high) = eta_range(1.0, 1.0).unwrap().interval().unwrap();
    let interval_ok = (low - 0.75).abs() <= 1e-12 && (high - 1.25).abs() <= 1e-12;
    pass &= interval_ok;
    let mut worst_root: f64 = 0.0;
    let (mut scanned, mut samples, mut held, mut worst_ratio) = (0, 0, 0, 0.0f64);
    for alpha in [0.05, 0.3, 1.0, 4.0, 25.0] {
        for ratio in [1.0, 1.01, 1.03, 1.05, 16.0 / 15.0] {
            let beta = alpha * ratio;
            let EtaRange::Interval { low, high } = eta_range(alpha, beta).unwrap() else {
                pass = false;
                continue;
            };
            scanned += 1;
            for eta in [low, high] {
                let root = alpha * beta * eta * eta - 2.0 * alpha * eta + 15.0 / 16.0;
                worst_root = worst_root.max(root.abs() / alpha);
            }
            for k in 1..=100 {
                let eta = low + (high - low) * k as f64 / 101.0;
                samples += 1;
                match contraction_params(alpha, beta, eta, None, 1.0, 1.0) {
                    Ok(c) => {
                        if c.error_ratio_below_one() {
                            held += 1;
                        }
                        let r = if c.rate_below_one() { c.error_ratio() } else { f64::INFINITY };
                        worst_ratio = worst_ratio.max(r);
                    }
                    Err(_) => worst_ratio = f64::INFINITY,
                }
            }
        }
    }
    pass &= worst_root <= 1e-12 && held == samples;
    verdict(
        pass,
        format!(
            "eta_range(1,1) = ({low}, {high}); endpoint residual {worst_root:.1e}; delta/(1-lambda) < 1 at {held}/{samples} samples over {scanned} intervals (worst {})",
            if worst_ratio.is_finite() { format!("{worst_ratio:.3}") } else { "lambda >= 1".into() }
        ),
    )
}

fn criterion_9(traces: &[Trace]) -> Verdict {
    let mut good = 0;
    let mut notes = Vec::new();
    for t in traces {
        match fit_convergence_slope(t, 1e-8) {
            Ok(fit) => {
                if fit.slope < 0.0 && fit.r_squared >= 0.9 {
                    good += 1;
                }
                notes.push(format!("{:.3}/{:.2}", fit.slope, fit.r_squared));
            }
            Err(_) => notes.push("too few points".into()),
        }
    }
    verdict(
        good == traces.len(),
        format!("{good}/{} traces with slope < 0 and R^2 >= 0.9 (slope/R^2: {})", traces.len(), notes.join(", ")),
    )
}

fn criterion_10() -> Verdict {
    let spec = ExperimentSpec {
        rows: 6,
        cols: 6,
        s_values: vec![4, 6],
        eta_values: vec![5.0, 20.0],
        methods: Method::ALL.to_vec(),
        batch_values: vec![BatchSize::Sparsity, BatchSize::Fraction(2)],
        minibatch_values: vec![1, 2],
        trials: 2,
        epochs: 3.0,
        scsg_option: ScsgOption::Geometric,
        ..ExperimentSpec::default()
    };
    let dir = tempfile::tempdir().unwrap();
    let text = gsvrg::harness::traces_to_csv(&run_sweep(&spec, 1).unwrap());
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    gsvrg::harness::write_traces(&run_sweep(&spec, 1).unwrap(), &a).unwrap();
    gsvrg::harness::write_traces(&run_sweep(&spec, 4).unwrap(), &b).unwrap();
    let (ba, bb) = (std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let same = ba == bb && ba == text.as_bytes();
    verdict(
        same,
        format!("{} bytes, {} rows; reruns with 1 and 4 workers identical: {same}", ba.len(), text.lines().count() - 1),
    )
}

fn main() {
    let (traces, seconds) = recovery_runs();
    let verdicts = [
        ("recovery", criterion_1(&traces, seconds)),
        ("sparsity sweep ordering", criterion_2()),
        ("batch size effect", criterion_3()),
        ("degeneracy", criterion_4()),
        ("variance reduction unbiased", criterion_5()),
        ("projection oracles", criterion_6()),
        ("contraction", criterion_7()),
        ("theory calculator", criterion_8()),
        ("linear convergence", criterion_9(&traces)),
        ("determinism", criterion_10()),
    ];
    let mut failed = 0;
    for (i, (name, v)) in verdicts.iter().enumerate() {
        println!("criterion {:>2} {} [{name}]: {}", i + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} passed, {failed} failed", verdicts.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
