//! Convergence-theory calculators.
//!
//! With `r(t) = sqrt(alpha beta t^2 - 2 alpha t + 1)`:
//!
//! - `alpha0 = c_H alpha tau - r(tau)`, `beta0 = (1 + c_H) tau`
//! - `delta = (1 + c_T)(r(eta) + sqrt(1 - alpha0))`, with a variant using
//!   `sqrt(1 - alpha0^2)`
//! - `lambda = 2 (1 + c_T) r(eta)`, with the variant
//!   `2 (1 + c_T)(delta' / (1 + c_T) - sqrt(1 - alpha0^2))` and its
//!   `(1 + c_T)`-free form
//! - `gamma = (1 + c_T)(beta0 / alpha0 + alpha0 beta0 / sqrt(1 - alpha0^2) + eta)`
//!
//! Quantities outside the square-root domain come out as NaN.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{count_components_masked, random_connected_support, Graph, WgmModel};
use crate::objective::{Dataset, LossKind};
use crate::projection::{EXACT_MAX_VERTICES, HEAD_SLACK};
use crate::solver::Trace;

/// Supports with at most `max_size` vertices forming at most
/// `max_components` connected components.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SupportFamily {
    pub max_size: usize,
    pub max_components: usize,
}

impl SupportFamily {
    pub fn of_model(model: &WgmModel) -> Self {
        SupportFamily {
            max_size: model.s,
            max_components: model.g,
        }
    }

    /// Family containing every `supp(x) ∪ supp(h) ∪ supp(t)` with `x` in the
    /// model, `h` a head output and `t` a tail output.
    pub fn sum_of(model: &WgmModel) -> Self {
        let head = (HEAD_SLACK * model.s as f64).ceil() as usize;
        SupportFamily {
            max_size: 2 * model.s + head,
            max_components: 3 * model.g,
        }
    }

    fn describe(&self) -> String {
        format!(
            "supports with |S| <= {} and at most {} components",
            self.max_size, self.max_components
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RscRssEstimate {
    /// Smallest restricted eigenvalue of `A^T A / n`.
    pub alpha: f64,
    /// Largest restricted eigenvalue of `A^T A / n`.
    pub beta: f64,
    /// Largest restricted `||a_i||^2`, the smoothness of every single `f_i`.
    pub beta_per_sample: f64,
    pub scope: String,
    /// False when supports were sampled rather than enumerated.
    pub exact: bool,
    pub supports_examined: usize,
}

/// Number of random supports drawn in approximate mode.
pub const APPROXIMATE_SAMPLES: usize = 256;

/// RSC/RSS constants over the sum family `M ⊕ M_H ⊕ M_T` of `model`.
pub fn estimate_rsc_rss(dataset: &Dataset, graph: &Graph, model: &WgmModel) -> Result<RscRssEstimate> {
    estimate_on_family(dataset, graph, SupportFamily::sum_of(model), 42)
}

/// Exact enumeration when `p <= 16`, otherwise random connected supports.
pub fn estimate_on_family(
    dataset: &Dataset,
    graph: &Graph,
    family: SupportFamily,
    seed: u64,
) -> Result<RscRssEstimate> {
    if dataset.kind() != LossKind::LeastSquares {
        return Err(Error::UnsupportedMetric(
            "restricted eigenvalues need a constant Hessian; logistic loss is not supported".into(),
        ));
    }
    let p = dataset.p();
    if graph.num_vertices() != p {
        return Err(Error::invalid(format!(
            "graph has {} vertices but dataset has p = {p}",
            graph.num_vertices()
        )));
    }
    if family.max_size == 0 || family.max_components == 0 {
        return Err(Error::invalid("support family must allow at least one vertex"));
    }
    let supports = if p <= EXACT_MAX_VERTICES {
        maximal_supports(graph, family)
    } else {
        sampled_supports(graph, family, seed)?
    };
    let mut estimate = RscRssEstimate {
        alpha: f64::INFINITY,
        beta: 0.0,
        beta_per_sample: 0.0,
        scope: family.describe(),
        exact: p <= EXACT_MAX_VERTICES,
        supports_examined: supports.len(),
    };
    for support in &supports {
        let (lo, hi) = restricted_extremes(dataset, support);
        estimate.alpha = estimate.alpha.min(lo);
        estimate.beta = estimate.beta.max(hi);
        for i in 0..dataset.n() {
            let row = dataset.row(i);
            let sq: f64 = support.iter().map(|&j| row[j] * row[j]).sum();
            estimate.beta_per_sample = estimate.beta_per_sample.max(sq);
        }
    }
    if !estimate.exact {
        estimate.scope.push_str(&format!(" ({} sampled; alpha is an upper and beta a lower estimate)", supports.len()));
    }
    Ok(estimate)
}

fn restricted_extremes(dataset: &Dataset, support: &[usize]) -> (f64, f64) {
    let k = support.len();
    let n = dataset.n() as f64;
    let mut gram = DMatrix::<f64>::zeros(k, k);
    for i in 0..dataset.n() {
        let row = dataset.row(i);
        for (a, &ja) in support.iter().enumerate() {
            let va = row[ja];
            for (b, &jb) in support.iter().enumerate().skip(a) {
                gram[(a, b)] += va * row[jb];
            }
        }
    }
    for a in 0..k {
        for b in a..k {
            let v = gram[(a, b)] / n;
            gram[(a, b)] = v;
            gram[(b, a)] = v;
        }
    }
    let eig = SymmetricEigen::new(gram).eigenvalues;
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo.max(0.0), hi)
}

fn in_family(graph: &Graph, mask: u32, family: SupportFamily, scratch: &mut Vec<bool>) -> bool {
    let size = mask.count_ones() as usize;
    if size == 0 || size > family.max_size {
        return false;
    }
    let vertices: Vec<usize> = (0..graph.num_vertices()).filter(|v| mask >> v & 1 == 1).collect();
    scratch.iter_mut().enumerate().for_each(|(v, m)| *m = mask >> v & 1 == 1);
    count_components_masked(graph, &vertices, scratch) <= family.max_components
}

/// Members of the family that cannot be grown by one vertex. Every member is
/// contained in one of these, so by eigenvalue interlacing they carry the
/// extreme restricted eigenvalues.
fn maximal_supports(graph: &Graph, family: SupportFamily) -> Vec<Vec<usize>> {
    let p = graph.num_vertices();
    let mut scratch = vec![false; p];
    let members: Vec<bool> = (0..1u32 << p)
        .map(|mask| in_family(graph, mask, family, &mut scratch))
        .collect();
    (1..1u32 << p)
        .filter(|&mask| members[mask as usize])
        .filter(|&mask| (0..p).all(|v| mask >> v & 1 == 1 || !members[(mask | 1 << v) as usize]))
        .map(|mask| (0..p).filter(|v| mask >> v & 1 == 1).collect())
        .collect()
}

fn sampled_supports(graph: &Graph, family: SupportFamily, seed: u64) -> Result<Vec<Vec<usize>>> {
    let p = graph.num_vertices();
    if family.max_size >= p {
        return Ok(vec![(0..p).collect()]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = family.max_components.min(family.max_size);
    (0..APPROXIMATE_SAMPLES)
        .map(|_| random_connected_support(graph, family.max_size, g, &mut rng).map(|s| s.indices().to_vec()))
        .collect()
}

/// Admissible constant learning rates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaRange {
    Interval { low: f64, high: f64 },
    /// `beta / alpha` exceeds 16/15.
    Infeasible { ratio: f64 },
}

impl EtaRange {
    pub fn interval(&self) -> Option<(f64, f64)> {
        match *self {
            EtaRange::Interval { low, high } => Some((low, high)),
            EtaRange::Infeasible { .. } => None,
        }
    }
}

/// `((2a - sqrt(4a^2 - 3.75ab)) / (2ab), (2a + sqrt(4a^2 - 3.75ab)) / (2ab))`.
pub fn eta_range(alpha: f64, beta: f64) -> Result<EtaRange> {
    if !(alpha > 0.0 && beta > 0.0) || !alpha.is_finite() || !beta.is_finite() {
        return Err(Error::invalid(format!(
            "alpha and beta must be positive and finite, got alpha={alpha}, beta={beta}"
        )));
    }
    let mut disc = 4.0 * alpha * alpha - 3.75 * alpha * beta;
    if disc < 0.0 && disc > -1e-12 * alpha * alpha {
        disc = 0.0;
    }
    if disc < 0.0 {
        return Ok(EtaRange::Infeasible { ratio: beta / alpha });
    }
    let root = disc.sqrt();
    let denom = 2.0 * alpha * beta;
    Ok(EtaRange::Interval {
        low: (2.0 * alpha - root) / denom,
        high: (2.0 * alpha + root) / denom,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContractionParams {
    pub alpha0: f64,
    pub beta0: f64,
    /// `beta0/alpha0 + sqrt(alpha0 beta0 / (1 - alpha0))`.
    pub sigma1_coeff: f64,
    /// `beta0/alpha0 + alpha0 beta0 / sqrt(1 - alpha0^2)`, the form inside gamma.
    pub sigma1_coeff_alt: f64,
    /// `r(eta)`.
    pub radical: f64,
    pub delta: f64,
    pub delta_alt: f64,
    pub lambda: f64,
    pub lambda_alt: f64,
    /// `lambda_alt / (1 + c_T)`.
    pub lambda_reduced: f64,
    pub gamma: f64,
    pub tau: f64,
    pub c_h: f64,
    pub c_t: f64,
}

impl ContractionParams {
    /// `lambda < 1`.
    pub fn rate_below_one(&self) -> bool {
        self.lambda < 1.0
    }

    /// `delta / (1 - lambda)`.
    pub fn error_ratio(&self) -> f64 {
        self.delta / (1.0 - self.lambda)
    }

    /// `lambda < 1` and `delta / (1 - lambda) < 1`.
    pub fn error_ratio_below_one(&self) -> bool {
        self.rate_below_one() && self.error_ratio() < 1.0
    }

    /// The two lambda forms agree to `tol` (relative).
    pub fn lambdas_agree(&self, tol: f64) -> bool {
        (self.lambda - self.lambda_alt).abs() <= tol * self.lambda.abs().max(1.0)
    }
}

fn radical(alpha: f64, beta: f64, t: f64, name: &str) -> Result<f64> {
    let inside = alpha * beta * t * t - 2.0 * alpha * t + 1.0;
    if inside < 0.0 {
        return Err(Error::invalid(format!(
            "alpha*beta*{name}^2 - 2*alpha*{name} + 1 = {inside} is negative"
        )));
    }
    Ok(inside.sqrt())
}

/// Constants for learning rate `eta`; `tau` defaults to `eta`.
pub fn contraction_params(
    alpha: f64,
    beta: f64,
    eta: f64,
    tau: Option<f64>,
    c_h: f64,
    c_t: f64,
) -> Result<ContractionParams> {
    if !(alpha > 0.0 && beta > 0.0 && eta > 0.0) {
        return Err(Error::invalid("alpha, beta and eta must be positive"));
    }
    let tau = tau.unwrap_or(eta);
    if !(tau > 0.0 && tau < 2.0 / beta) {
        return Err(Error::invalid(format!("tau = {tau} must lie in (0, 2/beta = {})", 2.0 / beta)));
    }
    if !(c_h > 0.0 && c_h <= 1.0) {
        return Err(Error::invalid(format!("c_H = {c_h} must lie in (0, 1]")));
    }
    if !(c_t >= 1.0) {
        return Err(Error::invalid(format!("c_T = {c_t} must be at least 1")));
    }
    let r_tau = radical(alpha, beta, tau, "tau")?;
    let r_eta = radical(alpha, beta, eta, "eta")?;
    let alpha0 = c_h * alpha * tau - r_tau;
    let beta0 = (1.0 + c_h) * tau;
    let one_minus = (1.0 - alpha0).sqrt();
    let one_minus_sq = (1.0 - alpha0 * alpha0).sqrt();
    let delta = (1.0 + c_t) * (r_eta + one_minus);
    let delta_alt = (1.0 + c_t) * (r_eta + one_minus_sq);
    let lambda_reduced = 2.0 * (delta_alt / (1.0 + c_t) - one_minus_sq);
    let sigma1_coeff_alt = beta0 / alpha0 + alpha0 * beta0 / one_minus_sq;
    Ok(ContractionParams {
        alpha0,
        beta0,
        sigma1_coeff: beta0 / alpha0 + (alpha0 * beta0 / (1.0 - alpha0)).sqrt(),
        sigma1_coeff_alt,
        radical: r_eta,
        delta,
        delta_alt,
        lambda: (1.0 + c_t) * 2.0 * r_eta,
        lambda_alt: (1.0 + c_t) * lambda_reduced,
        lambda_reduced,
        gamma: (1.0 + c_t) * (sigma1_coeff_alt + eta),
        tau,
        c_h,
        c_t,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    /// Change in `ln(residual)` per epoch.
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub points: usize,
}

/// Least-squares line through `(epoch, ln residual)` for checkpoints with
/// residual above `floor`. Needs at least five such checkpoints.
pub fn fit_convergence_slope(trace: &Trace, floor: f64) -> Result<SlopeFit> {
    let pts: Vec<(f64, f64)> = trace
        .checkpoints
        .iter()
        .filter(|c| c.residual > floor && c.residual.is_finite())
        .map(|c| (c.epoch, c.residual.ln()))
        .collect();
    fit_line(&pts)
}

pub(crate) fn fit_line(pts: &[(f64, f64)]) -> Result<SlopeFit> {
    if pts.len() < 5 {
        return Err(Error::InsufficientData(format!(
            "need at least 5 points above the floor, found {}",
            pts.len()
        )));
    }
    let k = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / k;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / k;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = pts.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all points share one epoch".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pts.iter().map(|p| (p.1 - intercept - slope * p.0).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - sse / syy };
    Ok(SlopeFit {
        slope,
        intercept,
        r_squared,
        points: pts.len(),
    })
}
