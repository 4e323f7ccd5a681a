//! Empirical-risk objectives `F(x) = (1/n) sum_i f_i(x)` with per-sample,
//! mini-batch and full gradient oracles.
//!
//! Least squares uses `f_i(x) = 1/2 (a_i^T x - y_i)^2`, so
//! `F(x) = ||Ax - y||^2 / (2n)`. Logistic uses
//! `f_i(x) = log(1 + exp(-y_i a_i^T x))` with labels in `{-1, +1}`.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LossKind {
    LeastSquares,
    Logistic,
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            LossKind::LeastSquares => "least-squares",
            LossKind::Logistic => "logistic",
        })
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "least-squares" | "ls" => Ok(LossKind::LeastSquares),
            "logistic" => Ok(LossKind::Logistic),
            other => Err(Error::invalid(format!("unknown objective kind `{other}`"))),
        }
    }
}

/// Counts per-sample gradient evaluations for epoch accounting.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GradientAccount {
    pub sample_gradients_evaluated: u64,
}

impl GradientAccount {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn charge(&mut self, samples: usize) {
        self.sample_gradients_evaluated += samples as u64;
    }
}

/// Dense row-major design matrix with targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n: usize,
    p: usize,
    a: Vec<f64>,
    y: Vec<f64>,
    kind: LossKind,
}

impl Dataset {
    pub fn new(n: usize, p: usize, a: Vec<f64>, y: Vec<f64>, kind: LossKind) -> Result<Self> {
        if n == 0 || p == 0 {
            return Err(Error::invalid(format!("dataset needs n, p >= 1, got {n}x{p}")));
        }
        if a.len() != n * p {
            return Err(Error::invalid(format!(
                "design matrix has {} entries, expected {n}x{p}",
                a.len()
            )));
        }
        if y.len() != n {
            return Err(Error::invalid(format!("expected {n} targets, got {}", y.len())));
        }
        if kind == LossKind::Logistic {
            if let Some(i) = y.iter().position(|&t| t != 1.0 && t != -1.0) {
                return Err(Error::invalid(format!(
                    "logistic target {i} is {}, expected -1 or +1",
                    y[i]
                )));
            }
        }
        Ok(Dataset { n, p, a, y, kind })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn kind(&self) -> LossKind {
        self.kind
    }

    pub fn targets(&self) -> &[f64] {
        &self.y
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.a[i * self.p..(i + 1) * self.p]
    }

    pub fn matrix(&self) -> &[f64] {
        &self.a
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.p {
            return Err(Error::invalid(format!(
                "vector has length {}, dataset has p = {}",
                x.len(),
                self.p
            )));
        }
        Ok(())
    }

    /// `A x`
    pub fn predict(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n).map(|i| dot(self.row(i), x)).collect()
    }

    pub fn loss(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let total: f64 = (0..self.n)
            .map(|i| {
                let z = dot(self.row(i), x);
                match self.kind {
                    LossKind::LeastSquares => 0.5 * (z - self.y[i]).powi(2),
                    LossKind::Logistic => softplus(-self.y[i] * z),
                }
            })
            .sum();
        Ok(total / self.n as f64)
    }

    // d f_i / d(a_i^T x)
    fn sample_scale(&self, i: usize, x: &[f64]) -> f64 {
        let z = dot(self.row(i), x);
        match self.kind {
            LossKind::LeastSquares => z - self.y[i],
            LossKind::Logistic => -self.y[i] * sigmoid(-self.y[i] * z),
        }
    }

    fn accumulate_batch(&self, batch: &[usize], x: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        for &i in batch {
            let scale = self.sample_scale(i, x);
            for (o, &aij) in out.iter_mut().zip(self.row(i)) {
                *o += scale * aij;
            }
        }
        let inv = 1.0 / batch.len() as f64;
        out.iter_mut().for_each(|v| *v *= inv);
    }

    fn check_batch(&self, batch: &[usize]) -> Result<()> {
        if batch.is_empty() {
            return Err(Error::invalid("empty batch"));
        }
        if let Some(&i) = batch.iter().find(|&&i| i >= self.n) {
            return Err(Error::invalid(format!("sample {i} out of range for n = {}", self.n)));
        }
        Ok(())
    }

    /// Mean of the per-sample gradients over `batch`; charges `|batch|`.
    pub fn grad_batch(&self, batch: &[usize], x: &[f64], account: &mut GradientAccount) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        self.check_batch(batch)?;
        let mut out = vec![0.0; self.p];
        self.accumulate_batch(batch, x, &mut out);
        account.charge(batch.len());
        Ok(out)
    }

    /// Full gradient `grad F(x)`; charges `n`.
    pub fn full_gradient(&self, x: &[f64], account: &mut GradientAccount) -> Result<Vec<f64>> {
        let all: Vec<usize> = (0..self.n).collect();
        self.grad_batch(&all, x, account)
    }

    /// Variance-reduced direction
    /// `grad f_I(x) - grad f_I(anchor) + anchor_grad`; charges `2 |batch|`.
    pub fn variance_reduced(
        &self,
        batch: &[usize],
        x: &[f64],
        anchor: &[f64],
        anchor_grad: &[f64],
        account: &mut GradientAccount,
    ) -> Result<Vec<f64>> {
        self.check_dim(x)?;
        self.check_dim(anchor)?;
        self.check_dim(anchor_grad)?;
        self.check_batch(batch)?;
        let mut at_x = vec![0.0; self.p];
        let mut at_anchor = vec![0.0; self.p];
        self.accumulate_batch(batch, x, &mut at_x);
        self.accumulate_batch(batch, anchor, &mut at_anchor);
        account.charge(2 * batch.len());
        Ok(at_x
            .iter()
            .zip(&at_anchor)
            .zip(anchor_grad)
            .map(|((g, h), m)| g - h + m)
            .collect())
    }

    /// `||Ax - y||_2`, least squares only.
    pub fn residual_norm(&self, x: &[f64]) -> Result<f64> {
        if self.kind != LossKind::LeastSquares {
            return Err(Error::UnsupportedMetric(
                "residual norm is defined for least-squares datasets only".into(),
            ));
        }
        self.check_dim(x)?;
        Ok((0..self.n)
            .map(|i| (dot(self.row(i), x) - self.y[i]).powi(2))
            .sum::<f64>()
            .sqrt())
    }

    /// Bregman divergence `F(x) - F(y) - <grad F(y), x - y>`.
    pub fn bregman(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        let grad_y = self.full_gradient(y, &mut GradientAccount::new())?;
        let inner: f64 = grad_y.iter().zip(x.iter().zip(y)).map(|(g, (a, b))| g * (a - b)).sum();
        Ok(self.loss(x)? - self.loss(y)? - inner)
    }

    /// Reads the dataset CSV: a first line `n,p,kind`, then `n` rows of `p`
    /// features followed by the target.
    pub fn parse_csv(text: &str, origin: &Path) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines
            .next()
            .ok_or_else(|| Error::parse(origin, 1, "empty dataset file"))?;
        let fields: Vec<&str> = header.split(',').map(str::trim).collect();
        let [n, p, kind] = fields.as_slice() else {
            return Err(Error::parse(origin, 1, "header must be `n,p,kind`"));
        };
        let n: usize = n.parse().map_err(|_| Error::parse(origin, 1, "bad n"))?;
        let p: usize = p.parse().map_err(|_| Error::parse(origin, 1, "bad p"))?;
        let kind: LossKind = kind.parse().map_err(|e: Error| Error::parse(origin, 1, e.to_string()))?;
        let mut a = Vec::with_capacity(n * p);
        let mut y = Vec::with_capacity(n);
        for (lineno, line) in lines {
            let values: Vec<f64> = line
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| Error::parse(origin, lineno + 1, "non-numeric field"))?;
            if values.len() != p + 1 {
                return Err(Error::parse(
                    origin,
                    lineno + 1,
                    format!("expected {} fields, got {}", p + 1, values.len()),
                ));
            }
            a.extend_from_slice(&values[..p]);
            y.push(values[p]);
        }
        if y.len() != n {
            return Err(Error::parse(origin, 0, format!("header declares {n} rows, found {}", y.len())));
        }
        Dataset::new(n, p, a, y, kind).map_err(|e| Error::parse(origin, 0, e.to_string()))
    }

    pub fn load_csv(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse_csv(&text, path)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{},{},{}\n", self.n, self.p, self.kind);
        for i in 0..self.n {
            for v in self.row(i) {
                out.push_str(&format!("{v:?},"));
            }
            out.push_str(&format!("{:?}\n", self.y[i]));
        }
        out
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + (-t).exp().ln_1p()
    } else {
        t.exp().ln_1p()
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + (-t).exp())
    } else {
        let e = t.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn identity2() -> Dataset {
        Dataset::new(2, 2, vec![1.0, 0.0, 0.0, 1.0], vec![1.0, 1.0], LossKind::LeastSquares).unwrap()
    }

    fn small(kind: LossKind) -> Dataset {
        let a = vec![0.3, -1.2, 0.5, 2.0, 0.1, -0.7, -0.4, 0.9, 1.5, 0.2, -0.6, 0.8];
        let y = match kind {
            LossKind::LeastSquares => vec![0.5, -1.0, 2.0, 0.25],
            LossKind::Logistic => vec![1.0, -1.0, -1.0, 1.0],
        };
        Dataset::new(4, 3, a, y, kind).unwrap()
    }

    #[test]
    fn least_squares_loss_values() {
        let d = identity2();
        assert_eq!(d.loss(&[0.0, 0.0]).unwrap(), 0.5);
        assert_eq!(d.loss(&[1.0, 1.0]).unwrap(), 0.0);
        assert!(d.loss(&[1.0]).is_err());
    }

    #[test]
    fn logistic_at_zero_is_log_two() {
        let d = small(LossKind::Logistic);
        assert!((d.loss(&[0.0; 3]).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn logistic_rejects_bad_labels() {
        assert!(Dataset::new(1, 1, vec![1.0], vec![0.5], LossKind::Logistic).is_err());
    }

    #[test]
    fn single_sample_gradient() {
        let d = Dataset::new(1, 2, vec![1.0, 0.0], vec![0.0], LossKind::LeastSquares).unwrap();
        let mut acc = GradientAccount::new();
        assert_eq!(d.grad_batch(&[0], &[2.0, 5.0], &mut acc).unwrap(), vec![2.0, 0.0]);
        assert_eq!(acc.sample_gradients_evaluated, 1);
        assert!(d.grad_batch(&[], &[2.0, 5.0], &mut acc).is_err());
    }

    #[test]
    fn full_batch_equals_full_gradient() {
        let d = small(LossKind::LeastSquares);
        let x = [0.2, -0.3, 0.9];
        let mut acc = GradientAccount::new();
        let g1 = d.grad_batch(&[0, 1, 2, 3], &x, &mut acc).unwrap();
        let g2 = d.full_gradient(&x, &mut acc).unwrap();
        assert_eq!(g1, g2);
        assert_eq!(acc.sample_gradients_evaluated, 8);
    }

    #[test]
    fn gradients_match_central_differences() {
        for kind in [LossKind::LeastSquares, LossKind::Logistic] {
            let d = small(kind);
            let x = [0.4, -0.8, 0.3];
            let g = d.full_gradient(&x, &mut GradientAccount::new()).unwrap();
            let h = 1e-6;
            for j in 0..3 {
                let mut xp = x;
                let mut xm = x;
                xp[j] += h;
                xm[j] -= h;
                let fd = (d.loss(&xp).unwrap() - d.loss(&xm).unwrap()) / (2.0 * h);
                let rel = (fd - g[j]).abs() / g[j].abs().max(1e-8);
                assert!(rel < 1e-5, "{kind} coordinate {j}: fd {fd} vs {}", g[j]);
            }
        }
    }

    #[test]
    fn residual_norm_identities() {
        let d = small(LossKind::LeastSquares);
        let zero = [0.0; 3];
        let ynorm = d.targets().iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((d.residual_norm(&zero).unwrap() - ynorm).abs() < 1e-15);
        let x = [0.7, 0.1, -0.2];
        let via_loss = (2.0 * d.n() as f64 * d.loss(&x).unwrap()).sqrt();
        assert!((d.residual_norm(&x).unwrap() - via_loss).abs() < 1e-12);
        assert!(matches!(
            small(LossKind::Logistic).residual_norm(&zero),
            Err(Error::UnsupportedMetric(_))
        ));
    }

    #[test]
    fn bregman_is_the_quadratic_form() {
        let d = small(LossKind::LeastSquares);
        let x = [1.0, -0.5, 0.25];
        let y = [0.1, 0.2, -0.3];
        assert_eq!(d.bregman(&x, &x).unwrap(), 0.0);
        let diff: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a - b).collect();
        let ad = d.predict(&diff);
        let quad = 0.5 * dot(&ad, &ad) / d.n() as f64;
        assert!((d.bregman(&x, &y).unwrap() - quad).abs() < 1e-12);
        let dl = small(LossKind::Logistic);
        assert!(dl.bregman(&x, &y).unwrap() >= 0.0);
    }

    #[test]
    fn variance_reduced_charges_twice() {
        let d = small(LossKind::LeastSquares);
        let mut acc = GradientAccount::new();
        let anchor = [0.0; 3];
        let mu = d.full_gradient(&anchor, &mut acc).unwrap();
        let v = d.variance_reduced(&[1, 2], &[0.1, 0.1, 0.1], &anchor, &mu, &mut acc).unwrap();
        assert_eq!(v.len(), 3);
        assert_eq!(acc.sample_gradients_evaluated, 4 + 4);
    }

    #[test]
    fn csv_round_trip() {
        let d = small(LossKind::Logistic);
        let back = Dataset::parse_csv(&d.to_csv(), Path::new("mem")).unwrap();
        assert_eq!(back, d);
        assert!(Dataset::parse_csv("2,2,least-squares\n1,2,3\n", Path::new("mem")).is_err());
    }
}
