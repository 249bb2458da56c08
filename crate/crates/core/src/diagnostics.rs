//! Post-processing metrics over completed chains.

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_lr, gamma_ur};

use crate::error::{contract, Error, Result};
use crate::sampler::ChainRecord;

/// Quantile `z` with `P(Z <= z) = level` for `Z ~ chi^2_df`.
///
/// The level is a lower-tail probability, so `(0.99, 1)` gives the familiar
/// 6.6349 threshold whose upper tail is 0.01.
pub fn chisq_quantile(level: f64, df: u32) -> Result<f64> {
    if !(level > 0.0 && level < 1.0) {
        return contract("quantile level must lie in (0, 1)");
    }
    if df == 0 {
        return contract("degrees of freedom must be positive");
    }
    let a = df as f64 / 2.0;
    let upper = level > 0.5;
    let target = if upper { 1.0 - level } else { level };
    // signed so that the root is where this crosses zero and it increases in z
    let f = |z: f64| {
        if upper {
            target - gamma_ur(a, z / 2.0)
        } else {
            gamma_lr(a, z / 2.0) - target
        }
    };
    let mut lo = 0.0;
    let mut hi = df as f64 + 10.0;
    while f(hi) < 0.0 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Biased (divide by `n`) autocovariances at lags `0..n`, computed by FFT.
pub fn autocovariance(series: &[f64]) -> Vec<f64> {
    let n = series.len();
    if n == 0 {
        return Vec::new();
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .map(|v| Complex::new(v - mean, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    let scale = 1.0 / (size as f64 * n as f64);
    buf[..n].iter().map(|c| c.re * scale).collect()
}

/// Integrated autocorrelation time by the initial monotone sequence estimator.
///
/// Normalises by `variance` when given, otherwise by the lag-0 autocovariance.
pub fn act_initial_sequence(series: &[f64], variance: Option<f64>) -> Result<f64> {
    if series.len() < 10 {
        return contract("series must have at least 10 values");
    }
    if let Some(v) = variance {
        if !(v > 0.0 && v.is_finite()) {
            return contract("variance must be positive");
        }
    }
    let gamma = autocovariance(series);
    let g0 = gamma[0];
    if !(g0 > 0.0) || g0 < 1e-300 {
        return Err(Error::Degenerate("degenerate series".into()));
    }
    let mut sum = 0.0;
    let mut prev = f64::INFINITY;
    for pair in gamma.chunks_exact(2) {
        let big = pair[0] + pair[1];
        if big <= 0.0 {
            break;
        }
        let big = big.min(prev);
        sum += big;
        prev = big;
    }
    Ok((2.0 * sum - g0) / variance.unwrap_or(g0))
}

/// Mean squared successive difference.
pub fn asjd(series: &[f64]) -> Result<f64> {
    if series.len() < 2 {
        return contract("series must have at least 2 values");
    }
    let s: f64 = series.windows(2).map(|w| (w[1] - w[0]).powi(2)).sum();
    Ok(s / (series.len() - 1) as f64)
}

/// `C_n` for `n = 1..N` over `X_0..X_N`: `n + 1` indicators divided by `n`.
pub fn running_coverage_component(series: &[f64], sigma2: f64, z1: f64) -> Result<Vec<f64>> {
    if !(sigma2 > 0.0) {
        return contract("component variance must be positive");
    }
    Ok(running_exceedance(series.iter().map(|v| v * v / sigma2 > z1)))
}

fn running_exceedance(mut flags: impl Iterator<Item = bool>) -> Vec<f64> {
    let mut count = match flags.next() {
        Some(f) => f as u64,
        None => return Vec::new(),
    };
    flags
        .enumerate()
        .map(|(i, f)| {
            count += f as u64;
            count as f64 / (i + 1) as f64
        })
        .collect()
}

/// `x^T S^{-1} x` through a Cholesky factor computed once.
#[derive(Clone, Debug)]
pub struct QuadraticForm {
    lower: DMatrix<f64>,
    scratch: Vec<f64>,
}

impl QuadraticForm {
    pub fn new(cov: &DMatrix<f64>) -> Result<Self> {
        if !cov.is_square() || cov.nrows() == 0 {
            return contract("covariance must be square and non-empty");
        }
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Contract("covariance must be positive definite".into()))?;
        Ok(Self {
            scratch: vec![0.0; cov.nrows()],
            lower: chol.l(),
        })
    }

    pub fn dim(&self) -> usize {
        self.scratch.len()
    }

    pub fn eval(&mut self, x: &[f64]) -> f64 {
        let d = self.dim();
        let mut q = 0.0;
        for i in 0..d {
            let mut s = x[i];
            for j in 0..i {
                s -= self.lower[(i, j)] * self.scratch[j];
            }
            let y = s / self.lower[(i, i)];
            self.scratch[i] = y;
            q += y * y;
        }
        q
    }
}

fn check_dim(chain: &ChainRecord, q: &QuadraticForm) -> Result<()> {
    if chain.dim != q.dim() {
        return contract("covariance dimension does not match the chain");
    }
    Ok(())
}

/// `D_n` for `n = 1..N`, with the same `n + 1` over `n` convention as `C_n`.
pub fn running_coverage_joint(chain: &ChainRecord, cov: &DMatrix<f64>, z2: f64) -> Result<Vec<f64>> {
    let mut q = QuadraticForm::new(cov)?;
    check_dim(chain, &q)?;
    Ok(running_exceedance(
        chain.states.chunks_exact(chain.dim).map(|x| q.eval(x) > z2),
    ))
}

/// First index `j >= 0` with `X_j^T S^{-1} X_j < z0`.
pub fn first_hitting_time(chain: &ChainRecord, cov: &DMatrix<f64>, z0: f64) -> Result<Option<usize>> {
    let mut q = QuadraticForm::new(cov)?;
    check_dim(chain, &q)?;
    Ok(chain.states.chunks_exact(chain.dim).position(|x| q.eval(x) < z0))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Act,
    Asjd,
    CoverageComponent,
    CoverageJoint,
    HittingTime,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Act => "act",
            Metric::Asjd => "asjd",
            Metric::CoverageComponent => "coverage_component",
            Metric::CoverageJoint => "coverage_joint",
            Metric::HittingTime => "hitting_time",
        }
    }
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "act" => Metric::Act,
            "asjd" => Metric::Asjd,
            "coverage_component" => Metric::CoverageComponent,
            "coverage_joint" => Metric::CoverageJoint,
            "hitting_time" => Metric::HittingTime,
            other => return Err(Error::Config(format!("unknown metric `{other}`"))),
        })
    }
}

/// One metric value. `component` is `None` for joint quantities and `value`
/// is `None` for a hitting time that never happened.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub repetition: u64,
    pub metric: Metric,
    pub component: Option<usize>,
    pub n: Option<u64>,
    pub value: Option<f64>,
}
