//! Competing proposal families: adaptive Gaussian multiple-try trials and the
//! single-try random-walk Metropolis–Hastings proposals.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{contract, Error, Result};
use crate::targets::{pi1_components, pi2_params, BenchmarkTarget, TargetDistribution, PI3_A};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Standard deviations `s_1 < ... < s_M` of the Gaussian trials.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianTrialParams {
    sds: Vec<f64>,
}

impl GaussianTrialParams {
    pub fn new(sds: Vec<f64>) -> Result<Self> {
        if sds.len() < 2 {
            return contract("gaussian trial family needs at least 2 trials");
        }
        if sds.iter().any(|s| !(*s > 0.0 && s.is_finite())) {
            return contract("gaussian trial sds must be positive and finite");
        }
        if sds.windows(2).any(|w| w[0] >= w[1]) {
            return contract("gaussian trial sds must be strictly increasing");
        }
        Ok(Self { sds })
    }

    /// `s_j = 2^(j - 2)` for `j = 1..=m`.
    pub fn doubling(m: usize) -> Result<Self> {
        Self::new((1..=m).map(|j| 2f64.powi(j as i32 - 2)).collect())
    }

    pub fn sds(&self) -> &[f64] {
        &self.sds
    }

    pub fn trials(&self) -> usize {
        self.sds.len()
    }

    /// Log of the `N(x, s_j^2)` density at `y`; `j` is 1-based and unchecked.
    #[inline]
    pub fn ln_density_unchecked(&self, j: usize, x: f64, y: f64) -> f64 {
        let s = self.sds[j - 1];
        let t = (y - x) / s;
        -0.5 * t * t - s.ln() - LN_SQRT_2PI
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, j: usize, x: f64) -> f64 {
        let z: f64 = rng.sample(StandardNormal);
        x + self.sds[j - 1] * z
    }
}

pub fn gaussian_trial_density(j: usize, x: f64, y: f64, p: &GaussianTrialParams) -> Result<f64> {
    if j == 0 || j > p.trials() {
        return contract(format!("trial index {j} outside 1..={}", p.trials()));
    }
    Ok(p.ln_density_unchecked(j, x, y).exp())
}

/// Result of one scale update.
#[derive(Clone, Debug, PartialEq)]
pub struct SdUpdate {
    pub params: GaussianTrialParams,
    /// True when the requested update would have crossed the extremes and was dropped.
    pub clamped: bool,
    /// True when either extreme scale was changed.
    pub changed: bool,
}

/// Halves/doubles the extreme standard deviations according to how often the
/// extreme trials were selected, then re-spaces the rest evenly on a log2 scale.
pub fn adapt_gaussian_sds(
    p: &GaussianTrialParams,
    counts: &[u64],
    interval: usize,
    eta_over: f64,
    eta_under: f64,
) -> Result<SdUpdate> {
    let m = p.trials();
    if counts.len() != m {
        return contract("one selection count per trial is required");
    }
    if interval == 0 {
        return contract("adaptation interval must be >= 1");
    }
    if !(0.0 < eta_under && eta_under < eta_over && eta_over < 1.0) {
        return contract("need 0 < eta_under < eta_over < 1");
    }
    let over = interval as f64 * eta_over;
    let under = interval as f64 * eta_under;
    let (c_first, c_last) = (counts[0] as f64, counts[m - 1] as f64);
    let mut lo = p.sds[0];
    let mut hi = p.sds[m - 1];
    if c_last < under {
        hi *= 0.5;
    } else if c_last > over {
        hi *= 2.0;
    }
    if c_first < under {
        lo *= 2.0;
    } else if c_first > over {
        lo *= 0.5;
    }
    let changed = lo != p.sds[0] || hi != p.sds[m - 1];
    if !changed {
        return Ok(SdUpdate {
            params: p.clone(),
            clamped: false,
            changed: false,
        });
    }
    if lo >= hi {
        return Ok(SdUpdate {
            params: p.clone(),
            clamped: true,
            changed: false,
        });
    }
    Ok(SdUpdate {
        params: GaussianTrialParams {
            sds: log2_spaced(lo, hi, m),
        },
        clamped: false,
        changed: true,
    })
}

fn log2_spaced(lo: f64, hi: f64, m: usize) -> Vec<f64> {
    let (a, b) = (lo.log2(), hi.log2());
    let step = (b - a) / (m - 1) as f64;
    (0..m)
        .map(|i| match i {
            0 => lo,
            i if i == m - 1 => hi,
            i => (a + step * i as f64).exp2(),
        })
        .collect()
}

/// Random-walk proposal `y = x + scale * xi`, `xi` from a zero-mean Gaussian mixture.
#[derive(Clone, Debug)]
pub struct MhProposal {
    scale: f64,
    /// (cumulative weight, lower Cholesky factor)
    components: Vec<(f64, DMatrix<f64>)>,
    dim: usize,
}

impl MhProposal {
    pub fn gaussian(scale: f64, cov: DMatrix<f64>) -> Result<Self> {
        Self::mixture(scale, vec![(1.0, cov)])
    }

    pub fn mixture(scale: f64, components: Vec<(f64, DMatrix<f64>)>) -> Result<Self> {
        if !(scale > 0.0) {
            return contract("proposal scale must be positive");
        }
        let Some(dim) = components.first().map(|c| c.1.nrows()) else {
            return contract("proposal needs at least one component");
        };
        let total: f64 = components.iter().map(|c| c.0).sum();
        if components.iter().any(|c| !(c.0 > 0.0)) || (total - 1.0).abs() > 1e-12 {
            return contract("proposal mixture weights must be positive and sum to 1");
        }
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(components.len());
        for (w, cov) in components {
            if cov.nrows() != dim || cov.ncols() != dim {
                return contract("proposal covariances disagree in dimension");
            }
            let chol = cov
                .cholesky()
                .ok_or_else(|| Error::Contract("proposal covariance not positive definite".into()))?;
            acc += w;
            out.push((acc, chol.l()));
        }
        Ok(Self {
            scale,
            components: out,
            dim,
        })
    }

    /// The random-walk proposals tuned to each benchmark target, scaled by 2.4/sqrt(d).
    pub fn for_benchmark(target: BenchmarkTarget) -> Self {
        let d = target.dim();
        let scale = 2.4 / (d as f64).sqrt();
        let built = match target {
            BenchmarkTarget::Pi1 => Self::mixture(
                scale,
                pi1_components().into_iter().map(|(w, _, c)| (w, c)).collect(),
            ),
            BenchmarkTarget::Pi2 => Self::gaussian(
                scale,
                DMatrix::from_diagonal(&pi2_params().base_variances.into()),
            ),
            BenchmarkTarget::Pi3 => {
                let a = DMatrix::from_row_slice(2, 2, &[PI3_A[0][0], PI3_A[0][1], PI3_A[1][0], PI3_A[1][1]]);
                Self::gaussian(scale, a.try_inverse().expect("A is invertible"))
            }
            BenchmarkTarget::Pi4 => Self::gaussian(scale, DMatrix::identity(1, 1)),
            BenchmarkTarget::Varpi1 | BenchmarkTarget::Varpi2 => {
                let t = crate::targets::make_benchmark_target(target);
                Self::gaussian(scale, t.covariance().expect("gaussian target").clone())
            }
        };
        built.expect("static proposal parameters")
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_mixture(&self) -> bool {
        self.components.len() > 1
    }

    /// Writes `x + scale * xi` into `out`.
    pub fn propose<R: Rng + ?Sized>(&self, rng: &mut R, x: &[f64], out: &mut [f64]) {
        let l = if self.components.len() == 1 {
            &self.components[0].1
        } else {
            let u: f64 = rng.random();
            &self
                .components
                .iter()
                .find(|(c, _)| u < *c)
                .unwrap_or_else(|| self.components.last().unwrap())
                .1
        };
        let mut z = [0.0f64; 16];
        let mut heap;
        let z: &mut [f64] = if self.dim <= z.len() {
            &mut z[..self.dim]
        } else {
            heap = vec![0.0; self.dim];
            &mut heap
        };
        for v in z.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        for i in 0..self.dim {
            let mut s = 0.0;
            for j in 0..=i {
                s += l[(i, j)] * z[j];
            }
            out[i] = x[i] + self.scale * s;
        }
    }
}

/// Generic Metropolis accept/reject for a symmetric proposal.
///
/// `propose` writes a candidate into its second argument; `ln_pi` evaluates the
/// target. On acceptance `x` and `ln_pi_x` are updated in place.
pub fn metropolis_step<R, P, L>(
    rng: &mut R,
    x: &mut Vec<f64>,
    ln_pi_x: &mut f64,
    candidate: &mut Vec<f64>,
    mut propose: P,
    ln_pi: L,
) -> bool
where
    R: Rng + ?Sized,
    P: FnMut(&mut R, &[f64], &mut [f64]),
    L: Fn(&[f64]) -> f64,
{
    candidate.resize(x.len(), 0.0);
    propose(rng, x, candidate);
    let ln_y = ln_pi(candidate);
    let log_ratio = ln_y - *ln_pi_x;
    let accept = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
    if accept {
        std::mem::swap(x, candidate);
        *ln_pi_x = ln_y;
    }
    accept
}

/// One random-walk Metropolis–Hastings step against a target.
pub fn mh_step<R: Rng + ?Sized>(
    rng: &mut R,
    x: &mut Vec<f64>,
    ln_pi_x: &mut f64,
    candidate: &mut Vec<f64>,
    proposal: &MhProposal,
    target: &TargetDistribution,
) -> Result<bool> {
    if proposal.dim() != target.dim() || x.len() != target.dim() {
        return contract("proposal, state and target dimensions must agree");
    }
    Ok(metropolis_step(
        rng,
        x,
        ln_pi_x,
        candidate,
        |r, cur, out| proposal.propose(r, cur, out),
        |y| target.ln_density(y),
    ))
}
