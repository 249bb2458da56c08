//! Target distributions, evaluated as un-normalised log densities.
//!
//! The six benchmark targets are built by [`make_benchmark_target`]; custom
//! targets can be wrapped around any closure with [`TargetDistribution::custom`].

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{contract, Error, Result};

type LogDensityFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// Zero-mean Gaussian quadratic form `-1/2 x' P x` with a precomputed precision `P`.
#[derive(Clone, Debug)]
struct GaussianForm {
    dim: usize,
    precision: Vec<f64>,
    /// `-1/2 ln det(Sigma)`
    half_ln_det: f64,
}

impl GaussianForm {
    fn new(cov: &DMatrix<f64>) -> Result<Self> {
        let chol = cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::Contract("covariance is not positive definite".into()))?;
        let ln_det: f64 = chol.l().diagonal().iter().map(|v| 2.0 * v.ln()).sum();
        let inv = chol.inverse();
        let dim = cov.nrows();
        let mut precision = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                precision.push(inv[(i, j)]);
            }
        }
        Ok(Self {
            dim,
            precision,
            half_ln_det: -0.5 * ln_det,
        })
    }

    #[inline]
    fn quad(&self, x: &[f64], mean: Option<&[f64]>) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for i in 0..d {
            let xi = x[i] - mean.map_or(0.0, |m| m[i]);
            let row = &self.precision[i * d..(i + 1) * d];
            let mut s = 0.0;
            for j in 0..d {
                s += row[j] * (x[j] - mean.map_or(0.0, |m| m[j]));
            }
            acc += xi * s;
        }
        acc
    }
}

#[derive(Clone)]
enum Density {
    Gaussian(GaussianForm),
    Mixture(Vec<(f64, Vec<f64>, GaussianForm)>),
    Banana { b: f64, inv_var: Vec<f64> },
    Perturbed2d { a: [[f64; 2]; 2] },
    Bistable,
    Custom(Arc<LogDensityFn>),
}

/// Parameters of the twisted ("banana") Gaussian `f o phi_b`.
#[derive(Clone, Debug, PartialEq)]
pub struct BananaParams {
    pub b: f64,
    /// Diagonal of the base covariance.
    pub base_variances: Vec<f64>,
}

impl BananaParams {
    pub fn new(b: f64, base_variances: Vec<f64>) -> Result<Self> {
        if !(b >= 0.0) || !b.is_finite() {
            return contract("banana non-linearity b must be a finite non-negative real");
        }
        if base_variances.len() < 2 || base_variances.iter().any(|v| !(*v > 0.0)) {
            return contract("banana base covariance needs >= 2 positive variances");
        }
        Ok(Self { b, base_variances })
    }
}

/// A (possibly un-normalised) log density on R^d.
#[derive(Clone)]
pub struct TargetDistribution {
    name: String,
    dim: usize,
    density: Density,
    component_variances: Option<Vec<f64>>,
    covariance: Option<DMatrix<f64>>,
}

impl fmt::Debug for TargetDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TargetDistribution")
            .field("name", &self.name)
            .field("dim", &self.dim)
            .field("component_variances", &self.component_variances)
            .finish_non_exhaustive()
    }
}

impl TargetDistribution {
    /// Wraps a user-supplied log density.
    pub fn custom<F>(name: impl Into<String>, dim: usize, log_density: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Send + Sync + 'static,
    {
        if dim == 0 {
            return contract("target dimension must be positive");
        }
        Ok(Self {
            name: name.into(),
            dim,
            density: Density::Custom(Arc::new(log_density)),
            component_variances: None,
            covariance: None,
        })
    }

    /// Zero-mean Gaussian `N(0, cov)`; variances and covariance are recorded.
    pub fn gaussian(name: impl Into<String>, cov: DMatrix<f64>) -> Result<Self> {
        if cov.nrows() != cov.ncols() || cov.nrows() == 0 {
            return contract("covariance must be a non-empty square matrix");
        }
        if (&cov - cov.transpose()).amax() > 1e-12 * cov.amax() {
            return contract("covariance must be symmetric");
        }
        let form = GaussianForm::new(&cov)?;
        Ok(Self {
            name: name.into(),
            dim: cov.nrows(),
            density: Density::Gaussian(form),
            component_variances: Some(cov.diagonal().iter().copied().collect()),
            covariance: Some(cov),
        })
    }

    /// Finite mixture of Gaussians `sum_i w_i N(mu_i, Sigma_i)`.
    pub fn gaussian_mixture(
        name: impl Into<String>,
        components: Vec<(f64, Vec<f64>, DMatrix<f64>)>,
    ) -> Result<Self> {
        let Some((_, first_mean, _)) = components.first() else {
            return contract("mixture needs at least one component");
        };
        let dim = first_mean.len();
        let total: f64 = components.iter().map(|c| c.0).sum();
        if components.iter().any(|c| !(c.0 > 0.0)) || (total - 1.0).abs() > 1e-12 {
            return contract("mixture weights must be positive and sum to 1");
        }
        let mut parts = Vec::with_capacity(components.len());
        let mut second = vec![0.0; dim];
        let mut first = vec![0.0; dim];
        for (w, mean, cov) in &components {
            if mean.len() != dim || cov.nrows() != dim || cov.ncols() != dim {
                return contract("mixture component dimensions disagree");
            }
            for k in 0..dim {
                first[k] += w * mean[k];
                second[k] += w * (cov[(k, k)] + mean[k] * mean[k]);
            }
            parts.push((w.ln(), mean.clone(), GaussianForm::new(cov)?));
        }
        let variances = (0..dim).map(|k| second[k] - first[k] * first[k]).collect();
        Ok(Self {
            name: name.into(),
            dim,
            density: Density::Mixture(parts),
            component_variances: Some(variances),
            covariance: None,
        })
    }

    /// Twisted Gaussian `N(0, diag(base)) o phi_b`.
    pub fn banana(name: impl Into<String>, params: &BananaParams) -> Self {
        let v = &params.base_variances;
        // x2 = y2 - b y1^2 + b*v1 has variance v2 + 2 b^2 v1^2 and zero mean.
        let mut variances = v.clone();
        variances[1] = v[1] + 2.0 * params.b * params.b * v[0] * v[0];
        Self {
            name: name.into(),
            dim: v.len(),
            density: Density::Banana {
                b: params.b,
                inv_var: v.iter().map(|s| 1.0 / s).collect(),
            },
            component_variances: Some(variances),
            covariance: None,
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn component_variances(&self) -> Option<&[f64]> {
        self.component_variances.as_deref()
    }

    pub fn covariance(&self) -> Option<&DMatrix<f64>> {
        self.covariance.as_ref()
    }

    /// Log density with a dimension check.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return contract(format!(
                "target {} expects dimension {}, got {}",
                self.name,
                self.dim,
                x.len()
            ));
        }
        Ok(self.ln_density(x))
    }

    /// Log density without the dimension check; used in the sampler hot loop.
    #[inline]
    pub fn ln_density(&self, x: &[f64]) -> f64 {
        match &self.density {
            Density::Gaussian(form) => -0.5 * form.quad(x, None),
            Density::Mixture(parts) => {
                let mut terms = [0.0f64; 8];
                let mut buf;
                let terms: &mut [f64] = if parts.len() <= terms.len() {
                    &mut terms[..parts.len()]
                } else {
                    buf = vec![0.0; parts.len()];
                    &mut buf
                };
                for (t, (ln_w, mean, form)) in terms.iter_mut().zip(parts) {
                    *t = ln_w + form.half_ln_det - 0.5 * form.quad(x, Some(mean));
                }
                log_sum_exp(terms)
            }
            Density::Banana { b, inv_var } => {
                let mut acc = 0.0;
                for (i, (&xi, iv)) in x.iter().zip(inv_var).enumerate() {
                    let yi = if i == 1 {
                        xi + b * x[0] * x[0] - b / inv_var[0]
                    } else {
                        xi
                    };
                    acc += yi * yi * iv;
                }
                -0.5 * acc
            }
            Density::Perturbed2d { a } => {
                let (x1, x2) = (x[0], x[1]);
                let quad = a[0][0] * x1 * x1 + (a[0][1] + a[1][0]) * x1 * x2 + a[1][1] * x2 * x2;
                -quad - (x1 / 0.1).cos() - 0.5 * (x2 / 0.1).cos()
            }
            Density::Bistable => {
                let v = x[0];
                let v2 = v * v;
                -v2 * v2 + 5.0 * v2 - (v / 0.02).cos()
            }
            Density::Custom(f) => f(x),
        }
    }
}

pub(crate) fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + xs.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

/// `phi_b(x) = (x1, x2 + b x1^2 - 100 b, x3, ..., x8)`.
pub fn banana_transform(x: &[f64], b: f64) -> Result<Vec<f64>> {
    if x.len() != 8 {
        return contract("banana transform is defined on R^8");
    }
    let mut y = x.to_vec();
    y[1] = x[1] + b * x[0] * x[0] - 100.0 * b;
    Ok(y)
}

/// Inverse of [`banana_transform`].
pub fn banana_inverse(y: &[f64], b: f64) -> Result<Vec<f64>> {
    if y.len() != 8 {
        return contract("banana transform is defined on R^8");
    }
    let mut x = y.to_vec();
    x[1] = y[1] - b * y[0] * y[0] + 100.0 * b;
    Ok(x)
}

/// Benchmark targets used by the studies.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BenchmarkTarget {
    /// 5D Gaussian with diagonal covariance diag(0.001, 0.1, 1, 10, 100).
    Varpi1,
    /// Correlated 2D Gaussian.
    Varpi2,
    /// Two-component 4D Gaussian mixture.
    Pi1,
    /// 8D banana with b = 0.03.
    Pi2,
    /// 2D Gaussian perturbed by oscillations.
    Pi3,
    /// 1D perturbed bi-stable density.
    Pi4,
}

impl BenchmarkTarget {
    pub const ALL: [BenchmarkTarget; 6] = [
        Self::Varpi1,
        Self::Varpi2,
        Self::Pi1,
        Self::Pi2,
        Self::Pi3,
        Self::Pi4,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Varpi1 => "varpi1",
            Self::Varpi2 => "varpi2",
            Self::Pi1 => "pi1",
            Self::Pi2 => "pi2",
            Self::Pi3 => "pi3",
            Self::Pi4 => "pi4",
        }
    }

    pub fn dim(self) -> usize {
        match self {
            Self::Varpi1 => 5,
            Self::Varpi2 | Self::Pi3 => 2,
            Self::Pi1 => 4,
            Self::Pi2 => 8,
            Self::Pi4 => 1,
        }
    }
}

impl fmt::Display for BenchmarkTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BenchmarkTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown target '{s}'")))
    }
}

pub const BANANA_B: f64 = 0.03;

pub fn pi1_components() -> Vec<(f64, Vec<f64>, DMatrix<f64>)> {
    vec![
        (
            0.5,
            vec![5.0, 5.0, 0.0, 0.0],
            DMatrix::from_diagonal(&DVector::from_vec(vec![6.25, 6.25, 6.25, 0.01])),
        ),
        (
            0.5,
            vec![15.0, 15.0, 0.0, 0.0],
            DMatrix::from_diagonal(&DVector::from_vec(vec![6.25, 6.25, 0.25, 0.01])),
        ),
    ]
}

pub fn pi2_params() -> BananaParams {
    let mut v = vec![1.0; 8];
    v[0] = 100.0;
    BananaParams::new(BANANA_B, v).expect("static banana parameters")
}

pub const PI3_A: [[f64; 2]; 2] = [[1.0, 1.0], [1.0, 1.5]];

pub fn make_benchmark_target(which: BenchmarkTarget) -> TargetDistribution {
    let name = which.as_str();
    match which {
        BenchmarkTarget::Varpi1 => TargetDistribution::gaussian(
            name,
            DMatrix::from_diagonal(&DVector::from_vec(vec![0.001, 0.1, 1.0, 10.0, 100.0])),
        )
        .expect("static covariance"),
        BenchmarkTarget::Varpi2 => TargetDistribution::gaussian(
            name,
            DMatrix::from_row_slice(2, 2, &[0.25, 1.875, 1.875, 25.0]),
        )
        .expect("static covariance"),
        BenchmarkTarget::Pi1 => {
            TargetDistribution::gaussian_mixture(name, pi1_components()).expect("static mixture")
        }
        BenchmarkTarget::Pi2 => TargetDistribution::banana(name, &pi2_params()),
        BenchmarkTarget::Pi3 => TargetDistribution {
            name: name.into(),
            dim: 2,
            density: Density::Perturbed2d { a: PI3_A },
            component_variances: None,
            covariance: None,
        },
        BenchmarkTarget::Pi4 => TargetDistribution {
            name: name.into(),
            dim: 1,
            density: Density::Bistable,
            component_variances: None,
            covariance: None,
        },
    }
}

/// Looks a benchmark target up by its configuration name.
pub fn target_by_name(name: &str) -> Result<TargetDistribution> {
    name.parse().map(make_benchmark_target)
}
