//! Plateau densities and the non-overlapping multiple-try proposal family.
//!
//! A Plateau component is flat on `[mu - delta, mu + delta]` and decays like a
//! half Gaussian on either side. Trial `j = 1` is a single Plateau centred on
//! the current point; trials `j >= 2` are equal mixtures of two Plateaus placed
//! symmetrically further out, the outermost one carrying heavier outer tails.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{contract, Result};

const SQRT_2PI: f64 = 2.506_628_274_631_000_7;
const LN_2: f64 = std::f64::consts::LN_2;

/// `C = sqrt(2 pi s_l^2)/2 + sqrt(2 pi s_r^2)/2 + 2 delta`.
pub fn plateau_normalizer(delta: f64, sigma_left: f64, sigma_right: f64) -> Result<f64> {
    if !(delta > 0.0 && sigma_left > 0.0 && sigma_right > 0.0) {
        return contract("plateau normaliser needs delta, sigma_left, sigma_right > 0");
    }
    Ok(normalizer_unchecked(delta, sigma_left, sigma_right))
}

#[inline]
fn normalizer_unchecked(delta: f64, sigma_left: f64, sigma_right: f64) -> f64 {
    0.5 * SQRT_2PI * sigma_left + 0.5 * SQRT_2PI * sigma_right + 2.0 * delta
}

#[inline]
fn std_normal_cdf(z: f64) -> f64 {
    0.5 * erfc(-z / std::f64::consts::SQRT_2)
}

/// One Plateau density `f(y; mu, delta, sigma_left, sigma_right)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlateauComponent {
    pub mu: f64,
    pub delta: f64,
    pub sigma_left: f64,
    pub sigma_right: f64,
}

impl PlateauComponent {
    pub fn new(mu: f64, delta: f64, sigma_left: f64, sigma_right: f64) -> Result<Self> {
        if !mu.is_finite() {
            return contract("plateau centre must be finite");
        }
        plateau_normalizer(delta, sigma_left, sigma_right)?;
        Ok(Self {
            mu,
            delta,
            sigma_left,
            sigma_right,
        })
    }

    pub fn normalizer(&self) -> f64 {
        normalizer_unchecked(self.delta, self.sigma_left, self.sigma_right)
    }

    /// Log of the un-normalised shape; zero on the plateau.
    #[inline]
    fn ln_shape(&self, y: f64) -> f64 {
        let lo = self.mu - self.delta;
        let hi = self.mu + self.delta;
        if y < lo {
            let t = (y - lo) / self.sigma_left;
            -0.5 * t * t
        } else if y > hi {
            let t = (y - hi) / self.sigma_right;
            -0.5 * t * t
        } else {
            0.0
        }
    }

    #[inline]
    pub fn ln_pdf(&self, y: f64) -> f64 {
        self.ln_shape(y) - self.normalizer().ln()
    }

    pub fn pdf(&self, y: f64) -> f64 {
        self.ln_shape(y).exp() / self.normalizer()
    }

    /// Closed-form CDF through the normal CDF of each tail.
    pub fn cdf(&self, y: f64) -> f64 {
        let c = self.normalizer();
        let lo = self.mu - self.delta;
        let hi = self.mu + self.delta;
        let left_mass = 0.5 * SQRT_2PI * self.sigma_left / c;
        if y < lo {
            return SQRT_2PI * self.sigma_left / c * std_normal_cdf((y - lo) / self.sigma_left);
        }
        if y <= hi {
            return left_mass + (y - lo) / c;
        }
        let right = SQRT_2PI * self.sigma_right / c
            * (std_normal_cdf((y - hi) / self.sigma_right) - 0.5);
        left_mass + 2.0 * self.delta / c + right
    }

    /// Probability of the flat part, `2 delta / C`.
    pub fn plateau_mass(&self) -> f64 {
        2.0 * self.delta / self.normalizer()
    }

    /// Exact draw via the uniform / half-normal mixture decomposition.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let c = self.normalizer();
        let p_left = 0.5 * SQRT_2PI * self.sigma_left / c;
        let p_flat = 2.0 * self.delta / c;
        let u: f64 = rng.random();
        if u < p_left {
            let z: f64 = rng.sample(StandardNormal);
            self.mu - self.delta - z.abs() * self.sigma_left
        } else if u < p_left + p_flat {
            let v: f64 = rng.random();
            self.mu - self.delta + 2.0 * self.delta * v
        } else {
            let z: f64 = rng.sample(StandardNormal);
            self.mu + self.delta + z.abs() * self.sigma_right
        }
    }
}

/// Free function form of [`PlateauComponent::pdf`].
pub fn plateau_pdf(y: f64, c: &PlateauComponent) -> f64 {
    c.pdf(y)
}

/// Free function form of [`PlateauComponent::sample`].
pub fn plateau_sample<R: Rng + ?Sized>(rng: &mut R, c: &PlateauComponent) -> f64 {
    c.sample(rng)
}

/// Where the rings of trials `j >= 2` are centred.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CenterRule {
    /// Offset `2 (j - 1) delta_1 + delta` from the current point.
    #[default]
    Gapped,
    /// Offset `delta_1 + (2 j - 3) delta`, which makes neighbouring plateaus
    /// touch with no gap next to the central one.
    Contiguous,
}

/// The three free Plateau proposal parameters plus the trial count.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlateauParams {
    /// Half-width shared by every plateau (`delta = delta_1`).
    pub upsilon: f64,
    /// Tail scale of every inner tail.
    pub sigma: f64,
    /// Tail scale of the two outermost tails.
    pub varsigma: f64,
    pub trials: usize,
    pub centers: CenterRule,
}

/// The density of one trial: a single Plateau or an equal two-Plateau mixture.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TrialShape {
    Single(PlateauComponent),
    Pair(PlateauComponent, PlateauComponent),
}

impl TrialShape {
    #[inline]
    pub fn ln_pdf(&self, y: f64) -> f64 {
        match self {
            Self::Single(c) => c.ln_pdf(y),
            Self::Pair(a, b) => {
                let (la, lb) = (a.ln_pdf(y), b.ln_pdf(y));
                let m = la.max(lb);
                m + ((la - m).exp() + (lb - m).exp()).ln() - LN_2
            }
        }
    }

    pub fn cdf(&self, y: f64) -> f64 {
        match self {
            Self::Single(c) => c.cdf(y),
            Self::Pair(a, b) => 0.5 * (a.cdf(y) + b.cdf(y)),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Single(c) => c.sample(rng),
            Self::Pair(a, b) => {
                if rng.random::<f64>() < 0.5 {
                    a.sample(rng)
                } else {
                    b.sample(rng)
                }
            }
        }
    }
}

impl PlateauParams {
    pub fn new(upsilon: f64, sigma: f64, varsigma: f64, trials: usize) -> Result<Self> {
        let p = Self {
            upsilon,
            sigma,
            varsigma,
            trials,
            centers: CenterRule::Gapped,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn with_centers(mut self, centers: CenterRule) -> Self {
        self.centers = centers;
        self
    }

    pub fn with_upsilon(mut self, upsilon: f64) -> Self {
        self.upsilon = upsilon;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.upsilon > 0.0 && self.upsilon.is_finite()) {
            return contract("upsilon must be a positive finite real");
        }
        if !(self.sigma > 0.0 && self.varsigma > 0.0) {
            return contract("sigma and varsigma must be positive");
        }
        if self.trials < 2 {
            return contract("a Plateau family needs at least 2 trials");
        }
        Ok(())
    }

    /// Distance from the current point to the ring centres of trial `j >= 2`.
    pub fn ring_offset(&self, j: usize) -> f64 {
        let d = self.upsilon;
        match self.centers {
            CenterRule::Gapped => 2.0 * (j as f64 - 1.0) * d + d,
            CenterRule::Contiguous => d + (2.0 * j as f64 - 3.0) * d,
        }
    }

    /// Shape of trial `j` (1-based) around `x`, without range checks.
    #[inline]
    pub fn shape(&self, j: usize, x: f64) -> TrialShape {
        let d = self.upsilon;
        let s = self.sigma;
        if j == 1 {
            return TrialShape::Single(PlateauComponent {
                mu: x,
                delta: d,
                sigma_left: s,
                sigma_right: s,
            });
        }
        let off = self.ring_offset(j);
        let outer = if j == self.trials { self.varsigma } else { s };
        TrialShape::Pair(
            PlateauComponent {
                mu: x - off,
                delta: d,
                sigma_left: outer,
                sigma_right: s,
            },
            PlateauComponent {
                mu: x + off,
                delta: d,
                sigma_left: s,
                sigma_right: outer,
            },
        )
    }

    fn check_trial(&self, j: usize) -> Result<()> {
        if j == 0 || j > self.trials {
            return contract(format!("trial index {j} outside 1..={}", self.trials));
        }
        Ok(())
    }

    pub fn trial_shape(&self, j: usize, x: f64) -> Result<TrialShape> {
        self.check_trial(j)?;
        Ok(self.shape(j, x))
    }

    /// `T_j(x, y)`.
    pub fn trial_density(&self, j: usize, x: f64, y: f64) -> Result<f64> {
        Ok(self.ln_trial_density(j, x, y)?.exp())
    }

    pub fn ln_trial_density(&self, j: usize, x: f64, y: f64) -> Result<f64> {
        self.check_trial(j)?;
        Ok(self.shape(j, x).ln_pdf(y))
    }

    pub fn trial_sample<R: Rng + ?Sized>(&self, rng: &mut R, j: usize, x: f64) -> Result<f64> {
        self.check_trial(j)?;
        Ok(self.shape(j, x).sample(rng))
    }

    /// Mass that trial `j` centred at `x` puts on the open interval `(lo, hi)`.
    pub fn trial_mass(&self, j: usize, x: f64, lo: f64, hi: f64) -> Result<f64> {
        let shape = self.trial_shape(j, x)?;
        Ok(shape.cdf(hi) - shape.cdf(lo))
    }

    /// Symmetric interval around `x` holding `level` of trial 1's mass.
    pub fn central_interval(&self, x: f64, level: f64) -> Result<(f64, f64)> {
        if !(level > 0.0 && level < 1.0) {
            return contract("level must lie in (0, 1)");
        }
        let shape = self.shape(1, x);
        let mass = |h: f64| shape.cdf(x + h) - shape.cdf(x - h) - level;
        let (mut lo, mut hi) = (0.0, self.upsilon + self.sigma);
        while mass(hi) < 0.0 {
            hi *= 2.0;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mass(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let h = 0.5 * (lo + hi);
        Ok((x - h, x + h))
    }
}

/// Overlap of trial `j` with the `level` central interval of trial 1.
pub fn overlap_probability(params: &PlateauParams, j: usize, level: f64) -> Result<f64> {
    let (lo, hi) = params.central_interval(0.0, level)?;
    params.trial_mass(j, 0.0, lo, hi)
}
