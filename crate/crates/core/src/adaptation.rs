//! Interval-based halving/doubling of the Plateau half-width, the diminishing
//! adaptation gate, and the containment safeguards (width bounds and a
//! bounding box for the chain).

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};

/// `P_n = max(0.99^(n-1), 1/sqrt(n))`.
pub fn adaptation_probability(n: u64) -> f64 {
    let n = n.max(1) as f64;
    0.99f64.powf(n - 1.0).max(1.0 / n.sqrt())
}

/// When interval checks are allowed to fire.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// Fire with probability `P_n`.
    #[default]
    Diminishing,
    /// Fire at every interval boundary.
    Always,
    /// Diminishing gate, and only while `n <= burn_in`.
    BurnInOnly,
    Off,
}

/// Axis-aligned hyper-rectangle.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return contract("box bounds must have equal, positive length");
        }
        if lower.iter().zip(&upper).any(|(l, u)| !(l <= u)) {
            return contract("box must be non-empty");
        }
        Ok(Self { lower, upper })
    }

    pub fn cube(dim: usize, half_width: f64) -> Result<Self> {
        Self::new(vec![-half_width; dim], vec![half_width; dim])
    }

    #[inline]
    pub fn contains(&self, y: &[f64]) -> bool {
        y.len() == self.lower.len()
            && y
                .iter()
                .zip(self.lower.iter().zip(&self.upper))
                .all(|(v, (l, u))| *l <= *v && *v <= *u)
    }
}

/// Free function form of [`BoxRegion::contains`].
pub fn containment_filter(y: &[f64], k: &BoxRegion) -> bool {
    k.contains(y)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdaptationConfig {
    /// Interval length `L`.
    pub interval: usize,
    /// Over-selection threshold of the innermost trial.
    pub eta1: f64,
    /// Over-selection threshold of the outermost trial.
    pub eta2: f64,
    pub schedule: Schedule,
    /// Last iteration at which [`Schedule::BurnInOnly`] may adapt.
    pub burn_in: u64,
    /// Width bounds `[epsilon, Delta]`.
    pub bounds: (f64, f64),
    /// One uniform draw per component instead of a single shared draw.
    pub per_component_gate: bool,
}

impl Default for AdaptationConfig {
    fn default() -> Self {
        Self {
            interval: 50,
            eta1: 0.4,
            eta2: 0.4,
            schedule: Schedule::Diminishing,
            burn_in: 0,
            bounds: (1e-6, 1e6),
            per_component_gate: false,
        }
    }
}

impl AdaptationConfig {
    pub fn validate(&self) -> Result<()> {
        if self.interval == 0 {
            return contract("adaptation interval must be >= 1");
        }
        for eta in [self.eta1, self.eta2] {
            if !(eta > 0.0 && eta < 1.0) {
                return contract("adaptation thresholds must lie in (0, 1)");
            }
        }
        let (lo, hi) = self.bounds;
        if !(lo > 0.0 && lo < hi) {
            return contract("width bounds need 0 < epsilon < Delta");
        }
        Ok(())
    }

    /// Whether iteration `n` is eligible at all (interval boundary and schedule window).
    pub fn is_check_iteration(&self, n: u64) -> bool {
        if n == 0 || !n.is_multiple_of(self.interval as u64) {
            return false;
        }
        match self.schedule {
            Schedule::Off => false,
            Schedule::BurnInOnly => n <= self.burn_in,
            Schedule::Always | Schedule::Diminishing => true,
        }
    }

    /// Gate decision for an eligible iteration given a uniform draw `r`.
    pub fn passes(&self, n: u64, r: f64) -> bool {
        match self.schedule {
            Schedule::Always => true,
            Schedule::Off => false,
            Schedule::Diminishing | Schedule::BurnInOnly => r < adaptation_probability(n),
        }
    }

    /// Draws the gate for every component at iteration `n`. Returns `None`
    /// when no check happens at all.
    pub fn draw_gates<R: Rng + ?Sized>(&self, rng: &mut R, n: u64, dim: usize) -> Option<Vec<bool>> {
        if !self.is_check_iteration(n) {
            return None;
        }
        let gates = if self.per_component_gate {
            (0..dim).map(|_| self.passes(n, rng.random())).collect()
        } else {
            vec![self.passes(n, rng.random()); dim]
        };
        Some(gates)
    }
}

/// Halving/doubling rule for a single width, clamped to `bounds`.
///
/// Innermost over-selection (`c_first > L eta1`) halves, outermost
/// over-selection (`c_last > L eta2`) doubles; both may fire in turn.
pub fn updated_width(width: f64, c_first: u64, c_last: u64, cfg: &AdaptationConfig) -> f64 {
    let l = cfg.interval as f64;
    let mut w = width;
    if c_first as f64 > l * cfg.eta1 {
        w *= 0.5;
    }
    if c_last as f64 > l * cfg.eta2 {
        w *= 2.0;
    }
    w.clamp(cfg.bounds.0, cfg.bounds.1)
}

/// A recorded adaptation event.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdaptEvent {
    pub iteration: u64,
    /// 0-based component.
    pub component: usize,
    pub old: f64,
    pub new: f64,
}

/// Per-component widths and innermost/outermost selection counters.
#[derive(Clone, Debug, PartialEq)]
pub struct AdaptationState {
    pub widths: Vec<f64>,
    pub first: Vec<u64>,
    pub last: Vec<u64>,
}

impl AdaptationState {
    pub fn new(dim: usize, initial_width: f64) -> Self {
        Self {
            widths: vec![initial_width; dim],
            first: vec![0; dim],
            last: vec![0; dim],
        }
    }

    /// Counts a selection of 1-based trial `j` out of `m` for component `k`.
    #[inline]
    pub fn record(&mut self, k: usize, j: usize, m: usize) {
        if j == 1 {
            self.first[k] += 1;
        }
        if j == m {
            self.last[k] += 1;
        }
    }

    /// Applies the adaptation step for iteration `n`; returns the width
    /// changes it made.
    pub fn maybe_adapt<R: Rng + ?Sized>(
        &mut self,
        rng: &mut R,
        cfg: &AdaptationConfig,
        n: u64,
    ) -> Vec<AdaptEvent> {
        let Some(gates) = cfg.draw_gates(rng, n, self.widths.len()) else {
            return Vec::new();
        };
        self.apply_gates(&gates, cfg, n)
    }

    /// Deterministic part of [`maybe_adapt`](Self::maybe_adapt).
    pub fn apply_gates(&mut self, gates: &[bool], cfg: &AdaptationConfig, n: u64) -> Vec<AdaptEvent> {
        let mut events = Vec::new();
        for (k, &open) in gates.iter().enumerate() {
            if !open {
                continue;
            }
            let old = self.widths[k];
            let new = updated_width(old, self.first[k], self.last[k], cfg);
            self.first[k] = 0;
            self.last[k] = 0;
            if new != old {
                self.widths[k] = new;
                events.push(AdaptEvent {
                    iteration: n,
                    component: k,
                    old,
                    new,
                });
            }
        }
        events
    }
}
