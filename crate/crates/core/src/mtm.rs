//! Component-wise multiple-try Metropolis kernel.
//!
//! Each component update draws `M` trials from their own proposals, picks one
//! with probability proportional to its weight, draws a reference set around
//! the pick and accepts with the ratio of the two weight sums. All weights are
//! handled on the log scale.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::adaptation::BoxRegion;
use crate::error::{contract, Result};
use crate::targets::TargetDistribution;

/// A family of `M` one-dimensional trial proposals per component.
///
/// Trial indices are 1-based throughout.
pub trait ProposalFamily {
    fn trials(&self) -> usize;

    /// `ln T_j(x, y)` for component `k`.
    fn ln_density(&self, k: usize, j: usize, x: f64, y: f64) -> f64;

    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, k: usize, j: usize, x: f64) -> f64;

    /// Whether `T_j(x, y) = T_j(y, x)` for every trial; lets the kernel skip
    /// a second density evaluation.
    fn is_symmetric(&self) -> bool {
        false
    }
}

/// The lambda function entering the trial weights.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightFunction {
    /// `lambda(x, y) = T(x, y) |y - x|^alpha`
    NormPower { alpha: f64 },
    /// `lambda(x, y) = ((T(x, y) + T(y, x)) / 2)^-1`
    MeanInverse,
    /// `lambda(x, y) = (T(x, y) T(y, x))^-beta`
    ProductPower { beta: f64 },
    Unit,
}

impl Default for WeightFunction {
    fn default() -> Self {
        Self::NormPower { alpha: 2.5 }
    }
}

impl WeightFunction {
    /// `ln lambda(x, y)` given `ln T(x, y)`, `ln T(y, x)` and `|y - x|`.
    #[inline]
    pub fn ln_lambda(&self, ln_t_xy: f64, ln_t_yx: f64, dist: f64) -> f64 {
        match *self {
            Self::NormPower { alpha } => ln_t_xy + alpha * dist.ln(),
            Self::MeanInverse => {
                let m = ln_t_xy.max(ln_t_yx);
                if m == f64::NEG_INFINITY {
                    return f64::NEG_INFINITY;
                }
                -(m + ((ln_t_xy - m).exp() + (ln_t_yx - m).exp()).ln() - std::f64::consts::LN_2)
            }
            Self::ProductPower { beta } => {
                if ln_t_xy == f64::NEG_INFINITY || ln_t_yx == f64::NEG_INFINITY {
                    return f64::NEG_INFINITY;
                }
                -beta * (ln_t_xy + ln_t_yx)
            }
            Self::Unit => 0.0,
        }
    }
}

/// Which slot of the reference set holds the current value `x_k`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReferenceSlot {
    /// The slot of the selected trial; keeps the kernel reversible when the
    /// trials come from different proposals.
    #[default]
    Selected,
    /// Always the last slot `M`.
    Last,
}

impl ReferenceSlot {
    /// 1-based slot holding `x_k` when trial `selected` was chosen.
    #[inline]
    pub fn slot(self, selected: usize, trials: usize) -> usize {
        match self {
            Self::Selected => selected,
            Self::Last => trials,
        }
    }
}

/// Kernel settings shared by every component update.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct KernelConfig {
    pub weight: WeightFunction,
    pub reference_slot: ReferenceSlot,
    /// Reject any selected candidate falling outside this box.
    pub containment: Option<BoxRegion>,
}

/// Log weight of trial `j` at value `z` for component `k`, given the target's
/// log density at `(z; x_[-k])`.
///
/// `ln w = ln pi + ln T_j(z, x_k) + ln lambda_j(x_k, z)`. For the symmetric
/// families used here `T_j(z, x_k) = T_j(x_k, z)`.
#[inline]
pub fn ln_weight_from_parts<F: ProposalFamily>(
    family: &F,
    weight: &WeightFunction,
    k: usize,
    j: usize,
    xk: f64,
    z: f64,
    ln_pi: f64,
) -> f64 {
    if ln_pi == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let ln_t_xz = family.ln_density(k, j, xk, z);
    let ln_t_zx = if family.is_symmetric() {
        ln_t_xz
    } else {
        family.ln_density(k, j, z, xk)
    };
    let lw = ln_pi + ln_t_zx + weight.ln_lambda(ln_t_xz, ln_t_zx, (z - xk).abs());
    if lw.is_nan() {
        f64::NEG_INFINITY
    } else {
        lw
    }
}

/// `ln w_j(z, x)` evaluating the target at `(z; x_[-k])`.
pub fn ln_trial_weight<F: ProposalFamily>(
    z: f64,
    x: &[f64],
    k: usize,
    j: usize,
    family: &F,
    target: &TargetDistribution,
    weight: &WeightFunction,
) -> Result<f64> {
    if k >= x.len() || x.len() != target.dim() {
        return contract("component index or state dimension out of range");
    }
    if j == 0 || j > family.trials() {
        return contract(format!("trial index {j} outside 1..={}", family.trials()));
    }
    let mut y = x.to_vec();
    y[k] = z;
    let ln_pi = target.ln_density(&y);
    Ok(ln_weight_from_parts(family, weight, k, j, x[k], z, ln_pi))
}

/// Weights of a batch of trials `(j, z_j)`, exponentiated against the batch's
/// largest log weight. Underflow saturates to 0.
pub fn trial_weights<F: ProposalFamily>(
    trials: &[f64],
    x: &[f64],
    k: usize,
    family: &F,
    target: &TargetDistribution,
    weight: &WeightFunction,
) -> Result<Vec<f64>> {
    let ln: Vec<f64> = trials
        .iter()
        .enumerate()
        .map(|(i, &z)| ln_trial_weight(z, x, k, i + 1, family, target, weight))
        .collect::<Result<_>>()?;
    Ok(normalised_weights(&ln))
}

fn normalised_weights(ln_weights: &[f64]) -> Vec<f64> {
    let m = ln_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return vec![0.0; ln_weights.len()];
    }
    ln_weights.iter().map(|l| (l - m).exp()).collect()
}

/// Selection probabilities from log weights; `None` when every weight is zero.
pub fn selection_probabilities(ln_weights: &[f64]) -> Option<Vec<f64>> {
    let w = normalised_weights(ln_weights);
    let total: f64 = w.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    Some(w.into_iter().map(|v| v / total).collect())
}

/// Categorical draw proportional to non-negative weights; returns a 1-based
/// index, or `None` if all weights are zero.
pub fn select_trial<R: Rng + ?Sized>(rng: &mut R, weights: &[f64]) -> Option<usize> {
    let total: f64 = weights.iter().sum();
    if !(total > 0.0) {
        return None;
    }
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    let mut last_positive = None;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 {
            acc += w;
            last_positive = Some(i + 1);
            if u < acc {
                return last_positive;
            }
        }
    }
    last_positive
}

/// Draw from log weights.
pub fn select_trial_ln<R: Rng + ?Sized>(rng: &mut R, ln_weights: &[f64]) -> Option<usize> {
    select_trial(rng, &normalised_weights(ln_weights))
}

/// `min(1, sum exp(ln_num) / sum exp(ln_den))` computed in log space.
///
/// A zero denominator with a positive numerator accepts; both zero rejects.
pub fn acceptance_probability(ln_num: &[f64], ln_den: &[f64]) -> f64 {
    let num = crate::targets::log_sum_exp(ln_num);
    let den = crate::targets::log_sum_exp(ln_den);
    if num == f64::NEG_INFINITY {
        return 0.0;
    }
    if den == f64::NEG_INFINITY {
        return 1.0;
    }
    (num - den).min(0.0).exp()
}

/// Current state of a chain.
#[derive(Clone, Debug, PartialEq)]
pub struct MtmState {
    pub x: Vec<f64>,
    /// Cached `ln pi(x)`.
    pub ln_pi: f64,
    pub iteration: usize,
}

impl MtmState {
    pub fn new(x: Vec<f64>, target: &TargetDistribution) -> Result<Self> {
        if x.iter().any(|v| !v.is_finite()) {
            return contract("starting point must be finite");
        }
        let ln_pi = target.log_density(&x)?;
        Ok(Self {
            x,
            ln_pi,
            iteration: 0,
        })
    }
}

/// Outcome of one component update.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ComponentOutcome {
    pub selected: Option<usize>,
    pub accepted: bool,
    pub target_evals: u64,
}

/// Scratch buffers reused across updates.
#[derive(Clone, Debug, Default)]
pub struct Workspace {
    z: Vec<f64>,
    ln_pi_z: Vec<f64>,
    ln_num: Vec<f64>,
    ln_den: Vec<f64>,
    point: Vec<f64>,
}

/// One multiple-try update of component `k` (0-based).
pub fn mtm_component_update<R, F>(
    rng: &mut R,
    state: &mut MtmState,
    k: usize,
    family: &F,
    target: &TargetDistribution,
    cfg: &KernelConfig,
    ws: &mut Workspace,
) -> ComponentOutcome
where
    R: Rng + ?Sized,
    F: ProposalFamily,
{
    let m = family.trials();
    let xk = state.x[k];
    ws.z.clear();
    ws.ln_pi_z.clear();
    ws.ln_num.clear();
    ws.point.clear();
    ws.point.extend_from_slice(&state.x);
    for j in 1..=m {
        let z = family.sample(rng, k, j, xk);
        ws.point[k] = z;
        let lp = target.ln_density(&ws.point);
        ws.z.push(z);
        ws.ln_pi_z.push(lp);
        ws.ln_num
            .push(ln_weight_from_parts(family, &cfg.weight, k, j, xk, z, lp));
    }
    let mut evals = m as u64;
    let Some(sel) = select_trial_ln(rng, &ws.ln_num) else {
        return ComponentOutcome {
            selected: None,
            accepted: false,
            target_evals: evals,
        };
    };
    let y = ws.z[sel - 1];
    let ln_pi_y = ws.ln_pi_z[sel - 1];
    let slot = cfg.reference_slot.slot(sel, m);
    ws.ln_den.clear();
    // point currently holds (z_M; x_[-k]); the reference set lives at (.; y_[-k]) which
    // only differs in component k
    for j in 1..=m {
        let (xj, lp) = if j == slot {
            (xk, state.ln_pi)
        } else {
            let v = family.sample(rng, k, j, y);
            ws.point[k] = v;
            evals += 1;
            (v, target.ln_density(&ws.point))
        };
        ws.ln_den
            .push(ln_weight_from_parts(family, &cfg.weight, k, j, y, xj, lp));
    }
    let alpha = acceptance_probability(&ws.ln_num, &ws.ln_den);
    let inside = cfg.containment.as_ref().is_none_or(|b| {
        ws.point[k] = y;
        b.contains(&ws.point)
    });
    let accepted = inside && rng.random::<f64>() < alpha;
    if accepted {
        state.x[k] = y;
        state.ln_pi = ln_pi_y;
    }
    ComponentOutcome {
        selected: Some(sel),
        accepted,
        target_evals: evals,
    }
}
