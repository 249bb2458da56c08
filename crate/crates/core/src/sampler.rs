//! Adaptive proposal families and the chain drivers built on the kernels.

use rand::Rng;

use crate::adaptation::{AdaptEvent, AdaptationConfig, AdaptationState};
use crate::error::{contract, Result};
use crate::gaussian::{adapt_gaussian_sds, mh_step, GaussianTrialParams, MhProposal};
use crate::mtm::{mtm_component_update, KernelConfig, MtmState, ProposalFamily, Workspace};
use crate::plateau::PlateauParams;
use crate::targets::TargetDistribution;

/// A proposal family that tracks trial selections and adapts itself.
pub trait AdaptiveFamily: ProposalFamily {
    fn record_selection(&mut self, k: usize, j: usize);

    /// Runs one interval check with the given per-component gate outcomes.
    fn adapt(&mut self, gates: &[bool], cfg: &AdaptationConfig, n: u64) -> Vec<AdaptEvent>;

    /// The scale that adaptation moves for component `k`.
    fn scale(&self, k: usize) -> f64;
}

/// Plateau trials with an independently adapted half-width per component.
#[derive(Clone, Debug, PartialEq)]
pub struct PlateauFamily {
    base: PlateauParams,
    state: AdaptationState,
}

impl PlateauFamily {
    /// Every component starts at `base.upsilon`.
    pub fn new(base: PlateauParams, dim: usize) -> Self {
        Self {
            state: AdaptationState::new(dim, base.upsilon),
            base,
        }
    }

    pub fn params(&self, k: usize) -> PlateauParams {
        self.base.with_upsilon(self.state.widths[k])
    }

    pub fn widths(&self) -> &[f64] {
        &self.state.widths
    }

    pub fn state(&self) -> &AdaptationState {
        &self.state
    }
}

impl ProposalFamily for PlateauFamily {
    fn trials(&self) -> usize {
        self.base.trials
    }

    #[inline]
    fn ln_density(&self, k: usize, j: usize, x: f64, y: f64) -> f64 {
        self.params(k).shape(j, x).ln_pdf(y)
    }

    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, k: usize, j: usize, x: f64) -> f64 {
        self.params(k).shape(j, x).sample(rng)
    }

    fn is_symmetric(&self) -> bool {
        true
    }
}

impl AdaptiveFamily for PlateauFamily {
    fn record_selection(&mut self, k: usize, j: usize) {
        self.state.record(k, j, self.base.trials);
    }

    fn adapt(&mut self, gates: &[bool], cfg: &AdaptationConfig, n: u64) -> Vec<AdaptEvent> {
        self.state.apply_gates(gates, cfg, n)
    }

    fn scale(&self, k: usize) -> f64 {
        self.state.widths[k]
    }
}

/// Gaussian trials `N(x, s_j^2)` whose extreme scales adapt per component.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianFamily {
    sds: Vec<GaussianTrialParams>,
    counts: Vec<Vec<u64>>,
    pub eta_over: f64,
    pub eta_under: f64,
}

impl GaussianFamily {
    pub fn new(init: GaussianTrialParams, dim: usize, eta_over: f64, eta_under: f64) -> Result<Self> {
        if !(0.0 < eta_under && eta_under < eta_over && eta_over < 1.0) {
            return contract("need 0 < eta_under < eta_over < 1");
        }
        Ok(Self {
            counts: vec![vec![0; init.trials()]; dim],
            sds: vec![init; dim],
            eta_over,
            eta_under,
        })
    }

    pub fn params(&self, k: usize) -> &GaussianTrialParams {
        &self.sds[k]
    }
}

impl ProposalFamily for GaussianFamily {
    fn trials(&self) -> usize {
        self.sds[0].trials()
    }

    #[inline]
    fn ln_density(&self, k: usize, j: usize, x: f64, y: f64) -> f64 {
        self.sds[k].ln_density_unchecked(j, x, y)
    }

    #[inline]
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R, k: usize, j: usize, x: f64) -> f64 {
        self.sds[k].sample(rng, j, x)
    }

    fn is_symmetric(&self) -> bool {
        true
    }
}

impl AdaptiveFamily for GaussianFamily {
    fn record_selection(&mut self, k: usize, j: usize) {
        self.counts[k][j - 1] += 1;
    }

    fn adapt(&mut self, gates: &[bool], cfg: &AdaptationConfig, n: u64) -> Vec<AdaptEvent> {
        let mut events = Vec::new();
        for (k, &open) in gates.iter().enumerate() {
            if !open {
                continue;
            }
            let up = adapt_gaussian_sds(
                &self.sds[k],
                &self.counts[k],
                cfg.interval,
                self.eta_over,
                self.eta_under,
            )
            .expect("counts and thresholds validated at construction");
            self.counts[k].iter_mut().for_each(|c| *c = 0);
            if up.changed {
                let m = up.params.trials();
                events.push(AdaptEvent {
                    iteration: n,
                    component: k,
                    old: self.sds[k].sds()[m - 1],
                    new: up.params.sds()[m - 1],
                });
                self.sds[k] = up.params;
            }
        }
        events
    }

    fn scale(&self, k: usize) -> f64 {
        *self.sds[k].sds().last().unwrap()
    }
}

/// Realised chain plus per-update bookkeeping.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ChainRecord {
    pub dim: usize,
    /// `X_0 .. X_N`, row-major `(N + 1) x d`.
    pub states: Vec<f64>,
    /// Selected 1-based trial per update, 0 when nothing was selected; `N x d`.
    /// Empty for single-try chains.
    pub selected: Vec<u16>,
    /// Acceptance flag per update, `N x d`; single-try chains repeat the joint flag.
    pub accepted: Vec<bool>,
    pub events: Vec<AdaptEvent>,
    pub target_evals: u64,
    pub seed: u64,
    pub repetition: u64,
    pub config_hash: String,
}

impl ChainRecord {
    pub fn iterations(&self) -> usize {
        self.states.len().checked_div(self.dim).map_or(0, |n| n - 1)
    }

    pub fn state(&self, n: usize) -> &[f64] {
        &self.states[n * self.dim..(n + 1) * self.dim]
    }

    /// Values of component `k` for `X_from .. X_N`.
    pub fn component(&self, k: usize, from: usize) -> Vec<f64> {
        self.states
            .iter()
            .skip(from * self.dim + k)
            .step_by(self.dim)
            .copied()
            .collect()
    }

    pub fn acceptance_rate(&self) -> f64 {
        if self.accepted.is_empty() {
            return 0.0;
        }
        self.accepted.iter().filter(|a| **a).count() as f64 / self.accepted.len() as f64
    }
}

/// Options of the multiple-try driver.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MtmRunConfig {
    pub kernel: KernelConfig,
    pub adaptation: AdaptationConfig,
    /// Count a selection only when the move is accepted.
    pub count_on_accept: bool,
}

/// Runs `n_iterations` full sweeps of the adaptive multiple-try sampler.
///
/// The adaptation step runs at the start of every iteration, before the sweep.
pub fn run_chain<R, F>(
    rng: &mut R,
    family: &mut F,
    target: &TargetDistribution,
    cfg: &MtmRunConfig,
    n_iterations: usize,
    x0: &[f64],
) -> Result<ChainRecord>
where
    R: Rng + ?Sized,
    F: AdaptiveFamily,
{
    let d = target.dim();
    if x0.len() != d {
        return contract("starting point dimension does not match the target");
    }
    if family.trials() > u16::MAX as usize {
        return contract("too many trials");
    }
    cfg.adaptation.validate()?;
    if let Some(k) = &cfg.kernel.containment {
        if !k.contains(x0) {
            return contract("starting point lies outside the containment box");
        }
    }
    let mut state = MtmState::new(x0.to_vec(), target)?;
    let mut rec = ChainRecord {
        dim: d,
        states: Vec::with_capacity((n_iterations + 1) * d),
        selected: Vec::with_capacity(n_iterations * d),
        accepted: Vec::with_capacity(n_iterations * d),
        target_evals: 1,
        ..Default::default()
    };
    rec.states.extend_from_slice(x0);
    let mut ws = Workspace::default();
    for n in 1..=n_iterations as u64 {
        if let Some(gates) = cfg.adaptation.draw_gates(rng, n, d) {
            rec.events.extend(family.adapt(&gates, &cfg.adaptation, n));
        }
        for k in 0..d {
            let out = mtm_component_update(rng, &mut state, k, &*family, target, &cfg.kernel, &mut ws);
            rec.target_evals += out.target_evals;
            if let Some(j) = out.selected {
                if out.accepted || !cfg.count_on_accept {
                    family.record_selection(k, j);
                }
            }
            rec.selected.push(out.selected.map_or(0, |j| j as u16));
            rec.accepted.push(out.accepted);
        }
        state.iteration = n as usize;
        rec.states.extend_from_slice(&state.x);
    }
    Ok(rec)
}

/// Runs `n_iterations` random-walk Metropolis–Hastings steps.
pub fn run_mh_chain<R: Rng + ?Sized>(
    rng: &mut R,
    proposal: &MhProposal,
    target: &TargetDistribution,
    n_iterations: usize,
    x0: &[f64],
) -> Result<ChainRecord> {
    let d = target.dim();
    if x0.len() != d || proposal.dim() != d {
        return contract("starting point, proposal and target dimensions must agree");
    }
    let mut x = x0.to_vec();
    let mut lp = target.log_density(&x)?;
    let mut cand = Vec::with_capacity(d);
    let mut rec = ChainRecord {
        dim: d,
        states: Vec::with_capacity((n_iterations + 1) * d),
        accepted: Vec::with_capacity(n_iterations * d),
        target_evals: 1,
        ..Default::default()
    };
    rec.states.extend_from_slice(x0);
    for _ in 0..n_iterations {
        let acc = mh_step(rng, &mut x, &mut lp, &mut cand, proposal, target)?;
        rec.target_evals += 1;
        rec.accepted.extend(std::iter::repeat_n(acc, d));
        rec.states.extend_from_slice(&x);
    }
    Ok(rec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::adaptation::{BoxRegion, Schedule};
    use crate::targets::{make_benchmark_target, BenchmarkTarget};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn plateau() -> PlateauParams {
        PlateauParams::new(1.0, 0.05, 3.0, 5).unwrap()
    }

    #[test]
    fn zero_iterations_keeps_only_start() {
        let t = make_benchmark_target(BenchmarkTarget::Pi3);
        let mut fam = PlateauFamily::new(plateau(), 2);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let rec = run_chain(&mut rng, &mut fam, &t, &MtmRunConfig::default(), 0, &[0.5, -0.5]).unwrap();
        assert_eq!(rec.states, vec![0.5, -0.5]);
        assert_eq!(rec.iterations(), 0);
    }

    #[test]
    fn identical_seeds_give_identical_chains() {
        let t = make_benchmark_target(BenchmarkTarget::Pi1);
        let cfg = MtmRunConfig::default();
        let run = || {
            let mut fam = PlateauFamily::new(plateau(), 4);
            let mut rng = ChaCha8Rng::seed_from_u64(99);
            run_chain(&mut rng, &mut fam, &t, &cfg, 300, &[1.0, 2.0, 0.0, 0.0]).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn evaluation_counts() {
        let t = make_benchmark_target(BenchmarkTarget::Pi1);
        let mut fam = PlateauFamily::new(plateau(), 4);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 200;
        let rec = run_chain(&mut rng, &mut fam, &t, &MtmRunConfig::default(), n, &[5.0, 5.0, 0.0, 0.0]).unwrap();
        let skipped = rec.selected.iter().filter(|s| **s == 0).count() as u64;
        let updates = (4 * n) as u64;
        // M trial evaluations per update plus M - 1 reference evaluations when a trial is selected
        assert_eq!(rec.target_evals, 1 + 5 * updates + 4 * (updates - skipped));
        let mh = run_mh_chain(
            &mut rng,
            &MhProposal::for_benchmark(BenchmarkTarget::Pi1),
            &t,
            4 * 5 * n,
            &[5.0, 5.0, 0.0, 0.0],
        )
        .unwrap();
        assert_eq!(mh.target_evals - 1, 5 * updates);
    }

    #[test]
    fn containment_is_never_violated() {
        let t = make_benchmark_target(BenchmarkTarget::Pi4);
        let cfg = MtmRunConfig {
            kernel: KernelConfig {
                containment: Some(BoxRegion::cube(1, 1.5).unwrap()),
                ..Default::default()
            },
            adaptation: AdaptationConfig {
                schedule: Schedule::Always,
                ..Default::default()
            },
            ..Default::default()
        };
        let mut fam = PlateauFamily::new(plateau(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let rec = run_chain(&mut rng, &mut fam, &t, &cfg, 5000, &[0.0]).unwrap();
        assert!(rec.states.iter().all(|v| v.abs() <= 1.5));
        assert!(rec.accepted.iter().any(|a| *a));
    }

    #[test]
    fn start_outside_box_is_rejected() {
        let t = make_benchmark_target(BenchmarkTarget::Pi4);
        let cfg = MtmRunConfig {
            kernel: KernelConfig {
                containment: Some(BoxRegion::cube(1, 1.0).unwrap()),
                ..Default::default()
            },
            ..Default::default()
        };
        let mut fam = PlateauFamily::new(plateau(), 1);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert!(run_chain(&mut rng, &mut fam, &t, &cfg, 10, &[2.0]).is_err());
    }

    #[test]
    fn width_events_are_powers_of_two_on_interval_boundaries() {
        let t = make_benchmark_target(BenchmarkTarget::Varpi1);
        let cfg = MtmRunConfig {
            adaptation: AdaptationConfig {
                schedule: Schedule::Always,
                ..Default::default()
            },
            ..Default::default()
        };
        let mut fam = PlateauFamily::new(plateau(), 5);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let rec = run_chain(&mut rng, &mut fam, &t, &cfg, 3000, &[0.0; 5]).unwrap();
        assert!(!rec.events.is_empty());
        for e in &rec.events {
            assert_eq!(e.iteration % 50, 0);
            let p = e.new.log2();
            assert_eq!(p, p.round());
        }
        for w in fam.widths() {
            assert_eq!(w.log2(), w.log2().round());
        }
    }

    #[test]
    fn gaussian_family_adapts_extremes() {
        let t = make_benchmark_target(BenchmarkTarget::Varpi1);
        let cfg = MtmRunConfig {
            kernel: KernelConfig {
                weight: crate::mtm::WeightFunction::NormPower { alpha: 2.9 },
                ..Default::default()
            },
            adaptation: AdaptationConfig {
                schedule: Schedule::Always,
                ..Default::default()
            },
            ..Default::default()
        };
        let mut fam = GaussianFamily::new(GaussianTrialParams::doubling(5).unwrap(), 5, 0.4, 0.1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        run_chain(&mut rng, &mut fam, &t, &cfg, 2000, &[0.0; 5]).unwrap();
        // the smallest-variance component ends with a much smaller top scale than the largest
        assert!(fam.scale(0) < fam.scale(4));
    }
}
