//! Experiment configuration files.
//!
//! A config is a TOML document with the tables `[experiment]`, `[target]`,
//! `[sampler]`, `[adaptation]`, `[start]`, `[metrics]` and `[output]`. Only
//! `[experiment]` and `[target]` are required; unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adaptation::{AdaptationConfig, BoxRegion, Schedule};
use crate::error::{Error, Result};
use crate::gaussian::GaussianTrialParams;
use crate::mtm::{KernelConfig, ReferenceSlot, WeightFunction};
use crate::plateau::{CenterRule, PlateauParams};
use crate::sampler::MtmRunConfig;
use crate::targets::BenchmarkTarget;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerKind {
    /// Adaptive Plateau multiple-try.
    Ap,
    /// Adaptive Gaussian multiple-try with the Plateau weight exponent.
    Ag1,
    /// Adaptive Gaussian multiple-try with exponent 2.9.
    Ag2,
    /// Random-walk Metropolis–Hastings.
    Mh,
}

impl SamplerKind {
    pub const ALL: [SamplerKind; 4] = [Self::Ap, Self::Ag1, Self::Ag2, Self::Mh];

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Ap => "ap",
            Self::Ag1 => "ag1",
            Self::Ag2 => "ag2",
            Self::Mh => "mh",
        }
    }

    pub fn default_weight(self) -> WeightFunction {
        match self {
            Self::Ag2 => WeightFunction::NormPower { alpha: 2.9 },
            _ => WeightFunction::NormPower { alpha: 2.5 },
        }
    }
}

impl std::fmt::Display for SamplerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub seed: u64,
    pub repetitions: usize,
    /// Iterations of the multiple-try samplers.
    pub iterations: usize,
    #[serde(default = "default_burn_in_fraction")]
    pub burn_in_fraction: f64,
    /// Run MH for `d * M * N` iterations instead of `N`.
    #[serde(default)]
    pub match_evaluations: bool,
    /// Worker threads; the global pool is used when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
}

fn default_burn_in_fraction() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    pub name: BenchmarkTarget,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub kind: SamplerKind,
    pub trials: usize,
    /// Defaults to the kind's own weight when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weight: Option<WeightFunction>,
    pub reference_slot: ReferenceSlot,
    pub upsilon: f64,
    pub sigma: f64,
    pub varsigma: f64,
    pub centers: CenterRule,
    /// Initial Gaussian trial scales; `2^(j-2)` when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gaussian_sds: Option<Vec<f64>>,
    pub eta_over: f64,
    pub eta_under: f64,
    pub count_on_accept: bool,
}

impl Default for SamplerSection {
    fn default() -> Self {
        Self {
            kind: SamplerKind::Ap,
            trials: 5,
            weight: None,
            reference_slot: ReferenceSlot::default(),
            upsilon: 1.0,
            sigma: 0.05,
            varsigma: 3.0,
            centers: CenterRule::default(),
            gaussian_sds: None,
            eta_over: 0.4,
            eta_under: 0.1,
            count_on_accept: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptationSection {
    pub interval: usize,
    pub eta1: f64,
    pub eta2: f64,
    pub schedule: Schedule,
    pub per_component_gate: bool,
    pub width_min: f64,
    pub width_max: f64,
    /// Half-width of the containment cube around the origin.
    pub containment_half_width: f64,
}

impl Default for AdaptationSection {
    fn default() -> Self {
        Self {
            interval: 50,
            eta1: 0.4,
            eta2: 0.4,
            schedule: Schedule::BurnInOnly,
            per_component_gate: false,
            width_min: 1e-6,
            width_max: 1e6,
            containment_half_width: 1e8,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartPolicy {
    /// Uniform on `[-half_width, half_width]^d`, drawn per repetition.
    UniformBox,
    /// The vector in `point`.
    Fixed,
    Origin,
    /// Every component at 50.
    Far,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StartSection {
    pub policy: StartPolicy,
    pub half_width: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub point: Option<Vec<f64>>,
}

impl Default for StartSection {
    fn default() -> Self {
        Self {
            policy: StartPolicy::UniformBox,
            half_width: 5.0,
            point: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsSection {
    pub act: bool,
    pub asjd: bool,
    /// Running `C_n` per component and joint `D_n`, over the full chain.
    pub coverage: bool,
    pub hitting_time: bool,
    pub coverage_level: f64,
    pub hitting_level: f64,
    /// Emit running coverage at every multiple of this and at `N`.
    pub coverage_every: usize,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self {
            act: true,
            asjd: true,
            coverage: false,
            hitting_time: false,
            coverage_level: 0.99,
            hitting_level: 0.95,
            coverage_every: 100,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
    pub write_chains: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            write_chains: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub target: TargetSection,
    #[serde(default)]
    pub sampler: SamplerSection,
    #[serde(default)]
    pub adaptation: AdaptationSection,
    #[serde(default)]
    pub start: StartSection,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub output: OutputSection,
}

impl ExperimentConfig {
    /// A config with every optional table at its default.
    pub fn new(target: BenchmarkTarget, kind: SamplerKind, seed: u64, repetitions: usize, iterations: usize) -> Self {
        Self {
            experiment: ExperimentSection {
                seed,
                repetitions,
                iterations,
                burn_in_fraction: default_burn_in_fraction(),
                match_evaluations: false,
                threads: None,
            },
            target: TargetSection { name: target },
            sampler: SamplerSection {
                kind,
                ..Default::default()
            },
            adaptation: AdaptationSection::default(),
            start: StartSection::default(),
            metrics: MetricsSection::default(),
            output: OutputSection::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config always serialises")
    }

    /// Hex SHA-256 of the canonical TOML form, excluding the output table.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output = OutputSection::default();
        c.experiment.threads = None;
        hex::encode(Sha256::digest(c.to_toml_string().as_bytes()))
    }

    pub fn dim(&self) -> usize {
        self.target.name.dim()
    }

    /// Iterations actually run by the configured sampler.
    pub fn sampler_iterations(&self) -> usize {
        let n = self.experiment.iterations;
        if self.sampler.kind == SamplerKind::Mh && self.experiment.match_evaluations {
            self.dim() * self.sampler.trials * n
        } else {
            n
        }
    }

    pub fn burn_in(&self) -> usize {
        (self.experiment.burn_in_fraction * self.sampler_iterations() as f64).floor() as usize
    }

    pub fn weight(&self) -> WeightFunction {
        self.sampler.weight.unwrap_or_else(|| self.sampler.kind.default_weight())
    }

    pub fn plateau_params(&self) -> Result<PlateauParams> {
        let s = &self.sampler;
        Ok(PlateauParams::new(s.upsilon, s.sigma, s.varsigma, s.trials)?.with_centers(s.centers))
    }

    pub fn gaussian_params(&self) -> Result<GaussianTrialParams> {
        match &self.sampler.gaussian_sds {
            Some(sds) => {
                if sds.len() != self.sampler.trials {
                    return Err(Error::Config("gaussian_sds must have `trials` entries".into()));
                }
                GaussianTrialParams::new(sds.clone())
            }
            None => GaussianTrialParams::doubling(self.sampler.trials),
        }
    }

    pub fn adaptation_config(&self) -> AdaptationConfig {
        let a = &self.adaptation;
        AdaptationConfig {
            interval: a.interval,
            eta1: a.eta1,
            eta2: a.eta2,
            schedule: a.schedule,
            burn_in: self.burn_in() as u64,
            bounds: (a.width_min, a.width_max),
            per_component_gate: a.per_component_gate,
        }
    }

    pub fn run_config(&self) -> Result<MtmRunConfig> {
        Ok(MtmRunConfig {
            kernel: KernelConfig {
                weight: self.weight(),
                reference_slot: self.sampler.reference_slot,
                containment: Some(BoxRegion::cube(self.dim(), self.adaptation.containment_half_width)?),
            },
            adaptation: self.adaptation_config(),
            count_on_accept: self.sampler.count_on_accept,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        let e = &self.experiment;
        if e.repetitions == 0 {
            return bad("repetitions must be >= 1");
        }
        if e.iterations == 0 {
            return bad("iterations must be >= 1");
        }
        if !(0.0..1.0).contains(&e.burn_in_fraction) {
            return bad("burn_in_fraction must lie in [0, 1)");
        }
        if e.threads == Some(0) {
            return bad("threads must be >= 1");
        }
        if self.sampler.trials == 0 {
            return bad("trials must be >= 1");
        }
        if !(self.adaptation.containment_half_width > 0.0) {
            return bad("containment_half_width must be positive");
        }
        let d = self.dim();
        match self.start.policy {
            StartPolicy::Fixed => match &self.start.point {
                Some(p) if p.len() == d && p.iter().all(|v| v.is_finite()) => {}
                _ => return bad("start.point must be a finite vector of the target dimension"),
            },
            StartPolicy::UniformBox if !(self.start.half_width > 0.0 && self.start.half_width.is_finite()) => {
                return bad("start.half_width must be positive");
            }
            _ => {}
        }
        let m = &self.metrics;
        for level in [m.coverage_level, m.hitting_level] {
            if !(level > 0.0 && level < 1.0) {
                return bad("metric levels must lie in (0, 1)");
            }
        }
        if m.coverage_every == 0 {
            return bad("coverage_every must be >= 1");
        }
        if m.act && self.sampler_iterations() - self.burn_in() < 9 {
            return bad("too few post burn-in iterations for ACT");
        }
        if m.coverage || m.hitting_time {
            let t = crate::targets::make_benchmark_target(self.target.name);
            if t.covariance().is_none() {
                return bad("coverage and hitting metrics need a Gaussian target");
            }
        }
        match self.sampler.kind {
            SamplerKind::Ap => {
                self.plateau_params().map_err(as_config)?;
            }
            SamplerKind::Ag1 | SamplerKind::Ag2 => {
                self.gaussian_params().map_err(as_config)?;
                let s = &self.sampler;
                if !(0.0 < s.eta_under && s.eta_under < s.eta_over && s.eta_over < 1.0) {
                    return bad("need 0 < eta_under < eta_over < 1");
                }
            }
            SamplerKind::Mh => {}
        }
        self.adaptation_config().validate().map_err(as_config)?;
        Ok(())
    }
}

fn as_config(e: Error) -> Error {
    match e {
        Error::Contract(m) => Error::Config(m),
        other => other,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[experiment]
seed = 7
repetitions = 2
iterations = 100

[target]
name = "pi4"
"#;

    #[test]
    fn minimal_config_uses_defaults() {
        let c = ExperimentConfig::from_toml_str(MINIMAL).unwrap();
        assert_eq!(c.sampler.kind, SamplerKind::Ap);
        assert_eq!(c.sampler.trials, 5);
        assert_eq!(c.experiment.burn_in_fraction, 0.5);
        assert_eq!(c.burn_in(), 50);
        assert_eq!(c.weight(), WeightFunction::NormPower { alpha: 2.5 });
    }

    #[test]
    fn round_trip_through_toml() {
        let mut c = ExperimentConfig::new(BenchmarkTarget::Pi1, SamplerKind::Ag2, 3, 4, 500);
        c.sampler.weight = Some(WeightFunction::ProductPower { beta: 0.5 });
        c.start.policy = StartPolicy::Fixed;
        c.start.point = Some(vec![1.0, 2.0, 3.0, 4.0]);
        let back = ExperimentConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let s = format!("{MINIMAL}\n[sampler]\ntrails = 5\n");
        assert!(matches!(ExperimentConfig::from_toml_str(&s), Err(Error::Config(_))));
    }

    #[test]
    fn invalid_values_are_rejected() {
        let s = MINIMAL.replace("repetitions = 2", "repetitions = 0");
        assert!(ExperimentConfig::from_toml_str(&s).is_err());
        let s = format!("{MINIMAL}\n[metrics]\ncoverage = true\n");
        assert!(ExperimentConfig::from_toml_str(&s).is_err());
    }

    #[test]
    fn mh_iterations_match_evaluations() {
        let mut c = ExperimentConfig::new(BenchmarkTarget::Pi1, SamplerKind::Mh, 1, 1, 4000);
        assert_eq!(c.sampler_iterations(), 4000);
        c.experiment.match_evaluations = true;
        assert_eq!(c.sampler_iterations(), 80_000);
        assert_eq!(c.burn_in(), 40_000);
    }

    #[test]
    fn hash_ignores_output_location() {
        let a = ExperimentConfig::new(BenchmarkTarget::Pi3, SamplerKind::Ap, 1, 1, 100);
        let mut b = a.clone();
        b.output.dir = PathBuf::from("/elsewhere");
        assert_eq!(a.hash(), b.hash());
        b.experiment.seed = 2;
        assert_ne!(a.hash(), b.hash());
    }
}
