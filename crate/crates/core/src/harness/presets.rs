//! Pre-baked desk-scale studies for `reproduce`.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::adaptation::Schedule;
use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, SamplerKind, StartPolicy};
use crate::targets::BenchmarkTarget;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Study {
    CoverageVarpi1,
    CoverageVarpi2,
    HittingVarpi2,
    Bench(BenchmarkTarget),
}

impl Study {
    pub const NAMES: [&'static str; 7] = [
        "coverage-varpi1",
        "coverage-varpi2",
        "hitting-varpi2",
        "bench-pi1",
        "bench-pi2",
        "bench-pi3",
        "bench-pi4",
    ];

    pub fn name(self) -> String {
        match self {
            Study::CoverageVarpi1 => "coverage-varpi1".into(),
            Study::CoverageVarpi2 => "coverage-varpi2".into(),
            Study::HittingVarpi2 => "hitting-varpi2".into(),
            Study::Bench(t) => format!("bench-{}", t.as_str()),
        }
    }

    pub fn samplers(self) -> &'static [SamplerKind] {
        match self {
            Study::Bench(_) => &SamplerKind::ALL,
            _ => &[SamplerKind::Ap, SamplerKind::Ag2],
        }
    }

    /// Adaptive-sampler iterations and repetitions at scale 1.
    fn base_size(self) -> (usize, usize) {
        match self {
            Study::CoverageVarpi1 | Study::CoverageVarpi2 => (10_000, 50),
            Study::HittingVarpi2 => (1_000, 100),
            Study::Bench(BenchmarkTarget::Pi1) => (4_000, 20),
            Study::Bench(BenchmarkTarget::Pi2) => (10_000, 20),
            Study::Bench(_) => (3_000, 20),
        }
    }

    /// Configs for every sampler of the study, writing below `opts.out/<study>/<sampler>`.
    pub fn configs(self, opts: &PresetOptions) -> Result<Vec<ExperimentConfig>> {
        if !(opts.scale > 0.0 && opts.scale.is_finite()) {
            return Err(Error::Config("scale must be positive".into()));
        }
        let (n0, r0) = self.base_size();
        let n = opts
            .iters
            .unwrap_or_else(|| ((n0 as f64 * opts.scale).round() as usize).max(1));
        let r = opts.reps.unwrap_or(r0);
        let target = match self {
            Study::CoverageVarpi1 => BenchmarkTarget::Varpi1,
            Study::CoverageVarpi2 | Study::HittingVarpi2 => BenchmarkTarget::Varpi2,
            Study::Bench(t) => t,
        };
        self.samplers()
            .iter()
            .map(|&kind| {
                let mut c = ExperimentConfig::new(target, kind, opts.seed, r, n);
                c.experiment.threads = opts.threads;
                c.output.dir = opts.out.join(self.name()).join(kind.as_str());
                c.output.write_chains = opts.write_chains;
                match self {
                    Study::Bench(_) => {
                        c.experiment.match_evaluations = true;
                        c.adaptation.schedule = Schedule::BurnInOnly;
                    }
                    _ => {
                        c.experiment.burn_in_fraction = 0.0;
                        c.adaptation.schedule = Schedule::Always;
                        c.metrics.act = false;
                        c.metrics.asjd = false;
                        if self == Study::HittingVarpi2 {
                            c.metrics.hitting_time = true;
                            c.start.policy = StartPolicy::Far;
                        } else {
                            c.metrics.coverage = true;
                            c.start.policy = StartPolicy::Origin;
                        }
                    }
                }
                c.validate()?;
                Ok(c)
            })
            .collect()
    }
}

impl FromStr for Study {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "coverage-varpi1" => Study::CoverageVarpi1,
            "coverage-varpi2" => Study::CoverageVarpi2,
            "hitting-varpi2" => Study::HittingVarpi2,
            other => match other.strip_prefix("bench-") {
                Some(t @ ("pi1" | "pi2" | "pi3" | "pi4")) => Study::Bench(t.parse()?),
                _ => {
                    return Err(Error::Config(format!(
                        "unknown study `{other}`; expected one of {}",
                        Self::NAMES.join(", ")
                    )))
                }
            },
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PresetOptions {
    /// Multiplies the iteration counts.
    pub scale: f64,
    pub seed: u64,
    pub reps: Option<usize>,
    pub iters: Option<usize>,
    pub out: PathBuf,
    pub threads: Option<usize>,
    pub write_chains: bool,
}

impl PresetOptions {
    pub fn new(out: &Path) -> Self {
        Self {
            scale: 1.0,
            seed: 1,
            reps: None,
            iters: None,
            out: out.to_path_buf(),
            threads: None,
            write_chains: false,
        }
    }
}
