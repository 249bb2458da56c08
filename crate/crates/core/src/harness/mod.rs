//! Experiment orchestration: seeded repetitions, metrics and persisted output.
//!
//! Every repetition `r` (1-based) draws from two ChaCha8 streams of the
//! generator seeded with the experiment seed: stream `2r` drives the chain
//! and stream `2r + 1` draws the starting point. All samplers run with the
//! same seed therefore share their starting points.

pub mod config;
pub mod output;
pub mod presets;

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::diagnostics::{
    act_initial_sequence, asjd, chisq_quantile, first_hitting_time, running_coverage_component,
    running_coverage_joint, Metric, MetricRecord,
};
use crate::error::{Error, Result};
use crate::gaussian::MhProposal;
use crate::sampler::{run_chain, run_mh_chain, ChainRecord, GaussianFamily, PlateauFamily};
use crate::targets::make_benchmark_target;

pub use config::{ExperimentConfig, SamplerKind, StartPolicy};
pub use output::{Summary, SummaryRow};

pub const CHAIN_STREAM: u64 = 0;
pub const INIT_STREAM: u64 = 1;

/// Generator for `(seed, repetition, purpose)`.
pub fn stream_rng(seed: u64, repetition: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream((repetition << 1) | purpose);
    rng
}

pub fn starting_point(cfg: &ExperimentConfig, repetition: u64) -> Vec<f64> {
    let d = cfg.dim();
    match cfg.start.policy {
        StartPolicy::Origin => vec![0.0; d],
        StartPolicy::Far => vec![50.0; d],
        StartPolicy::Fixed => cfg.start.point.clone().expect("validated"),
        StartPolicy::UniformBox => {
            let h = cfg.start.half_width;
            let mut rng = stream_rng(cfg.experiment.seed, repetition, INIT_STREAM);
            (0..d).map(|_| rng.random_range(-h..=h)).collect()
        }
    }
}

/// Runs the configured sampler for one repetition.
pub fn run_repetition(cfg: &ExperimentConfig, repetition: u64) -> Result<ChainRecord> {
    let target = make_benchmark_target(cfg.target.name);
    let d = cfg.dim();
    let x0 = starting_point(cfg, repetition);
    let mut rng = stream_rng(cfg.experiment.seed, repetition, CHAIN_STREAM);
    let n = cfg.sampler_iterations();
    let mut chain = match cfg.sampler.kind {
        SamplerKind::Ap => {
            let mut fam = PlateauFamily::new(cfg.plateau_params()?, d);
            run_chain(&mut rng, &mut fam, &target, &cfg.run_config()?, n, &x0)?
        }
        SamplerKind::Ag1 | SamplerKind::Ag2 => {
            let s = &cfg.sampler;
            let mut fam = GaussianFamily::new(cfg.gaussian_params()?, d, s.eta_over, s.eta_under)?;
            run_chain(&mut rng, &mut fam, &target, &cfg.run_config()?, n, &x0)?
        }
        SamplerKind::Mh => {
            let prop = MhProposal::for_benchmark(cfg.target.name);
            run_mh_chain(&mut rng, &prop, &target, n, &x0)?
        }
    };
    chain.seed = cfg.experiment.seed;
    chain.repetition = repetition;
    chain.config_hash = cfg.hash();
    Ok(chain)
}

/// All configured metrics of one chain.
///
/// ACT and ASJD use `X_B..X_N` with `B` the burn-in; coverage and hitting
/// times use the whole chain.
pub fn compute_metrics(cfg: &ExperimentConfig, chain: &ChainRecord) -> Result<Vec<MetricRecord>> {
    let target = make_benchmark_target(cfg.target.name);
    let d = chain.dim;
    let m = &cfg.metrics;
    let rep = chain.repetition;
    let burn = cfg.burn_in();
    let mut out = Vec::new();
    let record = |metric, component, n, value| MetricRecord {
        repetition: rep,
        metric,
        component,
        n,
        value,
    };
    let kept: Vec<Vec<f64>> = if m.act || m.asjd {
        (0..d).map(|k| chain.component(k, burn)).collect()
    } else {
        Vec::new()
    };
    if m.act {
        let vars = target.component_variances();
        for (k, x) in kept.iter().enumerate() {
            let v = match act_initial_sequence(x, vars.map(|v| v[k])) {
                Ok(v) => Some(v),
                Err(Error::Degenerate(_)) => None,
                Err(e) => return Err(e),
            };
            out.push(record(Metric::Act, Some(k), None, v));
        }
    }
    if m.asjd {
        for (k, x) in kept.iter().enumerate() {
            out.push(record(Metric::Asjd, Some(k), None, Some(asjd(x)?)));
        }
    }
    let n_total = chain.iterations();
    let emit = |n: usize| n.is_multiple_of(m.coverage_every) || n == n_total;
    if m.coverage {
        let cov = target
            .covariance()
            .ok_or_else(|| Error::Config("coverage needs a Gaussian target".into()))?;
        let z1 = chisq_quantile(m.coverage_level, 1)?;
        for k in 0..d {
            let c = running_coverage_component(&chain.component(k, 0), cov[(k, k)], z1)?;
            for (i, v) in c.into_iter().enumerate() {
                if emit(i + 1) {
                    out.push(record(Metric::CoverageComponent, Some(k), Some(i as u64 + 1), Some(v)));
                }
            }
        }
        let z2 = chisq_quantile(m.coverage_level, d as u32)?;
        for (i, v) in running_coverage_joint(chain, cov, z2)?.into_iter().enumerate() {
            if emit(i + 1) {
                out.push(record(Metric::CoverageJoint, None, Some(i as u64 + 1), Some(v)));
            }
        }
    }
    if m.hitting_time {
        let cov = target
            .covariance()
            .ok_or_else(|| Error::Config("hitting time needs a Gaussian target".into()))?;
        let z0 = chisq_quantile(m.hitting_level, d as u32)?;
        let j = first_hitting_time(chain, cov, z0)?;
        out.push(record(Metric::HittingTime, None, None, j.map(|j| j as f64)));
    }
    Ok(out)
}

/// Per-repetition results kept after the chain itself is dropped.
#[derive(Clone, Debug, PartialEq)]
pub struct RepetitionResult {
    pub repetition: u64,
    pub records: Vec<MetricRecord>,
    pub acceptance_rate: f64,
    pub target_evals: u64,
    pub adaptation_events: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutput {
    pub repetitions: Vec<RepetitionResult>,
    pub summary: Summary,
}

impl ExperimentOutput {
    pub fn records(&self) -> Vec<MetricRecord> {
        self.repetitions.iter().flat_map(|r| r.records.iter().cloned()).collect()
    }
}

pub fn chain_path(dir: &Path, repetition: u64) -> PathBuf {
    dir.join("chains").join(format!("r{repetition}.bin"))
}

/// Runs every repetition in parallel; results are ordered by repetition.
/// Chains are written under `chain_dir` when given.
pub fn execute(cfg: &ExperimentConfig, chain_dir: Option<&Path>) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let toml = cfg.to_toml_string();
    let one = |r: u64| -> Result<RepetitionResult> {
        let chain = run_repetition(cfg, r)?;
        if let Some(dir) = chain_dir {
            output::write_atomic(&chain_path(dir, r), &output::encode_chain(&chain, &toml)?)?;
        }
        Ok(RepetitionResult {
            repetition: r,
            records: compute_metrics(cfg, &chain)?,
            acceptance_rate: chain.acceptance_rate(),
            target_evals: chain.target_evals,
            adaptation_events: chain.events.len(),
        })
    };
    let reps = cfg.experiment.repetitions as u64;
    let run_all = || (1..=reps).into_par_iter().map(one).collect::<Result<Vec<_>>>();
    let results = match cfg.experiment.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(run_all)?,
        None => run_all()?,
    };
    let summary = build_summary(cfg, &results)?;
    Ok(ExperimentOutput {
        repetitions: results,
        summary,
    })
}

fn build_summary(cfg: &ExperimentConfig, results: &[RepetitionResult]) -> Result<Summary> {
    let records: Vec<MetricRecord> = results.iter().flat_map(|r| r.records.iter().cloned()).collect();
    let stats = if records.is_empty() {
        Vec::new()
    } else {
        output::summarize(&records)?
    };
    Ok(Summary {
        schema_version: output::SCHEMA_VERSION,
        config_hash: cfg.hash(),
        target: cfg.target.name.as_str().to_string(),
        sampler: cfg.sampler.kind.as_str().to_string(),
        repetitions: results.len(),
        iterations: cfg.sampler_iterations(),
        burn_in: cfg.burn_in(),
        mean_acceptance_rate: results.iter().map(|r| r.acceptance_rate).sum::<f64>() / results.len() as f64,
        target_evaluations: results.iter().map(|r| r.target_evals).collect(),
        adaptation_events: results.iter().map(|r| r.adaptation_events).sum(),
        stats,
    })
}

/// Runs the experiment and writes `config.toml`, `metrics.csv`,
/// `summary.json` and, if enabled, `chains/r<k>.bin` to the output directory.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir)?;
    let out = execute(cfg, cfg.output.write_chains.then_some(dir.as_path()))?;
    output::write_atomic(&dir.join("config.toml"), cfg.to_toml_string().as_bytes())?;
    output::write_atomic(&dir.join("metrics.csv"), &output::metrics_csv(&out.records())?)?;
    let json = serde_json::to_vec_pretty(&out.summary).map_err(|e| Error::Io(e.into()))?;
    output::write_atomic(&dir.join("summary.json"), &json)?;
    Ok(out)
}

/// Recomputes metrics from stored chains. Directories are expanded to the
/// chain files they contain; results are ordered by repetition.
pub fn diagnose(paths: &[PathBuf]) -> Result<Vec<MetricRecord>> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let dir = if p.join("chains").is_dir() { p.join("chains") } else { p.clone() };
            for e in std::fs::read_dir(&dir)? {
                let f = e?.path();
                if f.extension().is_some_and(|x| x == "bin") {
                    files.push(f);
                }
            }
        } else {
            files.push(p.clone());
        }
    }
    if files.is_empty() {
        return Err(Error::Config("no chain files given".into()));
    }
    let mut chains = files
        .par_iter()
        .map(|f| -> Result<Vec<MetricRecord>> {
            let (chain, toml) = output::decode_chain(&std::fs::read(f)?)?;
            let cfg = ExperimentConfig::from_toml_str(&toml)?;
            if cfg.hash() != chain.config_hash {
                return Err(Error::ChainFormat(format!("{}: config hash mismatch", f.display())));
            }
            compute_metrics(&cfg, &chain)
        })
        .collect::<Result<Vec<_>>>()?;
    chains.sort_by_key(|r| r.first().map(|m| m.repetition));
    Ok(chains.into_iter().flatten().collect())
}
