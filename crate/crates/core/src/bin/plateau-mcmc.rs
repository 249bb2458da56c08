use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use plateau_mcmc::diagnostics::chisq_quantile;
use plateau_mcmc::harness::output::{metrics_csv, write_atomic};
use plateau_mcmc::harness::presets::{PresetOptions, Study};
use plateau_mcmc::harness::{diagnose, run_experiment, ExperimentConfig, ExperimentOutput};
use plateau_mcmc::Error;

/// Adaptive multiple-try Metropolis experiments.
#[derive(Parser, Debug)]
#[command(name = "plateau-mcmc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run {
        config: PathBuf,
        #[command(flatten)]
        common: Overrides,
    },
    /// Run a pre-baked desk-scale study.
    Reproduce {
        /// coverage-varpi1, coverage-varpi2, hitting-varpi2 or bench-pi1..bench-pi4
        study: String,
        /// Multiplies the study's iteration counts.
        #[arg(long, default_value_t = 1.0)]
        scale: f64,
        /// Only write the configs, do not run them.
        #[arg(long)]
        emit_config: bool,
        #[command(flatten)]
        common: Overrides,
    },
    /// Recompute metrics from stored chain files or directories.
    Diagnose {
        #[arg(required = true)]
        chains: Vec<PathBuf>,
        /// Directory for metrics.csv; printed to stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check the chi-square quantile routine against tabulated values.
    QuantileCheck,
}

#[derive(Args, Debug)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    reps: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Store every chain under <out>/chains.
    #[arg(long)]
    write_chains: bool,
}

impl Overrides {
    fn apply(&self, cfg: &mut ExperimentConfig) {
        if let Some(s) = self.seed {
            cfg.experiment.seed = s;
        }
        if let Some(r) = self.reps {
            cfg.experiment.repetitions = r;
        }
        if let Some(n) = self.iters {
            cfg.experiment.iterations = n;
        }
        if let Some(o) = &self.out {
            cfg.output.dir = o.clone();
        }
        if self.threads.is_some() {
            cfg.experiment.threads = self.threads;
        }
        cfg.output.write_chains |= self.write_chains;
    }
}

fn report(cfg: &ExperimentConfig, out: &ExperimentOutput) {
    println!(
        "{} on {}: {} repetitions, {} iterations, acceptance {:.3} -> {}",
        cfg.sampler.kind,
        cfg.target.name,
        out.summary.repetitions,
        out.summary.iterations,
        out.summary.mean_acceptance_rate,
        cfg.output.dir.display()
    );
    for row in out.summary.stats.iter().filter(|r| r.n.is_none()) {
        let comp = row.component.map_or_else(|| "joint".to_string(), |k| k.to_string());
        let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.4}"));
        println!(
            "  {:<14} {:>5}  median {:>10}  [{}, {}]  missing {}",
            row.metric.as_str(),
            comp,
            fmt(row.median),
            fmt(row.q025),
            fmt(row.q975),
            row.missing
        );
    }
}

fn quantile_check() -> bool {
    let cases = [(0.99, 1, 6.6349), (0.99, 5, 15.0863), (0.95, 2, 5.9915)];
    let mut ok = true;
    for (level, df, expect) in cases {
        let z = chisq_quantile(level, df).unwrap_or(f64::NAN);
        let pass = (z - expect).abs() < 1e-3;
        ok &= pass;
        println!(
            "{} chisq_quantile({level}, {df}) = {z:.6} (expected {expect})",
            if pass { "PASS" } else { "FAIL" }
        );
    }
    ok
}

fn run(cli: Cli) -> Result<ExitCode, Error> {
    match cli.command {
        Command::Run { config, common } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            common.apply(&mut cfg);
            cfg.validate()?;
            let out = run_experiment(&cfg)?;
            report(&cfg, &out);
        }
        Command::Reproduce {
            study,
            scale,
            emit_config,
            common,
        } => {
            let study: Study = study.parse()?;
            let mut opts = PresetOptions::new(common.out.as_deref().unwrap_or("out".as_ref()));
            opts.scale = scale;
            opts.seed = common.seed.unwrap_or(opts.seed);
            opts.reps = common.reps;
            opts.iters = common.iters;
            opts.threads = common.threads;
            opts.write_chains = common.write_chains;
            for cfg in study.configs(&opts)? {
                if emit_config {
                    let path = cfg.output.dir.join("config.toml");
                    write_atomic(&path, cfg.to_toml_string().as_bytes())?;
                    println!("{}", path.display());
                } else {
                    let out = run_experiment(&cfg)?;
                    report(&cfg, &out);
                }
            }
        }
        Command::Diagnose { chains, out } => {
            let csv = metrics_csv(&diagnose(&chains)?)?;
            match out {
                Some(dir) => write_atomic(&dir.join("metrics.csv"), &csv)?,
                None => {
                    use std::io::Write;
                    std::io::stdout().write_all(&csv)?;
                }
            }
        }
        Command::QuantileCheck => {
            if !quantile_check() {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
