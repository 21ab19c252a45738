use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;

use purify::fermion::{Protocol, Variant};
use purify::harness::config::{
    DysonParams, Experiment, ExperimentConfig, FermionParams, ManybodyParams, MomentsParams, Rank2Params,
    StabilizerParams, DEFAULT_OUT, OUT_ENV,
};
use purify::harness::manifest::OutputSet;
use purify::harness::{run, verify, Suite, VerifySettings};
use purify::manybody::{Engine, Mode};
use purify::stabilizer::Sampling;
use purify::Error;

/// Purification dynamics under random measurements: simulations and checks.
#[derive(Parser)]
#[command(name = "purify", version)]
struct Cli {
    #[command(flatten)]
    shared: Shared,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Shared {
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; outputs do not depend on this.
    #[arg(long, global = true)]
    workers: Option<usize>,
    #[arg(long, global = true, env = OUT_ENV)]
    out: Option<PathBuf>,
    /// JSON config; flags given on the command line override its fields.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

/// Parses a value through its serde name, e.g. `measurement` or `uniform_nonidentity`.
fn named<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string())).map_err(|e| e.to_string())
}

#[derive(Subcommand)]
enum Command {
    /// Many-body trajectories from the maximally mixed state.
    Manybody {
        #[arg(long, short = 'n')]
        dimension: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        /// Repeatable: measurement, postselection.
        #[arg(long = "mode", value_parser = named::<Mode>)]
        modes: Vec<Mode>,
        #[arg(long)]
        trajectories: Option<usize>,
        #[arg(long, value_parser = named::<Engine>)]
        engine: Option<Engine>,
        #[arg(long)]
        entropy_stride: Option<usize>,
    },
    /// Ensemble purity from a rank-2 start, with the leading-order prediction.
    Rank2 {
        #[arg(long, short = 'n')]
        dimension: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long = "mode", value_parser = named::<Mode>)]
        modes: Vec<Mode>,
        #[arg(long)]
        walkers: Option<usize>,
    },
    /// Low-rank eigenvalue diffusion against direct simulation.
    Dyson {
        #[arg(long, short = 'd')]
        rank: Option<usize>,
        #[arg(long, short = 'n')]
        dimension: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        walkers: Option<usize>,
    },
    /// Gaussian fermion purification.
    Fermion {
        #[arg(long, value_parser = named::<Variant>)]
        variant: Option<Variant>,
        #[arg(long)]
        modes: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        walkers: Option<usize>,
        #[arg(long, value_parser = named::<Protocol>)]
        protocol: Option<Protocol>,
        #[arg(long)]
        record_stride: Option<usize>,
        #[arg(long)]
        renyi: bool,
    },
    /// Stabilizer states under random Pauli measurements.
    Stabilizer {
        #[arg(long, short = 'n')]
        qubits: Option<usize>,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long)]
        trajectories: Option<usize>,
        #[arg(long, value_parser = named::<Sampling>)]
        sampling: Option<Sampling>,
    },
    /// Monte Carlo check of the one-step purity statistics.
    VerifyMoments {
        #[arg(long, value_delimiter = ',')]
        dimensions: Vec<usize>,
        #[arg(long)]
        samples: Option<usize>,
    },
    /// Run verification suites (all by default).
    Verify {
        #[arg(long = "suite", value_parser = named::<Suite>)]
        suites: Vec<Suite>,
        #[arg(long)]
        moment_samples: Option<usize>,
        #[arg(long)]
        stabilizer_trajectories: Option<usize>,
    },
}

fn required<T>(v: Option<T>, field: &str, flag: &str) -> purify::Result<T> {
    v.ok_or_else(|| Error::Config {
        path: format!("experiment.params.{field}"),
        message: format!("missing; pass --{flag} or set it in --config"),
    })
}

fn or_base<T: Clone>(flag: Option<T>, base: Option<&T>) -> Option<T> {
    flag.or_else(|| base.cloned())
}

fn modes_or(flag: Vec<Mode>, base: Option<&Vec<Mode>>) -> Vec<Mode> {
    match (flag.is_empty(), base) {
        (false, _) => flag,
        (true, Some(b)) => b.clone(),
        (true, None) => vec![Mode::Measurement, Mode::Postselection],
    }
}

/// Builds the experiment from flags, falling back to the config file's fields.
fn experiment(cmd: Command, base: Option<&Experiment>) -> purify::Result<Experiment> {
    macro_rules! base_of {
        ($variant:ident) => {
            match base {
                Some(Experiment::$variant(p)) => Some(p),
                Some(other) => {
                    return Err(Error::Config {
                        path: "experiment.kind".into(),
                        message: format!("config file is `{}`, command needs another kind", other.kind()),
                    })
                }
                None => None,
            }
        };
    }
    Ok(match cmd {
        Command::Manybody {
            dimension,
            steps,
            modes,
            trajectories,
            engine,
            entropy_stride,
        } => {
            let b = base_of!(Manybody);
            Experiment::Manybody(ManybodyParams {
                dimension: required(or_base(dimension, b.map(|p| &p.dimension)), "dimension", "dimension")?,
                steps: required(or_base(steps, b.map(|p| &p.steps)), "steps", "steps")?,
                modes: modes_or(modes, b.map(|p| &p.modes)),
                trajectories: or_base(trajectories, b.map(|p| &p.trajectories)).unwrap_or(1),
                engine: or_base(engine, b.map(|p| &p.engine)).unwrap_or_default(),
                entropy_stride: or_base(entropy_stride, b.map(|p| &p.entropy_stride)).unwrap_or(1),
            })
        }
        Command::Rank2 {
            dimension,
            steps,
            modes,
            walkers,
        } => {
            let b = base_of!(Rank2);
            Experiment::Rank2(Rank2Params {
                dimension: required(or_base(dimension, b.map(|p| &p.dimension)), "dimension", "dimension")?,
                steps: required(or_base(steps, b.map(|p| &p.steps)), "steps", "steps")?,
                modes: modes_or(modes, b.map(|p| &p.modes)),
                walkers: required(or_base(walkers, b.map(|p| &p.walkers)), "walkers", "walkers")?,
            })
        }
        Command::Dyson {
            rank,
            dimension,
            steps,
            walkers,
        } => {
            let b = base_of!(Dyson);
            Experiment::Dyson(DysonParams {
                rank: required(or_base(rank, b.map(|p| &p.rank)), "rank", "rank")?,
                dimension: required(or_base(dimension, b.map(|p| &p.dimension)), "dimension", "dimension")?,
                steps: required(or_base(steps, b.map(|p| &p.steps)), "steps", "steps")?,
                walkers: required(or_base(walkers, b.map(|p| &p.walkers)), "walkers", "walkers")?,
            })
        }
        Command::Fermion {
            variant,
            modes,
            steps,
            walkers,
            protocol,
            record_stride,
            renyi,
        } => {
            let b = base_of!(Fermion);
            Experiment::Fermion(FermionParams {
                modes: required(or_base(modes, b.map(|p| &p.modes)), "modes", "modes")?,
                steps: required(or_base(steps, b.map(|p| &p.steps)), "steps", "steps")?,
                variant: required(or_base(variant, b.map(|p| &p.variant)), "variant", "variant")?,
                walkers: required(or_base(walkers, b.map(|p| &p.walkers)), "walkers", "walkers")?,
                protocol: or_base(protocol, b.map(|p| &p.protocol)).unwrap_or_default(),
                record_stride: or_base(record_stride, b.map(|p| &p.record_stride)).unwrap_or(1),
                renyi: renyi || b.is_some_and(|p| p.renyi),
            })
        }
        Command::Stabilizer {
            qubits,
            steps,
            trajectories,
            sampling,
        } => {
            let b = base_of!(Stabilizer);
            Experiment::Stabilizer(StabilizerParams {
                qubits: required(or_base(qubits, b.map(|p| &p.qubits)), "qubits", "qubits")?,
                steps: required(or_base(steps, b.map(|p| &p.steps)), "steps", "steps")?,
                trajectories: required(or_base(trajectories, b.map(|p| &p.trajectories)), "trajectories", "trajectories")?,
                sampling: or_base(sampling, b.map(|p| &p.sampling)).unwrap_or_default(),
            })
        }
        Command::VerifyMoments { dimensions, samples } => {
            let b = base_of!(VerifyMoments);
            let dimensions = match (dimensions.is_empty(), b) {
                (false, _) => dimensions,
                (true, Some(p)) => p.dimensions.clone(),
                (true, None) => vec![32, 64, 128],
            };
            Experiment::VerifyMoments(MomentsParams {
                dimensions,
                samples: or_base(samples, b.map(|p| &p.samples)).unwrap_or(20_000),
            })
        }
        Command::Verify { .. } => unreachable!("handled before config assembly"),
    })
}

enum Outcome {
    Pass,
    Fail,
}

/// A config file that cannot be read is a configuration error, not a runtime one.
fn unreadable(e: Error) -> Error {
    match e {
        Error::Io { path, source } => Error::Config {
            path: "--config".into(),
            message: format!("cannot read {}: {source}", path.display()),
        },
        other => other,
    }
}

fn parse_file<T: DeserializeOwned>(path: &Path) -> purify::Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| unreadable(Error::io(path, e)))?;
    serde_path_to_error::deserialize(&mut serde_json::Deserializer::from_str(&text))
        .map_err(|e| Error::config(e.path().to_string(), e.into_inner().to_string()))
}

fn execute(cli: Cli) -> purify::Result<Outcome> {
    let shared = cli.shared;
    if let Command::Verify {
        suites,
        moment_samples,
        stabilizer_trajectories,
    } = cli.command
    {
        let mut settings: VerifySettings = match shared.config.as_deref() {
            Some(p) => parse_file(p)?,
            None => VerifySettings::default(),
        };
        if let Some(s) = shared.seed {
            settings.seed = s;
        }
        if let Some(w) = shared.workers {
            settings.workers = w;
        }
        if settings.workers == 0 {
            return Err(Error::config("workers", "must be positive"));
        }
        if let Some(s) = moment_samples {
            settings.moment_samples = s;
        }
        if let Some(t) = stabilizer_trajectories {
            settings.stabilizer_trajectories = t;
        }
        let suites = if suites.is_empty() { Suite::ALL.to_vec() } else { suites };
        let mut reports = Vec::new();
        for suite in suites {
            let r = verify(suite, &settings)?;
            println!("{} {}", if r.passed { "PASS" } else { "FAIL" }, suite.name());
            reports.push(r);
        }
        let dir = shared.out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
        let mut out = OutputSet::create(&dir)?;
        out.write_json("verify_report.json", &reports)?;
        println!("report: {}", dir.join("verify_report.json").display());
        return Ok(if reports.iter().all(|r| r.passed) { Outcome::Pass } else { Outcome::Fail });
    }

    let base = shared.config.as_deref().map(ExperimentConfig::read).transpose().map_err(unreadable)?;
    let experiment = experiment(cli.command, base.as_ref().map(|c| &c.experiment))?;
    let mut config = ExperimentConfig::new(experiment, 0);
    if let Some(b) = &base {
        config.seed = b.seed;
        config.workers = b.workers;
        config.out = b.out.clone();
    }
    if let Some(s) = shared.seed {
        config.seed = s;
    }
    if let Some(w) = shared.workers {
        config.workers = w;
    }
    if let Some(o) = shared.out {
        config.out = Some(o);
    }
    config.validate()?;
    let manifest = run(&config)?;
    let dir = config.output_dir();
    for f in &manifest.outputs {
        println!("{}  {}", f.sha256, dir.join(&f.path).display());
    }
    println!("manifest: {}", dir.join("manifest.json").display());
    Ok(match manifest.passed {
        Some(false) => {
            println!("FAIL {}", config.experiment.kind());
            Outcome::Fail
        }
        Some(true) => {
            println!("PASS {}", config.experiment.kind());
            Outcome::Pass
        }
        None => Outcome::Pass,
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail) => ExitCode::from(1),
        Err(e @ (Error::Config { .. } | Error::Json(_))) => {
            eprintln!("{e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
