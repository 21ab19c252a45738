//! Experiment configuration: one JSON document per run.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::fermion::{Protocol, Variant};
use crate::manybody::{Engine, Mode};
use crate::stabilizer::{Sampling, MAX_QUBITS};
use crate::{Error, Result};

/// Environment variable naming the default output directory.
pub const OUT_ENV: &str = "PURIFY_OUT";
pub const DEFAULT_OUT: &str = "purify-out";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManybodyParams {
    pub dimension: usize,
    pub steps: usize,
    #[serde(default = "both_modes")]
    pub modes: Vec<Mode>,
    /// Independent trajectories per mode; trajectory `s` uses stream `s`.
    #[serde(default = "one")]
    pub trajectories: usize,
    #[serde(default)]
    pub engine: Engine,
    #[serde(default = "one")]
    pub entropy_stride: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Rank2Params {
    pub dimension: usize,
    pub steps: usize,
    #[serde(default = "both_modes")]
    pub modes: Vec<Mode>,
    pub walkers: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DysonParams {
    pub rank: usize,
    pub dimension: usize,
    pub steps: usize,
    pub walkers: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FermionParams {
    pub modes: usize,
    pub steps: usize,
    pub variant: Variant,
    pub walkers: usize,
    #[serde(default)]
    pub protocol: Protocol,
    #[serde(default = "one")]
    pub record_stride: usize,
    #[serde(default)]
    pub renyi: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StabilizerParams {
    pub qubits: usize,
    /// Measurement budget per trajectory.
    pub steps: usize,
    pub trajectories: usize,
    #[serde(default)]
    pub sampling: Sampling,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentsParams {
    pub dimensions: Vec<usize>,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "params", rename_all = "snake_case")]
pub enum Experiment {
    Manybody(ManybodyParams),
    Rank2(Rank2Params),
    Dyson(DysonParams),
    Fermion(FermionParams),
    Stabilizer(StabilizerParams),
    VerifyMoments(MomentsParams),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Manybody(_) => "manybody",
            Experiment::Rank2(_) => "rank2",
            Experiment::Dyson(_) => "dyson",
            Experiment::Fermion(_) => "fermion",
            Experiment::Stabilizer(_) => "stabilizer",
            Experiment::VerifyMoments(_) => "verify_moments",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default)]
    pub seed: u64,
    /// Thread count; results do not depend on it.
    #[serde(default = "one")]
    pub workers: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn one() -> usize {
    1
}

fn both_modes() -> Vec<Mode> {
    vec![Mode::Measurement, Mode::Postselection]
}

fn positive(path: &str, v: usize) -> Result<()> {
    if v == 0 {
        return Err(Error::config(path, "must be positive"));
    }
    Ok(())
}

fn even_dimension(path: &str, n: usize) -> Result<()> {
    if n < 2 || n % 2 == 1 {
        return Err(Error::config(path, format!("must be even and at least 2, got {n}")));
    }
    Ok(())
}

fn nonempty_modes(path: &str, modes: &[Mode]) -> Result<()> {
    if modes.is_empty() {
        return Err(Error::config(path, "at least one mode required"));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment, seed: u64) -> Self {
        Self {
            experiment,
            seed,
            workers: 1,
            out: None,
        }
    }

    /// Parses without validating; errors carry the JSON path of the offending field.
    pub fn parse(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(if path == "." { String::from("<root>") } else { path }, e.into_inner().to_string())
        })
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg = Self::parse(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads and parses a config file; call [`validate`](Self::validate) after
    /// applying any overrides.
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// `out` if set, else `$PURIFY_OUT`, else `purify-out`.
    pub fn output_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
    }

    pub fn validate(&self) -> Result<()> {
        positive("workers", self.workers)?;
        let p = |f: &str| format!("experiment.params.{f}");
        match &self.experiment {
            Experiment::Manybody(c) => {
                even_dimension(&p("dimension"), c.dimension)?;
                positive(&p("steps"), c.steps)?;
                positive(&p("trajectories"), c.trajectories)?;
                nonempty_modes(&p("modes"), &c.modes)?;
            }
            Experiment::Rank2(c) => {
                even_dimension(&p("dimension"), c.dimension)?;
                if c.dimension < 4 {
                    return Err(Error::config(p("dimension"), "must be at least 4 for a rank-2 start"));
                }
                positive(&p("steps"), c.steps)?;
                nonempty_modes(&p("modes"), &c.modes)?;
                if c.walkers < 2 {
                    return Err(Error::config(p("walkers"), "need at least 2 walkers"));
                }
            }
            Experiment::Dyson(c) => {
                if !(1..=8).contains(&c.rank) {
                    return Err(Error::config(p("rank"), format!("must be in 1..=8, got {}", c.rank)));
                }
                even_dimension(&p("dimension"), c.dimension)?;
                if c.dimension < 100 * c.rank {
                    return Err(Error::config(p("dimension"), format!("must be at least 100·rank = {}", 100 * c.rank)));
                }
                positive(&p("steps"), c.steps)?;
                if c.walkers < 2 {
                    return Err(Error::config(p("walkers"), "need at least 2 walkers"));
                }
            }
            Experiment::Fermion(c) => {
                positive(&p("modes"), c.modes)?;
                positive(&p("steps"), c.steps)?;
                positive(&p("record_stride"), c.record_stride)?;
                if c.walkers < 2 {
                    return Err(Error::config(p("walkers"), "need at least 2 walkers"));
                }
            }
            Experiment::Stabilizer(c) => {
                if !(1..=MAX_QUBITS).contains(&c.qubits) {
                    return Err(Error::config(p("qubits"), format!("must be in 1..={MAX_QUBITS}")));
                }
                positive(&p("steps"), c.steps)?;
                if c.trajectories < 2 {
                    return Err(Error::config(p("trajectories"), "need at least 2 trajectories"));
                }
            }
            Experiment::VerifyMoments(c) => {
                if c.dimensions.is_empty() {
                    return Err(Error::config(p("dimensions"), "at least one dimension required"));
                }
                for (i, &n) in c.dimensions.iter().enumerate() {
                    even_dimension(&p(&format!("dimensions[{i}]")), n)?;
                    if n < 4 {
                        return Err(Error::config(p(&format!("dimensions[{i}]")), "must be at least 4"));
                    }
                }
                if c.samples < 100 {
                    return Err(Error::config(p("samples"), "need at least 100 samples"));
                }
            }
        }
        Ok(())
    }
}
