//! Dispatch a config to its module and persist the results.

use serde::Serialize;

use super::config::{Experiment, ExperimentConfig};
use super::manifest::{timestamp, worker_seeds, OutputSet, RunManifest};
use super::output::float;
use super::verify::verify_moments;
use crate::dyson::{microscopic_comparison, MicroscopicComparison};
use crate::fermion::{run_purification, PurificationOptions};
use crate::manybody::{run_purity_ensemble, run_trajectory_with, Mode, RegimeReport, TrajectoryOptions, TrajectorySummary};
use crate::parallel::map_indexed;
use crate::stabilizer::{run_ensemble, StabilizerOptions, StabilizerRecord};
use crate::{stabilizer, Result};

#[derive(Serialize)]
struct ManybodyEntry {
    summary: TrajectorySummary,
    regimes: Option<RegimeReport>,
}

#[derive(Serialize)]
struct Rank2Entry {
    mode: Mode,
    /// Over t ≤ min(N/5, steps).
    window: usize,
    max_relative_deviation: f64,
}

fn comparison_csv(c: &MicroscopicComparison) -> String {
    let mut out = String::from("step,sde_purity,sde_stderr,micro_purity,micro_stderr\n");
    for (s, m) in c.sde.iter().zip(&c.microscopic) {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.step,
            float(s.purity.mean),
            float(s.purity.standard_error),
            float(m.purity.mean),
            float(m.purity.standard_error)
        ));
    }
    out
}

/// Runs `config`, writes its data files and `manifest.json` into the output
/// directory, and returns the manifest. `passed` is set for verification kinds.
pub fn run(config: &ExperimentConfig) -> Result<RunManifest> {
    config.validate()?;
    let started = timestamp();
    let dir = config.output_dir();
    let mut out = OutputSet::create(&dir)?;
    let seed = config.seed;
    let workers = config.workers;
    let mut passed = None;

    let items = match &config.experiment {
        Experiment::Manybody(c) => {
            let jobs: Vec<(Mode, usize)> = c.modes.iter().flat_map(|&m| (0..c.trajectories).map(move |s| (m, s))).collect();
            let records = map_indexed(jobs.len(), workers, |i| {
                let (mode, s) = jobs[i];
                let mut opts = TrajectoryOptions::new(c.dimension, c.steps, mode, seed);
                opts.stream = s as u64;
                opts.engine = c.engine;
                opts.entropy_stride = c.entropy_stride;
                run_trajectory_with(&opts)
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
            let mut entries = Vec::new();
            for (rec, (mode, s)) in records.iter().zip(&jobs) {
                out.write(&format!("manybody_{mode}_{s}.csv"), &rec.to_csv())?;
                entries.push(ManybodyEntry {
                    summary: rec.summary(),
                    regimes: (*mode == Mode::Measurement).then(|| RegimeReport::from_purity(&rec.purities(), c.dimension)),
                });
            }
            out.write_json("manybody_summary.json", &entries)?;
            jobs.len()
        }
        Experiment::Rank2(c) => {
            let mut entries = Vec::new();
            for &mode in &c.modes {
                let e = run_purity_ensemble(c.dimension, 2, c.steps, mode, c.walkers, seed, workers)?;
                out.write(&format!("rank2_{mode}.csv"), &e.to_csv())?;
                let window = (c.dimension / 5).min(c.steps);
                entries.push(Rank2Entry {
                    mode,
                    window,
                    max_relative_deviation: e.max_relative_deviation(window),
                });
            }
            out.write_json("rank2_summary.json", &entries)?;
            c.walkers
        }
        Experiment::Dyson(c) => {
            let cmp = microscopic_comparison(c.rank, c.dimension, c.steps, c.walkers, seed, workers)?;
            out.write("dyson_comparison.csv", &comparison_csv(&cmp))?;
            out.write_json("dyson_summary.json", &cmp)?;
            c.walkers
        }
        Experiment::Fermion(c) => {
            let mut opts = PurificationOptions::new(c.modes, c.steps, c.variant, c.walkers, seed);
            opts.protocol = c.protocol;
            opts.record_stride = c.record_stride;
            opts.renyi = c.renyi;
            let r = run_purification(&opts, workers)?;
            out.write("fermion.csv", &r.to_csv())?;
            out.write_json("fermion_summary.json", &r)?;
            c.walkers
        }
        Experiment::Stabilizer(c) => {
            let mut opts = StabilizerOptions::new(c.qubits, c.steps, seed);
            opts.sampling = c.sampling;
            let single: StabilizerRecord = stabilizer::run_purification(&opts)?;
            out.write("stabilizer.csv", &single.to_csv())?;
            out.write_json("stabilizer_summary.json", &run_ensemble(&opts, c.trajectories, workers)?)?;
            c.trajectories
        }
        Experiment::VerifyMoments(c) => {
            let r = verify_moments(&c.dimensions, c.samples, seed, workers)?;
            passed = Some(r.passed());
            out.write_json("verify_moments.json", &r)?;
            c.samples
        }
    };

    let manifest = RunManifest {
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: config.clone(),
        started,
        finished: timestamp(),
        workers: worker_seeds(items, workers, seed),
        outputs: out.into_files(),
        passed,
    };
    manifest.save(&dir)?;
    Ok(manifest)
}
