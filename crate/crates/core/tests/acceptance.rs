//! End-to-end acceptance checks, one trial per criterion. Each trial prints a
//! single `PASS`/`FAIL` line with the numbers it compared.
//!
//! The full-size many-body regime check (N = 2000) is ignored by default; run
//! it with `cargo test --test acceptance -- --include-ignored`.

use std::sync::OnceLock;

use libtest_mimic::{Arguments, Failed, Trial};
use serde::Serialize;

use purify::dyson::{generator_identity_check, microscopic_comparison};
use purify::fermion::{
    mc_delta_s_pairing, oracle_check, power_law_exponent, run_purification, MajoranaCorrelationMatrix,
    PurificationOptions, Variant,
};
use purify::harness::manifest::sha256_hex;
use purify::harness::verify::{moment_states, verify_stabilizer};
use purify::manybody::{
    inequality_check, run_purity_ensemble, run_trajectory_with, Mode, RegimeReport, TrajectoryOptions,
};
use purify::moments::{
    analytic_measured_mean, analytic_noise, analytic_postselected_mean, so_quartic_moments, Statistic, TraceBatch,
    TraceProfile,
};
use purify::RngStream;

const SEED: u64 = 20_240_601;

fn workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn verdict(id: &str, ok: bool, detail: impl std::fmt::Display) -> Result<(), Failed> {
    println!("{} criterion {id}: {detail}", if ok { "PASS" } else { "FAIL" });
    if ok {
        Ok(())
    } else {
        Err(format!("criterion {id} failed: {detail}").into())
    }
}

fn err(e: purify::Error) -> Failed {
    e.to_string().into()
}

// ---------------------------------------------------------------------------
// one-step purity statistics

struct StateBatch {
    n: usize,
    name: &'static str,
    profile: TraceProfile,
    batch: TraceBatch,
}

fn draw_batches(n: usize, samples: usize, seed: u64, workers: usize) -> purify::Result<Vec<StateBatch>> {
    let base = RngStream::new(seed, n as u64);
    moment_states(n)?
        .into_iter()
        .enumerate()
        .map(|(i, (name, rho))| {
            Ok(StateBatch {
                n,
                name,
                profile: TraceProfile::from_state(&rho)?,
                batch: TraceBatch::draw(&rho, samples, &base.derive(i as u64), workers)?,
            })
        })
        .collect()
}

/// 2·10⁵ samples at N = 64 (shared by the drift and noise checks) and at N = 32.
fn batches(n: usize) -> &'static [StateBatch] {
    static B64: OnceLock<Vec<StateBatch>> = OnceLock::new();
    static B32: OnceLock<Vec<StateBatch>> = OnceLock::new();
    let cell = if n == 64 { &B64 } else { &B32 };
    cell.get_or_init(|| draw_batches(n, 200_000, SEED, workers()).expect("projector sampling"))
}

fn drift_check(id: &str, stat: Statistic, analytic: fn(&TraceProfile, usize) -> f64) -> Result<(), Failed> {
    let mut ok = true;
    let mut parts = Vec::new();
    for b in batches(64) {
        let e = b.batch.estimate(stat).map_err(err)?;
        let target = analytic(&b.profile, b.n);
        let nf = b.n as f64;
        let pass = e.agrees_with(target, 3.0, 4.0 / (nf * nf));
        ok &= pass;
        parts.push(format!(
            "{} N={}: mc {:.8} ± {:.1e} vs {:.8}",
            b.name, b.n, e.mean, e.standard_error, target
        ));
    }
    verdict(id, ok, parts.join("; "))
}

fn c01() -> Result<(), Failed> {
    drift_check("1 (measured drift)", Statistic::Measured, analytic_measured_mean)
}

fn c02() -> Result<(), Failed> {
    drift_check("2 (post-selected drift)", Statistic::Postselected, analytic_postselected_mean)
}

fn c03() -> Result<(), Failed> {
    let mut ok = true;
    let mut parts = Vec::new();
    for n in [32, 64] {
        for b in batches(n) {
            for mode in [Mode::Measurement, Mode::Postselection] {
                let v = b.batch.noise(mode).map_err(err)?;
                let target = analytic_noise(&b.profile, n);
                let nf = n as f64;
                let pass = (v.variance - target).abs() <= 3.0 * v.standard_error + 8.0 / (nf * nf);
                ok &= pass;
                parts.push(format!("{} N={n} {mode}: {:.3e} ± {:.1e} vs {:.3e}", b.name, v.variance, v.standard_error, target));
            }
        }
    }
    verdict("3 (noise)", ok, parts.join("; "))
}

// ---------------------------------------------------------------------------
// trajectories

fn c04() -> Result<(), Failed> {
    let n = 500;
    let mut ok = true;
    let mut parts = Vec::new();
    for mode in [Mode::Measurement, Mode::Postselection] {
        let e = run_purity_ensemble(n, 2, n / 5, mode, 1000, SEED, workers()).map_err(err)?;
        let dev = e.max_relative_deviation(n / 5);
        ok &= dev <= 0.02;
        parts.push(format!("{mode}: max |mean/theory − 1| = {:.4} over t ≤ {}", dev, n / 5));
    }
    verdict("4 (rank-2 ensemble)", ok, parts.join("; "))
}

struct RegimeTally {
    slope: usize,
    descent: usize,
    late: usize,
    reports: Vec<RegimeReport>,
}

fn regime_tally(n: usize, seeds: u64) -> purify::Result<RegimeTally> {
    let reports = purify::parallel::map_indexed(seeds as usize, workers(), |s| {
        let mut opts = TrajectoryOptions::new(n, 16 * n, Mode::Measurement, SEED + s as u64);
        opts.entropy_stride = 0;
        opts.stop_below_impurity = Some(RegimeReport::LATE_FLOOR / 2.0);
        run_trajectory_with(&opts).map(|rec| RegimeReport::from_purity(&rec.purities(), n))
    })
    .into_iter()
    .collect::<purify::Result<Vec<_>>>()?;
    let within = |x: Option<f64>, tol: f64| x.is_some_and(|v| (v - 1.0).abs() <= tol);
    Ok(RegimeTally {
        slope: reports.iter().filter(|r| within(r.scaled_initial_slope, 0.3)).count(),
        descent: reports.iter().filter(|r| r.longest_descent >= 20).count(),
        late: reports.iter().filter(|r| within(r.scaled_late_rate, 0.5)).count(),
        reports,
    })
}

fn tally_line(t: &RegimeTally) -> String {
    let rates: Vec<String> = t.reports.iter().map(|r| format!("{:.2}", r.scaled_late_rate.unwrap_or(f64::NAN))).collect();
    let slopes: Vec<String> = t.reports.iter().map(|r| format!("{:.2}", r.scaled_initial_slope.unwrap_or(f64::NAN))).collect();
    format!(
        "slope·N within 1±30%: {}/10 [{}]; descent ≥ 20: {}/10; late rate·N within 1±50%: {}/10 [{}]",
        t.slope,
        slopes.join(" "),
        t.descent,
        t.late,
        rates.join(" ")
    )
}

fn c05_full() -> Result<(), Failed> {
    let t = regime_tally(2000, 10).map_err(err)?;
    verdict("5 (regimes, N=2000)", t.slope >= 8 && t.descent >= 8 && t.late >= 8, tally_line(&t))
}

/// Same checks at N = 128. Reported, not asserted: see the README.
fn c05_scaled() -> Result<(), Failed> {
    let t = regime_tally(128, 10).map_err(err)?;
    let ok = t.slope >= 8 && t.descent >= 8 && t.late >= 8;
    println!(
        "{} criterion 5 (regimes, scaled to N=128, diagnostic only; N=2000 run is ignored): {}",
        if ok { "PASS" } else { "FAIL" },
        tally_line(&t)
    );
    Ok(())
}

fn c06() -> Result<(), Failed> {
    let r = inequality_check(&[4, 8, 16], 1000, 1e-9, &RngStream::new(SEED, 6)).map_err(err)?;
    verdict(
        "6 (entropy and root-purity monotonicity)",
        r.passed(),
        format!(
            "{} cases, violations {}/{}, max ΔS̄ {:.2e}, max root-purity loss {:.2e}",
            r.cases, r.entropy_violations, r.root_purity_violations, r.max_entropy_change, r.max_root_purity_loss
        ),
    )
}

fn c07() -> Result<(), Failed> {
    let r = generator_identity_check(1000, 8, &mut RngStream::new(SEED, 7)).map_err(err)?;
    verdict(
        "7 (generator identity)",
        r.passed(1e-12),
        format!(
            "purity {:.1e}, moment form {:.1e}, annihilation {:.1e}",
            r.purity_deviation, r.moment_deviation, r.annihilation
        ),
    )
}

fn c08() -> Result<(), Failed> {
    let c = microscopic_comparison(2, 1000, 200, 1000, SEED, workers()).map_err(err)?;
    verdict(
        "8 (eigenvalue SDE vs direct)",
        c.max_relative_purity_gap <= 0.02,
        format!("max relative purity gap {:.4} over t ≤ 200, 1000 walkers", c.max_relative_purity_gap),
    )
}

// ---------------------------------------------------------------------------
// fermions, moments, stabilizers

fn c09() -> Result<(), Failed> {
    let r = oracle_check(&[2, 3, 4, 5], 100, &mut RngStream::new(SEED, 9)).map_err(err)?;
    verdict(
        "9 (Fock oracle)",
        r.max_deviation() < 1e-10,
        format!("probability {:.1e}, update {:.1e}, ΔS {:.1e}", r.probability, r.update, r.delta_s),
    )
}

fn purification_sweep(sizes: &[usize], walkers: usize, w: usize) -> purify::Result<Vec<purify::fermion::PurificationReport>> {
    sizes
        .iter()
        .map(|&n| run_purification(&PurificationOptions::new(n, n * n, Variant::Conserving, walkers, SEED), w))
        .collect()
}

fn c10() -> Result<(), Failed> {
    let sizes = [16, 32, 64];
    let reports = purification_sweep(&sizes, 200, workers()).map_err(err)?;
    let violations: usize = reports.iter().map(|r| r.bound_violations).sum();
    let half: Option<Vec<(usize, f64)>> = reports.iter().map(|r| r.half_entropy_time.map(|t| (r.options.modes, t as f64))).collect();
    let one: Option<Vec<(usize, f64)>> = reports.iter().map(|r| r.order_one_time.map(|t| (r.options.modes, t as f64))).collect();
    let (Some(half), Some(one)) = (half, one) else {
        return verdict("10 (fermion scaling)", false, "a size did not reach the target entropy within n² steps");
    };
    let a_half = power_law_exponent(&half).map_err(err)?;
    let a_one = power_law_exponent(&one).map_err(err)?;
    verdict(
        "10 (fermion scaling)",
        violations == 0 && (a_half - 1.0).abs() <= 0.2 && (a_one - 2.0).abs() <= 0.3,
        format!("bound violations {violations}; half-entropy times {half:?} exponent {a_half:.3}; order-one times {one:?} exponent {a_one:.3}"),
    )
}

fn pairing_states(n: usize) -> Vec<(&'static str, MajoranaCorrelationMatrix)> {
    vec![
        ("maximally mixed", MajoranaCorrelationMatrix::canonical(&vec![0.0; n])),
        (
            "half-mixed",
            MajoranaCorrelationMatrix::canonical(&(0..n).map(|i| if i < n / 2 { 1.0 } else { 0.0 }).collect::<Vec<_>>()),
        ),
        ("near-pure", MajoranaCorrelationMatrix::canonical(&vec![0.9; n])),
    ]
}

fn c11() -> Result<(), Failed> {
    let mut ok = true;
    let mut parts = Vec::new();
    for (i, (name, m)) in pairing_states(32).into_iter().enumerate() {
        let r = mc_delta_s_pairing(&m, 10_000, &RngStream::new(SEED, 11).derive(i as u64), workers()).map_err(err)?;
        ok &= r.relative_error <= 0.1;
        parts.push(format!("{name}: {:.5} vs {:.5} ({:.1}%)", r.estimate.mean, r.leading_order, 100.0 * r.relative_error));
    }
    verdict("11 (pairing mean)", ok, parts.join("; "))
}

fn c12() -> Result<(), Failed> {
    let r = so_quartic_moments(16, 10_000, &RngStream::new(SEED, 12), workers()).map_err(err)?;
    let rows: Vec<String> = r
        .rows
        .iter()
        .map(|row| format!("{} {:.4e} ± {:.1e} vs {:.4e}", row.name, row.estimate.mean, row.estimate.standard_error, row.leading))
        .collect();
    verdict(
        "12 (SO(2n) quartic moments)",
        r.passed(3.0),
        format!("commutant residual {:.1e}; {}", r.commutant_error, rows.join("; ")),
    )
}

fn c13() -> Result<(), Failed> {
    let r = verify_stabilizer(10_000, SEED, workers()).map_err(err)?;
    let checked = r.rates_n10.rates.iter().filter(|x| x.visits >= 300).count();
    verdict(
        "13 (stabilizer statistics)",
        r.passed(),
        format!(
            "added-rate rows checked {checked}, all within 3σ: {}; monotone: {}; steps-to-pure {:?}; fitted base {:.3}",
            r.rates_agree, r.monotone, r.mean_steps_to_pure, r.fitted_base
        ),
    )
}

// ---------------------------------------------------------------------------
// determinism

fn digest<T: Serialize>(v: &T) -> String {
    sha256_hex(serde_json::to_string(v).expect("serializable").as_bytes())
}

/// Every criterion's computation at worker counts 1 and 3. The expensive ones
/// run at reduced size through the same code paths.
fn c14() -> Result<(), Failed> {
    type Job = Box<dyn Fn(usize) -> purify::Result<String>>;
    let jobs: Vec<(&str, Job)> = vec![
        (
            "1-3",
            Box::new(|w| {
                let b = draw_batches(64, 2000, SEED, w)?;
                let parts = b
                    .iter()
                    .map(|s| Ok((s.batch.estimate(Statistic::Measured)?, s.batch.estimate(Statistic::Postselected)?, s.batch.noise(Mode::Measurement)?)))
                    .collect::<purify::Result<Vec<_>>>()?;
                Ok(digest(&parts))
            }),
        ),
        ("4", Box::new(|w| Ok(digest(&run_purity_ensemble(500, 2, 100, Mode::Measurement, 1000, SEED, w)?)))),
        (
            "5",
            Box::new(|w| {
                let recs = purify::parallel::map_indexed(3, w, |s| {
                    run_trajectory_with(&TrajectoryOptions::new(32, 512, Mode::Measurement, SEED + s as u64))
                });
                Ok(digest(&recs.into_iter().collect::<purify::Result<Vec<_>>>()?))
            }),
        ),
        ("6", Box::new(|_| Ok(digest(&inequality_check(&[4, 8, 16], 1000, 1e-9, &RngStream::new(SEED, 6))?)))),
        ("7", Box::new(|_| Ok(digest(&generator_identity_check(1000, 8, &mut RngStream::new(SEED, 7))?)))),
        ("8", Box::new(|w| Ok(digest(&microscopic_comparison(2, 1000, 200, 100, SEED, w)?)))),
        ("9", Box::new(|_| Ok(digest(&oracle_check(&[2, 3, 4, 5], 100, &mut RngStream::new(SEED, 9))?)))),
        (
            "10",
            Box::new(|w| {
                let r = purification_sweep(&[16], 50, w)?;
                Ok(digest(&(r[0].to_csv(), &r[0].rows)))
            }),
        ),
        (
            "11",
            Box::new(|w| {
                let (_, m) = pairing_states(32).swap_remove(1);
                Ok(digest(&mc_delta_s_pairing(&m, 10_000, &RngStream::new(SEED, 11).derive(1), w)?))
            }),
        ),
        ("12", Box::new(|w| Ok(digest(&so_quartic_moments(16, 10_000, &RngStream::new(SEED, 12), w)?)))),
        ("13", Box::new(|w| Ok(digest(&verify_stabilizer(10_000, SEED, w)?)))),
    ];
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, job) in jobs {
        let a = job(1).map_err(err)?;
        let b = job(3).map_err(err)?;
        ok &= a == b;
        parts.push(format!("{name}: {}", if a == b { &a[..12] } else { "MISMATCH" }));
    }
    verdict("14 (worker-count determinism)", ok, parts.join(", "))
}

fn main() {
    let args = Arguments::from_args();
    let trials = vec![
        Trial::test("criterion_01_measured_drift", c01),
        Trial::test("criterion_02_postselected_drift", c02),
        Trial::test("criterion_03_noise", c03),
        Trial::test("criterion_04_rank2_ensemble", c04),
        Trial::test("criterion_05_regimes_full_scale", c05_full).with_ignored_flag(true),
        Trial::test("criterion_05_regimes_scaled_diagnostic", c05_scaled),
        Trial::test("criterion_06_inequalities", c06),
        Trial::test("criterion_07_generator_identity", c07),
        Trial::test("criterion_08_sde_vs_direct", c08),
        Trial::test("criterion_09_fock_oracle", c09),
        Trial::test("criterion_10_fermion_scaling", c10),
        Trial::test("criterion_11_pairing_mean", c11),
        Trial::test("criterion_12_quartic_moments", c12),
        Trial::test("criterion_13_stabilizer_statistics", c13),
        Trial::test("criterion_14_determinism", c14),
    ];
    libtest_mimic::run(&args, trials).exit();
}
