//! One-step purity statistics from sampled half-rank projectors against the
//! closed forms, for I/N and a rank-2 state.

use purify::harness::verify::verify_moments;

fn main() -> purify::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(32);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let r = verify_moments(&[n], 20_000, 5, workers)?;
    for c in &r.checks {
        println!(
            "{:>15} {:>22}  {:+.6e} ± {:.1e}  analytic {:+.6e}  {}",
            c.state,
            c.statistic,
            c.estimate,
            c.standard_error,
            c.analytic,
            if c.passed { "ok" } else { "off" }
        );
    }
    Ok(())
}
