//! Ensemble-mean purity from a rank-2 start against the closed-form curve.

use purify::manybody::{run_purity_ensemble, Mode};

fn main() -> purify::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    for mode in [Mode::Measurement, Mode::Postselection] {
        let e = run_purity_ensemble(n, 2, n / 5, mode, 400, 3, workers)?;
        println!("{mode}: max relative deviation {:.4}", e.max_relative_deviation(n / 5));
        for row in e.rows.iter().step_by((e.rows.len() / 5).max(1)) {
            println!("  t={:4}  {:.5} ± {:.5}  theory {:.5}", row.step, row.mean, row.standard_error, row.theory);
        }
    }
    Ok(())
}
