//! Rank-2 eigenvalue SDE against direct low-rank trajectories at N = 1000.

use purify::dyson::microscopic_comparison;

fn main() -> purify::Result<()> {
    let walkers: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(400);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let t0 = std::time::Instant::now();
    let cmp = microscopic_comparison(2, 1000, 200, walkers, 7, workers)?;
    for (s, m) in cmp.sde.iter().zip(&cmp.microscopic).step_by(25) {
        println!(
            "t={:4}  sde {:.5} ± {:.5}   micro {:.5} ± {:.5}",
            s.step, s.purity.mean, s.purity.standard_error, m.purity.mean, m.purity.standard_error
        );
    }
    println!("max relative gap {:.4}  ({:.1?})", cmp.max_relative_purity_gap, t0.elapsed());
    Ok(())
}
