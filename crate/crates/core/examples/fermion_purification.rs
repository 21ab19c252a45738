//! Number-conserving free-fermion purification: entropy density against the
//! (1 + t/n)⁻¹ bound, and the half-entropy and one-bit times.

use purify::fermion::{run_purification, PurificationOptions, Variant};

fn main() -> purify::Result<()> {
    let sizes: Vec<usize> = std::env::args().skip(1).filter_map(|s| s.parse().ok()).collect();
    let sizes = if sizes.is_empty() { vec![16, 32] } else { sizes };
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    for n in sizes {
        let t0 = std::time::Instant::now();
        let opts = PurificationOptions::new(n, n * n, Variant::Conserving, 200, 1);
        let r = run_purification(&opts, workers)?;
        println!(
            "n={n:3}  half-entropy t={:?}  one-bit t={:?}  bound violations {}  ({:.1?})",
            r.half_entropy_time,
            r.order_one_time,
            r.bound_violations,
            t0.elapsed()
        );
        for row in r.rows.iter().step_by((r.rows.len() / 8).max(1)) {
            println!("   t={:6}  s={:.5} ± {:.5}  bound {:.5}", row.step, row.s_density.mean, row.s_density.standard_error, row.bound);
        }
    }
    Ok(())
}
