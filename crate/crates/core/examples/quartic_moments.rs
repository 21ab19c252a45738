//! Quartic moments of Haar-random SO(2n) rotations against the leading-order
//! Weingarten coefficients.

use purify::moments::so_quartic_moments;
use purify::RngStream;

fn main() -> purify::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(16);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let r = so_quartic_moments(n, 10_000, &RngStream::new(2, 0), workers)?;
    println!("commutant residual {:.2e}", r.commutant_error);
    for row in &r.rows {
        println!("{:>12}  {:.5e} ± {:.1e}  leading {:.5e}", row.name, row.estimate.mean, row.estimate.standard_error, row.leading);
    }
    println!("{}", if r.passed(3.0) { "consistent" } else { "inconsistent" });
    Ok(())
}
