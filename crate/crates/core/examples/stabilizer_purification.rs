//! Random Pauli measurements on n qubits: entropy per trajectory, the
//! added-generator rate per rank, and mean steps to a pure state.

use purify::stabilizer::{expected_steps_to_pure, run_ensemble, run_purification, StabilizerOptions};

fn main() -> purify::Result<()> {
    let n: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(8);
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let opts = StabilizerOptions::new(n, 1 << 20, 11);

    let one = run_purification(&opts)?;
    println!("single trajectory: pure after {:?} steps", one.steps_to_pure);

    let e = run_ensemble(&opts, 2000, workers)?;
    println!(" k   visits   added/visits   expected");
    for r in &e.rates {
        println!("{:2} {:8}   {:.4} ± {:.4}   {:.4}", r.k, r.visits, r.frequency, r.standard_error, r.expected);
    }
    if let Some(t) = &e.steps_to_pure {
        println!("steps to pure {:.1} ± {:.1}, exact {:.1}", t.mean, t.standard_error, expected_steps_to_pure(n));
    }
    Ok(())
}
