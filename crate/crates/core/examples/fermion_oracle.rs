//! Gaussian-state update rules checked against dense Fock-space evolution.

use purify::fermion::oracle_check;
use purify::RngStream;

fn main() -> purify::Result<()> {
    let r = oracle_check(&[2, 3, 4, 5], 100, &mut RngStream::new(9, 0))?;
    println!("{}", serde_json::to_string_pretty(&r)?);
    Ok(())
}
