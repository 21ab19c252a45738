//! Drive the harness from a JSON config and check the manifest against the
//! files on disk.

use purify::harness::{run, ExperimentConfig};

const CONFIG: &str = r#"{
  "experiment": {"kind": "stabilizer", "params": {"qubits": 6, "steps": 4096, "trajectories": 200}},
  "seed": 4,
  "workers": 2
}"#;

fn main() -> purify::Result<()> {
    let mut cfg = ExperimentConfig::from_json(CONFIG)?;
    let dir = std::env::temp_dir().join("purify-config-run");
    cfg.out = Some(dir.clone());
    let m = run(&cfg)?;
    for f in &m.outputs {
        println!("{:>24} {:8} bytes  {}", f.path, f.bytes, &f.sha256[..16]);
    }
    println!("combined {}  mismatches {:?}", m.combined_digest(), m.mismatches(&dir));
    Ok(())
}
