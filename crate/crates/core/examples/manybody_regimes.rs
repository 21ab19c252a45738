//! Measurement-mode purification from the maximally mixed state, with the
//! three-regime diagnostics (initial slope, mid-regime descent, late rate).

use purify::manybody::{run_trajectory_with, Mode, RegimeReport, TrajectoryOptions};

fn main() -> purify::Result<()> {
    let mut args = std::env::args().skip(1).filter_map(|s| s.parse::<usize>().ok());
    let n = args.next().unwrap_or(128);
    let seeds = args.next().unwrap_or(4);
    for seed in 0..seeds as u64 {
        let t0 = std::time::Instant::now();
        let mut opts = TrajectoryOptions::new(n, 16 * n, Mode::Measurement, seed);
        opts.entropy_stride = 0;
        opts.stop_below_impurity = Some(RegimeReport::LATE_FLOOR / 2.0);
        let rec = run_trajectory_with(&opts)?;
        let r = RegimeReport::from_purity(&rec.purities(), n);
        println!(
            "seed {seed}: slope·N {:.3?}  mid {:?}  descent {}  late rate·N {:.3?}  steps {}  ({:.1?})",
            r.scaled_initial_slope,
            r.mid_regime,
            r.longest_descent,
            r.scaled_late_rate,
            rec.rows.len() - 1,
            t0.elapsed()
        );
    }
    Ok(())
}
