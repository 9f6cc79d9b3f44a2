//! Calibration scan over (threads, x-blocks) on this machine, followed by the
//! speedup normalization used for multi-device tables.

use shwx::autotune::{calibrate, speedup_table, TuneSpace};
use shwx::runner::RunConfig;

fn main() -> shwx::Result<()> {
    let cores = std::thread::available_parallelism()
        .map_or(4, |c| c.get())
        .min(8);
    let mut base = RunConfig::new(256)?;
    base.steps = 20;
    let result = calibrate(&TuneSpace::new(cores, 1), &base, 1)?;
    result.write_csv(std::io::stdout())?;
    if let Some(best) = result.best_row() {
        println!(
            "best: t = {}, h = {} at {:.3} GFLOP/s",
            best.t,
            best.h,
            best.rate.unwrap()
        );
    }

    for row in speedup_table(&[(1, 28.1), (8, 202.3)], 1, 1.0)? {
        println!("m = {}: speedup {:.2}", row.m, row.speedup);
    }
    Ok(())
}
