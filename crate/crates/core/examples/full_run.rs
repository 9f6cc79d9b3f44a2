//! A complete run with the JSON report on stdout.
//!
//! cargo run --release --example full_run -- 512 8 2

use shwx::runner::{run, RunConfig};

fn main() -> shwx::Result<()> {
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let mut cfg = RunConfig::new(args.first().copied().unwrap_or(256))?;
    cfg.ranks = args.get(1).copied().unwrap_or(4);
    cfg.threads = args.get(2).copied().unwrap_or(1);
    cfg.devices = if cfg.ranks % 2 == 0 { 2 } else { 1 };
    let report = run(&cfg)?;
    report.write_json(std::io::stdout())?;
    println!();
    eprintln!(
        "WALL CLOCK TIME FOR JOB = {} s, EXPECTED GFLOPS RATE = {}",
        report.timing.wall_seconds, report.rate_gflops
    );
    Ok(())
}
