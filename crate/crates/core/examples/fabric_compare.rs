//! The same run under a fast and a slow inter-device fabric, with the
//! modeled cost paid as real sleeps.

use shwx::runner::{run, RunConfig};
use shwx::transport::fabric::{FabricClass, FabricMode, FabricModel, LinkCost};

/// Slow remote links cost ten times the fast ones; `class` picks which of
/// the two carries inter-device traffic.
fn fabric(class: FabricClass) -> FabricModel {
    let mut f = FabricModel::ideal().with_mode(FabricMode::Delay);
    f.name = format!("{class:?}");
    f.remote_fast = LinkCost {
        latency: 1e-4,
        per_byte: 1e-9,
    };
    f.remote_slow = LinkCost {
        latency: 1e-3,
        per_byte: 1e-8,
    };
    f.remote = class;
    f
}

fn main() -> shwx::Result<()> {
    let mut cfg = RunConfig::new(256)?;
    cfg.steps = 20;
    cfg.ranks = 4;
    cfg.devices = 2;
    for f in [
        fabric(FabricClass::RemoteFast),
        fabric(FabricClass::RemoteSlow),
    ] {
        cfg.fabric = f;
        let r = run(&cfg)?;
        println!(
            "{:>10}: wall {:.4} s, {:.3} GFLOP/s, modeled fabric time {:.4} s",
            cfg.fabric.name, r.timing.wall_seconds, r.rate_gflops, r.timing.modeled_fabric_seconds
        );
    }
    Ok(())
}
