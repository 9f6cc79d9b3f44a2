//! Inter-device links over loopback TCP; on-device links stay on channels.
//! The result matches the all-channel run exactly.

use shwx::runner::{run, RunConfig};
use shwx::topology::LinkClass;
use shwx::Backend;

fn main() -> shwx::Result<()> {
    let mut cfg = RunConfig::new(64)?;
    cfg.steps = 20;
    cfg.ranks = 4;
    cfg.devices = 2;
    cfg.collect_fields = true;
    let inproc = run(&cfg)?;
    cfg.backend = Backend::Tcp;
    let tcp = run(&cfg)?;
    println!(
        "remote messages over tcp: {}, bytes: {}",
        tcp.traffic[&LinkClass::Remote].messages,
        tcp.traffic[&LinkClass::Remote].bytes
    );
    println!(
        "fields identical to in-process run: {}",
        inproc.fields == tcp.fields
    );
    println!(
        "conservation identical: {}",
        inproc.conservation == tcp.conservation
    );
    Ok(())
}
