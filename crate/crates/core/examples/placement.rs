//! Remote-link fractions of contiguous and round-robin rank placement,
//! including a 120-rank, 8-device cluster shape.

use shwx::topology::{assign_devices, classify_links, MachineFile, Placement, RankTopology};

fn main() -> shwx::Result<()> {
    for (h, w, m) in [(3, 2, 2), (4, 2, 2), (4, 30, 8), (8, 15, 8)] {
        let topo = RankTopology::new(h, w)?;
        let frac = |p| -> shwx::Result<f64> {
            Ok(classify_links(&topo, &assign_devices(h * w, m, p)?)?.remote_fraction())
        };
        println!(
            "h={h:>2} w={w:>2} m={m}: contiguous {:.4}  round-robin {:.4}",
            frac(Placement::Contiguous)?,
            frac(Placement::RoundRobin)?
        );
    }

    let mf = MachineFile::parse("mic0:3\nmic1:3\n")?;
    let a = mf.assignment(None)?;
    println!(
        "machine file mic0:3, mic1:3 -> devices {:?} ({:?})",
        a.devices, a.names
    );
    Ok(())
}
