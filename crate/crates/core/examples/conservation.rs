//! Mass, energy and enstrophy of the reference solver over 100 steps.

use shwx::reference::reference_run_with;
use shwx::{GridSpec, InitialCondition};

fn main() -> shwx::Result<()> {
    let spec = GridSpec::new(64)?;
    let r = reference_run_with(&spec, 100, InitialCondition::Vortex, 10)?;
    let first = r.conservation[0];
    for s in &r.conservation {
        println!(
            "step {:>3}: mass {:+.3e}  energy {:+.3e}  enstrophy {:+.3e}  (relative to step 0)",
            s.step,
            (s.mass - first.mass) / first.mass,
            (s.energy - first.energy) / first.energy,
            (s.enstrophy - first.enstrophy) / first.enstrophy
        );
    }
    Ok(())
}
