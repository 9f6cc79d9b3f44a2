//! Ghost frames filled by a halo exchange across a 3 x 2 process grid.

use shwx::grid::block_of;
use shwx::topology::{assign_devices, Placement, RankTopology};
use shwx::transport::fabric::FabricModel;
use shwx::transport::inprocess_endpoints;
use shwx::transport::wire::{FieldId, Phase};
use shwx::Field;

fn main() -> shwx::Result<()> {
    let n = 9;
    let topo = RankTopology::new(3, 2)?;
    let assignment = assign_devices(topo.r, 2, Placement::Contiguous)?;
    let endpoints = inprocess_endpoints(&topo, &assignment, &FabricModel::ideal())?;

    // Each rank starts with zero ghosts and owned value 100 j + i.
    let frames = std::thread::scope(|s| {
        let handles: Vec<_> = endpoints
            .into_iter()
            .map(|mut ep| {
                let topo = &topo;
                s.spawn(move || -> shwx::Result<Field> {
                    let extent = block_of(ep.rank(), topo.h, topo.w, n)?;
                    let mut f = Field::zeros(extent);
                    for lj in 1..=extent.height() {
                        for li in 1..=extent.width() {
                            let (i, j) = (extent.sx + li - 1, extent.sy + lj - 1);
                            f.set(li, lj, (100 * j + i) as f64);
                        }
                    }
                    ep.exchange(0, Phase::Diagnostics, &mut [(FieldId::P, &mut f)])?;
                    Ok(f)
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().unwrap())
            .collect::<shwx::Result<Vec<_>>>()
    })?;

    let f = &frames[0];
    println!("rank 0 frame (ghosts wrap to the far side of the grid):");
    for lj in (0..f.frame_height()).rev() {
        let row: Vec<String> = (0..f.frame_width())
            .map(|li| format!("{:>4}", f.at(li, lj)))
            .collect();
        println!("  {}", row.join(""));
    }
    Ok(())
}
