//! Block decomposition of an n x n grid over an h x w process grid.
//!
//! cargo run --example decompose -- 10 6 [h]

use shwx::grid::{block_of, dims_create};

fn main() -> shwx::Result<()> {
    let args: Vec<usize> = std::env::args()
        .skip(1)
        .filter_map(|a| a.parse().ok())
        .collect();
    let n = args.first().copied().unwrap_or(10);
    let r = args.get(1).copied().unwrap_or(6);
    let (h, w) = dims_create(r, args.get(2).copied())?;
    println!("n = {n}, r = {r} -> {h} x-blocks by {w} y-blocks");
    for rank in 0..r {
        let b = block_of(rank, h, w, n)?;
        println!(
            "rank {rank:>3}: x {:>4}..={:<4} y {:>4}..={:<4} ({} cells)",
            b.sx,
            b.ex,
            b.sy,
            b.ey,
            b.area()
        );
    }
    Ok(())
}
