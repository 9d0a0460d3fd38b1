//! Regenerates the bundled 64x48 mini-dataset.
//!
//!     cargo run --example make_mini_dataset -- [out_dir]
//!
//! Without an argument the files are written to `data/mini` inside the
//! crate. Output is deterministic, so rerunning leaves the tree unchanged.

use std::path::PathBuf;

use pointsal::synth::{mini_dataset, write_mini_dataset};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args_os()
        .nth(1)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/mini"));
    write_mini_dataset(&out)?;
    for scene in mini_dataset() {
        println!(
            "{:<16} fg points {:?}  bg point ({}, {})  salient pixels {}",
            scene.id,
            scene.annotation.foreground_points.iter().map(|p| (p.x, p.y)).collect::<Vec<_>>(),
            scene.annotation.background_point.x,
            scene.annotation.background_point.y,
            scene.gt.count()
        );
    }
    println!("wrote {}", out.display());
    Ok(())
}
