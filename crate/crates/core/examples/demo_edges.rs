//! Gradient-magnitude edge maps.
//!
//!     cargo run --release --example demo_edges -- <images_dir> <out_dir>
//!
//! A lightweight stand-in for a learned edge detector. Without arguments it
//! recomputes the bundled edge maps into a temporary directory and checks
//! they match the shipped files.

use std::path::PathBuf;

use pointsal::pipeline::cmd_demo_edges;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/mini");
    let mut args = std::env::args_os().skip(1).map(PathBuf::from);
    let tmp = tempfile::tempdir()?;
    let images = args.next().unwrap_or_else(|| root.join("images"));
    let out = args.next().unwrap_or_else(|| tmp.path().to_path_buf());

    let report = cmd_demo_edges(&images, &out)?;
    for id in &report.written {
        let fresh = std::fs::read(out.join(format!("{id}.png")))?;
        let shipped = std::fs::read(root.join("edges").join(format!("{id}.png"))).ok();
        let note = match shipped {
            Some(bytes) if bytes == fresh => "matches bundled edges",
            Some(_) => "differs from bundled edges",
            None => "",
        };
        println!("{id:<16} {} bytes  {note}", fresh.len());
    }
    for s in &report.skipped {
        println!("skipped {}: {}", s.id, s.reason);
    }
    Ok(())
}
