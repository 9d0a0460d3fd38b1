//! Saliency metrics over a prediction directory.
//!
//!     cargo run --release --example evaluate -- [pred_dir] [gt_dir]
//!
//! Defaults to the bundled round-1 maps against the bundled ground truth.
//! Prints the per-image table and a coarse precision-recall curve.

use std::path::PathBuf;

use pointsal::metrics::{evaluate_dataset, EvalOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/mini");
    let mut args = std::env::args_os().skip(1).map(PathBuf::from);
    let pred = args.next().unwrap_or_else(|| root.join("round1"));
    let gt = args.next().unwrap_or_else(|| root.join("gt"));

    let report = evaluate_dataset(&pred, &gt, &EvalOptions::default())?;
    print!("{}", report.result.to_table());
    for s in &report.skipped {
        println!("skipped {}: {}", s.id, s.reason);
    }

    let pr = &report.result.pr;
    println!("\nthreshold  precision  recall");
    for k in (0..pr.len()).step_by(32) {
        println!("{:>9.3}  {:>9.4}  {:>6.4}", pr.thresholds[k], pr.precision[k], pr.recall[k]);
    }
    Ok(())
}
