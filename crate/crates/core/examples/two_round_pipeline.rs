//! The full two-round labelling loop on the mini-dataset.
//!
//!     cargo run --release --example two_round_pipeline -- [out_dir]
//!
//! edges -> round-1 pseudo-labels -> (round-1 predictions, bundled here as
//! `round1/`) -> CRF + non-salient suppression -> round-2 pseudo-labels,
//! then evaluation of the raw and CRF-refined round-1 maps.

use std::path::PathBuf;

use pointsal::config::{DatasetManifest, PipelineConfig};
use pointsal::pipeline::{cmd_crf, cmd_demo_edges, cmd_eval, cmd_nss, cmd_pseudo_label};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/mini");
    let tmp = tempfile::tempdir()?;
    let out = std::env::args_os().nth(1).map(PathBuf::from).unwrap_or_else(|| tmp.path().to_path_buf());
    let config = PipelineConfig::default();

    let edges = cmd_demo_edges(&root.join("images"), &out.join("edges"))?;
    println!("edges: {} maps", edges.written.len());

    let manifest = DatasetManifest {
        edges_dir: out.join("edges"),
        ..DatasetManifest::from_root(&root)
    };
    let round1 = cmd_pseudo_label(&manifest, &config, &out.join("pseudo_round1"))?;
    for r in &round1.written {
        println!("round-1 label {:<16} fg {:>4}  bg {:>4}", r.id, r.foreground_pixels, r.background_pixels);
    }

    let round2 = cmd_nss(&root.join("round1"), &manifest, &config, true, &out.join("pseudo_round2"))?;
    for r in &round2.written {
        println!(
            "round-2 label {:<16} fg {:>4}  uncertain {:>4}  suppressed {}",
            r.id, r.foreground_pixels, r.uncertain_pixels, r.components_removed
        );
    }

    cmd_crf(&root.join("round1"), &root.join("images"), &config, &out.join("refined"))?;
    for (name, dir) in [("round-1", root.join("round1")), ("refined", out.join("refined"))] {
        let report = cmd_eval(&dir, &root.join("gt"), &config.eval, &out.join(format!("eval_{name}")))?;
        let r = &report.result;
        println!("{name:<8} Fmax {:.4}  mF {:.4}  MAE {:.4}  Sm {:.4}", r.f_max, r.f_mean, r.mae, r.s_measure);
    }
    if std::env::args_os().nth(1).is_some() {
        println!("outputs in {}", out.display());
    }
    Ok(())
}
