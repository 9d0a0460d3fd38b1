//! Non-salient suppression on the bundled round-1 saliency maps.
//!
//!     cargo run --release --example nss_suppression
//!
//! The round-1 maps contain confident blobs that nobody clicked on. Only the
//! components reachable from a foreground point survive; the result is
//! dilated into an uncertain band to form the second-round trimap.

use std::path::PathBuf;

use pointsal::imaging::{label_components, binarize};
use pointsal::io::{self, AnnotationFile};
use pointsal::nss::{nss_pipeline, NssParams};
use pointsal::Label;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/mini");
    let params = NssParams::default();
    let annotations = AnnotationFile::load(&root.join("annotations.json"))?;

    println!("{:<16}{:>12}{:>10}{:>10}{:>12}", "image", "components", "removed", "fg px", "uncertain");
    for a in &annotations.images {
        let saliency = io::read_gray_map(&root.join("round1").join(format!("{}.png", a.image_id)))?;
        let (trimap, report) = nss_pipeline(&saliency, a, &params)?;
        println!(
            "{:<16}{:>12}{:>10}{:>10}{:>12}",
            a.image_id,
            report.components_total,
            report.components_removed,
            trimap.count(Label::Foreground),
            trimap.count(Label::Uncertain)
        );

        // sizes of the components that were dropped
        let (labels, n) = label_components(&binarize(&saliency, params.saliency_threshold));
        let fg = trimap.mask_of(Label::Foreground);
        for id in 1..=n {
            let pixels: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == id).collect();
            if !pixels.iter().any(|&i| fg.bits()[i]) {
                println!("    suppressed component of {} px", pixels.len());
            }
        }
    }
    Ok(())
}
