//! Training losses with their analytic gradients.
//!
//!     cargo run --release --example loss_gradients
//!
//! Evaluates the edge BCE, the partial BCE over the pseudo-label and the
//! gated CRF loss on one mini-dataset image, then compares a few gradient
//! entries with central finite differences.

use std::path::PathBuf;

use pointsal::floodfill::{generate_pseudo_label, AdaptiveMaskConfig};
use pointsal::imaging::binarize;
use pointsal::io::{self, AnnotationFile};
use pointsal::losses::{total_loss, GatedCrfParams, LossInputs, LossWeights};
use pointsal::{gated_crf_loss, partial_bce, GrayMap};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("data/mini");
    let annotations = AnnotationFile::load(&root.join("annotations.json"))?;
    let a = annotations.get("m03_distractor").expect("bundled id");
    let file = format!("{}.png", a.image_id);
    let image = io::read_rgb(&root.join("images").join(&file))?;
    let edges = io::read_gray_map(&root.join("edges").join(&file))?;
    let saliency = io::read_gray_map(&root.join("round1").join(&file))?;
    let trimap = generate_pseudo_label(image.dims(), &edges, a, &AdaptiveMaskConfig::default())?.trimap;

    // a soft edge prediction against the thresholded edge map
    let edge_target = binarize(&edges, 0.5);
    let edge_pred = GrayMap::from_fn(edges.width(), edges.height(), |p| 0.1 + 0.8 * edges.get(p))?;

    let gcrf = GatedCrfParams::default();
    let weights = LossWeights::default();
    let total = total_loss(
        LossInputs {
            edge_pred: &edge_pred,
            edge_target: &edge_target,
            saliency_pred: &saliency,
            trimap: &trimap,
            image: &image,
        },
        &gcrf,
        &weights,
    )?;
    println!("bce (edges)       {:.6}", total.bce);
    println!("partial bce       {:.6}", total.partial_bce);
    println!("gated crf         {:.6}", total.gated_crf);
    println!("total             {:.6}", total.value);

    let h = 1e-5;
    let probes = [(24usize, 28usize), (40, 10), (51, 11), (10, 40)];
    println!("\n pixel      analytic        numeric   (partial bce + gated crf)");
    for (x, y) in probes {
        let i = y * saliency.width() + x;
        let at = |delta: f64| -> Result<f64, pointsal::Error> {
            let mut v = saliency.values().to_vec();
            v[i] = (v[i] + delta).clamp(0.0, 1.0);
            let m = GrayMap::new(saliency.width(), saliency.height(), v)?;
            Ok(partial_bce(&m, &trimap)?.value + gated_crf_loss(&m, &image, &gcrf)?.value)
        };
        let numeric = (at(h)? - at(-h)?) / (2.0 * h);
        println!("({x:>2},{y:>2})  {:>13.6}  {:>13.6}", total.saliency_gradient[i], numeric);
    }
    Ok(())
}
