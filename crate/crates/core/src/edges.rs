//! Gradient-magnitude edge maps, a stand-in for a learned edge detector so
//! the pipeline can run end to end without one.

use crate::imaging::{GrayMap, RasterImage};

/// Central-difference gradient magnitude of the luma channel, min-max
/// normalized to [0, 1]. Borders replicate the nearest pixel. A flat image
/// gives an all-zero map.
pub fn gradient_edges(image: &RasterImage) -> GrayMap {
    let (w, h) = (image.width(), image.height());
    let luma = image.luminance();
    let at = |x: usize, y: usize| luma[y * w + x];
    let mag: Vec<f64> = (0..w * h)
        .map(|i| {
            let (x, y) = (i % w, i / w);
            let gx = (at((x + 1).min(w - 1), y) - at(x.saturating_sub(1), y)) / 2.0;
            let gy = (at(x, (y + 1).min(h - 1)) - at(x, y.saturating_sub(1))) / 2.0;
            (gx * gx + gy * gy).sqrt()
        })
        .collect();
    let (lo, hi) = mag
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    let values = if hi > lo {
        mag.iter().map(|v| (v - lo) / (hi - lo)).collect()
    } else {
        vec![0.0; w * h]
    };
    GrayMap::new(w, h, values).expect("normalized to [0, 1]")
}
