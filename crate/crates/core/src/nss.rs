//! Non-salient object suppression.
//!
//! A first-round model trained on sparse points learns to highlight anything
//! object-like. Flood filling the thresholded round-1 map from the annotated
//! foreground points keeps only the highlighted regions that carry an
//! annotation; a dilated halo around them becomes uncertain and the rest
//! background.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::floodfill::{fill_region, BarrierField, PointAnnotation};
use crate::imaging::{binarize, dilate_radius, label_components, BinaryMask, Footprint, GrayMap, Label, Point, Trimap};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NssParams {
    pub saliency_threshold: f64,
    /// Halo radius in pixels; 5 realizes a kernel of size 10 as a symmetric
    /// 11x11 window.
    pub dilation_radius: usize,
    pub footprint: Footprint,
}

impl Default for NssParams {
    fn default() -> Self {
        NssParams {
            saliency_threshold: 0.5,
            dilation_radius: 5,
            footprint: Footprint::Square,
        }
    }
}

impl NssParams {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.saliency_threshold) {
            return Err(Error::invalid(format!(
                "saliency_threshold must be in [0, 1], got {}",
                self.saliency_threshold
            )));
        }
        Ok(())
    }
}

/// Diagnostics for one image.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NssReport {
    /// Connected salient components in the thresholded round-1 map.
    pub components_total: usize,
    /// Components without any foreground point, suppressed to background.
    pub components_removed: usize,
    /// Seeds landing on sub-threshold pixels (missed by round 1).
    pub dropped_seeds: Vec<Point>,
}

/// Union of the thresholded components that contain a foreground point.
pub fn extract_seeded_components(
    saliency: &GrayMap,
    fg_points: &[Point],
    params: &NssParams,
) -> Result<(BinaryMask, NssReport)> {
    params.validate()?;
    let dims = saliency.dims();
    for &p in fg_points {
        dims.check_point(p)?;
    }
    let salient = binarize(saliency, params.saliency_threshold);
    let barrier = BarrierField::new(salient.complement());
    let mut kept = BinaryMask::empty(dims);
    let mut dropped_seeds = Vec::new();
    for &p in fg_points {
        if !salient.get(p) {
            dropped_seeds.push(p);
        } else if !kept.get(p) {
            kept.union_in_place(&fill_region(p, &barrier)?)?;
        }
    }
    let (labels, total) = label_components(&salient);
    let mut kept_ids: Vec<u32> = (0..dims.len())
        .filter(|&i| kept.bits()[i])
        .map(|i| labels[i])
        .collect();
    kept_ids.sort_unstable();
    kept_ids.dedup();
    let report = NssReport {
        components_total: total as usize,
        components_removed: total as usize - kept_ids.len(),
        dropped_seeds,
    };
    Ok((kept, report))
}

/// Second-round trimap: the kept region is foreground, its dilation halo is
/// uncertain, everything else background.
pub fn build_second_round_label(p_f: &BinaryMask, params: &NssParams) -> Trimap {
    let grown = dilate_radius(p_f, params.dilation_radius, params.footprint);
    let mut trimap = Trimap::filled(p_f.dims(), Label::Background);
    for (i, l) in trimap.labels_mut().iter_mut().enumerate() {
        if p_f.bits()[i] {
            *l = Label::Foreground;
        } else if grown.bits()[i] {
            *l = Label::Uncertain;
        }
    }
    trimap
}

/// Suppression followed by trimap construction.
pub fn nss_pipeline(
    saliency: &GrayMap,
    annotation: &PointAnnotation,
    params: &NssParams,
) -> Result<(Trimap, NssReport)> {
    saliency.dims().check_same(annotation.dims()?)?;
    let (p_f, report) = extract_seeded_components(saliency, &annotation.foreground_points, params)?;
    Ok((build_second_round_label(&p_f, params), report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::Dims;

    fn blobs() -> GrayMap {
        GrayMap::from_fn(30, 20, |p| {
            let a = (3..10).contains(&p.x) && (3..10).contains(&p.y);
            let b = (18..26).contains(&p.x) && (8..16).contains(&p.y);
            if a {
                0.9
            } else if b {
                0.8
            } else {
                0.1
            }
        })
        .unwrap()
    }

    #[test]
    fn keeps_only_the_seeded_blob() {
        let s = blobs();
        let (kept, report) =
            extract_seeded_components(&s, &[Point::new(5, 5)], &NssParams::default()).unwrap();
        let expected = BinaryMask::from_fn(30, 20, |p| (3..10).contains(&p.x) && (3..10).contains(&p.y)).unwrap();
        assert_eq!(kept, expected);
        assert_eq!(report.components_total, 2);
        assert_eq!(report.components_removed, 1);
        assert!(report.dropped_seeds.is_empty());
    }

    #[test]
    fn zero_saliency_keeps_nothing() {
        let s = GrayMap::filled(10, 10, 0.0).unwrap();
        let (kept, report) =
            extract_seeded_components(&s, &[Point::new(5, 5)], &NssParams::default()).unwrap();
        assert_eq!(kept.count(), 0);
        assert_eq!(report.dropped_seeds, vec![Point::new(5, 5)]);
    }

    #[test]
    fn out_of_bounds_seed_is_rejected() {
        let s = GrayMap::filled(10, 10, 0.0).unwrap();
        let err = extract_seeded_components(&s, &[Point::new(10, 5)], &NssParams::default());
        assert!(matches!(err, Err(Error::OutOfBounds { .. })));
    }

    #[test]
    fn empty_region_gives_all_background() {
        let t = build_second_round_label(&BinaryMask::empty(Dims::new(9, 9).unwrap()), &NssParams::default());
        assert_eq!(t.count(Label::Background), 81);
    }

    #[test]
    fn square_blob_gets_a_five_pixel_frame() {
        let p_f = BinaryMask::from_fn(64, 64, |p| (20..30).contains(&p.x) && (20..30).contains(&p.y)).unwrap();
        let t = build_second_round_label(&p_f, &NssParams::default());
        assert_eq!(t.count(Label::Foreground), 100);
        assert_eq!(t.count(Label::Uncertain), 20 * 20 - 100);
        assert_eq!(t.get(Point::new(15, 15)), Label::Uncertain);
        assert_eq!(t.get(Point::new(14, 20)), Label::Background);
        assert_eq!(t.get(Point::new(34, 34)), Label::Uncertain);
        assert_eq!(t.get(Point::new(35, 34)), Label::Background);
    }

    #[test]
    fn halo_is_clipped_at_the_border() {
        let p_f = BinaryMask::from_fn(20, 20, |p| p.x < 3 && p.y < 3).unwrap();
        let t = build_second_round_label(&p_f, &NssParams::default());
        assert_eq!(t.count(Label::Foreground), 9);
        assert_eq!(t.count(Label::Uncertain), 64 - 9);
        assert_eq!(t.count(Label::Background), 400 - 64);
    }

    #[test]
    fn all_ones_map_is_all_foreground() {
        let s = GrayMap::filled(12, 8, 1.0).unwrap();
        let a = PointAnnotation {
            image_id: "x".into(),
            width: 12,
            height: 8,
            foreground_points: vec![Point::new(1, 1)],
            background_point: Point::new(10, 6),
        };
        let (t, _) = nss_pipeline(&s, &a, &NssParams::default()).unwrap();
        assert_eq!(t.count(Label::Foreground), 96);
    }
}
