//! Dataset-level operations behind the command-line subcommands.
//!
//! Every operation processes images in parallel, writes one output file per
//! image, and returns a report ordered by image id. Per-image problems
//! (missing inputs, unusable seeds) are collected as skips; malformed
//! annotation files and unknown ids are fatal.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use image::GrayImage;
use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{DatasetManifest, PipelineConfig};
use crate::crf::crf_refine;
use crate::edges::gradient_edges;
use crate::error::{Error, Result};
use crate::floodfill::{generate_from_seeds, Nudge, PointAnnotation, PseudoLabel};
use crate::imaging::{BinaryMask, GrayMap, Label, Point, RasterImage};
use crate::io::{self, AnnotationFile};
use crate::losses::{total_loss, LossInputs, LossWeights};
use crate::metrics::{evaluate_dataset, EvalOptions, EvalReport, SkippedItem};
use crate::nss::nss_pipeline;

fn skip(id: &str, reason: impl ToString) -> SkippedItem {
    SkippedItem {
        id: id.to_string(),
        reason: reason.to_string(),
    }
}

/// Maps a point into a `size x size` resized image.
pub fn scale_point(p: Point, width: usize, height: usize, size: u32) -> Point {
    let s = size as usize;
    let map = |v: usize, extent: usize| (((v as f64 + 0.5) * s as f64 / extent as f64) as usize).min(s - 1);
    Point::new(map(p.x, width), map(p.y, height))
}

/// Pseudo-label for one image from its 8-bit edge map, applying the
/// configured resize. Shared by the batch command and the preview endpoint
/// so both produce identical trimaps.
pub fn pseudo_label_from_edges(
    edges: &GrayImage,
    foreground: &[Point],
    background: Option<Point>,
    config: &PipelineConfig,
) -> Result<PseudoLabel> {
    let (w, h) = (edges.width() as usize, edges.height() as usize);
    match config.resize {
        Some(size) if (size as usize, size as usize) != (w, h) => {
            let resized = io::resize_gray(edges, size, size);
            let map = GrayMap::from_gray_image(&resized)?;
            let fg: Vec<Point> = foreground.iter().map(|&p| scale_point(p, w, h, size)).collect();
            let bg = background.map(|p| scale_point(p, w, h, size));
            generate_from_seeds(&map, &fg, bg, &config.mask)
        }
        _ => generate_from_seeds(&GrayMap::from_gray_image(edges)?, foreground, background, &config.mask),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabelRecord {
    pub id: String,
    pub radius: f64,
    pub foreground_pixels: usize,
    pub background_pixels: usize,
    pub uncertain_pixels: usize,
    pub nudged_seeds: Vec<Nudge>,
    pub dropped_seeds: Vec<Point>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PseudoLabelReport {
    pub written: Vec<PseudoLabelRecord>,
    pub skipped: Vec<SkippedItem>,
}

fn image_index(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    Ok(io::list_pngs(dir)?.into_iter().collect())
}

/// Loads annotations and checks every id against the images directory.
fn load_annotations(manifest: &DatasetManifest) -> Result<(AnnotationFile, BTreeMap<String, PathBuf>)> {
    let annotations = AnnotationFile::load(&manifest.annotations)?;
    let images = image_index(&manifest.images_dir)?;
    for a in &annotations.images {
        let path = images.get(&a.image_id).ok_or_else(|| {
            Error::Validation(format!(
                "annotation references unknown image id '{}' (no {}/{}.png)",
                a.image_id,
                manifest.images_dir.display(),
                a.image_id
            ))
        })?;
        let (w, h) = image::image_dimensions(path).map_err(|e| Error::Image {
            path: path.clone(),
            source: e,
        })?;
        if (w as usize, h as usize) != (a.width, a.height) {
            return Err(Error::Validation(format!(
                "image '{}' is {w}x{h} but its annotation declares {}x{}",
                a.image_id, a.width, a.height
            )));
        }
    }
    Ok((annotations, images))
}

/// First-round trimaps for every annotated image.
pub fn cmd_pseudo_label(manifest: &DatasetManifest, config: &PipelineConfig, out_dir: &Path) -> Result<PseudoLabelReport> {
    config.validate()?;
    let (annotations, _) = load_annotations(manifest)?;
    if annotations.images.is_empty() {
        warn!("{}: no annotations, nothing to do", manifest.annotations.display());
        return Ok(PseudoLabelReport::default());
    }
    let results: Vec<std::result::Result<PseudoLabelRecord, SkippedItem>> = annotations
        .images
        .par_iter()
        .map(|a| {
            let edge_path = manifest.edges_dir.join(format!("{}.png", a.image_id));
            if !edge_path.exists() {
                return Err(skip(&a.image_id, format!("missing edge map {}", edge_path.display())));
            }
            let run = || -> Result<PseudoLabelRecord> {
                let edges = io::read_gray8(&edge_path)?;
                if (edges.width() as usize, edges.height() as usize) != (a.width, a.height) {
                    return Err(Error::DimensionMismatch {
                        expected: (a.width, a.height),
                        actual: (edges.width() as usize, edges.height() as usize),
                    });
                }
                let label = pseudo_label_from_edges(&edges, &a.foreground_points, Some(a.background_point), config)?;
                io::write_trimap(&out_dir.join(format!("{}.png", a.image_id)), &label.trimap)?;
                Ok(PseudoLabelRecord {
                    id: a.image_id.clone(),
                    radius: label.radius,
                    foreground_pixels: label.trimap.count(Label::Foreground),
                    background_pixels: label.trimap.count(Label::Background),
                    uncertain_pixels: label.trimap.count(Label::Uncertain),
                    nudged_seeds: label.nudged,
                    dropped_seeds: label.dropped_seeds,
                })
            };
            run().map_err(|e| skip(&a.image_id, e))
        })
        .collect();
    let mut report = PseudoLabelReport::default();
    for r in results {
        match r {
            Ok(rec) => report.written.push(rec),
            Err(s) => {
                warn!("skipping {}: {}", s.id, s.reason);
                report.skipped.push(s)
            }
        }
    }
    info!("wrote {} trimaps to {}", report.written.len(), out_dir.display());
    Ok(report)
}

/// Loads an image and a saliency map and applies the configured resize.
fn load_pair(image_path: &Path, saliency_path: &Path, config: &PipelineConfig) -> Result<(RasterImage, GrayMap)> {
    let mut rgb = io::read_rgb8(image_path)?;
    let mut sal = io::read_gray8(saliency_path)?;
    if let Some(size) = config.resize {
        rgb = io::resize_rgb(&rgb, size, size);
        sal = io::resize_gray(&sal, size, size);
    }
    Ok((RasterImage::from_rgb_image(&rgb)?, GrayMap::from_gray_image(&sal)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NssRecord {
    pub id: String,
    pub crf_applied: bool,
    pub components_total: usize,
    pub components_removed: usize,
    pub dropped_seeds: Vec<Point>,
    pub foreground_pixels: usize,
    pub uncertain_pixels: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct NssSummary {
    pub written: Vec<NssRecord>,
    pub skipped: Vec<SkippedItem>,
}

/// Second-round trimaps from round-1 saliency maps, optionally CRF-refined
/// first.
pub fn cmd_nss(
    saliency_dir: &Path,
    manifest: &DatasetManifest,
    config: &PipelineConfig,
    crf: bool,
    out_dir: &Path,
) -> Result<NssSummary> {
    config.validate()?;
    let (annotations, images) = load_annotations(manifest)?;
    let results: Vec<std::result::Result<NssRecord, SkippedItem>> = annotations
        .images
        .par_iter()
        .map(|a| {
            let sal_path = saliency_dir.join(format!("{}.png", a.image_id));
            if !sal_path.exists() {
                return Err(skip(&a.image_id, format!("missing saliency map {}", sal_path.display())));
            }
            let run = || -> Result<NssRecord> {
                let (image, mut saliency) = load_pair(&images[&a.image_id], &sal_path, config)?;
                if crf {
                    saliency = crf_refine(&saliency, &image, &config.crf)?;
                }
                let annotation = resized_annotation(a, config);
                let (trimap, report) = nss_pipeline(&saliency, &annotation, &config.nss)?;
                io::write_trimap(&out_dir.join(format!("{}.png", a.image_id)), &trimap)?;
                Ok(NssRecord {
                    id: a.image_id.clone(),
                    crf_applied: crf,
                    components_total: report.components_total,
                    components_removed: report.components_removed,
                    dropped_seeds: report.dropped_seeds,
                    foreground_pixels: trimap.count(Label::Foreground),
                    uncertain_pixels: trimap.count(Label::Uncertain),
                })
            };
            run().map_err(|e| skip(&a.image_id, e))
        })
        .collect();
    let mut summary = NssSummary::default();
    for r in results {
        match r {
            Ok(rec) => summary.written.push(rec),
            Err(s) => {
                warn!("skipping {}: {}", s.id, s.reason);
                summary.skipped.push(s)
            }
        }
    }
    Ok(summary)
}

fn resized_annotation(a: &PointAnnotation, config: &PipelineConfig) -> PointAnnotation {
    match config.resize {
        Some(size) => PointAnnotation {
            image_id: a.image_id.clone(),
            width: size as usize,
            height: size as usize,
            foreground_points: a
                .foreground_points
                .iter()
                .map(|&p| scale_point(p, a.width, a.height, size))
                .collect(),
            background_point: scale_point(a.background_point, a.width, a.height, size),
        },
        None => a.clone(),
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BatchReport {
    pub written: Vec<String>,
    pub skipped: Vec<SkippedItem>,
}

impl BatchReport {
    fn from_results(results: Vec<(String, Result<()>)>) -> Self {
        let mut report = BatchReport::default();
        for (id, r) in results {
            match r {
                Ok(()) => report.written.push(id),
                Err(e) => {
                    warn!("skipping {id}: {e}");
                    report.skipped.push(skip(&id, e))
                }
            }
        }
        report
    }
}

/// CRF-refines every saliency map that has a matching image.
pub fn cmd_crf(saliency_dir: &Path, images_dir: &Path, config: &PipelineConfig, out_dir: &Path) -> Result<BatchReport> {
    config.validate()?;
    let images = image_index(images_dir)?;
    let results = io::list_pngs(saliency_dir)?
        .par_iter()
        .map(|(id, sal_path)| {
            let r = match images.get(id) {
                None => Err(Error::Validation(format!("no image {id}.png in {}", images_dir.display()))),
                Some(img_path) => load_pair(img_path, sal_path, config)
                    .and_then(|(image, sal)| crf_refine(&sal, &image, &config.crf))
                    .and_then(|refined| io::write_gray_map(&out_dir.join(format!("{id}.png")), &refined)),
            };
            (id.clone(), r)
        })
        .collect();
    Ok(BatchReport::from_results(results))
}

/// Writes a gradient-magnitude edge map for every image.
pub fn cmd_demo_edges(images_dir: &Path, out_dir: &Path) -> Result<BatchReport> {
    let results = io::list_pngs(images_dir)?
        .par_iter()
        .map(|(id, path)| {
            let r = io::read_rgb(path).and_then(|img| io::write_gray_map(&out_dir.join(format!("{id}.png")), &gradient_edges(&img)));
            (id.clone(), r)
        })
        .collect();
    Ok(BatchReport::from_results(results))
}

/// Evaluates predictions and writes `eval.json`, `eval.txt` and
/// `pr_curve.csv` into `out_dir`.
pub fn cmd_eval(pred_dir: &Path, gt_dir: &Path, options: &EvalOptions, out_dir: &Path) -> Result<EvalReport> {
    let report = evaluate_dataset(pred_dir, gt_dir, options)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes") + "\n";
    io::write_bytes(&out_dir.join("eval.json"), json.as_bytes())?;
    let mut table = report.result.to_table();
    for s in &report.skipped {
        table.push_str(&format!("skipped {}: {}\n", s.id, s.reason));
    }
    io::write_bytes(&out_dir.join("eval.txt"), table.as_bytes())?;
    io::write_bytes(&out_dir.join("pr_curve.csv"), report.result.pr.to_csv().as_bytes())?;
    Ok(report)
}

/// Input files for a one-off loss evaluation.
#[derive(Debug, Clone)]
pub struct LossFiles {
    pub saliency_pred: PathBuf,
    pub trimap: PathBuf,
    pub image: PathBuf,
    pub edge_pred: PathBuf,
    pub edge_gt: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub bce: f64,
    pub partial_bce: f64,
    pub gated_crf: f64,
    pub weights: LossWeights,
    pub total: f64,
}

pub fn cmd_losses(files: &LossFiles, config: &PipelineConfig) -> Result<LossReport> {
    config.validate()?;
    let saliency = io::read_gray_map(&files.saliency_pred)?;
    let trimap = io::read_trimap(&files.trimap)?;
    let image = io::read_rgb(&files.image)?;
    let edge_pred = io::read_gray_map(&files.edge_pred)?;
    let edge_gt: BinaryMask = io::read_binary_mask(&files.edge_gt, 128)?;
    let loss = total_loss(
        LossInputs {
            edge_pred: &edge_pred,
            edge_target: &edge_gt,
            saliency_pred: &saliency,
            trimap: &trimap,
            image: &image,
        },
        &config.gated_crf,
        &config.loss_weights,
    )?;
    Ok(LossReport {
        bce: loss.bce,
        partial_bce: loss.partial_bce,
        gated_crf: loss.gated_crf,
        weights: config.loss_weights,
        total: loss.value,
    })
}
