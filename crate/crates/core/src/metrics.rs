//! Saliency evaluation: PR curve, F-measure, MAE and S-measure, plus
//! dataset-level aggregation.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, GrayMap};
use crate::io;

pub const NUM_THRESHOLDS: usize = 255;
pub const DEFAULT_BETA_SQ: f64 = 0.3;
const EPS: f64 = f64::EPSILON;

/// Precision and recall at thresholds `k / 255`, `k = 1..=255`. A pixel is
/// predicted positive when its value is `>=` the threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrCurve {
    pub thresholds: Vec<f64>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
}

impl PrCurve {
    pub fn len(&self) -> usize {
        self.thresholds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.thresholds.is_empty()
    }

    /// Pointwise mean of several curves over the same thresholds.
    pub fn mean(curves: &[PrCurve]) -> Option<PrCurve> {
        let first = curves.first()?;
        let n = curves.len() as f64;
        let avg = |get: fn(&PrCurve) -> &Vec<f64>| {
            (0..first.len())
                .map(|k| curves.iter().map(|c| get(c)[k]).sum::<f64>() / n)
                .collect()
        };
        Some(PrCurve {
            thresholds: first.thresholds.clone(),
            precision: avg(|c| &c.precision),
            recall: avg(|c| &c.recall),
        })
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("threshold,precision,recall\n");
        for k in 0..self.len() {
            let _ = writeln!(
                out,
                "{:.6},{:.9},{:.9}",
                self.thresholds[k], self.precision[k], self.recall[k]
            );
        }
        out
    }
}

pub fn thresholds() -> Vec<f64> {
    (1..=NUM_THRESHOLDS).map(|k| k as f64 / NUM_THRESHOLDS as f64).collect()
}

fn precision_recall(tp: usize, predicted: usize, positives: usize) -> (f64, f64) {
    let precision = if predicted == 0 { 1.0 } else { tp as f64 / predicted as f64 };
    let recall = if positives == 0 { 1.0 } else { tp as f64 / positives as f64 };
    (precision, recall)
}

pub fn pr_curve(pred: &GrayMap, gt: &BinaryMask) -> Result<PrCurve> {
    pred.dims().check_same(gt.dims())?;
    let mut fg = Vec::new();
    let mut bg = Vec::new();
    for (&v, &g) in pred.values().iter().zip(gt.bits()) {
        if g {
            fg.push(v)
        } else {
            bg.push(v)
        }
    }
    fg.sort_by(f64::total_cmp);
    bg.sort_by(f64::total_cmp);
    let at_least = |sorted: &[f64], t: f64| sorted.len() - sorted.partition_point(|&v| v < t);
    let thresholds = thresholds();
    let (precision, recall) = thresholds
        .iter()
        .map(|&t| {
            let tp = at_least(&fg, t);
            let fp = at_least(&bg, t);
            precision_recall(tp, tp + fp, fg.len())
        })
        .unzip();
    Ok(PrCurve {
        thresholds,
        precision,
        recall,
    })
}

pub fn f_score(precision: f64, recall: f64, beta_sq: f64) -> f64 {
    let denom = beta_sq * precision + recall;
    if denom > 0.0 {
        (1.0 + beta_sq) * precision * recall / denom
    } else {
        0.0
    }
}

/// Maximum and mean F-measure over the curve's thresholds.
pub fn f_measure(pr: &PrCurve, beta_sq: f64) -> Result<(f64, f64)> {
    if !(beta_sq > 0.0) {
        return Err(Error::invalid(format!("beta² must be > 0, got {beta_sq}")));
    }
    if pr.is_empty() {
        return Ok((0.0, 0.0));
    }
    let scores: Vec<f64> = (0..pr.len())
        .map(|k| f_score(pr.precision[k], pr.recall[k], beta_sq))
        .collect();
    let max = scores.iter().copied().fold(0.0, f64::max);
    let mean = scores.iter().sum::<f64>() / scores.len() as f64;
    Ok((max, mean))
}

/// F-measure at the adaptive threshold `min(2 * mean(pred), 1)`.
pub fn adaptive_f_measure(pred: &GrayMap, gt: &BinaryMask, beta_sq: f64) -> Result<f64> {
    pred.dims().check_same(gt.dims())?;
    let t = (2.0 * pred.mean()).min(1.0);
    let mut tp = 0;
    let mut predicted = 0;
    for (&v, &g) in pred.values().iter().zip(gt.bits()) {
        if v >= t {
            predicted += 1;
            tp += g as usize;
        }
    }
    let (p, r) = precision_recall(tp, predicted, gt.count());
    Ok(f_score(p, r, beta_sq))
}

pub fn mae(pred: &GrayMap, gt: &BinaryMask) -> Result<f64> {
    pred.dims().check_same(gt.dims())?;
    let total: f64 = pred
        .values()
        .iter()
        .zip(gt.bits())
        .map(|(&v, &g)| (v - if g { 1.0 } else { 0.0 }).abs())
        .sum();
    Ok(total / pred.values().len() as f64)
}

/// Structure measure: `0.5 * object + 0.5 * region`, with the usual special
/// cases for empty and full ground truth.
pub fn s_measure(pred: &GrayMap, gt: &BinaryMask) -> Result<f64> {
    pred.dims().check_same(gt.dims())?;
    let alpha = 0.5;
    let y = gt.count() as f64 / gt.bits().len() as f64;
    let score = if y == 0.0 {
        1.0 - pred.mean()
    } else if y == 1.0 {
        pred.mean()
    } else {
        alpha * s_object(pred, gt) + (1.0 - alpha) * s_region(pred, gt)
    };
    Ok(score.clamp(0.0, 1.0))
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

fn object_score(values: &[f64]) -> f64 {
    let (x, sigma) = mean_std(values);
    2.0 * x / (x * x + 1.0 + sigma + EPS)
}

fn s_object(pred: &GrayMap, gt: &BinaryMask) -> f64 {
    let u = gt.count() as f64 / gt.bits().len() as f64;
    let (mut on_fg, mut on_bg) = (Vec::new(), Vec::new());
    for (&v, &g) in pred.values().iter().zip(gt.bits()) {
        if g {
            on_fg.push(v)
        } else {
            on_bg.push(1.0 - v)
        }
    }
    u * object_score(&on_fg) + (1.0 - u) * object_score(&on_bg)
}

fn s_region(pred: &GrayMap, gt: &BinaryMask) -> f64 {
    let (w, h) = (gt.width(), gt.height());
    // centroid, rounded, as a split position (one past the centroid index)
    let (mut sx, mut sy, mut n) = (0.0, 0.0, 0usize);
    for (i, &g) in gt.bits().iter().enumerate() {
        if g {
            sx += (i % w) as f64;
            sy += (i / w) as f64;
            n += 1;
        }
    }
    let (cx, cy) = if n == 0 {
        ((w as f64 / 2.0).round_ties_even() as usize, (h as f64 / 2.0).round_ties_even() as usize)
    } else {
        ((sx / n as f64).round_ties_even() as usize, (sy / n as f64).round_ties_even() as usize)
    };
    let (x, y) = ((cx + 1).min(w), (cy + 1).min(h));
    let area = (w * h) as f64;
    let blocks = [
        (0..x, 0..y),
        (x..w, 0..y),
        (0..x, y..h),
        (x..w, y..h),
    ];
    let weights = [
        (x * y) as f64 / area,
        ((w - x) * y) as f64 / area,
        (x * (h - y)) as f64 / area,
    ];
    let weights = [weights[0], weights[1], weights[2], 1.0 - weights[0] - weights[1] - weights[2]];
    blocks
        .iter()
        .zip(weights)
        .map(|((xs, ys), wgt)| {
            let mut p = Vec::new();
            let mut g = Vec::new();
            for yy in ys.clone() {
                for xx in xs.clone() {
                    p.push(pred.values()[yy * w + xx]);
                    g.push(if gt.bits()[yy * w + xx] { 1.0 } else { 0.0 });
                }
            }
            wgt * ssim(&p, &g)
        })
        .sum()
}

fn ssim(pred: &[f64], gt: &[f64]) -> f64 {
    let n = pred.len();
    if n == 0 {
        return 0.0;
    }
    let x = pred.iter().sum::<f64>() / n as f64;
    let y = gt.iter().sum::<f64>() / n as f64;
    let (sx, sy, sxy) = if n > 1 {
        let d = (n - 1) as f64;
        (
            pred.iter().map(|v| (v - x).powi(2)).sum::<f64>() / d,
            gt.iter().map(|v| (v - y).powi(2)).sum::<f64>() / d,
            pred.iter().zip(gt).map(|(a, b)| (a - x) * (b - y)).sum::<f64>() / d,
        )
    } else {
        (0.0, 0.0, 0.0)
    };
    let alpha = 4.0 * x * y * sxy;
    let beta = (x * x + y * y) * (sx + sy);
    if alpha != 0.0 {
        alpha / (beta + EPS)
    } else if beta == 0.0 {
        1.0
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeanFMode {
    /// Mean of F over the 255 thresholds.
    #[default]
    Sweep,
    /// F at the per-image adaptive threshold `2 * mean(pred)`.
    Adaptive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalOptions {
    pub beta_sq: f64,
    pub mean_f: MeanFMode,
    /// Min-max normalize each prediction before scoring.
    pub normalize: bool,
    /// 8-bit ground-truth pixels `>=` this value are foreground.
    pub gt_threshold: u8,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            beta_sq: DEFAULT_BETA_SQ,
            mean_f: MeanFMode::Sweep,
            normalize: true,
            gt_threshold: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageMetrics {
    pub id: String,
    pub f_max: f64,
    pub f_mean: f64,
    pub mae: f64,
    pub s_measure: f64,
    #[serde(skip)]
    pub pr: Option<PrCurve>,
}

pub fn evaluate_image(id: &str, pred: &GrayMap, gt: &BinaryMask, opts: &EvalOptions) -> Result<ImageMetrics> {
    let pred = if opts.normalize {
        pred.min_max_normalized()
    } else {
        pred.clone()
    };
    let pr = pr_curve(&pred, gt)?;
    let (f_max, sweep_mean) = f_measure(&pr, opts.beta_sq)?;
    let f_mean = match opts.mean_f {
        MeanFMode::Sweep => sweep_mean,
        MeanFMode::Adaptive => adaptive_f_measure(&pred, gt, opts.beta_sq)?,
    };
    Ok(ImageMetrics {
        id: id.to_string(),
        f_max,
        f_mean,
        mae: mae(&pred, gt)?,
        s_measure: s_measure(&pred, gt)?,
        pr: Some(pr),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    /// Maximum of the dataset-mean F curve.
    pub f_max: f64,
    pub f_mean: f64,
    pub mae: f64,
    pub s_measure: f64,
    pub per_image: Vec<ImageMetrics>,
    pub pr: PrCurve,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkippedItem {
    pub id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub result: EvalResult,
    pub skipped: Vec<SkippedItem>,
}

impl EvalResult {
    /// Aggregates per-image metrics: arithmetic means of the per-image
    /// scalars, a pointwise-mean PR curve, and F_max taken as the maximum of
    /// the pointwise-mean F curve.
    pub fn aggregate(per_image: Vec<ImageMetrics>, beta_sq: f64) -> Result<Self> {
        if per_image.is_empty() {
            return Err(Error::Validation("no images to evaluate".into()));
        }
        let n = per_image.len() as f64;
        let curves: Vec<PrCurve> = per_image.iter().filter_map(|m| m.pr.clone()).collect();
        if curves.len() != per_image.len() {
            return Err(Error::Validation("missing PR curves".into()));
        }
        let pr = PrCurve::mean(&curves).expect("non-empty");
        let f_max = (0..pr.len())
            .map(|k| {
                curves
                    .iter()
                    .map(|c| f_score(c.precision[k], c.recall[k], beta_sq))
                    .sum::<f64>()
                    / n
            })
            .fold(0.0, f64::max);
        Ok(EvalResult {
            f_max,
            f_mean: per_image.iter().map(|m| m.f_mean).sum::<f64>() / n,
            mae: per_image.iter().map(|m| m.mae).sum::<f64>() / n,
            s_measure: per_image.iter().map(|m| m.s_measure).sum::<f64>() / n,
            per_image,
            pr,
        })
    }

    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:<24} {:>8} {:>8} {:>8} {:>8}", "image", "Fmax", "mF", "MAE", "Sm");
        for m in &self.per_image {
            let _ = writeln!(
                out,
                "{:<24} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
                m.id, m.f_max, m.f_mean, m.mae, m.s_measure
            );
        }
        let _ = writeln!(
            out,
            "{:<24} {:>8.4} {:>8.4} {:>8.4} {:>8.4}",
            "[dataset]", self.f_max, self.f_mean, self.mae, self.s_measure
        );
        out
    }
}

fn stems(dir: &Path) -> Result<BTreeMap<String, PathBuf>> {
    Ok(io::list_pngs(dir)?.into_iter().collect())
}

/// Scores every prediction in `pred_dir` against the ground truth with the
/// same stem in `gt_dir`. Unmatched or unreadable files are reported, not
/// fatal.
pub fn evaluate_dataset(pred_dir: &Path, gt_dir: &Path, opts: &EvalOptions) -> Result<EvalReport> {
    let preds = stems(pred_dir)?;
    let gts = stems(gt_dir)?;
    let mut skipped = Vec::new();
    for id in gts.keys().filter(|k| !preds.contains_key(*k)) {
        skipped.push(SkippedItem {
            id: id.clone(),
            reason: "no prediction".into(),
        });
    }
    let pairs: Vec<(&String, &PathBuf, &PathBuf)> = preds
        .iter()
        .filter_map(|(id, p)| match gts.get(id) {
            Some(g) => Some((id, p, g)),
            None => {
                skipped.push(SkippedItem {
                    id: id.clone(),
                    reason: "no ground truth".into(),
                });
                None
            }
        })
        .collect();
    let scored: Vec<(String, Result<ImageMetrics>)> = pairs
        .par_iter()
        .map(|(id, p, g)| {
            let r = (|| {
                let pred = io::read_gray_map(p)?;
                let gt = io::read_binary_mask(g, opts.gt_threshold)?;
                evaluate_image(id, &pred, &gt, opts)
            })();
            ((*id).clone(), r)
        })
        .collect();
    let mut per_image = Vec::new();
    for (id, r) in scored {
        match r {
            Ok(m) => per_image.push(m),
            Err(e) => skipped.push(SkippedItem {
                id,
                reason: e.to_string(),
            }),
        }
    }
    skipped.sort_by(|a, b| a.id.cmp(&b.id));
    Ok(EvalReport {
        result: EvalResult::aggregate(per_image, opts.beta_sq)?,
        skipped,
    })
}
