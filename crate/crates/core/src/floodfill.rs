//! Adaptive masked flood filling: first-round pseudo-labels from point
//! annotations and an edge map.
//!
//! Detected edges are often broken, so a fill seeded on an object can leak
//! across the whole image. Each annotated point therefore also gets a circular
//! barrier whose radius scales with the image (`min(h, w) / gamma`). The union
//! of thresholded edges and circles partitions the image; filling from the
//! foreground seeds gives the foreground, filling from the background seed
//! gives the background, and everything else is uncertain.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{binarize, rasterize_circle, BinaryMask, Dims, GrayMap, Label, Point, Trimap};

/// Point annotation of one image: one point per salient object plus one
/// background point.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PointAnnotation {
    #[serde(rename = "id")]
    pub image_id: String,
    pub width: usize,
    pub height: usize,
    pub foreground_points: Vec<Point>,
    pub background_point: Point,
}

impl PointAnnotation {
    pub fn dims(&self) -> Result<Dims> {
        Dims::new(self.width, self.height)
    }

    pub fn validate(&self) -> Result<()> {
        let ctx = |msg: String| Error::Validation(format!("image '{}': {msg}", self.image_id));
        if self.image_id.is_empty() {
            return Err(Error::Validation("annotation with empty id".into()));
        }
        let dims = self.dims().map_err(|e| ctx(e.to_string()))?;
        if self.foreground_points.is_empty() {
            return Err(ctx("foreground_points must contain at least one point".into()));
        }
        for (i, p) in self.foreground_points.iter().enumerate() {
            if !dims.contains(*p) {
                return Err(ctx(format!(
                    "foreground_points[{i}] = ({}, {}) is outside {}x{}",
                    p.x, p.y, dims.width, dims.height
                )));
            }
        }
        let b = self.background_point;
        if !dims.contains(b) {
            return Err(ctx(format!(
                "background_point = ({}, {}) is outside {}x{}",
                b.x, b.y, dims.width, dims.height
            )));
        }
        if self.foreground_points.contains(&b) {
            return Err(ctx("background_point coincides with a foreground point".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdaptiveMaskConfig {
    pub gamma: f64,
    pub edge_threshold: f64,
    /// Include a circle around the background point as well. With `false`
    /// the background fill is bounded only by edges and foreground circles.
    pub bound_background: bool,
}

impl Default for AdaptiveMaskConfig {
    fn default() -> Self {
        AdaptiveMaskConfig {
            gamma: 5.0,
            edge_threshold: 0.5,
            bound_background: true,
        }
    }
}

impl AdaptiveMaskConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return Err(Error::invalid(format!("gamma must be > 0, got {}", self.gamma)));
        }
        if !(0.0..=1.0).contains(&self.edge_threshold) {
            return Err(Error::invalid(format!(
                "edge_threshold must be in [0, 1], got {}",
                self.edge_threshold
            )));
        }
        Ok(())
    }
}

/// Tolerance band of the fill: a neighbour `p` is entered when
/// `lo < field(p) - field(seed) < hi`. The visited set plays the role of the
/// "already set to alpha" test, so no fill value is needed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloodFillParams {
    pub lo: f64,
    pub hi: f64,
}

impl FloodFillParams {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(lo < hi) {
            return Err(Error::invalid(format!("fill band needs lo < hi, got ({lo}, {hi})")));
        }
        Ok(FloodFillParams { lo, hi })
    }

    /// Band used for barrier-driven filling over a constant field.
    pub fn barrier_only() -> Self {
        FloodFillParams { lo: -0.5, hi: 0.5 }
    }
}

/// Pixels a flood fill may not enter.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BarrierField(BinaryMask);

impl BarrierField {
    pub fn new(blocked: BinaryMask) -> Self {
        BarrierField(blocked)
    }
    pub fn open(dims: Dims) -> Self {
        BarrierField(BinaryMask::empty(dims))
    }
    pub fn dims(&self) -> Dims {
        self.0.dims()
    }
    pub fn is_blocked(&self, p: Point) -> bool {
        self.0.get(p)
    }
    pub fn mask(&self) -> &BinaryMask {
        &self.0
    }
    pub fn into_mask(self) -> BinaryMask {
        self.0
    }
}

/// Radius of the adaptive circular mask: `min(h / gamma, w / gamma)`.
pub fn mask_radius(height: usize, width: usize, gamma: f64) -> Result<f64> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return Err(Error::invalid(format!("gamma must be > 0, got {gamma}")));
    }
    if height == 0 || width == 0 {
        return Err(Error::invalid("image dimensions must be positive"));
    }
    Ok((height as f64 / gamma).min(width as f64 / gamma))
}

/// 4-connected flood fill from `seed` through unblocked pixels whose value
/// lies within the band relative to the seed value. The seed itself is
/// always part of the result.
pub fn flood_fill(
    seed: Point,
    field: &GrayMap,
    barrier: &BarrierField,
    params: FloodFillParams,
) -> Result<BinaryMask> {
    let dims = field.dims();
    dims.check_same(barrier.dims())?;
    dims.check_point(seed)?;
    if barrier.is_blocked(seed) {
        return Err(Error::EmptyFill(seed));
    }
    let values = field.values();
    let old = field.get(seed);
    let blocked = barrier.mask().bits();
    Ok(fill_where(dims, seed, |i| {
        let delta = values[i] - old;
        !blocked[i] && params.lo < delta && delta < params.hi
    }))
}

/// Fill through every unblocked pixel; equivalent to [`flood_fill`] over a
/// constant field with [`FloodFillParams::barrier_only`].
pub fn fill_region(seed: Point, barrier: &BarrierField) -> Result<BinaryMask> {
    let dims = barrier.dims();
    dims.check_point(seed)?;
    if barrier.is_blocked(seed) {
        return Err(Error::EmptyFill(seed));
    }
    let blocked = barrier.mask().bits();
    Ok(fill_where(dims, seed, |i| !blocked[i]))
}

fn fill_where(dims: Dims, seed: Point, enterable: impl Fn(usize) -> bool) -> BinaryMask {
    let mut out = BinaryMask::empty(dims);
    let bits = out.bits_mut();
    let start = dims.index(seed);
    bits[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(i) = queue.pop_front() {
        for n in dims.neighbors4(i) {
            if !bits[n] && enterable(n) {
                bits[n] = true;
                queue.push_back(n);
            }
        }
    }
    out
}

/// Thresholded edges united with one circle perimeter per annotated point.
pub fn build_barrier(
    edges: &GrayMap,
    annotation: &PointAnnotation,
    config: &AdaptiveMaskConfig,
) -> Result<BarrierField> {
    edges.dims().check_same(annotation.dims()?)?;
    let bg = Some(annotation.background_point);
    build_barrier_for_seeds(edges, &annotation.foreground_points, bg, config)
}

pub(crate) fn build_barrier_for_seeds(
    edges: &GrayMap,
    foreground: &[Point],
    background: Option<Point>,
    config: &AdaptiveMaskConfig,
) -> Result<BarrierField> {
    config.validate()?;
    let dims = edges.dims();
    let radius = mask_radius(dims.height, dims.width, config.gamma)?;
    let mut blocked = binarize(edges, config.edge_threshold);
    let circled = foreground
        .iter()
        .copied()
        .chain(background.filter(|_| config.bound_background));
    for p in circled {
        blocked.union_in_place(&rasterize_circle(p, radius, dims)?)?;
    }
    Ok(BarrierField(blocked))
}

/// A seed that had to be moved off a barrier pixel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Nudge {
    pub from: Point,
    pub to: Point,
}

/// First-round pseudo-label together with diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabel {
    pub trimap: Trimap,
    pub radius: f64,
    pub nudged: Vec<Nudge>,
    /// Foreground seeds whose own pixel ended up not labelled foreground
    /// (their region collided with the background fill).
    pub dropped_seeds: Vec<Point>,
}

/// Nearest unblocked pixel in the 5x5 neighbourhood of `p`, by Euclidean
/// distance with ties broken in scan order. Returns `p` when it is free.
pub fn nudge_seed(p: Point, barrier: &BarrierField) -> Result<Point> {
    let dims = barrier.dims();
    dims.check_point(p)?;
    if !barrier.is_blocked(p) {
        return Ok(p);
    }
    let mut best: Option<(i64, Point)> = None;
    for dy in -2i64..=2 {
        for dx in -2i64..=2 {
            let (x, y) = (p.x as i64 + dx, p.y as i64 + dy);
            if x < 0 || y < 0 || x >= dims.width as i64 || y >= dims.height as i64 {
                continue;
            }
            let q = Point::new(x as usize, y as usize);
            let d2 = dx * dx + dy * dy;
            if !barrier.is_blocked(q) && best.is_none_or(|(bd, _)| d2 < bd) {
                best = Some((d2, q));
            }
        }
    }
    best.map(|(_, q)| q).ok_or(Error::EmptyFill(p))
}

/// Pseudo-label `g = F(S, E(I) ∪ M)` for one annotated image.
pub fn generate_pseudo_label(
    dims: Dims,
    edges: &GrayMap,
    annotation: &PointAnnotation,
    config: &AdaptiveMaskConfig,
) -> Result<PseudoLabel> {
    annotation.validate()?;
    dims.check_same(annotation.dims()?)?;
    dims.check_same(edges.dims())?;
    generate_from_seeds(
        edges,
        &annotation.foreground_points,
        Some(annotation.background_point),
        config,
    )
}

/// Like [`generate_pseudo_label`] but with an optional background point.
/// Without one, nothing is labelled background.
pub fn generate_from_seeds(
    edges: &GrayMap,
    foreground: &[Point],
    background: Option<Point>,
    config: &AdaptiveMaskConfig,
) -> Result<PseudoLabel> {
    let dims = edges.dims();
    if foreground.is_empty() {
        return Err(Error::invalid("at least one foreground point is required"));
    }
    for &p in foreground.iter().chain(background.iter()) {
        dims.check_point(p)?;
    }
    let barrier = build_barrier_for_seeds(edges, foreground, background, config)?;
    let radius = mask_radius(dims.height, dims.width, config.gamma)?;

    let mut nudged = Vec::new();
    let mut place = |p: Point| -> Result<Point> {
        let q = nudge_seed(p, &barrier)?;
        if q != p {
            nudged.push(Nudge { from: p, to: q });
        }
        Ok(q)
    };
    let fg_seeds = foreground.iter().map(|&p| place(p)).collect::<Result<Vec<_>>>()?;
    let bg_seed = background.map(&mut place).transpose()?;

    let mut fg = BinaryMask::empty(dims);
    for &s in &fg_seeds {
        if !fg.get(s) {
            fg.union_in_place(&fill_region(s, &barrier)?)?;
        }
    }
    let bg = match bg_seed {
        Some(s) => fill_region(s, &barrier)?,
        None => BinaryMask::empty(dims),
    };

    let mut trimap = Trimap::filled(dims, Label::Uncertain);
    for (i, l) in trimap.labels_mut().iter_mut().enumerate() {
        *l = match (fg.bits()[i], bg.bits()[i]) {
            (true, false) => Label::Foreground,
            (false, true) => Label::Background,
            _ => Label::Uncertain,
        };
    }
    let dropped_seeds = foreground
        .iter()
        .zip(&fg_seeds)
        .filter(|(_, &s)| trimap.get(s) != Label::Foreground)
        .map(|(&p, _)| p)
        .collect();
    Ok(PseudoLabel {
        trimap,
        radius,
        nudged,
        dropped_seeds,
    })
}
