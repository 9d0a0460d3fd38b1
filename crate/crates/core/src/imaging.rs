//! Raster primitives shared by the rest of the crate.
//!
//! All buffers are row-major with the origin at the top-left corner; `x` is
//! the column and `y` the row.

use std::collections::VecDeque;

use image::{GrayImage, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A pixel position: `x` is the column, `y` the row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Point {
    pub x: usize,
    pub y: usize,
}

impl Point {
    pub const fn new(x: usize, y: usize) -> Self {
        Point { x, y }
    }
}

/// Width and height of a raster.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub width: usize,
    pub height: usize,
}

impl Dims {
    pub fn new(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::invalid(format!(
                "raster dimensions must be positive, got {width}x{height}"
            )));
        }
        Ok(Dims { width, height })
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn contains(&self, p: Point) -> bool {
        p.x < self.width && p.y < self.height
    }

    #[inline]
    pub fn index(&self, p: Point) -> usize {
        p.y * self.width + p.x
    }

    #[inline]
    pub fn point(&self, idx: usize) -> Point {
        Point::new(idx % self.width, idx / self.width)
    }

    pub fn check_point(&self, p: Point) -> Result<()> {
        if self.contains(p) {
            Ok(())
        } else {
            Err(Error::OutOfBounds {
                point: p,
                width: self.width,
                height: self.height,
            })
        }
    }

    pub fn check_same(&self, other: Dims) -> Result<()> {
        if *self == other {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: (self.width, self.height),
                actual: (other.width, other.height),
            })
        }
    }

    /// 4-neighbours of `idx` that lie inside the raster.
    #[inline]
    pub(crate) fn neighbors4(&self, idx: usize) -> impl Iterator<Item = usize> {
        let (x, y, w, h) = (idx % self.width, idx / self.width, self.width, self.height);
        let left = (x > 0).then(|| idx - 1);
        let right = (x + 1 < w).then(|| idx + 1);
        let up = (y > 0).then(|| idx - w);
        let down = (y + 1 < h).then(|| idx + w);
        [right, left, down, up].into_iter().flatten()
    }
}

/// 8-bit RGB image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    dims: Dims,
    rgb: Vec<u8>,
}

impl RasterImage {
    pub fn new(width: usize, height: usize, rgb: Vec<u8>) -> Result<Self> {
        let dims = Dims::new(width, height)?;
        if rgb.len() != 3 * dims.len() {
            return Err(Error::invalid(format!(
                "rgb buffer has {} bytes, expected {}",
                rgb.len(),
                3 * dims.len()
            )));
        }
        Ok(RasterImage { dims, rgb })
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(Point) -> [u8; 3]) -> Result<Self> {
        let dims = Dims::new(width, height)?;
        let rgb = (0..dims.len()).flat_map(|i| f(dims.point(i))).collect();
        Ok(RasterImage { dims, rgb })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }
    pub fn width(&self) -> usize {
        self.dims.width
    }
    pub fn height(&self) -> usize {
        self.dims.height
    }

    #[inline]
    pub fn pixel(&self, idx: usize) -> [u8; 3] {
        [self.rgb[3 * idx], self.rgb[3 * idx + 1], self.rgb[3 * idx + 2]]
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.rgb
    }

    /// Rec. 601 luma in [0, 1].
    pub fn luminance(&self) -> Vec<f64> {
        (0..self.dims.len())
            .map(|i| {
                let [r, g, b] = self.pixel(i);
                (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64) / 255.0
            })
            .collect()
    }

    pub fn mirror_horizontal(&self) -> Self {
        let d = self.dims;
        RasterImage::from_fn(d.width, d.height, |p| {
            self.pixel(d.index(Point::new(d.width - 1 - p.x, p.y)))
        })
        .expect("dims already validated")
    }

    pub fn from_rgb_image(img: &RgbImage) -> Result<Self> {
        RasterImage::new(img.width() as usize, img.height() as usize, img.as_raw().clone())
    }

    pub fn to_rgb_image(&self) -> RgbImage {
        RgbImage::from_raw(self.width() as u32, self.height() as u32, self.rgb.clone())
            .expect("buffer length matches dims")
    }
}

/// Dense real-valued field with every value in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayMap {
    dims: Dims,
    values: Vec<f64>,
}

impl GrayMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        let dims = Dims::new(width, height)?;
        if values.len() != dims.len() {
            return Err(Error::invalid(format!(
                "map has {} values, expected {}",
                values.len(),
                dims.len()
            )));
        }
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::invalid(format!(
                "map value {v} at index {i} is outside [0, 1]"
            )));
        }
        Ok(GrayMap { dims, values })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        let dims = Dims::new(width, height)?;
        GrayMap::new(width, height, vec![value; dims.len()])
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(Point) -> f64) -> Result<Self> {
        let dims = Dims::new(width, height)?;
        GrayMap::new(width, height, (0..dims.len()).map(|i| f(dims.point(i))).collect())
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }
    pub fn width(&self) -> usize {
        self.dims.width
    }
    pub fn height(&self) -> usize {
        self.dims.height
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn get(&self, p: Point) -> f64 {
        self.values[self.dims.index(p)]
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// `1 - v` for every value.
    pub fn complement(&self) -> Self {
        GrayMap {
            dims: self.dims,
            values: self.values.iter().map(|v| 1.0 - v).collect(),
        }
    }

    pub fn mirror_horizontal(&self) -> Self {
        let d = self.dims;
        GrayMap::from_fn(d.width, d.height, |p| {
            self.get(Point::new(d.width - 1 - p.x, p.y))
        })
        .expect("dims already validated")
    }

    /// Rescales values so the minimum maps to 0 and the maximum to 1.
    /// Constant maps are returned unchanged.
    pub fn min_max_normalized(&self) -> Self {
        let (lo, hi) = self
            .values
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            });
        if hi - lo <= 0.0 {
            return self.clone();
        }
        GrayMap {
            dims: self.dims,
            values: self.values.iter().map(|v| (v - lo) / (hi - lo)).collect(),
        }
    }

    /// 8-bit image normalized by dividing by 255.
    pub fn from_gray_image(img: &GrayImage) -> Result<Self> {
        GrayMap::new(
            img.width() as usize,
            img.height() as usize,
            img.as_raw().iter().map(|&v| v as f64 / 255.0).collect(),
        )
    }

    /// Quantizes to 8 bits with round-to-nearest.
    pub fn to_gray_image(&self) -> GrayImage {
        let raw = self
            .values
            .iter()
            .map(|v| (v * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect();
        GrayImage::from_raw(self.width() as u32, self.height() as u32, raw)
            .expect("buffer length matches dims")
    }
}

/// Boolean per-pixel mask.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    dims: Dims,
    bits: Vec<bool>,
}

impl BinaryMask {
    pub fn new(width: usize, height: usize, bits: Vec<bool>) -> Result<Self> {
        let dims = Dims::new(width, height)?;
        if bits.len() != dims.len() {
            return Err(Error::invalid(format!(
                "mask has {} bits, expected {}",
                bits.len(),
                dims.len()
            )));
        }
        Ok(BinaryMask { dims, bits })
    }

    pub fn empty(dims: Dims) -> Self {
        BinaryMask {
            dims,
            bits: vec![false; dims.len()],
        }
    }

    pub fn from_fn(width: usize, height: usize, f: impl Fn(Point) -> bool) -> Result<Self> {
        let dims = Dims::new(width, height)?;
        Ok(BinaryMask {
            dims,
            bits: (0..dims.len()).map(|i| f(dims.point(i))).collect(),
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }
    pub fn width(&self) -> usize {
        self.dims.width
    }
    pub fn height(&self) -> usize {
        self.dims.height
    }
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn get(&self, p: Point) -> bool {
        self.bits[self.dims.index(p)]
    }

    #[inline]
    pub fn set(&mut self, p: Point, value: bool) {
        let i = self.dims.index(p);
        self.bits[i] = value;
    }

    #[inline]
    pub(crate) fn bits_mut(&mut self) -> &mut [bool] {
        &mut self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.dims == other.dims && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    pub fn union(&self, other: &BinaryMask) -> Result<Self> {
        self.dims.check_same(other.dims)?;
        Ok(BinaryMask {
            dims: self.dims,
            bits: self.bits.iter().zip(&other.bits).map(|(&a, &b)| a || b).collect(),
        })
    }

    pub fn union_in_place(&mut self, other: &BinaryMask) -> Result<()> {
        self.dims.check_same(other.dims)?;
        for (a, &b) in self.bits.iter_mut().zip(&other.bits) {
            *a |= b;
        }
        Ok(())
    }

    pub fn complement(&self) -> Self {
        BinaryMask {
            dims: self.dims,
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    /// The mask as a 0/1 map.
    pub fn to_gray_map(&self) -> GrayMap {
        GrayMap {
            dims: self.dims,
            values: self.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        }
    }

    /// Pixels `>= threshold` become set.
    pub fn from_gray_image(img: &GrayImage, threshold: u8) -> Result<Self> {
        BinaryMask::new(
            img.width() as usize,
            img.height() as usize,
            img.as_raw().iter().map(|&v| v >= threshold).collect(),
        )
    }

    pub fn to_gray_image(&self) -> GrayImage {
        let raw = self.bits.iter().map(|&b| if b { 255 } else { 0 }).collect();
        GrayImage::from_raw(self.width() as u32, self.height() as u32, raw)
            .expect("buffer length matches dims")
    }
}

/// Trimap label codes, stored as their 8-bit file values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[repr(u8)]
pub enum Label {
    Background = 0,
    Uncertain = 128,
    Foreground = 255,
}

impl Label {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Label::Background),
            128 => Some(Label::Uncertain),
            255 => Some(Label::Foreground),
            _ => None,
        }
    }

    pub fn is_definite(self) -> bool {
        self != Label::Uncertain
    }
}

/// Per-pixel foreground / background / uncertain labelling.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Trimap {
    dims: Dims,
    labels: Vec<Label>,
}

impl Trimap {
    pub fn filled(dims: Dims, label: Label) -> Self {
        Trimap {
            dims,
            labels: vec![label; dims.len()],
        }
    }

    pub fn new(width: usize, height: usize, labels: Vec<Label>) -> Result<Self> {
        let dims = Dims::new(width, height)?;
        if labels.len() != dims.len() {
            return Err(Error::invalid(format!(
                "trimap has {} labels, expected {}",
                labels.len(),
                dims.len()
            )));
        }
        Ok(Trimap { dims, labels })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }
    pub fn width(&self) -> usize {
        self.dims.width
    }
    pub fn height(&self) -> usize {
        self.dims.height
    }
    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, p: Point) -> Label {
        self.labels[self.dims.index(p)]
    }

    pub(crate) fn labels_mut(&mut self) -> &mut [Label] {
        &mut self.labels
    }

    pub fn count(&self, label: Label) -> usize {
        self.labels.iter().filter(|&&l| l == label).count()
    }

    pub fn mask_of(&self, label: Label) -> BinaryMask {
        BinaryMask {
            dims: self.dims,
            bits: self.labels.iter().map(|&l| l == label).collect(),
        }
    }

    /// Decodes an 8-bit image; any code outside {0, 128, 255} is rejected.
    pub fn from_gray_image(img: &GrayImage) -> Result<Self> {
        let labels = img
            .as_raw()
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                Label::from_code(v).ok_or_else(|| {
                    Error::invalid(format!("trimap code {v} at index {i} is not one of 0/128/255"))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Trimap::new(img.width() as usize, img.height() as usize, labels)
    }

    pub fn to_gray_image(&self) -> GrayImage {
        let raw = self.labels.iter().map(|l| l.code()).collect();
        GrayImage::from_raw(self.width() as u32, self.height() as u32, raw)
            .expect("buffer length matches dims")
    }
}

/// Shape of the dilation window.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Footprint {
    /// Chebyshev ball: the full `(2r+1) x (2r+1)` square.
    #[default]
    Square,
    /// Euclidean ball: offsets with `dx² + dy² <= r²`.
    Disc,
}

/// Binary dilation with a square window of odd side `kernel`.
pub fn dilate(mask: &BinaryMask, kernel: usize) -> Result<BinaryMask> {
    if kernel < 1 {
        return Err(Error::invalid("dilation kernel must be >= 1"));
    }
    if kernel.is_multiple_of(2) {
        return Err(Error::invalid(format!(
            "dilation kernel must be odd, got {kernel}; use dilate_radius for even sizes"
        )));
    }
    Ok(dilate_radius(mask, kernel / 2, Footprint::Square))
}

/// Binary dilation by a window of the given radius.
pub fn dilate_radius(mask: &BinaryMask, radius: usize, footprint: Footprint) -> BinaryMask {
    if radius == 0 {
        return mask.clone();
    }
    match footprint {
        Footprint::Square => dilate_square(mask, radius),
        Footprint::Disc => dilate_disc(mask, radius),
    }
}

// Separable: a square max filter is a row max filter followed by a column one.
fn dilate_square(mask: &BinaryMask, r: usize) -> BinaryMask {
    let Dims { width: w, height: h } = mask.dims;
    let mut rows = vec![false; w * h];
    let mut prefix = vec![0usize; w.max(h) + 1];
    for y in 0..h {
        for x in 0..w {
            prefix[x + 1] = prefix[x] + mask.bits[y * w + x] as usize;
        }
        for x in 0..w {
            let lo = x.saturating_sub(r);
            let hi = (x + r + 1).min(w);
            rows[y * w + x] = prefix[hi] > prefix[lo];
        }
    }
    let mut out = vec![false; w * h];
    for x in 0..w {
        for y in 0..h {
            prefix[y + 1] = prefix[y] + rows[y * w + x] as usize;
        }
        for y in 0..h {
            let lo = y.saturating_sub(r);
            let hi = (y + r + 1).min(h);
            out[y * w + x] = prefix[hi] > prefix[lo];
        }
    }
    BinaryMask {
        dims: mask.dims,
        bits: out,
    }
}

fn dilate_disc(mask: &BinaryMask, r: usize) -> BinaryMask {
    let d = mask.dims;
    let r = r as isize;
    let offsets: Vec<(isize, isize)> = (-r..=r)
        .flat_map(|dy| (-r..=r).map(move |dx| (dx, dy)))
        .filter(|(dx, dy)| dx * dx + dy * dy <= r * r)
        .collect();
    let mut out = vec![false; d.len()];
    for (i, _) in mask.bits.iter().enumerate().filter(|(_, &b)| b) {
        let (x, y) = ((i % d.width) as isize, (i / d.width) as isize);
        for &(dx, dy) in &offsets {
            let (nx, ny) = (x + dx, y + dy);
            if nx >= 0 && ny >= 0 && (nx as usize) < d.width && (ny as usize) < d.height {
                out[ny as usize * d.width + nx as usize] = true;
            }
        }
    }
    BinaryMask { dims: d, bits: out }
}

/// Bit set iff value is strictly greater than `threshold`.
pub fn binarize(map: &GrayMap, threshold: f64) -> BinaryMask {
    BinaryMask {
        dims: map.dims,
        bits: map.values.iter().map(|&v| v > threshold).collect(),
    }
}

/// Rasterizes the perimeter of a circle as a closed barrier curve.
///
/// The ring is the inner 4-boundary of the digital disc
/// `{p : |p - center| <= radius}`: disc pixels with at least one 4-neighbour
/// outside the disc. Any 4-path leaving the disc has to step through such a
/// pixel, so the ring blocks 4-connected flood fill. Pixels outside the image
/// are clipped; the image border closes any clipped arc.
pub fn rasterize_circle(center: Point, radius: f64, dims: Dims) -> Result<BinaryMask> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::invalid(format!("circle radius must be > 0, got {radius}")));
    }
    dims.check_point(center)?;
    let mut mask = BinaryMask::empty(dims);
    let (cx, cy) = (center.x as i64, center.y as i64);
    let r2 = radius * radius;
    let inside = |x: i64, y: i64| {
        let (dx, dy) = ((x - cx) as f64, (y - cy) as f64);
        dx * dx + dy * dy <= r2
    };
    let reach = radius.floor() as i64 + 1;
    let y0 = (cy - reach).max(0);
    let y1 = (cy + reach).min(dims.height as i64 - 1);
    let x0 = (cx - reach).max(0);
    let x1 = (cx + reach).min(dims.width as i64 - 1);
    for y in y0..=y1 {
        for x in x0..=x1 {
            if inside(x, y)
                && (!inside(x + 1, y) || !inside(x - 1, y) || !inside(x, y + 1) || !inside(x, y - 1))
            {
                mask.bits[y as usize * dims.width + x as usize] = true;
            }
        }
    }
    Ok(mask)
}

/// 4-connected component labelling. Returns per-pixel labels (0 for unset
/// pixels, components numbered from 1 in row-major order of first pixel) and
/// the number of components.
pub fn label_components(mask: &BinaryMask) -> (Vec<u32>, u32) {
    let d = mask.dims;
    let mut labels = vec![0u32; d.len()];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..d.len() {
        if !mask.bits[start] || labels[start] != 0 {
            continue;
        }
        next += 1;
        labels[start] = next;
        queue.push_back(start);
        while let Some(i) = queue.pop_front() {
            for n in d.neighbors4(i) {
                if mask.bits[n] && labels[n] == 0 {
                    labels[n] = next;
                    queue.push_back(n);
                }
            }
        }
    }
    (labels, next)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_dilate(mask: &BinaryMask, r: isize) -> BinaryMask {
        let d = mask.dims();
        BinaryMask::from_fn(d.width, d.height, |p| {
            (-r..=r).any(|dy| {
                (-r..=r).any(|dx| {
                    let (x, y) = (p.x as isize + dx, p.y as isize + dy);
                    x >= 0
                        && y >= 0
                        && (x as usize) < d.width
                        && (y as usize) < d.height
                        && mask.get(Point::new(x as usize, y as usize))
                })
            })
        })
        .unwrap()
    }

    #[test]
    fn dilate_empty_stays_empty() {
        let m = BinaryMask::empty(Dims::new(12, 9).unwrap());
        assert_eq!(dilate(&m, 9).unwrap().count(), 0);
    }

    #[test]
    fn dilate_single_pixel_gives_block() {
        let mut m = BinaryMask::empty(Dims::new(11, 11).unwrap());
        m.set(Point::new(5, 5), true);
        let out = dilate(&m, 3).unwrap();
        let expected =
            BinaryMask::from_fn(11, 11, |p| (4..=6).contains(&p.x) && (4..=6).contains(&p.y))
                .unwrap();
        assert_eq!(out, expected);
    }

    #[test]
    fn dilate_rejects_bad_kernels() {
        let m = BinaryMask::empty(Dims::new(4, 4).unwrap());
        assert!(matches!(dilate(&m, 0), Err(Error::InvalidArgument(_))));
        assert!(matches!(dilate(&m, 10), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn dilate_matches_max_filter_exhaustively_on_small_masks() {
        // every 3x3 mask, plus all masks of a 4x2 strip, at several radii
        for (w, h) in [(3usize, 3usize), (4, 2)] {
            for bits in 0u32..(1 << (w * h)) {
                let m = BinaryMask::from_fn(w, h, |p| bits >> (p.y * w + p.x) & 1 == 1).unwrap();
                for r in 0..3 {
                    assert_eq!(
                        dilate_radius(&m, r, Footprint::Square),
                        brute_dilate(&m, r as isize)
                    );
                }
            }
        }
    }

    #[test]
    fn disc_dilation_of_point_is_euclidean_ball() {
        let mut m = BinaryMask::empty(Dims::new(15, 15).unwrap());
        m.set(Point::new(7, 7), true);
        let out = dilate_radius(&m, 4, Footprint::Disc);
        for y in 0..15 {
            for x in 0..15 {
                let d2 = (x as i64 - 7).pow(2) + (y as i64 - 7).pow(2);
                assert_eq!(out.get(Point::new(x, y)), d2 <= 16);
            }
        }
    }

    #[test]
    fn binarize_is_strict() {
        let map = GrayMap::new(2, 1, vec![0.4, 0.6]).unwrap();
        assert_eq!(binarize(&map, 0.5).bits(), &[false, true]);
        let half = GrayMap::filled(2, 2, 0.5).unwrap();
        assert_eq!(binarize(&half, 0.5).count(), 0);
        assert_eq!(binarize(&GrayMap::filled(3, 3, 1.0).unwrap(), 0.5).count(), 9);
        assert_eq!(binarize(&GrayMap::filled(3, 3, 0.0).unwrap(), 0.5).count(), 0);
    }

    #[test]
    fn circle_rejects_non_positive_radius() {
        let d = Dims::new(10, 10).unwrap();
        assert!(matches!(
            rasterize_circle(Point::new(5, 5), 0.0, d),
            Err(Error::InvalidArgument(_))
        ));
        assert!(rasterize_circle(Point::new(5, 5), -1.0, d).is_err());
        assert!(rasterize_circle(Point::new(10, 5), 2.0, d).is_err());
    }

    #[test]
    fn circle_ring_is_eight_connected() {
        let d = Dims::new(40, 40).unwrap();
        for r in [2.0, 3.5, 7.0, 12.3] {
            let ring = rasterize_circle(Point::new(20, 20), r, d).unwrap();
            // one 8-connected component
            let pts: Vec<usize> = (0..d.len()).filter(|&i| ring.bits()[i]).collect();
            let mut seen = vec![false; d.len()];
            let mut stack = vec![pts[0]];
            seen[pts[0]] = true;
            let mut n = 0;
            while let Some(i) = stack.pop() {
                n += 1;
                let (x, y) = ((i % 40) as i64, (i / 40) as i64);
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        let (nx, ny) = (x + dx, y + dy);
                        if (0..40).contains(&nx) && (0..40).contains(&ny) {
                            let j = (ny * 40 + nx) as usize;
                            if ring.bits()[j] && !seen[j] {
                                seen[j] = true;
                                stack.push(j);
                            }
                        }
                    }
                }
            }
            assert_eq!(n, pts.len(), "radius {r}");
        }
    }

    #[test]
    fn trimap_codes_round_trip_through_gray_image() {
        let t = Trimap::new(
            3,
            1,
            vec![Label::Background, Label::Uncertain, Label::Foreground],
        )
        .unwrap();
        let img = t.to_gray_image();
        assert_eq!(img.as_raw(), &[0, 128, 255]);
        assert_eq!(Trimap::from_gray_image(&img).unwrap(), t);
        let bad = GrayImage::from_raw(2, 1, vec![0, 7]).unwrap();
        assert!(Trimap::from_gray_image(&bad).is_err());
    }

    #[test]
    fn gray_map_rejects_out_of_range_values() {
        assert!(GrayMap::new(1, 1, vec![1.5]).is_err());
        assert!(GrayMap::new(1, 1, vec![f64::NAN]).is_err());
        assert!(GrayMap::new(2, 1, vec![0.5]).is_err());
        assert!(Dims::new(0, 3).is_err());
    }

    #[test]
    fn components_are_numbered_in_scan_order() {
        let m = BinaryMask::from_fn(5, 3, |p| p.x == 0 || p.x == 4 || (p.x == 2 && p.y == 1))
            .unwrap();
        let (labels, n) = label_components(&m);
        assert_eq!(n, 3);
        assert_eq!(labels[0], 1);
        assert_eq!(labels[4], 2);
        assert_eq!(labels[7], 3);
    }
}
