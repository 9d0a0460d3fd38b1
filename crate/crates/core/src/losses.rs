//! Training objectives as scalar kernels with analytic gradients.
//!
//! Each loss returns its value and the gradient with respect to the
//! prediction map, so an external trainer can plug them into its own
//! backward pass.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, Dims, GrayMap, Label, RasterImage, Trimap};

/// Predictions are clamped to `[EPS, 1 - EPS]` inside the logarithms.
pub const BCE_EPS: f64 = 1e-7;

/// A loss value and its gradient with respect to the prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct LossValue {
    pub value: f64,
    pub dims: Dims,
    pub gradient: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatedCrfParams {
    pub kernel_size: usize,
    pub sigma_pt: f64,
    /// On colours normalized to [0, 1].
    pub sigma_rgb: f64,
    /// Divide each pixel's kernel by its window mass (centre excluded).
    pub normalize_per_pixel: bool,
    /// Use squared distances in the exponent (a standard Gaussian) instead of
    /// plain Euclidean distances.
    pub squared_exponent: bool,
}

impl Default for GatedCrfParams {
    fn default() -> Self {
        GatedCrfParams {
            kernel_size: 5,
            sigma_pt: 3.0,
            sigma_rgb: 0.1,
            normalize_per_pixel: true,
            squared_exponent: false,
        }
    }
}

impl GatedCrfParams {
    pub fn validate(&self) -> Result<()> {
        if self.kernel_size < 3 || self.kernel_size.is_multiple_of(2) {
            return Err(Error::invalid(format!(
                "kernel_size must be odd and >= 3, got {}",
                self.kernel_size
            )));
        }
        for (name, v) in [("sigma_pt", self.sigma_pt), ("sigma_rgb", self.sigma_rgb)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LossWeights {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            alpha1: 1.0,
            alpha2: 1.0,
            alpha3: 1.0,
        }
    }
}

impl LossWeights {
    pub fn new(alpha1: f64, alpha2: f64, alpha3: f64) -> Result<Self> {
        let w = LossWeights { alpha1, alpha2, alpha3 };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.alpha1, self.alpha2, self.alpha3];
        if all.iter().any(|a| !(*a >= 0.0) || !a.is_finite()) {
            return Err(Error::invalid(format!("loss weights must be >= 0, got {all:?}")));
        }
        if all.iter().all(|&a| a == 0.0) {
            return Err(Error::invalid("loss weights must not all be zero"));
        }
        Ok(())
    }
}

fn bce_terms(pred: f64, target: f64) -> (f64, f64) {
    let e = pred.clamp(BCE_EPS, 1.0 - BCE_EPS);
    let value = -(target * e.ln() + (1.0 - target) * (1.0 - e).ln());
    // straight through the clamp
    let grad = (e - target) / (e * (1.0 - e));
    (value, grad)
}

/// Binary cross entropy summed over all pixels.
pub fn bce(pred: &GrayMap, target: &BinaryMask) -> Result<LossValue> {
    pred.dims().check_same(target.dims())?;
    let mut value = 0.0;
    let gradient = pred
        .values()
        .iter()
        .zip(target.bits())
        .map(|(&e, &y)| {
            let (v, g) = bce_terms(e, if y { 1.0 } else { 0.0 });
            value += v;
            g
        })
        .collect();
    Ok(LossValue {
        value,
        dims: pred.dims(),
        gradient,
    })
}

/// Binary cross entropy over the definite (foreground or background) pixels
/// of a trimap; uncertain pixels contribute nothing and get zero gradient.
pub fn partial_bce(pred: &GrayMap, label: &Trimap) -> Result<LossValue> {
    pred.dims().check_same(label.dims())?;
    let mut value = 0.0;
    let gradient = pred
        .values()
        .iter()
        .zip(label.labels())
        .map(|(&s, &l)| match l {
            Label::Uncertain => 0.0,
            Label::Foreground | Label::Background => {
                let target = if l == Label::Foreground { 1.0 } else { 0.0 };
                let (v, g) = bce_terms(s, target);
                value += v;
                g
            }
        })
        .collect();
    Ok(LossValue {
        value,
        dims: pred.dims(),
        gradient,
    })
}

/// Precomputed pairwise weights `f(i, j)` of the gated CRF loss for one
/// image, stored per pixel over the window offsets.
#[derive(Debug, Clone)]
pub struct GatedCrfKernel {
    dims: Dims,
    radius: usize,
    /// `weights[i * side² + o]` for window offset `o`; zero outside the image
    /// and at the centre.
    weights: Vec<f64>,
}

impl GatedCrfKernel {
    pub fn new(image: &RasterImage, params: &GatedCrfParams) -> Result<Self> {
        params.validate()?;
        let dims = image.dims();
        let min_side = dims.width.min(dims.height);
        if params.kernel_size >= 2 * min_side {
            return Err(Error::invalid(format!(
                "kernel_size {} is too large for a {}x{} image",
                params.kernel_size, dims.width, dims.height
            )));
        }
        let r = params.kernel_size / 2;
        let side = params.kernel_size;
        let rgb: Vec<[f64; 3]> = (0..dims.len())
            .map(|i| image.pixel(i).map(|c| c as f64 / 255.0))
            .collect();
        let (pt_denom, rgb_denom) = (
            2.0 * params.sigma_pt * params.sigma_pt,
            2.0 * params.sigma_rgb * params.sigma_rgb,
        );
        let mut weights = vec![0.0; dims.len() * side * side];
        for i in 0..dims.len() {
            let (x, y) = ((i % dims.width) as isize, (i / dims.width) as isize);
            let row = &mut weights[i * side * side..(i + 1) * side * side];
            for (o, slot) in row.iter_mut().enumerate() {
                let (dx, dy) = ((o % side) as isize - r as isize, (o / side) as isize - r as isize);
                let (nx, ny) = (x + dx, y + dy);
                if (dx == 0 && dy == 0)
                    || nx < 0
                    || ny < 0
                    || nx >= dims.width as isize
                    || ny >= dims.height as isize
                {
                    continue;
                }
                let j = ny as usize * dims.width + nx as usize;
                let pt2 = (dx * dx + dy * dy) as f64;
                let c2: f64 = (0..3).map(|c| (rgb[i][c] - rgb[j][c]).powi(2)).sum();
                let (dpt, dc) = if params.squared_exponent {
                    (pt2, c2)
                } else {
                    (pt2.sqrt(), c2.sqrt())
                };
                *slot = (-dpt / pt_denom - dc / rgb_denom).exp();
            }
            if params.normalize_per_pixel {
                let mass: f64 = row.iter().sum();
                if mass > 0.0 {
                    row.iter_mut().for_each(|v| *v /= mass);
                }
            }
        }
        Ok(GatedCrfKernel {
            dims,
            radius: r,
            weights,
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// `f(i, j)` for `j = i + (dx, dy)`; zero when `j` is outside the window
    /// or the image.
    pub fn weight(&self, i: usize, dx: isize, dy: isize) -> f64 {
        let r = self.radius as isize;
        if dx.abs() > r || dy.abs() > r {
            return 0.0;
        }
        let side = 2 * self.radius + 1;
        let o = (dy + r) as usize * side + (dx + r) as usize;
        self.weights[i * side * side + o]
    }

    fn neighbors(&self, i: usize) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        let side = 2 * self.radius + 1;
        let r = self.radius as isize;
        let w = self.dims.width as isize;
        let base = i * side * side;
        self.weights[base..base + side * side]
            .iter()
            .enumerate()
            .filter(|(_, &f)| f > 0.0)
            .map(move |(o, &f)| {
                let (dx, dy) = ((o % side) as isize - r, (o / side) as isize - r);
                let j = (i as isize + dy * w + dx) as usize;
                // offset of i as seen from j
                let back = side * side - 1 - o;
                (j, back, f)
            })
    }

    /// Per-pixel contributions `sum_{j in K_i} |s_i - s_j| f(i, j)`.
    pub fn terms(&self, pred: &GrayMap) -> Result<Vec<f64>> {
        self.dims.check_same(pred.dims())?;
        let s = pred.values();
        Ok((0..self.dims.len())
            .map(|i| self.neighbors(i).map(|(j, _, f)| (s[i] - s[j]).abs() * f).sum())
            .collect())
    }

    pub fn loss(&self, pred: &GrayMap) -> Result<LossValue> {
        let value = self.terms(pred)?.iter().sum();
        let s = pred.values();
        let side2 = (2 * self.radius + 1).pow(2);
        let gradient = (0..self.dims.len())
            .map(|i| {
                self.neighbors(i)
                    .map(|(j, back, f_ij)| {
                        let f_ji = self.weights[j * side2 + back];
                        sign(s[i] - s[j]) * (f_ij + f_ji)
                    })
                    .sum()
            })
            .collect();
        Ok(LossValue {
            value,
            dims: self.dims,
            gradient,
        })
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Gated CRF loss: L1 differences between window neighbours weighted by an
/// image-dependent Gaussian kernel.
pub fn gated_crf_loss(pred: &GrayMap, image: &RasterImage, params: &GatedCrfParams) -> Result<LossValue> {
    pred.dims().check_same(image.dims())?;
    GatedCrfKernel::new(image, params)?.loss(pred)
}

/// Everything the combined objective needs.
#[derive(Debug, Clone, Copy)]
pub struct LossInputs<'a> {
    pub edge_pred: &'a GrayMap,
    pub edge_target: &'a BinaryMask,
    pub saliency_pred: &'a GrayMap,
    pub trimap: &'a Trimap,
    pub image: &'a RasterImage,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TotalLoss {
    pub value: f64,
    pub bce: f64,
    pub partial_bce: f64,
    pub gated_crf: f64,
    /// Gradient with respect to the edge prediction (first term).
    pub edge_gradient: Vec<f64>,
    /// Gradient with respect to the saliency prediction (second and third terms).
    pub saliency_gradient: Vec<f64>,
}

/// `alpha1 * bce + alpha2 * partial_bce + alpha3 * gated_crf`.
pub fn total_loss(inputs: LossInputs<'_>, gcrf: &GatedCrfParams, weights: &LossWeights) -> Result<TotalLoss> {
    weights.validate()?;
    let l1 = bce(inputs.edge_pred, inputs.edge_target)?;
    let l2 = partial_bce(inputs.saliency_pred, inputs.trimap)?;
    let l3 = gated_crf_loss(inputs.saliency_pred, inputs.image, gcrf)?;
    let LossWeights { alpha1, alpha2, alpha3 } = *weights;
    Ok(TotalLoss {
        value: alpha1 * l1.value + alpha2 * l2.value + alpha3 * l3.value,
        bce: l1.value,
        partial_bce: l2.value,
        gated_crf: l3.value,
        edge_gradient: l1.gradient.iter().map(|g| alpha1 * g).collect(),
        saliency_gradient: l2
            .gradient
            .iter()
            .zip(&l3.gradient)
            .map(|(a, b)| alpha2 * a + alpha3 * b)
            .collect(),
    })
}
