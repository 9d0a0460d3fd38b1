//! Binary fully-connected CRF refinement of saliency maps by mean-field
//! inference.
//!
//! Unaries come from the saliency map (`-log s` for foreground,
//! `-log(1 - s)` for background). The pairwise term is a Potts penalty
//! weighted by an appearance kernel (position + colour) plus a smoothness
//! kernel (position only). Messages are computed by brute force over all
//! pixel pairs, so this is meant for small images; kernel factors are
//! tabulated to keep the inner loop free of `exp`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{Dims, GrayMap, RasterImage};

/// Saliency values are clamped to `[EPS, 1 - EPS]` before taking logs.
pub const SALIENCY_EPS: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UpdateSchedule {
    /// Row-major Gauss-Seidel updates; the free energy never increases.
    Sequential,
    /// All pixels updated from the previous sweep, then blended:
    /// `q <- (1 - lambda) q + lambda q_new`.
    DampedParallel { lambda: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenseCrfParams {
    pub iterations: usize,
    pub appearance_weight: f64,
    pub smoothness_weight: f64,
    pub sigma_spatial_app: f64,
    /// On the 0..255 channel scale.
    pub sigma_color: f64,
    pub sigma_spatial_smooth: f64,
    pub schedule: UpdateSchedule,
    /// 1 sums over every pixel. Larger values sum over a sub-grid of that
    /// stride (scaled by `stride²`), an approximation for bigger images.
    pub neighbor_stride: usize,
}

impl Default for DenseCrfParams {
    fn default() -> Self {
        DenseCrfParams {
            iterations: 10,
            appearance_weight: 4.0,
            smoothness_weight: 3.0,
            sigma_spatial_app: 49.0,
            sigma_color: 5.0,
            sigma_spatial_smooth: 3.0,
            schedule: UpdateSchedule::Sequential,
            neighbor_stride: 1,
        }
    }
}

impl DenseCrfParams {
    pub fn validate(&self) -> Result<()> {
        let sigmas = [
            ("sigma_spatial_app", self.sigma_spatial_app),
            ("sigma_color", self.sigma_color),
            ("sigma_spatial_smooth", self.sigma_spatial_smooth),
        ];
        for (name, v) in sigmas {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be > 0, got {v}")));
            }
        }
        for (name, v) in [
            ("appearance_weight", self.appearance_weight),
            ("smoothness_weight", self.smoothness_weight),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be >= 0, got {v}")));
            }
        }
        if let UpdateSchedule::DampedParallel { lambda } = self.schedule {
            if !(lambda > 0.0 && lambda < 1.0) {
                return Err(Error::invalid(format!("damping lambda must be in (0, 1), got {lambda}")));
            }
        }
        if self.neighbor_stride == 0 {
            return Err(Error::invalid("neighbor_stride must be >= 1"));
        }
        Ok(())
    }
}

/// Mean-field state for one (saliency, image) pair.
#[derive(Debug, Clone)]
pub struct DenseCrf {
    dims: Dims,
    params: DenseCrfParams,
    unary_fg: Vec<f64>,
    unary_bg: Vec<f64>,
    rgb: Vec<[i32; 3]>,
    spatial_app: Vec<f64>,
    spatial_smooth: Vec<f64>,
    color: Vec<f64>,
    /// `sum_j k(i, j)` for every pixel.
    kernel_mass: Vec<f64>,
    fg: Vec<f64>,
    bg: Vec<f64>,
}

impl DenseCrf {
    pub fn new(saliency: &GrayMap, image: &RasterImage, params: &DenseCrfParams) -> Result<Self> {
        params.validate()?;
        let dims = saliency.dims();
        dims.check_same(image.dims())?;
        let clamped: Vec<f64> = saliency
            .values()
            .iter()
            .map(|v| v.clamp(SALIENCY_EPS, 1.0 - SALIENCY_EPS))
            .collect();
        let unary_fg = clamped.iter().map(|s| -s.ln()).collect();
        let unary_bg = clamped.iter().map(|s| -(1.0 - s).ln()).collect();
        let bg = clamped.iter().map(|s| 1.0 - s).collect();
        let spatial = |sigma: f64| {
            let denom = 2.0 * sigma * sigma;
            (0..dims.height)
                .flat_map(|dy| (0..dims.width).map(move |dx| ((dx * dx + dy * dy) as f64, denom)))
                .map(|(d2, denom)| (-d2 / denom).exp())
                .collect::<Vec<_>>()
        };
        let cdenom = 2.0 * params.sigma_color * params.sigma_color;
        let color = (0..=3 * 255 * 255).map(|d2| (-(d2 as f64) / cdenom).exp()).collect();
        let rgb = (0..dims.len())
            .map(|i| image.pixel(i).map(|c| c as i32))
            .collect();
        let mut crf = DenseCrf {
            dims,
            params: *params,
            unary_fg,
            unary_bg,
            rgb,
            spatial_app: spatial(params.sigma_spatial_app),
            spatial_smooth: spatial(params.sigma_spatial_smooth),
            color,
            kernel_mass: Vec::new(),
            fg: clamped,
            bg,
        };
        let ones = vec![1.0; dims.len()];
        crf.kernel_mass = (0..dims.len())
            .into_par_iter()
            .map(|i| crf.weighted_sum(i, &ones))
            .collect();
        Ok(crf)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Current foreground marginals.
    pub fn fg(&self) -> &[f64] {
        &self.fg
    }

    /// Current background marginals.
    pub fn bg(&self) -> &[f64] {
        &self.bg
    }

    /// Pairwise kernel `k(i, j)`.
    #[inline]
    pub fn kernel(&self, i: usize, j: usize) -> f64 {
        let w = self.dims.width;
        let (xi, yi, xj, yj) = (i % w, i / w, j % w, j / w);
        let s = yi.abs_diff(yj) * w + xi.abs_diff(xj);
        let (a, b) = (self.rgb[i], self.rgb[j]);
        let d2 = (a[0] - b[0]).pow(2) + (a[1] - b[1]).pow(2) + (a[2] - b[2]).pow(2);
        self.params.appearance_weight * self.spatial_app[s] * self.color[d2 as usize]
            + self.params.smoothness_weight * self.spatial_smooth[s]
    }

    /// `sum_{j != i} k(i, j) q_j`. Within each row the terms at columns `c`
    /// and `w - 1 - c` are added first, which makes the result bit-identical
    /// under a left-right mirror of the problem.
    fn weighted_sum(&self, i: usize, q: &[f64]) -> f64 {
        let Dims { width: w, height: h } = self.dims;
        let stride = self.params.neighbor_stride;
        let term = |j: usize| if j == i { 0.0 } else { self.kernel(i, j) * q[j] };
        if stride == 1 {
            let mut total = 0.0;
            for y in 0..h {
                let row = y * w;
                let mut acc = 0.0;
                for c in 0..w / 2 {
                    acc += term(row + c) + term(row + w - 1 - c);
                }
                if w % 2 == 1 {
                    acc += term(row + w / 2);
                }
                total += acc;
            }
            total
        } else {
            let (xi, yi) = (i % w, i / w);
            let scale = (stride * stride) as f64;
            let mut total = 0.0;
            for y in (yi % stride..h).step_by(stride) {
                for x in (xi % stride..w).step_by(stride) {
                    total += term(y * w + x);
                }
            }
            total * scale
        }
    }

    /// Marginals of pixel `i` given the other pixels' current foreground
    /// marginals.
    fn update(&self, i: usize, q_fg: &[f64]) -> (f64, f64) {
        let a = self.weighted_sum(i, q_fg);
        // Potts: foreground pays for background neighbours and vice versa
        let logit_fg = -self.unary_fg[i] - (self.kernel_mass[i] - a);
        let logit_bg = -self.unary_bg[i] - a;
        let m = logit_fg.max(logit_bg);
        let (ef, eb) = ((logit_fg - m).exp(), (logit_bg - m).exp());
        (ef / (ef + eb), eb / (ef + eb))
    }

    /// One full sweep over every pixel.
    pub fn sweep(&mut self) {
        match self.params.schedule {
            UpdateSchedule::Sequential => {
                for i in 0..self.dims.len() {
                    let (f, b) = self.update(i, &self.fg);
                    self.fg[i] = f;
                    self.bg[i] = b;
                }
            }
            UpdateSchedule::DampedParallel { lambda } => {
                let fresh: Vec<(f64, f64)> = (0..self.dims.len())
                    .into_par_iter()
                    .map(|i| self.update(i, &self.fg))
                    .collect();
                for (i, (f, b)) in fresh.into_iter().enumerate() {
                    self.fg[i] = (1.0 - lambda) * self.fg[i] + lambda * f;
                    self.bg[i] = (1.0 - lambda) * self.bg[i] + lambda * b;
                }
            }
        }
    }

    /// Mean-field free energy of the current marginals:
    /// expected energy minus entropy.
    pub fn free_energy(&self) -> f64 {
        let n = self.dims.len();
        let xlogx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
        let mut unary = 0.0;
        for i in 0..n {
            unary += self.fg[i] * self.unary_fg[i] + self.bg[i] * self.unary_bg[i];
            unary += xlogx(self.fg[i]) + xlogx(self.bg[i]);
        }
        let pairwise: f64 = (0..n)
            .into_par_iter()
            .map(|i| {
                ((i + 1)..n)
                    .map(|j| {
                        self.kernel(i, j) * (self.fg[i] * self.bg[j] + self.bg[i] * self.fg[j])
                    })
                    .sum::<f64>()
            })
            .collect::<Vec<_>>()
            .into_iter()
            .sum();
        unary + pairwise
    }

    pub fn run(&mut self) {
        for _ in 0..self.params.iterations {
            self.sweep();
        }
    }

    pub fn foreground_map(&self) -> GrayMap {
        GrayMap::new(
            self.dims.width,
            self.dims.height,
            self.fg.iter().map(|v| v.clamp(0.0, 1.0)).collect(),
        )
        .expect("marginals lie in [0, 1]")
    }
}

/// Refines a saliency map and returns the foreground marginals.
pub fn crf_refine(saliency: &GrayMap, image: &RasterImage, params: &DenseCrfParams) -> Result<GrayMap> {
    let mut crf = DenseCrf::new(saliency, image, params)?;
    crf.run();
    Ok(crf.foreground_map())
}
