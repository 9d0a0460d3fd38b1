//! Point-supervised salient object detection toolkit.
//!
//! Turns a handful of clicked points per image into training labels
//! (adaptive flood fill over an edge map), cleans first-round predictions
//! (non-salient suppression and dense CRF refinement), computes the training
//! losses with analytic gradients, and evaluates saliency maps with the
//! standard SOD metrics. An HTTP service backs the point-annotation UI.

pub mod config;
pub mod crf;
pub mod edges;
pub mod error;
pub mod floodfill;
pub mod imaging;
pub mod io;
pub mod losses;
pub mod metrics;
pub mod nss;
pub mod pipeline;
pub mod service;
pub mod synth;

pub use config::{DatasetManifest, PipelineConfig};
pub use crf::{crf_refine, DenseCrf, DenseCrfParams, UpdateSchedule};
pub use error::{Error, Result};
pub use floodfill::{
    build_barrier, fill_region, flood_fill, generate_pseudo_label, mask_radius, AdaptiveMaskConfig, BarrierField,
    FloodFillParams, PointAnnotation, PseudoLabel,
};
pub use imaging::{BinaryMask, Dims, Footprint, GrayMap, Label, Point, RasterImage, Trimap};
pub use losses::{bce, gated_crf_loss, partial_bce, total_loss, GatedCrfParams, LossValue, LossWeights};
pub use metrics::{evaluate_dataset, EvalOptions, EvalResult, PrCurve};
pub use nss::{nss_pipeline, NssParams, NssReport};
