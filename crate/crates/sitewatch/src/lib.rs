//! Deterministic building blocks for monitoring building-construction progress
//! from satellite imagery.
//!
//! The crate covers everything in the monitoring pipeline that is *not* a
//! learned model: model inference is abstracted behind
//! [`pseudolabel::ModelInterface`] and deterministic mock implementations, so
//! the full pipeline runs and is testable end to end without any weights.
//!
//! The pipeline stages are:
//!
//! 1. **raster** – scene ingestion (PNG + metadata sidecar), tiling with
//!    overlap, resolution degradation, and stitching per-tile probabilities
//!    back into scene space.
//! 2. **annotations** – the seven-stage construction taxonomy, bounding-box
//!    and mask label types, polygon rasterization, and the on-disk dataset
//!    manifest.
//! 3. **postprocess** – greedy NMS, Soft-NMS, horizontal-flip TTA merging,
//!    k-fold ensembling, and binarization of probability grids.
//! 4. **metrics** – mask IoU, the symmetric Lovász hinge loss with analytic
//!    gradient, detection matching, precision/recall, average precision, and
//!    the log-linear learning-curve fit.
//! 5. **height** – shadow-length measurement by ray casting, the
//!    `height = shadow_length × tan(sun elevation)` estimate, floor counts,
//!    and the NIR-threshold shadow baseline.
//! 6. **progress** – fusion of per-stage evidence through the stage DAG into
//!    a resolved stage and a total-progress percentage.
//! 7. **pseudolabel** – the semi-supervised labeling loop over the pluggable
//!    model interface.
//!
//! [`pipeline`] wires the stages into the CLI commands exposed by the
//! `sitewatch` binary; the `examples/` directory has one runnable program per
//! capability.

pub mod annotations;
pub mod error;
pub mod grid;
pub mod height;
pub mod metrics;
pub mod pipeline;
pub mod postprocess;
pub mod progress;
pub mod pseudolabel;
pub mod raster;

pub use error::{Error, Result};
pub use grid::Grid;
