//! Facial makeup transfer by layer decomposition.
//!
//! A reference face is warped onto the input face with a piecewise-affine
//! landmark mesh. Both faces are split in CIELAB into a structure layer
//! (edge-preserving WLS smoothing of lightness), a detail layer (the
//! residual) and a color layer (a, b). Detail is copied from the reference,
//! color is alpha-blended and the structure layer receives an illumination
//! correction. An optional soft-mask fusion keeps hair that overlaps the
//! forehead from picking up makeup.

pub mod align;
pub mod imgcore;
pub mod io;
pub mod layers;
pub mod masks;
pub mod pipeline;
pub mod preprocess;
pub mod synthetic;
pub mod transfer;

pub use imgcore::{lab_to_rgb, rgb_to_lab, LabImage, PixelCoord, RasterImage, ScalarField};
pub use pipeline::{run_in_memory, run_pipeline, FaceBundle, PipelineConfig, PipelineError, PipelineReport, Settings, Stage};

/// Crate version, reported by the service health probe.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
