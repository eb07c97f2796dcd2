//! Face alignment: landmark ingestion and piecewise-affine warping of the
//! reference face onto the input face geometry.
//!
//! Landmarks follow a fixed 90-point ordering (see [`landmarks::canonical`]).
//! Each image adds eight border anchors (corners and edge midpoints) so the
//! triangulation covers the whole frame and the warp leaves no holes.

mod landmarks;
mod mesh;
mod warp;

use std::path::PathBuf;

use thiserror::Error;

pub use landmarks::{canonical, load_landmarks, parse_landmarks, LandmarkSet, Point, LANDMARK_COUNT};
pub use mesh::{border_anchors, build_mesh, TriangleMesh, MIN_TRIANGLE_AREA};
pub use warp::{warp_field, warp_image, warp_labels, PiecewiseAffineWarp};

#[derive(Debug, Error)]
pub enum AlignError {
    #[error("cannot read landmark file {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("malformed landmark file: {0}")]
    Malformed(String),
    #[error("expected {LANDMARK_COUNT} landmarks, found {found}")]
    PointCount { found: usize },
    #[error("landmark {index} at ({x}, {y}) lies outside the {width}x{height} image")]
    OutOfBounds {
        index: usize,
        x: f64,
        y: f64,
        width: usize,
        height: usize,
    },
    #[error("mesh vertices {first} and {second} coincide")]
    DuplicatePoint { first: usize, second: usize },
    #[error("degenerate triangle {vertices:?} with area {area:e}")]
    DegenerateTriangle { vertices: [usize; 3], area: f64 },
    #[error("triangulation failed: {0}")]
    Triangulation(String),
    #[error("source mesh has {source_count} vertices but destination has {destination}")]
    VertexMismatch {
        source_count: usize,
        destination: usize,
    },
}
