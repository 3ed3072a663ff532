//! Multi-view rendering of per-vertex sphere features and attention-pooled
//! joint regression/classification of gestational age.

pub mod data;
pub mod error;
pub mod eval;
pub mod geometry;
pub mod math;
pub mod model;
pub mod render;
pub mod rng;
pub mod train;

pub use error::{Error, Result};
pub use geometry::{FeatureMatrix, SubdivisionLevel, TriangleMesh};
pub use render::{Camera, CameraRig, FragmentMap, RenderConfig, ViewStack};
