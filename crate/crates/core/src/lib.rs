//! Synthetic event-camera face datasets.
//!
//! Still face images are moved by a random planar camera trajectory, the
//! resulting video is turned into DVS events, events are packed into Temporal
//! Binary Representation frames, and landmark-derived face/eye boxes follow
//! the motion into per-frame labels. A detection scorer closes the loop.
//!
//! Numeric code is generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases below fix it to `f64`.

// `!(x > 0.0)` checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bbox;
pub mod config;
pub mod dataset;
pub mod error;
#[cfg(feature = "fixtures")]
pub mod fixtures;
pub mod formats;
pub mod geometry;
pub mod metrics;
pub mod pipeline;
pub mod raster;
pub mod representation;
pub mod scalar;
pub mod simulator;

pub use bbox::{BBox, ClassId};
pub use config::{CameraConfig, PipelineConfig};
pub use dataset::{
    Annotation, AnnotationSet, BoxClassConfig, LandmarkSet, Manifest, ManifestEntry,
};
pub use error::{Error, FormatError, LineError, Result};
pub use geometry::{BorderMode, CameraPose, Homography, Intrinsics, MotionConfig};
pub use metrics::{Detection, EvalConfig, MetricsReport};
pub use raster::GrayFrame;
pub use representation::{BinaryFrame, BitOrder, Normalizer, TbrConfig, TbrFrame};
pub use scalar::Scalar;
pub use simulator::{Event, EventStream, Polarity, SimConfig};

pub type BBox64 = BBox<f64>;
pub type CameraPose64 = CameraPose<f64>;
pub type Homography64 = Homography<f64>;
pub type Intrinsics64 = Intrinsics<f64>;
pub type GrayFrame64 = GrayFrame<f64>;
pub type TbrFrame64 = TbrFrame<f64>;
pub type Annotation64 = Annotation<f64>;
pub type AnnotationSet64 = AnnotationSet<f64>;
pub type Detection64 = Detection<f64>;
pub type MetricsReport64 = MetricsReport<f64>;
