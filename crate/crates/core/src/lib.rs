//! Absolute metric scale recovery for monocular UAV images.
//!
//! Small vehicles detected as oriented bounding boxes serve as metric anchors.
//! Each box yields a nadir-equivalent meters-per-pixel estimate after
//! correcting for the viewing angle and the visible vehicle height; the
//! estimates are filtered and robustly averaged into a single image scale,
//! from which the relative altitude, the average ground resolution and a
//! scale-matched satellite crop grid follow.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod aggregation;
pub mod camera;
pub mod config;
pub mod detection;
pub mod error;
pub mod geometry;
pub mod io;
pub mod pipeline;
pub mod report;
pub mod resolution;
pub mod sensitivity;
pub mod synth;

pub use aggregation::{
    filter_detections, iqr_aggregate, AggregationResult, FilterConfig, Filtered,
};
pub use camera::{CameraIntrinsics, CameraPose};
pub use config::{ConfigLayer, RunConfig};
pub use detection::OrientedDetection;
pub use error::{Error, Result};
pub use geometry::{
    effective_dims, instance_scale, naive_instance_scale, relative_orientation, viewing_elevation,
    viewing_geometry, EffectiveDims, InstanceScale, VehiclePrior, ViewingGeometry,
};
pub use pipeline::{Estimate, Estimator, Imaging, InstanceRecord, ScaleModel};
pub use report::{Meta, Report};
pub use resolution::{
    localization_success, plan_crops, resolve_scale, CropPlan, MapBounds, ScaleReport, ScaleStatus,
    Window,
};
pub use sensitivity::{
    focal_sensitivity, pitch_sensitivity, sensitivity_report, SensitivityReport,
};
