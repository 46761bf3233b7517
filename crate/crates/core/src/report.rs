//! JSON report emitted per image. All top-level keys are always present;
//! optional sections are `null`.

use serde::{Deserialize, Serialize};

use crate::aggregation::AggregationResult;
use crate::camera::CameraIntrinsics;
use crate::config::{PriorProvenance, RunConfig};
use crate::geometry::VehiclePrior;
use crate::io::DetectionFormat;
use crate::pipeline::{Estimate, InstanceRecord};
use crate::resolution::{CropPlan, ScaleReport};
use crate::sensitivity::SensitivityReport;

pub const TOP_LEVEL_KEYS: [&str; 6] = [
    "meta",
    "instances",
    "aggregation",
    "scale",
    "crop_plan",
    "sensitivity",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub tool: String,
    pub version: String,
    pub input: Option<String>,
    pub format: Option<DetectionFormat>,
    pub orthophoto: bool,
    pub image_width: f64,
    pub image_height: f64,
    pub intrinsics: Option<CameraIntrinsics>,
    pub focal_px: Option<f64>,
    pub pitch_deg: f64,
    pub prior: VehiclePrior,
    pub prior_source: PriorProvenance,
    pub conf_threshold: f64,
    pub min_count: usize,
    pub category: String,
    pub dropped_category: usize,
}

impl Meta {
    pub fn new(cfg: &RunConfig, input: Option<String>, format: Option<DetectionFormat>) -> Self {
        Meta {
            tool: "uavscale".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            input,
            format,
            orthophoto: cfg.orthophoto,
            image_width: cfg.image_width,
            image_height: cfg.image_height,
            intrinsics: cfg.intrinsics,
            focal_px: cfg.intrinsics.map(|k| k.focal()),
            pitch_deg: cfg.pitch_deg,
            prior: cfg.prior,
            prior_source: cfg.prior_source,
            conf_threshold: cfg.filter.conf_threshold,
            min_count: cfg.filter.min_count,
            category: cfg.category.clone(),
            dropped_category: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub meta: Meta,
    pub instances: Vec<InstanceRecord>,
    pub aggregation: Option<AggregationResult>,
    pub scale: ScaleReport,
    pub crop_plan: Option<CropPlan>,
    pub sensitivity: Option<SensitivityReport>,
}

impl Report {
    pub fn new(meta: Meta, estimate: Estimate) -> Self {
        Report {
            meta,
            instances: estimate.instances,
            aggregation: estimate.aggregation,
            scale: estimate.report,
            crop_plan: None,
            sensitivity: None,
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}
