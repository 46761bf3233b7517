//! Altitude and ground resolution from the global scale, scale-adaptive
//! satellite crop planning, and the localization success test.

use serde::{Deserialize, Serialize};

use crate::aggregation::AggregationResult;
use crate::camera::{CameraIntrinsics, CameraPose};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleReport {
    pub n_detections: usize,
    pub n_valid: usize,
    pub n_inliers: usize,
    #[serde(flatten)]
    pub status: ScaleStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum ScaleStatus {
    Ok {
        /// Nadir-equivalent scale ŝ, meters per pixel.
        global_scale: f64,
        /// `ŝ · f`; absent for orthophotos, which have no focal length.
        altitude_m: Option<f64>,
        /// Average ground resolution `ŝ / |sin θ|`, meters per pixel.
        avg_resolution: f64,
    },
    InsufficientAnchors,
}

impl ScaleReport {
    pub fn insufficient(n_detections: usize, n_valid: usize) -> Self {
        ScaleReport {
            n_detections,
            n_valid,
            n_inliers: 0,
            status: ScaleStatus::InsufficientAnchors,
        }
    }

    pub fn is_ok(&self) -> bool {
        matches!(self.status, ScaleStatus::Ok { .. })
    }

    pub fn global_scale(&self) -> Option<f64> {
        match self.status {
            ScaleStatus::Ok { global_scale, .. } => Some(global_scale),
            ScaleStatus::InsufficientAnchors => None,
        }
    }

    pub fn altitude_m(&self) -> Option<f64> {
        match self.status {
            ScaleStatus::Ok { altitude_m, .. } => altitude_m,
            ScaleStatus::InsufficientAnchors => None,
        }
    }

    pub fn avg_resolution(&self) -> Option<f64> {
        match self.status {
            ScaleStatus::Ok { avg_resolution, .. } => Some(avg_resolution),
            ScaleStatus::InsufficientAnchors => None,
        }
    }
}

pub fn resolve_scale(
    agg: &AggregationResult,
    intr: &CameraIntrinsics,
    pose: &CameraPose,
    n_detections: usize,
) -> ScaleReport {
    let s = agg.global_scale;
    ScaleReport {
        n_detections,
        n_valid: agg.n_valid,
        n_inliers: agg.n_inliers,
        status: ScaleStatus::Ok {
            global_scale: s,
            altitude_m: Some(s * intr.focal()),
            avg_resolution: s / pose.pitch().sin().abs(),
        },
    }
}

/// Orthophotos are already nadir-projected: the resolution is the scale and
/// there is no altitude.
pub fn resolve_orthophoto(agg: &AggregationResult, n_detections: usize) -> ScaleReport {
    ScaleReport {
        n_detections,
        n_valid: agg.n_valid,
        n_inliers: agg.n_inliers,
        status: ScaleStatus::Ok {
            global_scale: agg.global_scale,
            altitude_m: None,
            avg_resolution: agg.global_scale,
        },
    }
}

/// Axis-aligned search region on the satellite map, in map pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MapBounds {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

impl MapBounds {
    pub fn new(x: u32, y: u32, width: u32, height: u32) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument("map bounds are empty".into()));
        }
        Ok(MapBounds {
            x,
            y,
            width,
            height,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub x: u32,
    pub y: u32,
    pub size: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CropPlan {
    /// Fractional crop side `L_met / GSD_sat`, satellite pixels.
    pub crop_size_px: f64,
    /// Ground footprint `r · W_img` of the UAV image width, meters.
    pub footprint_m: f64,
    pub stride_px: f64,
    pub gsd_sat: f64,
    /// Set when the crop does not fit the map and a single centered window
    /// was emitted instead of a grid.
    pub oversized: bool,
    /// Row-major.
    pub windows: Vec<Window>,
}

/// Origins along one axis: a 50%-stride grid whose last window is clamped to
/// abut the far edge.
fn axis_origins(start: u32, extent: u32, size: u32, stride: f64) -> Vec<u32> {
    let span = (extent - size) as f64;
    let steps = if span <= 0.0 {
        0
    } else {
        (span / stride - 1e-9).ceil() as u32
    };
    (0..=steps)
        .map(|k| {
            let off = ((k as f64) * stride).round().min(span) as u32;
            start + off
        })
        .collect()
}

pub fn plan_crops(
    report: &ScaleReport,
    uav_width_px: f64,
    map: &MapBounds,
    gsd_sat: f64,
) -> Result<CropPlan> {
    let r = report.avg_resolution().ok_or_else(|| {
        Error::InvalidArgument("cannot plan crops without a resolved scale".into())
    })?;
    crop_plan_for_resolution(r, uav_width_px, map, gsd_sat)
}

pub fn crop_plan_for_resolution(
    resolution: f64,
    uav_width_px: f64,
    map: &MapBounds,
    gsd_sat: f64,
) -> Result<CropPlan> {
    if !(gsd_sat > 0.0) || !gsd_sat.is_finite() {
        return Err(Error::InvalidArgument(format!("gsd_sat {gsd_sat}")));
    }
    if !(resolution > 0.0) || !(uav_width_px > 0.0) {
        return Err(Error::InvalidArgument(
            "resolution and UAV width must be positive".into(),
        ));
    }
    if map.width == 0 || map.height == 0 {
        return Err(Error::InvalidArgument("map bounds are empty".into()));
    }
    let footprint_m = resolution * uav_width_px;
    let crop_size_px = footprint_m / gsd_sat;
    let stride_px = 0.5 * crop_size_px;
    let size = crop_size_px.round().max(1.0);

    if size > map.width as f64 || size > map.height as f64 {
        let side = map.width.min(map.height);
        let window = Window {
            x: map.x + (map.width - side) / 2,
            y: map.y + (map.height - side) / 2,
            size: side,
        };
        return Ok(CropPlan {
            crop_size_px,
            footprint_m,
            stride_px,
            gsd_sat,
            oversized: true,
            windows: vec![window],
        });
    }

    let size = size as u32;
    let xs = axis_origins(map.x, map.width, size, stride_px);
    let ys = axis_origins(map.y, map.height, size, stride_px);
    let windows = ys
        .iter()
        .flat_map(|&y| xs.iter().map(move |&x| Window { x, y, size }))
        .collect();
    Ok(CropPlan {
        crop_size_px,
        footprint_m,
        stride_px,
        gsd_sat,
        oversized: false,
        windows,
    })
}

/// A prediction counts as a success when it lands strictly closer than
/// `√2 · fov_radius_m` to the true position.
pub fn localization_success(
    pred_center: [f64; 2],
    true_center: [f64; 2],
    fov_radius_m: f64,
) -> Result<bool> {
    if !(fov_radius_m > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "FoV radius {fov_radius_m} must be positive"
        )));
    }
    let d = (pred_center[0] - true_center[0]).hypot(pred_center[1] - true_center[1]);
    Ok(d < std::f64::consts::SQRT_2 * fov_radius_m)
}
