//! End-to-end estimation for one image: reliability filter, per-instance
//! scales, IQR aggregation and resolution.

use serde::{Deserialize, Serialize};

use crate::aggregation::{
    filter_detections, iqr_aggregate, AggregationResult, FilterConfig, Filtered,
};
use crate::camera::{CameraIntrinsics, CameraPose};
use crate::detection::OrientedDetection;
use crate::error::{Error, Result};
use crate::geometry::{
    effective_dims, instance_scale, naive_instance_scale, relative_orientation, viewing_geometry,
    EffectiveDims, InstanceScale, VehiclePrior, ViewingGeometry,
};
use crate::resolution::{resolve_orthophoto, resolve_scale, ScaleReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Imaging {
    Perspective {
        intrinsics: CameraIntrinsics,
        pose: CameraPose,
    },
    /// Nadir-projected map: every pixel is seen straight down and the
    /// vehicle height never shows.
    Orthophoto { width: f64, height: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScaleModel {
    #[default]
    Decoupled,
    /// Box edges read as the vehicle size; ablation baseline only.
    Naive,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimator {
    pub imaging: Imaging,
    pub prior: VehiclePrior,
    pub filter: FilterConfig,
    pub model: ScaleModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub detection_index: usize,
    pub center: [f64; 2],
    pub len_pix: f64,
    pub wid_pix: f64,
    pub confidence: f64,
    pub alpha_rad: Option<f64>,
    pub gamma_rad: Option<f64>,
    pub l_eff_m: Option<f64>,
    pub w_eff_m: Option<f64>,
    pub s_len: Option<f64>,
    pub s_wid: Option<f64>,
    pub s_fused: Option<f64>,
    pub inlier: bool,
    /// Why no scale was produced for this detection.
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    /// One record per detection that passed the confidence filter.
    pub instances: Vec<InstanceRecord>,
    pub aggregation: Option<AggregationResult>,
    pub report: ScaleReport,
}

impl Estimate {
    pub fn scales(&self) -> Vec<f64> {
        self.instances.iter().filter_map(|r| r.s_fused).collect()
    }
}

impl Estimator {
    pub fn new(imaging: Imaging, prior: VehiclePrior, filter: FilterConfig) -> Result<Self> {
        prior.validate()?;
        filter.validate()?;
        Ok(Estimator {
            imaging,
            prior,
            filter,
            model: ScaleModel::Decoupled,
        })
    }

    pub fn perspective(intrinsics: CameraIntrinsics, pose: CameraPose) -> Self {
        Estimator {
            imaging: Imaging::Perspective { intrinsics, pose },
            prior: VehiclePrior::default(),
            filter: FilterConfig::default(),
            model: ScaleModel::Decoupled,
        }
    }

    pub fn orthophoto(width: f64, height: f64) -> Result<Self> {
        if !(width > 0.0 && height > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "orthophoto size {width}x{height}"
            )));
        }
        Ok(Estimator {
            imaging: Imaging::Orthophoto { width, height },
            prior: VehiclePrior::default(),
            filter: FilterConfig::default(),
            model: ScaleModel::Decoupled,
        })
    }

    pub fn with_model(mut self, model: ScaleModel) -> Self {
        self.model = model;
        self
    }

    pub fn with_pose(&self, pose: CameraPose) -> Result<Self> {
        match self.imaging {
            Imaging::Perspective { intrinsics, .. } => Ok(Estimator {
                imaging: Imaging::Perspective { intrinsics, pose },
                ..self.clone()
            }),
            Imaging::Orthophoto { .. } => Err(Error::InvalidArgument(
                "orthophotos have no camera pose".into(),
            )),
        }
    }

    pub fn with_intrinsics(&self, intrinsics: CameraIntrinsics) -> Result<Self> {
        match self.imaging {
            Imaging::Perspective { pose, .. } => Ok(Estimator {
                imaging: Imaging::Perspective { intrinsics, pose },
                ..self.clone()
            }),
            Imaging::Orthophoto { .. } => Err(Error::InvalidArgument(
                "orthophotos have no intrinsics".into(),
            )),
        }
    }

    /// Image width in pixels.
    pub fn image_width(&self) -> f64 {
        match self.imaging {
            Imaging::Perspective { intrinsics, .. } => intrinsics.width(),
            Imaging::Orthophoto { width, .. } => width,
        }
    }

    fn geometry(&self, det: &OrientedDetection) -> Result<(ViewingGeometry, EffectiveDims)> {
        match &self.imaging {
            Imaging::Perspective { intrinsics, pose } => {
                let g = viewing_geometry(intrinsics, pose, det)?;
                Ok((g, effective_dims(&self.prior, &g)))
            }
            Imaging::Orthophoto { width, height } => {
                let (w, h) = (*width, *height);
                if !(0.0..=w).contains(&det.center_u) || !(0.0..=h).contains(&det.center_v) {
                    return Err(Error::OutsideImage {
                        u: det.center_u,
                        v: det.center_v,
                        width: w,
                        height: h,
                    });
                }
                let center = CameraIntrinsics::centered(1.0, w, h)?;
                let g = ViewingGeometry::new(
                    std::f64::consts::FRAC_PI_2,
                    relative_orientation(&center, det),
                )?;
                Ok((g, effective_dims(&self.prior.flat(), &g)))
            }
        }
    }

    fn instance(&self, det: &OrientedDetection, idx: usize) -> InstanceRecord {
        let mut rec = InstanceRecord {
            detection_index: idx,
            center: det.center(),
            len_pix: det.len_pix,
            wid_pix: det.wid_pix,
            confidence: det.confidence,
            alpha_rad: None,
            gamma_rad: None,
            l_eff_m: None,
            w_eff_m: None,
            s_len: None,
            s_wid: None,
            s_fused: None,
            inlier: false,
            skipped: None,
        };
        let scale: Result<InstanceScale> = match self.model {
            ScaleModel::Decoupled => self.geometry(det).and_then(|(g, dims)| {
                rec.alpha_rad = Some(g.alpha());
                rec.gamma_rad = Some(g.gamma());
                rec.l_eff_m = Some(dims.l_eff_m);
                rec.w_eff_m = Some(dims.w_eff_m);
                instance_scale(det, &dims, &g, idx)
            }),
            ScaleModel::Naive => naive_instance_scale(det, &self.prior, idx),
        };
        match scale {
            Ok(s) => {
                rec.s_len = Some(s.s_len);
                rec.s_wid = Some(s.s_wid);
                rec.s_fused = Some(s.s_fused);
            }
            Err(e) => rec.skipped = Some(e.to_string()),
        }
        rec
    }

    /// Runs the full estimator on one image's detections.
    ///
    /// Detections whose scale cannot be computed (box center outside the
    /// frame, ray above the horizon) are recorded as skipped and do not count
    /// towards the minimum anchor number.
    pub fn estimate(&self, dets: &[OrientedDetection]) -> Result<Estimate> {
        let kept = match filter_detections(dets, &self.filter) {
            Filtered::Sufficient(idx) => idx,
            Filtered::InsufficientAnchors { n_valid } => {
                let instances = dets
                    .iter()
                    .enumerate()
                    .filter(|(_, d)| d.confidence > self.filter.conf_threshold)
                    .map(|(i, d)| self.instance(d, i))
                    .collect();
                return Ok(Estimate {
                    instances,
                    aggregation: None,
                    report: ScaleReport::insufficient(dets.len(), n_valid),
                });
            }
        };
        let mut instances: Vec<InstanceRecord> =
            kept.iter().map(|&i| self.instance(&dets[i], i)).collect();
        let positions: Vec<usize> = (0..instances.len())
            .filter(|&k| instances[k].s_fused.is_some())
            .collect();
        let scales: Vec<f64> = positions
            .iter()
            .filter_map(|&k| instances[k].s_fused)
            .collect();
        if scales.len() < self.filter.min_count {
            return Ok(Estimate {
                instances,
                aggregation: None,
                report: ScaleReport::insufficient(dets.len(), scales.len()),
            });
        }
        let mut agg = iqr_aggregate(&scales)?;
        for &p in &agg.inlier_indices {
            instances[positions[p]].inlier = true;
        }
        // report inliers as detection indices rather than list positions
        agg.inlier_indices = agg
            .inlier_indices
            .iter()
            .map(|&p| instances[positions[p]].detection_index)
            .collect();
        let report = match &self.imaging {
            Imaging::Perspective { intrinsics, pose } => {
                resolve_scale(&agg, intrinsics, pose, dets.len())
            }
            Imaging::Orthophoto { .. } => resolve_orthophoto(&agg, dets.len()),
        };
        Ok(Estimate {
            instances,
            aggregation: Some(agg),
            report,
        })
    }
}
