//! Per-vehicle viewing geometry and the decoupled stereoscopic projection
//! model.
//!
//! A vehicle is treated as a rigid cuboid resting on the ground. Its length
//! (and width) is split into a radial component, measured along the image
//! direction pointing away from the principal point, and a tangential
//! component. Only the radial component is foreshortened by the viewing
//! elevation and inflated by the visible side of the vehicle:
//!
//! ```text
//! T_rad = (L sin α + H cos α) cos γ
//! T_tan = L sin γ
//! L_eff = sqrt(T_rad² + T_tan²)
//! ```
//!
//! Multiplying the effective size by `sin α` removes the slant-range factor,
//! giving a nadir-equivalent meters-per-pixel scale for each box edge.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::camera::{CameraIntrinsics, CameraPose};
use crate::detection::OrientedDetection;
use crate::error::{Error, Result};

/// Metric size prior for the anchor class, in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehiclePrior {
    pub length_m: f64,
    pub width_m: f64,
    pub height_m: f64,
}

impl Default for VehiclePrior {
    /// Small-vehicle priors: 4.4 m x 1.9 m x 1.6 m.
    fn default() -> Self {
        VehiclePrior {
            length_m: 4.4,
            width_m: 1.9,
            height_m: 1.6,
        }
    }
}

impl VehiclePrior {
    pub fn new(length_m: f64, width_m: f64, height_m: f64) -> Result<Self> {
        let p = VehiclePrior {
            length_m,
            width_m,
            height_m,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.length_m.is_finite()
            && self.width_m.is_finite()
            && self.height_m.is_finite()
            && self.length_m > self.width_m
            && self.width_m > 0.0
            && self.height_m >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidPrior(format!(
                "need length > width > 0 and height >= 0, got {} x {} x {}",
                self.length_m, self.width_m, self.height_m
            )))
        }
    }

    /// Same footprint with the height term disabled (planar targets).
    pub fn flat(&self) -> Self {
        VehiclePrior {
            height_m: 0.0,
            ..*self
        }
    }

    pub fn scaled(&self, k: f64) -> Self {
        VehiclePrior {
            length_m: self.length_m * k,
            width_m: self.width_m * k,
            height_m: self.height_m * k,
        }
    }
}

/// Viewing elevation `alpha` (π/2 at nadir) and the relative orientation
/// `gamma` between the vehicle axis and the radial image direction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewingGeometry {
    alpha_rad: f64,
    gamma_rad: f64,
}

impl ViewingGeometry {
    pub fn new(alpha_rad: f64, gamma_rad: f64) -> Result<Self> {
        if !(alpha_rad > 0.0 && alpha_rad <= FRAC_PI_2) {
            return Err(Error::InvalidArgument(format!(
                "elevation {alpha_rad} rad outside (0, pi/2]"
            )));
        }
        if !(0.0..=FRAC_PI_2).contains(&gamma_rad) {
            return Err(Error::InvalidArgument(format!(
                "relative orientation {gamma_rad} rad outside [0, pi/2]"
            )));
        }
        Ok(ViewingGeometry {
            alpha_rad,
            gamma_rad,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha_rad
    }

    pub fn gamma(&self) -> f64 {
        self.gamma_rad
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveDims {
    pub l_eff_m: f64,
    pub w_eff_m: f64,
    pub t_rad_l: f64,
    pub t_tan_l: f64,
    pub t_rad_w: f64,
    pub t_tan_w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InstanceScale {
    pub s_len: f64,
    pub s_wid: f64,
    pub s_fused: f64,
    pub detection_index: usize,
}

impl InstanceScale {
    fn fuse(s_len: f64, s_wid: f64, detection_index: usize) -> Result<Self> {
        if !(s_len > 0.0 && s_wid > 0.0) || !s_len.is_finite() || !s_wid.is_finite() {
            return Err(Error::DegenerateDetection(format!(
                "non-positive scale candidates ({s_len}, {s_wid})"
            )));
        }
        Ok(InstanceScale {
            s_len,
            s_wid,
            s_fused: (s_len + s_wid) / 2.0,
            detection_index,
        })
    }
}

/// Elevation angle of the viewing ray through pixel `(u, v)`.
///
/// `sin α = |ray · n_up| / |ray|` with `ray = [u - cx, v - cy, f]`.
pub fn viewing_elevation(
    intr: &CameraIntrinsics,
    pose: &CameraPose,
    u: f64,
    v: f64,
) -> Result<f64> {
    let f = intr.focal();
    if !(f > 0.0) {
        return Err(Error::InvalidIntrinsics(format!("focal length {f}")));
    }
    if !intr.contains(u, v) {
        return Err(Error::OutsideImage {
            u,
            v,
            width: intr.width(),
            height: intr.height(),
        });
    }
    let ray = [u - intr.cx(), v - intr.cy(), f];
    let up = pose.ground_normal();
    let dot = ray[0] * up[0] + ray[1] * up[1] + ray[2] * up[2];
    // rays at or above the horizon never see the ground
    if dot >= 0.0 {
        return Err(Error::RayMissesGround { u, v });
    }
    let norm = (ray[0] * ray[0] + ray[1] * ray[1] + ray[2] * ray[2]).sqrt();
    Ok((dot.abs() / norm).min(1.0).asin())
}

/// Angle between the vehicle's long edge and the radial direction from the
/// principal point, folded into `[0, π/2]`.
///
/// Within one pixel of the principal point the radial direction is undefined
/// and the image +v axis is used instead.
pub fn relative_orientation(intr: &CameraIntrinsics, det: &OrientedDetection) -> f64 {
    let mut rad = [det.center_u - intr.cx(), det.center_v - intr.cy()];
    let mut norm = rad[0].hypot(rad[1]);
    if norm < 1.0 {
        rad = [0.0, 1.0];
        norm = 1.0;
    }
    let [ex, ey] = det.edge_dir;
    let cos = (rad[0] * ex + rad[1] * ey).abs() / (norm * ex.hypot(ey));
    cos.clamp(0.0, 1.0).acos()
}

pub fn viewing_geometry(
    intr: &CameraIntrinsics,
    pose: &CameraPose,
    det: &OrientedDetection,
) -> Result<ViewingGeometry> {
    let alpha = viewing_elevation(intr, pose, det.center_u, det.center_v)?;
    ViewingGeometry::new(alpha, relative_orientation(intr, det))
}

/// Effective projected metric length and width of the prior vehicle.
///
/// The width axis is perpendicular to the length axis, so it is decomposed
/// with `γ_W = π/2 − γ`.
pub fn effective_dims(prior: &VehiclePrior, geom: &ViewingGeometry) -> EffectiveDims {
    let (sa, ca) = geom.alpha().sin_cos();
    let decompose = |extent: f64, gamma: f64| {
        let (sg, cg) = gamma.sin_cos();
        let t_rad = (extent * sa + prior.height_m * ca) * cg;
        let t_tan = extent * sg;
        (t_rad, t_tan)
    };
    let (t_rad_l, t_tan_l) = decompose(prior.length_m, geom.gamma());
    let (t_rad_w, t_tan_w) = decompose(prior.width_m, FRAC_PI_2 - geom.gamma());
    EffectiveDims {
        l_eff_m: t_rad_l.hypot(t_tan_l),
        w_eff_m: t_rad_w.hypot(t_tan_w),
        t_rad_l,
        t_tan_l,
        t_rad_w,
        t_tan_w,
    }
}

pub fn instance_scale(
    det: &OrientedDetection,
    dims: &EffectiveDims,
    geom: &ViewingGeometry,
    detection_index: usize,
) -> Result<InstanceScale> {
    check_pixels(det)?;
    let sa = geom.alpha().sin();
    InstanceScale::fuse(
        dims.l_eff_m * sa / det.len_pix,
        dims.w_eff_m * sa / det.wid_pix,
        detection_index,
    )
}

/// Baseline that reads the box edges directly as the vehicle length and
/// width, with no viewing-angle or height correction.
pub fn naive_instance_scale(
    det: &OrientedDetection,
    prior: &VehiclePrior,
    detection_index: usize,
) -> Result<InstanceScale> {
    check_pixels(det)?;
    InstanceScale::fuse(
        prior.length_m / det.len_pix,
        prior.width_m / det.wid_pix,
        detection_index,
    )
}

fn check_pixels(det: &OrientedDetection) -> Result<()> {
    if det.len_pix > 0.0 && det.wid_pix > 0.0 {
        Ok(())
    } else {
        Err(Error::DegenerateDetection(format!(
            "pixel sides {} x {}",
            det.len_pix, det.wid_pix
        )))
    }
}
