//! First-order sensitivity of the recovered resolution to pitch and focal
//! length errors, with central finite-difference checks against the full
//! estimator.
//!
//! Pitch: `r = ŝ / |sin θ|`, so `Δr/r ≈ Δŝ/ŝ − cot θ · Δθ`.
//!
//! Focal length: the closed forms use planar angles measured from the
//! optical axis, `α_p = atan((u − cx)/f)` and `γ_p = atan((v − cy)/f)`,
//! whose derivatives are `−(u − cx)/(f² + (u − cx)²)` and the analogue in v.
//! The estimator's own elevation angle is a 3D quantity; its complement
//! `π/2 − α` is the off-axis angle of the viewing ray. At nadir, on the
//! principal row (column), that off-axis angle is exactly `|α_p|` (`|γ_p|`),
//! so the finite-difference check differentiates the estimator there and
//! reports the gap elsewhere as is. The in-image orientation `γ` of the
//! estimator does not depend on `f` at all.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::camera::{CameraIntrinsics, CameraPose};
use crate::detection::OrientedDetection;
use crate::error::{Error, Result};
use crate::geometry::{relative_orientation, viewing_elevation};
use crate::pipeline::{Estimator, Imaging};

/// `−cot θ`, written as `tan(θ + π/2)` so that it is exactly zero at nadir.
pub fn pitch_sensitivity(pose: &CameraPose) -> f64 {
    (pose.pitch() + FRAC_PI_2).tan()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FocalSensitivity {
    pub d_alpha_per_d_f: f64,
    pub d_gamma_per_d_f: f64,
}

pub fn focal_sensitivity(intr: &CameraIntrinsics, u: f64, v: f64) -> Result<FocalSensitivity> {
    let f = intr.focal();
    if !(f > 0.0) {
        return Err(Error::InvalidIntrinsics(format!("focal length {f}")));
    }
    let du = u - intr.cx();
    let dv = v - intr.cy();
    Ok(FocalSensitivity {
        d_alpha_per_d_f: -du / (f * f + du * du),
        d_gamma_per_d_f: -dv / (f * f + dv * dv),
    })
}

/// Same coefficients through the planar angles: `−sin·cos / f`.
pub fn focal_sensitivity_trig(intr: &CameraIntrinsics, u: f64, v: f64) -> FocalSensitivity {
    let f = intr.focal();
    let (sa, ca) = ((u - intr.cx()) / f).atan().sin_cos();
    let (sg, cg) = ((v - intr.cy()) / f).atan().sin_cos();
    FocalSensitivity {
        d_alpha_per_d_f: -sa * ca / f,
        d_gamma_per_d_f: -sg * cg / f,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FdQuantity {
    /// `d ln r/dθ − d ln ŝ/dθ` of the estimator vs `−cot θ`.
    PitchResolution,
    /// Planar `atan((u − cx)/f)` vs its closed form.
    AlphaPlanar,
    /// Planar `atan((v − cy)/f)` vs its closed form.
    GammaPlanar,
    /// Signed off-axis angle `sgn(u − cx)·(π/2 − α)` of the estimator vs the
    /// alpha closed form.
    AlphaEstimator,
    /// Estimator's image-plane orientation γ vs the gamma closed form.
    GammaEstimator,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FdEntry {
    pub quantity: FdQuantity,
    /// Detection the entry belongs to; `None` for image-level checks.
    pub detection_index: Option<usize>,
    pub step: f64,
    pub analytic: f64,
    pub finite_difference: f64,
    pub abs_gap: f64,
    /// `abs_gap / |analytic|`; `None` when the analytic value is zero.
    pub rel_gap: Option<f64>,
}

impl FdEntry {
    fn new(
        quantity: FdQuantity,
        detection_index: Option<usize>,
        step: f64,
        analytic: f64,
        finite_difference: f64,
    ) -> Self {
        let abs_gap = (finite_difference - analytic).abs();
        FdEntry {
            quantity,
            detection_index,
            step,
            analytic,
            finite_difference,
            abs_gap,
            rel_gap: (analytic != 0.0).then(|| abs_gap / analytic.abs()),
        }
    }

    /// Relative gap within `rel_tol`, or absolute gap within `abs_tol` when
    /// the analytic value is zero.
    pub fn within(&self, rel_tol: f64, abs_tol: f64) -> bool {
        match self.rel_gap {
            Some(g) => g <= rel_tol,
            None => self.abs_gap <= abs_tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceSensitivity {
    pub detection_index: usize,
    pub d_alpha_per_d_f: f64,
    pub d_gamma_per_d_f: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SensitivityReport {
    pub pitch_rad: f64,
    pub d_r_rel_per_d_theta: f64,
    pub instances: Vec<InstanceSensitivity>,
    pub fd_check: Vec<FdEntry>,
    /// Set when the pitch check could not run because the estimator skipped
    /// the image.
    pub pitch_check_skipped: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FdSteps {
    pub theta_rad: f64,
    pub focal_px: f64,
}

impl Default for FdSteps {
    fn default() -> Self {
        FdSteps {
            theta_rad: 1e-3,
            focal_px: 1.0,
        }
    }
}

fn perspective(est: &Estimator) -> Result<(CameraIntrinsics, CameraPose)> {
    match est.imaging {
        Imaging::Perspective { intrinsics, pose } => Ok((intrinsics, pose)),
        Imaging::Orthophoto { .. } => Err(Error::InvalidArgument(
            "sensitivity analysis needs a perspective camera".into(),
        )),
    }
}

/// Central difference of `ln r − ln ŝ` with respect to pitch, or `None` when
/// any of the perturbed runs is skipped for lack of anchors.
pub fn pitch_fd_check(
    est: &Estimator,
    dets: &[OrientedDetection],
    step: f64,
) -> Result<Option<FdEntry>> {
    let (_, pose) = perspective(est)?;
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("step {step}")));
    }
    let run = |theta: f64| -> Result<Option<(f64, f64)>> {
        let report = est
            .with_pose(CameraPose::new(theta)?)?
            .estimate(dets)?
            .report;
        Ok(report
            .global_scale()
            .zip(report.avg_resolution())
            .map(|(s, r)| (s.ln(), r.ln())))
    };
    let th = pose.pitch();
    let (Some((s_hi, r_hi)), Some((s_lo, r_lo))) = (run(th + step)?, run(th - step)?) else {
        return Ok(None);
    };
    let d_log_r = (r_hi - r_lo) / (2.0 * step);
    let d_log_s = (s_hi - s_lo) / (2.0 * step);
    Ok(Some(FdEntry::new(
        FdQuantity::PitchResolution,
        None,
        step,
        pitch_sensitivity(&pose),
        d_log_r - d_log_s,
    )))
}

/// Finite-difference entries for the focal-length coefficients at pixel
/// `(u, v)`.
pub fn focal_fd_check(
    intr: &CameraIntrinsics,
    pose: &CameraPose,
    det: &OrientedDetection,
    detection_index: Option<usize>,
    step: f64,
) -> Result<Vec<FdEntry>> {
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!("step {step}")));
    }
    let (u, v) = (det.center_u, det.center_v);
    let analytic = focal_sensitivity(intr, u, v)?;
    let hi = intr.with_focal_offset(step)?;
    let lo = intr.with_focal_offset(-step)?;
    let cd = |g: &dyn Fn(&CameraIntrinsics) -> Result<f64>| -> Result<f64> {
        Ok((g(&hi)? - g(&lo)?) / (2.0 * step))
    };

    let planar_a = cd(&|k| Ok(((u - k.cx()) / k.focal()).atan()))?;
    let planar_g = cd(&|k| Ok(((v - k.cy()) / k.focal()).atan()))?;
    let sign = if u < intr.cx() { -1.0 } else { 1.0 };
    let off_axis = cd(&|k| Ok(sign * (FRAC_PI_2 - viewing_elevation(k, pose, u, v)?)))?;
    let gamma = cd(&|k| Ok(relative_orientation(k, det)))?;

    Ok(vec![
        FdEntry::new(
            FdQuantity::AlphaPlanar,
            detection_index,
            step,
            analytic.d_alpha_per_d_f,
            planar_a,
        ),
        FdEntry::new(
            FdQuantity::GammaPlanar,
            detection_index,
            step,
            analytic.d_gamma_per_d_f,
            planar_g,
        ),
        FdEntry::new(
            FdQuantity::AlphaEstimator,
            detection_index,
            step,
            analytic.d_alpha_per_d_f,
            off_axis,
        ),
        FdEntry::new(
            FdQuantity::GammaEstimator,
            detection_index,
            step,
            analytic.d_gamma_per_d_f,
            gamma,
        ),
    ])
}

/// Coefficients for every detection the estimator kept, plus the finite
/// difference checks.
pub fn sensitivity_report(
    est: &Estimator,
    dets: &[OrientedDetection],
    steps: FdSteps,
) -> Result<SensitivityReport> {
    let (intr, pose) = perspective(est)?;
    let estimate = est.estimate(dets)?;
    let mut instances = Vec::new();
    let mut fd_check = Vec::new();
    let pitch = pitch_fd_check(est, dets, steps.theta_rad)?;
    let pitch_check_skipped = pitch.is_none();
    fd_check.extend(pitch);
    for rec in estimate.instances.iter().filter(|r| r.s_fused.is_some()) {
        let det = &dets[rec.detection_index];
        let c = focal_sensitivity(&intr, det.center_u, det.center_v)?;
        instances.push(InstanceSensitivity {
            detection_index: rec.detection_index,
            d_alpha_per_d_f: c.d_alpha_per_d_f,
            d_gamma_per_d_f: c.d_gamma_per_d_f,
        });
        fd_check.extend(focal_fd_check(
            &intr,
            &pose,
            det,
            Some(rec.detection_index),
            steps.focal_px,
        )?);
    }
    Ok(SensitivityReport {
        pitch_rad: pose.pitch(),
        d_r_rel_per_d_theta: pitch_sensitivity(&pose),
        instances,
        fd_check,
        pitch_check_skipped,
    })
}
