//! Pinhole camera intrinsics and the pitch-only camera pose.
//!
//! Pixel coordinates follow the usual image convention: origin at the top-left
//! corner, +u to the right, +v downward. Camera coordinates are x right, y down,
//! z along the optical axis.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "IntrinsicsFields", into = "IntrinsicsFields")]
pub struct CameraIntrinsics {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    width: f64,
    height: f64,
}

#[derive(Serialize, Deserialize)]
struct IntrinsicsFields {
    fx: f64,
    fy: f64,
    cx: f64,
    cy: f64,
    image_width: f64,
    image_height: f64,
}

impl TryFrom<IntrinsicsFields> for CameraIntrinsics {
    type Error = Error;

    fn try_from(f: IntrinsicsFields) -> Result<Self> {
        CameraIntrinsics::new(f.fx, f.fy, f.cx, f.cy, f.image_width, f.image_height)
    }
}

impl From<CameraIntrinsics> for IntrinsicsFields {
    fn from(k: CameraIntrinsics) -> Self {
        IntrinsicsFields {
            fx: k.fx,
            fy: k.fy,
            cx: k.cx,
            cy: k.cy,
            image_width: k.width,
            image_height: k.height,
        }
    }
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: f64, height: f64) -> Result<Self> {
        let all = [fx, fy, cx, cy, width, height];
        if all.iter().any(|x| !x.is_finite()) {
            return Err(Error::InvalidIntrinsics("non-finite parameter".into()));
        }
        if fx <= 0.0 || fy <= 0.0 {
            return Err(Error::InvalidIntrinsics(format!(
                "focal lengths must be positive (fx={fx}, fy={fy})"
            )));
        }
        if width <= 0.0 || height <= 0.0 {
            return Err(Error::InvalidIntrinsics(format!(
                "image size must be positive ({width}x{height})"
            )));
        }
        if !(0.0..=width).contains(&cx) || !(0.0..=height).contains(&cy) {
            return Err(Error::InvalidIntrinsics(format!(
                "principal point ({cx}, {cy}) outside the {width}x{height} image"
            )));
        }
        Ok(CameraIntrinsics {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        })
    }

    /// Square-pixel camera with the principal point at the image center.
    pub fn centered(focal: f64, width: f64, height: f64) -> Result<Self> {
        Self::new(focal, focal, width / 2.0, height / 2.0, width, height)
    }

    pub fn fx(&self) -> f64 {
        self.fx
    }

    pub fn fy(&self) -> f64 {
        self.fy
    }

    pub fn cx(&self) -> f64 {
        self.cx
    }

    pub fn cy(&self) -> f64 {
        self.cy
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    /// Effective focal length `(fx + fy) / 2`, the only focal length the
    /// estimator uses.
    pub fn focal(&self) -> f64 {
        (self.fx + self.fy) / 2.0
    }

    /// The 3x3 calibration matrix, row-major.
    pub fn matrix(&self) -> [[f64; 3]; 3] {
        [
            [self.fx, 0.0, self.cx],
            [0.0, self.fy, self.cy],
            [0.0, 0.0, 1.0],
        ]
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        (0.0..=self.width).contains(&u) && (0.0..=self.height).contains(&v)
    }

    /// Same camera with both focal lengths shifted by `delta` pixels.
    pub fn with_focal_offset(&self, delta: f64) -> Result<Self> {
        Self::new(
            self.fx + delta,
            self.fy + delta,
            self.cx,
            self.cy,
            self.width,
            self.height,
        )
    }
}

/// Camera pitch θ in radians; −π/2 looks straight down. Roll is zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PoseFields", into = "PoseFields")]
pub struct CameraPose {
    pitch: f64,
}

#[derive(Serialize, Deserialize)]
struct PoseFields {
    pitch_rad: f64,
}

impl TryFrom<PoseFields> for CameraPose {
    type Error = Error;

    fn try_from(f: PoseFields) -> Result<Self> {
        CameraPose::new(f.pitch_rad)
    }
}

impl From<CameraPose> for PoseFields {
    fn from(p: CameraPose) -> Self {
        PoseFields { pitch_rad: p.pitch }
    }
}

impl CameraPose {
    pub fn new(pitch_rad: f64) -> Result<Self> {
        if !pitch_rad.is_finite() || pitch_rad <= -std::f64::consts::PI || pitch_rad >= 0.0 {
            return Err(Error::InvalidPose(format!(
                "pitch {pitch_rad} rad must lie in (-pi, 0)"
            )));
        }
        if pitch_rad.sin().abs() < 1e-9 {
            return Err(Error::InvalidPose("camera is horizontal".into()));
        }
        Ok(CameraPose { pitch: pitch_rad })
    }

    pub fn from_degrees(pitch_deg: f64) -> Result<Self> {
        Self::new(pitch_deg.to_radians())
    }

    pub fn nadir() -> Self {
        CameraPose {
            pitch: -std::f64::consts::FRAC_PI_2,
        }
    }

    pub fn pitch(&self) -> f64 {
        self.pitch
    }

    pub fn pitch_degrees(&self) -> f64 {
        self.pitch.to_degrees()
    }

    /// World "up" expressed in camera coordinates (x right, y down, z forward).
    ///
    /// For a camera pitched down by −θ the optical axis has a downward
    /// component, so up·z = sinθ < 0, and the image +y axis tilts away from
    /// the sky, giving up·y = −cosθ. Only the absolute value of the dot
    /// product with a viewing ray enters the elevation angle, so the overall
    /// sign is immaterial; the relative sign of the y and z terms is not.
    pub fn ground_normal(&self) -> [f64; 3] {
        [0.0, -self.pitch.cos(), self.pitch.sin()]
    }
}
