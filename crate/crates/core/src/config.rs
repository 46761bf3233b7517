//! Run configuration: a flat TOML file layered under command-line overrides.
//!
//! ```toml
//! fx = 1000.0            # px; fy defaults to fx
//! fy = 1000.0
//! cx = 320.0             # px; defaults to the image center
//! cy = 240.0
//! image_width = 640      # px, required
//! image_height = 480     # px, required
//! pitch_deg = -90.0      # default -90 (nadir)
//! length_m = 4.4         # vehicle prior
//! width_m = 1.9
//! height_m = 1.6
//! conf_threshold = 0.5
//! min_count = 5
//! gsd_sat = 0.3          # satellite map m/px, only for crop planning
//! category = "small-vehicle"
//! orthophoto = false
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::aggregation::FilterConfig;
use crate::camera::{CameraIntrinsics, CameraPose};
use crate::error::{Error, Result};
use crate::geometry::VehiclePrior;
use crate::pipeline::{Estimator, Imaging, ScaleModel};

pub const DEFAULT_CATEGORY: &str = "small-vehicle";

/// One configuration layer. Every key is optional; later layers win.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigLayer {
    pub fx: Option<f64>,
    pub fy: Option<f64>,
    pub cx: Option<f64>,
    pub cy: Option<f64>,
    pub image_width: Option<f64>,
    pub image_height: Option<f64>,
    pub pitch_deg: Option<f64>,
    pub length_m: Option<f64>,
    pub width_m: Option<f64>,
    pub height_m: Option<f64>,
    pub conf_threshold: Option<f64>,
    pub min_count: Option<usize>,
    pub gsd_sat: Option<f64>,
    pub category: Option<String>,
    pub orthophoto: Option<bool>,
}

impl ConfigLayer {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Fills every unset key from `fallback`.
    pub fn or(self, fallback: ConfigLayer) -> ConfigLayer {
        ConfigLayer {
            fx: self.fx.or(fallback.fx),
            fy: self.fy.or(fallback.fy),
            cx: self.cx.or(fallback.cx),
            cy: self.cy.or(fallback.cy),
            image_width: self.image_width.or(fallback.image_width),
            image_height: self.image_height.or(fallback.image_height),
            pitch_deg: self.pitch_deg.or(fallback.pitch_deg),
            length_m: self.length_m.or(fallback.length_m),
            width_m: self.width_m.or(fallback.width_m),
            height_m: self.height_m.or(fallback.height_m),
            conf_threshold: self.conf_threshold.or(fallback.conf_threshold),
            min_count: self.min_count.or(fallback.min_count),
            gsd_sat: self.gsd_sat.or(fallback.gsd_sat),
            category: self.category.or(fallback.category),
            orthophoto: self.orthophoto.or(fallback.orthophoto),
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("flat config always serializes")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Default,
    ConfigFile,
    Override,
    /// Forced by orthophoto mode.
    Orthophoto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PriorProvenance {
    pub length_m: Source,
    pub width_m: Source,
    pub height_m: Source,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Absent in orthophoto mode.
    pub intrinsics: Option<CameraIntrinsics>,
    pub image_width: f64,
    pub image_height: f64,
    pub pitch_deg: f64,
    /// Prior as used by the estimator (height zeroed for orthophotos).
    pub prior: VehiclePrior,
    pub prior_source: PriorProvenance,
    pub filter: FilterConfig,
    pub gsd_sat: Option<f64>,
    pub category: String,
    pub orthophoto: bool,
}

fn pick<T: Clone>(file: &Option<T>, over: &Option<T>) -> (Option<T>, Source) {
    match (over, file) {
        (Some(v), _) => (Some(v.clone()), Source::Override),
        (None, Some(v)) => (Some(v.clone()), Source::ConfigFile),
        (None, None) => (None, Source::Default),
    }
}

fn required(name: &str, v: Option<f64>) -> Result<f64> {
    v.ok_or_else(|| Error::Config(format!("{name} is required")))
}

impl RunConfig {
    /// Defaults < config file < overrides.
    pub fn resolve(file: &ConfigLayer, over: &ConfigLayer) -> Result<Self> {
        let p = |f: fn(&ConfigLayer) -> &Option<f64>| pick(f(file), f(over));
        let orthophoto = pick(&file.orthophoto, &over.orthophoto).0.unwrap_or(false);
        let width = required("image_width", p(|c| &c.image_width).0)?;
        let height = required("image_height", p(|c| &c.image_height).0)?;
        if !(width > 0.0 && height > 0.0) {
            return Err(Error::Config(format!("image size {width}x{height}")));
        }

        let pitch = p(|c| &c.pitch_deg).0;
        let pitch_deg = if orthophoto {
            if pitch.is_some_and(|d| d != -90.0) {
                return Err(Error::Config(
                    "orthophoto mode fixes pitch_deg at -90".into(),
                ));
            }
            -90.0
        } else {
            pitch.unwrap_or(-90.0)
        };
        CameraPose::from_degrees(pitch_deg).map_err(|e| Error::Config(e.to_string()))?;

        let intrinsics = if orthophoto {
            None
        } else {
            let fx = p(|c| &c.fx).0.or(p(|c| &c.fy).0);
            let fx = fx.ok_or_else(|| Error::Config("focal length (fx) is required".into()))?;
            let fy = p(|c| &c.fy).0.unwrap_or(fx);
            let cx = p(|c| &c.cx).0.unwrap_or(width / 2.0);
            let cy = p(|c| &c.cy).0.unwrap_or(height / 2.0);
            Some(
                CameraIntrinsics::new(fx, fy, cx, cy, width, height)
                    .map_err(|e| Error::Config(e.to_string()))?,
            )
        };

        let d = VehiclePrior::default();
        let (l, l_src) = p(|c| &c.length_m);
        let (w, w_src) = p(|c| &c.width_m);
        let (h, h_src) = p(|c| &c.height_m);
        let mut prior = VehiclePrior::new(
            l.unwrap_or(d.length_m),
            w.unwrap_or(d.width_m),
            h.unwrap_or(d.height_m),
        )
        .map_err(|e| Error::Config(e.to_string()))?;
        let mut prior_source = PriorProvenance {
            length_m: l_src,
            width_m: w_src,
            height_m: h_src,
        };
        if orthophoto {
            prior = prior.flat();
            prior_source.height_m = Source::Orthophoto;
        }

        let filter = FilterConfig::new(
            p(|c| &c.conf_threshold).0.unwrap_or(0.5),
            pick(&file.min_count, &over.min_count).0.unwrap_or(5),
        )?;
        let gsd_sat = p(|c| &c.gsd_sat).0;
        if gsd_sat.is_some_and(|g| !(g > 0.0) || !g.is_finite()) {
            return Err(Error::Config("gsd_sat must be positive".into()));
        }
        let category = pick(&file.category, &over.category)
            .0
            .unwrap_or_else(|| DEFAULT_CATEGORY.to_string());

        Ok(RunConfig {
            intrinsics,
            image_width: width,
            image_height: height,
            pitch_deg,
            prior,
            prior_source,
            filter,
            gsd_sat,
            category,
            orthophoto,
        })
    }

    pub fn pose(&self) -> Result<CameraPose> {
        CameraPose::from_degrees(self.pitch_deg)
    }

    pub fn estimator(&self) -> Result<Estimator> {
        let imaging = match self.intrinsics {
            Some(intrinsics) => Imaging::Perspective {
                intrinsics,
                pose: self.pose()?,
            },
            None => Imaging::Orthophoto {
                width: self.image_width,
                height: self.image_height,
            },
        };
        Ok(Estimator {
            imaging,
            prior: self.prior,
            filter: self.filter,
            model: ScaleModel::Decoupled,
        })
    }
}
