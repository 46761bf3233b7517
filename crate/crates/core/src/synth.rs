//! Exact forward model used to validate the estimator: vehicle cuboids on a
//! flat ground plane, projected through a pitched pinhole camera, boxed by
//! the minimum-area rectangle of their projected hull.
//!
//! World frame: X right, Y forward, Z up, ground at Z = 0. The camera sits
//! above the origin at `altitude_m + roof_reference_m`, so `altitude_m` is
//! the height above the roof plane of a prior-sized vehicle and the true
//! nadir-equivalent scale is `altitude_m / f`.

use std::f64::consts::TAU;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::camera::{CameraIntrinsics, CameraPose};
use crate::detection::OrientedDetection;
use crate::error::{Error, Result};
use crate::geometry::VehiclePrior;
use crate::resolution::{ScaleReport, ScaleStatus};

pub const DEFAULT_CATEGORY: &str = "small-vehicle";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehiclePlacement {
    pub x: f64,
    pub y: f64,
    /// Heading of the long axis, radians from world +X.
    pub yaw: f64,
    pub dims: VehiclePrior,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub altitude_m: f64,
    pub pitch_rad: f64,
    pub intrinsics: CameraIntrinsics,
    pub vehicles: Vec<VehiclePlacement>,
    pub rng_seed: u64,
    /// Log-normal sigma applied to each vehicle dimension.
    pub dim_noise_sigma: f64,
    /// Share of emitted boxes blown up by a factor in [2, 4].
    pub outlier_fraction: f64,
    pub roof_reference_m: f64,
}

impl SceneSpec {
    pub fn new(altitude_m: f64, pose: CameraPose, intrinsics: CameraIntrinsics) -> Self {
        SceneSpec {
            altitude_m,
            pitch_rad: pose.pitch(),
            intrinsics,
            vehicles: Vec::new(),
            rng_seed: 0,
            dim_noise_sigma: 0.0,
            outlier_fraction: 0.0,
            roof_reference_m: VehiclePrior::default().height_m,
        }
    }

    pub fn pose(&self) -> Result<CameraPose> {
        CameraPose::new(self.pitch_rad)
    }

    /// Nadir-equivalent meters per pixel.
    pub fn true_scale(&self) -> f64 {
        self.altitude_m / self.intrinsics.focal()
    }

    fn validate(&self) -> Result<()> {
        if !(self.altitude_m > 0.0) || !self.altitude_m.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "altitude {} must be positive",
                self.altitude_m
            )));
        }
        if !(self.dim_noise_sigma >= 0.0) || !(0.0..=1.0).contains(&self.outlier_fraction) {
            return Err(Error::InvalidArgument(
                "noise sigma must be >= 0 and outlier fraction in [0, 1]".into(),
            ));
        }
        if !(self.roof_reference_m >= 0.0) {
            return Err(Error::InvalidArgument("roof reference must be >= 0".into()));
        }
        self.pose().map(|_| ())
    }

    fn camera(&self) -> Result<Camera> {
        Camera::new(self)
    }
}

struct Camera {
    intr: CameraIntrinsics,
    center_z: f64,
    // rows: camera x, y, z axes in world coordinates
    rot: [[f64; 3]; 3],
}

impl Camera {
    fn new(scene: &SceneSpec) -> Result<Self> {
        scene.validate()?;
        let phi = -scene.pitch_rad;
        let (s, c) = phi.sin_cos();
        Ok(Camera {
            intr: scene.intrinsics,
            center_z: scene.altitude_m + scene.roof_reference_m,
            rot: [[1.0, 0.0, 0.0], [0.0, -s, -c], [0.0, c, -s]],
        })
    }

    fn to_camera(&self, p: [f64; 3]) -> [f64; 3] {
        let d = [p[0], p[1], p[2] - self.center_z];
        let r = &self.rot;
        [
            r[0][0] * d[0] + r[0][1] * d[1] + r[0][2] * d[2],
            r[1][0] * d[0] + r[1][1] * d[1] + r[1][2] * d[2],
            r[2][0] * d[0] + r[2][1] * d[1] + r[2][2] * d[2],
        ]
    }

    fn project(&self, p: [f64; 3]) -> Option<[f64; 2]> {
        let c = self.to_camera(p);
        if c[2] <= 1e-9 {
            return None;
        }
        Some([
            self.intr.cx() + self.intr.fx() * c[0] / c[2],
            self.intr.cy() + self.intr.fy() * c[1] / c[2],
        ])
    }

    /// Ground point seen through pixel `(u, v)`.
    fn back_project(&self, u: f64, v: f64) -> Option<[f64; 2]> {
        let ray = [
            (u - self.intr.cx()) / self.intr.fx(),
            (v - self.intr.cy()) / self.intr.fy(),
            1.0,
        ];
        let r = &self.rot;
        let w = [
            r[0][0] * ray[0] + r[1][0] * ray[1] + r[2][0] * ray[2],
            r[0][1] * ray[0] + r[1][1] * ray[1] + r[2][1] * ray[2],
            r[0][2] * ray[0] + r[1][2] * ray[1] + r[2][2] * ray[2],
        ];
        if w[2] >= -1e-12 {
            return None;
        }
        let t = -self.center_z / w[2];
        Some([t * w[0], t * w[1]])
    }
}

fn cuboid_corners(veh: &VehiclePlacement) -> [[f64; 3]; 8] {
    let (s, c) = veh.yaw.sin_cos();
    let (hl, hw) = (veh.dims.length_m / 2.0, veh.dims.width_m / 2.0);
    let mut out = [[0.0; 3]; 8];
    let mut k = 0;
    for z in [0.0, veh.dims.height_m] {
        for (a, b) in [(-hl, -hw), (hl, -hw), (hl, hw), (-hl, hw)] {
            out[k] = [veh.x + a * c - b * s, veh.y + a * s + b * c, z];
            k += 1;
        }
    }
    out
}

fn cross(o: [f64; 2], a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
}

/// Convex hull by Andrew's monotone chain, counter-clockwise in a y-up
/// frame, collinear points dropped.
pub fn convex_hull(points: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a[0].total_cmp(&b[0]).then(a[1].total_cmp(&b[1])));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<[f64; 2]> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &[f64; 2]>> = if pass == 0 {
            Box::new(pts.iter())
        } else {
            Box::new(pts.iter().rev())
        };
        for &p in iter {
            while hull.len() >= start + 2
                && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0
            {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

/// (center, side along `dir`, side across, unit `dir`).
pub type Rect = ([f64; 2], f64, f64, [f64; 2]);

/// Minimum-area enclosing rectangle as (center, side along `dir`, side
/// across, unit `dir`). Among rectangles whose area is within 1e-9 of the
/// minimum, the one whose axes line up best with `prefer` wins.
pub fn min_area_rect(points: &[[f64; 2]], prefer: [f64; 2]) -> Option<Rect> {
    let hull = convex_hull(points);
    if hull.len() < 3 {
        return None;
    }
    let pn = prefer[0].hypot(prefer[1]);
    let mut best: Option<(f64, f64, Rect)> = None;
    for i in 0..hull.len() {
        let a = hull[i];
        let b = hull[(i + 1) % hull.len()];
        let len = (b[0] - a[0]).hypot(b[1] - a[1]);
        if len < 1e-12 {
            continue;
        }
        let e = [(b[0] - a[0]) / len, (b[1] - a[1]) / len];
        let n = [-e[1], e[0]];
        let (mut lo_e, mut hi_e, mut lo_n, mut hi_n) = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for p in &hull {
            let pe = p[0] * e[0] + p[1] * e[1];
            let pnn = p[0] * n[0] + p[1] * n[1];
            lo_e = lo_e.min(pe);
            hi_e = hi_e.max(pe);
            lo_n = lo_n.min(pnn);
            hi_n = hi_n.max(pnn);
        }
        let (se, sn) = (hi_e - lo_e, hi_n - lo_n);
        let area = se * sn;
        let (me, mn) = ((hi_e + lo_e) / 2.0, (hi_n + lo_n) / 2.0);
        let center = [me * e[0] + mn * n[0], me * e[1] + mn * n[1]];
        // the long side's alignment with the preferred axis
        let long = if se >= sn { e } else { n };
        let align = if pn > 0.0 {
            (long[0] * prefer[0] + long[1] * prefer[1]).abs() / pn
        } else {
            0.0
        };
        let cand = (center, se, sn, e);
        best = match best {
            None => Some((area, align, cand)),
            Some((ba, bal, bc)) => {
                let tol = 1e-9 * ba.max(area);
                if area < ba - tol || ((area - ba).abs() <= tol && align > bal) {
                    Some((area, align, cand))
                } else {
                    Some((ba, bal, bc))
                }
            }
        };
    }
    best.map(|(_, _, c)| c)
}

/// Projected box of one vehicle, or `None` when any corner falls behind the
/// camera or outside the frame.
pub fn project_cuboid(
    scene: &SceneSpec,
    veh: &VehiclePlacement,
) -> Result<Option<OrientedDetection>> {
    let cam = scene.camera()?;
    project_with(&cam, veh)
}

fn project_with(cam: &Camera, veh: &VehiclePlacement) -> Result<Option<OrientedDetection>> {
    let mut pts = [[0.0; 2]; 8];
    for (p, c) in pts.iter_mut().zip(cuboid_corners(veh)) {
        match cam.project(c) {
            Some(px) if cam.intr.contains(px[0], px[1]) => *p = px,
            _ => return Ok(None),
        }
    }
    // projected longitudinal axis through the body center
    let (s, c) = veh.yaw.sin_cos();
    let (hl, hz) = (veh.dims.length_m / 2.0, veh.dims.height_m / 2.0);
    let front = cam.project([veh.x + hl * c, veh.y + hl * s, hz]);
    let back = cam.project([veh.x - hl * c, veh.y - hl * s, hz]);
    let prefer = match (front, back) {
        (Some(f), Some(b)) => [f[0] - b[0], f[1] - b[1]],
        _ => [0.0, 0.0],
    };
    let Some((center, se, sn, e)) = min_area_rect(&pts, prefer) else {
        return Ok(None);
    };
    OrientedDetection::new(center, se, sn, e, 1.0, DEFAULT_CATEGORY).map(Some)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneOutput {
    pub detections: Vec<OrientedDetection>,
    pub truth: ScaleReport,
    /// Per emitted detection: index into `SceneSpec::vehicles`.
    pub vehicle_index: Vec<usize>,
    /// Per emitted detection: whether it was turned into a scale outlier.
    pub outlier_mask: Vec<bool>,
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

fn truth_report(s_true: f64, altitude: Option<f64>, resolution: f64, n: usize) -> ScaleReport {
    ScaleReport {
        n_detections: n,
        n_valid: n,
        n_inliers: n,
        status: ScaleStatus::Ok {
            global_scale: s_true,
            altitude_m: altitude,
            avg_resolution: resolution,
        },
    }
}

fn perturb_dims(dims: VehiclePrior, sigma: f64, rng: &mut ChaCha8Rng) -> VehiclePrior {
    let mut k = || -> f64 {
        let z: f64 = StandardNormal.sample(rng);
        (sigma * z).exp()
    };
    VehiclePrior {
        length_m: dims.length_m * k(),
        width_m: dims.width_m * k(),
        height_m: dims.height_m * k(),
    }
}

fn inject_outliers(
    dets: &mut [OrientedDetection],
    fraction: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<bool> {
    let n = dets.len();
    let k = ((fraction * n as f64).round() as usize).min(n);
    let mut mask = vec![false; n];
    for i in sample(rng, n, k).into_iter() {
        let factor = rng.random_range(2.0..=4.0);
        dets[i].len_pix *= factor;
        dets[i].wid_pix *= factor;
        mask[i] = true;
    }
    mask
}

/// Projects every vehicle, applies dimension noise and scale outliers.
///
/// Noise and outliers draw from their own RNG streams, so the same seed
/// gives the same layout and the same standard-normal draws whatever the
/// noise level.
pub fn generate_scene(scene: &SceneSpec) -> Result<SceneOutput> {
    let cam = scene.camera()?;
    let mut noise = rng(scene.rng_seed, 1);
    let mut detections = Vec::new();
    let mut vehicle_index = Vec::new();
    for (i, veh) in scene.vehicles.iter().enumerate() {
        let mut v = *veh;
        if scene.dim_noise_sigma > 0.0 {
            v.dims = perturb_dims(v.dims, scene.dim_noise_sigma, &mut noise);
        }
        if let Some(d) = project_with(&cam, &v)? {
            detections.push(d);
            vehicle_index.push(i);
        }
    }
    let outlier_mask = inject_outliers(
        &mut detections,
        scene.outlier_fraction,
        &mut rng(scene.rng_seed, 2),
    );
    let pose = scene.pose()?;
    let s = scene.true_scale();
    Ok(SceneOutput {
        truth: truth_report(
            s,
            Some(scene.altitude_m),
            s / pose.pitch().sin().abs(),
            detections.len(),
        ),
        detections,
        vehicle_index,
        outlier_mask,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// Box centers drawn uniformly over the frame.
    Uniform,
    /// Every vehicle under the principal point, yaws evenly spread.
    Center,
}

/// Places `count` prior-sized vehicles whose projections fit the frame.
///
/// Uniform placements are redrawn until they fit; after `50 * count`
/// failed draws the layout stops short.
pub fn layout_vehicles(
    scene: &SceneSpec,
    layout: Layout,
    count: usize,
    dims: VehiclePrior,
) -> Result<Vec<VehiclePlacement>> {
    let cam = scene.camera()?;
    let intr = scene.intrinsics;
    match layout {
        Layout::Center => {
            let Some([x, y]) = cam.back_project(intr.cx(), intr.cy()) else {
                return Err(Error::InvalidArgument(
                    "principal ray misses the ground".into(),
                ));
            };
            Ok((0..count)
                .map(|k| VehiclePlacement {
                    x,
                    y,
                    yaw: k as f64 * std::f64::consts::PI / count.max(1) as f64,
                    dims,
                })
                .collect())
        }
        Layout::Uniform => {
            let mut r = rng(scene.rng_seed, 0);
            let mut out = Vec::with_capacity(count);
            let mut attempts = 0;
            while out.len() < count && attempts < 50 * count.max(1) {
                attempts += 1;
                let u = r.random_range(0.0..intr.width());
                let v = r.random_range(0.0..intr.height());
                let yaw = r.random_range(0.0..TAU);
                let Some([x, y]) = cam.back_project(u, v) else {
                    continue;
                };
                let veh = VehiclePlacement { x, y, yaw, dims };
                if project_with(&cam, &veh)?.is_some() {
                    out.push(veh);
                }
            }
            Ok(out)
        }
    }
}

/// Orthographic scene: vehicles seen straight down at a fixed ground
/// sample distance; heights never show.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrthoSpec {
    pub gsd_m: f64,
    pub width_px: f64,
    pub height_px: f64,
    pub vehicles: Vec<VehiclePlacement>,
    pub rng_seed: u64,
    pub dim_noise_sigma: f64,
    pub outlier_fraction: f64,
}

impl OrthoSpec {
    fn to_pixel(&self, x: f64, y: f64) -> [f64; 2] {
        [
            self.width_px / 2.0 + x / self.gsd_m,
            self.height_px / 2.0 - y / self.gsd_m,
        ]
    }

    /// Vehicles spread uniformly over the tile, fully inside it.
    pub fn layout_uniform(&mut self, count: usize, dims: VehiclePrior) {
        let mut r = rng(self.rng_seed, 0);
        let margin = dims.length_m / self.gsd_m;
        let (w, h) = (self.width_px, self.height_px);
        self.vehicles = (0..count)
            .map(|_| {
                let u = r.random_range(margin.min(w / 2.0)..=(w - margin).max(w / 2.0));
                let v = r.random_range(margin.min(h / 2.0)..=(h - margin).max(h / 2.0));
                VehiclePlacement {
                    x: (u - w / 2.0) * self.gsd_m,
                    y: (h / 2.0 - v) * self.gsd_m,
                    yaw: r.random_range(0.0..TAU),
                    dims,
                }
            })
            .collect();
    }
}

pub fn generate_orthophoto(spec: &OrthoSpec) -> Result<SceneOutput> {
    if !(spec.gsd_m > 0.0) || !(spec.width_px > 0.0 && spec.height_px > 0.0) {
        return Err(Error::InvalidArgument(
            "orthophoto gsd and size must be positive".into(),
        ));
    }
    let mut noise = rng(spec.rng_seed, 1);
    let mut detections = Vec::new();
    let mut vehicle_index = Vec::new();
    for (i, veh) in spec.vehicles.iter().enumerate() {
        let mut v = *veh;
        if spec.dim_noise_sigma > 0.0 {
            v.dims = perturb_dims(v.dims, spec.dim_noise_sigma, &mut noise);
        }
        let pts: Vec<[f64; 2]> = cuboid_corners(&v)[..4]
            .iter()
            .map(|c| spec.to_pixel(c[0], c[1]))
            .collect();
        let inside = pts.iter().all(|p| {
            (0.0..=spec.width_px).contains(&p[0]) && (0.0..=spec.height_px).contains(&p[1])
        });
        if !inside {
            continue;
        }
        // image y points down, so the heading flips sign
        let dir = [v.yaw.cos(), -v.yaw.sin()];
        let center = spec.to_pixel(v.x, v.y);
        let d = OrientedDetection::new(
            center,
            v.dims.length_m / spec.gsd_m,
            v.dims.width_m / spec.gsd_m,
            dir,
            1.0,
            DEFAULT_CATEGORY,
        )?;
        detections.push(d);
        vehicle_index.push(i);
    }
    let outlier_mask = inject_outliers(
        &mut detections,
        spec.outlier_fraction,
        &mut rng(spec.rng_seed, 2),
    );
    Ok(SceneOutput {
        truth: truth_report(spec.gsd_m, None, spec.gsd_m, detections.len()),
        detections,
        vehicle_index,
        outlier_mask,
    })
}
