//! Oriented bounding boxes of detected vehicles.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One vehicle OBB. The long edge is always `len_pix` and `edge_dir` is the
/// unit direction of that edge, sign-canonicalized so that two descriptions of
/// the same box compare equal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OrientedDetection {
    pub center_u: f64,
    pub center_v: f64,
    pub len_pix: f64,
    pub wid_pix: f64,
    pub edge_dir: [f64; 2],
    pub confidence: f64,
    pub category: String,
}

fn canonical_dir(d: [f64; 2]) -> [f64; 2] {
    if d[0] < 0.0 || (d[0] == 0.0 && d[1] < 0.0) {
        [-d[0], -d[1]]
    } else {
        d
    }
}

impl OrientedDetection {
    /// Builds a detection, swapping length and width (and rotating the edge
    /// direction by 90°) when the supplied "length" is the shorter side.
    pub fn new(
        center: [f64; 2],
        len_pix: f64,
        wid_pix: f64,
        edge_dir: [f64; 2],
        confidence: f64,
        category: impl Into<String>,
    ) -> Result<Self> {
        let finite = center
            .iter()
            .chain(edge_dir.iter())
            .chain([len_pix, wid_pix, confidence].iter())
            .all(|x| x.is_finite());
        if !finite {
            return Err(Error::DegenerateDetection("non-finite field".into()));
        }
        if len_pix <= 0.0 || wid_pix <= 0.0 {
            return Err(Error::DegenerateDetection(format!(
                "box sides must be positive ({len_pix} x {wid_pix})"
            )));
        }
        if !(0.0..=1.0).contains(&confidence) {
            return Err(Error::DegenerateDetection(format!(
                "confidence {confidence} outside [0, 1]"
            )));
        }
        let norm = edge_dir[0].hypot(edge_dir[1]);
        if norm < 1e-12 {
            return Err(Error::DegenerateDetection("zero edge direction".into()));
        }
        let mut dir = [edge_dir[0] / norm, edge_dir[1] / norm];
        let (len_pix, wid_pix) = if len_pix >= wid_pix {
            (len_pix, wid_pix)
        } else {
            dir = [-dir[1], dir[0]];
            (wid_pix, len_pix)
        };
        Ok(OrientedDetection {
            center_u: center[0],
            center_v: center[1],
            len_pix,
            wid_pix,
            edge_dir: canonical_dir(dir),
            confidence,
            category: category.into(),
        })
    }

    /// Converts four corner points (either winding) into a detection.
    ///
    /// The center is the corner centroid, the length is the mean of the longer
    /// pair of opposite edges and the width the mean of the shorter pair.
    pub fn from_corners(
        corners: &[[f64; 2]; 4],
        confidence: f64,
        category: impl Into<String>,
    ) -> Result<Self> {
        if corners.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::DegenerateDetection("non-finite corner".into()));
        }
        let edge = |i: usize| {
            let a = corners[i];
            let b = corners[(i + 1) % 4];
            [b[0] - a[0], b[1] - a[1]]
        };
        let len = |e: [f64; 2]| e[0].hypot(e[1]);
        let (e0, e1, e2, e3) = (edge(0), edge(1), edge(2), edge(3));
        let pair_a = (len(e0) + len(e2)) / 2.0;
        let pair_b = (len(e1) + len(e3)) / 2.0;
        // opposite edges run antiparallel, so their difference averages the direction
        let (long, short, dir) = if pair_a >= pair_b {
            (pair_a, pair_b, [e0[0] - e2[0], e0[1] - e2[1]])
        } else {
            (pair_b, pair_a, [e1[0] - e3[0], e1[1] - e3[1]])
        };
        let center = [
            (corners[0][0] + corners[1][0] + corners[2][0] + corners[3][0]) / 4.0,
            (corners[0][1] + corners[1][1] + corners[2][1] + corners[3][1]) / 4.0,
        ];
        Self::new(center, long, short, dir, confidence, category)
    }

    /// Corners of the rectangle, counter-clockwise in a y-up frame.
    pub fn corners(&self) -> [[f64; 2]; 4] {
        let [ex, ey] = self.edge_dir;
        let (hl, hw) = (self.len_pix / 2.0, self.wid_pix / 2.0);
        let (nx, ny) = (-ey, ex);
        let (u, v) = (self.center_u, self.center_v);
        [
            [u - ex * hl - nx * hw, v - ey * hl - ny * hw],
            [u + ex * hl - nx * hw, v + ey * hl - ny * hw],
            [u + ex * hl + nx * hw, v + ey * hl + ny * hw],
            [u - ex * hl + nx * hw, v - ey * hl + ny * hw],
        ]
    }

    pub fn center(&self) -> [f64; 2] {
        [self.center_u, self.center_v]
    }
}
