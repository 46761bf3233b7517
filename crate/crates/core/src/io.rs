//! Detection file formats.
//!
//! DOTA oriented-box text: one detection per line,
//! `x1 y1 x2 y2 x3 y3 x4 y4 category score`. Header lines starting with
//! `imagesource:` or `gsd:` and blank lines are ignored.
//!
//! JSON: an array of `{"corners": [[x, y] x4], "category": .., "score": ..}`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::detection::OrientedDetection;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectionFormat {
    DotaObb,
    Json,
}

impl DetectionFormat {
    /// `.json` files are JSON, anything else is DOTA text.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => DetectionFormat::Json,
            _ => DetectionFormat::DotaObb,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub corners: [[f64; 2]; 4],
    pub category: String,
    pub score: f64,
}

impl DetectionRecord {
    pub fn from_detection(d: &OrientedDetection) -> Self {
        DetectionRecord {
            corners: d.corners(),
            category: d.category.clone(),
            score: d.confidence,
        }
    }

    pub fn to_detection(&self) -> Result<OrientedDetection> {
        OrientedDetection::from_corners(&self.corners, self.score, self.category.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParsedDetections {
    pub detections: Vec<OrientedDetection>,
    /// Records discarded by the category filter.
    pub dropped_category: usize,
}

fn category_matches(category: &str, filter: Option<&str>) -> bool {
    filter.is_none_or(|f| category.to_lowercase() == f.to_lowercase())
}

fn check_record(corners: &[[f64; 2]; 4], score: f64) -> std::result::Result<(), String> {
    if corners.iter().flatten().any(|c| !c.is_finite()) {
        return Err("non-finite coordinate".into());
    }
    if !(0.0..=1.0).contains(&score) {
        return Err(format!("score {score} outside [0, 1]"));
    }
    Ok(())
}

pub fn parse_dota_obb(text: &str, category: Option<&str>) -> Result<ParsedDetections> {
    let mut out = ParsedDetections::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with("imagesource:") || trimmed.starts_with("gsd:")
        {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 10 {
            return Err(Error::Parse {
                line,
                message: format!("expected 10 fields, found {}", fields.len()),
            });
        }
        let num = |k: usize| -> Result<f64> {
            fields[k].parse::<f64>().map_err(|_| Error::Parse {
                line,
                message: format!("field {} is not a number: {:?}", k + 1, fields[k]),
            })
        };
        let mut corners = [[0.0; 2]; 4];
        for (k, c) in corners.iter_mut().enumerate() {
            *c = [num(2 * k)?, num(2 * k + 1)?];
        }
        let score = num(9)?;
        check_record(&corners, score).map_err(|message| Error::Parse { line, message })?;
        let cat = fields[8];
        if !category_matches(cat, category) {
            out.dropped_category += 1;
            continue;
        }
        let det =
            OrientedDetection::from_corners(&corners, score, cat).map_err(|e| Error::Parse {
                line,
                message: e.to_string(),
            })?;
        out.detections.push(det);
    }
    Ok(out)
}

pub fn parse_json_detections(text: &str, category: Option<&str>) -> Result<ParsedDetections> {
    let records: Vec<DetectionRecord> =
        serde_json::from_str(text).map_err(|e| Error::Json(e.to_string()))?;
    let mut out = ParsedDetections::default();
    for (i, r) in records.iter().enumerate() {
        check_record(&r.corners, r.score).map_err(|m| Error::Json(format!("record {i}: {m}")))?;
        if !category_matches(&r.category, category) {
            out.dropped_category += 1;
            continue;
        }
        out.detections.push(
            r.to_detection()
                .map_err(|e| Error::Json(format!("record {i}: {e}")))?,
        );
    }
    Ok(out)
}

pub fn parse_detections(
    text: &str,
    format: DetectionFormat,
    category: Option<&str>,
) -> Result<ParsedDetections> {
    match format {
        DetectionFormat::DotaObb => parse_dota_obb(text, category),
        DetectionFormat::Json => parse_json_detections(text, category),
    }
}

pub fn write_dota_obb(dets: &[OrientedDetection]) -> String {
    let mut s = String::new();
    for d in dets {
        for c in d.corners() {
            s.push_str(&format!("{} {} ", c[0], c[1]));
        }
        s.push_str(&format!("{} {}\n", d.category, d.confidence));
    }
    s
}

pub fn write_json_detections(dets: &[OrientedDetection]) -> String {
    let records: Vec<DetectionRecord> = dets.iter().map(DetectionRecord::from_detection).collect();
    serde_json::to_string_pretty(&records).expect("detection records always serialize")
}
