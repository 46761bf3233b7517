use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

use uavscale::io::{parse_detections, write_dota_obb, write_json_detections, DetectionFormat};
use uavscale::report::{Meta, Report};
use uavscale::resolution::{plan_crops as plan, CropPlan, ScaleReport};
use uavscale::sensitivity::{sensitivity_report, FdSteps};
use uavscale::synth::{
    generate_orthophoto, generate_scene, layout_vehicles, Layout, OrthoSpec, SceneOutput, SceneSpec,
};
use uavscale::{CameraPose, ConfigLayer, Error, RunConfig};

use crate::{CommonArgs, InputFormat, LayoutArg, MapArgs, OutputFormat};

pub enum Outcome {
    Ok,
    Skipped,
}

impl Outcome {
    pub fn code(&self) -> u8 {
        match self {
            Outcome::Ok => 0,
            Outcome::Skipped => 3,
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    fn internal(m: impl fmt::Display) -> Self {
        CliError {
            code: 1,
            message: m.to_string(),
        }
    }

    fn usage(m: impl fmt::Display) -> Self {
        CliError {
            code: 2,
            message: m.to_string(),
        }
    }

    fn input(m: impl fmt::Display) -> Self {
        CliError {
            code: 4,
            message: m.to_string(),
        }
    }

    fn config(m: impl fmt::Display) -> Self {
        CliError {
            code: 5,
            message: m.to_string(),
        }
    }

    pub fn code(&self) -> u8 {
        self.code
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_)
            | Error::InvalidIntrinsics(_)
            | Error::InvalidPose(_)
            | Error::InvalidPrior(_)
            | Error::InvalidArgument(_) => CliError::config(e),
            Error::Parse { .. } | Error::Json(_) | Error::DegenerateDetection(_) => {
                CliError::input(e)
            }
            _ => CliError::internal(e),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn config_layer(common: &CommonArgs) -> CliResult<ConfigLayer> {
    match &common.config {
        Some(p) => Ok(ConfigLayer::load(p)?),
        None => Ok(ConfigLayer::default()),
    }
}

fn load_config(common: &CommonArgs) -> CliResult<RunConfig> {
    Ok(RunConfig::resolve(
        &config_layer(common)?,
        &common.overrides(),
    )?)
}

fn write_or_print(text: &str, out: Option<&Path>) -> CliResult<()> {
    match out {
        Some(p) => {
            fs::write(p, text).map_err(|e| CliError::internal(format!("{}: {e}", p.display())))
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("reports always serialize")
}

fn is_detection_file(p: &Path) -> bool {
    matches!(
        p.extension().and_then(|e| e.to_str()),
        Some("txt") | Some("json")
    )
}

fn collect_inputs(paths: &[PathBuf]) -> CliResult<Vec<PathBuf>> {
    let mut out = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut files: Vec<PathBuf> = fs::read_dir(p)
                .map_err(|e| CliError::input(format!("{}: {e}", p.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.is_file() && is_detection_file(f))
                .collect();
            files.sort();
            out.extend(files);
        } else {
            out.push(p.clone());
        }
    }
    if out.is_empty() {
        return Err(CliError::input("no detection files found"));
    }
    Ok(out)
}

fn resolve_format(path: &Path, format: InputFormat) -> DetectionFormat {
    match format {
        InputFormat::Auto => DetectionFormat::from_path(path),
        InputFormat::Dota => DetectionFormat::DotaObb,
        InputFormat::Json => DetectionFormat::Json,
    }
}

fn read_detections(
    cfg: &RunConfig,
    path: &Path,
    format: InputFormat,
) -> CliResult<(Meta, Vec<uavscale::OrientedDetection>)> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let fmt = resolve_format(path, format);
    let parsed = parse_detections(&text, fmt, Some(&cfg.category))
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    let mut meta = Meta::new(cfg, Some(path.display().to_string()), Some(fmt));
    meta.dropped_category = parsed.dropped_category;
    Ok((meta, parsed.detections))
}

fn crop_plan(
    scale: &ScaleReport,
    map: &MapArgs,
    gsd_sat: Option<f64>,
    default_width: f64,
) -> CliResult<Option<CropPlan>> {
    let Some(bounds) = map.map else {
        return Ok(None);
    };
    let gsd =
        gsd_sat.ok_or_else(|| CliError::config("crop planning needs --gsd-sat or gsd_sat"))?;
    if !scale.is_ok() {
        return Ok(None);
    }
    let p = plan(scale, map.uav_width.unwrap_or(default_width), &bounds, gsd)?;
    if p.oversized {
        eprintln!(
            "uavscale: warning: crop of {:.1} px exceeds the map region; emitted one centered window",
            p.crop_size_px
        );
    }
    Ok(Some(p))
}

fn estimate_file(
    cfg: &RunConfig,
    path: &Path,
    format: InputFormat,
    map: &MapArgs,
    sensitivity: bool,
) -> CliResult<Report> {
    let est = cfg.estimator()?;
    let (meta, dets) = read_detections(cfg, path, format)?;
    let mut report = Report::new(meta, est.estimate(&dets)?);
    report.crop_plan = crop_plan(&report.scale, map, cfg.gsd_sat, cfg.image_width)?;
    if sensitivity {
        report.sensitivity = Some(sensitivity_report(&est, &dets, FdSteps::default())?);
    }
    Ok(report)
}

pub fn estimate(
    common: &CommonArgs,
    inputs: &[PathBuf],
    format: InputFormat,
    output: Option<&Path>,
    out_dir: Option<&Path>,
    map: &MapArgs,
    sensitivity: bool,
) -> CliResult<Outcome> {
    let cfg = load_config(common)?;
    if sensitivity && cfg.orthophoto {
        return Err(CliError::config("sensitivity needs a perspective camera"));
    }
    let files = collect_inputs(inputs)?;
    let results: Vec<CliResult<Report>> = files
        .par_iter()
        .map(|f| estimate_file(&cfg, f, format, map, sensitivity))
        .collect();

    let mut reports = Vec::new();
    let mut first_err = None;
    for (f, r) in files.iter().zip(results) {
        match r {
            Ok(rep) => reports.push((f, rep)),
            // the first error is reported by main
            Err(e) => match first_err {
                None => first_err = Some(e),
                Some(_) => eprintln!("uavscale: {e}"),
            },
        }
    }

    if let Some(dir) = out_dir {
        fs::create_dir_all(dir)
            .map_err(|e| CliError::internal(format!("{}: {e}", dir.display())))?;
        for (f, rep) in &reports {
            let stem = f.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
            write_or_print(
                &rep.to_json(),
                Some(&dir.join(format!("{stem}.report.json"))),
            )?;
        }
    } else if files.len() == 1 {
        if let Some((_, rep)) = reports.first() {
            write_or_print(&rep.to_json(), output)?;
        }
    } else {
        let all: Vec<&Report> = reports.iter().map(|(_, r)| r).collect();
        write_or_print(&to_json(&all), output)?;
    }

    if let Some(e) = first_err {
        return Err(e);
    }
    let skipped = reports.iter().filter(|(_, r)| !r.scale.is_ok()).count();
    if skipped > 0 {
        eprintln!(
            "uavscale: {skipped} of {} image(s) skipped: insufficient anchors",
            reports.len()
        );
        return Ok(Outcome::Skipped);
    }
    Ok(Outcome::Ok)
}

pub fn plan_crops(
    common: &CommonArgs,
    report: &Path,
    map: &MapArgs,
    output: Option<&Path>,
) -> CliResult<Outcome> {
    if map.map.is_none() {
        return Err(CliError::usage("--map is required"));
    }
    let text = fs::read_to_string(report)
        .map_err(|e| CliError::input(format!("{}: {e}", report.display())))?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::input(format!("{}: {e}", report.display())))?;
    let scale_value = value.get("scale").cloned().unwrap_or_else(|| value.clone());
    let scale: ScaleReport = serde_json::from_value(scale_value)
        .map_err(|e| CliError::input(format!("{}: not a scale report: {e}", report.display())))?;

    let layer = config_layer(common)?.or(ConfigLayer::default());
    let over = common.overrides();
    let gsd = over.gsd_sat.or(layer.gsd_sat);
    let width = map
        .uav_width
        .or(over.image_width)
        .or_else(|| value.pointer("/meta/image_width").and_then(|v| v.as_f64()))
        .or(layer.image_width)
        .ok_or_else(|| CliError::config("UAV image width unknown; pass --uav-width"))?;

    if !scale.is_ok() {
        eprintln!("uavscale: report has no scale (insufficient anchors); no crops planned");
        return Ok(Outcome::Skipped);
    }
    let p = crop_plan(&scale, map, gsd, width)?.expect("map checked above");
    write_or_print(&to_json(&p), output)?;
    Ok(Outcome::Ok)
}

pub struct SynthArgs {
    pub out_dir: PathBuf,
    pub images: usize,
    pub count: usize,
    pub altitude: f64,
    pub layout: LayoutArg,
    pub noise: f64,
    pub outliers: f64,
    pub format: OutputFormat,
}

#[derive(Serialize)]
struct TruthEntry {
    file: String,
    seed: u64,
    truth: ScaleReport,
    outlier_mask: Vec<bool>,
}

fn synth_defaults() -> ConfigLayer {
    ConfigLayer {
        fx: Some(1000.0),
        image_width: Some(640.0),
        image_height: Some(480.0),
        pitch_deg: Some(-90.0),
        ..Default::default()
    }
}

pub fn synth(common: &CommonArgs, args: &SynthArgs) -> CliResult<Outcome> {
    let file = config_layer(common)?.or(synth_defaults());
    let cfg = RunConfig::resolve(&file, &common.overrides())?;
    let seed = common.seed.unwrap_or(0);
    if !(args.altitude > 0.0) {
        return Err(CliError::config("--altitude must be positive"));
    }

    let det_dir = args.out_dir.join("detections");
    fs::create_dir_all(&det_dir)
        .map_err(|e| CliError::internal(format!("{}: {e}", det_dir.display())))?;
    let ext = match args.format {
        OutputFormat::Dota => "txt",
        OutputFormat::Json => "json",
    };
    let layout = match args.layout {
        LayoutArg::Uniform => Layout::Uniform,
        LayoutArg::Center => Layout::Center,
    };
    // vehicles are built exactly to the configured prior
    let dims = cfg.prior;

    let scenes: Vec<CliResult<(String, u64, SceneOutput)>> = (0..args.images)
        .into_par_iter()
        .map(|k| {
            let s = seed.wrapping_add(k as u64);
            let out = match cfg.intrinsics {
                Some(intr) => {
                    let mut spec = SceneSpec::new(
                        args.altitude,
                        CameraPose::from_degrees(cfg.pitch_deg)?,
                        intr,
                    );
                    spec.rng_seed = s;
                    spec.dim_noise_sigma = args.noise;
                    spec.outlier_fraction = args.outliers;
                    spec.roof_reference_m = dims.height_m;
                    spec.vehicles = layout_vehicles(&spec, layout, args.count, dims)?;
                    generate_scene(&spec)?
                }
                None => {
                    let focal = common.focal_px.or(file.fx).unwrap_or(1000.0);
                    let mut spec = OrthoSpec {
                        gsd_m: args.altitude / focal,
                        width_px: cfg.image_width,
                        height_px: cfg.image_height,
                        vehicles: vec![],
                        rng_seed: s,
                        dim_noise_sigma: args.noise,
                        outlier_fraction: args.outliers,
                    };
                    spec.layout_uniform(args.count, dims);
                    generate_orthophoto(&spec)?
                }
            };
            Ok((format!("img_{k:04}.{ext}"), s, out))
        })
        .collect();

    let mut truth = Vec::with_capacity(scenes.len());
    for r in scenes {
        let (name, s, out) = r?;
        let text = match args.format {
            OutputFormat::Dota => write_dota_obb(&out.detections),
            OutputFormat::Json => write_json_detections(&out.detections),
        };
        let path = det_dir.join(&name);
        fs::write(&path, text)
            .map_err(|e| CliError::internal(format!("{}: {e}", path.display())))?;
        truth.push(TruthEntry {
            file: format!("detections/{name}"),
            seed: s,
            truth: out.truth,
            outlier_mask: out.outlier_mask,
        });
    }
    let truth_path = args.out_dir.join("truth.json");
    fs::write(&truth_path, to_json(&truth))
        .map_err(|e| CliError::internal(format!("{}: {e}", truth_path.display())))?;

    // the config that reproduces the camera for `estimate`
    let layer = ConfigLayer {
        fx: cfg.intrinsics.map(|k| k.fx()),
        fy: cfg.intrinsics.map(|k| k.fy()),
        cx: cfg.intrinsics.map(|k| k.cx()),
        cy: cfg.intrinsics.map(|k| k.cy()),
        image_width: Some(cfg.image_width),
        image_height: Some(cfg.image_height),
        pitch_deg: Some(cfg.pitch_deg),
        length_m: Some(dims.length_m),
        width_m: Some(dims.width_m),
        height_m: (!cfg.orthophoto).then_some(dims.height_m),
        conf_threshold: Some(cfg.filter.conf_threshold),
        min_count: Some(cfg.filter.min_count),
        gsd_sat: cfg.gsd_sat,
        category: Some(cfg.category.clone()),
        orthophoto: Some(cfg.orthophoto),
    };
    let cfg_path = args.out_dir.join("config.toml");
    fs::write(&cfg_path, layer.to_toml())
        .map_err(|e| CliError::internal(format!("{}: {e}", cfg_path.display())))?;
    Ok(Outcome::Ok)
}

pub fn sensitivity(
    common: &CommonArgs,
    input: &Path,
    format: InputFormat,
    theta_step: f64,
    focal_step: f64,
    output: Option<&Path>,
) -> CliResult<Outcome> {
    let cfg = load_config(common)?;
    if cfg.orthophoto {
        return Err(CliError::config("sensitivity needs a perspective camera"));
    }
    let est = cfg.estimator()?;
    let (meta, dets) = read_detections(&cfg, input, format)?;
    let sens = sensitivity_report(
        &est,
        &dets,
        FdSteps {
            theta_rad: theta_step,
            focal_px: focal_step,
        },
    )?;
    let mut report = Report::new(meta, est.estimate(&dets)?);
    report.sensitivity = Some(sens);
    write_or_print(&report.to_json(), output)?;
    Ok(if report.scale.is_ok() {
        Outcome::Ok
    } else {
        Outcome::Skipped
    })
}
