//! `uavscale` command-line tool.
//!
//! Exit codes: 0 ok, 1 internal or I/O failure, 2 usage error, 3 at least one
//! image skipped for too few anchors, 4 unreadable or malformed input, 5 bad
//! configuration.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use uavscale::ConfigLayer;

#[derive(Debug, Parser)]
#[command(
    name = "uavscale",
    version,
    about = "Metric scale recovery for UAV images from vehicle boxes"
)]
struct Cli {
    #[command(flatten)]
    common: CommonArgs,

    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Debug, Args, Default)]
pub struct CommonArgs {
    /// TOML run configuration
    #[arg(long, global = true, env = "UAVSCALE_CONFIG")]
    pub config: Option<PathBuf>,
    /// Camera pitch in degrees, -90 looks straight down
    #[arg(long, global = true, allow_hyphen_values = true)]
    pub pitch_deg: Option<f64>,
    /// Sets fx = fy
    #[arg(long, global = true)]
    pub focal_px: Option<f64>,
    #[arg(long, global = true)]
    pub image_width: Option<f64>,
    #[arg(long, global = true)]
    pub image_height: Option<f64>,
    #[arg(long, global = true)]
    pub conf_threshold: Option<f64>,
    #[arg(long, global = true)]
    pub min_count: Option<usize>,
    /// Satellite map ground sample distance, m/px
    #[arg(long, global = true)]
    pub gsd_sat: Option<f64>,
    #[arg(long, global = true)]
    pub category: Option<String>,
    #[arg(long, global = true)]
    pub length_m: Option<f64>,
    #[arg(long, global = true)]
    pub width_m: Option<f64>,
    #[arg(long, global = true)]
    pub height_m: Option<f64>,
    /// Treat inputs as nadir orthophotos: no vehicle height, pitch -90
    #[arg(long, global = true)]
    pub orthophoto: bool,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
}

impl CommonArgs {
    pub fn overrides(&self) -> ConfigLayer {
        ConfigLayer {
            fx: self.focal_px,
            fy: self.focal_px,
            image_width: self.image_width,
            image_height: self.image_height,
            pitch_deg: self.pitch_deg,
            length_m: self.length_m,
            width_m: self.width_m,
            height_m: self.height_m,
            conf_threshold: self.conf_threshold,
            min_count: self.min_count,
            gsd_sat: self.gsd_sat,
            category: self.category.clone(),
            orthophoto: self.orthophoto.then_some(true),
            ..Default::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum InputFormat {
    Auto,
    Dota,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Dota,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LayoutArg {
    Uniform,
    Center,
}

#[derive(Debug, Args)]
pub struct MapArgs {
    /// Satellite search region `x,y,width,height` in map pixels
    #[arg(long, value_parser = parse_map)]
    pub map: Option<uavscale::MapBounds>,
    /// UAV image width used for the ground footprint; defaults to the image width
    #[arg(long)]
    pub uav_width: Option<f64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Estimate scale, altitude and resolution from detection files
    Estimate {
        /// Detection files or directories of them
        #[arg(required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long, value_enum, default_value_t = InputFormat::Auto)]
        format: InputFormat,
        /// Report file for a single input
        #[arg(short, long, conflicts_with = "out_dir")]
        output: Option<PathBuf>,
        /// One `<stem>.report.json` per input
        #[arg(long)]
        out_dir: Option<PathBuf>,
        #[command(flatten)]
        map: MapArgs,
        /// Add the sensitivity section
        #[arg(long)]
        sensitivity: bool,
    },
    /// Plan satellite crop windows from a saved report
    PlanCrops {
        #[arg(long)]
        report: PathBuf,
        #[command(flatten)]
        map: MapArgs,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Generate synthetic detections with known ground truth
    Synth {
        #[arg(long, required = true)]
        out_dir: PathBuf,
        /// Number of images
        #[arg(long, default_value_t = 1)]
        images: usize,
        /// Vehicles per image
        #[arg(long, default_value_t = 20)]
        count: usize,
        /// Camera height above the vehicle roofs, meters
        #[arg(long, default_value_t = 100.0)]
        altitude: f64,
        #[arg(long, value_enum, default_value_t = LayoutArg::Uniform)]
        layout: LayoutArg,
        /// Log-normal sigma on vehicle dimensions
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        /// Share of boxes turned into scale outliers
        #[arg(long, default_value_t = 0.0)]
        outliers: f64,
        #[arg(long, value_enum, default_value_t = OutputFormat::Dota)]
        format: OutputFormat,
    },
    /// Pitch and focal-length sensitivity with finite-difference checks
    Sensitivity {
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = InputFormat::Auto)]
        format: InputFormat,
        #[arg(long, default_value_t = 1e-3)]
        theta_step: f64,
        #[arg(long, default_value_t = 1.0)]
        focal_step: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn parse_map(s: &str) -> Result<uavscale::MapBounds, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 4 {
        return Err("expected x,y,width,height".into());
    }
    let mut v = [0u32; 4];
    for (slot, p) in v.iter_mut().zip(&parts) {
        *slot = p.parse().map_err(|_| format!("not a pixel count: {p:?}"))?;
    }
    uavscale::MapBounds::new(v[0], v[1], v[2], v[3]).map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Estimate {
            inputs,
            format,
            output,
            out_dir,
            map,
            sensitivity,
        } => commands::estimate(
            &cli.common,
            &inputs,
            format,
            output.as_deref(),
            out_dir.as_deref(),
            &map,
            sensitivity,
        ),
        Command::PlanCrops {
            report,
            map,
            output,
        } => commands::plan_crops(&cli.common, &report, &map, output.as_deref()),
        Command::Synth {
            out_dir,
            images,
            count,
            altitude,
            layout,
            noise,
            outliers,
            format,
        } => commands::synth(
            &cli.common,
            &commands::SynthArgs {
                out_dir,
                images,
                count,
                altitude,
                layout,
                noise,
                outliers,
                format,
            },
        ),
        Command::Sensitivity {
            input,
            format,
            theta_step,
            focal_step,
            output,
        } => commands::sensitivity(
            &cli.common,
            &input,
            format,
            theta_step,
            focal_step,
            output.as_deref(),
        ),
    };
    match result {
        Ok(outcome) => ExitCode::from(outcome.code()),
        Err(e) => {
            eprintln!("uavscale: {e}");
            ExitCode::from(e.code())
        }
    }
}
