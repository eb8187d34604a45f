//! Flag groups and value parsers shared by the subcommands.

use std::collections::BTreeMap;
use std::path::PathBuf;

use clap::{Args, ValueEnum};
use dirac_phase::holonomy::{LoopSpec, Orientation};
use dirac_phase::{Branch, Error, Gauge, ModelSpec, ParamPoint, Result};

pub const OUT_DIR_ENV: &str = "DIRAC_PHASE_OUT_DIR";

#[derive(Args, Debug, Clone)]
pub struct ModelArgs {
    /// base, z-quadratic or x-cubic.
    #[arg(long, default_value = "base")]
    pub model: String,
    /// Model parameters as KEY=VALUE, e.g. Z0=0.5 or X1=-0.5,X2=0.2,X3=0.8.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub params: Vec<String>,
}

impl ModelArgs {
    pub fn build(&self) -> Result<ModelSpec> {
        let mut params = BTreeMap::new();
        for item in &self.params {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("parameter '{item}' is not KEY=VALUE")))?;
            params.insert(key.trim().to_string(), parse_f64(value)?);
        }
        ModelSpec::from_name(&self.model, &params)
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum BranchArg {
    Plus,
    Minus,
}

impl From<BranchArg> for Branch {
    fn from(b: BranchArg) -> Self {
        match b {
            BranchArg::Plus => Branch::Plus,
            BranchArg::Minus => Branch::Minus,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GaugeArg {
    #[default]
    Standard,
    Alternate,
}

impl From<GaugeArg> for Gauge {
    fn from(g: GaugeArg) -> Self {
        match g {
            GaugeArg::Standard => Gauge::Standard,
            GaugeArg::Alternate => Gauge::Alternate,
        }
    }
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum OrientationArg {
    Ccw,
    Cw,
}

/// A horizontal circle given either by its radius or by a sphere it lies on.
#[derive(Args, Debug, Clone)]
pub struct CircleArgs {
    /// Circle height and optional center/radius, e.g. z=0.5 or z=0,r=0.25,cx=0.1,cy=0.
    #[arg(long, allow_hyphen_values = true)]
    pub circle: String,
    /// Radius of the origin-centered sphere the circle lies on.
    #[arg(long)]
    pub sphere_r: Option<f64>,
    /// Circle radius; overrides --sphere-r.
    #[arg(long)]
    pub radius: Option<f64>,
    #[arg(long, value_enum, default_value = "ccw")]
    pub orientation: OrientationArg,
    /// Number of loop samples.
    #[arg(long, default_value_t = 4096)]
    pub nodes: usize,
}

impl CircleArgs {
    pub fn build(&self) -> Result<LoopSpec> {
        let mut fields: BTreeMap<&str, f64> = BTreeMap::new();
        for item in self.circle.split(',') {
            let (key, value) = item
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("circle field '{item}' is not KEY=VALUE")))?;
            let key = key.trim();
            if !["z", "r", "cx", "cy"].contains(&key) {
                return Err(Error::InvalidArgument(format!("unknown circle field '{key}'")));
            }
            fields.insert(key, parse_f64(value)?);
        }
        let z = *fields
            .get("z")
            .ok_or_else(|| Error::InvalidArgument("circle needs z=...".into()))?;
        let cx = fields.get("cx").copied().unwrap_or(0.0);
        let cy = fields.get("cy").copied().unwrap_or(0.0);
        let radius = match (self.radius.or(fields.get("r").copied()), self.sphere_r) {
            (Some(r), _) => r,
            (None, sphere_r) => {
                let s = sphere_r.unwrap_or(1.0);
                if !(z.abs() < s) || cx != 0.0 || cy != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "no latitude circle at z={z} on a sphere of radius {s} centered at the origin"
                    )));
                }
                (s * s - z * z).sqrt()
            }
        };
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "circle radius must be positive, got {radius}"
            )));
        }
        let orientation = match self.orientation {
            OrientationArg::Ccw => Orientation::Ccw,
            OrientationArg::Cw => Orientation::Cw,
        };
        LoopSpec::circle_z_around(cx, cy, z, radius, orientation).with_nodes(self.nodes)
    }
}

#[derive(Args, Debug, Clone)]
pub struct OutDirArgs {
    /// Directory for CSV and JSON side files.
    #[arg(long, env = OUT_DIR_ENV)]
    pub out_dir: Option<PathBuf>,
}

pub fn parse_f64(s: &str) -> Result<f64> {
    let v: f64 = s
        .trim()
        .parse()
        .map_err(|_| Error::InvalidArgument(format!("'{s}' is not a number")))?;
    if !v.is_finite() {
        return Err(Error::InvalidArgument(format!("'{s}' is not finite")));
    }
    Ok(v)
}

/// `"x,y,z"`.
pub fn parse_point(s: &str) -> std::result::Result<ParamPoint, String> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(format!("expected X,Y,Z, got '{s}'"));
    }
    let mut c = [0.0; 3];
    for (slot, part) in c.iter_mut().zip(&parts) {
        *slot = parse_f64(part).map_err(|e| e.to_string())?;
    }
    Ok(ParamPoint::from_array(c))
}

/// Positive count, accepting forms such as `2e5`.
pub fn parse_count(s: &str) -> std::result::Result<usize, String> {
    let v = parse_f64(s).map_err(|e| e.to_string())?;
    if v < 1.0 || v.fract() != 0.0 || v > 1e12 {
        return Err(format!("'{s}' is not a positive integer"));
    }
    Ok(v as usize)
}

pub fn parse_number(s: &str) -> std::result::Result<f64, String> {
    parse_f64(s).map_err(|e| e.to_string())
}
