//! Closed-loop and open-path phases.
//!
//! Three independent routes give the phase around a closed loop:
//!
//! * [`loop_phase_line_integral`]: adaptive quadrature of the real connection;
//! * [`loop_phase_wilson`]: accumulated arguments of overlaps between
//!   neighbouring eigenstates, `−Σ arg⟨V_k|V_{k+1}⟩`;
//! * [`loop_phase_flux`]: monopole flux through a spherical cap plus `2π`
//!   times the signed charges of the strings crossing that cap.
//!
//! Phases are accumulated continuously and reported unwrapped, together with
//! the principal value in `(−π, π]`. Loops are positively oriented when they
//! run counterclockwise seen from `+Z`; cap normals follow the right-hand rule.
//!
//! String crossings are signed as `m · sign(t · n)`, where `m` is the string
//! charge, `t` the string tangent pointing towards its endpoint and `n` the
//! cap normal induced by the loop orientation. With that convention the upper
//! and lower caps of every circuit give identical predictions.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{density_of_field, eigenvector, inner, Branch, Gauge, TAU_STRING};
use crate::error::{Error, Result};
use crate::gauge::{frame, real_connection, tilted_axis, SphereGrid};
use crate::model::{ModelSpec, ParamPoint};
use crate::quadrature::{integrate_adaptive, pairwise_sum, richardson};
use crate::strings::GridSpec;

/// Absolute tolerance of line integrals.
pub const LINE_INTEGRAL_TOL: f64 = 1e-10;
/// Largest accepted phase between neighbouring samples.
pub const MAX_STEP_PHASE: f64 = PI / 2.0;
/// Minimum number of nodes of a discretized loop.
pub const MIN_LOOP_NODES: usize = 64;

const TWO_PI: f64 = 2.0 * PI;

/// Reduces an angle into `(−π, π]`.
pub fn principal_value(v: f64) -> f64 {
    let p = v.rem_euclid(TWO_PI);
    if p > PI {
        p - TWO_PI
    } else {
        p
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    /// Counterclockwise seen from `+Z`.
    #[default]
    Ccw,
    Cw,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Ccw => 1.0,
            Orientation::Cw => -1.0,
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            Orientation::Ccw => Orientation::Cw,
            Orientation::Cw => Orientation::Ccw,
        }
    }
}

type CurveFn = Arc<dyn Fn(f64) -> ParamPoint + Send + Sync>;

#[derive(Clone)]
pub enum LoopKind {
    /// Horizontal circle at height `z` around `(cx, cy)`.
    CircleZ {
        cx: f64,
        cy: f64,
        z: f64,
        radius: f64,
        orientation: Orientation,
    },
    /// Circle in the plane through `center` orthogonal to `normal`,
    /// counterclockwise about `normal`.
    Circle {
        center: ParamPoint,
        normal: ParamPoint,
        radius: f64,
    },
    /// Closed polygon; the last vertex repeats the first.
    Polyline(Vec<ParamPoint>),
    /// Closed curve `t ∈ [0, 1] ↦ R(t)` with `R(0) = R(1)`.
    Parametric(CurveFn),
}

impl fmt::Debug for LoopKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LoopKind::CircleZ {
                cx,
                cy,
                z,
                radius,
                orientation,
            } => f
                .debug_struct("CircleZ")
                .field("cx", cx)
                .field("cy", cy)
                .field("z", z)
                .field("radius", radius)
                .field("orientation", orientation)
                .finish(),
            LoopKind::Circle { center, normal, radius } => f
                .debug_struct("Circle")
                .field("center", center)
                .field("normal", normal)
                .field("radius", radius)
                .finish(),
            LoopKind::Polyline(v) => f.debug_tuple("Polyline").field(&v.len()).finish(),
            LoopKind::Parametric(_) => f.write_str("Parametric(..)"),
        }
    }
}

/// A closed circuit in parameter space sampled at `nodes` points.
#[derive(Debug, Clone)]
pub struct LoopSpec {
    pub kind: LoopKind,
    pub nodes: usize,
}

impl LoopSpec {
    pub fn circle_z(z: f64, radius: f64, orientation: Orientation) -> Self {
        LoopSpec::circle_z_around(0.0, 0.0, z, radius, orientation)
    }

    pub fn circle_z_around(cx: f64, cy: f64, z: f64, radius: f64, orientation: Orientation) -> Self {
        LoopSpec {
            kind: LoopKind::CircleZ {
                cx,
                cy,
                z,
                radius,
                orientation,
            },
            nodes: 4096,
        }
    }

    /// Counterclockwise latitude circle at height `z` on the sphere of radius
    /// `sphere_r` about the origin.
    pub fn latitude(z: f64, sphere_r: f64) -> Result<Self> {
        if !(z.abs() < sphere_r) {
            return Err(Error::InvalidArgument(format!(
                "|z| = {} must be below the sphere radius {sphere_r}",
                z.abs()
            )));
        }
        Ok(LoopSpec::circle_z(
            z,
            (sphere_r * sphere_r - z * z).sqrt(),
            Orientation::Ccw,
        ))
    }

    pub fn circle(center: ParamPoint, normal: ParamPoint, radius: f64) -> Result<Self> {
        if normal.norm() == 0.0 {
            return Err(Error::InvalidArgument("circle normal must be nonzero".into()));
        }
        Ok(LoopSpec {
            kind: LoopKind::Circle {
                center,
                normal: normal.scale(1.0 / normal.norm()),
                radius,
            },
            nodes: 4096,
        })
    }

    pub fn polyline(vertices: Vec<ParamPoint>) -> Result<Self> {
        if vertices.len() < 4 {
            return Err(Error::InvalidArgument(
                "a closed polyline needs at least three distinct vertices".into(),
            ));
        }
        if vertices[0].distance(vertices[vertices.len() - 1]) > 1e-12 {
            return Err(Error::InvalidArgument("polyline loop is not closed".into()));
        }
        let nodes = (vertices.len() - 1).max(MIN_LOOP_NODES);
        Ok(LoopSpec {
            kind: LoopKind::Polyline(vertices),
            nodes,
        })
    }

    pub fn parametric<F>(curve: F) -> Result<Self>
    where
        F: Fn(f64) -> ParamPoint + Send + Sync + 'static,
    {
        if curve(0.0).distance(curve(1.0)) > 1e-12 {
            return Err(Error::InvalidArgument("parametric loop is not closed".into()));
        }
        Ok(LoopSpec {
            kind: LoopKind::Parametric(Arc::new(curve)),
            nodes: 4096,
        })
    }

    pub fn with_nodes(mut self, nodes: usize) -> Result<Self> {
        if nodes < MIN_LOOP_NODES {
            return Err(Error::InvalidArgument(format!(
                "loops need at least {MIN_LOOP_NODES} nodes, got {nodes}"
            )));
        }
        self.nodes = nodes;
        Ok(self)
    }

    fn frame_of(normal: ParamPoint) -> (ParamPoint, ParamPoint) {
        let (u, v, _) = frame(normal.to_array());
        (u, v)
    }

    /// Point at curve parameter `t ∈ [0, 1]`.
    pub fn point(&self, t: f64) -> ParamPoint {
        match &self.kind {
            LoopKind::CircleZ {
                cx,
                cy,
                z,
                radius,
                orientation,
            } => {
                let a = orientation.sign() * TWO_PI * t;
                ParamPoint::new(cx + radius * a.cos(), cy + radius * a.sin(), *z)
            }
            LoopKind::Circle { center, normal, radius } => {
                let (u, v) = Self::frame_of(*normal);
                let a = TWO_PI * t;
                *center + u.scale(radius * a.cos()) + v.scale(radius * a.sin())
            }
            LoopKind::Polyline(vs) => {
                let segments = vs.len() - 1;
                let s = (t.clamp(0.0, 1.0) * segments as f64).min(segments as f64);
                let k = (s.floor() as usize).min(segments - 1);
                let frac = s - k as f64;
                vs[k] + (vs[k + 1] - vs[k]).scale(frac)
            }
            LoopKind::Parametric(f) => f(t),
        }
    }

    /// `dR/dt`. Parametric curves are differentiated numerically.
    pub fn tangent(&self, t: f64) -> ParamPoint {
        match &self.kind {
            LoopKind::CircleZ {
                radius, orientation, ..
            } => {
                let s = orientation.sign();
                let a = s * TWO_PI * t;
                ParamPoint::new(-radius * a.sin(), radius * a.cos(), 0.0).scale(s * TWO_PI)
            }
            LoopKind::Circle { normal, radius, .. } => {
                let (u, v) = Self::frame_of(*normal);
                let a = TWO_PI * t;
                (u.scale(-a.sin()) + v.scale(a.cos())).scale(radius * TWO_PI)
            }
            LoopKind::Polyline(vs) => {
                let segments = vs.len() - 1;
                let k = ((t.clamp(0.0, 1.0) * segments as f64).floor() as usize).min(segments - 1);
                (vs[k + 1] - vs[k]).scale(segments as f64)
            }
            LoopKind::Parametric(f) => {
                let h = 1e-6;
                (f(t + h) - f(t - h)).scale(0.5 / h)
            }
        }
    }

    /// Curve parameters where the tangent may jump (polyline vertices).
    fn breakpoints(&self) -> Vec<f64> {
        match &self.kind {
            LoopKind::Polyline(vs) => {
                let n = vs.len() - 1;
                (0..=n).map(|k| k as f64 / n as f64).collect()
            }
            _ => vec![0.0, 1.0],
        }
    }

    /// `nodes` points at `t_k = k/nodes`; the closing point is not repeated.
    pub fn samples(&self) -> Vec<ParamPoint> {
        match &self.kind {
            LoopKind::Polyline(vs) if vs.len() - 1 == self.nodes => vs[..self.nodes].to_vec(),
            _ => (0..self.nodes)
                .map(|k| self.point(k as f64 / self.nodes as f64))
                .collect(),
        }
    }

    /// Same curve traversed backwards.
    pub fn reversed(&self) -> LoopSpec {
        let kind = match &self.kind {
            LoopKind::CircleZ {
                cx,
                cy,
                z,
                radius,
                orientation,
            } => LoopKind::CircleZ {
                cx: *cx,
                cy: *cy,
                z: *z,
                radius: *radius,
                orientation: orientation.reversed(),
            },
            LoopKind::Circle { center, normal, radius } => LoopKind::Circle {
                center: *center,
                normal: normal.scale(-1.0),
                radius: *radius,
            },
            LoopKind::Polyline(vs) => LoopKind::Polyline(vs.iter().rev().copied().collect()),
            LoopKind::Parametric(f) => {
                let f = f.clone();
                LoopKind::Parametric(Arc::new(move |t| f(1.0 - t)))
            }
        };
        LoopSpec {
            kind,
            nodes: self.nodes,
        }
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            LoopKind::CircleZ {
                cx,
                cy,
                z,
                radius,
                orientation,
            } => format!(
                "circle z={z} radius={radius} center=({cx},{cy}) {}",
                if *orientation == Orientation::Ccw { "ccw" } else { "cw" }
            ),
            LoopKind::Circle { center, normal, radius } => {
                format!("circle center={center} normal={normal} radius={radius}")
            }
            LoopKind::Polyline(vs) => format!("polyline with {} vertices", vs.len()),
            LoopKind::Parametric(_) => "parametric curve".to_string(),
        }
    }
}

/// Open path from `R_c` to an end point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PathSpec {
    /// Straight sweeps along the axes in `order` (0 = x, 1 = y, 2 = z),
    /// each moving one coordinate from its start to its end value.
    Protocol {
        start: ParamPoint,
        end: ParamPoint,
        order: [usize; 3],
    },
    Polyline(Vec<ParamPoint>),
}

impl PathSpec {
    pub fn protocol(start: ParamPoint, end: ParamPoint, order: &str) -> Result<Self> {
        Ok(PathSpec::Protocol {
            start,
            end,
            order: parse_axis_order(order)?,
        })
    }

    /// Polyline vertices, start and end included.
    pub fn vertices(&self) -> Vec<ParamPoint> {
        match self {
            PathSpec::Protocol { start, end, order } => {
                let mut out = vec![*start];
                let mut cur = *start;
                for &axis in order {
                    cur = cur.with_coord(axis, end.coord(axis));
                    out.push(cur);
                }
                out
            }
            PathSpec::Polyline(vs) => vs.clone(),
        }
    }

    pub fn start(&self) -> ParamPoint {
        self.vertices()[0]
    }

    pub fn end(&self) -> ParamPoint {
        *self.vertices().last().expect("paths have at least one vertex")
    }
}

/// Parses an axis order such as `"xyz"` or `"zyx"`.
pub fn parse_axis_order(order: &str) -> Result<[usize; 3]> {
    let axes: Vec<usize> = order
        .chars()
        .map(|c| match c {
            'x' | 'X' => Ok(0),
            'y' | 'Y' => Ok(1),
            'z' | 'Z' => Ok(2),
            other => Err(Error::InvalidArgument(format!("unknown axis '{other}' in protocol"))),
        })
        .collect::<Result<_>>()?;
    let mut sorted = axes.clone();
    sorted.sort_unstable();
    if sorted != [0, 1, 2] {
        return Err(Error::InvalidArgument(format!(
            "protocol '{order}' must name each axis once"
        )));
    }
    Ok([axes[0], axes[1], axes[2]])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    LineIntegral,
    Wilson,
    FluxPrediction,
    Adiabatic,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::LineIntegral => "line-integral",
            Method::Wilson => "wilson",
            Method::FluxPrediction => "flux-prediction",
            Method::Adiabatic => "adiabatic",
        })
    }
}

/// An accumulated phase.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseResult {
    /// Continuously accumulated value in radians.
    pub value: f64,
    /// `value` reduced into `(−π, π]`.
    pub principal: f64,
    pub method: Method,
    pub description: String,
}

impl PhaseResult {
    pub fn new(value: f64, method: Method, description: impl Into<String>) -> Self {
        PhaseResult {
            value,
            principal: principal_value(value),
            method,
            description: description.into(),
        }
    }

    pub fn over_pi(&self) -> f64 {
        self.value / PI
    }
}

fn touches(model: &ModelSpec, p: ParamPoint, branch: Branch, gauge: Gauge) -> bool {
    let f = model.field_vector(p);
    let rho = (f[0] * f[0] + f[1] * f[1] + f[2] * f[2]).sqrt();
    rho < 1e-6 || density_of_field(f, branch, gauge) <= TAU_STRING
}

fn on_string_error(e: Error) -> Error {
    match e {
        Error::SingularPoint(p) | Error::DegeneratePoint(p) => Error::LoopTouchesString(p),
        other => other,
    }
}

/// `∮ A · dR` by adaptive Gauss–Kronrod quadrature in the standard gauge.
pub fn loop_phase_line_integral(model: &ModelSpec, branch: Branch, lp: &LoopSpec) -> Result<PhaseResult> {
    loop_phase_line_integral_in_gauge(model, branch, Gauge::Standard, lp)
}

pub fn loop_phase_line_integral_in_gauge(
    model: &ModelSpec,
    branch: Branch,
    gauge: Gauge,
    lp: &LoopSpec,
) -> Result<PhaseResult> {
    let probe = lp.clone().with_nodes(lp.nodes.max(256))?;
    if let Some(p) = probe.samples().into_iter().find(|p| touches(model, *p, branch, gauge)) {
        return Err(Error::LoopTouchesString(p));
    }
    let bps = lp.breakpoints();
    let tol = LINE_INTEGRAL_TOL / (bps.len() - 1) as f64;
    let mut pieces = Vec::with_capacity(bps.len() - 1);
    for w in bps.windows(2) {
        let integral = integrate_adaptive(
            |t| {
                let a = real_connection(model, lp.point(t), branch, gauge)?;
                let d = lp.tangent(t);
                Ok(a[0] * d.x + a[1] * d.y + a[2] * d.z)
            },
            w[0],
            w[1],
            tol,
        )
        .map_err(on_string_error)?;
        pieces.push(integral.value);
    }
    Ok(PhaseResult::new(
        pairwise_sum(&pieces),
        Method::LineIntegral,
        format!("{} {branch} {}", model.name(), lp.describe()),
    ))
}

/// Discrete holonomy `−Σ arg⟨V_k|V_{k+1}⟩` over the loop samples.
pub fn loop_phase_wilson(model: &ModelSpec, branch: Branch, lp: &LoopSpec) -> Result<PhaseResult> {
    loop_phase_wilson_in_gauge(model, branch, Gauge::Standard, lp)
}

pub fn loop_phase_wilson_in_gauge(
    model: &ModelSpec,
    branch: Branch,
    gauge: Gauge,
    lp: &LoopSpec,
) -> Result<PhaseResult> {
    let points = lp.samples();
    let value = wilson_sum(model, branch, gauge, &points, true)?;
    Ok(PhaseResult::new(
        value,
        Method::Wilson,
        format!("{} {branch} {} N={}", model.name(), lp.describe(), lp.nodes),
    ))
}

/// `−Σ arg⟨V_k|V_{k+1}⟩` around the closed polygon `points`.
fn wilson_sum(
    model: &ModelSpec,
    branch: Branch,
    gauge: Gauge,
    points: &[ParamPoint],
    check_steps: bool,
) -> Result<f64> {
    let mut states = Vec::with_capacity(points.len());
    for p in points {
        if touches(model, *p, branch, gauge) {
            return Err(Error::LoopTouchesString(*p));
        }
        states.push(eigenvector(model, *p, branch, gauge));
    }
    let n = states.len();
    let mut steps = Vec::with_capacity(n);
    for k in 0..n {
        let step = inner(&states[k], &states[(k + 1) % n]).arg();
        if check_steps && step.abs() >= MAX_STEP_PHASE {
            return Err(Error::Refine {
                what: "loop nodes",
                step,
            });
        }
        steps.push(-step);
    }
    Ok(pairwise_sum(&steps))
}

/// Which spherical cap bounds a latitude circle.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cap {
    /// The cap on the `+Z` side.
    Upper,
    Lower,
}

/// `μ·Ω + 2π Σm` for a latitude circle on a sphere centred at a monopole
/// of charge `mu` at the origin. `Ω` is the flux solid angle of `cap` taken
/// with the normal induced by the loop orientation; `strings_pierced` lists
/// signed charges of strings crossing that cap.
pub fn loop_phase_flux(mu: f64, lp: &LoopSpec, cap: Cap, strings_pierced: &[i64]) -> Result<PhaseResult> {
    let LoopKind::CircleZ {
        cx,
        cy,
        z,
        radius,
        orientation,
    } = lp.kind
    else {
        return Err(Error::Unsupported("flux prediction needs a latitude circle".into()));
    };
    if cx != 0.0 || cy != 0.0 {
        return Err(Error::Unsupported(
            "flux prediction needs a circle centred on the z-axis".into(),
        ));
    }
    let sphere_r = z.hypot(radius);
    let upper = TWO_PI * (1.0 - z / sphere_r);
    let s = orientation.sign();
    let flux = match cap {
        Cap::Upper => s * mu * upper,
        Cap::Lower => -s * mu * (2.0 * TWO_PI - upper),
    };
    let strings: i64 = strings_pierced.iter().sum();
    let cap_name = if cap == Cap::Upper { "upper" } else { "lower" };
    Ok(PhaseResult::new(
        flux + TWO_PI * strings as f64,
        Method::FluxPrediction,
        format!("mu={mu} {cap_name} cap, strings {strings_pierced:?}, {}", lp.describe()),
    ))
}

/// Signed string crossings of `cap` for the base model in the standard gauge.
///
/// The upper-branch string (charge −1) runs along `−Z` towards its endpoint
/// at the origin, the lower-branch string (charge +1) along `+Z`.
pub fn base_string_crossings(branch: Branch, cap: Cap, lp: &LoopSpec) -> Result<Vec<i64>> {
    let LoopKind::CircleZ { orientation, .. } = lp.kind else {
        return Err(Error::Unsupported(
            "string crossings are tabulated for latitude circles only".into(),
        ));
    };
    let s = orientation.sign() as i64;
    // Cap normal along ±Z: the upper cap shares the loop's sense, the lower
    // cap (seen from outside) the opposite one, but both normals point to +Z
    // for a counterclockwise loop.
    let crossing = match (branch, cap) {
        (Branch::Plus, Cap::Lower) => Some(-s),
        (Branch::Minus, Cap::Upper) => Some(-s),
        _ => None,
    };
    Ok(crossing.into_iter().collect())
}

/// Open-path integral `∫ A · dR` along the path's straight segments.
pub fn path_phase(model: &ModelSpec, branch: Branch, path: &PathSpec) -> Result<PhaseResult> {
    path_phase_in_gauge(model, branch, Gauge::Standard, path)
}

pub fn path_phase_in_gauge(model: &ModelSpec, branch: Branch, gauge: Gauge, path: &PathSpec) -> Result<PhaseResult> {
    let vs = path.vertices();
    let mut pieces = Vec::new();
    for w in vs.windows(2) {
        let (a, b) = (w[0], w[1]);
        let d = b - a;
        if d.norm() == 0.0 {
            continue;
        }
        for k in 0..=64 {
            let p = a + d.scale(k as f64 / 64.0);
            if touches(model, p, branch, gauge) {
                return Err(Error::LoopTouchesString(p));
            }
        }
        let integral = integrate_adaptive(
            |t| {
                let c = real_connection(model, a + d.scale(t), branch, gauge)?;
                Ok(c[0] * d.x + c[1] * d.y + c[2] * d.z)
            },
            0.0,
            1.0,
            LINE_INTEGRAL_TOL,
        )
        .map_err(on_string_error)?;
        pieces.push(integral.value);
    }
    Ok(PhaseResult::new(
        pairwise_sum(&pieces),
        Method::LineIntegral,
        format!("{} {branch} path {} -> {}", model.name(), path.start(), path.end()),
    ))
}

/// Phase `γ(R)` at every grid node, reached from `rc` by the axis-sweep
/// `order`. Nodes whose path touches a string map to `None`.
pub fn phase_map(
    model: &ModelSpec,
    branch: Branch,
    rc: ParamPoint,
    order: &str,
    grid: &GridSpec,
) -> Result<Vec<(ParamPoint, Option<f64>)>> {
    let order = parse_axis_order(order)?;
    let points = grid.points();
    Ok(points
        .into_par_iter()
        .map(|p| {
            let path = PathSpec::Protocol {
                start: rc,
                end: p,
                order,
            };
            (p, path_phase(model, branch, &path).ok().map(|r| r.value))
        })
        .collect())
}

/// Side from which a path through the degeneracy is approached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    PlusY,
    MinusY,
}

impl Side {
    pub fn sign(self) -> f64 {
        match self {
            Side::PlusY => 1.0,
            Side::MinusY => -1.0,
        }
    }
}

/// Default offsets `0.1 · 2^{−k}`, `k = 0..6`.
pub fn default_epsilons() -> Vec<f64> {
    (0..=6).map(|k| 0.1 * 0.5f64.powi(k)).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegeneratePathResult {
    pub phase: PhaseResult,
    /// `(ε, phase along the path shifted to y = ±ε)`.
    pub samples: Vec<(f64, f64)>,
}

/// Phase along the x-axis path through the base-model degeneracy, as the
/// `ε → 0⁺` limit of paths displaced to `y = ±ε`. The samples are
/// Richardson-extrapolated assuming an error expansion in `ε, ε²`.
pub fn degenerate_path_phase(
    model: &ModelSpec,
    branch: Branch,
    axis_path: &PathSpec,
    side: Side,
    epsilons: &[f64],
) -> Result<DegeneratePathResult> {
    if !model.is_base() {
        return Err(Error::Unsupported(
            "the through-degeneracy limit is defined for the base model".into(),
        ));
    }
    if epsilons.is_empty() {
        return Err(Error::InvalidArgument("empty epsilon list".into()));
    }
    if epsilons.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::InvalidArgument("epsilons must be positive".into()));
    }
    let vs = axis_path.vertices();
    if vs.iter().any(|p| p.y != 0.0 || p.z != 0.0) {
        return Err(Error::InvalidArgument("the path must run along the x-axis".into()));
    }
    let mut samples = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        let shift = ParamPoint::new(0.0, side.sign() * eps, 0.0);
        let shifted = PathSpec::Polyline(vs.iter().map(|p| *p + shift).collect());
        samples.push((eps, path_phase(model, branch, &shifted)?.value));
    }
    let steps: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let values: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let limit = richardson(&steps, &values, &[1.0, 2.0])?;
    Ok(DegeneratePathResult {
        phase: PhaseResult::new(
            limit,
            Method::LineIntegral,
            format!(
                "{branch} path {} -> {} through degeneracy, {:?} side, extrapolated",
                vs[0],
                vs[vs.len() - 1],
                side
            ),
        ),
        samples,
    })
}

/// Total flux through a sphere from the gauge-invariant phases of its
/// plaquettes on a `(θ, φ)` lattice with a tilted polar axis.
pub fn sphere_flux_wilson(
    model: &ModelSpec,
    center: ParamPoint,
    radius: f64,
    branch: Branch,
    gauge: Gauge,
    grid: SphereGrid,
) -> Result<f64> {
    if !(radius > 0.0) || grid.n_theta < 2 || grid.n_phi < 3 {
        return Err(Error::InvalidArgument(
            "sphere lattice needs a positive radius and at least 2x3 cells".into(),
        ));
    }
    for attempt in 0..=3 {
        let (u, v, w) = frame(tilted_axis(attempt));
        let vertex = |i: usize, j: usize| {
            let theta = PI * i as f64 / grid.n_theta as f64;
            let phi = TWO_PI * j as f64 / grid.n_phi as f64;
            let n = u.scale(theta.sin() * phi.cos()) + v.scale(theta.sin() * phi.sin()) + w.scale(theta.cos());
            center + n.scale(radius)
        };
        let rows: Vec<Vec<ParamPoint>> = (0..=grid.n_theta)
            .map(|i| (0..grid.n_phi).map(|j| vertex(i, j)).collect())
            .collect();
        if rows.iter().flatten().any(|p| touches(model, *p, branch, gauge)) {
            continue;
        }
        let states: Vec<Vec<_>> = rows
            .iter()
            .map(|row| row.iter().map(|p| eigenvector(model, *p, branch, gauge)).collect())
            .collect();
        let phases: Vec<f64> = (0..grid.n_theta)
            .into_par_iter()
            .flat_map_iter(|i| {
                let states = &states;
                (0..grid.n_phi).map(move |j| {
                    let jn = (j + 1) % grid.n_phi;
                    let corners = [&states[i][j], &states[i + 1][j], &states[i + 1][jn], &states[i][jn]];
                    let product = (0..4)
                        .map(|k| inner(corners[k], corners[(k + 1) % 4]))
                        .fold(num_complex::Complex64::new(1.0, 0.0), |acc, o| acc * o);
                    -product.arg()
                })
            })
            .collect();
        return Ok(pairwise_sum(&phases));
    }
    Err(Error::QuadratureOnString(3))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn principal_value_range() {
        assert_eq!(principal_value(PI), PI);
        assert_eq!(principal_value(-PI), PI);
        assert!((principal_value(-1.98 * PI) - 0.02 * PI).abs() < 1e-12);
        assert!((principal_value(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-12);
    }

    #[test]
    fn circle_tangent_matches_finite_difference() {
        let lp = LoopSpec::circle_z_around(0.2, -0.1, 0.4, 0.3, Orientation::Cw);
        for t in [0.0, 0.13, 0.5, 0.77] {
            let fd = (lp.point(t + 1e-6) - lp.point(t - 1e-6)).scale(0.5e6);
            assert!((fd - lp.tangent(t)).norm() < 1e-6);
        }
        let c = LoopSpec::circle(ParamPoint::new(0.3, 0.0, 0.5), ParamPoint::new(1.0, 0.0, 0.0), 0.3).unwrap();
        for t in [0.0, 0.4, 0.9] {
            let fd = (c.point(t + 1e-6) - c.point(t - 1e-6)).scale(0.5e6);
            assert!((fd - c.tangent(t)).norm() < 1e-6);
            assert!((c.point(t) - ParamPoint::new(0.3, 0.0, 0.5)).norm() - 0.3 < 1e-14);
        }
    }

    #[test]
    fn loop_constructors_validate() {
        assert!(LoopSpec::polyline(vec![ParamPoint::ORIGIN, ParamPoint::new(1.0, 0.0, 0.0)]).is_err());
        let open = vec![
            ParamPoint::new(1.0, 0.0, 0.0),
            ParamPoint::new(0.0, 1.0, 0.0),
            ParamPoint::new(-1.0, 0.0, 0.0),
            ParamPoint::new(0.0, -1.0, 0.0),
        ];
        assert!(LoopSpec::polyline(open).is_err());
        assert!(LoopSpec::circle_z(0.0, 1.0, Orientation::Ccw).with_nodes(16).is_err());
        assert!(LoopSpec::parametric(|t| ParamPoint::new(t, 0.0, 0.0)).is_err());
        assert!(LoopSpec::latitude(1.0, 1.0).is_err());
    }

    #[test]
    fn protocol_vertices() {
        let p = PathSpec::protocol(ParamPoint::new(0.0, -1.0, 0.0), ParamPoint::new(0.5, 0.2, 0.3), "xyz").unwrap();
        assert_eq!(
            p.vertices(),
            vec![
                ParamPoint::new(0.0, -1.0, 0.0),
                ParamPoint::new(0.5, -1.0, 0.0),
                ParamPoint::new(0.5, 0.2, 0.0),
                ParamPoint::new(0.5, 0.2, 0.3),
            ]
        );
        assert!(parse_axis_order("xxz").is_err());
        assert!(parse_axis_order("xyw").is_err());
    }

    #[test]
    fn empty_path_has_zero_phase() {
        let rc = ParamPoint::new(0.0, -1.0, 0.0);
        let p = PathSpec::protocol(rc, rc, "xyz").unwrap();
        assert_eq!(path_phase(&ModelSpec::base(), Branch::Plus, &p).unwrap().value, 0.0);
    }

    #[test]
    fn flux_rejects_off_axis_loops() {
        let lp = LoopSpec::circle_z_around(0.1, 0.0, 0.5, 0.2, Orientation::Ccw);
        assert!(matches!(
            loop_phase_flux(-0.5, &lp, Cap::Upper, &[]),
            Err(Error::Unsupported(_))
        ));
    }

    #[test]
    fn line_integral_rejects_string_crossing() {
        // Passes through the negative z-axis.
        let lp = LoopSpec::circle_z_around(0.3, 0.0, -0.5, 0.3, Orientation::Ccw);
        assert!(matches!(
            loop_phase_line_integral(&ModelSpec::base(), Branch::Plus, &lp),
            Err(Error::LoopTouchesString(_))
        ));
        assert!(matches!(
            loop_phase_wilson(&ModelSpec::base(), Branch::Plus, &lp),
            Err(Error::LoopTouchesString(_))
        ));
    }

    #[test]
    fn coarse_wilson_loop_asks_for_refinement() {
        // Three nodes around the string: each step turns by about 2π/3.
        let triangle: Vec<ParamPoint> = (0..3)
            .map(|k| {
                let a = 2.0 * PI * k as f64 / 3.0;
                ParamPoint::new(0.05 * a.cos(), 0.05 * a.sin(), -1.0)
            })
            .collect();
        let coarse = wilson_sum(&ModelSpec::base(), Branch::Plus, Gauge::Standard, &triangle, true);
        assert!(matches!(coarse, Err(Error::Refine { .. })));
    }

    #[test]
    fn degenerate_path_needs_epsilons() {
        let path = PathSpec::Polyline(vec![ParamPoint::new(-1.0, 0.0, 0.0), ParamPoint::new(1.0, 0.0, 0.0)]);
        assert!(matches!(
            degenerate_path_phase(&ModelSpec::base(), Branch::Plus, &path, Side::PlusY, &[]),
            Err(Error::InvalidArgument(_))
        ));
    }
}
