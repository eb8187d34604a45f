//! Dirac strings: nodal lines of the unnormalized eigenstates.
//!
//! A scan marks grid nodes whose normalized density falls below
//! [`TAU_STRING`], clusters them with 26-connectivity and thins each cluster
//! to a polyline through the centroids of its slices along the dominant axis.
//! Polyline termini strictly inside the scan box are endpoints; termini on
//! the box boundary are open ends of strings that leave the box.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{density_of_field, eigenvector, norm_sqr, Branch, Gauge, TAU_STRING};
use crate::error::{Error, Result};
use crate::holonomy::{loop_phase_wilson, LoopSpec, MAX_STEP_PHASE};
use crate::model::{ModelSpec, ParamPoint};

/// Threshold on `ρ` for calling a refined endpoint a degeneracy.
pub const TAU_DEG: f64 = 1e-8;
/// Raw-density level of the rendered isosurfaces.
pub const RAW_DENSITY_LEVEL: f64 = 1e-3;
/// Grids above this many nodes are rejected.
pub const MAX_GRID_NODES: usize = 50_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub min: f64,
    pub max: f64,
    pub step: f64,
}

impl AxisRange {
    /// Number of intervals; `0` for a single-valued axis.
    pub fn intervals(&self) -> usize {
        if self.min == self.max {
            0
        } else {
            ((self.max - self.min) / self.step).round().max(1.0) as usize
        }
    }

    pub fn coord(&self, k: usize) -> f64 {
        let n = self.intervals();
        if n == 0 {
            self.min
        } else {
            self.min + (self.max - self.min) * k as f64 / n as f64
        }
    }

    pub fn len(&self) -> usize {
        self.intervals() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Rectangular scan box with per-axis `min:max:step`.
///
/// Node coordinates are `min + (max − min)·k/n` with `n = round((max−min)/step)`,
/// so both box faces are sampled exactly. A single value `axis=v` pins that
/// coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub axes: [AxisRange; 3],
}

impl GridSpec {
    pub fn new(axes: [AxisRange; 3]) -> Result<Self> {
        for (name, a) in ["x", "y", "z"].iter().zip(&axes) {
            if !(a.min.is_finite() && a.max.is_finite() && a.step.is_finite()) {
                return Err(Error::EmptyGrid(format!("{name}: bounds must be finite")));
            }
            if a.min > a.max || (a.min < a.max && !(a.step > 0.0 && a.step <= a.max - a.min)) {
                return Err(Error::EmptyGrid(format!(
                    "{name}: need min < max and 0 < step <= max - min, got {}:{}:{}",
                    a.min, a.max, a.step
                )));
            }
        }
        let g = GridSpec { axes };
        if g.node_count() > MAX_GRID_NODES {
            return Err(Error::InvalidArgument(format!(
                "grid has {} nodes, limit is {MAX_GRID_NODES}",
                g.node_count()
            )));
        }
        Ok(g)
    }

    pub fn cube(min: f64, max: f64, step: f64) -> Result<Self> {
        let a = AxisRange { min, max, step };
        GridSpec::new([a, a, a])
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.axes[0].len(), self.axes[1].len(), self.axes[2].len()]
    }

    pub fn node_count(&self) -> usize {
        self.dims().iter().product()
    }

    pub fn point(&self, idx: [usize; 3]) -> ParamPoint {
        ParamPoint::new(
            self.axes[0].coord(idx[0]),
            self.axes[1].coord(idx[1]),
            self.axes[2].coord(idx[2]),
        )
    }

    fn unravel(&self, linear: usize) -> [usize; 3] {
        let [_, ny, nz] = self.dims();
        [linear / (ny * nz), (linear / nz) % ny, linear % nz]
    }

    fn ravel(&self, idx: [usize; 3]) -> usize {
        let [_, ny, nz] = self.dims();
        (idx[0] * ny + idx[1]) * nz + idx[2]
    }

    /// All nodes, x slowest and z fastest.
    pub fn points(&self) -> Vec<ParamPoint> {
        (0..self.node_count()).map(|i| self.point(self.unravel(i))).collect()
    }

    /// Largest step, used as the endpoint location tolerance.
    pub fn max_step(&self) -> f64 {
        self.axes
            .iter()
            .map(|a| {
                if a.intervals() == 0 {
                    0.0
                } else {
                    (a.max - a.min) / a.intervals() as f64
                }
            })
            .fold(0.0, f64::max)
    }

    fn on_boundary(&self, idx: [usize; 3]) -> bool {
        (0..3).any(|a| {
            let n = self.axes[a].intervals();
            n > 0 && (idx[a] == 0 || idx[a] == n)
        })
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    /// Parses `"x=-1:1:0.02,y=-1:1:0.02,z=-1:1:0.02"`.
    fn from_str(s: &str) -> Result<Self> {
        let mut axes: [Option<AxisRange>; 3] = [None; 3];
        for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, spec) = part
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("grid entry '{part}' is not axis=min:max:step")))?;
            let axis = match name.trim() {
                "x" | "X" => 0,
                "y" | "Y" => 1,
                "z" | "Z" => 2,
                other => return Err(Error::InvalidArgument(format!("unknown grid axis '{other}'"))),
            };
            let nums: Vec<f64> = spec
                .split(':')
                .map(|v| {
                    v.trim()
                        .parse::<f64>()
                        .map_err(|_| Error::InvalidArgument(format!("bad number '{v}' in grid")))
                })
                .collect::<Result<_>>()?;
            let range = match nums[..] {
                [v] => AxisRange {
                    min: v,
                    max: v,
                    step: 1.0,
                },
                [min, max, step] => AxisRange { min, max, step },
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "grid entry '{part}' needs min:max:step"
                    )))
                }
            };
            if axes[axis].replace(range).is_some() {
                return Err(Error::InvalidArgument(format!("grid axis '{name}' given twice")));
            }
        }
        match axes {
            [Some(x), Some(y), Some(z)] => GridSpec::new([x, y, z]),
            _ => Err(Error::EmptyGrid("grid must define x, y and z".into())),
        }
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, (name, a)) in ["x", "y", "z"].iter().zip(&self.axes).enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            if a.intervals() == 0 {
                write!(f, "{name}={}", a.min)?;
            } else {
                write!(f, "{name}={}:{}:{}", a.min, a.max, a.step)?;
            }
        }
        Ok(())
    }
}

/// Which end of a polyline a terminus sits at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum End {
    First,
    Last,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Terminus {
    pub string: usize,
    pub end: End,
    pub at: ParamPoint,
}

/// Traced strings of one branch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StringSet {
    pub branch: Branch,
    pub gauge: Gauge,
    pub strings: Vec<Vec<ParamPoint>>,
    /// Interior termini; after [`classify_endpoints`], refined positions.
    pub endpoints: Vec<ParamPoint>,
    /// Polyline and end each endpoint belongs to.
    pub endpoint_owner: Vec<(usize, End)>,
    /// Filled by [`classify_endpoints`]; empty before.
    pub endpoint_is_degeneracy: Vec<bool>,
    /// Residual `ρ` at each refined endpoint.
    pub endpoint_rho: Vec<f64>,
    /// Termini on the scan-box boundary.
    pub open_ends: Vec<Terminus>,
    pub nodal_nodes: usize,
}

impl StringSet {
    pub fn is_classified(&self) -> bool {
        self.endpoint_is_degeneracy.len() == self.endpoints.len()
    }
}

/// Nodal scan in the standard gauge.
pub fn scan_nodal_set(model: &ModelSpec, branch: Branch, grid: &GridSpec) -> Result<StringSet> {
    scan_nodal_set_in_gauge(model, branch, Gauge::Standard, grid)
}

const NEIGHBOURS: usize = 26;

fn neighbour_offsets() -> [[i64; 3]; NEIGHBOURS] {
    let mut out = [[0i64; 3]; NEIGHBOURS];
    let mut k = 0;
    for dx in -1..=1 {
        for dy in -1..=1 {
            for dz in -1..=1 {
                if (dx, dy, dz) != (0, 0, 0) {
                    out[k] = [dx, dy, dz];
                    k += 1;
                }
            }
        }
    }
    out
}

pub fn scan_nodal_set_in_gauge(model: &ModelSpec, branch: Branch, gauge: Gauge, grid: &GridSpec) -> Result<StringSet> {
    let total = grid.node_count();
    if total == 0 {
        return Err(Error::EmptyGrid("grid has no nodes".into()));
    }
    let nodal: Vec<bool> = (0..total)
        .into_par_iter()
        .map(|i| density_of_field(model.field_vector(grid.point(grid.unravel(i))), branch, gauge) < TAU_STRING)
        .collect();
    let nodal_nodes = nodal.iter().filter(|b| **b).count();

    // Clusters in order of their smallest linear index.
    let dims = grid.dims();
    let offsets = neighbour_offsets();
    let mut label = vec![usize::MAX; total];
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    for seed in 0..total {
        if !nodal[seed] || label[seed] != usize::MAX {
            continue;
        }
        let id = clusters.len();
        label[seed] = id;
        let mut members = vec![seed];
        let mut head = 0;
        while head < members.len() {
            let idx = grid.unravel(members[head]);
            head += 1;
            for off in &offsets {
                let mut n = [0usize; 3];
                let mut inside = true;
                for a in 0..3 {
                    let c = idx[a] as i64 + off[a];
                    if c < 0 || c >= dims[a] as i64 {
                        inside = false;
                        break;
                    }
                    n[a] = c as usize;
                }
                if !inside {
                    continue;
                }
                let j = grid.ravel(n);
                if nodal[j] && label[j] == usize::MAX {
                    label[j] = id;
                    members.push(j);
                }
            }
        }
        members.sort_unstable();
        clusters.push(members);
    }

    let mut set = StringSet {
        branch,
        gauge,
        strings: Vec::new(),
        endpoints: Vec::new(),
        endpoint_owner: Vec::new(),
        endpoint_is_degeneracy: Vec::new(),
        endpoint_rho: Vec::new(),
        open_ends: Vec::new(),
        nodal_nodes,
    };
    for members in clusters {
        let idxs: Vec<[usize; 3]> = members.iter().map(|&m| grid.unravel(m)).collect();
        let extent = |a: usize| {
            let lo = idxs.iter().map(|i| i[a]).min().unwrap_or(0);
            let hi = idxs.iter().map(|i| i[a]).max().unwrap_or(0);
            hi - lo
        };
        let dominant = (0..3).max_by_key(|&a| (extent(a), std::cmp::Reverse(a))).unwrap_or(2);
        let mut slices: std::collections::BTreeMap<usize, Vec<[usize; 3]>> = std::collections::BTreeMap::new();
        for i in &idxs {
            slices.entry(i[dominant]).or_default().push(*i);
        }
        let string_id = set.strings.len();
        let mut polyline = Vec::with_capacity(slices.len());
        let mut touches_boundary = Vec::with_capacity(slices.len());
        for nodes in slices.values() {
            let n = nodes.len() as f64;
            let sum = nodes.iter().fold(ParamPoint::ORIGIN, |acc, i| acc + grid.point(*i));
            polyline.push(sum.scale(1.0 / n));
            touches_boundary.push(nodes.iter().any(|i| grid.on_boundary(*i)));
        }
        let last = polyline.len() - 1;
        let ends: &[(End, usize)] = if last == 0 {
            &[(End::First, 0)]
        } else {
            &[(End::First, 0), (End::Last, last)]
        };
        for &(end, k) in ends {
            if touches_boundary[k] {
                set.open_ends.push(Terminus {
                    string: string_id,
                    end,
                    at: polyline[k],
                });
            } else {
                set.endpoints.push(polyline[k]);
                set.endpoint_owner.push((string_id, end));
            }
        }
        set.strings.push(polyline);
    }
    Ok(set)
}

/// Minimizes `ρ²` by compass search from `start`, halving the step until it
/// drops below `1e−10`.
pub fn refine_endpoint(model: &ModelSpec, start: ParamPoint, initial_step: f64) -> ParamPoint {
    let rho2 = |p: ParamPoint| {
        let f = model.field_vector(p);
        f[0] * f[0] + f[1] * f[1] + f[2] * f[2]
    };
    let mut p = start;
    let mut best = rho2(p);
    let mut step = initial_step.max(1e-9);
    while step >= 1e-10 && best > 0.0 {
        let mut moved = false;
        for axis in 0..3 {
            for dir in [1.0, -1.0] {
                let q = p.shifted(axis, dir * step);
                let v = rho2(q);
                if v < best {
                    p = q;
                    best = v;
                    moved = true;
                    break;
                }
            }
        }
        if !moved {
            step *= 0.5;
        }
    }
    p
}

/// Refines every interior endpoint to a local minimum of `ρ²` and flags it
/// as a degeneracy when `ρ < τ_deg` there. The owning polyline's terminal
/// vertex is moved to the refined point.
pub fn classify_endpoints(model: &ModelSpec, set: &StringSet, grid_step: f64) -> StringSet {
    let mut out = set.clone();
    out.endpoint_is_degeneracy.clear();
    out.endpoint_rho.clear();
    for (k, e) in set.endpoints.iter().enumerate() {
        let refined = refine_endpoint(model, *e, grid_step);
        let f = model.field_vector(refined);
        let rho = (f[0] * f[0] + f[1] * f[1] + f[2] * f[2]).sqrt();
        out.endpoints[k] = refined;
        out.endpoint_rho.push(rho);
        out.endpoint_is_degeneracy.push(rho < TAU_DEG);
        let (sid, end) = set.endpoint_owner[k];
        let line = &mut out.strings[sid];
        match end {
            End::First => line[0] = refined,
            End::Last => {
                let n = line.len() - 1;
                line[n] = refined;
            }
        }
    }
    out
}

/// Scan followed by classification.
pub fn trace_strings(model: &ModelSpec, branch: Branch, gauge: Gauge, grid: &GridSpec) -> Result<StringSet> {
    let set = scan_nodal_set_in_gauge(model, branch, gauge, grid)?;
    Ok(classify_endpoints(model, &set, grid.max_step()))
}

/// Phase change around `lp` in units of `2π`, from the discrete holonomy.
pub fn string_charge(model: &ModelSpec, branch: Branch, lp: &LoopSpec) -> Result<i64> {
    let phase = loop_phase_wilson(model, branch, lp)?;
    Ok((phase.value / (2.0 * PI)).round() as i64)
}

const MAX_WINDING_NODES: usize = 1 << 20;

/// Winding number of eigenvector component `component` (1 or 2) around zero
/// along `lp`. The discretization is doubled until every step turns by less
/// than π/2.
pub fn component_plane_winding(model: &ModelSpec, branch: Branch, component: usize, lp: &LoopSpec) -> Result<i64> {
    if !(1..=2).contains(&component) {
        return Err(Error::InvalidArgument(format!(
            "component must be 1 or 2, got {component}"
        )));
    }
    let mut nodes = lp.nodes;
    loop {
        let probe = lp.clone().with_nodes(nodes)?;
        let points = probe.samples();
        let vectors: Vec<_> = points
            .iter()
            .map(|p| eigenvector(model, *p, branch, Gauge::Standard))
            .collect();
        let scale = vectors.iter().map(|v| norm_sqr(v).sqrt()).fold(0.0, f64::max);
        let values: Vec<_> = points
            .iter()
            .zip(&vectors)
            .map(|(p, v)| {
                let c = v[component - 1];
                if c.norm() <= 1e-12 * scale {
                    Err(Error::ComponentVanishes(*p))
                } else {
                    Ok(c)
                }
            })
            .collect::<Result<_>>()?;
        let n = values.len();
        let steps: Vec<f64> = (0..n).map(|k| (values[(k + 1) % n] / values[k]).arg()).collect();
        if steps.iter().all(|s| s.abs() < MAX_STEP_PHASE) {
            let total: f64 = steps.iter().sum();
            return Ok((total / (2.0 * PI)).round() as i64);
        }
        if nodes >= MAX_WINDING_NODES {
            let worst = steps
                .iter()
                .copied()
                .fold(0.0, |a: f64, b| if b.abs() > a.abs() { b } else { a });
            return Err(Error::Refine {
                what: "winding loop nodes",
                step: worst,
            });
        }
        nodes *= 2;
    }
}

/// Grid nodes where the raw density `‖V‖²` is below `level`.
pub fn raw_density_cells(model: &ModelSpec, branch: Branch, grid: &GridSpec, level: f64) -> Vec<ParamPoint> {
    let points = grid.points();
    points
        .into_par_iter()
        .filter(|p| norm_sqr(&eigenvector(model, *p, branch, Gauge::Standard)) < level)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::holonomy::Orientation;

    #[test]
    fn grid_parsing() {
        let g: GridSpec = "x=-1:1:0.5,y=0:1:0.25,z=2".parse().unwrap();
        assert_eq!(g.dims(), [5, 5, 1]);
        assert_eq!(g.point([4, 4, 0]), ParamPoint::new(1.0, 1.0, 2.0));
        assert_eq!(g.to_string(), "x=-1:1:0.5,y=0:1:0.25,z=2");
        assert!("x=-1:1:0.5,y=0:1:0.25".parse::<GridSpec>().is_err());
        assert!("x=1:-1:0.5,y=0:1:0.25,z=0".parse::<GridSpec>().is_err());
        assert!("x=-1:1:0,y=0:1:0.25,z=0".parse::<GridSpec>().is_err());
        assert!("x=-1:1:3,y=0:1:0.25,z=0".parse::<GridSpec>().is_err());
        assert!("w=0,y=0,z=0".parse::<GridSpec>().is_err());
    }

    #[test]
    fn grid_hits_box_faces_and_centre() {
        let g = GridSpec::cube(-1.0, 1.0, 0.02).unwrap();
        assert_eq!(g.dims(), [101, 101, 101]);
        assert_eq!(g.axes[0].coord(50), 0.0);
        assert_eq!(g.axes[0].coord(100), 1.0);
        for i in [0, 37, 100] {
            assert_eq!(g.unravel(g.ravel([i, 100 - i, 3])), [i, 100 - i, 3]);
        }
    }

    #[test]
    fn base_strings_on_a_coarse_grid() {
        let g = GridSpec::cube(-1.0, 1.0, 0.1).unwrap();
        let set = trace_strings(&ModelSpec::base(), Branch::Plus, Gauge::Standard, &g).unwrap();
        assert_eq!(set.strings.len(), 1);
        assert_eq!(set.endpoints, vec![ParamPoint::ORIGIN]);
        assert_eq!(set.endpoint_is_degeneracy, vec![true]);
        assert_eq!(set.open_ends.len(), 1);
        assert!(set.strings[0].iter().all(|p| p.x == 0.0 && p.y == 0.0 && p.z <= 0.0));

        let alt = trace_strings(&ModelSpec::base(), Branch::Plus, Gauge::Alternate, &g).unwrap();
        assert!(alt.strings[0].iter().all(|p| p.z >= 0.0));
        assert_eq!(alt.endpoints, set.endpoints);
    }

    #[test]
    fn no_nodal_cells_is_an_empty_set() {
        let g: GridSpec = "x=0.5:1:0.1,y=0.5:1:0.1,z=-1:1:0.1".parse().unwrap();
        let set = scan_nodal_set(&ModelSpec::base(), Branch::Plus, &g).unwrap();
        assert!(set.strings.is_empty() && set.endpoints.is_empty() && set.nodal_nodes == 0);
    }

    #[test]
    fn refinement_reaches_the_cubic_roots() {
        let m = ModelSpec::x_cubic(-0.5, 0.2, 0.8).unwrap();
        let p = refine_endpoint(&m, ParamPoint::new(0.21, 0.01, -0.02), 0.02);
        assert!(p.distance(ParamPoint::new(0.2, 0.0, 0.0)) < 1e-9, "{p}");
    }

    #[test]
    fn string_charges() {
        let base = ModelSpec::base();
        let around = |z: f64| LoopSpec::circle_z(z, 0.05, Orientation::Ccw);
        assert_eq!(string_charge(&base, Branch::Plus, &around(-1.0)).unwrap(), -1);
        // Counterclockwise about +Z runs against the lower-branch string,
        // which points down towards its endpoint.
        assert_eq!(string_charge(&base, Branch::Minus, &around(1.0)).unwrap(), -1);
        let cw = LoopSpec::circle_z(1.0, 0.05, Orientation::Cw);
        assert_eq!(string_charge(&base, Branch::Minus, &cw).unwrap(), 1);
        let free = LoopSpec::circle_z_around(0.5, 0.5, 0.5, 0.05, Orientation::Ccw);
        assert_eq!(string_charge(&base, Branch::Plus, &free).unwrap(), 0);
    }

    #[test]
    fn component_windings() {
        let base = ModelSpec::base();
        let lp = LoopSpec::circle_z(-0.5, 1.0, Orientation::Ccw);
        assert_eq!(component_plane_winding(&base, Branch::Plus, 2, &lp).unwrap(), 1);
        assert_eq!(component_plane_winding(&base, Branch::Plus, 1, &lp).unwrap(), 0);
        let cubic = ModelSpec::x_cubic(-0.5, 0.2, 0.8).unwrap();
        let lp = LoopSpec::circle_z_around(0.2, 0.0, 0.5, 0.1, Orientation::Ccw);
        assert_eq!(component_plane_winding(&cubic, Branch::Plus, 2, &lp).unwrap(), -1);
        assert!(component_plane_winding(&base, Branch::Plus, 3, &lp).is_err());
        let through = LoopSpec::circle_z_around(0.1, 0.0, 0.0, 0.1, Orientation::Ccw);
        assert!(matches!(
            component_plane_winding(&base, Branch::Plus, 2, &through),
            Err(Error::ComponentVanishes(_))
        ));
    }

    #[test]
    fn raw_cells_follow_the_string() {
        let g = GridSpec::cube(-1.0, 1.0, 0.1).unwrap();
        let cells = raw_density_cells(&ModelSpec::base(), Branch::Plus, &g, RAW_DENSITY_LEVEL);
        assert!(!cells.is_empty());
        assert!(cells.iter().all(|p| p.x.abs() < 0.2 && p.y.abs() < 0.2 && p.z <= 0.0));
    }
}
