//! End-to-end reproduction report: the five circuits, both charges, the
//! string geometry of all built-in models, the through-degeneracy limit,
//! cap consistency and the adiabatic oracle.

use std::f64::consts::PI;

use serde::Serialize;

use crate::adiabatic::{evolve, Ramp, SweepSpec};
use crate::eigen::{Branch, Gauge};
use crate::error::Result;
use crate::gauge::monopole_charge;
use crate::holonomy::{
    base_string_crossings, default_epsilons, degenerate_path_phase, loop_phase_flux, loop_phase_line_integral,
    loop_phase_wilson, Cap, LoopSpec, PathSpec, Side,
};
use crate::model::{ModelSpec, ParamPoint};
use crate::strings::{trace_strings, GridSpec};

/// Heights of the five circuits on the unit sphere.
pub const CIRCUIT_HEIGHTS: [f64; 5] = [0.0, 0.98, 0.5, -0.98, -0.5];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    fn new(name: impl Into<String>, value: f64, expected: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            value,
            expected,
            tolerance,
            passed: (value - expected).abs() <= tolerance,
        }
    }
}

/// Options trading runtime for coverage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReproduceOptions {
    pub grid_step: f64,
    pub adiabatic_time: f64,
}

impl Default for ReproduceOptions {
    fn default() -> Self {
        ReproduceOptions {
            grid_step: 0.02,
            adiabatic_time: 2000.0,
        }
    }
}

pub fn run(options: ReproduceOptions) -> Result<Vec<Check>> {
    let base = ModelSpec::base();
    let mut checks = Vec::new();

    for z in CIRCUIT_HEIGHTS {
        let lp = LoopSpec::latitude(z, 1.0)?;
        let expected = -PI * (1.0 - z);
        let line = loop_phase_line_integral(&base, Branch::Plus, &lp)?;
        let wilson = loop_phase_wilson(&base, Branch::Plus, &lp)?;
        let upper = loop_phase_flux(
            -0.5,
            &lp,
            Cap::Upper,
            &base_string_crossings(Branch::Plus, Cap::Upper, &lp)?,
        )?;
        let lower = loop_phase_flux(
            -0.5,
            &lp,
            Cap::Lower,
            &base_string_crossings(Branch::Plus, Cap::Lower, &lp)?,
        )?;
        checks.push(Check::new(
            format!("circuit z={z} line integral"),
            line.value,
            expected,
            1e-6,
        ));
        checks.push(Check::new(
            format!("circuit z={z} wilson"),
            wilson.value,
            expected,
            1e-4,
        ));
        checks.push(Check::new(
            format!("circuit z={z} upper vs lower cap"),
            upper.value,
            lower.value,
            1e-9,
        ));
        checks.push(Check::new(
            format!("circuit z={z} flux vs line integral"),
            upper.value,
            line.value,
            1e-9,
        ));
    }

    for (branch, mu) in [(Branch::Plus, -0.5), (Branch::Minus, 0.5)] {
        let report = monopole_charge(&base, ParamPoint::ORIGIN, 1.0, branch)?;
        checks.push(Check::new(format!("charge {branch}"), report.charge, mu, 1e-4));
    }

    let grid = GridSpec::cube(-1.0, 1.0, options.grid_step)?;
    let tol = options.grid_step;
    let models: [(ModelSpec, Vec<ParamPoint>); 3] = [
        (base.clone(), vec![ParamPoint::ORIGIN]),
        (
            ModelSpec::z_quadratic(0.5)?,
            vec![ParamPoint::new(0.0, 0.0, -0.5), ParamPoint::new(0.0, 0.0, 0.5)],
        ),
        (
            ModelSpec::x_cubic(-0.5, 0.2, 0.8)?,
            vec![
                ParamPoint::new(-0.5, 0.0, 0.0),
                ParamPoint::new(0.2, 0.0, 0.0),
                ParamPoint::new(0.8, 0.0, 0.0),
            ],
        ),
    ];
    for (model, expected) in &models {
        let set = trace_strings(model, Branch::Plus, Gauge::Standard, &grid)?;
        checks.push(Check::new(
            format!("{} endpoint count", model.name()),
            set.endpoints.len() as f64,
            expected.len() as f64,
            0.0,
        ));
        for e in expected {
            let nearest = set
                .endpoints
                .iter()
                .map(|p| p.distance(*e))
                .fold(f64::INFINITY, f64::min);
            checks.push(Check::new(
                format!("{} endpoint near {e}", model.name()),
                nearest,
                0.0,
                tol,
            ));
        }
        let all_degenerate = set.endpoint_is_degeneracy.iter().all(|d| *d);
        checks.push(Check::new(
            format!("{} endpoints are degeneracies", model.name()),
            if all_degenerate { 1.0 } else { 0.0 },
            1.0,
            0.0,
        ));
    }

    let axis = PathSpec::Polyline(vec![ParamPoint::new(-1.0, 0.0, 0.0), ParamPoint::new(1.0, 0.0, 0.0)]);
    for (side, expected) in [(Side::PlusY, PI / 2.0), (Side::MinusY, -PI / 2.0)] {
        let r = degenerate_path_phase(&base, Branch::Plus, &axis, side, &default_epsilons())?;
        checks.push(Check::new(
            format!("through-degeneracy limit {side:?}"),
            r.phase.value,
            expected,
            1e-6,
        ));
    }

    let sweep = SweepSpec::with_default_steps(LoopSpec::latitude(0.5, 1.0)?, options.adiabatic_time, Ramp::SmoothC1)?;
    let run = evolve(&base, Branch::Plus, &sweep)?;
    checks.push(Check::new(
        format!("adiabatic z=0.5 T={}", options.adiabatic_time),
        run.geometric_phase,
        -PI / 2.0,
        1e-2,
    ));
    Ok(checks)
}
