//! Time-dependent Schrödinger evolution along slow loops (ħ = 1).
//!
//! The geometric phase is read off from the state itself: the overlap of
//! `ψ(t)` with the normalized instantaneous eigenstate is tracked
//! continuously, and the dynamical phase `−∫E dt` is subtracted at the end.
//! No connection or overlap product from [`crate::holonomy`] is used.
//!
//! Each step applies the fourth-order Magnus propagator built from the two
//! Gauss–Legendre samples of `H`. For `H = f·σ` both the mean Hamiltonian and
//! the commutator correction are again of the form `w·σ`, so the propagator
//! `exp(−i w·σ)` is evaluated in closed form and is unitary to rounding.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::eigen::{density_of_field, eigenvector, norm_sqr, Branch, Gauge, TAU_STRING};
use crate::error::{Error, Result};
use crate::holonomy::{LoopSpec, MAX_STEP_PHASE};
use crate::model::{ModelSpec, ParamPoint};

/// Minimum number of time steps.
pub const MIN_STEPS: usize = 1000;
/// Largest accepted `max ρ · Δt`.
pub const MAX_H_DT: f64 = 0.05;
/// Sweeps whose gap `2ρ` drops below this are rejected.
pub const MIN_GAP: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ramp {
    Linear,
    /// `s(u) = (1 − cos πu)/2`: zero velocity at both ends.
    #[default]
    SmoothC1,
}

impl Ramp {
    /// Loop parameter at normalized time `u ∈ [0, 1]`.
    pub fn apply(self, u: f64) -> f64 {
        match self {
            Ramp::Linear => u,
            Ramp::SmoothC1 => 0.5 * (1.0 - (PI * u).cos()),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepSpec {
    pub lp: LoopSpec,
    pub total_time: f64,
    pub ramp: Ramp,
    pub steps: usize,
}

impl SweepSpec {
    pub fn new(lp: LoopSpec, total_time: f64, ramp: Ramp, steps: usize) -> Result<Self> {
        if !(total_time > 0.0 && total_time.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "total time must be positive, got {total_time}"
            )));
        }
        if steps < MIN_STEPS {
            return Err(Error::InvalidArgument(format!(
                "need at least {MIN_STEPS} time steps, got {steps}"
            )));
        }
        Ok(SweepSpec {
            lp,
            total_time,
            ramp,
            steps,
        })
    }

    /// Sweep with `Δt = 0.01`, the step used for the convergence tables.
    pub fn with_default_steps(lp: LoopSpec, total_time: f64, ramp: Ramp) -> Result<Self> {
        let steps = ((total_time * 100.0).ceil() as usize).max(MIN_STEPS);
        SweepSpec::new(lp, total_time, ramp, steps)
    }

    fn point(&self, t: f64) -> ParamPoint {
        self.lp.point(self.ramp.apply((t / self.total_time).clamp(0.0, 1.0)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AdiabaticRun {
    pub final_state: [Complex64; 2],
    /// `−∫₀ᵀ E(R(t)) dt`.
    pub dynamical_phase: f64,
    /// Unwrapped overlap phase minus the dynamical phase.
    pub geometric_phase: f64,
    /// `|⟨V̂(T)|ψ(T)⟩|`.
    pub fidelity: f64,
    /// Largest `|‖ψ‖ − 1|` seen before renormalizing, over all steps.
    pub norm_drift: f64,
    pub steps: usize,
    pub gauge: Gauge,
}

const C_MINUS: f64 = 0.5 - 0.288_675_134_594_812_9; // 1/2 − √3/6
const C_PLUS: f64 = 0.5 + 0.288_675_134_594_812_9;
const SQRT3_OVER_6: f64 = 0.288_675_134_594_812_9;

fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// `exp(−i w·σ) ψ`.
fn rotate(w: [f64; 3], psi: [Complex64; 2]) -> [Complex64; 2] {
    let theta = (w[0] * w[0] + w[1] * w[1] + w[2] * w[2]).sqrt();
    if theta == 0.0 {
        return psi;
    }
    let (s, c) = theta.sin_cos();
    let n = [w[0] / theta, w[1] / theta, w[2] / theta];
    let i = Complex64::i();
    // (n·σ)ψ with σ = (σx, σy, σz)
    let n_sigma = [
        n[2] * psi[0] + Complex64::new(n[0], -n[1]) * psi[1],
        Complex64::new(n[0], n[1]) * psi[0] - n[2] * psi[1],
    ];
    [c * psi[0] - i * s * n_sigma[0], c * psi[1] - i * s * n_sigma[1]]
}

fn normalized(v: [Complex64; 2]) -> [Complex64; 2] {
    let n = norm_sqr(&v).sqrt();
    [v[0] / n, v[1] / n]
}

/// Evolution with the standard-gauge reference state (or the alternate one
/// if the standard string touches the loop).
pub fn evolve(model: &ModelSpec, branch: Branch, sweep: &SweepSpec) -> Result<AdiabaticRun> {
    evolve_with_reference(model, branch, sweep, |_| 0.0)
}

/// Evolution with reference state `e^{iχ(R)} V̂(R)`. For a smooth
/// single-valued `χ` the geometric phase does not depend on it.
pub fn evolve_with_reference<F>(model: &ModelSpec, branch: Branch, sweep: &SweepSpec, chi: F) -> Result<AdiabaticRun>
where
    F: Fn(ParamPoint) -> f64,
{
    let probe = sweep.lp.clone().with_nodes(sweep.lp.nodes.max(1024))?;
    let samples = probe.samples();
    let mut max_rho: f64 = 0.0;
    for p in &samples {
        let f = model.field_vector(*p);
        let rho = (f[0] * f[0] + f[1] * f[1] + f[2] * f[2]).sqrt();
        if 2.0 * rho < MIN_GAP {
            return Err(Error::GapClosure { gap: 2.0 * rho, at: *p });
        }
        max_rho = max_rho.max(rho);
    }
    let dt = sweep.total_time / sweep.steps as f64;
    if max_rho * dt > MAX_H_DT {
        return Err(Error::Refine {
            what: "time steps",
            step: max_rho * dt,
        });
    }
    let gauge = if samples
        .iter()
        .all(|p| density_of_field(model.field_vector(*p), branch, Gauge::Standard) > TAU_STRING)
    {
        Gauge::Standard
    } else {
        Gauge::Alternate
    };
    let reference = |p: ParamPoint| {
        let v = normalized(eigenvector(model, p, branch, gauge));
        let phase = Complex64::from_polar(1.0, chi(p));
        [v[0] * phase, v[1] * phase]
    };
    let overlap = |p: ParamPoint, psi: &[Complex64; 2]| {
        let r = reference(p);
        r[0].conj() * psi[0] + r[1].conj() * psi[1]
    };

    let start = sweep.point(0.0);
    let mut psi = reference(start);
    let mut last_arg = overlap(start, &psi).arg();
    let mut tracked = 0.0;
    let mut dynamical = 0.0;
    let mut norm_drift: f64 = 0.0;
    let energy = |f: [f64; 3]| branch.sign() * (f[0] * f[0] + f[1] * f[1] + f[2] * f[2]).sqrt();
    for n in 0..sweep.steps {
        let t = n as f64 * dt;
        let a = model.field_vector(sweep.point(t + C_MINUS * dt));
        let b = model.field_vector(sweep.point(t + C_PLUS * dt));
        let axb = cross(a, b);
        let w = [
            0.5 * dt * (a[0] + b[0]) - SQRT3_OVER_6 * dt * dt * axb[0],
            0.5 * dt * (a[1] + b[1]) - SQRT3_OVER_6 * dt * dt * axb[1],
            0.5 * dt * (a[2] + b[2]) - SQRT3_OVER_6 * dt * dt * axb[2],
        ];
        psi = rotate(w, psi);
        let norm = norm_sqr(&psi).sqrt();
        norm_drift = norm_drift.max((norm - 1.0).abs());
        psi = [psi[0] / norm, psi[1] / norm];
        dynamical -= 0.5 * dt * (energy(a) + energy(b));

        let arg = overlap(sweep.point(t + dt), &psi).arg();
        let mut step = arg - last_arg;
        step -= 2.0 * PI * (step / (2.0 * PI)).round();
        if step.abs() >= MAX_STEP_PHASE {
            return Err(Error::Refine {
                what: "time steps",
                step,
            });
        }
        tracked += step;
        last_arg = arg;
    }
    let end = sweep.point(sweep.total_time);
    let fidelity = overlap(end, &psi).norm().min(1.0);
    Ok(AdiabaticRun {
        final_state: psi,
        dynamical_phase: dynamical,
        geometric_phase: tracked - dynamical,
        fidelity,
        norm_drift,
        steps: sweep.steps,
        gauge,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConvergenceRow {
    pub total_time: f64,
    pub geometric_phase: f64,
    /// `|geometric_phase − oracle|`.
    pub error: f64,
    pub fidelity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConvergenceReport {
    pub oracle: f64,
    pub rows: Vec<ConvergenceRow>,
    /// Least-squares slope `p` of `log error = c − p log T`.
    pub fitted_order: f64,
    pub monotone: bool,
}

/// Runs `evolve` for each total time (`Δt = 0.01`) and compares with `oracle`.
pub fn convergence_report(
    model: &ModelSpec,
    branch: Branch,
    lp: &LoopSpec,
    times: &[f64],
    ramp: Ramp,
    oracle: f64,
) -> Result<ConvergenceReport> {
    if times.is_empty() {
        return Err(Error::InvalidArgument("empty list of total times".into()));
    }
    if times.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::InvalidArgument("total times must be strictly ascending".into()));
    }
    let rows: Vec<Result<ConvergenceRow>> = times
        .par_iter()
        .map(|&t| {
            let sweep = SweepSpec::with_default_steps(lp.clone(), t, ramp)?;
            let run = evolve(model, branch, &sweep)?;
            Ok(ConvergenceRow {
                total_time: t,
                geometric_phase: run.geometric_phase,
                error: (run.geometric_phase - oracle).abs(),
                fidelity: run.fidelity,
            })
        })
        .collect();
    let rows: Vec<ConvergenceRow> = rows.into_iter().collect::<Result<_>>()?;
    let monotone = rows.windows(2).all(|w| w[1].error < w[0].error);
    Ok(ConvergenceReport {
        oracle,
        fitted_order: fit_order(&rows),
        rows,
        monotone,
    })
}

fn fit_order(rows: &[ConvergenceRow]) -> f64 {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.error > 0.0)
        .map(|r| (r.total_time.ln(), r.error.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    -sxy / sxx
}
