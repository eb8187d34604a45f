//! Subcommand bodies. Each returns the envelope and a one-paragraph summary.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use dirac_phase::adiabatic::{convergence_report, evolve, Ramp, SweepSpec};
use dirac_phase::eigen::{eigenpair, normalized_density};
use dirac_phase::gauge::{
    connection_analytic, connection_numeric_in_gauge, curvature, monopole_charge_with, SphereGrid,
};
use dirac_phase::holonomy::{
    base_string_crossings, default_epsilons, degenerate_path_phase, loop_phase_flux, loop_phase_line_integral,
    loop_phase_line_integral_in_gauge, loop_phase_wilson_in_gauge, phase_map, principal_value, Cap, LoopSpec, PathSpec,
    PhaseResult, Side,
};
use dirac_phase::reproduce::{self, ReproduceOptions};
use dirac_phase::strings::{raw_density_cells, trace_strings, GridSpec, StringSet, RAW_DENSITY_LEVEL};
use dirac_phase::{Branch, Error, Gauge, ModelSpec, ParamPoint};
use serde_json::{json, Value};

use crate::args::{BranchArg, GaugeArg, ModelArgs, OutDirArgs};
use crate::envelope::{to_json_string, to_value, ResultEnvelope};
use crate::{CapArg, Command, Failure, FigureArg, MethodArg, RampArg, SideArg};

type Outcome = Result<(ResultEnvelope, String), Failure>;

/// Phases agreeing to this many radians are reported as consistent.
const AGREEMENT_TOL: f64 = 1e-4;

pub fn execute(cmd: &Command) -> Outcome {
    match cmd {
        Command::Eigen { model, at, gauge } => eigen(model, *at, *gauge),
        Command::Strings {
            model,
            branch,
            gauge,
            grid,
            out,
        } => strings(model, *branch, *gauge, grid, out),
        Command::Connection {
            model,
            branch,
            at,
            gauge,
            h,
        } => connection(model, *branch, *at, *gauge, *h),
        Command::Curvature { model, branch, at, h } => curvature_cmd(model, *branch, *at, *h),
        Command::Charge {
            model,
            branch,
            center,
            radius,
            gauge,
        } => charge(model, *branch, *center, *radius, *gauge),
        Command::LoopPhase {
            model,
            branch,
            circle,
            method,
            cap,
            gauge,
        } => {
            let lp = circle.build()?;
            loop_phase(model, *branch, &lp, &circle.circle, *method, *cap, *gauge)
        }
        Command::PhaseMap {
            model,
            branch,
            rc,
            protocol,
            grid,
            out,
        } => phase_map_cmd(model, *branch, *rc, protocol, grid, out),
        Command::DegeneratePath {
            model,
            branch,
            side,
            from,
            to,
            epsilons,
        } => degenerate_path(model, *branch, *side, *from, *to, epsilons),
        Command::Adiabatic {
            model,
            branch,
            circle,
            total_time,
            steps,
            ramp,
        } => {
            let lp = circle.build()?;
            adiabatic(model, *branch, &lp, &circle.circle, *total_time, *steps, *ramp)
        }
        Command::AdiabaticSweep {
            model,
            branch,
            circle,
            times,
            ramp,
            out,
        } => {
            let lp = circle.build()?;
            adiabatic_sweep(model, *branch, &lp, &circle.circle, times, *ramp, out)
        }
        Command::ReproducePaper { grid_step, total_time } => reproduce_paper(*grid_step, *total_time),
        Command::ExportFigure { which, grid, out } => export_figure(*which, grid, out),
    }
}

fn start(command: &str, model: &ModelSpec) -> ResultEnvelope {
    let mut env = ResultEnvelope::new(command);
    env.model = to_value(model);
    env
}

fn model_of(args: &ModelArgs) -> Result<ModelSpec, Failure> {
    Ok(args.build()?)
}

fn phase_json(r: &PhaseResult) -> Value {
    json!({
        "method": r.method.to_string(),
        "value_rad": r.value,
        "value_over_pi": r.over_pi(),
        "principal_rad": r.principal,
        "principal_over_pi": r.principal / PI,
        "description": r.description,
    })
}

fn over_pi(v: [f64; 3]) -> [f64; 3] {
    v.map(|c| c / PI)
}

fn write_file(dir: &Path, name: &str, contents: &str) -> Result<PathBuf, Failure> {
    fs::create_dir_all(dir).map_err(|e| Failure::Io(dir.to_path_buf(), e))?;
    let path = dir.join(name);
    fs::write(&path, contents).map_err(|e| Failure::Io(path.clone(), e))?;
    Ok(path)
}

fn strings_csv(set: &StringSet) -> String {
    let mut s = String::from("string_id,vertex_index,x,y,z\n");
    for (id, line) in set.strings.iter().enumerate() {
        for (k, p) in line.iter().enumerate() {
            let _ = writeln!(s, "{id},{k},{},{},{}", p.x, p.y, p.z);
        }
    }
    s
}

fn cells_csv(cells: &[ParamPoint]) -> String {
    let mut s = String::from("x,y,z\n");
    for p in cells {
        let _ = writeln!(s, "{},{},{}", p.x, p.y, p.z);
    }
    s
}

fn string_summary(set: &StringSet) -> Value {
    json!({
        "branch": set.branch,
        "gauge": set.gauge,
        "string_count": set.strings.len(),
        "vertex_counts": set.strings.iter().map(Vec::len).collect::<Vec<_>>(),
        "endpoints": set.endpoints.iter().map(|p| p.to_array()).collect::<Vec<_>>(),
        "degeneracy_flags": set.endpoint_is_degeneracy,
        "endpoint_rho": set.endpoint_rho,
        "open_ends": set.open_ends.iter().map(|t| json!({ "string": t.string, "end": t.end, "at": t.at.to_array() })).collect::<Vec<_>>(),
        "nodal_nodes": set.nodal_nodes,
    })
}

fn format_points(ps: &[ParamPoint]) -> String {
    if ps.is_empty() {
        return "none".into();
    }
    ps.iter()
        .map(|p| format!("({:.4}, {:.4}, {:.4})", p.x, p.y, p.z))
        .collect::<Vec<_>>()
        .join(", ")
}

fn eigen(args: &ModelArgs, at: ParamPoint, gauge: GaugeArg) -> Outcome {
    let model = model_of(args)?;
    let mut env = start("eigen", &model);
    env.input("at", at.to_array());
    env.input("gauge", Gauge::from(gauge));
    let pairs = Branch::BOTH.map(|b| eigenpair(&model, at, b, gauge.into()));
    let degenerate = pairs[0].degenerate;
    if degenerate {
        env.warnings
            .push("the energies are degenerate here; both eigenvectors vanish".into());
    }
    env.outputs = json!({
        "energies": pairs.each_ref().map(|p| p.energy),
        "vectors": pairs.each_ref().map(|p| p.vector.map(|c| [c.re, c.im])),
        "on_string": pairs.each_ref().map(|p| p.on_string),
        "normalized_density": pairs.each_ref().map(|p| normalized_density(p).ok()),
        "degenerate": degenerate,
        "rho": pairs[0].rho,
        "field": pairs[0].field,
    });
    let summary = format!(
        "E+ = {:.6}, E- = {:.6}; on string: plus {}, minus {}",
        pairs[0].energy, pairs[1].energy, pairs[0].on_string, pairs[1].on_string
    );
    Ok((env, summary))
}

fn strings(args: &ModelArgs, branch: BranchArg, gauge: GaugeArg, grid: &str, out: &OutDirArgs) -> Outcome {
    let model = model_of(args)?;
    let grid: GridSpec = grid.parse()?;
    let (branch, gauge) = (Branch::from(branch), Gauge::from(gauge));
    let mut env = start("strings", &model);
    env.input("branch", branch);
    env.input("gauge", gauge);
    env.input("grid", grid.to_string());
    let set = trace_strings(&model, branch, gauge, &grid)?;
    let mut outputs = string_summary(&set);
    match &out.out_dir {
        Some(dir) => {
            let name = format!("strings_{}_{branch}.csv", model.name());
            let path = write_file(dir, &name, &strings_csv(&set))?;
            outputs["polylines_csv"] = json!(path.display().to_string());
        }
        None => {
            env.warnings
                .push("no output directory given; polylines are inlined".into());
            outputs["polylines"] = to_value(
                set.strings
                    .iter()
                    .map(|l| l.iter().map(|p| p.to_array()).collect::<Vec<_>>())
                    .collect::<Vec<_>>(),
            );
        }
    }
    env.outputs = outputs;
    let summary = format!(
        "{} {branch}: {} string(s), endpoints {}",
        model.name(),
        set.strings.len(),
        format_points(&set.endpoints)
    );
    Ok((env, summary))
}

fn connection(args: &ModelArgs, branch: BranchArg, at: ParamPoint, gauge: GaugeArg, h: f64) -> Outcome {
    let model = model_of(args)?;
    let (branch, gauge) = (Branch::from(branch), Gauge::from(gauge));
    let mut env = start("connection", &model);
    env.input("branch", branch);
    env.input("at", at.to_array());
    env.input("gauge", gauge);
    env.input("h", h);
    let sample = connection_numeric_in_gauge(&model, at, branch, gauge, h)?;
    let mut outputs = json!({
        "a": sample.a,
        "a_over_pi": over_pi(sample.a),
        "a_imag": sample.a_imag,
        "units": "radians per unit parameter length",
    });
    if model.is_base() && gauge == Gauge::Standard {
        let exact = connection_analytic(at, branch)?;
        outputs["a_analytic"] = json!(exact.a);
        outputs["a_analytic_over_pi"] = json!(over_pi(exact.a));
    }
    env.outputs = outputs;
    let summary = format!("A = ({:.6e}, {:.6e}, {:.6e})", sample.a[0], sample.a[1], sample.a[2]);
    Ok((env, summary))
}

fn curvature_cmd(args: &ModelArgs, branch: BranchArg, at: ParamPoint, h: f64) -> Outcome {
    let model = model_of(args)?;
    let branch = Branch::from(branch);
    let mut env = start("curvature", &model);
    env.input("branch", branch);
    env.input("at", at.to_array());
    env.input("h", h);
    let b = curvature(&model, at, branch, h)?;
    let mut outputs = json!({ "b": b, "b_over_pi": over_pi(b) });
    if model.is_base() {
        let r3 = at.norm().powi(3);
        let exact = at.scale(branch.monopole_charge() / r3).to_array();
        outputs["b_analytic"] = json!(exact);
        outputs["b_analytic_over_pi"] = json!(over_pi(exact));
    }
    env.outputs = outputs;
    let summary = format!("B = ({:.6e}, {:.6e}, {:.6e})", b[0], b[1], b[2]);
    Ok((env, summary))
}

fn charge(args: &ModelArgs, branch: BranchArg, center: ParamPoint, radius: f64, gauge: GaugeArg) -> Outcome {
    let model = model_of(args)?;
    let (branch, gauge) = (Branch::from(branch), Gauge::from(gauge));
    let mut env = start("charge", &model);
    env.input("branch", branch);
    env.input("center", center.to_array());
    env.input("radius", radius);
    env.input("gauge", gauge);
    let report = monopole_charge_with(&model, center, radius, branch, gauge, SphereGrid::default())?;
    env.outputs = json!({
        "charge": report.charge,
        "string_charge": 2.0 * report.charge,
        "flux_rad": report.flux,
        "flux_over_pi": report.flux / PI,
        "quadrature_nodes": report.quadrature_nodes,
        "axis": report.axis,
        "retries": report.retries,
    });
    let summary = format!("{branch}: enclosed charge {:.8}", report.charge);
    Ok((env, summary))
}

#[allow(clippy::too_many_arguments)]
fn loop_phase(
    args: &ModelArgs,
    branch: BranchArg,
    lp: &LoopSpec,
    circle: &str,
    method: MethodArg,
    cap: CapArg,
    gauge: GaugeArg,
) -> Outcome {
    let model = model_of(args)?;
    let (branch, gauge) = (Branch::from(branch), Gauge::from(gauge));
    let cap = match cap {
        CapArg::Upper => Cap::Upper,
        CapArg::Lower => Cap::Lower,
    };
    let mut env = start("loop-phase", &model);
    env.input("branch", branch);
    env.input("circle", circle);
    env.input("loop", lp.describe());
    env.input("nodes", lp.nodes);
    env.input("method", format!("{method:?}").to_lowercase());
    env.input("cap", cap);
    env.input("gauge", gauge);

    let mut results = Vec::new();
    if matches!(method, MethodArg::Analytic | MethodArg::All) {
        results.push(loop_phase_line_integral_in_gauge(&model, branch, gauge, lp)?);
    }
    if matches!(method, MethodArg::Wilson | MethodArg::All) {
        results.push(loop_phase_wilson_in_gauge(&model, branch, gauge, lp)?);
    }
    if matches!(method, MethodArg::Flux | MethodArg::All) {
        let flux = if !model.is_base() {
            Err(Error::Unsupported(
                "the flux prediction is tabulated for the base model".into(),
            ))
        } else if gauge != Gauge::Standard {
            Err(Error::Unsupported(
                "the flux prediction uses the standard gauge's strings".into(),
            ))
        } else {
            base_string_crossings(branch, cap, lp)
                .and_then(|strings| loop_phase_flux(branch.monopole_charge(), lp, cap, &strings))
        };
        match flux {
            Ok(r) => results.push(r),
            Err(e) if method == MethodArg::All => env.warnings.push(format!("flux prediction skipped: {e}")),
            Err(e) => return Err(e.into()),
        }
    }

    let mut max_diff: f64 = 0.0;
    let mut max_diff_mod: f64 = 0.0;
    let mut pairs = Vec::new();
    for (i, a) in results.iter().enumerate() {
        for b in &results[i + 1..] {
            let d = (a.value - b.value).abs();
            let dm = principal_value(a.value - b.value).abs();
            max_diff = max_diff.max(d);
            max_diff_mod = max_diff_mod.max(dm);
            pairs.push(json!({ "methods": [a.method.to_string(), b.method.to_string()], "abs_difference_rad": d }));
        }
    }
    let primary = &results[0];
    let mut outputs = phase_json(primary);
    outputs["results"] = Value::Array(results.iter().map(phase_json).collect());
    outputs["agreement_report"] = json!({
        "pairs": pairs,
        "max_abs_difference_rad": max_diff,
        "max_abs_difference_mod_2pi_rad": max_diff_mod,
        "tolerance_rad": AGREEMENT_TOL,
        "consistent": max_diff <= AGREEMENT_TOL,
    });
    env.outputs = outputs;
    let mut summary = String::new();
    for r in &results {
        let _ = writeln!(
            summary,
            "{:>16}: {:+.10} rad = {:+.8} pi",
            r.method.to_string(),
            r.value,
            r.over_pi()
        );
    }
    let _ = write!(summary, "max difference {max_diff:.3e} rad");
    Ok((env, summary))
}

fn phase_map_cmd(
    args: &ModelArgs,
    branch: BranchArg,
    rc: ParamPoint,
    protocol: &str,
    grid: &str,
    out: &OutDirArgs,
) -> Outcome {
    let model = model_of(args)?;
    let grid: GridSpec = grid.parse()?;
    let branch = Branch::from(branch);
    let mut env = start("phase-map", &model);
    env.input("branch", branch);
    env.input("rc", rc.to_array());
    env.input("protocol", protocol);
    env.input("grid", grid.to_string());
    let rows = phase_map(&model, branch, rc, protocol, &grid)?;
    let failed = rows.iter().filter(|r| r.1.is_none()).count();
    if failed > 0 {
        env.warnings.push(format!(
            "{failed} node(s) could not be reached without touching a string"
        ));
    }
    let mut outputs = json!({ "nodes": rows.len(), "evaluated": rows.len() - failed, "failed": failed });
    match &out.out_dir {
        Some(dir) => {
            let mut csv = String::from("x,y,z,gamma_rad\n");
            for (p, g) in &rows {
                let g = g.map(|v| v.to_string()).unwrap_or_default();
                let _ = writeln!(csv, "{},{},{},{g}", p.x, p.y, p.z);
            }
            let name = format!("phase_map_{}_{branch}_{protocol}.csv", model.name());
            outputs["csv"] = json!(write_file(dir, &name, &csv)?.display().to_string());
        }
        None => {
            env.warnings.push("no output directory given; rows are inlined".into());
            outputs["rows"] = Value::Array(
                rows.iter()
                    .map(|(p, g)| json!({ "at": p.to_array(), "gamma_rad": g, "gamma_over_pi": g.map(|v| v / PI) }))
                    .collect(),
            );
        }
    }
    env.outputs = outputs;
    let summary = format!("{} node(s) evaluated, {failed} skipped", rows.len() - failed);
    Ok((env, summary))
}

fn degenerate_path(
    args: &ModelArgs,
    branch: BranchArg,
    side: SideArg,
    from: f64,
    to: f64,
    epsilons: &[f64],
) -> Outcome {
    let model = model_of(args)?;
    let branch = Branch::from(branch);
    let epsilons = if epsilons.is_empty() {
        default_epsilons()
    } else {
        epsilons.to_vec()
    };
    let mut env = start("degenerate-path", &model);
    env.input("branch", branch);
    env.input("from", [from, 0.0, 0.0]);
    env.input("to", [to, 0.0, 0.0]);
    env.input("epsilons", &epsilons);
    let path = PathSpec::Polyline(vec![ParamPoint::new(from, 0.0, 0.0), ParamPoint::new(to, 0.0, 0.0)]);
    let sides = match side {
        SideArg::PlusY => vec![Side::PlusY],
        SideArg::MinusY => vec![Side::MinusY],
        SideArg::Both => vec![Side::PlusY, Side::MinusY],
    };
    let mut limits = Vec::new();
    let mut summary = String::new();
    for s in sides {
        let r = degenerate_path_phase(&model, branch, &path, s, &epsilons)?;
        let mut v = phase_json(&r.phase);
        v["side"] = to_value(s);
        v["samples"] = Value::Array(
            r.samples
                .iter()
                .map(|(e, p)| json!({ "epsilon": e, "phase_rad": p }))
                .collect(),
        );
        let _ = writeln!(
            summary,
            "{s:?}: {:+.10} rad = {:+.8} pi",
            r.phase.value,
            r.phase.over_pi()
        );
        limits.push((r.phase.value, v));
    }
    let mut outputs = json!({ "limits": limits.iter().map(|l| l.1.clone()).collect::<Vec<_>>() });
    if let [(a, _), (b, _)] = &limits[..] {
        outputs["difference_rad"] = json!(a - b);
        outputs["difference_over_pi"] = json!((a - b) / PI);
    }
    env.outputs = outputs;
    Ok((env, summary.trim_end().to_string()))
}

fn ramp_of(r: RampArg) -> Ramp {
    match r {
        RampArg::Linear => Ramp::Linear,
        RampArg::Smooth => Ramp::SmoothC1,
    }
}

fn adiabatic(
    args: &ModelArgs,
    branch: BranchArg,
    lp: &LoopSpec,
    circle: &str,
    total_time: f64,
    steps: Option<usize>,
    ramp: RampArg,
) -> Outcome {
    let model = model_of(args)?;
    let branch = Branch::from(branch);
    let ramp = ramp_of(ramp);
    let sweep = match steps {
        Some(n) => SweepSpec::new(lp.clone(), total_time, ramp, n)?,
        None => SweepSpec::with_default_steps(lp.clone(), total_time, ramp)?,
    };
    let mut env = start("adiabatic", &model);
    env.input("branch", branch);
    env.input("circle", circle);
    env.input("loop", lp.describe());
    env.input("T", total_time);
    env.input("steps", sweep.steps);
    env.input("ramp", ramp);
    let run = evolve(&model, branch, &sweep)?;
    let line = loop_phase_line_integral(&model, branch, lp)?;
    let diff = principal_value(run.geometric_phase - line.value);
    env.outputs = json!({
        "geometric_phase_rad": run.geometric_phase,
        "geometric_phase_over_pi": run.geometric_phase / PI,
        "geometric_phase_principal_rad": principal_value(run.geometric_phase),
        "dynamical_phase_rad": run.dynamical_phase,
        "dynamical_phase_over_pi": run.dynamical_phase / PI,
        "fidelity": run.fidelity,
        "norm_drift": run.norm_drift,
        "steps": run.steps,
        "gauge": run.gauge,
        "line_integral_rad": line.value,
        "line_integral_over_pi": line.over_pi(),
        "difference_mod_2pi_rad": diff,
    });
    let summary = format!(
        "geometric {:+.8} rad = {:+.6} pi (line integral {:+.6} pi), fidelity {:.8}",
        run.geometric_phase,
        run.geometric_phase / PI,
        line.over_pi(),
        run.fidelity
    );
    Ok((env, summary))
}

fn adiabatic_sweep(
    args: &ModelArgs,
    branch: BranchArg,
    lp: &LoopSpec,
    circle: &str,
    times: &[f64],
    ramp: RampArg,
    out: &OutDirArgs,
) -> Outcome {
    let model = model_of(args)?;
    let branch = Branch::from(branch);
    let ramp = ramp_of(ramp);
    let mut env = start("adiabatic-sweep", &model);
    env.input("branch", branch);
    env.input("circle", circle);
    env.input("loop", lp.describe());
    env.input("T_list", times);
    env.input("ramp", ramp);
    let oracle = loop_phase_line_integral(&model, branch, lp)?;
    let report = convergence_report(&model, branch, lp, times, ramp, oracle.value)?;
    let rows: Vec<Value> = report
        .rows
        .iter()
        .map(|r| {
            json!({
                "T": r.total_time,
                "phase_rad": r.geometric_phase,
                "phase_over_pi": r.geometric_phase / PI,
                "error": r.error,
                "fidelity": r.fidelity,
            })
        })
        .collect();
    let mut outputs = json!({
        "oracle_rad": report.oracle,
        "oracle_over_pi": report.oracle / PI,
        "rows": rows,
        "fitted_order": report.fitted_order,
        "monotone": report.monotone,
    });
    if let Some(dir) = &out.out_dir {
        let mut csv = String::from("T,phase,error,fidelity\n");
        for r in &report.rows {
            let _ = writeln!(csv, "{},{},{},{}", r.total_time, r.geometric_phase, r.error, r.fidelity);
        }
        let name = format!("adiabatic_sweep_{}_{branch}.csv", model.name());
        outputs["csv"] = json!(write_file(dir, &name, &csv)?.display().to_string());
    }
    env.outputs = outputs;
    let mut summary = String::new();
    for r in &report.rows {
        let _ = writeln!(
            summary,
            "T = {:>10}: error {:.3e}, fidelity {:.8}",
            r.total_time, r.error, r.fidelity
        );
    }
    let _ = write!(summary, "fitted order {:.3}", report.fitted_order);
    Ok((env, summary))
}

fn reproduce_paper(grid_step: f64, total_time: f64) -> Outcome {
    let options = ReproduceOptions {
        grid_step,
        adiabatic_time: total_time,
    };
    let mut env = ResultEnvelope::new("reproduce-paper");
    env.model = json!([
        to_value(ModelSpec::base()),
        to_value(ModelSpec::z_quadratic(0.5)?),
        to_value(ModelSpec::x_cubic(-0.5, 0.2, 0.8)?)
    ]);
    env.input("grid_step", grid_step);
    env.input("T", total_time);
    let checks = reproduce::run(options)?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
    let mut summary = String::new();
    for c in &checks {
        let _ = writeln!(
            summary,
            "{} {}: {:+.10} (expected {:+.10}, tol {:.0e})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.expected,
            c.tolerance
        );
    }
    let _ = write!(
        summary,
        "{}/{} checks passed",
        checks.len() - failed.len(),
        checks.len()
    );
    env.outputs = json!({
        "checks": checks,
        "passed": checks.len() - failed.len(),
        "failed": failed,
        "all_passed": failed.is_empty(),
    });
    if failed.is_empty() {
        Ok((env, summary))
    } else {
        Err(Failure::Checks(Box::new(env), summary))
    }
}

/// Radius of a sphere around `p` that excludes every other point of `all`.
fn isolating_radius(p: ParamPoint, all: &[ParamPoint]) -> f64 {
    let nearest = all
        .iter()
        .map(|q| q.distance(p))
        .filter(|d| *d > 1e-9)
        .fold(f64::INFINITY, f64::min);
    (0.4 * nearest).min(0.5)
}

fn export_figure(which: FigureArg, grid: &str, out: &OutDirArgs) -> Outcome {
    let dir = out
        .out_dir
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument(format!("export-figure needs --out-dir or {}", crate::OUT_DIR_ENV)))?;
    let grid: GridSpec = grid.parse()?;
    let (tag, model, branches) = match which {
        FigureArg::Fig1 => ("fig1", ModelSpec::base(), vec![Branch::Plus]),
        FigureArg::Fig2 => ("fig2", ModelSpec::base(), Branch::BOTH.to_vec()),
        FigureArg::Fig3a => ("fig3a", ModelSpec::z_quadratic(0.5)?, Branch::BOTH.to_vec()),
        FigureArg::Fig3b => ("fig3b", ModelSpec::x_cubic(-0.5, 0.2, 0.8)?, Branch::BOTH.to_vec()),
    };
    let mut env = start("export-figure", &model);
    env.input("which", tag);
    env.input("grid", grid.to_string());
    let mut files = Vec::new();
    let mut per_branch = Vec::new();
    let mut summary = String::new();
    for branch in branches {
        let set = trace_strings(&model, branch, Gauge::Standard, &grid)?;
        let cells = raw_density_cells(&model, branch, &grid, RAW_DENSITY_LEVEL);
        files.push(write_file(
            dir,
            &format!("{tag}_{branch}_strings.csv"),
            &strings_csv(&set),
        )?);
        files.push(write_file(
            dir,
            &format!("{tag}_{branch}_cells.csv"),
            &cells_csv(&cells),
        )?);
        let mut charges = Vec::new();
        for p in &set.endpoints {
            let radius = isolating_radius(*p, &set.endpoints);
            let report = monopole_charge_with(&model, *p, radius, branch, Gauge::Standard, SphereGrid::default())?;
            charges.push(json!({ "at": p.to_array(), "radius": radius, "charge": report.charge }));
        }
        let mut s = string_summary(&set);
        s["raw_density_cells"] = json!(cells.len());
        s["charges"] = Value::Array(charges);
        let _ = writeln!(
            summary,
            "{branch}: {} string(s), endpoints {}",
            set.strings.len(),
            format_points(&set.endpoints)
        );
        per_branch.push(s);
    }
    let endpoints =
        json!({ "figure": tag, "model": to_value(&model), "grid": grid.to_string(), "branches": per_branch });
    files.push(write_file(
        dir,
        &format!("{tag}_endpoints.json"),
        &to_json_string(&endpoints),
    )?);
    env.outputs = json!({
        "files": files.iter().map(|p| p.display().to_string()).collect::<Vec<_>>(),
        "branches": endpoints["branches"],
        "raw_density_level": RAW_DENSITY_LEVEL,
    });
    let _ = write!(summary, "wrote {} file(s) to {}", files.len(), dir.display());
    Ok((env, summary))
}
