//! Berry connection and curvature obtained from the phase gradient of the
//! unnormalized eigenstates, and monopole charges measured as curvature flux
//! through spheres.
//!
//! The complex connection is `Ã = i⟨V|∇V⟩/⟨V|V⟩`. Because `V` is not
//! normalized, `Ã` carries an imaginary part `∇ ln‖V‖`, which is a pure
//! gradient and drops out of every closed-loop quantity. Only the real part
//! `A` enters curvature and holonomy.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::eigen::{density_of_field, eigenvector, inner, norm_sqr, Branch, Gauge, TAU_STRING};
use crate::error::{Error, Result};
use crate::model::{ModelSpec, ParamPoint};
use crate::quadrature::{gauss_legendre, pairwise_sum};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConnectionSample {
    pub at: ParamPoint,
    /// Real (physical) connection, radians per unit parameter length.
    pub a: [f64; 3],
    /// Imaginary part of `Ã`.
    pub a_imag: [f64; 3],
    pub branch: Branch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MonopoleReport {
    pub center: ParamPoint,
    pub radius: f64,
    /// Flux divided by 4π.
    pub charge: f64,
    pub flux: f64,
    pub branch: Branch,
    pub gauge: Gauge,
    pub quadrature_nodes: usize,
    /// Polar axis of the quadrature grid that was finally used.
    pub axis: [f64; 3],
    pub retries: usize,
}

/// Real connection of the base model evaluated at field vector `f`:
/// `(fy, −fx, 0)/(2ρ(ρ ± fz))` in the standard gauge and
/// `(−fy, fx, 0)/(2ρ(ρ ∓ fz))` in the alternate one (upper/lower sign for the
/// plus/minus branch).
pub fn base_connection(f: [f64; 3], branch: Branch, gauge: Gauge) -> Result<[f64; 3]> {
    let perp2 = f[0] * f[0] + f[1] * f[1];
    let rho = (perp2 + f[2] * f[2]).sqrt();
    let (s, orient) = match (branch, gauge) {
        (Branch::Plus, Gauge::Standard) => (1.0, 1.0),
        (Branch::Minus, Gauge::Standard) => (-1.0, 1.0),
        (Branch::Plus, Gauge::Alternate) => (-1.0, -1.0),
        (Branch::Minus, Gauge::Alternate) => (1.0, -1.0),
    };
    // ρ + s·fz, cancellation-free.
    let sz = s * f[2];
    let rho_sz = if sz >= 0.0 { rho + sz } else { perp2 / (rho - sz) };
    let denom = 2.0 * rho * rho_sz;
    if denom == 0.0 || !denom.is_finite() {
        return Err(Error::SingularPoint(ParamPoint::from_array(f)));
    }
    Ok([orient * f[1] / denom, -orient * f[0] / denom, 0.0])
}

/// Real connection of `model`, pulled back through the substitution:
/// `A_i(R) = Σ_j A^base_j(f(R)) ∂f_j/∂R_i`.
pub fn real_connection(model: &ModelSpec, r: ParamPoint, branch: Branch, gauge: Gauge) -> Result<[f64; 3]> {
    let f = model.field_vector(r);
    let a = base_connection(f, branch, gauge).map_err(|e| match e {
        Error::SingularPoint(_) => Error::SingularPoint(r),
        other => other,
    })?;
    if model.is_base() {
        return Ok(a);
    }
    let j = model.jacobian(r);
    let mut out = [0.0; 3];
    for (i, o) in out.iter_mut().enumerate() {
        *o = (0..3).map(|k| a[k] * j[k][i]).sum();
    }
    Ok(out)
}

/// Closed-form connection of the base model, real and imaginary parts.
pub fn connection_analytic(r: ParamPoint, branch: Branch) -> Result<ConnectionSample> {
    let rr = r.norm();
    let a = base_connection(r.to_array(), branch, Gauge::Standard).map_err(|_| Error::SingularPoint(r))?;
    let s = branch.sign();
    let perp2 = r.x * r.x + r.y * r.y;
    let sz = s * r.z;
    let r_sz = if sz >= 0.0 { rr + sz } else { perp2 / (rr - sz) };
    // ∇ ln‖V‖ with ‖V‖² = 2R(R ± Z).
    let lateral = (2.0 * rr + sz) / (2.0 * rr * rr * r_sz);
    let a_imag = [r.x * lateral, r.y * lateral, s * r_sz / (2.0 * rr * rr)];
    Ok(ConnectionSample {
        at: r,
        a,
        a_imag,
        branch,
    })
}

fn check_step(h: f64) -> Result<()> {
    if !(h > 0.0 && h <= 1e-3) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step must lie in (0, 1e-3], got {h}"
        )));
    }
    Ok(())
}

/// `i⟨V|∇V⟩/⟨V|V⟩` from central differences of the literal eigenvectors.
pub fn connection_numeric(model: &ModelSpec, r: ParamPoint, branch: Branch, h: f64) -> Result<ConnectionSample> {
    connection_numeric_in_gauge(model, r, branch, Gauge::Standard, h)
}

pub fn connection_numeric_in_gauge(
    model: &ModelSpec,
    r: ParamPoint,
    branch: Branch,
    gauge: Gauge,
    h: f64,
) -> Result<ConnectionSample> {
    check_step(h)?;
    let f = model.field_vector(r);
    if density_of_field(f, branch, gauge) <= TAU_STRING {
        return Err(Error::SingularPoint(r));
    }
    let v = eigenvector(model, r, branch, gauge);
    let n = norm_sqr(&v);
    let mut a = [0.0; 3];
    let mut a_imag = [0.0; 3];
    for axis in 0..3 {
        let vp = eigenvector(model, r.shifted(axis, h), branch, gauge);
        let vm = eigenvector(model, r.shifted(axis, -h), branch, gauge);
        let dv = [(vp[0] - vm[0]) / (2.0 * h), (vp[1] - vm[1]) / (2.0 * h)];
        let ov = inner(&v, &dv);
        // i·ov = −Im(ov) + i·Re(ov)
        a[axis] = -ov.im / n;
        a_imag[axis] = ov.re / n;
    }
    Ok(ConnectionSample {
        at: r,
        a,
        a_imag,
        branch,
    })
}

/// Inner finite-difference step used for the connection inside a curl of
/// step `h`.
fn inner_step(h: f64) -> f64 {
    (h * 0.1).min(1e-5)
}

fn curl_of<F>(r: ParamPoint, h: f64, mut field: F) -> Result<[f64; 3]>
where
    F: FnMut(ParamPoint) -> Result<[f64; 3]>,
{
    // d[j][i] = ∂_j F_i
    let mut d = [[0.0; 3]; 3];
    for (j, row) in d.iter_mut().enumerate() {
        let p = field(r.shifted(j, h))?;
        let m = field(r.shifted(j, -h))?;
        for i in 0..3 {
            row[i] = (p[i] - m[i]) / (2.0 * h);
        }
    }
    Ok([d[1][2] - d[2][1], d[2][0] - d[0][2], d[0][1] - d[1][0]])
}

/// Gauge whose string lies farther from `r` (larger normalized density).
pub fn regular_gauge(model: &ModelSpec, r: ParamPoint, branch: Branch) -> Gauge {
    let f = model.field_vector(r);
    if density_of_field(f, branch, Gauge::Standard) >= density_of_field(f, branch, Gauge::Alternate) {
        Gauge::Standard
    } else {
        Gauge::Alternate
    }
}

/// Berry curvature `∇ × A` by central differences of the numeric connection.
///
/// Curvature is gauge invariant, so the curl is taken in [`regular_gauge`];
/// this keeps points on one gauge's string (e.g. the positive z-axis for the
/// lower branch of the base model) evaluable.
pub fn curvature(model: &ModelSpec, r: ParamPoint, branch: Branch, h: f64) -> Result<[f64; 3]> {
    curvature_in_gauge(model, r, branch, regular_gauge(model, r, branch), h)
}

pub fn curvature_in_gauge(model: &ModelSpec, r: ParamPoint, branch: Branch, gauge: Gauge, h: f64) -> Result<[f64; 3]> {
    check_step(h)?;
    let f = model.field_vector(r);
    if f.iter().all(|c| *c == 0.0) {
        return Err(Error::DegeneratePoint(r));
    }
    let hi = inner_step(h);
    curl_of(
        r,
        h,
        |p| Ok(connection_numeric_in_gauge(model, p, branch, gauge, hi)?.a),
    )
}

/// Curl of the imaginary part of `Ã`; vanishes up to discretization error.
pub fn imaginary_curl(model: &ModelSpec, r: ParamPoint, branch: Branch, h: f64) -> Result<[f64; 3]> {
    check_step(h)?;
    let hi = inner_step(h);
    curl_of(r, h, |p| Ok(connection_numeric(model, p, branch, hi)?.a_imag))
}

/// Central-difference divergence of the curvature, using the same step and
/// the same gauge for both stencils.
pub fn curvature_divergence(model: &ModelSpec, r: ParamPoint, branch: Branch, h: f64) -> Result<f64> {
    let gauge = regular_gauge(model, r, branch);
    let mut div = 0.0;
    for axis in 0..3 {
        let p = curvature_in_gauge(model, r.shifted(axis, h), branch, gauge, h)?;
        let m = curvature_in_gauge(model, r.shifted(axis, -h), branch, gauge, h)?;
        div += (p[axis] - m[axis]) / (2.0 * h);
    }
    Ok(div)
}

/// Grid of the flux quadrature: Gauss–Legendre in `cos θ`, trapezoid in `φ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct SphereGrid {
    pub n_theta: usize,
    pub n_phi: usize,
}

impl Default for SphereGrid {
    fn default() -> Self {
        SphereGrid {
            n_theta: 64,
            n_phi: 128,
        }
    }
}

const GOLDEN_ANGLE: f64 = 2.399_963_229_728_653;
const MAX_RETRIES: usize = 3;
/// Normalized density below which a flux node is evaluated in the other gauge.
const NEAR_STRING: f64 = 1e-2;

/// Polar axis for attempt `k`. None of them is a coordinate axis, so nodes
/// stay away from axis-aligned strings.
pub(crate) fn tilted_axis(k: usize) -> [f64; 3] {
    let polar = 0.3 + 0.5 * ((k as f64 + 1.0) * GOLDEN_ANGLE).sin().abs();
    let azimuth = (k as f64 + 1.0) * GOLDEN_ANGLE;
    [polar.sin() * azimuth.cos(), polar.sin() * azimuth.sin(), polar.cos()]
}

/// Orthonormal frame `(u, v, w)` with `w` along `axis`.
pub(crate) fn frame(axis: [f64; 3]) -> (ParamPoint, ParamPoint, ParamPoint) {
    let w = ParamPoint::from_array(axis);
    let w = w.scale(1.0 / w.norm());
    let helper = if w.x.abs() < 0.9 {
        ParamPoint::new(1.0, 0.0, 0.0)
    } else {
        ParamPoint::new(0.0, 1.0, 0.0)
    };
    let u = helper.cross(w);
    let u = u.scale(1.0 / u.norm());
    let v = w.cross(u);
    (u, v, w)
}

/// Charge `μ` enclosed by a sphere, as curvature flux over 4π.
pub fn monopole_charge(model: &ModelSpec, center: ParamPoint, radius: f64, branch: Branch) -> Result<MonopoleReport> {
    monopole_charge_with(model, center, radius, branch, Gauge::Standard, SphereGrid::default())
}

pub fn monopole_charge_with(
    model: &ModelSpec,
    center: ParamPoint,
    radius: f64,
    branch: Branch,
    gauge: Gauge,
    grid: SphereGrid,
) -> Result<MonopoleReport> {
    if !(radius > 0.0 && radius.is_finite()) || !center.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "sphere needs a finite positive radius, got {radius}"
        )));
    }
    if grid.n_theta == 0 || grid.n_phi == 0 {
        return Err(Error::InvalidArgument("empty sphere grid".into()));
    }
    let (cos_nodes, cos_weights) = gauss_legendre(grid.n_theta);
    let h = 1e-4 * radius.min(1.0);
    for attempt in 0..=MAX_RETRIES {
        let axis = tilted_axis(attempt);
        let (u, v, w) = frame(axis);
        let nodes: Vec<(ParamPoint, ParamPoint, f64)> = cos_nodes
            .iter()
            .zip(&cos_weights)
            .flat_map(|(&ct, &wt)| {
                let st = (1.0 - ct * ct).sqrt();
                (0..grid.n_phi).map(move |j| {
                    let phi = 2.0 * PI * (j as f64 + 0.5) / grid.n_phi as f64;
                    let n = u.scale(st * phi.cos()) + v.scale(st * phi.sin()) + w.scale(ct);
                    (center + n.scale(radius), n, wt)
                })
            })
            .collect();
        let on_string = nodes
            .iter()
            .any(|(p, _, _)| density_of_field(model.field_vector(*p), branch, gauge) <= TAU_STRING);
        if on_string {
            continue;
        }
        let terms: Vec<Result<f64>> = nodes
            .par_iter()
            .map(|(p, n, wt)| {
                // Curvature is gauge invariant. Close to the requested gauge's
                // string the stencil would resolve the singular connection
                // poorly, so those nodes switch to the other gauge.
                let g = if density_of_field(model.field_vector(*p), branch, gauge) < NEAR_STRING {
                    regular_gauge(model, *p, branch)
                } else {
                    gauge
                };
                let b = curvature_in_gauge(model, *p, branch, g, h)?;
                Ok(wt * (b[0] * n.x + b[1] * n.y + b[2] * n.z))
            })
            .collect();
        let terms: Result<Vec<f64>> = terms.into_iter().collect();
        let Ok(terms) = terms else { continue };
        let flux = pairwise_sum(&terms) * radius * radius * 2.0 * PI / grid.n_phi as f64;
        return Ok(MonopoleReport {
            center,
            radius,
            charge: flux / (4.0 * PI),
            flux,
            branch,
            gauge,
            quadrature_nodes: nodes.len(),
            axis,
            retries: attempt,
        });
    }
    Err(Error::QuadratureOnString(MAX_RETRIES))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: [f64; 3], b: [f64; 3], tol: f64) -> bool {
        a.iter().zip(&b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn analytic_examples() {
        let s = connection_analytic(ParamPoint::new(1.0, 0.0, 0.0), Branch::Plus).unwrap();
        assert!(close(s.a, [0.0, -0.5, 0.0], 1e-15));
        let s = connection_analytic(ParamPoint::new(0.0, 0.0, 1.0), Branch::Plus).unwrap();
        assert_eq!(s.a, [0.0, 0.0, 0.0]);
    }

    #[test]
    fn analytic_diverges_approaching_string() {
        let near = |d: f64| {
            connection_analytic(ParamPoint::new(0.0, 0.01, -1.0 + d), Branch::Plus)
                .unwrap()
                .a[0]
        };
        assert!(near(1e-4).abs() > near(1e-2).abs());
        assert!(near(1e-4).abs() > 50.0);
        assert!(matches!(
            connection_analytic(ParamPoint::new(0.0, 0.0, -1.0), Branch::Plus),
            Err(Error::SingularPoint(_))
        ));
        assert!(connection_analytic(ParamPoint::ORIGIN, Branch::Minus).is_err());
    }

    #[test]
    fn analytic_imaginary_part_matches_printed_form() {
        // Upper-branch components as printed: X(2R+Z)/(2R²(R+Z)), ..., (R+Z)/(2R²).
        let r = ParamPoint::new(0.3, -0.4, 0.5);
        let rr = r.norm();
        let s = connection_analytic(r, Branch::Plus).unwrap();
        let lat = (2.0 * rr + r.z) / (2.0 * rr * rr * (rr + r.z));
        assert!(close(
            s.a_imag,
            [r.x * lat, r.y * lat, (rr + r.z) / (2.0 * rr * rr)],
            1e-14
        ));
    }

    #[test]
    fn numeric_matches_analytic_at_unit_x() {
        let s = connection_numeric(&ModelSpec::base(), ParamPoint::new(1.0, 0.0, 0.0), Branch::Plus, 1e-5).unwrap();
        assert!(close(s.a, [0.0, -0.5, 0.0], 1e-9), "{:?}", s.a);
    }

    #[test]
    fn numeric_is_second_order() {
        let r = ParamPoint::new(0.3, -0.4, 0.5);
        // The real part involves only X + iY, which central differences
        // reproduce exactly; the imaginary part exposes the O(h²) error.
        let exact = connection_analytic(r, Branch::Plus).unwrap().a_imag;
        let err = |h: f64| {
            let a = connection_numeric(&ModelSpec::base(), r, Branch::Plus, h)
                .unwrap()
                .a_imag;
            a.iter().zip(&exact).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
        };
        let ratio = err(1e-3) / err(5e-4);
        assert!((ratio - 4.0).abs() < 0.1, "ratio {ratio}");
    }

    #[test]
    fn numeric_rejects_bad_inputs() {
        let base = ModelSpec::base();
        assert!(matches!(
            connection_numeric(&base, ParamPoint::new(0.0, 0.0, -0.5), Branch::Plus, 1e-5),
            Err(Error::SingularPoint(_))
        ));
        assert!(matches!(
            connection_numeric(&base, ParamPoint::new(1.0, 0.0, 0.0), Branch::Plus, 0.1),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn z_quadratic_connection_is_finite() {
        let m = ModelSpec::z_quadratic(0.5).unwrap();
        let r = ParamPoint::new(0.5, 0.0, 0.0);
        let s = connection_numeric(&m, r, Branch::Plus, 1e-5).unwrap();
        assert!(s.a.iter().all(|c| c.is_finite()));
        let pulled = real_connection(&m, r, Branch::Plus, Gauge::Standard).unwrap();
        assert!(close(s.a, pulled, 1e-8));
    }

    #[test]
    fn curvature_examples() {
        let base = ModelSpec::base();
        let b = curvature(&base, ParamPoint::new(0.0, 0.0, 1.0), Branch::Plus, 1e-4).unwrap();
        assert!(close(b, [0.0, 0.0, -0.5], 1e-6), "{b:?}");
        let b = curvature(&base, ParamPoint::new(2.0, 0.0, 0.0), Branch::Plus, 1e-4).unwrap();
        assert!(close(b, [-0.125, 0.0, 0.0], 1e-6), "{b:?}");
        // On the standard lower-branch string; evaluated in the alternate gauge.
        let b = curvature(&base, ParamPoint::new(0.0, 0.0, 1.0), Branch::Minus, 1e-4).unwrap();
        assert!(close(b, [0.0, 0.0, 0.5], 1e-6), "{b:?}");
        assert!(matches!(
            curvature_in_gauge(
                &base,
                ParamPoint::new(0.0, 0.0, 1.0),
                Branch::Minus,
                Gauge::Standard,
                1e-4
            ),
            Err(Error::SingularPoint(_))
        ));
        let b = curvature(&base, ParamPoint::new(1e-2, 0.0, 1.0), Branch::Minus, 1e-4).unwrap();
        let r = ParamPoint::new(1e-2, 0.0, 1.0);
        let r3 = r.norm().powi(3);
        assert!(close(b, [0.5 * r.x / r3, 0.0, 0.5 * r.z / r3], 1e-5), "{b:?}");
        assert!(matches!(
            curvature(&base, ParamPoint::ORIGIN, Branch::Plus, 1e-4),
            Err(Error::DegeneratePoint(_))
        ));
    }

    #[test]
    fn frames_are_orthonormal() {
        for k in 0..4 {
            let (u, v, w) = frame(tilted_axis(k));
            for (a, b) in [(u, v), (v, w), (u, w)] {
                assert!(a.dot(b).abs() < 1e-14);
            }
            assert!((u.cross(v) - w).norm() < 1e-14);
        }
    }
}
