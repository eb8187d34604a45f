use std::f64::consts::PI;

use dirac_phase::adiabatic::{evolve, evolve_with_reference, Ramp, SweepSpec};
use dirac_phase::eigen::{
    density_of_field, eigenpair, eigensystem, gauge_alternate, inner, norm_sqr, normalized_density, Branch, Gauge,
};
use dirac_phase::gauge::{
    connection_analytic, connection_numeric, curvature_divergence, monopole_charge, monopole_charge_with, SphereGrid,
};
use dirac_phase::holonomy::{
    loop_phase_line_integral, loop_phase_line_integral_in_gauge, loop_phase_wilson, path_phase, phase_map,
    principal_value, LoopSpec, Orientation, PathSpec,
};
use dirac_phase::strings::{string_charge, trace_strings, GridSpec};
use dirac_phase::{HermitianMatrix2, ModelSpec, ParamPoint};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

fn models() -> Vec<ModelSpec> {
    vec![
        ModelSpec::base(),
        ModelSpec::z_quadratic(0.5).unwrap(),
        ModelSpec::x_cubic(-0.5, 0.2, 0.8).unwrap(),
    ]
}

fn point() -> impl Strategy<Value = ParamPoint> {
    (-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64).prop_map(|(x, y, z)| ParamPoint::new(x, y, z))
}

fn random_points(seed: u64, n: usize) -> Vec<ParamPoint> {
    let mut rng = StdRng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            ParamPoint::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            )
        })
        .collect()
}

proptest! {
    #[test]
    fn hamiltonian_is_hermitian_and_traceless(r in point(), which in 0usize..3) {
        let m = &models()[which];
        let h = m.evaluate(r);
        prop_assert!(h.is_hermitian());
        prop_assert_eq!(h.trace(), Complex64::new(0.0, 0.0));
        prop_assert_eq!(h, HermitianMatrix2::from_field(m.field_vector(r)));
        prop_assert_eq!(h, ModelSpec::base().evaluate(ParamPoint::from_array(m.field_vector(r))));
    }

    #[test]
    fn densities_of_both_branches_sum_to_one(r in point(), which in 0usize..3) {
        let (p, m) = eigensystem(&models()[which], r);
        prop_assume!(!p.degenerate);
        let sum = normalized_density(&p).unwrap() + normalized_density(&m).unwrap();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn squared_norm_has_closed_form(r in point(), which in 0usize..3) {
        for branch in Branch::BOTH {
            let pair = eigenpair(&models()[which], r, branch, Gauge::Standard);
            let f = pair.field;
            let s = branch.sign();
            let sz = s * f[2];
            let rho_sz = if sz >= 0.0 { pair.rho + sz } else { (f[0] * f[0] + f[1] * f[1]) / (pair.rho - sz) };
            let expected = 2.0 * pair.rho * rho_sz;
            let got = norm_sqr(&pair.vector);
            prop_assert!((got - expected).abs() <= 8.0 * f64::EPSILON * expected.max(f64::MIN_POSITIVE), "{} vs {}", got, expected);
        }
    }

    #[test]
    fn orientation_reversal_negates_line_integrals(z in -0.9..0.9f64, cx in -0.3..0.3f64) {
        let base = ModelSpec::base();
        let lp = LoopSpec::circle_z_around(cx, 0.2, z, 0.5, Orientation::Ccw);
        prop_assume!(loop_phase_line_integral(&base, Branch::Plus, &lp).is_ok());
        let fwd = loop_phase_line_integral(&base, Branch::Plus, &lp).unwrap().value;
        let back = loop_phase_line_integral(&base, Branch::Plus, &lp.reversed()).unwrap().value;
        prop_assert!((fwd + back).abs() <= 1e-9);
    }
}

#[test]
fn eigen_residual_and_orthogonality_on_many_points() {
    for (k, m) in models().iter().enumerate() {
        for r in random_points(17 + k as u64, 10_000) {
            let h = m.evaluate(r);
            let (p, q) = eigensystem(m, r);
            for pair in [p, q] {
                for gauge in [Gauge::Standard, Gauge::Alternate] {
                    let v = if gauge == Gauge::Standard {
                        pair.vector
                    } else {
                        gauge_alternate(&pair, r).vector
                    };
                    let hv = h.apply(v);
                    let res =
                        ((hv[0] - pair.energy * v[0]).norm_sqr() + (hv[1] - pair.energy * v[1]).norm_sqr()).sqrt();
                    let scale = (h.norm() * norm_sqr(&v).sqrt()).max(1.0);
                    assert!(res <= 1e-12 * scale, "{} at {r}: residual {res}", m.name());
                }
            }
            let (np, nq) = (norm_sqr(&p.vector).sqrt(), norm_sqr(&q.vector).sqrt());
            if np > 0.0 && nq > 0.0 {
                assert!(inner(&p.vector, &q.vector).norm() <= 1e-12 * np * nq);
            }
        }
    }
}

#[test]
fn gauge_zero_sets_meet_only_at_degeneracies() {
    let base = ModelSpec::base();
    for z in [-2.0, -0.5, 0.5, 2.0] {
        let r = ParamPoint::new(0.0, 0.0, z);
        let std = eigenpair(&base, r, Branch::Plus, Gauge::Standard).on_string;
        let alt = eigenpair(&base, r, Branch::Plus, Gauge::Alternate).on_string;
        assert!(std != alt, "z = {z}");
    }
    // Degeneracies are zeros of both branches in both gauges.
    for m in models() {
        for d in m.known_degeneracies().unwrap() {
            for branch in Branch::BOTH {
                for gauge in [Gauge::Standard, Gauge::Alternate] {
                    assert!(norm_sqr(&eigenpair(&m, d, branch, gauge).vector).sqrt() <= 1e-12);
                }
            }
        }
    }
    assert_eq!(density_of_field([0.0; 3], Branch::Plus, Gauge::Standard), 0.0);
}

#[test]
fn numeric_connection_converges_to_closed_form() {
    let base = ModelSpec::base();
    let mut checked = 0;
    for r in random_points(3, 400) {
        for branch in Branch::BOTH {
            let rr = r.norm();
            let perp = (r.x * r.x + r.y * r.y).sqrt();
            if rr < 0.3 || perp < 0.1 * rr {
                continue;
            }
            let exact = connection_analytic(r, branch).unwrap();
            let num = connection_numeric(&base, r, branch, 1e-5).unwrap();
            for i in 0..3 {
                assert!((num.a[i] - exact.a[i]).abs() <= 1e-9, "{r} {branch}");
                assert!((num.a_imag[i] - exact.a_imag[i]).abs() <= 1e-7, "{r} {branch}");
            }
            checked += 1;
        }
    }
    assert!(checked >= 100);
}

#[test]
fn curvature_is_divergence_free() {
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (k, m) in models().iter().enumerate() {
        for r in random_points(40 + k as u64, 200) {
            let f = m.field_vector(r);
            let rho = (f[0] * f[0] + f[1] * f[1] + f[2] * f[2]).sqrt();
            if rho < 0.3 || checked >= 100 * (k + 1) {
                continue;
            }
            let d = curvature_divergence(m, r, Branch::Plus, 1e-3).unwrap();
            assert!(d.is_finite());
            worst = worst.max(d.abs());
            checked += 1;
        }
    }
    assert!(worst <= 1e-5, "divergence {worst}");
}

#[test]
fn charges_are_half_integers_at_every_degeneracy() {
    for m in models() {
        for d in m.known_degeneracies().unwrap() {
            for branch in Branch::BOTH {
                let q = monopole_charge(&m, d, 0.1, branch).unwrap().charge;
                assert!(
                    (2.0 * q - (2.0 * q).round()).abs() <= 1e-3,
                    "{} {d} {branch}: {q}",
                    m.name()
                );
                assert!((q.abs() - 0.5).abs() <= 1e-3);
                let alt = monopole_charge_with(&m, d, 0.1, branch, Gauge::Alternate, SphereGrid::default()).unwrap();
                assert!((alt.charge - q).abs() <= 1e-4);
            }
        }
    }
}

#[test]
fn empty_sphere_has_no_charge() {
    let q = monopole_charge(&ModelSpec::base(), ParamPoint::new(1.0, 1.0, 1.0), 0.5, Branch::Plus).unwrap();
    assert!(q.charge.abs() < 1e-6);
}

#[test]
fn branch_mirror_mod_two_pi() {
    let base = ModelSpec::base();
    for z in [0.0, 0.98, 0.5, -0.98, -0.5] {
        let lp = LoopSpec::latitude(z, 1.0).unwrap();
        let plus = loop_phase_line_integral(&base, Branch::Plus, &lp).unwrap().value;
        let minus = loop_phase_line_integral(&base, Branch::Minus, &lp).unwrap().value;
        assert!(principal_value(plus + minus).abs() <= 1e-6, "z = {z}");
        // In the alternate gauge the lower branch is the exact negation.
        let minus_alt = loop_phase_line_integral_in_gauge(&base, Branch::Minus, Gauge::Alternate, &lp)
            .unwrap()
            .value;
        assert!((plus + minus_alt).abs() <= 1e-6, "z = {z}");
    }
}

#[test]
fn wilson_approaches_line_integral_quadratically() {
    let base = ModelSpec::base();
    let lp = LoopSpec::circle_z_around(0.3, -0.2, 0.4, 0.5, Orientation::Ccw);
    let exact = loop_phase_line_integral(&base, Branch::Plus, &lp).unwrap().value;
    let err = |n: usize| {
        (loop_phase_wilson(&base, Branch::Plus, &lp.clone().with_nodes(n).unwrap())
            .unwrap()
            .value
            - exact)
            .abs()
    };
    let (e1, e2) = (err(256), err(512));
    assert!(e2 <= 1e-6f64.max(e1 / 3.0), "{e1} {e2}");
    // A tiny loop picks up only the local flux B_z·πr², with B = −R/(2R³).
    let tiny = LoopSpec::circle_z_around(0.5, 0.0, 0.5, 1e-3, Orientation::Ccw);
    let centre = ParamPoint::new(0.5, 0.0, 0.5);
    let flux = -0.5 * centre.z / centre.norm().powi(3) * PI * 1e-6;
    let w = loop_phase_wilson(&base, Branch::Plus, &tiny).unwrap().value;
    assert!((w - flux).abs() <= 1e-9, "{w} vs {flux}");
}

#[test]
fn wilson_counts_the_string_segment() {
    let m = ModelSpec::z_quadratic(0.5).unwrap();
    let lp = LoopSpec::circle_z(0.0, 0.25, Orientation::Ccw);
    let w = loop_phase_wilson(&m, Branch::Plus, &lp).unwrap().value;
    let line = loop_phase_line_integral(&m, Branch::Plus, &lp).unwrap().value;
    // The loop's image in field space is the circle |f_perp| = 0.25 at
    // fz = −0.25, so the phase is −π(1 − fz/|f|) = −π(1 + 1/√2).
    let expected = -PI * (1.0 + 0.5f64.sqrt());
    assert!((w - expected).abs() <= 1e-4, "{w} vs {expected}");
    assert!((line - expected).abs() <= 1e-6);
    assert_eq!(
        string_charge(&m, Branch::Plus, &LoopSpec::circle_z(0.0, 0.01, Orientation::Ccw)).unwrap(),
        -1
    );
}

#[test]
fn protocols_differ_by_the_enclosed_loop() {
    let base = ModelSpec::base();
    let rc = ParamPoint::new(0.0, -1.0, 0.0);
    let end = ParamPoint::new(1.0, -0.5, 0.3);
    let a = PathSpec::protocol(rc, end, "xyz").unwrap();
    let b = PathSpec::protocol(rc, end, "yxz").unwrap();
    let ga = path_phase(&base, Branch::Plus, &a).unwrap().value;
    let gb = path_phase(&base, Branch::Plus, &b).unwrap().value;
    let mut vertices = a.vertices();
    vertices.extend(b.vertices().into_iter().rev().skip(1));
    let lp = LoopSpec::polyline(vertices).unwrap();
    let loop_phase = loop_phase_line_integral(&base, Branch::Plus, &lp).unwrap().value;
    assert!((ga - gb - loop_phase).abs() <= 1e-9);
}

#[test]
fn phase_map_does_not_depend_on_thread_count() {
    let base = ModelSpec::base();
    let grid: GridSpec = "x=-1:1:0.25,y=-1:1:0.25,z=0.3".parse().unwrap();
    let rc = ParamPoint::new(0.0, -1.0, 0.0);
    let serial = rayon::ThreadPoolBuilder::new()
        .num_threads(1)
        .build()
        .unwrap()
        .install(|| phase_map(&base, Branch::Plus, rc, "xyz", &grid).unwrap());
    let parallel = phase_map(&base, Branch::Plus, rc, "xyz", &grid).unwrap();
    assert_eq!(serial.len(), parallel.len());
    for (s, p) in serial.iter().zip(&parallel) {
        assert_eq!(s.0, p.0);
        assert_eq!(s.1.map(f64::to_bits), p.1.map(f64::to_bits));
    }
}

#[test]
fn string_charge_is_stable_under_radius_and_nodes() {
    let base = ModelSpec::base();
    for radius in [0.01, 0.03, 0.1] {
        for nodes in [64, 4096] {
            let lp = LoopSpec::circle_z(-1.0, radius, Orientation::Ccw)
                .with_nodes(nodes)
                .unwrap();
            assert_eq!(string_charge(&base, Branch::Plus, &lp).unwrap(), -1);
        }
    }
}

#[test]
fn endpoints_do_not_depend_on_gauge() {
    let grid = GridSpec::cube(-1.0, 1.0, 0.05).unwrap();
    for m in models() {
        for branch in Branch::BOTH {
            let std = trace_strings(&m, branch, Gauge::Standard, &grid).unwrap();
            let alt = trace_strings(&m, branch, Gauge::Alternate, &grid).unwrap();
            assert!(std.endpoint_is_degeneracy.iter().all(|d| *d));
            assert!(alt.endpoint_is_degeneracy.iter().all(|d| *d));
            let mut a: Vec<_> = std.endpoints.iter().map(|p| p.to_array()).collect();
            let mut b: Vec<_> = alt.endpoints.iter().map(|p| p.to_array()).collect();
            a.sort_by(|x, y| x.partial_cmp(y).unwrap());
            b.sort_by(|x, y| x.partial_cmp(y).unwrap());
            assert_eq!(a.len(), b.len(), "{} {branch}", m.name());
            for (x, y) in a.iter().zip(&b) {
                let d = ParamPoint::from_array(*x).distance(ParamPoint::from_array(*y));
                assert!(d <= 1e-6, "{} {branch}: {d}", m.name());
            }
        }
    }
}

#[test]
fn adiabatic_extraction_is_gauge_invariant() {
    let base = ModelSpec::base();
    let sweep = SweepSpec::with_default_steps(LoopSpec::latitude(0.5, 1.0).unwrap(), 300.0, Ramp::SmoothC1).unwrap();
    let plain = evolve(&base, Branch::Plus, &sweep).unwrap();
    let twisted = evolve_with_reference(&base, Branch::Plus, &sweep, |p| {
        0.7 * p.x + (2.0 * p.y).sin() - p.z * p.z
    })
    .unwrap();
    assert!((plain.geometric_phase - twisted.geometric_phase).abs() <= 1e-9);
    assert!(plain.norm_drift <= 1e-10);
}

#[test]
fn adiabatic_lower_branch_mirrors_upper() {
    let base = ModelSpec::base();
    // The O(1/T) phase error drops below 1e-3 only past T ≈ 5000.
    let sweep = SweepSpec::with_default_steps(LoopSpec::latitude(0.5, 1.0).unwrap(), 8000.0, Ramp::SmoothC1).unwrap();
    let run = evolve(&base, Branch::Minus, &sweep).unwrap();
    let wilson = loop_phase_wilson(&base, Branch::Minus, &LoopSpec::latitude(0.5, 1.0).unwrap())
        .unwrap()
        .value;
    // Standard-gauge lower branch: −3π/2, i.e. +π/2 modulo 2π.
    assert!(principal_value(run.geometric_phase - PI / 2.0).abs() <= 1e-2);
    assert!(principal_value(run.geometric_phase - wilson).abs() <= 5.0 * (1.0 - run.fidelity) + 1e-3);
}

#[test]
fn adiabatic_matches_wilson_off_axis() {
    let m = ModelSpec::z_quadratic(0.5).unwrap();
    let lp = LoopSpec::circle(ParamPoint::new(0.3, 0.0, 0.5), ParamPoint::new(1.0, 0.0, 0.0), 0.3).unwrap();
    let wilson = loop_phase_wilson(&m, Branch::Plus, &lp).unwrap().value;
    let sweep = SweepSpec::with_default_steps(lp, 2000.0, Ramp::SmoothC1).unwrap();
    let run = evolve(&m, Branch::Plus, &sweep).unwrap();
    assert!(
        (run.geometric_phase - wilson).abs() <= 2e-2,
        "{} vs {wilson}",
        run.geometric_phase
    );
}
