//! Quadrature helpers: Gauss–Legendre rules, adaptive Gauss–Kronrod (7/15),
//! order-independent pairwise summation and Richardson extrapolation.

use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Nodes and weights of the `n`-point Gauss–Legendre rule on `[−1, 1]`,
/// nodes in ascending order.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n > 0, "Gauss-Legendre rule needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        // Tricomi initial guess, then Newton on P_n.
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Sum in a fixed binary tree so the result does not depend on how the
/// terms were produced.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n if n <= 8 => values.iter().sum(),
        n => {
            let (a, b) = values.split_at(n / 2);
            pairwise_sum(a) + pairwise_sum(b)
        }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One 15-point Kronrod panel: `(kronrod, |kronrod − gauss|)`.
fn gk15<F>(f: &mut F, a: f64, b: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = h * XGK[j];
        let s = f(c - dx)? + f(c + dx)?;
        kronrod += WGK[j] * s;
        if j % 2 == 1 {
            gauss += WG[j / 2] * s;
        }
    }
    Ok((kronrod * h, ((kronrod - gauss) * h).abs()))
}

/// Result of an adaptive integration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub panels: usize,
}

const MAX_DEPTH: usize = 48;

/// Adaptive Gauss–Kronrod integration of `f` over `[a, b]`.
///
/// A panel is accepted once its Kronrod/Gauss discrepancy is below
/// `tol · width/(b − a)`; otherwise it is bisected.
pub fn integrate_adaptive<F>(mut f: F, a: f64, b: f64, tol: f64) -> Result<Integral>
where
    F: FnMut(f64) -> Result<f64>,
{
    if a == b {
        return Ok(Integral {
            value: 0.0,
            error: 0.0,
            panels: 0,
        });
    }
    let total = (b - a).abs();
    let mut stack = vec![(a, b, 0usize)];
    let mut pieces = Vec::new();
    let mut error = 0.0;
    while let Some((lo, hi, depth)) = stack.pop() {
        let (val, err) = gk15(&mut f, lo, hi)?;
        let local_tol = tol * (hi - lo).abs() / total;
        if err <= local_tol.max(50.0 * f64::EPSILON * val.abs()) || depth >= MAX_DEPTH {
            pieces.push((lo, val));
            error += err;
        } else {
            let mid = 0.5 * (lo + hi);
            stack.push((mid, hi, depth + 1));
            stack.push((lo, mid, depth + 1));
        }
    }
    // Fixed left-to-right order for reproducibility.
    pieces.sort_by(|x, y| x.0.total_cmp(&y.0));
    let values: Vec<f64> = pieces.iter().map(|p| p.1).collect();
    Ok(Integral {
        value: pairwise_sum(&values),
        error,
        panels: values.len(),
    })
}

/// Richardson extrapolation to `h → 0` of samples `values[k]` taken on the
/// geometric ladder `steps[k]`, assuming the error expansion `Σ c_j h^{p_j}`
/// with the given `exponents`. Returns the most extrapolated tableau entry.
pub fn richardson(steps: &[f64], values: &[f64], exponents: &[f64]) -> Result<f64> {
    if steps.is_empty() || steps.len() != values.len() {
        return Err(Error::InvalidArgument(
            "richardson extrapolation needs matching, non-empty step and value lists".into(),
        ));
    }
    if values.len() == 1 {
        return Ok(values[0]);
    }
    let q = steps[0] / steps[1];
    let geometric = steps
        .windows(2)
        .all(|w| w[1] > 0.0 && ((w[0] / w[1]) - q).abs() <= 1e-12 * q);
    if !(q > 1.0) || !geometric {
        return Err(Error::InvalidArgument(
            "richardson extrapolation needs a decreasing geometric step ladder".into(),
        ));
    }
    let mut column: Vec<f64> = values.to_vec();
    for &p in exponents {
        if column.len() < 2 {
            break;
        }
        let ratio = q.powf(p);
        column = column
            .windows(2)
            .map(|w| (ratio * w[1] - w[0]) / (ratio - 1.0))
            .collect();
    }
    Ok(*column.last().expect("non-empty column"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(5);
        // Exact up to degree 9.
        let moment = |k: i32| x.iter().zip(&w).map(|(x, w)| w * x.powi(k)).sum::<f64>();
        assert!((moment(0) - 2.0).abs() < 1e-14);
        assert!((moment(8) - 2.0 / 9.0).abs() < 1e-14);
        assert!(moment(7).abs() < 1e-14);
    }

    #[test]
    fn gauss_legendre_64_weights_sum_to_two() {
        let (x, w) = gauss_legendre(64);
        assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-13);
        assert!(x.windows(2).all(|p| p[0] < p[1]));
        let cos_int: f64 = x.iter().zip(&w).map(|(x, w)| w * x.cos()).sum();
        assert!((cos_int - 2.0 * 1f64.sin()).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_a_sharp_peak() {
        let eps = 1e-3;
        let r = integrate_adaptive(|x| Ok(eps / (x * x + eps * eps)), -1.0, 1.0, 1e-11).unwrap();
        assert!((r.value - 2.0 * (1.0 / eps).atan()).abs() < 1e-10, "{r:?}");
    }

    #[test]
    fn adaptive_propagates_errors() {
        let r = integrate_adaptive(
            |x| {
                if x > 0.5 {
                    Err(Error::InvalidArgument("x".into()))
                } else {
                    Ok(x)
                }
            },
            0.0,
            1.0,
            1e-9,
        );
        assert!(r.is_err());
    }

    #[test]
    fn pairwise_sum_matches_naive_sum() {
        let v: Vec<f64> = (1..=1000).map(|k| 1.0 / k as f64).collect();
        assert!((pairwise_sum(&v) - v.iter().sum::<f64>()).abs() < 1e-12);
    }

    #[test]
    fn richardson_removes_leading_terms() {
        let f = |h: f64| 1.0 + 2.0 * h - 3.0 * h * h + 0.5 * h * h * h;
        let steps = [0.1, 0.05, 0.025, 0.0125];
        let values: Vec<f64> = steps.iter().map(|&h| f(h)).collect();
        let v = richardson(&steps, &values, &[1.0, 2.0, 3.0]).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
        assert!(richardson(&[], &[], &[1.0]).is_err());
        assert!(richardson(&[0.1, 0.05, 0.01], &[1.0, 1.0, 1.0], &[1.0]).is_err());
    }
}
