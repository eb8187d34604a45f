//! Two-mode Hamiltonians `H(R) = fz σz + fx σx + fy σy` built from polynomial
//! substitutions of the parameter coordinates.
//!
//! The base model uses the identity substitution. The two shipped variants
//! replace `Z` by `Z² − Z0²` or `X` by `(X − X1)(X − X2)(X − X3)`; any other
//! substitution is accepted as a custom model and flagged as unvalidated.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A point `R = (X, Y, Z)` of the dimensionless parameter space.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamPoint {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl ParamPoint {
    pub const ORIGIN: ParamPoint = ParamPoint::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        ParamPoint { x, y, z }
    }

    pub fn from_array(a: [f64; 3]) -> Self {
        ParamPoint::new(a[0], a[1], a[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn norm(&self) -> f64 {
        self.dot(*self).sqrt()
    }

    pub fn dot(&self, other: ParamPoint) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(&self, other: ParamPoint) -> ParamPoint {
        ParamPoint::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn scale(&self, s: f64) -> ParamPoint {
        ParamPoint::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn distance(&self, other: ParamPoint) -> f64 {
        (*self - other).norm()
    }

    /// Coordinate by axis index (0 = x, 1 = y, 2 = z).
    pub fn coord(&self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            2 => self.z,
            _ => panic!("axis index {axis} out of range"),
        }
    }

    /// Copy with one coordinate shifted by `delta`.
    pub fn shifted(&self, axis: usize, delta: f64) -> ParamPoint {
        let mut a = self.to_array();
        a[axis] += delta;
        ParamPoint::from_array(a)
    }

    pub fn with_coord(&self, axis: usize, value: f64) -> ParamPoint {
        let mut a = self.to_array();
        a[axis] = value;
        ParamPoint::from_array(a)
    }
}

impl fmt::Display for ParamPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.x, self.y, self.z)
    }
}

impl Add for ParamPoint {
    type Output = ParamPoint;
    fn add(self, o: ParamPoint) -> ParamPoint {
        ParamPoint::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for ParamPoint {
    type Output = ParamPoint;
    fn sub(self, o: ParamPoint) -> ParamPoint {
        ParamPoint::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for ParamPoint {
    type Output = ParamPoint;
    fn mul(self, s: f64) -> ParamPoint {
        self.scale(s)
    }
}

/// One term `coef · X^a · Y^b · Z^c`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    pub powers: [u32; 3],
}

/// Real trivariate polynomial stored as an explicit list of monomials.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Polynomial {
    terms: Vec<Monomial>,
}

impl Polynomial {
    pub fn zero() -> Self {
        Polynomial { terms: Vec::new() }
    }

    pub fn from_terms(terms: Vec<Monomial>) -> Self {
        let terms = terms.into_iter().filter(|t| t.coef != 0.0).collect();
        Polynomial { terms }
    }

    /// The coordinate polynomial `X`, `Y` or `Z`.
    pub fn variable(axis: usize) -> Self {
        let mut powers = [0; 3];
        powers[axis] = 1;
        Polynomial::from_terms(vec![Monomial { coef: 1.0, powers }])
    }

    /// `Σ coeffs[k] · v^k` in the single variable `axis`.
    pub fn univariate(axis: usize, coeffs: &[f64]) -> Self {
        let terms = coeffs
            .iter()
            .enumerate()
            .map(|(k, &coef)| {
                let mut powers = [0; 3];
                powers[axis] = k as u32;
                Monomial { coef, powers }
            })
            .collect();
        Polynomial::from_terms(terms)
    }

    pub fn terms(&self) -> &[Monomial] {
        &self.terms
    }

    pub fn eval(&self, r: ParamPoint) -> f64 {
        self.terms
            .iter()
            .map(|t| {
                t.coef * r.x.powi(t.powers[0] as i32) * r.y.powi(t.powers[1] as i32) * r.z.powi(t.powers[2] as i32)
            })
            .sum()
    }

    pub fn derivative(&self, axis: usize) -> Polynomial {
        let terms = self
            .terms
            .iter()
            .filter(|t| t.powers[axis] > 0)
            .map(|t| {
                let mut powers = t.powers;
                powers[axis] -= 1;
                Monomial {
                    coef: t.coef * t.powers[axis] as f64,
                    powers,
                }
            })
            .collect();
        Polynomial::from_terms(terms)
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|t| t.powers.iter().sum()).max().unwrap_or(0)
    }
}

/// Which built-in family a model belongs to, with its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelKind {
    Base,
    ZQuadratic { z0: f64 },
    XCubic { x1: f64, x2: f64, x3: f64 },
    Custom,
}

/// A substitution triple `(fx, fy, fz)` defining `H(R)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ModelSpec {
    name: String,
    #[serde(flatten)]
    kind: ModelKind,
    validated: bool,
    fx: Polynomial,
    fy: Polynomial,
    fz: Polynomial,
    #[serde(skip)]
    jacobian: [[Polynomial; 3]; 3],
}

impl ModelSpec {
    fn assemble(name: &str, kind: ModelKind, fx: Polynomial, fy: Polynomial, fz: Polynomial) -> Self {
        let row = |p: &Polynomial| [p.derivative(0), p.derivative(1), p.derivative(2)];
        let jacobian = [row(&fx), row(&fy), row(&fz)];
        let validated = kind != ModelKind::Custom;
        ModelSpec {
            name: name.to_string(),
            kind,
            validated,
            fx,
            fy,
            fz,
            jacobian,
        }
    }

    /// `fx = X, fy = Y, fz = Z`.
    pub fn base() -> Self {
        ModelSpec::assemble(
            "base",
            ModelKind::Base,
            Polynomial::variable(0),
            Polynomial::variable(1),
            Polynomial::variable(2),
        )
    }

    /// `fz = Z² − Z0²`; strings end at `(0, 0, ±Z0)`.
    pub fn z_quadratic(z0: f64) -> Result<Self> {
        if !(z0.is_finite() && z0 > 0.0) {
            return Err(Error::InvalidModel(format!("z-quadratic requires Z0 > 0, got {z0}")));
        }
        Ok(ModelSpec::assemble(
            "z-quadratic",
            ModelKind::ZQuadratic { z0 },
            Polynomial::variable(0),
            Polynomial::variable(1),
            Polynomial::univariate(2, &[-z0 * z0, 0.0, 1.0]),
        ))
    }

    /// `fx = (X − X1)(X − X2)(X − X3)` with `X1 < X2 < X3`.
    pub fn x_cubic(x1: f64, x2: f64, x3: f64) -> Result<Self> {
        if ![x1, x2, x3].iter().all(|v| v.is_finite()) || !(x1 < x2 && x2 < x3) {
            return Err(Error::InvalidModel(format!(
                "x-cubic requires X1 < X2 < X3, got ({x1}, {x2}, {x3})"
            )));
        }
        let coeffs = [-x1 * x2 * x3, x1 * x2 + x1 * x3 + x2 * x3, -(x1 + x2 + x3), 1.0];
        Ok(ModelSpec::assemble(
            "x-cubic",
            ModelKind::XCubic { x1, x2, x3 },
            Polynomial::univariate(0, &coeffs),
            Polynomial::variable(1),
            Polynomial::variable(2),
        ))
    }

    /// Arbitrary real substitution. Not covered by the built-in checks.
    pub fn custom(name: &str, fx: Polynomial, fy: Polynomial, fz: Polynomial) -> Self {
        ModelSpec::assemble(name, ModelKind::Custom, fx, fy, fz)
    }

    /// Builds a built-in model from its CLI name and `key=value` parameters.
    /// Missing parameters fall back to `Z0 = 0.5` and `(X1, X2, X3) = (−0.5, 0.2, 0.8)`.
    pub fn from_name(name: &str, params: &BTreeMap<String, f64>) -> Result<Self> {
        let get = |key: &str, default: f64| params.get(key).copied().unwrap_or(default);
        let allowed: &[&str] = match name {
            "base" => &[],
            "z-quadratic" => &["Z0"],
            "x-cubic" => &["X1", "X2", "X3"],
            other => return Err(Error::InvalidModel(format!("unknown model '{other}'"))),
        };
        if let Some(key) = params.keys().find(|k| !allowed.contains(&k.as_str())) {
            return Err(Error::InvalidModel(format!("model '{name}' has no parameter '{key}'")));
        }
        match name {
            "base" => Ok(ModelSpec::base()),
            "z-quadratic" => ModelSpec::z_quadratic(get("Z0", 0.5)),
            _ => ModelSpec::x_cubic(get("X1", -0.5), get("X2", 0.2), get("X3", 0.8)),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn is_base(&self) -> bool {
        self.kind == ModelKind::Base
    }

    /// False for custom substitutions.
    pub fn validated(&self) -> bool {
        self.validated
    }

    pub fn polynomials(&self) -> [&Polynomial; 3] {
        [&self.fx, &self.fy, &self.fz]
    }

    /// Points where the substitution vanishes, for the built-in models.
    pub fn known_degeneracies(&self) -> Option<Vec<ParamPoint>> {
        match self.kind {
            ModelKind::Base => Some(vec![ParamPoint::ORIGIN]),
            ModelKind::ZQuadratic { z0 } => Some(vec![ParamPoint::new(0.0, 0.0, -z0), ParamPoint::new(0.0, 0.0, z0)]),
            ModelKind::XCubic { x1, x2, x3 } => {
                Some([x1, x2, x3].iter().map(|&x| ParamPoint::new(x, 0.0, 0.0)).collect())
            }
            ModelKind::Custom => None,
        }
    }

    /// `(fx, fy, fz)` at `r`.
    pub fn field_vector(&self, r: ParamPoint) -> [f64; 3] {
        [self.fx.eval(r), self.fy.eval(r), self.fz.eval(r)]
    }

    /// `J[i][j] = ∂f_i/∂R_j` at `r`.
    pub fn jacobian(&self, r: ParamPoint) -> [[f64; 3]; 3] {
        let mut out = [[0.0; 3]; 3];
        for (i, row) in self.jacobian.iter().enumerate() {
            for (j, p) in row.iter().enumerate() {
                out[i][j] = p.eval(r);
            }
        }
        out
    }

    pub fn evaluate(&self, r: ParamPoint) -> HermitianMatrix2 {
        HermitianMatrix2::from_field(self.field_vector(r))
    }
}

/// 2×2 complex matrix `[[fz, fx − i fy], [fx + i fy, −fz]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct HermitianMatrix2 {
    pub entries: [[Complex64; 2]; 2],
}

impl HermitianMatrix2 {
    pub fn from_field(f: [f64; 3]) -> Self {
        let [fx, fy, fz] = f;
        HermitianMatrix2 {
            entries: [
                [Complex64::new(fz, 0.0), Complex64::new(fx, -fy)],
                [Complex64::new(fx, fy), Complex64::new(-fz, 0.0)],
            ],
        }
    }

    pub fn is_hermitian(&self) -> bool {
        let e = &self.entries;
        e[0][0].im == 0.0 && e[1][1].im == 0.0 && e[0][1] == e[1][0].conj()
    }

    pub fn trace(&self) -> Complex64 {
        self.entries[0][0] + self.entries[1][1]
    }

    pub fn apply(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        let e = &self.entries;
        [e[0][0] * v[0] + e[0][1] * v[1], e[1][0] * v[0] + e[1][1] * v[1]]
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.entries.iter().flatten().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn base_origin_is_zero_matrix() {
        let h = ModelSpec::base().evaluate(ParamPoint::ORIGIN);
        assert!(h.entries.iter().flatten().all(|e| *e == c(0.0, 0.0)));
    }

    #[test]
    fn base_unit_x_is_sigma_x() {
        let h = ModelSpec::base().evaluate(ParamPoint::new(1.0, 0.0, 0.0));
        assert_eq!(h.entries, [[c(0.0, 0.0), c(1.0, 0.0)], [c(1.0, 0.0), c(0.0, 0.0)]]);
    }

    #[test]
    fn z_quadratic_vanishes_at_endpoint() {
        let m = ModelSpec::z_quadratic(0.5).unwrap();
        let h = m.evaluate(ParamPoint::new(0.0, 0.0, 0.5));
        assert!(h.entries.iter().flatten().all(|e| e.norm() == 0.0));
    }

    #[test]
    fn field_vectors() {
        assert_eq!(
            ModelSpec::base().field_vector(ParamPoint::new(1.0, 2.0, 3.0)),
            [1.0, 2.0, 3.0]
        );
        let zq = ModelSpec::z_quadratic(0.5).unwrap();
        assert_eq!(zq.field_vector(ParamPoint::new(0.0, 0.0, 1.0)), [0.0, 0.0, 0.75]);
        let xc = ModelSpec::x_cubic(-0.5, 0.2, 0.8).unwrap();
        let f = xc.field_vector(ParamPoint::new(0.2, 0.0, 0.0));
        assert!(f.iter().all(|v| v.abs() < 1e-15), "{f:?}");
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(matches!(ModelSpec::z_quadratic(0.0), Err(Error::InvalidModel(_))));
        assert!(matches!(ModelSpec::z_quadratic(-1.0), Err(Error::InvalidModel(_))));
        assert!(ModelSpec::x_cubic(0.2, -0.5, 0.8).is_err());
        assert!(ModelSpec::x_cubic(0.2, 0.2, 0.8).is_err());
        assert!(ModelSpec::x_cubic(f64::NAN, 0.2, 0.8).is_err());
    }

    #[test]
    fn from_name_defaults_and_unknown_keys() {
        let none = BTreeMap::new();
        let zq = ModelSpec::from_name("z-quadratic", &none).unwrap();
        assert_eq!(zq.kind(), &ModelKind::ZQuadratic { z0: 0.5 });
        let mut bad = BTreeMap::new();
        bad.insert("Z0".to_string(), 0.3);
        assert!(ModelSpec::from_name("base", &bad).is_err());
        assert!(ModelSpec::from_name("cubic", &none).is_err());
    }

    #[test]
    fn custom_models_are_flagged() {
        let m = ModelSpec::custom(
            "tilted",
            Polynomial::variable(0),
            Polynomial::variable(1),
            Polynomial::univariate(2, &[0.1, 1.0]),
        );
        assert!(!m.validated());
        assert!(ModelSpec::base().validated());
    }

    #[test]
    fn jacobian_of_cubic() {
        let xc = ModelSpec::x_cubic(-0.5, 0.2, 0.8).unwrap();
        let j = xc.jacobian(ParamPoint::new(0.2, 0.0, 0.0));
        // (X2 − X1)(X2 − X3)
        assert!((j[0][0] - 0.7 * -0.6).abs() < 1e-14);
        assert_eq!(j[1], [0.0, 1.0, 0.0]);
        assert_eq!(j[2], [0.0, 0.0, 1.0]);
    }
}
