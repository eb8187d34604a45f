//! Closed-form eigensystem of the two-mode Hamiltonian.
//!
//! Eigenvectors are kept unnormalized, in the literal form
//! `V± = (fz ± ρ, fx + i fy)` with `ρ = |f|`. Their zero sets are the Dirac
//! strings; normalizing would erase them. Components that would suffer
//! cancellation (`fz + ρ` for `fz < 0`, `fz − ρ` for `fz > 0`) are evaluated in
//! the algebraically identical form `±(fx² + fy²)/(ρ ∓ fz)` so that densities
//! near a string keep full relative precision.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelSpec, ParamPoint};

/// Nodal threshold on the normalized density `‖V‖²/(2ρ)²`.
pub const TAU_STRING: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
}

impl Branch {
    pub const BOTH: [Branch; 2] = [Branch::Plus, Branch::Minus];

    /// `+1` for the upper branch, `−1` for the lower.
    pub fn sign(self) -> f64 {
        match self {
            Branch::Plus => 1.0,
            Branch::Minus => -1.0,
        }
    }

    pub fn other(self) -> Branch {
        match self {
            Branch::Plus => Branch::Minus,
            Branch::Minus => Branch::Plus,
        }
    }

    /// Monopole charge carried by the branch at a simple degeneracy with
    /// positive Jacobian determinant.
    pub fn monopole_charge(self) -> f64 {
        -0.5 * self.sign()
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Branch::Plus => "plus",
            Branch::Minus => "minus",
        })
    }
}

impl std::str::FromStr for Branch {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "plus" | "+" => Ok(Branch::Plus),
            "minus" | "-" => Ok(Branch::Minus),
            other => Err(Error::InvalidArgument(format!("unknown branch '{other}'"))),
        }
    }
}

/// Choice of eigenvector form.
///
/// `Standard` is `(fz ± ρ, fx + i fy)`. `Alternate` is `(fx − i fy, ρ − fz)`
/// for the upper branch and `(fx − i fy, −(ρ + fz))` for the lower one. Each
/// equals the standard vector times a phase `∝ e^{−i arg(fx + i fy)}` and a
/// positive factor, so its string sits on the opposite half-line.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gauge {
    #[default]
    Standard,
    Alternate,
}

/// `ρ + s·fz` for `s = ±1` without cancellation.
fn rho_plus_signed_fz(f: [f64; 3], rho: f64, s: f64) -> f64 {
    let fz = s * f[2];
    if fz >= 0.0 {
        rho + fz
    } else {
        (f[0] * f[0] + f[1] * f[1]) / (rho - fz)
    }
}

/// Unnormalized eigenvector for the field `f`. Zero at `ρ = 0`.
pub fn state_from_field(f: [f64; 3], branch: Branch, gauge: Gauge) -> [Complex64; 2] {
    let rho = (f[0] * f[0] + f[1] * f[1] + f[2] * f[2]).sqrt();
    if rho == 0.0 {
        return [Complex64::new(0.0, 0.0); 2];
    }
    match (branch, gauge) {
        (Branch::Plus, Gauge::Standard) => [
            Complex64::new(rho_plus_signed_fz(f, rho, 1.0), 0.0),
            Complex64::new(f[0], f[1]),
        ],
        (Branch::Minus, Gauge::Standard) => [
            Complex64::new(-rho_plus_signed_fz(f, rho, -1.0), 0.0),
            Complex64::new(f[0], f[1]),
        ],
        (Branch::Plus, Gauge::Alternate) => [
            Complex64::new(f[0], -f[1]),
            Complex64::new(rho_plus_signed_fz(f, rho, -1.0), 0.0),
        ],
        (Branch::Minus, Gauge::Alternate) => [
            Complex64::new(f[0], -f[1]),
            Complex64::new(-rho_plus_signed_fz(f, rho, 1.0), 0.0),
        ],
    }
}

/// Unnormalized eigenvector of `model` at `r`.
pub fn eigenvector(model: &ModelSpec, r: ParamPoint, branch: Branch, gauge: Gauge) -> [Complex64; 2] {
    state_from_field(model.field_vector(r), branch, gauge)
}

pub fn norm_sqr(v: &[Complex64; 2]) -> f64 {
    v[0].norm_sqr() + v[1].norm_sqr()
}

/// `⟨a|b⟩`.
pub fn inner(a: &[Complex64; 2], b: &[Complex64; 2]) -> Complex64 {
    a[0].conj() * b[0] + a[1].conj() * b[1]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EigenPair {
    pub branch: Branch,
    pub gauge: Gauge,
    pub energy: f64,
    /// Unnormalized eigenvector.
    pub vector: [Complex64; 2],
    /// Effective radius `|f|`.
    pub rho: f64,
    pub field: [f64; 3],
    pub on_string: bool,
    pub degenerate: bool,
}

impl EigenPair {
    fn build(field: [f64; 3], branch: Branch, gauge: Gauge) -> Self {
        let rho = (field[0] * field[0] + field[1] * field[1] + field[2] * field[2]).sqrt();
        let vector = state_from_field(field, branch, gauge);
        let degenerate = rho == 0.0;
        let on_string = degenerate || norm_sqr(&vector) <= TAU_STRING * (2.0 * rho).powi(2);
        EigenPair {
            branch,
            gauge,
            energy: branch.sign() * rho,
            vector,
            rho,
            field,
            on_string,
            degenerate,
        }
    }
}

/// Both eigenpairs at `r`, upper branch first.
pub fn eigensystem(model: &ModelSpec, r: ParamPoint) -> (EigenPair, EigenPair) {
    let f = model.field_vector(r);
    (
        EigenPair::build(f, Branch::Plus, Gauge::Standard),
        EigenPair::build(f, Branch::Minus, Gauge::Standard),
    )
}

/// Single eigenpair at `r` in the requested gauge.
pub fn eigenpair(model: &ModelSpec, r: ParamPoint, branch: Branch, gauge: Gauge) -> EigenPair {
    EigenPair::build(model.field_vector(r), branch, gauge)
}

/// `‖V‖²/(2ρ)²`: zero on the string, one at the antipodal direction.
pub fn normalized_density(pair: &EigenPair) -> Result<f64> {
    if pair.degenerate {
        return Err(Error::DegeneratePoint(ParamPoint::from_array(pair.field)));
    }
    Ok(norm_sqr(&pair.vector) / (2.0 * pair.rho).powi(2))
}

/// Normalized density straight from the field vector; `0` at a degeneracy.
pub fn density_of_field(f: [f64; 3], branch: Branch, gauge: Gauge) -> f64 {
    let rho2 = f[0] * f[0] + f[1] * f[1] + f[2] * f[2];
    if rho2 == 0.0 {
        return 0.0;
    }
    norm_sqr(&state_from_field(f, branch, gauge)) / (4.0 * rho2)
}

/// Re-expresses a pair in the alternate gauge (see [`Gauge`]).
pub fn gauge_alternate(pair: &EigenPair, _r: ParamPoint) -> EigenPair {
    EigenPair::build(pair.field, pair.branch, Gauge::Alternate)
}
