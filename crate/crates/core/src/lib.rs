//! Dirac strings, monopole charges and geometric phases of two-mode
//! Hamiltonians `H(R) = fz σz + fx σx + fy σy`.
//!
//! The eigenstates are kept unnormalized so that their zero sets (Dirac
//! strings) stay visible. String endpoints are located and matched against
//! energy degeneracies, the Berry connection is obtained from the phase
//! gradient of the states, and closed-loop phases are computed along several
//! independent routes: line integrals of the connection, discrete Wilson
//! loops, monopole flux plus string crossings, and direct integration of the
//! time-dependent Schrödinger equation.

pub mod adiabatic;
pub mod eigen;
pub mod error;
pub mod gauge;
pub mod holonomy;
pub mod model;
pub mod quadrature;
pub mod reproduce;
pub mod strings;

pub use eigen::{Branch, EigenPair, Gauge};
pub use error::{Error, Result};
pub use model::{HermitianMatrix2, ModelSpec, ParamPoint, Polynomial};
