//! Optimal design of experiments for qubit process tomography.
//!
//! The crate is organised bottom-up:
//!
//! * [`quantum`] — Bloch-form states, POVMs and parametric channel families.
//! * [`fisher`] — classical and SLD quantum Fisher information, nuisance
//!   parameters and pseudo-inverses.
//! * [`design`] — optimality criteria, Löwner tests, binary-design analytics
//!   and a simplex optimizer for mixed designs.
//! * [`models`] — closed forms for the scaling, Pauli and noise-asymmetry
//!   examples.
//! * [`adaptive`] — Monte Carlo comparison of static and adaptive discrete
//!   designs for the noise asymmetry.

pub mod adaptive;
pub mod design;
pub mod error;
pub mod fisher;
pub mod linalg;
pub mod models;
pub mod quantum;

pub use error::{Error, Result};
