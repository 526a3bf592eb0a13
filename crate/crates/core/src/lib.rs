//! Adiabatic holonomy engine for periodically kicked spin systems.
//!
//! Pipeline: [`models`] builds Floquet operators, [`eigenframe`] diagonalizes and
//! continues frames around a closed loop, [`holonomy`] turns a continued bundle into
//! `M = W B`, and [`propagate`] provides a brute-force adiabatic evolution to check it
//! against. [`oracles`] holds the closed-form solutions of the kicked spin models.

pub mod eigenframe;
pub mod error;
pub mod holonomy;
pub mod matrix;
pub mod models;
pub mod oracles;
pub mod propagate;
pub mod report;

pub use eigenframe::{bundle_along, frame_at, Bundle, Frame, GaugePolicy, LoopDef};
pub use error::{HolonomyError, Result};
pub use holonomy::{classify_permutation, holonomy_m, HolonomyResult};
pub use matrix::{CMatrix, C64};
pub use models::{Coord, ModelKind, ModelSpec, ParameterPoint};
pub use oracles::{analytic_holonomies, OracleValues};
pub use propagate::{dynamical_phase, extract_geometric, stroboscopic_evolve, Schedule};
