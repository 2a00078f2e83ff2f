//! Numerics for focus–saddle homoclinic tangencies: first-return maps,
//! Neimark–Sacker points and their first Lyapunov coefficient, cone fields,
//! unstable-set growth and contraction solvers for implicit equations.

pub mod contraction;
pub mod eigen;
pub mod error;
pub mod fixed_point;
pub mod hopf;
pub mod invariance;
pub mod map;
pub mod poly;
pub mod tangency;

pub use error::{Error, Result};
