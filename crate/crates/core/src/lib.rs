//! Multi-principal mechanism design on finite spaces.
//!
//! Each of several teams has a principal who commits to a mechanism that
//! recommends actions to its members from their reported types and pays
//! rewards out of the team's random winnings. The crate builds outcome laws,
//! incentive constraints and principal best responses, runs best-response
//! dynamics, and measures distances between mechanism profiles.

pub mod error;
pub mod incentives;
pub mod laws;
pub mod metrics;
pub mod model;
pub mod scenarios;
pub mod solver;
pub mod spaces;

pub use error::{Error, Result};
pub use model::{GameParts, GameSpec, MechanismZ};
