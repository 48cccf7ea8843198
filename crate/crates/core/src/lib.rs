//! Minimal supersolutions of the porous medium equation `∂t u − Δ u^m = 0`
//! (`m > 1`) above bounded obstacles, computed by an alternating sequence of
//! box problems on a space-time grid, together with ε-approximations, weak
//! Harnack quantities and a battery of invariant checks.

pub mod approximation;
pub mod error;
pub mod field;
pub mod grid;
pub mod harnack;
pub mod obstacle;
pub mod pme;
pub mod runconfig;
pub mod verify;

pub use error::{Error, Result};
pub use field::ScalarField;
pub use grid::{build_grid, enumerate_boxes, parabolic_boundary, SpaceTimeBox, SpaceTimeGrid};
pub use obstacle::{Obstacle, ObstacleConfig, Regularity};
pub use pme::SolverConfig;
