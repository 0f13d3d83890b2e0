//! Dynamics of a ball bouncing inside a harmonically driven cylinder, used
//! as a vibro-impact energy harvester.
//!
//! The ball's motion relative to the cylinder is piecewise smooth between
//! two barriers. This crate integrates it in closed form, locates impacts,
//! solves for 1:1 and 2:1 periodic orbits, computes their linear stability,
//! follows branches in the gap length, scans for grazing transitions and
//! estimates harvested energy.

pub mod energy;
pub mod error;
pub mod export;
pub mod flight;
pub mod model;
pub mod newton;
pub mod par;
pub mod presets;
pub mod simulator;
pub mod solver;
pub mod stability;
pub mod sweep;

pub use error::{Error, Result};
pub use flight::{ImpactEvent, Side};
pub use model::{cosine_forcing, CosineForcing, Forcing, PhysicalParams, SystemParams};
pub use simulator::{
    classify_pattern, simulate, ImpactSequence, InitialState, PatternLabel, SimulationConfig,
};
pub use solver::{solve_1to1, solve_2to1, Orbit11, Orbit21, SolvedOrbit};

pub use stability::{StabilityClass, StabilityReport};
