//! Command-line front end: JSON configs, scenario runners, reproduction
//! recipes, and SVG rendering.

pub mod app;
pub mod commands;
pub mod config;
pub mod error;
pub mod output;
pub mod plot;
pub mod recipes;
