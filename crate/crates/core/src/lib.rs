//! Rothman diagrams for stratified cohort studies.
//!
//! A stratum is a point (risk among the unexposed, risk among the exposed) in
//! the unit square. Standardization moves along the convex hull of those
//! points; measures of association are families of contours over the square.

pub mod cli;
pub mod diagnostics;
pub mod fixtures;
pub mod geometry;
pub mod glm;
pub mod json;
pub mod measures;
pub mod render;
pub mod simulate;
pub mod tables;
