//! bladeqc: human-in-the-loop quality control for wind-turbine blade
//! inspection imagery.
//!
//! The pieces, bottom-up:
//!
//! - [`geometry`]: polygons, hulls, minimum-area rectangles, pixel-grid IoU.
//! - [`mask`]: dense and run-length masks, connected components, contours.
//! - [`clue`]: turns model instance masks into analyst-facing rotated boxes.
//! - [`metrics`]: damage-level recall/precision with one-or-many union matching.
//! - [`store`]: jobs, images, annotations and the append-only event journal.
//! - [`workflow`]: A/B arm assignment and the per-image two-stage QC state machine.
//! - [`analytics`]: clue conversion and per-picture productivity dashboards.
//! - [`service`] and [`cli`]: HTTP JSON API and command-line front ends.

pub mod analytics;
pub mod cli;
pub mod clue;
pub mod error;
pub mod geometry;
pub mod mask;
pub mod metrics;
pub mod service;
pub mod store;
pub mod workflow;

pub use error::{Error, Result};
