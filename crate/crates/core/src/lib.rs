//! Simulator and design validator for a two-slit experiment in which the
//! scanning screen detector is replaced by a tilted mirror that folds each
//! slit's light onto its own detector.
//!
//! Coordinates are two-dimensional: the diaphragm lies on `y = 0` with the
//! slits at `(±d/2, 0)`, and the mirror is scanned along the screen line
//! `y = L`. All lengths are meters and all angles radians.

// `!(a > b)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod design;
mod error;
pub mod geometry;
pub mod montecarlo;
pub mod wavemodel;

pub use error::{Error, Result};
pub use geometry::{Apparatus, DetectorLayout, MirrorPlacement, Point2, Ray2};
pub use montecarlo::{OutcomeHypothesis, ScanConfig, ScanRecord, ScanSummary};
pub use wavemodel::{DualityPoint, FringePattern};
