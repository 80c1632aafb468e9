//! Estimation and inference for boundary discontinuity designs.
//!
//! A bivariate score and a known boundary curve split the score support into
//! a control region and a treatment region; units are treated according to
//! which side of the curve their score falls on. This crate provides:
//!
//! * [`geometry`] — oriented polyline boundaries, signed distances, segment
//!   partitions, boundary discretization, and arclength line integrals;
//! * [`regress`] — polynomial bases, kernel weights, and weighted least
//!   squares with heteroskedasticity-robust covariance;
//! * [`pooled`] — the eight pooled regression specifications, with
//!   conventional and robust bias-corrected inference for the boundary
//!   average treatment effect;
//! * [`curve`] — boundary-point-specific treatment-effect curves (distance-
//!   and location-based), pointwise intervals, sup-t uniform bands, and
//!   weighted/largest aggregate effects;
//! * [`bandwidth`] — plug-in MSE-optimal bandwidth selection;
//! * [`dgp`], [`mc`], [`eq9`] — a seeded simulation harness for coverage,
//!   rate, and tubular-integral convergence experiments.
//!
//! The `bdd` binary wires these into `estimate`, `simulate`, `mc`, and
//! `rdplot` subcommands; see the README for file formats.

// `!(x > 0.0)` guards are deliberate: they reject NaN along with
// nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandwidth;
pub mod curve;
pub mod data;
pub mod dgp;
pub mod emit;
pub mod eq9;
pub mod error;
pub mod frame;
pub mod geometry;
pub mod mc;
pub mod pooled;
pub mod regress;

pub use error::Error;
pub use frame::SampleFrame;
pub use geometry::{Boundary, Point, Region, SegmentPartition, Side};
