//! Synthetic residential demand and rooftop-PV generation profiles.
//!
//! The pipeline learns a handful of small nonparametric models from observed
//! half-hourly smart-meter data and samples new profiles for customers that
//! were never metered:
//!
//! - [`clustering`]: k-means and MAP-DP clustering of continuous customer
//!   features (e.g. peak PV reading as a capacity proxy).
//! - [`feature_assignment`]: Dirichlet-categorical sampling of feature counts
//!   for an unobserved population and their assignment to prosumers.
//! - [`demand_chain`]: 48-slot time-inhomogeneous Markov chains over 0.01 kWh
//!   demand states, Gaussian-kernel row smoothing, and personalized,
//!   urn-reinforced multi-day sampling.
//! - [`solar_gen`]: `P = η·A·TIF·CI·G` generation with a clearness-index chain.
//! - [`validation`]: error metrics, autocorrelation, heatmaps, aggregates.
//!
//! [`data_model`] holds the ingest types and a ground-truth generator used as
//! an oracle in tests; [`io`] holds the shared file formats.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod clustering;
pub mod data_model;
pub mod demand_chain;
pub mod error;
pub mod feature_assignment;
pub mod io;
pub mod rng;
pub mod solar_gen;
pub mod validation;

pub use error::{Error, Result};

/// Half-hour slots per day.
pub const SLOTS_PER_DAY: usize = 48;
/// Length of one slot in hours.
pub const SLOT_HOURS: f64 = 0.5;
