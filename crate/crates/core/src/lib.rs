//! Kalman filtering under colored process noise with online learning of the
//! noise coloring from innovation whiteness.
//!
//! * [`model`]: plant, coloring filter, augmentation, pendulum discretization
//! * [`kalman`]: filter recursions and steady-state quantities
//! * [`whiteness`]: autocorrelation, whiteness cost, spectral diagnostics
//! * [`iwakf`]: the adaptive filter and its optimizer
//! * [`sim`]: truth simulation and the pendulum experiment
//! * [`report`]: CSV artifacts

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod kalman;
pub mod iwakf;
pub mod model;
pub mod report;
pub mod sim;
pub mod whiteness;

pub use error::{Error, Result};
pub use kalman::{FilterState, StepRecord};
pub use model::{AugmentedSystem, ColoringFilter, LtiSystem, NoiseSpec};
