//! Monocular corridor-centering for small UAVs.
//!
//! A drone flying down a corridor is kept on the corridor's central bisector
//! line (CBL) using two image-derived signals: the angle the projected CBL
//! makes with the bottom image border (lateral offset) and the column where
//! it crosses the image midline (heading). This crate computes both signals
//! in closed form and from rendered marker images, trains a small
//! convolutional regressor to predict them from plain frames, and flies a
//! simulated quadrotor with the resulting bang-bang controller.
//!
//! Module map:
//! - [`geometry`]: corridor, pose, camera and closed-form labels
//! - [`render`]: synthetic frames and marker placement
//! - [`labeler`]: marker detection and label extraction
//! - [`dataset`]: capture grid, generation, manifests, preprocessing
//! - [`estimator`]: oracle and learned deviation estimators, training
//! - [`controller`]: the correction state machine
//! - [`flightsim`]: closed-loop episodes and sweeps
//! - [`metrics`]: MSE / MAE / MRE and evaluation reports

// Validation uses `!(x > 0.0)` so that NaN is rejected along with
// out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod controller;
pub mod dataset;
pub mod estimator;
pub mod flightsim;
pub mod geometry;
pub mod labeler;
pub mod metrics;
pub mod render;
