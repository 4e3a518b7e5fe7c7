//! Link prediction on duplex financial/social correlation networks.
//!
//! Pipeline: [`panel`] loads and windows aligned return and opinion series,
//! [`correlate`] computes Kendall correlation matrices, [`netbuild`] filters
//! them into graphs, [`multiplex`] derives persistence and triadic-closure
//! features, [`model`] fits nested logistic models, [`evaluate`] scores
//! predictions and [`backtest`] runs the walk-forward experiment.
//! [`synth`] generates datasets with known dynamics.

pub mod backtest;
pub mod cli;
pub mod correlate;
pub mod error;
pub mod evaluate;
pub mod model;
pub mod multiplex;
pub mod netbuild;
pub mod output;
pub mod panel;
pub mod synth;

pub use error::{Error, ErrorClass, Result};
