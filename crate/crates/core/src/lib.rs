//! Estimators for daily electricity price dynamics and volatility.
//!
//! The crate provides the building blocks of a daily price study: hourly to
//! daily aggregation, calendar covariates, penalized spline smoothing, an
//! additive conditional mean fitted by backfitting, two conditional variance
//! models (a GARCH recursion with a logistic intervention term and a fully
//! non-parametric additive model on squared residuals), a nested-model
//! F-test, a synthetic data generator for calibration studies, CSV
//! interchange, and a multi-zone pipeline driver.

pub mod additive;
pub mod calendar;
pub mod error;
pub mod garch;
pub mod io;
pub mod models;
mod optim;
pub mod pipeline;
pub mod series;
pub mod smoother;
pub mod synthetic;

pub use error::{Error, Result};
