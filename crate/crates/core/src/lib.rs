//! Radially symmetric necrotic tumor growth under periodic nutrient supply.
//!
//! The tumor radius obeys `dR/dt = R·G(φ(t), R)`, where the growth functional
//! `G` comes from a stationary free-boundary problem for the nutrient inside
//! the tumor. This crate solves that boundary-value problem, integrates the
//! radius equation, and classifies the long-run behavior (extinction or a
//! unique attracting periodic orbit) from the sign of the period-averaged
//! net proliferation rate.

// `!(x > 0.0)` is deliberate: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dynamics;
pub mod error;
pub mod growth;
pub mod model;
pub mod ode;
pub mod periodic;
pub mod quadrature;
pub mod radial;
pub mod roots;

pub use error::{Error, Result};
