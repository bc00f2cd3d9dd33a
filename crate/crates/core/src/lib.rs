//! Safe landing site detection for small multirotors.
//!
//! A downward depth camera and a per-pixel semantic segmentation are fused
//! into a 2D log-odds safety map. Points are first gated by class, then by
//! local plane fits (slope and roughness), and the map is searched for the
//! cheapest all-safe square patch.

// `!(x > 0.0)` is how NaN gets rejected along with the bad values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cloud;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod io;
pub mod selector;
pub mod semantics;
pub mod sim;

pub use error::{Error, Result};
