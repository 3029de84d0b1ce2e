//! Minkowski weighted k-means.
//!
//! Clusters data while learning, for every cluster, a weight per feature
//! and a Minkowski centre. Alongside the algorithm the crate exposes the
//! closed-form view of its objective (a scaled sum of power means of the
//! within-cluster dispersions), the bounds that follow from it, and the
//! laws the learned weights obey, so that runs can be checked against them.
//!
//! ```
//! use mwkmeans::{engine, model::{validate_dataset, MwkConfig}};
//!
//! let data = validate_dataset(&[
//!     vec![0.0, 0.3], vec![0.1, -0.2], vec![5.0, 0.1], vec![5.2, -0.1],
//! ]).unwrap();
//! let report = engine::run_restarts(&data, &MwkConfig::new(2, 1.5).with_restarts(4)).unwrap();
//! let best = report.best();
//! assert_eq!(best.final_state.assignments[0], best.final_state.assignments[1]);
//! assert_ne!(best.final_state.assignments[0], best.final_state.assignments[2]);
//! ```

pub mod data;
pub mod engine;
pub mod error;
pub mod experiment;
pub mod geometry;
pub mod model;
pub mod theory;
pub mod verify;
pub mod weighting;

pub use error::{Error, Result};
