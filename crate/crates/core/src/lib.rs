//! Collaborative target localization with multiple semi-passive intelligent
//! reflecting surfaces.
//!
//! Modules are layered bottom-up: [`model`] builds scenes and signals,
//! [`fisher`] computes Cramér-Rao bounds, [`delay`] and [`anm`] estimate
//! cascade delays and angles, [`localize`] turns measurements into positions
//! and [`bench`] runs seeded Monte Carlo experiments.

pub mod anm;
pub mod api;
pub mod bench;
pub mod delay;
pub mod error;
pub mod fisher;
pub mod linalg;
pub mod localize;
pub mod model;
pub mod optim;
pub mod seed;

pub use error::{Error, Result};
