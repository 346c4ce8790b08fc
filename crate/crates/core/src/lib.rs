//! k-means SSE profiles and a catalog of cluster-count selection criteria.
//!
//! The crate is organized bottom-up:
//!
//! - [`dataset`]: toy data generators and CSV point files
//! - [`kmeans`]: Lloyd iterations with k-means++ seeding and seeded restarts
//! - [`profile`]: the SSE-over-k sweep every criterion consumes
//! - [`criteria`]: elbow detectors, variance ratios, BIC, distance indices
//!   and the gap statistic
//! - [`report`]: running criteria in bulk and rendering comparison tables
//!
//! Data-parallel loops (restart sweeps, reference clusterings, pairwise
//! distances) go through [`exec::Execution`]. With the `parallel` feature
//! (on by default) they run on rayon; without it every path is sequential.
//! Both produce bitwise-identical results for the same seeds.

pub mod criteria;
pub mod dataset;
pub mod error;
pub mod exec;
pub mod kmeans;
mod numeric;
pub mod profile;
pub mod report;
pub mod rng;

pub use criteria::{CriterionResult, Flag};
pub use dataset::{Dataset, Family, GeneratorSpec, Placement};
pub use error::{Error, Result};
pub use exec::Execution;
pub use kmeans::ClusteringSolution;
pub use profile::SseProfile;
