//! Semantic cluster maps of pole-like landmarks, cluster association,
//! relocalization and odometry drift correction.
//!
//! The crate is `no_std` and needs only `alloc`. File formats and the
//! command-line front end live in the `polemap` crate.

#![no_std]

extern crate alloc;

pub mod association;
pub mod cluster;
pub mod extraction;
pub mod geometry;
pub mod kdtree;
pub mod localization;
pub mod map;
pub mod registration;
pub mod relocalization;
pub mod sim;

pub use nalgebra;

pub use association::{AssociationParams, MatchPair};
pub use cluster::{Cluster, ClusterId, Frame, LabeledPoint, SemanticLabel};
pub use geometry::Pose;
pub use map::ClusterMap;
