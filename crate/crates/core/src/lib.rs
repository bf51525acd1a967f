#![allow(clippy::neg_cmp_op_on_partial_ord)]

//! Detection of double-decker buses in LiDAR scans and exclusion of the GNSS
//! satellites they block, ahead of weighted least-squares positioning.

pub mod config;
pub mod detection;
pub mod exclusion;
pub mod pointcloud;
pub mod simkit;
pub mod skygeom;
pub mod solver;

pub use config::{ConfigError, RunConfig};
pub use detection::{detect_buses, BoundaryFile, BusBoundary3D, BusClassifierConfig, DetectError, ObbDescriptor};
pub use exclusion::{exclude_nlos, is_blocked, ExclusionConfig, ExclusionDecision, Reason, Verdict};
pub use pointcloud::{euclidean_cluster, Cluster, Point3, PointCloud};
pub use simkit::{run_scenario, synth_epoch, BoxPose, Scenario};
pub use skygeom::{project_boundary, AzEl, SkyBoundary};
pub use solver::{run_methods, solve_ls, solve_wls, Epoch, Method, PositionSolution, SatelliteObservation, SolveError};
