//! Approximately unbiased and selective-inference p-values from multiscale
//! bootstrap probabilities.
//!
//! The crate is organised around the problem of regions: an observation
//! `y ~ N(mu, I)` and a region `R` whose hypothesis `mu in R` is tested. Every
//! p-value is a function of two geometric quantities of `R` seen from `y`, the
//! signed distance `beta0` and the mean curvature `beta1`:
//!
//! * [`normal_theory`] maps geometry to BP, AU and SI p-values and back.
//! * [`scaling_fit`] estimates the geometry by fitting scaling-law models to
//!   multiscale bootstrap counts.
//! * [`rell`] produces those counts for phylogenetic trees and edges by
//!   resampling site-wise log-likelihoods.
//! * [`phylo`] handles tree topologies, edge splits and region counting.
//! * [`simulator`] provides regions of known geometry and type-I error
//!   experiments.
//! * [`modelmap`] builds the model-map embedding of site-wise log-likelihoods.

pub mod error;
pub mod modelmap;
pub mod normal_theory;
pub mod phylo;
pub mod rell;
mod rng;
pub mod scaling_fit;
pub mod simulator;

pub use error::{Error, Result};
pub use normal_theory::{GeometricQuantities, PValueTriple, TestMode};
pub use phylo::{EdgePartition, Topology};
pub use rell::{BootstrapConfig, ItemGroup, SitewiseLogLik};
pub use simulator::{ExperimentReport, RegionSpec};
pub use scaling_fit::{AveragedFit, ModelKind, MultiscaleCounts, ScaleGrid, ScalingModelFit};
