//! Graph-structured sparse optimization.
//!
//! Stochastic variance-reduced iterative hard thresholding (GraphSVRG-IHT and
//! GraphSCSG-IHT) over a weighted graph model, together with the head/tail
//! projections they rely on, the IHT-family baselines, calculators for the
//! convergence constants, and a synthetic experiment harness.
//!
//! Module map:
//!
//! - [`graph`]: graphs, supports, the weighted graph model and generators.
//! - [`pcsf`]: prize-collecting Steiner forest (Goemans-Williamson moat growing).
//! - [`projection`]: head, tail, exact and top-k projections.
//! - [`objective`]: least-squares and logistic losses with gradient oracles.
//! - [`solver`]: IHT, StoIHT, GraphSto-IHT, GraphSVRG-IHT, GraphSCSG-IHT.
//! - [`theory`]: RSC/RSS estimation, learning-rate interval, contraction constants.
//! - [`harness`]: instance generation, sweeps, trace CSV and SVG plots.

pub mod error;
pub mod graph;
pub mod harness;
pub mod objective;
pub mod pcsf;
pub mod projection;
pub mod solver;
pub mod theory;

pub use error::{Error, Result};
pub use graph::{Graph, Support, WgmModel};
pub use objective::{Dataset, GradientAccount, LossKind};
pub use projection::ProjectionOutcome;
pub use solver::{Method, RunOutput, ScsgOption, SolverConfig, Trace};
