//! Distributed optimal output consensus for uncertain nonlinear agents over
//! unbalanced directed networks.
//!
//! Every agent owns a private convex cost. A distributed coordinator drives
//! local references to the minimizer of the summed cost while estimating the
//! network's left Laplacian eigenvector online; each agent then tracks its
//! reference under sinusoidal disturbances with a high-gain observer,
//! saturated feedback and an internal model.

pub mod batch;
pub mod controller;
pub mod coordinator;
pub mod cost;
pub mod error;
pub mod graph;
pub mod observer;
pub mod plant;
pub mod poly;
pub mod regulator;
pub mod reproduce;
pub mod rng;
pub mod scenario;
pub mod sim;
pub mod validate;

pub use error::{Error, Result};
pub use scenario::Scenario;
pub use sim::{metrics, run, MetricsReport, Model, Trajectory};
