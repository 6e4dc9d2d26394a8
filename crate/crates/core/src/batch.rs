//! Independent runs executed as a batch.
//!
//! Trajectories share nothing, so with the `parallel` feature the batch fans out
//! over rayon; the result order always matches the input order.

use crate::error::Result;
use crate::sim::{run, Model, Trajectory};

pub fn run_batch_sequential(models: &[Model]) -> Vec<Result<Trajectory>> {
    models.iter().map(run).collect()
}

#[cfg(feature = "parallel")]
pub fn run_batch(models: &[Model]) -> Vec<Result<Trajectory>> {
    use rayon::prelude::*;
    models.par_iter().map(run).collect()
}

#[cfg(not(feature = "parallel"))]
pub fn run_batch(models: &[Model]) -> Vec<Result<Trajectory>> {
    run_batch_sequential(models)
}
