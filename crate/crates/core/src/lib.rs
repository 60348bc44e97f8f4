//! 2D finite-difference time-domain acoustics.
//!
//! A scene (domain, rigid rectangular obstacles, one source, listener
//! clusters) is discretized onto a staggered grid, excited with an
//! exponential sine sweep and simulated with a leapfrog FDTD solver behind
//! a perfectly matched layer. Microphone recordings are deconvolved into
//! four-channel true-stereo impulse responses. The [`validation`] module
//! compares the solver against the 2D free-space Green's function and
//! measures runtime scaling.

// `!(x > 0.0)` also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ir;
pub mod scene;
pub mod signals;
pub mod solver;
pub mod validation;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Scene(#[from] scene::SceneError),
    #[error(transparent)]
    Signal(#[from] signals::SignalError),
    #[error(transparent)]
    Solver(#[from] solver::SolverError),
    #[error(transparent)]
    Ir(#[from] ir::IrError),
    #[error(transparent)]
    Validation(#[from] validation::ValidationError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
